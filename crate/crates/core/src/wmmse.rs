//! Iterative WMMSE precoding over the fronthaul alphabet.
//!
//! The sum-rate problem is rewritten as a weighted sum-MSE problem in the
//! precoder `P`, the receiver gains `β` and the MSE weights `d`. The loop
//! alternates closed-form `β`/`d` updates with a precoder step. For the
//! quantized solvers the precoder step relaxes the power constraint with a
//! multiplier `ω`, splits into one integer least-squares problem per UE, and
//! searches `ω` by bisection while keeping only candidates that raise the
//! sum rate.
//!
//! Noise convention: the updates use `N̄0 = N0/α` with `α = sqrt(q/tr(PPᴴ))`
//! recomputed from the current precoder. Rates reported by [`sum_rate`] use
//! the physical precoder `αP` with the true noise `N0`.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::baselines::continuous_p3;
use crate::ep::{ep_solve, EpConfig};
use crate::error::{Error, Result};
use crate::ils::IlsProblem;
use crate::linalg::{self, CMat, CVec, RVec};
use crate::quantizer::QuantizerSpec;
use crate::sd::sphere_decode_sorted;

/// Lower clamp on the MSE weights.
pub const MIN_MSE_WEIGHT: f64 = 1e-12;
/// Largest multiplier tried while expanding the bisection bracket, in
/// units of [`omega_scale`].
pub const MAX_OMEGA: f64 = (1u64 << 30) as f64;
/// Lower end of the bisection bracket, in units of [`omega_scale`].
pub const OMEGA_FLOOR: f64 = 1e-4;
pub const MAX_BISECTION_STEPS: usize = 100;
/// Bracket width at which bisection stops, in units of [`omega_scale`].
pub const OMEGA_TOL: f64 = 1e-8;
/// Bisection stops once `|tr(PPᴴ) − q| < POWER_TOL_REL·q`.
pub const POWER_TOL_REL: f64 = 1e-3;

/// How the precoder subproblem is solved.
#[derive(Debug, Clone, PartialEq)]
pub enum SubproblemSolver {
    /// Infinite-resolution precoder in closed form.
    Continuous,
    /// Exact per-UE ILS via sphere decoding.
    Sphere(QuantizerSpec),
    /// Approximate per-UE ILS via expectation propagation.
    Ep(QuantizerSpec, EpConfig),
}

impl SubproblemSolver {
    pub fn quantizer(&self) -> Option<&QuantizerSpec> {
        match self {
            SubproblemSolver::Continuous => None,
            SubproblemSolver::Sphere(q) | SubproblemSolver::Ep(q, _) => Some(q),
        }
    }

    fn solve_ils(&self, prob: &IlsProblem) -> RVec {
        match self {
            SubproblemSolver::Ep(_, cfg) => ep_solve(prob, cfg).p,
            _ => sphere_decode_sorted(prob).p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmmseConfig {
    pub max_iterations: usize,
    pub convergence_threshold: f64,
    /// Per-UE rate weights `u_k`.
    pub ue_weights: Vec<f64>,
    pub power_budget: f64,
    pub noise_power: f64,
}

impl WmmseConfig {
    /// Unit weights, `N_max = 20`, `ε = 1e-4`.
    pub fn new(users: usize, power_budget: f64, noise_power: f64) -> Self {
        Self {
            max_iterations: 20,
            convergence_threshold: 1e-4,
            ue_weights: vec![1.0; users],
            power_budget,
            noise_power,
        }
    }

    pub fn validate(&self, users: usize) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.convergence_threshold > 0.0) {
            return Err(Error::invalid("convergence threshold must be positive"));
        }
        if self.ue_weights.len() != users {
            return Err(Error::invalid(format!(
                "expected {users} UE weights, got {}",
                self.ue_weights.len()
            )));
        }
        if self.ue_weights.iter().any(|&u| !(u >= 0.0 && u.is_finite())) {
            return Err(Error::invalid("UE weights must be finite and non-negative"));
        }
        if !(self.power_budget > 0.0 && self.power_budget.is_finite()) {
            return Err(Error::invalid("power budget must be positive"));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::invalid("noise power must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    pub precoder: CMat,
    pub beta: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub mse: Vec<f64>,
    pub omega: f64,
    /// `f⁽ⁿ⁾` for `n = 0..=iterations`.
    pub objective_trace: Vec<f64>,
    /// Weighted sum rate of each iterate.
    pub rate_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Regularized zero-forcing precoder `Hᴴ (H Hᴴ + (K N0/q) I)⁻¹`.
pub fn wf_init(h: &CMat, q: f64, n0: f64) -> Result<CMat> {
    if !(q > 0.0) || !(n0 >= 0.0) {
        return Err(Error::invalid("wf_init needs q > 0 and N0 >= 0"));
    }
    let k = h.nrows();
    let mut gram = h * h.adjoint();
    let reg = k as f64 * n0 / q;
    for i in 0..k {
        gram[(i, i)] += reg;
    }
    // P = Hᴴ X with (H Hᴴ + reg I) X = I
    let x = linalg::solve_hpd(&gram, &CMat::identity(k, k))
        .map_err(|_| Error::Singular("H Hᴴ + (K N0/q) I"))?;
    Ok(h.adjoint() * x)
}

/// `N0/α` for the current precoder; `N0` when `P = 0`.
pub fn effective_noise(p: &CMat, q: f64, n0: f64) -> f64 {
    match linalg::scaling_factor(p, q) {
        Some(alpha) => n0 / alpha,
        None => n0,
    }
}

fn received_power(hp: &CMat, k: usize) -> (f64, f64) {
    let signal = hp[(k, k)].norm_sqr();
    let total: f64 = hp.row(k).iter().map(|z| z.norm_sqr()).sum();
    (signal, total - signal)
}

/// `SINR_k(P)` with noise `nbar`.
pub fn sinr(h: &CMat, p: &CMat, k: usize, nbar: f64) -> f64 {
    let hp = h * p;
    let (s, i) = received_power(&hp, k);
    s / (i + nbar)
}

/// MMSE receiver gain `β̄_k = (h_kᵀp_k)* / (Σ_i |h_kᵀp_i|² + N̄0)`.
pub fn receiver_gain(h: &CMat, p: &CMat, k: usize, nbar: f64) -> Complex64 {
    let hp = h * p;
    let (s, i) = received_power(&hp, k);
    hp[(k, k)].conj() / (s + i + nbar)
}

/// Optimal MSE weight `d̄_k = u_k (1 + SINR_k) / ln 2`.
pub fn mse_weight(h: &CMat, p: &CMat, k: usize, nbar: f64, ue_weight: f64) -> f64 {
    ue_weight * (1.0 + sinr(h, p, k, nbar)) / LN_2
}

/// `e_k(P, β_k) = |β_k|² (Σ_i |h_kᵀp_i|² + N̄0) − 2 Re(β_k h_kᵀp_k) + 1`.
pub fn ue_mse(h: &CMat, p: &CMat, beta: Complex64, k: usize, nbar: f64) -> f64 {
    let hp = h * p;
    let (s, i) = received_power(&hp, k);
    beta.norm_sqr() * (s + i + nbar) - 2.0 * (beta * hp[(k, k)]).re + 1.0
}

/// Weighted sum-MSE objective `Σ_k d_k e_k − log2 d_k`.
pub fn wmmse_objective(weights: &[f64], mse: &[f64]) -> f64 {
    weights
        .iter()
        .zip(mse)
        .map(|(d, e)| d * e - d.log2())
        .sum()
}

/// Precoder-subproblem objective `Σ_k d_k e_k(P, β_k)`.
pub fn weighted_mse_sum(h: &CMat, p: &CMat, d: &[f64], beta: &[Complex64], nbar: f64) -> f64 {
    (0..h.nrows())
        .map(|k| d[k] * ue_mse(h, p, beta[k], k, nbar))
        .sum()
}

/// `V̂ = Hᴴ Dᴴ D H + ω I` with `D = sqrt(diag d)·diag β`.
pub fn lagrangian_hessian(h: &CMat, d: &[f64], beta: &[Complex64], omega: f64) -> CMat {
    let dh = scaled_rows(h, |k| Complex64::from(d[k].sqrt()) * beta[k]);
    let mut v = dh.adjoint() * dh;
    for i in 0..v.nrows() {
        v[(i, i)] += omega;
    }
    v
}

fn scaled_rows(h: &CMat, scale: impl Fn(usize) -> Complex64) -> CMat {
    let mut out = h.clone();
    for k in 0..h.nrows() {
        let s = scale(k);
        out.row_mut(k).iter_mut().for_each(|z| *z *= s);
    }
    out
}

/// Linear-term vector `f_i = d_i β_i h_i`, so the per-UE objective is
/// `p_iᴴ V̂ p_i − f_iᵀ p_i − (f_iᵀ p_i)*`.
pub fn linear_term(h: &CMat, d: &[f64], beta: &[Complex64], i: usize) -> CVec {
    h.row(i).transpose() * (beta[i] * d[i])
}

/// Per-UE ILS problems for a fixed multiplier, sharing one factorization.
///
/// The complex Cholesky factor of `V̂` embedded as `[[Re G, −Im G], [Im G,
/// Re G]]` is block-triangular but not triangular, so the triangular factor
/// used for the search is the real Cholesky factor of the embedded `V̂`.
/// Both satisfy `GᵀG = V̂_ℝ`. With `b_i = [Re f_i; −Im f_i]` and
/// `c_i = G⁻ᵀ b_i`, for every real `p`:
/// `‖c_i − G p‖² − c_iᵀc_i = pᴴV̂p − f_iᵀp − (f_iᵀp)*`.
#[derive(Debug, Clone)]
pub struct IlsReduction {
    pub hessian: CMat,
    pub problems: Vec<IlsProblem>,
}

impl IlsReduction {
    pub fn new(
        h: &CMat,
        d: &[f64],
        beta: &[Complex64],
        omega: f64,
        labels: &[f64],
    ) -> Result<Self> {
        let hessian = lagrangian_hessian(h, d, beta, omega);
        let embedded = linalg::real_embedding(&hessian);
        let chol = embedded
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("Lagrangian Hessian V̂"))?;
        let g = chol.l().transpose();
        let m = h.ncols();
        let problems = (0..h.nrows())
            .map(|i| {
                let f = linear_term(h, d, beta, i);
                let b = RVec::from_fn(2 * m, |r, _| if r < m { f[r].re } else { -f[r - m].im });
                let c = chol.l().solve_lower_triangular(&b).ok_or(Error::Singular("Gᵀ"))?;
                IlsProblem::new(g.clone(), c, labels.to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { hessian, problems })
    }
}

/// ILS problem of UE `i`.
pub fn reduce_to_ils(
    h: &CMat,
    d: &[f64],
    beta: &[Complex64],
    omega: f64,
    i: usize,
    labels: &[f64],
) -> Result<IlsProblem> {
    let mut red = IlsReduction::new(h, d, beta, omega, labels)?;
    if i >= red.problems.len() {
        return Err(Error::invalid(format!("UE index {i} out of range")));
    }
    Ok(red.problems.swap_remove(i))
}

/// Quantized precoder for a fixed multiplier: each column solves its own
/// ILS problem.
pub fn quantized_precoder(
    h: &CMat,
    d: &[f64],
    beta: &[Complex64],
    omega: f64,
    solver: &SubproblemSolver,
) -> Result<CMat> {
    let spec = solver
        .quantizer()
        .ok_or_else(|| Error::invalid("quantized_precoder needs a quantized solver"))?;
    let red = IlsReduction::new(h, d, beta, omega, spec.labels())?;
    let m = h.ncols();
    let mut p = CMat::zeros(m, h.nrows());
    for (i, prob) in red.problems.iter().enumerate() {
        let col = linalg::unstack_real(&solver.solve_ils(prob));
        p.set_column(i, &col);
    }
    Ok(p)
}

/// Weighted sum rate of the physical precoder `αP` with noise `N0`.
pub fn sum_rate(h: &CMat, p: &CMat, q: f64, n0: f64, weights: &[f64]) -> Result<f64> {
    let alpha = linalg::scaling_factor(p, q).ok_or_else(|| Error::invalid("precoder is zero"))?;
    if weights.len() != h.nrows() {
        return Err(Error::invalid("one weight per UE required"));
    }
    let hp = h * p * Complex64::from(alpha);
    Ok((0..h.nrows())
        .map(|k| {
            let (s, i) = received_power(&hp, k);
            weights[k] * (1.0 + s / (i + n0)).log2()
        })
        .sum())
}

fn rate_or_zero(h: &CMat, p: &CMat, cfg: &WmmseConfig) -> f64 {
    sum_rate(h, p, cfg.power_budget, cfg.noise_power, &cfg.ue_weights).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    pub omega: f64,
    pub precoder: CMat,
    pub rate: f64,
    /// Subproblem solves performed.
    pub evaluations: usize,
    /// Whether any candidate replaced the incumbent.
    pub improved: bool,
}

/// Natural unit of the multiplier: the mean eigenvalue `tr(HᴴDᴴDH)/M`,
/// or 1 when that is zero.
pub fn omega_scale(h: &CMat, d: &[f64], beta: &[Complex64]) -> f64 {
    let tr: f64 = (0..h.nrows())
        .map(|k| d[k] * beta[k].norm_sqr() * h.row(k).norm_squared())
        .sum();
    let s = tr / h.ncols() as f64;
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// Heuristic bisection on `ω` for the quantized precoder step.
///
/// With `s` = [`omega_scale`], the bracket starts at `[OMEGA_FLOOR·s, s]`
/// and its upper end doubles (up to `MAX_OMEGA·s`) until
/// `tr(P(ω)P(ω)ᴴ) ≤ q`. Every candidate `P(ω)` is kept only if it raises
/// the weighted sum rate over the incumbent. The search stops when the power
/// is within `POWER_TOL_REL·q`, the bracket is narrower than
/// `OMEGA_TOL·s`, or after [`MAX_BISECTION_STEPS`] halvings.
///
/// The floor keeps `V̂` away from singularity when `K < M`: its smallest
/// eigenvalues equal `ω`, and the sphere decoder's tree grows without bound
/// as they vanish.
pub fn bisect_omega(
    h: &CMat,
    d: &[f64],
    beta: &[Complex64],
    cfg: &WmmseConfig,
    solver: &SubproblemSolver,
    incumbent: &CMat,
    incumbent_omega: f64,
) -> Result<Bisection> {
    let q = cfg.power_budget;
    let power_tol = POWER_TOL_REL * q;
    let mut best = Bisection {
        omega: incumbent_omega,
        precoder: incumbent.clone(),
        rate: rate_or_zero(h, incumbent, cfg),
        evaluations: 0,
        improved: false,
    };
    let eval = |omega: f64, best: &mut Bisection| -> Result<f64> {
        let p = quantized_precoder(h, d, beta, omega, solver)?;
        best.evaluations += 1;
        let tr = linalg::power(&p);
        let rate = rate_or_zero(h, &p, cfg);
        if rate > best.rate {
            best.rate = rate;
            best.precoder = p;
            best.omega = omega;
            best.improved = true;
        }
        Ok(tr)
    };

    let scale = omega_scale(h, d, beta);
    let mut lo = OMEGA_FLOOR * scale;
    let mut hi = scale;
    let mut tr = eval(hi, &mut best)?;
    while tr > q && hi < MAX_OMEGA * scale {
        lo = hi;
        hi *= 2.0;
        tr = eval(hi, &mut best)?;
    }
    if (tr - q).abs() < power_tol {
        return Ok(best);
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let omega = 0.5 * (lo + hi);
        let tr = eval(omega, &mut best)?;
        if (tr - q).abs() < power_tol {
            break;
        }
        if tr > q {
            lo = omega;
        } else {
            hi = omega;
        }
        if hi - lo < OMEGA_TOL * scale {
            break;
        }
    }
    Ok(best)
}

impl WmmseState {
    /// State at a given precoder with `β`, `d`, `e` and `f` computed from it.
    pub fn at(h: &CMat, cfg: &WmmseConfig, precoder: CMat) -> Self {
        let mut state = Self {
            precoder: CMat::zeros(0, 0),
            beta: Vec::new(),
            weights: Vec::new(),
            mse: Vec::new(),
            omega: 0.0,
            objective_trace: Vec::new(),
            rate_trace: Vec::new(),
            iterations: 0,
            converged: false,
        };
        state.refresh(h, cfg, precoder);
        state
    }

    pub(crate) fn refresh(&mut self, h: &CMat, cfg: &WmmseConfig, precoder: CMat) {
        let nbar = effective_noise(&precoder, cfg.power_budget, cfg.noise_power);
        let k = h.nrows();
        self.beta = (0..k).map(|i| receiver_gain(h, &precoder, i, nbar)).collect();
        self.weights = (0..k)
            .map(|i| mse_weight(h, &precoder, i, nbar, cfg.ue_weights[i]).max(MIN_MSE_WEIGHT))
            .collect();
        self.mse = (0..k)
            .map(|i| ue_mse(h, &precoder, self.beta[i], i, nbar))
            .collect();
        self.objective_trace
            .push(wmmse_objective(&self.weights, &self.mse));
        self.rate_trace.push(rate_or_zero(h, &precoder, cfg));
        self.precoder = precoder;
    }

    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// Power-normalized regularized zero-forcing start, projected onto the
/// alphabet when the solver is quantized.
pub fn initial_precoder(h: &CMat, cfg: &WmmseConfig, solver: &SubproblemSolver) -> Result<CMat> {
    let wf = wf_init(h, cfg.power_budget, cfg.noise_power)?;
    let wf = match linalg::scaling_factor(&wf, cfg.power_budget) {
        Some(alpha) => wf * Complex64::from(alpha),
        None => wf,
    };
    match solver.quantizer() {
        Some(spec) => spec.quantize_matrix(&wf),
        None => Ok(wf),
    }
}

/// One precoder step from the current `(β, d)`.
pub fn precoder_step(
    h: &CMat,
    cfg: &WmmseConfig,
    solver: &SubproblemSolver,
    state: &WmmseState,
) -> Result<(CMat, f64)> {
    match solver {
        SubproblemSolver::Continuous => {
            continuous_p3(h, &state.weights, &state.beta, cfg.power_budget)
        }
        _ => {
            let b = bisect_omega(
                h,
                &state.weights,
                &state.beta,
                cfg,
                solver,
                &state.precoder,
                state.omega,
            )?;
            Ok((b.precoder, b.omega))
        }
    }
}

/// Run up to `max_iterations` further WMMSE iterations from `state`.
pub fn continue_wmmse(
    h: &CMat,
    cfg: &WmmseConfig,
    solver: &SubproblemSolver,
    state: &mut WmmseState,
    max_iterations: usize,
) -> Result<()> {
    for _ in 0..max_iterations {
        let (p, omega) = precoder_step(h, cfg, solver, state)?;
        let prev = state.objective();
        state.omega = omega;
        state.refresh(h, cfg, p);
        state.iterations += 1;
        if (state.objective() - prev).abs() <= cfg.convergence_threshold {
            state.converged = true;
            break;
        }
    }
    Ok(())
}

/// Full WMMSE loop from the regularized zero-forcing start.
///
/// Stops when `|f⁽ⁿ⁾ − f⁽ⁿ⁻¹⁾| ≤ ε` or after `N_max` iterations; in the
/// latter case `converged` is false.
pub fn run_wmmse(
    h: &CMat,
    cfg: &WmmseConfig,
    solver: &SubproblemSolver,
) -> Result<(CMat, WmmseState)> {
    cfg.validate(h.nrows())?;
    let p0 = initial_precoder(h, cfg, solver)?;
    let mut state = WmmseState::at(h, cfg, p0);
    continue_wmmse(h, cfg, solver, &mut state, cfg.max_iterations)?;
    Ok((state.precoder.clone(), state))
}
