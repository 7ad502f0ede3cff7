//! Reference schemes: the continuous precoder step, Unaware, Half-aware and
//! the GI-ordered Heuristic refinement.

use num_complex::Complex64;

use crate::error::Result;
use crate::linalg::{self, CMat};
use crate::quantizer::QuantizerSpec;
use crate::wmmse::{
    bisect_omega, continue_wmmse, initial_precoder, lagrangian_hessian, linear_term, sum_rate,
    SubproblemSolver, WmmseConfig, WmmseState,
};

/// Eigenvalues below this fraction of the largest one are treated as the
/// null space of `HᴴDᴴDH`.
const NULL_EIGENVALUE_REL: f64 = 1e-12;
const OMEGA_BISECTION_STEPS: usize = 200;

/// Precoder step over `ℂ^{M×K}`:
/// `P(ω) = (HᴴDᴴDH + ωI)⁻¹ HᴴDᴴ sqrt(diag d)` with the smallest `ω ≥ 0`
/// such that `tr(PPᴴ) ≤ q`. Returns `(P, ω)`.
///
/// `HᴴDᴴDH` is diagonalized once, so the power is an explicit function of
/// `ω` and the bisection is exact up to floating point. When `K < M` the
/// matrix is singular and `ω = 0` yields the minimum-norm solution.
pub fn continuous_p3(h: &CMat, d: &[f64], beta: &[Complex64], q: f64) -> Result<(CMat, f64)> {
    let m = h.ncols();
    let k = h.nrows();
    let a = lagrangian_hessian(h, d, beta, 0.0);
    let mut rhs = CMat::zeros(m, k);
    for i in 0..k {
        rhs.set_column(i, &linear_term(h, d, beta, i).map(|z| z.conj()));
    }
    let eig = a.symmetric_eigen();
    let lam: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let u = eig.eigenvectors;
    let w = u.adjoint() * rhs;
    let row_power: Vec<f64> = (0..m)
        .map(|j| w.row(j).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let lam_max = lam.iter().cloned().fold(0.0, f64::max);
    let is_null = |j: usize| lam[j] <= NULL_EIGENVALUE_REL * lam_max;

    let power = |omega: f64| -> f64 {
        (0..m)
            .filter(|&j| omega > 0.0 || !is_null(j))
            .map(|j| row_power[j] / (lam[j] + omega).powi(2))
            .sum()
    };
    let build = |omega: f64| -> CMat {
        let mut scaled = w.clone();
        for j in 0..m {
            let s = if omega == 0.0 && is_null(j) {
                0.0
            } else {
                1.0 / (lam[j] + omega)
            };
            scaled.row_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        &u * scaled
    };

    if power(0.0) <= q {
        return Ok((build(0.0), 0.0));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while power(hi) > q {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..OMEGA_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if power(mid) > q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    // the upper end is always feasible
    Ok((build(hi), hi))
}

/// Continuous WMMSE to convergence, then entry-wise quantization. Returns
/// the quantized precoder and the continuous run.
pub fn unaware_precoding(
    h: &CMat,
    cfg: &WmmseConfig,
    spec: &QuantizerSpec,
) -> Result<(CMat, WmmseState)> {
    let (p, state) = crate::wmmse::run_wmmse(h, cfg, &SubproblemSolver::Continuous)?;
    Ok((spec.quantize_matrix(&p)?, state))
}

/// `N − 1` continuous iterations followed by one sphere-decoder precoder
/// step driven by the continuous `β`, `d`. The bisection incumbent is the
/// quantized continuous precoder.
pub fn half_aware_precoding(
    h: &CMat,
    cfg: &WmmseConfig,
    spec: &QuantizerSpec,
) -> Result<(CMat, WmmseState)> {
    cfg.validate(h.nrows())?;
    let continuous = SubproblemSolver::Continuous;
    let p0 = initial_precoder(h, cfg, &continuous)?;
    let mut state = WmmseState::at(h, cfg, p0);
    continue_wmmse(h, cfg, &continuous, &mut state, cfg.max_iterations - 1)?;

    let incumbent = spec.quantize_matrix(&state.precoder)?;
    let solver = SubproblemSolver::Sphere(spec.clone());
    let b = bisect_omega(h, &state.weights, &state.beta, cfg, &solver, &incumbent, 0.0)?;
    state.omega = b.omega;
    state.refresh(h, cfg, b.precoder);
    state.iterations += 1;
    Ok((state.precoder.clone(), state))
}

/// `GI_k = Σ_{i≠k} |[H P̂]_{i,k}|²`: power that UE `k`'s stream leaks to the
/// other UEs.
pub fn generated_interference(h: &CMat, p_scaled: &CMat, k: usize) -> f64 {
    let hp = h * p_scaled;
    (0..hp.nrows())
        .filter(|&i| i != k)
        .map(|i| hp[(i, k)].norm_sqr())
        .sum()
}

/// UE indices by decreasing GI; ties keep the lower index first.
pub fn interference_order(h: &CMat, p_scaled: &CMat) -> Vec<usize> {
    let gi: Vec<f64> = (0..p_scaled.ncols())
        .map(|k| generated_interference(h, p_scaled, k))
        .collect();
    let mut order: Vec<usize> = (0..gi.len()).collect();
    order.sort_by(|&a, &b| gi[b].total_cmp(&gi[a]).then(a.cmp(&b)));
    order
}

/// The nearest and second-nearest labels in each of the real and imaginary
/// parts, nearest-nearest first.
pub fn candidate_set(spec: &QuantizerSpec, z: Complex64) -> Vec<Complex64> {
    let labels = spec.labels();
    let re = spec.labels_by_distance(z.re);
    let im = spec.labels_by_distance(z.im);
    let mut out = Vec::with_capacity(4);
    for &r in re.iter().take(2) {
        for &i in im.iter().take(2) {
            let c = Complex64::new(labels[r], labels[i]);
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}

/// Greedy entry-wise refinement of `Q(P_unquantized)`.
///
/// UE columns are visited by decreasing generated interference at
/// `P̂ = αQ(P_unquantized)`, rows in ascending antenna order. Each entry
/// takes whichever of its candidates maximizes the weighted sum rate with
/// the other entries fixed; the current value wins ties.
pub fn heuristic_refine(
    h: &CMat,
    p_unquantized: &CMat,
    spec: &QuantizerSpec,
    q: f64,
    n0: f64,
    weights: &[f64],
) -> Result<CMat> {
    let mut p = spec.quantize_matrix(p_unquantized)?;
    let p_scaled = match linalg::scaling_factor(&p, q) {
        Some(alpha) => &p * Complex64::from(alpha),
        None => p.clone(),
    };
    let rate = |p: &CMat| sum_rate(h, p, q, n0, weights).unwrap_or(0.0);
    let mut best = rate(&p);
    for k in interference_order(h, &p_scaled) {
        for r in 0..p.nrows() {
            let current = p[(r, k)];
            let mut keep = current;
            for cand in candidate_set(spec, p_unquantized[(r, k)]) {
                if cand == current {
                    continue;
                }
                p[(r, k)] = cand;
                let value = rate(&p);
                if value > best {
                    best = value;
                    keep = cand;
                }
            }
            p[(r, k)] = keep;
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, ChannelConfig};
    use crate::rng::{stream_rng, Stream};
    use crate::wmmse::weighted_mse_sum;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_cmat(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> CMat {
        CMat::from_fn(r, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn desk_channel(seed: u64, m: usize, k: usize) -> CMat {
        let cfg = ChannelConfig {
            antennas: m,
            users: k,
            ..Default::default()
        };
        draw_channel(&cfg, &mut stream_rng(seed, Stream::Channel, 0)).unwrap().h
    }

    #[test]
    fn large_multiplier_drives_precoder_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_cmat(&mut rng, 2, 3);
        let beta = [c(0.4, 0.1), c(0.2, -0.3)];
        let (p, omega) = continuous_p3(&h, &[1.0, 1.0], &beta, 1e-12).unwrap();
        assert!(omega > 1e3);
        assert!(linalg::power(&p) <= 1e-12 * (1.0 + 1e-9));
    }

    #[test]
    fn scalar_case_matches_grid_search() {
        let one = CMat::from_element(1, 1, c(1.0, 0.0));
        let d = [1.0 / LN_2];
        let beta = [c(0.5, 0.0)];
        for &q in &[10.0, 1.0, 0.25] {
            let (p, _) = continuous_p3(&one, &d, &beta, q).unwrap();
            let objective = |z: Complex64| {
                weighted_mse_sum(&one, &CMat::from_element(1, 1, z), &d, &beta, 0.1)
            };
            let mut best = (f64::INFINITY, c(0.0, 0.0));
            let n = 400;
            let r = q.sqrt();
            for a in 0..=n {
                for b in 0..=n {
                    let z = c(-r + 2.0 * r * a as f64 / n as f64, -r + 2.0 * r * b as f64 / n as f64);
                    if z.norm_sqr() <= q {
                        let v = objective(z);
                        if v < best.0 {
                            best = (v, z);
                        }
                    }
                }
            }
            let step = 2.0 * r / n as f64;
            assert!((p[(0, 0)] - best.1).norm() <= 2.0 * step, "q={q}: {} vs {}", p[(0, 0)], best.1);
            assert!(objective(p[(0, 0)]) <= best.0 + 1e-12);
        }
    }

    #[test]
    fn unconstrained_solution_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_cmat(&mut rng, 3, 3);
        let d = [1.2, 0.7, 2.0];
        let beta = [c(0.3, 0.2), c(-0.4, 0.1), c(0.2, -0.6)];
        let nbar = 0.05;
        let (p, omega) = continuous_p3(&h, &d, &beta, 1e6).unwrap();
        assert_eq!(omega, 0.0);
        let f = |p: &CMat| weighted_mse_sum(&h, p, &d, &beta, nbar);
        let eps = 1e-6;
        let mut grad2 = 0.0;
        for idx in 0..p.len() {
            for dir in [c(1.0, 0.0), c(0.0, 1.0)] {
                let mut plus = p.clone();
                let mut minus = p.clone();
                plus[idx] += dir * eps;
                minus[idx] -= dir * eps;
                let g = (f(&plus) - f(&minus)) / (2.0 * eps);
                grad2 += g * g;
            }
        }
        assert!(grad2.sqrt() <= 1e-6, "gradient norm {}", grad2.sqrt());
    }

    #[test]
    fn constrained_solution_meets_the_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_cmat(&mut rng, 2, 4);
        let beta = [c(0.9, 0.1), c(0.5, -0.5)];
        let (p, omega) = continuous_p3(&h, &[1.0, 2.0], &beta, 0.3).unwrap();
        assert!(omega > 0.0);
        let tr = linalg::power(&p);
        assert!(tr <= 0.3 && tr >= 0.3 * (1.0 - 1e-9));
        // agrees with a direct solve at the same multiplier
        let a = lagrangian_hessian(&h, &[1.0, 2.0], &beta, omega);
        let mut rhs = CMat::zeros(4, 2);
        for i in 0..2 {
            rhs.set_column(i, &linear_term(&h, &[1.0, 2.0], &beta, i).map(|z| z.conj()));
        }
        let direct = linalg::solve_hpd(&a, &rhs).unwrap();
        assert!(linalg::rel_frobenius(&p, &direct) < 1e-9);
    }

    #[test]
    fn generated_interference_examples() {
        let eye = CMat::identity(3, 3);
        for k in 0..3 {
            assert_eq!(generated_interference(&eye, &eye, k), 0.0);
        }
        let hp = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        let eye2 = CMat::identity(2, 2);
        assert_eq!(generated_interference(&eye2, &hp, 0), 4.0);
        assert_eq!(generated_interference(&eye2, &hp, 1), 0.0);
        assert_eq!(interference_order(&eye2, &hp), vec![0, 1]);
        assert_eq!(interference_order(&eye2, &eye2), vec![0, 1]);
    }

    #[test]
    fn generated_interference_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_cmat(&mut rng, 3, 4);
        let p = random_cmat(&mut rng, 4, 3);
        let perm = [2usize, 0, 1];
        let hp_perm = CMat::from_fn(3, 4, |i, j| h[(perm[i], j)]);
        let pp_perm = CMat::from_fn(4, 3, |j, k| p[(j, perm[k])]);
        for k in 0..3 {
            let a = generated_interference(&h, &p, perm[k]);
            let b = generated_interference(&hp_perm, &pp_perm, k);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn candidate_sets() {
        let spec = QuantizerSpec::new(4, 1.0).unwrap();
        let z = c(0.2, -1.7);
        let set = candidate_set(&spec, z);
        assert_eq!(set.len(), 4);
        assert_eq!(set[0], spec.quantize(z).unwrap());
        assert!(set.iter().all(|&s| spec.contains(s)));
        assert!(set.contains(&c(-0.5, -1.5)));
        assert!(set.contains(&c(0.5, -0.5)));
    }

    #[test]
    fn schemes_are_alphabet_feasible_and_heuristic_is_monotone() {
        let spec = QuantizerSpec::for_power_budget(8, 1.0, 2, 4).unwrap();
        for seed in 0..5 {
            let h = desk_channel(seed, 4, 2);
            let cfg = WmmseConfig::new(2, 1.0, 0.01);
            let (pu, state) = unaware_precoding(&h, &cfg, &spec).unwrap();
            let (ph, _) = half_aware_precoding(&h, &cfg, &spec).unwrap();
            let pr = heuristic_refine(&h, &state.precoder, &spec, 1.0, 0.01, &cfg.ue_weights).unwrap();
            for p in [&pu, &ph, &pr] {
                assert!(p.iter().all(|&z| spec.contains(z)));
            }
            let ru = sum_rate(&h, &pu, 1.0, 0.01, &cfg.ue_weights).unwrap();
            let rr = sum_rate(&h, &pr, 1.0, 0.01, &cfg.ue_weights).unwrap();
            assert!(rr >= ru);
        }
    }

    #[test]
    fn unaware_is_identity_on_alphabet_points() {
        let spec = QuantizerSpec::new(4, 0.5).unwrap();
        let p = CMat::from_fn(3, 2, |i, j| c(spec.labels()[i], spec.labels()[j + 1]));
        assert_eq!(spec.quantize_matrix(&p).unwrap(), p);
    }

    #[test]
    fn half_aware_with_one_iteration_is_a_single_sd_pass() {
        let spec = QuantizerSpec::for_power_budget(4, 1.0, 2, 4).unwrap();
        let h = desk_channel(11, 4, 2);
        let mut cfg = WmmseConfig::new(2, 1.0, 0.01);
        cfg.max_iterations = 1;
        let (p, state) = half_aware_precoding(&h, &cfg, &spec).unwrap();
        assert_eq!(state.iterations, 1);
        let start = WmmseState::at(&h, &cfg, initial_precoder(&h, &cfg, &SubproblemSolver::Continuous).unwrap());
        let incumbent = spec.quantize_matrix(&start.precoder).unwrap();
        let b = bisect_omega(
            &h,
            &start.weights,
            &start.beta,
            &cfg,
            &SubproblemSolver::Sphere(spec.clone()),
            &incumbent,
            0.0,
        )
        .unwrap();
        assert_eq!(p, b.precoder);
    }
}
