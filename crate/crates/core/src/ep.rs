//! Expectation-propagation solver for [`IlsProblem`].
//!
//! The residual `c − G p` is modeled as white Gaussian noise with unknown
//! variance `σ̂²`, the discrete prior over labels is replaced by a diagonal
//! Gaussian with natural parameters `(γ, λ)`, and each iteration
//!
//! 1. forms the Gaussian posterior `(μ, Σ)`,
//! 2. removes each coordinate's prior factor to get the cavity `(p_obs, v_obs)`,
//! 3. moment-matches the cavity against the discrete label alphabet,
//! 4. refines and damps `(λ, γ)`,
//! 5. re-estimates `σ̂²` from the soft estimate.
//!
//! After the last iteration the soft means are mapped to the nearest labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ils::IlsProblem;
use crate::linalg::{RMat, RVec};

/// Lower clamp for the refined prior precision.
pub const MIN_PRIOR_PRECISION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpConfig {
    pub max_iterations: usize,
    /// What to do when the moment-matched precision `1/v − 1/v_obs` of a
    /// coordinate is negative.
    pub negative_precision: NegativePrecision,
    /// Weight of the previous `(λ, γ)` in the damped update.
    pub damping: f64,
    pub variance_floor: f64,
    pub cavity_variance_floor: f64,
}

impl Default for EpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            negative_precision: NegativePrecision::KeepPrevious,
            damping: 0.5,
            variance_floor: 1e-8,
            cavity_variance_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativePrecision {
    /// Skip the update and keep the coordinate's previous `(λ, γ)`.
    KeepPrevious,
    /// Apply the damped update and clamp `λ` at [`MIN_PRIOR_PRECISION`].
    Clamp,
}

impl EpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.damping) {
            return Err(Error::invalid(format!("damping must lie in [0, 1], got {}", self.damping)));
        }
        if !(self.variance_floor > 0.0 && self.cavity_variance_floor > 0.0) {
            return Err(Error::invalid("EP variance floors must be positive"));
        }
        Ok(())
    }
}

/// Diagnostics collected over one [`ep_solve`] run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpReport {
    pub iterations: usize,
    pub coordinate_updates: u64,
    pub cavity_clamps: u64,
    /// Coordinate updates whose moment-matched precision was negative.
    pub negative_precisions: u64,
    /// Set when the posterior precision matrix failed to factor.
    pub posterior_failure: bool,
    /// Set when any moment came out NaN or infinite.
    pub non_finite: bool,
    /// Smallest diagonal entry of the posterior Cholesky factor seen.
    pub min_posterior_pivot: f64,
    pub variance_trace: Vec<f64>,
    /// `(λ, γ)` after the final update.
    pub final_precision: Vec<f64>,
    pub final_shift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpSolution {
    pub p: RVec,
    pub soft: RVec,
    pub objective: f64,
    pub report: EpReport,
}

/// Posterior `Σ = (Gᵀ G / σ̂² + diag λ)⁻¹`, `μ = Σ (Gᵀ c / σ̂² + γ)`.
/// Also returns the smallest pivot of the Cholesky factor of `Σ⁻¹`.
pub fn gaussian_posterior(
    g: &RMat,
    c: &RVec,
    gamma: &RVec,
    lambda: &RVec,
    sigma2: f64,
) -> Result<(RVec, RMat, f64)> {
    let gt = g.transpose();
    let mut precision = &gt * g / sigma2;
    for i in 0..lambda.len() {
        precision[(i, i)] += lambda[i];
    }
    let chol = precision
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("EP posterior precision"))?;
    let min_pivot = chol.l_dirty().diagonal().min();
    let sigma = chol.inverse();
    let rhs = &gt * c / sigma2 + gamma;
    let mu = &sigma * rhs;
    Ok((mu, sigma, min_pivot))
}

/// Cavity marginal of coordinate `m`. The boolean is true when
/// `1 − Σ_mm λ_m ≤ 0` and the variance was clamped to `floor`.
pub fn cavity(mu: f64, sigma_mm: f64, gamma: f64, lambda: f64, floor: f64) -> (f64, f64, bool) {
    let denom = 1.0 - sigma_mm * lambda;
    let (v_obs, clamped) = if denom <= 0.0 {
        (floor, true)
    } else {
        ((sigma_mm / denom).max(floor), false)
    };
    let p_obs = v_obs * (mu / sigma_mm - gamma);
    (p_obs, v_obs, clamped)
}

/// Mean and variance of the cavity Gaussian restricted to the labels
/// (uniform discrete prior), with the variance floored.
pub fn discrete_moments(p_obs: f64, v_obs: f64, labels: &[f64], floor: f64) -> (f64, f64) {
    let max_exp = labels
        .iter()
        .map(|l| -(l - p_obs).powi(2) / (2.0 * v_obs))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut norm = 0.0;
    let mut mean = 0.0;
    let weights: Vec<f64> = labels
        .iter()
        .map(|l| {
            let w = (-(l - p_obs).powi(2) / (2.0 * v_obs) - max_exp).exp();
            norm += w;
            mean += w * l;
            w
        })
        .collect();
    mean /= norm;
    let var = labels
        .iter()
        .zip(&weights)
        .map(|(l, w)| w * (l - mean).powi(2))
        .sum::<f64>()
        / norm;
    (mean, var.max(floor))
}

/// Damped prior refinement for one coordinate; returns `(λ, γ)`.
pub fn refine_prior(
    v: f64,
    p_hat: f64,
    v_obs: f64,
    p_obs: f64,
    damping: f64,
    prev_lambda: f64,
    prev_gamma: f64,
) -> (f64, f64) {
    let raw_lambda = 1.0 / v - 1.0 / v_obs;
    let raw_gamma = p_hat / v - p_obs / v_obs;
    let lambda = (1.0 - damping) * raw_lambda + damping * prev_lambda;
    let gamma = (1.0 - damping) * raw_gamma + damping * prev_gamma;
    (lambda.max(MIN_PRIOR_PRECISION), gamma)
}

/// Residual-variance estimate `(‖c − G p̂‖² + (σ̂²_prev − σ̂²_prevprev)²) / n`,
/// with `n` the real dimension of the residual.
pub fn estimate_variance(
    c: &RVec,
    g: &RMat,
    p_hat: &RVec,
    prev: f64,
    prev_prev: f64,
    floor: f64,
) -> f64 {
    let precision_error = (prev - prev_prev).powi(2);
    let resid = (c - g * p_hat).norm_squared();
    ((resid + precision_error) / c.len() as f64).max(floor)
}

pub fn ep_solve(prob: &IlsProblem, cfg: &EpConfig) -> EpSolution {
    let n = prob.dim();
    let (g, c, labels) = (prob.g(), prob.c(), prob.labels());
    let mut gamma = RVec::zeros(n);
    let mut lambda = RVec::from_element(n, 1.0);
    let mut sigma2 = 1.0;
    let mut sigma2_prev = 1.0;
    let mut p_hat = RVec::zeros(n);
    let mut report = EpReport {
        min_posterior_pivot: f64::INFINITY,
        ..Default::default()
    };

    for _ in 0..cfg.max_iterations {
        let (mu, sigma, pivot) = match gaussian_posterior(g, c, &gamma, &lambda, sigma2) {
            Ok(post) => post,
            Err(_) => {
                report.posterior_failure = true;
                break;
            }
        };
        report.min_posterior_pivot = report.min_posterior_pivot.min(pivot);
        let mut next_hat = RVec::zeros(n);
        let mut next_lambda = RVec::zeros(n);
        let mut next_gamma = RVec::zeros(n);
        for m in 0..n {
            let (p_obs, v_obs, clamped) = cavity(
                mu[m],
                sigma[(m, m)],
                gamma[m],
                lambda[m],
                cfg.cavity_variance_floor,
            );
            report.coordinate_updates += 1;
            report.cavity_clamps += clamped as u64;
            let (mean, var) = discrete_moments(p_obs, v_obs, labels, cfg.variance_floor);
            let negative = 1.0 / var < 1.0 / v_obs;
            report.negative_precisions += negative as u64;
            let (l, gm) = if negative && cfg.negative_precision == NegativePrecision::KeepPrevious {
                (lambda[m], gamma[m])
            } else {
                refine_prior(var, mean, v_obs, p_obs, cfg.damping, lambda[m], gamma[m])
            };
            if ![mu[m], sigma[(m, m)], p_obs, v_obs, mean, var, l, gm]
                .iter()
                .all(|x| x.is_finite())
            {
                report.non_finite = true;
            }
            next_hat[m] = mean;
            next_lambda[m] = l;
            next_gamma[m] = gm;
        }
        if report.non_finite {
            break;
        }
        p_hat = next_hat;
        lambda = next_lambda;
        gamma = next_gamma;
        let next_sigma2 = estimate_variance(c, g, &p_hat, sigma2, sigma2_prev, cfg.variance_floor);
        sigma2_prev = sigma2;
        sigma2 = next_sigma2;
        report.variance_trace.push(sigma2);
        report.iterations += 1;
    }

    report.final_precision = lambda.iter().copied().collect();
    report.final_shift = gamma.iter().copied().collect();
    let p = p_hat.map(|x| prob.nearest_label(x));
    let objective = prob.objective(&p);
    EpSolution {
        p,
        soft: p_hat,
        objective,
        report,
    }
}
