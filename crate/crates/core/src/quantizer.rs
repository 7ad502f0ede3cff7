//! Symmetric uniform fronthaul quantizer.
//!
//! Labels are `Δ·(z − 1 − (L−1)/2)` for `z = 1..L` and thresholds are
//! `Δ·(z − L/2)` for `z = 1..L−1`. Real and imaginary parts are quantized
//! independently with half-open intervals `[τ_z, τ_{z+1})`; values outside
//! the outermost thresholds saturate to the extreme labels.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    levels: usize,
    step: f64,
    labels: Vec<f64>,
    thresholds: Vec<f64>,
}

impl QuantizerSpec {
    pub fn new(levels: usize, step: f64) -> Result<Self> {
        if levels < 2 {
            return Err(Error::invalid(format!("quantizer needs at least 2 levels, got {levels}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!("quantizer step must be positive, got {step}")));
        }
        let half_span = (levels as f64 - 1.0) / 2.0;
        let labels = (0..levels).map(|z| step * (z as f64 - half_span)).collect();
        let thresholds = (1..levels)
            .map(|z| step * (z as f64 - levels as f64 / 2.0))
            .collect();
        Ok(Self {
            levels,
            step,
            labels,
            thresholds,
        })
    }

    /// Quantizer whose step is MSE-optimal for `CN(0, q/(KM))` inputs, the
    /// per-entry distribution of a precoder that spends the full budget `q`.
    pub fn for_power_budget(levels: usize, q: f64, users: usize, antennas: usize) -> Result<Self> {
        if users == 0 || antennas == 0 {
            return Err(Error::invalid("users and antennas must be positive"));
        }
        let per_dim = q / (2.0 * users as f64 * antennas as f64);
        Self::new(levels, optimal_step_size(levels, per_dim)?)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Index of the half-open threshold interval containing `x`.
    pub fn interval_index(&self, x: f64) -> usize {
        self.thresholds.partition_point(|&t| t <= x)
    }

    pub fn quantize_real(&self, x: f64) -> f64 {
        self.labels[self.interval_index(x)]
    }

    pub fn quantize(&self, z: Complex64) -> Result<Complex64> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("quantizer input"));
        }
        Ok(Complex64::new(self.quantize_real(z.re), self.quantize_real(z.im)))
    }

    /// Element-wise [`quantize`](Self::quantize).
    pub fn quantize_matrix(&self, p: &CMat) -> Result<CMat> {
        let mut out = DMatrix::zeros(p.nrows(), p.ncols());
        for (dst, src) in out.iter_mut().zip(p.iter()) {
            *dst = self.quantize(*src)?;
        }
        Ok(out)
    }

    /// Label indices ordered by distance to `x`; ties keep the lower index.
    pub fn labels_by_distance(&self, x: f64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.levels).collect();
        idx.sort_by(|&a, &b| {
            (self.labels[a] - x)
                .abs()
                .total_cmp(&(self.labels[b] - x).abs())
        });
        idx
    }

    /// Nearest label in Euclidean distance, lower index on ties.
    pub fn nearest_label(&self, x: f64) -> f64 {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, &l) in self.labels.iter().enumerate() {
            let d = (l - x).abs();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        self.labels[best]
    }

    pub fn is_label(&self, x: f64) -> bool {
        self.labels.iter().any(|&l| l == x)
    }

    /// Membership in the complex alphabet `{l_R + j l_I}`.
    pub fn contains(&self, z: Complex64) -> bool {
        self.is_label(z.re) && self.is_label(z.im)
    }
}

fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

/// `∫_a^b (x − l)² φ_σ(x) dx` for the zero-mean Gaussian density with
/// standard deviation `sigma`.
fn interval_distortion(a: f64, b: f64, label: f64, sigma: f64) -> f64 {
    let (ta, tb) = (a / sigma, b / sigma);
    let second = |t: f64| {
        if t.is_infinite() {
            std_normal_cdf(t)
        } else {
            std_normal_cdf(t) - t * std_normal_pdf(t)
        }
    };
    let pdf = |t: f64| if t.is_infinite() { 0.0 } else { std_normal_pdf(t) };
    let mass = std_normal_cdf(tb) - std_normal_cdf(ta);
    sigma * sigma * (second(tb) - second(ta)) - 2.0 * sigma * label * (pdf(ta) - pdf(tb))
        + label * label * mass
}

/// Mean-squared quantization error `E[(x − Q(x))²]` for `x ~ N(0, variance)`,
/// integrated exactly interval by interval.
pub fn gaussian_mse(levels: usize, step: f64, variance: f64) -> f64 {
    let sigma = variance.sqrt();
    let half_span = (levels as f64 - 1.0) / 2.0;
    (0..levels)
        .map(|z| {
            let lo = if z == 0 {
                f64::NEG_INFINITY
            } else {
                step * (z as f64 - levels as f64 / 2.0)
            };
            let hi = if z + 1 == levels {
                f64::INFINITY
            } else {
                step * (z as f64 + 1.0 - levels as f64 / 2.0)
            };
            interval_distortion(lo, hi, step * (z as f64 - half_span), sigma)
        })
        .sum()
}

/// MSE-optimal step size for a Gaussian input with per-real-dimension
/// variance `variance`, by golden-section search over `[0.01σ, 10σ]`.
pub fn optimal_step_size(levels: usize, variance: f64) -> Result<f64> {
    if levels < 2 {
        return Err(Error::invalid(format!("quantizer needs at least 2 levels, got {levels}")));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!("variance must be positive, got {variance}")));
    }
    let sigma = variance.sqrt();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.01 * sigma, 10.0 * sigma);
    let mse = |s: f64| gaussian_mse(levels, s, variance);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (mse(c), mse(d));
    while b - a > 1e-6 * sigma {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = mse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = mse(d);
        }
    }
    Ok(0.5 * (a + b))
}
