//! Rician fading with a half-wavelength ULA, 3GPP UMi path loss, pilot-based
//! LS channel estimation and AQNM quantization of the estimated CSI.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::rng::complex_normal;

/// How the NLoS component is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NlosModel {
    /// i.i.d. `CN(0, 1)` entries.
    Uncorrelated,
    /// Gaussian local scattering around the LoS azimuth with the given
    /// angular standard deviation (radians).
    LocalScattering { angular_std: f64 },
}

/// Reference for the large-scale gain. The simulated row gain is
/// `10^((PL(d_k) − reference_db)/10)`, so the SNR `q/N0` is measured
/// relative to a UE at the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainReference {
    /// Raw path loss, 0 dB reference.
    Absolute,
    /// Path loss at the far end of the distance range (cell-edge SNR).
    CellEdge,
    Fixed { db: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// Taken from the enclosing experiment when read from a config file.
    #[serde(skip)]
    pub antennas: usize,
    #[serde(skip)]
    pub users: usize,
    /// Use `f64::INFINITY` for a pure LoS channel.
    pub rician_factor: f64,
    pub angle_range: (f64, f64),
    pub distance_range: (f64, f64),
    pub nlos: NlosModel,
    pub gain_reference: GainReference,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            antennas: 16,
            users: 4,
            rician_factor: 10.0,
            angle_range: (-PI / 3.0, PI / 3.0),
            distance_range: (10.0, 200.0),
            nlos: NlosModel::Uncorrelated,
            gain_reference: GainReference::CellEdge,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.antennas < self.users {
            return Err(Error::invalid(format!(
                "need M >= K >= 1, got M={} K={}",
                self.antennas, self.users
            )));
        }
        if !(self.rician_factor >= 0.0) {
            return Err(Error::invalid("rician factor must be non-negative"));
        }
        let (a0, a1) = self.angle_range;
        if !(a0 < a1) || !a0.is_finite() || !a1.is_finite() {
            return Err(Error::invalid("angle range must be a finite, non-degenerate interval"));
        }
        let (d0, d1) = self.distance_range;
        if !(d0 > 0.0 && d0 < d1 && d1.is_finite()) {
            return Err(Error::invalid("distance range must be a positive, non-degenerate interval"));
        }
        if let NlosModel::LocalScattering { angular_std } = self.nlos {
            if !(angular_std > 0.0) {
                return Err(Error::invalid("local scattering angular std must be positive"));
            }
        }
        Ok(())
    }

    fn reference_db(&self) -> f64 {
        match self.gain_reference {
            GainReference::Absolute => 0.0,
            GainReference::CellEdge => path_loss_db_unchecked(self.distance_range.1),
            GainReference::Fixed { db } => db,
        }
    }
}

/// One channel realization: `h` is `K×M`, row `k` is `h_kᵀ`.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    pub h: CMat,
    /// Linear large-scale gain `ρ_k` applied to each row.
    pub gains: Vec<f64>,
    pub angles: Vec<f64>,
    pub distances: Vec<f64>,
}

/// Half-wavelength ULA response, element `m` is `exp(j m π sin Ω)`.
pub fn ula_response(angle: f64, antennas: usize) -> CVec {
    let psi = PI * angle.sin();
    CVec::from_fn(antennas, |m, _| Complex64::from_polar(1.0, m as f64 * psi))
}

fn path_loss_db_unchecked(distance: f64) -> f64 {
    -37.5 - 22.0 * distance.log10()
}

/// 3GPP UMi path loss in dB without shadow fading.
pub fn path_loss_db(distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::invalid(format!("distance must be positive, got {distance}")));
    }
    Ok(path_loss_db_unchecked(distance))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Hermitian square root of the Gaussian local-scattering correlation
/// matrix around `angle`.
fn local_scattering_sqrt(angle: f64, angular_std: f64, antennas: usize) -> CMat {
    let r = CMat::from_fn(antennas, antennas, |l, m| {
        let dist = l as f64 - m as f64;
        let phase = Complex64::from_polar(1.0, PI * dist * angle.sin());
        let spread = (-0.5 * (angular_std * PI * dist * angle.cos()).powi(2)).exp();
        phase * spread
    });
    let eig = r.symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * CMat::from_diagonal(&sqrt_vals) * eig.eigenvectors.adjoint()
}

/// Draw a channel realization. Deterministic for a given RNG state.
pub fn draw_channel<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> Result<ChannelMatrix> {
    cfg.validate()?;
    let (k, m) = (cfg.users, cfg.antennas);
    let (los_w, nlos_w) = if cfg.rician_factor.is_infinite() {
        (1.0, 0.0)
    } else {
        let kappa = cfg.rician_factor;
        ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
    };
    let reference = cfg.reference_db();
    let mut h = DMatrix::zeros(k, m);
    let mut gains = Vec::with_capacity(k);
    let mut angles = Vec::with_capacity(k);
    let mut distances = Vec::with_capacity(k);
    for ue in 0..k {
        let angle = rng.random_range(cfg.angle_range.0..cfg.angle_range.1);
        let distance = rng.random_range(cfg.distance_range.0..cfg.distance_range.1);
        let gain = db_to_linear(path_loss_db_unchecked(distance) - reference);
        let los = ula_response(angle, m);
        let z = CVec::from_fn(m, |_, _| complex_normal(rng, 1.0));
        let nlos = match cfg.nlos {
            NlosModel::Uncorrelated => z,
            NlosModel::LocalScattering { angular_std } => {
                local_scattering_sqrt(angle, angular_std, m) * z
            }
        };
        let row = (los * Complex64::from(los_w) + nlos * Complex64::from(nlos_w)) * Complex64::from(gain.sqrt());
        for ant in 0..m {
            h[(ue, ant)] = row[ant];
        }
        gains.push(gain);
        angles.push(angle);
        distances.push(distance);
    }
    Ok(ChannelMatrix {
        h,
        gains,
        angles,
        distances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    Perfect,
    LsEstimate,
    LsPlusAqnm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsiModel {
    pub mode: CsiMode,
    pub pilot_length: usize,
    pub uplink_power: f64,
    /// Uplink noise power. `None` ties the uplink SNR to the downlink SNR
    /// of the experiment cell.
    pub uplink_noise: Option<f64>,
    pub csi_bits: u32,
}

impl Default for CsiModel {
    fn default() -> Self {
        Self {
            mode: CsiMode::Perfect,
            pilot_length: 4,
            uplink_power: 1.0,
            uplink_noise: None,
            csi_bits: 3,
        }
    }
}

impl CsiModel {
    pub fn validate(&self) -> Result<()> {
        if self.pilot_length == 0 {
            return Err(Error::invalid("pilot length must be at least 1"));
        }
        if !(self.uplink_power > 0.0) {
            return Err(Error::invalid("uplink power must be positive"));
        }
        if let Some(n) = self.uplink_noise {
            if !(n >= 0.0) {
                return Err(Error::invalid("uplink noise must be non-negative"));
            }
        }
        if self.mode == CsiMode::LsPlusAqnm && self.csi_bits == 0 {
            return Err(Error::invalid("AQNM needs at least one CSI bit"));
        }
        Ok(())
    }
}

/// LS estimate of one channel vector from an orthogonal pilot with
/// `‖φ‖² = τ_p`. After correlating with `φ*` the noise has per-entry
/// variance `τ_p σ²_U`, so `ĥ = h + e` with `Var(e) = σ²_U / (q_U τ_p)`.
pub fn ls_estimate<R: Rng + ?Sized>(
    h_true: &CVec,
    pilot_length: usize,
    uplink_power: f64,
    uplink_noise: f64,
    rng: &mut R,
) -> CVec {
    let tau = pilot_length as f64;
    let gain = uplink_power.sqrt() * tau;
    h_true.map(|h| {
        let y = h * gain + complex_normal(rng, tau * uplink_noise);
        y / gain
    })
}

/// Row-wise [`ls_estimate`] of a `K×M` channel.
pub fn ls_estimate_matrix<R: Rng + ?Sized>(
    h: &CMat,
    pilot_length: usize,
    uplink_power: f64,
    uplink_noise: f64,
    rng: &mut R,
) -> CMat {
    let mut out = h.clone();
    for k in 0..h.nrows() {
        let row: CVec = h.row(k).transpose();
        let est = ls_estimate(&row, pilot_length, uplink_power, uplink_noise, rng);
        for m in 0..h.ncols() {
            out[(k, m)] = est[m];
        }
    }
    out
}

const AQNM_TABLE: [f64; 5] = [0.3634, 0.1175, 0.03454, 0.009497, 0.002499];

/// AQNM distortion factor for `bits` per complex entry.
pub fn aqnm_distortion(bits: u32) -> Result<f64> {
    match bits {
        0 => Err(Error::invalid("AQNM needs at least one bit")),
        1..=5 => Ok(AQNM_TABLE[bits as usize - 1]),
        _ => Ok(PI * 3f64.sqrt() / 2.0 * 2f64.powi(-2 * bits as i32)),
    }
}

/// `(1 − η) Ĥ + N` with `N` entries `CN(0, η(1 − η) E|ĥ|²)`, where `E|ĥ|²`
/// is the mean power of the entry's row.
pub fn aqnm_with_distortion<R: Rng + ?Sized>(h_hat: &CMat, eta: f64, rng: &mut R) -> CMat {
    let mut out = h_hat.clone();
    for k in 0..h_hat.nrows() {
        let row_power =
            h_hat.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>() / h_hat.ncols() as f64;
        let var = eta * (1.0 - eta) * row_power;
        for m in 0..h_hat.ncols() {
            out[(k, m)] = h_hat[(k, m)] * (1.0 - eta) + complex_normal(rng, var);
        }
    }
    out
}

pub fn aqnm_quantize_csi<R: Rng + ?Sized>(h_hat: &CMat, bits: u32, rng: &mut R) -> Result<CMat> {
    Ok(aqnm_with_distortion(h_hat, aqnm_distortion(bits)?, rng))
}

/// Channel seen by the BBU under `model`. `uplink_noise` is the resolved
/// uplink noise power.
pub fn observed_channel<R: Rng + ?Sized>(
    h: &CMat,
    model: &CsiModel,
    uplink_noise: f64,
    rng: &mut R,
) -> Result<CMat> {
    model.validate()?;
    Ok(match model.mode {
        CsiMode::Perfect => h.clone(),
        CsiMode::LsEstimate => {
            ls_estimate_matrix(h, model.pilot_length, model.uplink_power, uplink_noise, rng)
        }
        CsiMode::LsPlusAqnm => {
            let est =
                ls_estimate_matrix(h, model.pilot_length, model.uplink_power, uplink_noise, rng);
            aqnm_quantize_csi(&est, model.csi_bits, rng)?
        }
    })
}
