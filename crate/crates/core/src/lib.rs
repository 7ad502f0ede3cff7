//! Quantization-aware MU-MIMO downlink precoding for fronthaul-constrained
//! base stations.
//!
//! The precoding matrix is computed at the baseband unit and shipped to the
//! antenna array over a finite-resolution fronthaul, so every entry must lie
//! in a uniform quantization alphabet. This crate maximizes the (weighted)
//! sum rate over that alphabet with an iterative WMMSE loop whose precoder
//! step is reduced to per-user integer least-squares problems. Those are
//! solved either exactly ([`sd`]) or approximately ([`ep`]).
//!
//! Module map:
//!
//! - [`quantizer`]: uniform fronthaul quantizer and optimal step size.
//! - [`channel`]: Rician/ULA channels, LS estimation, AQNM CSI quantization.
//! - [`wmmse`]: WMMSE updates, ILS reduction, heuristic bisection, sum rate.
//! - [`sd`]: Schnorr-Euchner sphere decoder and brute-force oracle.
//! - [`ep`]: expectation-propagation ILS solver.
//! - [`baselines`]: Unaware, Half-aware and Heuristic schemes.
//! - [`eval`]: Monte-Carlo experiment engine and fronthaul accounting.
//! - [`cli`]: configuration files and the command-line front end.

pub mod baselines;
pub mod channel;
pub mod cli;
pub mod ep;
pub mod error;
pub mod eval;
pub mod ils;
pub mod linalg;
pub mod quantizer;
pub mod rng;
pub mod sd;
pub mod wmmse;

pub use error::{Error, Result};
pub use ils::IlsProblem;
pub use linalg::{CMat, CVec};
pub use num_complex::Complex64;
pub use quantizer::QuantizerSpec;
