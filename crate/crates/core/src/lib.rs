//! Dispersive atom-cavity dynamics and phase-space reconstruction of the field.
//!
//! Units are dimensionless throughout the closed-form layer: `tau = chi t`,
//! `eta = gamma / chi`.

pub mod closed;
pub mod error;
pub mod fock;
pub mod oracle;
pub mod quasiprob;
pub mod validate;

pub use num_complex::Complex64 as C64;

pub use closed::{critical_eta, mu_curve, phase_factor, sigma_x_closed, DecayParams, MuSample, PhaseFactor};
pub use error::{QcavError, Result};
pub use fock::{make_state, CMatrix, FieldDensity, FieldState, FockVector, StateSpec};
pub use oracle::{FullParams, JointDensity};
pub use quasiprob::{Axis, GridSpec, PhaseGrid};
