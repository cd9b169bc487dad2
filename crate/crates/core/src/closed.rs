//! Closed-form dipole signal of the dispersively coupled atom in a lossy
//! cavity, and the tuning `(eta*, 3pi/4)` at which it reads out the Q-function.
//!
//! Everything here is dimensionless: `tau = chi t` and `eta = gamma / chi`.
//! The measured `<sigma_x>` is `Re sum_M z^M rho_MM` with the complex decay
//! factor `z = (eta + i e^{-2(eta+i)tau}) / (eta + i)`, `mu = |z|`,
//! `theta = arg z`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;

use crate::error::{QcavError, Result};
use crate::fock::{padded_cutoff, FieldDensity, FieldState, FockVector};

/// `tau = 3pi/4`, where `mu` can be tuned to zero.
pub const MAGIC_TAU: f64 = 3.0 * PI / 4.0;

const BISECTION_MAX_ITER: usize = 200;
const ROOT_RESIDUAL: f64 = 1e-14;

/// Physical rates and their dimensionless combinations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayParams {
    /// Dispersive coupling `lambda^2 / delta`.
    pub chi: f64,
    /// Cavity field decay rate.
    pub gamma: f64,
    pub eta: f64,
    pub tau: f64,
}

impl DecayParams {
    pub fn new(chi: f64, gamma: f64, t: f64) -> Result<Self> {
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(QcavError::InvalidParameter { name: "chi", value: chi });
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(QcavError::InvalidParameter { name: "gamma", value: gamma });
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(QcavError::InvalidParameter { name: "t", value: t });
        }
        Ok(Self { chi, gamma, eta: gamma / chi, tau: chi * t })
    }

    /// Units with `chi = 1`, so `gamma = eta` and `t = tau`.
    pub fn dimensionless(eta: f64, tau: f64) -> Result<Self> {
        Self::new(1.0, eta, tau)
    }

    pub fn time(&self) -> f64 {
        self.tau / self.chi
    }

    /// `xi = gamma + i chi`.
    pub fn xi(&self) -> C64 {
        C64::new(self.gamma, self.chi)
    }

    pub fn phase_factor(&self) -> PhaseFactor {
        phase_factor(self.tau, self.eta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseFactor {
    pub z: C64,
    pub mu: f64,
    /// Principal argument in `(-pi, pi]`.
    pub theta: f64,
}

impl PhaseFactor {
    pub fn from_z(z: C64) -> Self {
        let mut theta = z.im.atan2(z.re);
        if theta == -PI {
            theta = PI;
        }
        Self { z, mu: z.norm(), theta }
    }
}

/// `z = (eta + i e^{-2(eta+i)tau}) / (eta + i)`.
pub fn phase_factor(tau: f64, eta: f64) -> PhaseFactor {
    if eta == 0.0 {
        // lossless: z = e^{-2 i tau} on the unit circle exactly
        let z = C64::from_polar(1.0, -2.0 * tau);
        return PhaseFactor { mu: 1.0, ..PhaseFactor::from_z(z) };
    }
    let i = C64::new(0.0, 1.0);
    let decay = (C64::new(-2.0 * eta * tau, -2.0 * tau)).exp();
    PhaseFactor::from_z((eta + i * decay) / C64::new(eta, 1.0))
}

/// `mu(tau, eta)` from its real closed form. The numerator
/// `eta^2 + e^{-4 eta tau} + 2 eta e^{-2 eta tau} sin 2tau` is summed as
/// `(eta + E sin 2tau)^2 + (E cos 2tau)^2`, `E = e^{-2 eta tau}`, which is the
/// same quantity without the cancellation that otherwise leaves `~1e-9`
/// of noise where `mu` vanishes.
pub fn mu_formula(tau: f64, eta: f64) -> f64 {
    let e = (-2.0 * eta * tau).exp();
    let (s, c) = (2.0 * tau).sin_cos();
    let a = eta + e * s;
    let b = e * c;
    ((a * a + b * b) / (1.0 + eta * eta)).sqrt()
}

/// `theta(tau, eta)` from the two-argument arctangent of its real closed form.
pub fn theta_formula(tau: f64, eta: f64) -> Result<f64> {
    let e = (-2.0 * eta * tau).exp();
    let (s, c) = (2.0 * tau).sin_cos();
    let num = -(eta + e * (s - eta * c));
    let den = eta * eta + e * (c + eta * s);
    if num.abs() < 1e-300 && den.abs() < 1e-300 {
        return Err(QcavError::PhaseUndefined);
    }
    let theta = num.atan2(den);
    Ok(if theta == -PI { PI } else { theta })
}

/// `g(eta) = eta - e^{-3 pi eta / 2}`; `mu(3pi/4, eta) = |g| / sqrt(1 + eta^2)`.
pub fn critical_residual(eta: f64) -> f64 {
    eta - (-1.5 * PI * eta).exp()
}

/// Root of `eta = e^{-3 pi eta / 2}` on `[0, 1]` by bisection. `g` is strictly
/// increasing there, so the root is unique.
pub fn critical_eta() -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut best = (f64::INFINITY, lo);
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let g = critical_residual(mid);
        if g.abs() < best.0 {
            best = (g.abs(), mid);
        }
        if g == 0.0 || mid <= lo || mid >= hi {
            break;
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    debug_assert!(best.0 <= ROOT_RESIDUAL);
    best.1
}

/// `Re sum_{M=0}^{N} z^M rho_MM`; branch-free equivalent of
/// `sum mu^M cos(M theta) rho_MM`.
pub fn sigma_x_closed(rho_displaced: &FieldDensity, tau: f64, eta: f64) -> f64 {
    let z = phase_factor(tau, eta).z;
    let mut zm = C64::new(1.0, 0.0);
    let mut acc = C64::new(0.0, 0.0);
    for p in rho_displaced.diagonal() {
        acc += zm * p;
        zm *= z;
    }
    acc.re
}

/// Unresummed double series over jump number `m` and surviving photons `k`:
/// `Re sum_m sum_k A^m / m! * (m+k)!/k! * B^k rho_{m+k}` with
/// `A = eta (1 - B) / (eta + i)` and `B = e^{-2(eta+i)tau}`.
pub fn sigma_x_double_sum(rho_displaced: &FieldDensity, tau: f64, eta: f64) -> f64 {
    let b = C64::new(-2.0 * eta * tau, -2.0 * tau).exp();
    let a = eta * (1.0 - b) / C64::new(eta, 1.0);
    let diag = rho_displaced.diagonal();
    let n = diag.len() - 1;
    let mut acc = C64::new(0.0, 0.0);
    let mut am = C64::new(1.0, 0.0);
    for m in 0..=n {
        // A^m/m! * (m+k)!/k! * B^k, starting at A^m for k = 0
        let mut term = am;
        for k in 0..=(n - m) {
            if k > 0 {
                term *= b * ((m + k) as f64 / k as f64);
            }
            acc += term * diag[m + k];
        }
        am *= a;
    }
    acc.re
}

/// Field displaced for the measurement pipeline: `D(alpha) rho D(alpha)^dagger`,
/// kept up to the padded cutoff so no population is cropped.
pub fn displaced_field(state: &FieldState, alpha: C64) -> FieldDensity {
    state.displaced_density(alpha, padded_cutoff(state.cutoff()))
}

/// Lossless signal `sum_m P_m(alpha) cos(2 m tau)` of the displaced state.
pub fn sigma_x_lossless(psi: &FockVector, alpha: C64, tau: f64) -> f64 {
    let rho = psi.displaced_to(alpha, padded_cutoff(psi.cutoff())).density();
    rho.diagonal().iter().enumerate().map(|(m, p)| p * (2.0 * m as f64 * tau).cos()).sum()
}

/// Parity-measurement time `tau = pi/2`.
pub const PARITY_TAU: f64 = FRAC_PI_2;

/// Dipole signal recorded for phase-space point `alpha`: the field is displaced
/// by `-alpha` so that the `M = 0` term is `<alpha|rho|alpha>`.
pub fn measure_sigma_x(state: &FieldState, alpha: C64, tau: f64, eta: f64) -> f64 {
    sigma_x_closed(&displaced_field(state, -alpha), tau, eta)
}

/// `Q(alpha)` read out at `(tau, eta) = (3pi/4, eta*)`, where `mu = 0`.
pub fn reconstruct_q_point(state: &FieldState, alpha: C64) -> f64 {
    measure_sigma_x(state, alpha, MAGIC_TAU, critical_eta()) / PI
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuSample {
    pub tau: f64,
    pub mu: f64,
    pub theta: f64,
}

/// `steps` uniform samples of the decay factor on `[0, tau_max]`.
pub fn mu_curve(eta: f64, tau_max: f64, steps: usize) -> Result<Vec<MuSample>> {
    if steps < 2 {
        return Err(QcavError::InvalidParameter { name: "steps", value: steps as f64 });
    }
    if !(tau_max >= 0.0 && tau_max.is_finite()) {
        return Err(QcavError::InvalidParameter { name: "tau_max", value: tau_max });
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(QcavError::InvalidParameter { name: "eta", value: eta });
    }
    Ok((0..steps)
        .map(|k| {
            let tau = tau_max * k as f64 / (steps - 1) as f64;
            let pf = phase_factor(tau, eta);
            MuSample { tau, mu: pf.mu, theta: pf.theta }
        })
        .collect())
}
