//! Truncated Fock-space numerics for a single field mode.
//!
//! States live in the number basis `|0>, ..., |N>`. The displacement operator
//! is built by exponentiating its generator in a padded space of dimension
//! [`padded_cutoff`]` + 1` and cropping, which keeps the retained block clear
//! of the reflection artefacts that appear at the truncation edge.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{QcavError, Result};

pub type CMatrix = Array2<C64>;

pub const DEFAULT_CUTOFF: usize = 32;

/// Largest discarded tail probability a state factory accepts.
pub const TAIL_TOLERANCE: f64 = 1e-12;

const NORM_TOLERANCE: f64 = 1e-10;
const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Working cutoff used when exponentiating the displacement generator.
pub fn padded_cutoff(cutoff: usize) -> usize {
    2 * cutoff + 16
}

/// `|alpha|^2 > N/4`: displaced states start to feel the cutoff.
pub fn truncation_risk(alpha: C64, cutoff: usize) -> bool {
    alpha.norm_sqr() > cutoff as f64 / 4.0
}

pub(crate) fn warn_truncation(alpha: C64, cutoff: usize) {
    if truncation_risk(alpha, cutoff) {
        log::warn!("truncation risk: |alpha|^2 = {} exceeds cutoff/4 = {}", alpha.norm_sqr(), cutoff as f64 / 4.0);
    }
}

/// Pure field state `sum_n c_n |n>`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    amps: Vec<C64>,
}

impl FockVector {
    /// Wraps amplitudes, rejecting anything not normalized to 1e-10.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(QcavError::DimensionMismatch { expected: 1, got: 0 });
        }
        let norm: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(QcavError::NotNormalized(norm));
        }
        Ok(Self { amps })
    }

    /// No normalization check; used for cropped results of displacement.
    pub(crate) fn from_raw(amps: Vec<C64>) -> Self {
        debug_assert!(!amps.is_empty());
        Self { amps }
    }

    pub fn number_state(n: usize, cutoff: usize) -> Result<Self> {
        if n > cutoff {
            return Err(QcavError::FockAboveCutoff { n, cutoff });
        }
        let mut amps = vec![C64::new(0.0, 0.0); cutoff + 1];
        amps[n] = C64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn density(&self) -> FieldDensity {
        let n = self.amps.len();
        let matrix = Array2::from_shape_fn((n, n), |(i, j)| self.amps[i] * self.amps[j].conj());
        FieldDensity { matrix }
    }

    /// `D(alpha)|psi>` at the same cutoff.
    pub fn displaced(&self, alpha: C64) -> FockVector {
        self.displaced_to(alpha, self.cutoff())
    }

    /// `D(alpha)|psi>` cropped to `cutoff_out`. The exponential is taken in
    /// `padded_cutoff(max(N, cutoff_out))`.
    pub fn displaced_to(&self, alpha: C64, cutoff_out: usize) -> FockVector {
        warn_truncation(alpha, cutoff_out);
        let work = padded_cutoff(self.cutoff().max(cutoff_out));
        let gen = DisplacementGenerator::new(alpha, work);
        let mut v = vec![C64::new(0.0, 0.0); work + 1];
        v[..self.amps.len()].copy_from_slice(&self.amps);
        let full = gen.exp_apply(&v);
        let lost: f64 = full[cutoff_out + 1..].iter().map(|c| c.norm_sqr()).sum();
        if lost > NORM_TOLERANCE {
            log::warn!("displacement pushed probability {lost:e} past cutoff {cutoff_out}");
        }
        FockVector::from_raw(full[..=cutoff_out].to_vec())
    }
}

/// Field density matrix `rho_nm` on the truncated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDensity {
    matrix: CMatrix,
}

impl FieldDensity {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c || r == 0 {
            return Err(QcavError::DimensionMismatch { expected: r, got: c });
        }
        let rho = Self { matrix };
        let herm = rho.hermiticity_error();
        if herm > HERMITIAN_TOLERANCE {
            return Err(QcavError::InvalidParameter { name: "hermiticity error", value: herm });
        }
        if let Some(&p) = rho.diagonal().iter().find(|&&p| p < -HERMITIAN_TOLERANCE) {
            return Err(QcavError::InvalidParameter { name: "diagonal entry", value: p });
        }
        Ok(rho)
    }

    pub fn vacuum(cutoff: usize) -> Self {
        let mut matrix = CMatrix::zeros((cutoff + 1, cutoff + 1));
        matrix[[0, 0]] = C64::new(1.0, 0.0);
        Self { matrix }
    }

    pub(crate) fn from_raw(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn cutoff(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diag().iter().map(|c| c.re).collect()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[[i, j]] - self.matrix[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// `D(alpha) rho D(alpha)^dagger` cropped to `cutoff_out`.
    pub fn displaced_to(&self, alpha: C64, cutoff_out: usize) -> FieldDensity {
        warn_truncation(alpha, cutoff_out);
        let n_in = self.cutoff() + 1;
        let work = padded_cutoff(self.cutoff().max(cutoff_out));
        let dim = work + 1;
        let gen = DisplacementGenerator::new(alpha, work);

        // X = D rho, column by column
        let mut x = CMatrix::zeros((dim, n_in));
        let mut col = vec![C64::new(0.0, 0.0); dim];
        for j in 0..n_in {
            col.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
            for i in 0..n_in {
                col[i] = self.matrix[[i, j]];
            }
            let out = gen.exp_apply(&col);
            x.column_mut(j).iter_mut().zip(out).for_each(|(d, s)| *d = s);
        }
        // rho' = (D X^dagger)^dagger; columns of X^dagger are rows of X conjugated
        let keep = cutoff_out + 1;
        let mut result = CMatrix::zeros((keep, keep));
        for k in 0..keep {
            col.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
            for i in 0..n_in {
                col[i] = x[[k, i]].conj();
            }
            let out = gen.exp_apply(&col);
            for m in 0..keep {
                result[[k, m]] = out[m].conj();
            }
        }
        FieldDensity { matrix: result }
    }
}

/// Pure or mixed field state accepted by the measurement pipeline.
#[derive(Clone, Debug)]
pub enum FieldState {
    Pure(FockVector),
    Mixed(FieldDensity),
}

impl FieldState {
    pub fn cutoff(&self) -> usize {
        match self {
            FieldState::Pure(v) => v.cutoff(),
            FieldState::Mixed(r) => r.cutoff(),
        }
    }

    pub fn density(&self) -> FieldDensity {
        match self {
            FieldState::Pure(v) => v.density(),
            FieldState::Mixed(r) => r.clone(),
        }
    }

    pub fn displaced_density(&self, alpha: C64, cutoff_out: usize) -> FieldDensity {
        match self {
            FieldState::Pure(v) => v.displaced_to(alpha, cutoff_out).density(),
            FieldState::Mixed(r) => r.displaced_to(alpha, cutoff_out),
        }
    }
}

impl From<FockVector> for FieldState {
    fn from(v: FockVector) -> Self {
        FieldState::Pure(v)
    }
}

impl From<FieldDensity> for FieldState {
    fn from(r: FieldDensity) -> Self {
        FieldState::Mixed(r)
    }
}

/// Test-state family parsed from `vacuum | fock:n | coherent:re,im | cat:re,im`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateSpec {
    Vacuum,
    Fock(usize),
    Coherent(C64),
    /// Even cat `|beta> + |-beta>`.
    Cat(C64),
}

impl FromStr for StateSpec {
    type Err = QcavError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || QcavError::StateSpecParse(s.to_string());
        let s = s.trim();
        if s == "vacuum" {
            return Ok(StateSpec::Vacuum);
        }
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "fock" => rest.trim().parse().map(StateSpec::Fock).map_err(|_| bad()),
            "coherent" | "cat" => {
                let beta = parse_complex(rest).ok_or_else(bad)?;
                if kind == "coherent" {
                    Ok(StateSpec::Coherent(beta))
                } else if beta == C64::new(0.0, 0.0) {
                    Err(QcavError::DegenerateCat)
                } else {
                    Ok(StateSpec::Cat(beta))
                }
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Vacuum => write!(f, "vacuum"),
            StateSpec::Fock(n) => write!(f, "fock:{n}"),
            StateSpec::Coherent(b) => write!(f, "coherent:{},{}", b.re, b.im),
            StateSpec::Cat(b) => write!(f, "cat:{},{}", b.re, b.im),
        }
    }
}

/// Parses `<re>,<im>` (a lone `<re>` is accepted as a real amplitude).
pub fn parse_complex(s: &str) -> Option<C64> {
    let mut parts = s.split(',');
    let re: f64 = parts.next()?.trim().parse().ok()?;
    let im: f64 = match parts.next() {
        Some(p) => p.trim().parse().ok()?,
        None => 0.0,
    };
    if parts.next().is_some() || !re.is_finite() || !im.is_finite() {
        return None;
    }
    Some(C64::new(re, im))
}

/// Poisson weights `e^{-x} x^n / n!` for `n = 0..=cutoff`, plus the tail mass
/// beyond the cutoff, summed term by term (no `1 - sum` cancellation).
fn poisson_with_tail(x: f64, cutoff: usize, even_only: bool) -> (Vec<f64>, f64) {
    let mut weights = Vec::with_capacity(cutoff + 1);
    let mut p = (-x).exp();
    for n in 0..=cutoff {
        if n > 0 {
            p *= x / n as f64;
        }
        weights.push(p);
    }
    let mut tail = 0.0;
    let mut n = cutoff;
    loop {
        n += 1;
        p *= x / n as f64;
        if !even_only || n.is_multiple_of(2) {
            tail += p;
        }
        if n as f64 > x && p < 1e-20 * tail.max(1e-300) {
            break;
        }
        if p == 0.0 {
            break;
        }
    }
    (weights, tail)
}

/// Coherent-state amplitudes `<n|alpha>` for `n = 0..=cutoff` (exact, no
/// truncation beyond dropping `n > cutoff`).
pub fn coherent_amplitudes(alpha: C64, cutoff: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..=cutoff {
        if n > 0 {
            c *= alpha / (n as f64).sqrt();
        }
        amps.push(c);
    }
    amps
}

/// Builds a normalized state, failing if the discarded tail is ≥ 1e-12.
pub fn make_state(spec: StateSpec, cutoff: usize) -> Result<FockVector> {
    match spec {
        StateSpec::Vacuum => FockVector::number_state(0, cutoff),
        StateSpec::Fock(n) => FockVector::number_state(n, cutoff),
        StateSpec::Coherent(beta) => {
            let (_, tail) = poisson_with_tail(beta.norm_sqr(), cutoff, false);
            if tail >= TAIL_TOLERANCE {
                return Err(QcavError::CutoffTooSmall { cutoff, tail });
            }
            FockVector::new(coherent_amplitudes(beta, cutoff))
        }
        StateSpec::Cat(beta) => {
            if beta == C64::new(0.0, 0.0) {
                return Err(QcavError::DegenerateCat);
            }
            let x = beta.norm_sqr();
            let norm = (2.0 * (1.0 + (-2.0 * x).exp())).sqrt().recip();
            let (_, even_tail) = poisson_with_tail(x, cutoff, true);
            let tail = 4.0 * norm * norm * even_tail;
            if tail >= TAIL_TOLERANCE {
                return Err(QcavError::CutoffTooSmall { cutoff, tail });
            }
            let amps = coherent_amplitudes(beta, cutoff)
                .into_iter()
                .enumerate()
                .map(|(n, c)| if n % 2 == 0 { c * (2.0 * norm) } else { C64::new(0.0, 0.0) })
                .collect();
            FockVector::new(amps)
        }
    }
}

/// `a` on the truncated basis: `a[n-1, n] = sqrt(n)`.
pub fn annihilation_matrix(cutoff: usize) -> CMatrix {
    let mut a = CMatrix::zeros((cutoff + 1, cutoff + 1));
    for n in 1..=cutoff {
        a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation_matrix(cutoff: usize) -> CMatrix {
    annihilation_matrix(cutoff).t().mapv(|c| c.conj())
}

/// The banded anti-Hermitian generator `alpha a^dagger - alpha^* a` on
/// `0..=cutoff`, exponentiated against vectors by Taylor series with
/// substeps sized so each step has norm ≤ 1/2.
struct DisplacementGenerator {
    alpha: C64,
    sqrt_n: Vec<f64>,
    substeps: usize,
}

impl DisplacementGenerator {
    fn new(alpha: C64, cutoff: usize) -> Self {
        let sqrt_n: Vec<f64> = (0..=cutoff + 1).map(|n| (n as f64).sqrt()).collect();
        // ||G|| ≤ 2|alpha| sqrt(N)
        let bound = 2.0 * alpha.norm() * (cutoff as f64).sqrt();
        let substeps = (bound / 0.5).ceil().max(1.0) as usize;
        Self { alpha, sqrt_n, substeps }
    }

    fn apply(&self, v: &[C64], out: &mut [C64], scale: f64) {
        let n = v.len();
        let a = self.alpha * scale;
        let ac = self.alpha.conj() * scale;
        for k in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            if k > 0 {
                acc += a * self.sqrt_n[k] * v[k - 1];
            }
            if k + 1 < n {
                acc -= ac * self.sqrt_n[k + 1] * v[k + 1];
            }
            out[k] = acc;
        }
    }

    fn exp_apply(&self, v: &[C64]) -> Vec<C64> {
        let mut acc = v.to_vec();
        if self.alpha == C64::new(0.0, 0.0) {
            return acc;
        }
        let h = 1.0 / self.substeps as f64;
        let mut term = vec![C64::new(0.0, 0.0); v.len()];
        let mut next = vec![C64::new(0.0, 0.0); v.len()];
        for _ in 0..self.substeps {
            term.copy_from_slice(&acc);
            for k in 1..=40 {
                self.apply(&term, &mut next, h / k as f64);
                std::mem::swap(&mut term, &mut next);
                let mut tnorm = 0.0_f64;
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a += *t;
                    tnorm = tnorm.max(t.norm());
                }
                if tnorm < 1e-18 {
                    break;
                }
            }
        }
        acc
    }
}

/// `D(alpha) = exp(alpha a^dagger - alpha^* a)`, exponentiated in the padded
/// space and cropped to `(N+1) x (N+1)`.
pub fn displacement_matrix(alpha: C64, cutoff: usize) -> CMatrix {
    warn_truncation(alpha, cutoff);
    let work = padded_cutoff(cutoff);
    let gen = DisplacementGenerator::new(alpha, work);
    let mut d = CMatrix::zeros((cutoff + 1, cutoff + 1));
    let mut e = vec![C64::new(0.0, 0.0); work + 1];
    for j in 0..=cutoff {
        e.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
        e[j] = C64::new(1.0, 0.0);
        let col = gen.exp_apply(&e);
        for i in 0..=cutoff {
            d[[i, j]] = col[i];
        }
    }
    d
}

/// Exact matrix elements `<m|D(beta)|n>` for `m, n ≤ cutoff` from the
/// associated-Laguerre closed form. Independent of the truncated exponential.
pub fn displacement_elements(beta: C64, cutoff: usize) -> CMatrix {
    let x = beta.norm_sqr();
    let envelope = (-x / 2.0).exp();
    let mut d = CMatrix::zeros((cutoff + 1, cutoff + 1));
    let mut lower = C64::new(1.0, 0.0); // prod_{j≤d} beta/sqrt(j)
    let mut upper = C64::new(1.0, 0.0); // prod_{j≤d} -beta^*/sqrt(j)
    let mut lag = vec![0.0; cutoff + 1];
    for diff in 0..=cutoff {
        if diff > 0 {
            let s = (diff as f64).sqrt();
            lower *= beta / s;
            upper *= -beta.conj() / s;
        }
        let kmax = cutoff - diff;
        let a = diff as f64;
        // L_k^{(a)}(x) by the three-term recurrence
        lag[0] = 1.0;
        if kmax >= 1 {
            lag[1] = 1.0 + a - x;
        }
        for k in 1..kmax {
            let kf = k as f64;
            lag[k + 1] = ((2.0 * kf + 1.0 + a - x) * lag[k] - (kf + a) * lag[k - 1]) / (kf + 1.0);
        }
        // sqrt(k! / (k+d)!) beta^d = lower * prod_{j=1}^{k} sqrt(j/(j+d))
        let mut ratio = 1.0;
        for k in 0..=kmax {
            if k > 0 {
                ratio *= (k as f64 / (k + diff) as f64).sqrt();
            }
            let mag = envelope * ratio * lag[k];
            d[[k + diff, k]] = lower * mag;
            if diff > 0 {
                d[[k, k + diff]] = upper * mag;
            }
        }
    }
    d
}

/// `P_m = rho_mm`.
pub fn photon_distribution(rho: &FieldDensity) -> Vec<f64> {
    rho.diagonal()
}

/// `<alpha|rho|alpha>`, contracting rho with exact coherent amplitudes.
pub fn coherent_overlap(rho: &FieldDensity, alpha: C64) -> f64 {
    warn_truncation(alpha, rho.cutoff());
    let v = coherent_amplitudes(alpha, rho.cutoff());
    let m = rho.matrix();
    let mut acc = C64::new(0.0, 0.0);
    for (n, vn) in v.iter().enumerate() {
        let mut row = C64::new(0.0, 0.0);
        for (k, vk) in v.iter().enumerate() {
            row += m[[n, k]] * vk;
        }
        acc += vn.conj() * row;
    }
    acc.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn annihilation_entries() {
        let a = annihilation_matrix(1);
        assert_eq!(a[[0, 1]], c(1.0, 0.0));
        assert_eq!(a[[1, 0]], c(0.0, 0.0));

        let a = annihilation_matrix(4);
        let ad = creation_matrix(4);
        let num = ad.dot(&a);
        assert_abs_diff_eq!(num[[3, 3]].re, 3.0, epsilon = 1e-14);

        let comm = a.dot(&ad) - ad.dot(&a);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(comm[[i, j]].re, expect, epsilon = 1e-14);
                assert_abs_diff_eq!(comm[[i, j]].im, 0.0, epsilon = 1e-14);
            }
        }
        // truncation edge
        assert_abs_diff_eq!(comm[[4, 4]].re, -4.0, epsilon = 1e-14);
    }

    #[test]
    fn displacement_zero_is_identity() {
        let d = displacement_matrix(c(0.0, 0.0), 10);
        let id = CMatrix::eye(11);
        assert_eq!(max_abs_diff(&d, &id), 0.0);
    }

    #[test]
    fn displaced_vacuum_is_poisson() {
        let d = displacement_matrix(c(1.0, 0.0), 32);
        for n in 0..=32 {
            let p = d[[n, 0]].norm_sqr();
            let expect = (-1.0_f64).exp() / factorial(n);
            assert_abs_diff_eq!(p, expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn displacement_inverse_on_inner_block() {
        let alpha = c(0.7, 0.2);
        let d = displacement_matrix(alpha, 32);
        let dm = displacement_matrix(-alpha, 32);
        let prod = d.dot(&dm);
        for i in 0..=16 {
            for j in 0..=16 {
                let expect = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                assert!((prod[[i, j]] - expect).norm() < 1e-9, "({i},{j}) {}", prod[[i, j]]);
            }
        }
    }

    #[test]
    fn exponential_matches_laguerre_closed_form() {
        for &alpha in &[c(0.3, -0.4), c(1.2, 0.5), c(-2.0, 1.0)] {
            let a = displacement_matrix(alpha, 32);
            let b = displacement_elements(alpha, 32);
            let mut worst = 0.0_f64;
            for i in 0..=24 {
                for j in 0..=24 {
                    worst = worst.max((a[[i, j]] - b[[i, j]]).norm());
                }
            }
            assert!(worst < 1e-12, "alpha={alpha} worst={worst:e}");
        }
    }

    #[test]
    fn laguerre_elements_column_zero_is_coherent() {
        let beta = c(1.3, -0.6);
        let d = displacement_elements(beta, 20);
        let v = coherent_amplitudes(beta, 20);
        for n in 0..=20 {
            assert!((d[[n, 0]] - v[n]).norm() < 1e-15);
        }
    }

    #[test]
    fn state_factories() {
        let v = make_state(StateSpec::Vacuum, 8).unwrap();
        assert_eq!(v.amps()[0], c(1.0, 0.0));
        assert!(v.amps()[1..].iter().all(|a| *a == c(0.0, 0.0)));

        let coh = make_state(StateSpec::Coherent(c(1.0, 0.0)), 32).unwrap();
        assert_abs_diff_eq!(coh.amps()[0].re, (-0.5_f64).exp(), epsilon = 1e-15);

        let cat = make_state(StateSpec::Cat(c(2.0, 0.0)), 32).unwrap();
        for n in (1..=32).step_by(2) {
            assert_eq!(cat.amps()[n], c(0.0, 0.0));
        }
        let norm = (2.0 * (1.0 + (-8.0_f64).exp())).sqrt().recip();
        // c_0 = N * 2 e^{-|beta|^2/2}
        assert_abs_diff_eq!(cat.amps()[0].re, 2.0 * norm * (-2.0_f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(cat.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn factory_errors() {
        assert_eq!(make_state(StateSpec::Fock(9), 8), Err(QcavError::FockAboveCutoff { n: 9, cutoff: 8 }));
        assert!(matches!(
            make_state(StateSpec::Coherent(c(3.0, 0.0)), 8),
            Err(QcavError::CutoffTooSmall { cutoff: 8, .. })
        ));
        assert!(matches!(make_state(StateSpec::Cat(c(2.5, 0.0)), 16), Err(QcavError::CutoffTooSmall { .. })));
        assert_eq!(make_state(StateSpec::Cat(c(0.0, 0.0)), 8), Err(QcavError::DegenerateCat));
    }

    #[test]
    fn parse_state_specs() {
        assert_eq!("vacuum".parse::<StateSpec>().unwrap(), StateSpec::Vacuum);
        assert_eq!("fock:3".parse::<StateSpec>().unwrap(), StateSpec::Fock(3));
        assert_eq!("coherent:1,0.5".parse::<StateSpec>().unwrap(), StateSpec::Coherent(c(1.0, 0.5)));
        assert_eq!("cat:1.5,0".parse::<StateSpec>().unwrap(), StateSpec::Cat(c(1.5, 0.0)));
        assert_eq!("cat:0,0".parse::<StateSpec>(), Err(QcavError::DegenerateCat));
        for bad in ["", "fock", "fock:-1", "coherent:a,b", "squeezed:1", "coherent:1,2,3"] {
            assert!(bad.parse::<StateSpec>().is_err(), "{bad}");
        }
        let spec = StateSpec::Cat(c(1.5, -0.25));
        assert_eq!(spec.to_string().parse::<StateSpec>().unwrap(), spec);
    }

    #[test]
    fn photon_distributions() {
        let p = photon_distribution(&FieldDensity::vacuum(5));
        assert_eq!(p, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let coh = make_state(StateSpec::Coherent(c(1.0, 0.0)), 32).unwrap().density();
        for (m, pm) in photon_distribution(&coh).into_iter().enumerate() {
            assert_abs_diff_eq!(pm, (-1.0_f64).exp() / factorial(m), epsilon = 1e-15);
        }

        let alpha = c(1.1, -0.7);
        let disp = FockVector::number_state(0, 32).unwrap().displaced(alpha).density();
        let mean = alpha.norm_sqr();
        let p = photon_distribution(&disp);
        for (m, pm) in p.iter().enumerate() {
            let expect = (-mean).exp() * mean.powi(m as i32) / factorial(m);
            assert_abs_diff_eq!(*pm, expect, epsilon = 1e-10);
        }
        assert!(p.iter().sum::<f64>() <= 1.0 + 1e-8);
    }

    #[test]
    fn coherent_overlaps() {
        let vac = FieldDensity::vacuum(32);
        assert_abs_diff_eq!(coherent_overlap(&vac, c(0.0, 0.0)), 1.0, epsilon = 1e-15);
        let alpha = c(0.8, -1.1);
        assert_abs_diff_eq!(coherent_overlap(&vac, alpha), (-alpha.norm_sqr()).exp(), epsilon = 1e-15);

        let beta = c(-0.5, 1.2);
        let rho = make_state(StateSpec::Coherent(beta), 32).unwrap().density();
        for alpha in [c(0.0, 0.0), c(1.0, 1.0), c(-1.5, 0.3)] {
            let expect = (-(alpha - beta).norm_sqr()).exp();
            assert_abs_diff_eq!(coherent_overlap(&rho, alpha), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn truncation_risk_threshold() {
        assert!(!truncation_risk(c(2.0, 0.0), 16));
        assert!(truncation_risk(c(2.01, 0.0), 16));
    }

    #[test]
    fn density_validation() {
        let mut m = CMatrix::zeros((2, 2));
        m[[0, 0]] = c(0.5, 0.0);
        m[[1, 1]] = c(0.5, 0.0);
        m[[0, 1]] = c(0.1, 0.2);
        assert!(FieldDensity::new(m.clone()).is_err());
        m[[1, 0]] = c(0.1, -0.2);
        assert!(FieldDensity::new(m).is_ok());
    }

    #[test]
    fn mixed_displacement_matches_pure() {
        let psi = make_state(StateSpec::Cat(c(1.0, 0.5)), 24).unwrap();
        let alpha = c(-0.6, 0.9);
        let a = psi.displaced_to(alpha, 30).density();
        let b = psi.density().displaced_to(alpha, 30);
        assert!(max_abs_diff(a.matrix(), b.matrix()) < 1e-13);
    }

    proptest! {
        #[test]
        fn generated_states_are_valid(re in -2.5f64..2.5, im in -2.5f64..2.5, n in 0usize..32) {
            let beta = c(re, im);
            prop_assume!(beta.norm() <= 2.5);
            let mut specs = vec![StateSpec::Coherent(beta), StateSpec::Fock(n), StateSpec::Vacuum];
            if beta.norm() > 1e-3 {
                specs.push(StateSpec::Cat(beta));
            }
            for spec in specs {
                let rho = make_state(spec, 32).unwrap().density();
                prop_assert!((rho.trace() - 1.0).abs() < 1e-10);
                prop_assert!(rho.hermiticity_error() < 1e-12);
            }
        }

        #[test]
        fn displacement_unitary_on_inner_half(re in -1.0f64..1.0, im in -1.0f64..1.0) {
            // the sum in D^dagger D must run past N: the exact operator moves up
            // to 1e-3 of |16> beyond n = 32 at |alpha| = sqrt(32)/4
            let alpha = c(re, im);
            prop_assume!(alpha.norm() <= 32f64.sqrt() / 4.0);
            let d = displacement_matrix(alpha, 64);
            let dd = d.t().mapv(|x| x.conj()).dot(&d);
            for i in 0..=16 {
                for j in 0..=16 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dd[[i, j]] - c(expect, 0.0)).norm() < 1e-9);
                }
            }
        }

        #[test]
        fn displaced_vacuum_poisson(re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let alpha = c(re, im);
            prop_assume!(alpha.norm() <= 2.0);
            let p = photon_distribution(&FockVector::number_state(0, 32).unwrap().displaced(alpha).density());
            let mean = alpha.norm_sqr();
            for (m, pm) in p.iter().enumerate() {
                let expect = (-mean).exp() * mean.powi(m as i32) / factorial(m);
                prop_assert!((pm - expect).abs() < 1e-10);
            }
        }
    }
}
