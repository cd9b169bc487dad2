//! Brute-force references for the closed-form signal.
//!
//! The atom ⊗ field density is stored as four field blocks
//! `rho = sum_ij |i><j| ⊗ rho_ij` with `i, j ∈ {e, g}`. Under the dispersive
//! Hamiltonian `chi a^dagger a sigma_z` and cavity damping the generator never
//! mixes blocks, so each block evolves on its own:
//!
//! `d rho_ij/dt = -i chi (s_i n rho_ij - s_j rho_ij n) + 2 gamma a rho_ij a^dagger
//!   - gamma (n rho_ij + rho_ij n)`,  `s_e = +1`, `s_g = -1`.
//!
//! Three independent routes are provided: RK4 integration of that equation, the
//! factored jump-series solution `e^{Lt} e^{f(t) J}` evaluated block by block,
//! and RK4 integration with the full Jaynes-Cummings coupling in place of the
//! dispersive Hamiltonian.

use ndarray::{ArrayViewMut2, Zip};
use num_complex::Complex64 as C64;

use crate::error::{QcavError, Result};
use crate::fock::{CMatrix, FieldDensity, FockVector};

pub const EE: usize = 0;
pub const EG: usize = 1;
pub const GE: usize = 2;
pub const GG: usize = 3;

/// `(s_i, s_j)` for blocks in storage order.
const BLOCK_SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

#[derive(Clone, Debug, PartialEq)]
pub struct JointDensity {
    blocks: [CMatrix; 4],
}

impl JointDensity {
    pub fn zeros(cutoff: usize) -> Self {
        let z = CMatrix::zeros((cutoff + 1, cutoff + 1));
        Self { blocks: [z.clone(), z.clone(), z.clone(), z] }
    }

    pub fn from_blocks(ee: CMatrix, eg: CMatrix, ge: CMatrix, gg: CMatrix) -> Result<Self> {
        let dim = ee.dim();
        for b in [&ee, &eg, &ge, &gg] {
            if b.dim() != dim || dim.0 != dim.1 || dim.0 == 0 {
                return Err(QcavError::DimensionMismatch { expected: dim.0, got: b.nrows() });
            }
        }
        let std = |m: CMatrix| if m.is_standard_layout() { m } else { m.as_standard_layout().into_owned() };
        Ok(Self { blocks: [std(ee), std(eg), std(ge), std(gg)] })
    }

    pub fn cutoff(&self) -> usize {
        self.blocks[0].nrows() - 1
    }

    /// Block in storage order [`EE`], [`EG`], [`GE`], [`GG`].
    pub fn block(&self, index: usize) -> &CMatrix {
        &self.blocks[index]
    }

    pub fn block_mut(&mut self, index: usize) -> ArrayViewMut2<'_, C64> {
        self.blocks[index].view_mut()
    }

    fn flat(&self, index: usize) -> &[C64] {
        self.blocks[index].as_slice().expect("blocks are kept in standard layout")
    }

    fn flat_mut(&mut self, index: usize) -> &mut [C64] {
        self.blocks[index].as_slice_mut().expect("blocks are kept in standard layout")
    }

    pub fn trace(&self) -> C64 {
        self.blocks[EE].diag().sum() + self.blocks[GG].diag().sum()
    }

    /// Worst entrywise violation of `rho = rho^dagger` over all blocks.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.cutoff() + 1;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let ee = &self.blocks[EE];
                let gg = &self.blocks[GG];
                worst = worst
                    .max((ee[[i, j]] - ee[[j, i]].conj()).norm())
                    .max((gg[[i, j]] - gg[[j, i]].conj()).norm())
                    .max((self.blocks[GE][[i, j]] - self.blocks[EG][[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// Reduced field state `rho_ee + rho_gg`.
    pub fn field_density(&self) -> FieldDensity {
        FieldDensity::from_raw(&self.blocks[EE] + &self.blocks[GG])
    }

    pub fn max_abs_diff(&self, other: &JointDensity) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    /// `self = a + h * b`
    fn set_axpy(&mut self, a: &JointDensity, h: f64, b: &JointDensity) {
        for k in 0..4 {
            Zip::from(&mut self.blocks[k]).and(&a.blocks[k]).and(&b.blocks[k]).for_each(|o, &x, &y| *o = x + y * h);
        }
    }

    /// `self += h/6 (k1 + 2 k2 + 2 k3 + k4)`
    fn rk4_update(&mut self, h: f64, k: [&JointDensity; 4]) {
        let (w1, w2) = (h / 6.0, h / 3.0);
        for b in 0..4 {
            let o = self.flat_mut(b);
            let (k1, k2, k3, k4) = (k[0].flat(b), k[1].flat(b), k[2].flat(b), k[3].flat(b));
            for i in 0..o.len() {
                o[i] += (k1[i] + k4[i]) * w1 + (k2[i] + k3[i]) * w2;
            }
        }
    }
}

/// Atom in `(|e> + |g>)/sqrt 2`, field `D(alpha)|psi>`: every block is
/// `D|psi><psi|D^dagger / 2`.
pub fn joint_initial(psi_field: &FockVector, alpha: C64) -> JointDensity {
    let half = psi_field.displaced(alpha).density().matrix() * C64::new(0.5, 0.0);
    JointDensity { blocks: [half.clone(), half.clone(), half.clone(), half] }
}

/// `<sigma_x> = 2 Re Tr rho_eg`.
pub fn sigma_x_expectation(rho: &JointDensity) -> f64 {
    2.0 * rho.blocks[EG].diag().sum().re
}

/// Linear generator of the joint density.
pub trait Generator {
    fn cutoff(&self) -> usize;

    fn apply(&self, rho: &JointDensity, out: &mut JointDensity);

    /// Largest step the RK4 driver accepts.
    fn max_dt(&self) -> f64;
}

fn base_dt_limit(chi: f64, gamma: f64, cutoff: usize) -> f64 {
    let n = (cutoff + 1) as f64;
    0.01 / (chi.abs() * n).max(gamma * n).max(1.0)
}

/// Dispersive Hamiltonian plus cavity damping.
#[derive(Clone, Debug)]
pub struct DispersiveLindblad {
    chi: f64,
    gamma: f64,
    /// per block: `-i chi (s_i n - s_j m) - gamma (n + m)`
    diag: [CMatrix; 4],
    /// `2 gamma sqrt((n+1)(m+1))`, zero on the last row/column
    jump: ndarray::Array2<f64>,
}

impl DispersiveLindblad {
    pub fn new(chi: f64, gamma: f64, cutoff: usize) -> Self {
        let dim = cutoff + 1;
        let diag = BLOCK_SIGNS.map(|(si, sj)| {
            CMatrix::from_shape_fn((dim, dim), |(n, m)| {
                let (n, m) = (n as f64, m as f64);
                C64::new(-gamma * (n + m), -chi * (si * n - sj * m))
            })
        });
        let jump = ndarray::Array2::from_shape_fn((dim, dim), |(n, m)| {
            if n + 1 < dim && m + 1 < dim {
                2.0 * gamma * (((n + 1) * (m + 1)) as f64).sqrt()
            } else {
                0.0
            }
        });
        Self { chi, gamma, diag, jump }
    }
}

impl Generator for DispersiveLindblad {
    fn cutoff(&self) -> usize {
        self.jump.nrows() - 1
    }

    fn apply(&self, rho: &JointDensity, out: &mut JointDensity) {
        let dim = self.jump.nrows();
        let jump = self.jump.as_slice().expect("standard layout");
        for k in 0..4 {
            let r = rho.flat(k);
            let c = self.diag[k].as_slice().expect("standard layout");
            let o = out.flat_mut(k);
            for ((o, c), r) in o.iter_mut().zip(c).zip(r) {
                *o = c * r;
            }
            // jump term couples (n, m) to (n+1, m+1)
            for n in 0..dim - 1 {
                let row = n * dim;
                let next = row + dim + 1;
                for m in 0..dim - 1 {
                    o[row + m] += r[next + m] * jump[row + m];
                }
            }
        }
    }

    fn max_dt(&self) -> f64 {
        base_dt_limit(self.chi, self.gamma, self.cutoff())
    }
}

/// `d rho/dt` of the dispersive master equation.
pub fn lindblad_rhs(rho: &JointDensity, chi: f64, gamma: f64) -> JointDensity {
    let gen = DispersiveLindblad::new(chi, gamma, rho.cutoff());
    let mut out = JointDensity::zeros(rho.cutoff());
    gen.apply(rho, &mut out);
    out
}

/// Classical RK4 from `t = 0` to `t_end` with fixed step `dt` (last step
/// shortened). `observe` sees the state after every step, and once at `t = 0`.
pub fn evolve_rk4<G: Generator>(
    gen: &G,
    rho0: &JointDensity,
    t_end: f64,
    dt: f64,
    mut observe: impl FnMut(f64, &JointDensity),
) -> Result<JointDensity> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(QcavError::InvalidParameter { name: "dt", value: dt });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(QcavError::InvalidParameter { name: "t_end", value: t_end });
    }
    let max_dt = gen.max_dt();
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(QcavError::UnstableStep { dt, max_dt });
    }
    if rho0.cutoff() != gen.cutoff() {
        return Err(QcavError::DimensionMismatch { expected: gen.cutoff() + 1, got: rho0.cutoff() + 1 });
    }

    let cutoff = rho0.cutoff();
    let mut rho = rho0.clone();
    let mut k1 = JointDensity::zeros(cutoff);
    let mut k2 = JointDensity::zeros(cutoff);
    let mut k3 = JointDensity::zeros(cutoff);
    let mut k4 = JointDensity::zeros(cutoff);
    let mut tmp = JointDensity::zeros(cutoff);

    observe(0.0, &rho);
    // full steps, then whatever remains; a remainder below 1e-9 dt is rounding
    let full = ((t_end / dt) * (1.0 + 1e-12)).floor() as usize;
    let rest = t_end - full as f64 * dt;
    let steps = full + usize::from(rest > 1e-9 * dt);
    for step in 0..steps {
        let h = if step < full { dt } else { rest };
        gen.apply(&rho, &mut k1);
        tmp.set_axpy(&rho, 0.5 * h, &k1);
        gen.apply(&tmp, &mut k2);
        tmp.set_axpy(&rho, 0.5 * h, &k2);
        gen.apply(&tmp, &mut k3);
        tmp.set_axpy(&rho, h, &k3);
        gen.apply(&tmp, &mut k4);
        rho.rk4_update(h, [&k1, &k2, &k3, &k4]);
        let t = if step + 1 == steps { t_end } else { (step + 1) as f64 * dt };
        observe(t, &rho);
    }
    Ok(rho)
}

/// RK4 solution of the dispersive master equation at `t_end`.
/// Requires `dt ≤ 0.01 / max(chi (N+1), gamma (N+1), 1)`.
pub fn integrate_rk4(rho0: &JointDensity, chi: f64, gamma: f64, t_end: f64, dt: f64) -> Result<JointDensity> {
    let gen = DispersiveLindblad::new(chi, gamma, rho0.cutoff());
    evolve_rk4(&gen, rho0, t_end, dt, |_, _| {})
}

/// `(1 - e^{-x}) / x`, with its Taylor series near the removable point `x = 0`.
fn one_minus_exp_over(x: C64) -> C64 {
    if x.norm() < 1e-3 {
        // 1 - x/2 + x^2/6 - x^3/24 + x^4/120
        let mut term = C64::new(1.0, 0.0);
        let mut acc = term;
        for k in 2..=6 {
            term *= -x / k as f64;
            acc += term;
        }
        acc
    } else {
        (1.0 - (-x).exp()) / x
    }
}

const JUMP_SERIES_TOLERANCE: f64 = 1e-14;

/// Factored solution `rho(t) = e^{Lt} e^{f(t) J} rho(0)` evaluated per block.
///
/// For block `(i, j)` the atomic superoperators reduce to scalars:
/// `Gamma_i = gamma + i chi s_i`, `conj(Gamma_j) = gamma - i chi s_j`, and with
/// `S = Gamma_i + conj(Gamma_j)` the jump series is
/// `sum_n (2 gamma c)^n / n! a^n rho a^dagger^n`, `c = (1 - e^{-S t}) / S`,
/// followed by `rho_nm -> e^{-Gamma_i n t} e^{-conj(Gamma_j) m t} rho_nm`.
pub fn superop_evolve(rho0: &JointDensity, chi: f64, gamma: f64, t: f64) -> Result<JointDensity> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(QcavError::InvalidParameter { name: "t", value: t });
    }
    let cutoff = rho0.cutoff();
    let dim = cutoff + 1;
    let mut out = JointDensity::zeros(cutoff);
    let sqrt: Vec<f64> = (0..=dim).map(|n| (n as f64).sqrt()).collect();

    for (k, &(si, sj)) in BLOCK_SIGNS.iter().enumerate() {
        let gamma_i = C64::new(gamma, chi * si);
        let gamma_j_bar = C64::new(gamma, -chi * sj);
        let s = gamma_i + gamma_j_bar;
        let kappa = 2.0 * gamma * t * one_minus_exp_over(s * t);

        let mut term = rho0.blocks[k].clone();
        let mut acc = term.clone();
        let mut converged = max_abs(&term) < JUMP_SERIES_TOLERANCE;
        let mut next = CMatrix::zeros((dim, dim));
        for n in 1..=cutoff {
            if converged && kappa == C64::new(0.0, 0.0) {
                break;
            }
            // (kappa / n) a T a^dagger
            let f = kappa / n as f64;
            for p in 0..dim {
                for q in 0..dim {
                    next[[p, q]] = if p + 1 < dim && q + 1 < dim {
                        term[[p + 1, q + 1]] * (f * sqrt[p + 1] * sqrt[q + 1])
                    } else {
                        C64::new(0.0, 0.0)
                    };
                }
            }
            std::mem::swap(&mut term, &mut next);
            acc += &term;
            if max_abs(&term) < JUMP_SERIES_TOLERANCE {
                converged = true;
            }
        }
        if !converged {
            return Err(QcavError::SeriesNotConverged { n: cutoff, norm: max_abs(&term) });
        }

        let row: Vec<C64> = (0..dim).map(|n| (-gamma_i * (n as f64 * t)).exp()).collect();
        let col: Vec<C64> = (0..dim).map(|m| (-gamma_j_bar * (m as f64 * t)).exp()).collect();
        let o = &mut out.blocks[k];
        for n in 0..dim {
            for m in 0..dim {
                o[[n, m]] = acc[[n, m]] * row[n] * col[m];
            }
        }
    }
    Ok(out)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Bare Jaynes-Cummings parameters (rad/time).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullParams {
    pub omega: f64,
    pub omega_eg: f64,
    pub lambda_c: f64,
    /// `omega_eg - omega`
    pub delta: f64,
    /// `lambda_c^2 / delta`
    pub chi: f64,
}

impl FullParams {
    pub fn new(omega: f64, omega_eg: f64, lambda_c: f64) -> Result<Self> {
        let delta = omega_eg - omega;
        if delta == 0.0 || !delta.is_finite() {
            return Err(QcavError::InvalidParameter { name: "delta", value: delta });
        }
        if !lambda_c.is_finite() {
            return Err(QcavError::InvalidParameter { name: "lambda", value: lambda_c });
        }
        Ok(Self { omega, omega_eg, lambda_c, delta, chi: lambda_c * lambda_c / delta })
    }

    /// Parameters with the field frequency set to zero (only the detuning
    /// enters the interaction picture).
    pub fn from_detuning(delta: f64, lambda_c: f64) -> Result<Self> {
        Self::new(0.0, delta, lambda_c)
    }
}

/// `|delta| / (lambda sqrt(n+1))`; the dispersive regime is `r ≳ 10`.
pub fn dispersive_validity(params: &FullParams, n_relevant: usize) -> Result<f64> {
    if params.lambda_c == 0.0 {
        return Err(QcavError::NoCoupling);
    }
    Ok(params.delta.abs() / (params.lambda_c.abs() * ((n_relevant + 1) as f64).sqrt()))
}

/// `H = delta/2 sigma_z + lambda (a^dagger sigma_- + a sigma_+)` in the frame
/// rotating at the field frequency, plus cavity damping.
#[derive(Clone, Debug)]
pub struct FullJaynesCummings {
    params: FullParams,
    gamma: f64,
    cutoff: usize,
    sqrt: Vec<f64>,
}

impl FullJaynesCummings {
    pub fn new(params: FullParams, gamma: f64, cutoff: usize) -> Self {
        let sqrt = (0..=cutoff + 1).map(|n| (n as f64).sqrt()).collect();
        Self { params, gamma, cutoff, sqrt }
    }
}

impl Generator for FullJaynesCummings {
    fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn apply(&self, rho: &JointDensity, out: &mut JointDensity) {
        let dim = self.cutoff + 1;
        let half_delta = 0.5 * self.params.delta;
        let lam = self.params.lambda_c;
        let g = self.gamma;
        let sq = &self.sqrt;
        let b = &rho.blocks;
        let zero = C64::new(0.0, 0.0);
        // (a X)[n,m] = sqrt(n+1) X[n+1,m]; (a^dag X)[n,m] = sqrt(n) X[n-1,m]
        // (X a)[n,m] = sqrt(m) X[n,m-1];   (X a^dag)[n,m] = sqrt(m+1) X[n,m+1]
        let a_x = |x: &CMatrix, n: usize, m: usize| if n + 1 < dim { x[[n + 1, m]] * sq[n + 1] } else { zero };
        let ad_x = |x: &CMatrix, n: usize, m: usize| if n > 0 { x[[n - 1, m]] * sq[n] } else { zero };
        let x_a = |x: &CMatrix, n: usize, m: usize| if m > 0 { x[[n, m - 1]] * sq[m] } else { zero };
        let x_ad = |x: &CMatrix, n: usize, m: usize| if m + 1 < dim { x[[n, m + 1]] * sq[m + 1] } else { zero };
        let minus_i = C64::new(0.0, -1.0);

        for (k, &(si, sj)) in BLOCK_SIGNS.iter().enumerate() {
            let r = &b[k];
            // partner blocks: H couples e<->g through a, a^dagger
            let (row_partner, col_partner) = match k {
                EE => (GE, EG),
                EG => (GG, EE),
                GE => (EE, GG),
                _ => (EG, GE),
            };
            let rp = &b[row_partner];
            let cp = &b[col_partner];
            for n in 0..dim {
                for m in 0..dim {
                    // (H rho)_ij: H_ii rho_ij + H_i,ī rho_īj
                    let h_left =
                        r[[n, m]] * (si * half_delta) + lam * if si > 0.0 { a_x(rp, n, m) } else { ad_x(rp, n, m) };
                    // (rho H)_ij: rho_ij H_jj + rho_i,j̄ H_j̄,j
                    let h_right =
                        r[[n, m]] * (sj * half_delta) + lam * if sj > 0.0 { x_ad(cp, n, m) } else { x_a(cp, n, m) };
                    let mut v = minus_i * (h_left - h_right);
                    v -= r[[n, m]] * (g * (n + m) as f64);
                    if n + 1 < dim && m + 1 < dim {
                        v += r[[n + 1, m + 1]] * (2.0 * g * sq[n + 1] * sq[m + 1]);
                    }
                    out.blocks[k][[n, m]] = v;
                }
            }
        }
    }

    /// The dispersive guard, tightened so that `dt` also resolves the bare
    /// detuning and the vacuum Rabi frequency at the cutoff.
    fn max_dt(&self) -> f64 {
        let p = &self.params;
        let fast = p.delta.abs().max(2.0 * p.lambda_c.abs() * ((self.cutoff + 1) as f64).sqrt());
        base_dt_limit(p.chi, self.gamma, self.cutoff).min(0.1 / fast)
    }
}

/// RK4 evolution under the full Jaynes-Cummings coupling.
pub fn full_jc_evolve(
    rho0: &JointDensity,
    params: &FullParams,
    gamma: f64,
    t_end: f64,
    dt: f64,
) -> Result<JointDensity> {
    let gen = FullJaynesCummings::new(*params, gamma, rho0.cutoff());
    evolve_rk4(&gen, rho0, t_end, dt, |_, _| {})
}

/// `<sigma_x>` of a full-JC state, referred to the frame of the dispersive
/// Hamiltonian `chi a^dagger a sigma_z`: removes the bare detuning rotation and
/// the dispersive Lamb shift, `Tr rho_eg -> e^{i(delta + chi)t} Tr rho_eg`.
pub fn full_jc_sigma_x(rho: &JointDensity, params: &FullParams, t: f64) -> f64 {
    let phase = C64::from_polar(1.0, (params.delta + params.chi) * t);
    2.0 * (rho.blocks[EG].diag().sum() * phase).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_state, StateSpec};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_joint(cutoff: usize, seed: u64) -> JointDensity {
        // mixture of two displaced states with a non-trivial atomic part
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let u = make_state(StateSpec::Coherent(c(next(), next())), cutoff).unwrap();
        let v = make_state(StateSpec::Cat(c(0.6 + 0.4 * next(), 0.4 * next())), cutoff).unwrap();
        let (ca, cb) = (c(0.6, 0.1), c(0.3, -0.7));
        let norm = (ca.norm_sqr() + cb.norm_sqr()).sqrt();
        let (ca, cb) = (ca / norm, cb / norm);
        // |Psi> = ca |e>|u> + cb |g>|v>
        let outer = |x: &FockVector, y: &FockVector, w: C64| {
            CMatrix::from_shape_fn((cutoff + 1, cutoff + 1), |(i, j)| w * x.amps()[i] * y.amps()[j].conj())
        };
        JointDensity::from_blocks(
            outer(&u, &u, ca * ca.conj()),
            outer(&u, &v, ca * cb.conj()),
            outer(&v, &u, cb * ca.conj()),
            outer(&v, &v, cb * cb.conj()),
        )
        .unwrap()
    }

    #[test]
    fn initial_state_blocks() {
        let vac = make_state(StateSpec::Vacuum, 8).unwrap();
        let rho = joint_initial(&vac, c(0.0, 0.0));
        for k in 0..4 {
            assert_eq!(rho.block(k)[[0, 0]], c(0.5, 0.0));
            assert_abs_diff_eq!(rho.block(k).iter().map(|z| z.norm()).sum::<f64>(), 0.5, epsilon = 1e-15);
        }
        let coh = make_state(StateSpec::Coherent(c(1.0, 0.0)), 32).unwrap();
        let rho = joint_initial(&coh, c(0.5, 0.3));
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(rho.block(EG).diag().sum().re, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(sigma_x_expectation(&rho), 1.0, epsilon = 1e-10);
        assert_eq!(sigma_x_expectation(&JointDensity::zeros(4)), 0.0);
    }

    #[test]
    fn rhs_properties() {
        let rho = random_joint(12, 7);
        let zero = lindblad_rhs(&rho, 0.0, 0.0);
        assert_eq!(zero.max_abs_diff(&JointDensity::zeros(12)), 0.0);
        for (chi, gamma) in [(1.0, 0.3), (0.4, 2.0)] {
            let d = lindblad_rhs(&rho, chi, gamma);
            assert!(d.trace().norm() < 1e-12);
        }

        // single photon in the ee block decays at rate 2 gamma
        let mut one = JointDensity::zeros(4);
        one.block_mut(EE)[[1, 1]] = c(1.0, 0.0);
        for chi in [0.0, 1.3] {
            let d = lindblad_rhs(&one, chi, 1.0);
            assert_abs_diff_eq!(d.block(EE)[[1, 1]].re, -2.0, epsilon = 1e-15);
            assert_abs_diff_eq!(d.block(EE)[[0, 0]].re, 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn rk4_zero_time_and_guard() {
        let rho = random_joint(12, 3);
        let out = integrate_rk4(&rho, 1.0, 0.2, 0.0, 1e-4).unwrap();
        assert_eq!(out, rho);
        let limit = 0.01 / 13.0;
        assert!(matches!(integrate_rk4(&rho, 1.0, 0.2, 1.0, 10.0 * limit), Err(QcavError::UnstableStep { .. })));
        assert!(integrate_rk4(&rho, 1.0, 0.2, 0.01, limit).is_ok());
    }

    #[test]
    fn rk4_lossless_phases() {
        let rho0 = random_joint(12, 11);
        let (chi, t) = (0.7, 1.3);
        let out = integrate_rk4(&rho0, chi, 0.0, t, 1e-4).unwrap();
        let mut worst = 0.0_f64;
        for (k, &(si, sj)) in BLOCK_SIGNS.iter().enumerate() {
            for ((n, m), r0) in rho0.block(k).indexed_iter() {
                let phase = C64::from_polar(1.0, -chi * (si * n as f64 - sj * m as f64) * t);
                worst = worst.max((out.block(k)[[n, m]] - r0 * phase).norm());
            }
        }
        assert!(worst < 1e-8, "{worst:e}");
        // photon number is conserved by the dispersive Hamiltonian
        let mean =
            |r: &JointDensity| r.field_density().diagonal().iter().enumerate().map(|(n, p)| n as f64 * p).sum::<f64>();
        assert_abs_diff_eq!(mean(&out), mean(&rho0), epsilon = 1e-10);
    }

    #[test]
    fn rk4_photon_mean_decays() {
        let coh = make_state(StateSpec::Coherent(c(1.0, 0.0)), 24).unwrap();
        let rho0 = joint_initial(&coh, c(0.0, 0.0));
        let gamma = 0.3;
        let t = 2.0;
        let out = integrate_rk4(&rho0, 0.0, gamma, t, 1e-4).unwrap();
        let mean: f64 = out.field_density().diagonal().iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert_abs_diff_eq!(mean, (-2.0 * gamma * t).exp(), epsilon = 1e-7);
        assert!((out.trace().re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rk4_preserves_block_structure() {
        let psi = make_state(StateSpec::Cat(c(1.2, 0.3)), 16).unwrap();
        let f = psi.density();
        let z = CMatrix::zeros((17, 17));
        let rho0 =
            JointDensity::from_blocks(f.matrix() * C64::new(0.5, 0.0), z.clone(), z, f.matrix() * C64::new(0.5, 0.0))
                .unwrap();
        let out = integrate_rk4(&rho0, 1.0, 0.4, 1.5, 1e-4).unwrap();
        assert!(max_abs(out.block(EG)) < 1e-12);
        assert!(max_abs(out.block(GE)) < 1e-12);
        assert!(out.hermiticity_error() < 1e-9);
    }

    #[test]
    fn superop_identity_at_zero_time() {
        let rho = random_joint(12, 5);
        let out = superop_evolve(&rho, 1.0, 0.3, 0.0).unwrap();
        assert!(out.max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn superop_lossless_is_pure_phase() {
        let rho0 = random_joint(12, 9);
        let (chi, t) = (1.1, 0.9);
        let out = superop_evolve(&rho0, chi, 0.0, t).unwrap();
        for (k, &(si, sj)) in BLOCK_SIGNS.iter().enumerate() {
            for ((n, m), r0) in rho0.block(k).indexed_iter() {
                let phase = C64::from_polar(1.0, -chi * (si * n as f64 - sj * m as f64) * t);
                assert!((out.block(k)[[n, m]] - r0 * phase).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn superop_matches_rk4() {
        let rho0 = random_joint(16, 21);
        for (chi, gamma, t) in [(1.0, 0.2, 0.8), (1.0, 1.5, 1.2), (0.5, 0.0, 2.0), (1.0, 1e-13, 0.7)] {
            let a = superop_evolve(&rho0, chi, gamma, t).unwrap();
            let b = integrate_rk4(&rho0, chi, gamma, t, 1e-4).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-9, "chi={chi} gamma={gamma}: {:e}", a.max_abs_diff(&b));
        }
    }

    #[test]
    fn superop_series_guard() {
        // population on the cutoff cannot be carried by a truncated jump series
        let mut rho = JointDensity::zeros(3);
        rho.block_mut(EE)[[3, 3]] = c(1.0, 0.0);
        assert!(matches!(superop_evolve(&rho, 1.0, 1.0, 2.0), Err(QcavError::SeriesNotConverged { .. })));
        assert!(superop_evolve(&rho, 1.0, 0.0, 2.0).is_ok());
    }

    #[test]
    fn series_helper_is_continuous() {
        for x in [c(1e-3, 0.0), c(0.0, 9.99e-4), c(-7e-4, 7e-4)] {
            let direct = (1.0 - (-x).exp()) / x;
            assert!((one_minus_exp_over(x) - direct).norm() < 1e-12);
        }
        assert_eq!(one_minus_exp_over(c(0.0, 0.0)), c(1.0, 0.0));
    }

    #[test]
    fn validity_ratio() {
        let p = FullParams::from_detuning(100.0, 1.0).unwrap();
        assert_abs_diff_eq!(dispersive_validity(&p, 0).unwrap(), 100.0, epsilon = 1e-14);
        let p = FullParams::from_detuning(10.0, 1.0).unwrap();
        assert_abs_diff_eq!(dispersive_validity(&p, 3).unwrap(), 5.0, epsilon = 1e-14);
        let r8 = dispersive_validity(&p, 8).unwrap();
        let r3 = dispersive_validity(&p, 3).unwrap();
        assert_abs_diff_eq!(r8 / r3, (4.0f64 / 9.0).sqrt(), epsilon = 1e-14);
        let none = FullParams::from_detuning(10.0, 0.0).unwrap();
        assert_eq!(dispersive_validity(&none, 0), Err(QcavError::NoCoupling));
        assert!(FullParams::new(5.0, 5.0, 1.0).is_err());
        let p = FullParams::new(1000.0, 1050.0, 2.0).unwrap();
        assert_eq!(p.delta, 50.0);
        assert_abs_diff_eq!(p.chi, 4.0 / 50.0, epsilon = 1e-15);
    }

    #[test]
    fn full_jc_uncoupled_limit() {
        let rho0 = random_joint(12, 2);
        let params = FullParams::from_detuning(3.0, 0.0).unwrap();
        let t = 1.1;
        let out = full_jc_evolve(&rho0, &params, 0.0, t, 1e-3).unwrap();
        for (k, &(si, sj)) in BLOCK_SIGNS.iter().enumerate() {
            let phase = C64::from_polar(1.0, -0.5 * params.delta * (si - sj) * t);
            for ((n, m), r0) in rho0.block(k).indexed_iter() {
                assert!((out.block(k)[[n, m]] - r0 * phase).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn full_jc_conserves_trace_and_hermiticity() {
        let coh = make_state(StateSpec::Coherent(c(1.0, 0.0)), 20).unwrap();
        let rho0 = joint_initial(&coh, c(0.0, 0.0));
        let params = FullParams::from_detuning(10.0, 1.0).unwrap();
        let mut worst = (0.0_f64, 0.0_f64);
        let gen = FullJaynesCummings::new(params, 0.1, 20);
        evolve_rk4(&gen, &rho0, 5.0, 1e-3, |_, r| {
            worst.0 = worst.0.max((r.trace().re - 1.0).abs());
            worst.1 = worst.1.max(r.hermiticity_error());
        })
        .unwrap();
        assert!(worst.0 < 1e-8 && worst.1 < 1e-9, "{worst:?}");
    }
}
