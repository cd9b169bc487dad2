//! Cross-checks between the closed-form signal, the two density-matrix oracles
//! and the exact quasiprobabilities. Each check reports its worst measured
//! error against a fixed tolerance.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::closed::{
    critical_eta, critical_residual, displaced_field, measure_sigma_x, mu_curve, mu_formula, phase_factor,
    reconstruct_q_point, sigma_x_closed, sigma_x_double_sum, sigma_x_lossless, MAGIC_TAU, PARITY_TAU,
};
use crate::error::{QcavError, Result};
use crate::fock::{coherent_overlap, make_state, FieldState, FockVector, StateSpec, DEFAULT_CUTOFF};
use crate::oracle::{
    evolve_rk4, full_jc_sigma_x, joint_initial, sigma_x_expectation, superop_evolve, DispersiveLindblad,
    FullJaynesCummings, FullParams, Generator, JointDensity,
};
use crate::quasiprob::{q_direct, q_from_wigner_convolution, sample_grid, wigner_direct, Axis, GridSpec};

/// The value printed for the critical ratio, to six digits.
pub const PUBLISHED_CRITICAL_ETA: &str = "0.274457";

pub const TRIANGLE_TAUS: [f64; 5] = [0.1, 0.8, PI / 2.0, 2.0, MAGIC_TAU];

pub fn triangle_states() -> [StateSpec; 4] {
    [StateSpec::Vacuum, StateSpec::Coherent(C64::new(1.0, 0.0)), StateSpec::Fock(2), StateSpec::Cat(C64::new(1.5, 0.0))]
}

pub fn triangle_alphas() -> [C64; 2] {
    [C64::new(0.0, 0.0), C64::new(0.5, 0.3)]
}

pub fn triangle_etas() -> [f64; 3] {
    [0.0, 0.2, critical_eta()]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// worst measured error (or the tested quantity)
    pub error: f64,
    pub tolerance: f64,
    pub note: String,
}

impl Check {
    fn bounded(name: &'static str, error: f64, tolerance: f64, note: impl Into<String>) -> Self {
        Self { name, passed: error <= tolerance, error, tolerance, note: note.into() }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {:<24} error={:.3e} tol={:.0e}", self.name, self.error, self.tolerance)?;
        if !self.note.is_empty() {
            write!(f, "  {}", self.note)?;
        }
        Ok(())
    }
}

/// Worst trace drift and Hermiticity violation seen during integrator runs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Conservation {
    pub trace_drift: f64,
    pub hermiticity: f64,
}

impl Conservation {
    fn observe(&mut self, rho: &JointDensity) {
        self.trace_drift = self.trace_drift.max((rho.trace() - 1.0).norm());
        self.hermiticity = self.hermiticity.max(rho.hermiticity_error());
    }

    fn merge(self, other: Conservation) -> Conservation {
        Conservation {
            trace_drift: self.trace_drift.max(other.trace_drift),
            hermiticity: self.hermiticity.max(other.hermiticity),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteOptions {
    pub cutoff: usize,
    /// RK4 step in units of `1/chi`
    pub dt: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { cutoff: DEFAULT_CUTOFF, dt: 1e-4 }
    }
}

impl SuiteOptions {
    /// Largest `dt` the triangle's RK4 runs accept (`chi = 1`, largest `eta`).
    pub fn max_dt(&self) -> f64 {
        let eta_max = triangle_etas().into_iter().fold(0.0, f64::max);
        DispersiveLindblad::new(1.0, eta_max, self.cutoff).max_dt()
    }

    pub fn check(&self) -> Result<()> {
        if self.cutoff < 8 {
            return Err(QcavError::InvalidParameter { name: "cutoff", value: self.cutoff as f64 });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(QcavError::InvalidParameter { name: "dt", value: self.dt });
        }
        let max_dt = self.max_dt();
        if self.dt > max_dt * (1.0 + 1e-12) {
            return Err(QcavError::UnstableStep { dt: self.dt, max_dt });
        }
        Ok(())
    }
}

/// Critical ratio against its published six digits, plus the root residual.
pub fn critical_ratio() -> Check {
    let eta = critical_eta();
    let residual = critical_residual(eta).abs();
    let digits = format!("{eta:.6}");
    let published: f64 = PUBLISHED_CRITICAL_ETA.parse().expect("literal");
    let mut check = Check::bounded(
        "critical_ratio",
        (eta - published).abs(),
        5e-7,
        format!("eta*={eta:.12} residual={residual:.1e} published={PUBLISHED_CRITICAL_ETA}"),
    );
    check.passed = digits == PUBLISHED_CRITICAL_ETA && residual <= 1e-13;
    check
}

/// `mu` and `|z|` at `(3pi/4, eta*)`.
pub fn magic_point() -> Check {
    let eta = critical_eta();
    let mu = mu_formula(MAGIC_TAU, eta);
    let z = phase_factor(MAGIC_TAU, eta).z.norm();
    Check::bounded("magic_point_extinction", mu.max(z), 1e-13, format!("mu={mu:.1e} |z|={z:.1e}"))
}

/// The three decay-factor curves over `[0, 3pi]`.
pub fn mu_curve_shape() -> Result<Check> {
    let tau_max = 3.0 * PI;
    let steps = 3001;
    let step = tau_max / (steps - 1) as f64;

    let flat = mu_curve(0.0, tau_max, steps)?;
    let flat_err = flat.iter().map(|s| (s.mu - 1.0).abs()).fold(0.0, f64::max);

    let weak = mu_curve(0.025, tau_max, steps)?;
    let weak_min = weak.iter().map(|s| s.mu).fold(f64::INFINITY, f64::min);
    let window = PI / 4.0;
    let weak_dip = (1..steps - 1).any(|k| {
        (weak[k].tau - MAGIC_TAU).abs() <= window && weak[k].mu < weak[k - 1].mu && weak[k].mu <= weak[k + 1].mu
    });

    let crit = mu_curve(critical_eta(), tau_max, steps)?;
    let argmin = crit.iter().enumerate().min_by(|a, b| a.1.mu.total_cmp(&b.1.mu)).map(|(k, _)| k).expect("non-empty");
    let crit_offset = (crit[argmin].tau - MAGIC_TAU).abs();
    let crit_value = crit[argmin].mu;

    let passed = flat_err <= 1e-12 && weak_min > 0.0 && weak_dip && crit_offset <= step && crit_value <= 1e-9;
    Ok(Check {
        name: "mu_curve_shape",
        passed,
        error: flat_err.max(crit_value),
        tolerance: 1e-9,
        note: format!(
            "eta=0 dev={flat_err:.1e}; eta=0.025 min={weak_min:.3e} dip_near_3pi/4={weak_dip}; \
             eta* argmin offset={crit_offset:.2e} (step {step:.2e}) value={crit_value:.1e}"
        ),
    })
}

/// Closed-form signal for the initial field `D(alpha)|psi>`.
fn closed_signal(psi: &FockVector, alpha: C64, tau: f64, eta: f64) -> f64 {
    sigma_x_closed(&displaced_field(&FieldState::Pure(psi.clone()), alpha), tau, eta)
}

#[derive(Clone, Copy, Debug, Default)]
struct TriangleErrors {
    superop: f64,
    rk4: f64,
    conservation: Conservation,
}

fn triangle_run(psi: &FockVector, alpha: C64, eta: f64, dt: f64) -> Result<TriangleErrors> {
    let (chi, gamma) = (1.0, eta);
    let rho0 = joint_initial(psi, alpha);
    let gen = DispersiveLindblad::new(chi, gamma, psi.cutoff());
    let mut out = TriangleErrors::default();
    out.conservation.observe(&rho0);

    let mut rho = rho0.clone();
    let mut t = 0.0;
    for &tau in &TRIANGLE_TAUS {
        let closed = closed_signal(psi, alpha, tau, eta);
        let sup = superop_evolve(&rho0, chi, gamma, tau)?;
        out.conservation.observe(&sup);
        out.superop = out.superop.max((closed - sigma_x_expectation(&sup)).abs());

        let mut step = 0usize;
        let cons = &mut out.conservation;
        rho = evolve_rk4(&gen, &rho, tau - t, dt, |_, r| {
            step += 1;
            if step.is_multiple_of(256) {
                cons.observe(r);
            }
        })?;
        t = tau;
        out.conservation.observe(&rho);
        out.rk4 = out.rk4.max((closed - sigma_x_expectation(&rho)).abs());
    }
    Ok(out)
}

/// Closed form vs factored superoperator vs RK4 over the validation matrix.
/// Returns the superoperator check, the RK4 check and the conservation record.
pub fn oracle_triangle(opts: &SuiteOptions) -> Result<(Check, Check, Conservation)> {
    opts.check()?;
    let mut jobs = Vec::new();
    for spec in triangle_states() {
        let psi = make_state(spec, opts.cutoff)?;
        for alpha in triangle_alphas() {
            for eta in triangle_etas() {
                jobs.push((psi.clone(), alpha, eta));
            }
        }
    }
    let runs: Vec<TriangleErrors> =
        jobs.par_iter().map(|(psi, alpha, eta)| triangle_run(psi, *alpha, *eta, opts.dt)).collect::<Result<_>>()?;
    let worst = runs.iter().fold(TriangleErrors::default(), |a, b| TriangleErrors {
        superop: a.superop.max(b.superop),
        rk4: a.rk4.max(b.rk4),
        conservation: a.conservation.merge(b.conservation),
    });
    let note = format!("{} trajectories, dt={:e}", runs.len(), opts.dt);
    Ok((
        Check::bounded("oracle_triangle_superop", worst.superop, 1e-9, note.clone()),
        Check::bounded("oracle_triangle_rk4", worst.rk4, 1e-6, note),
        worst.conservation,
    ))
}

/// Unresummed double series against the closed form over the validation matrix.
pub fn resummation(cutoff: usize) -> Result<Check> {
    let mut worst = 0.0_f64;
    for spec in triangle_states() {
        let state = FieldState::Pure(make_state(spec, cutoff)?);
        for alpha in triangle_alphas() {
            let rho = displaced_field(&state, alpha);
            for eta in triangle_etas() {
                for tau in TRIANGLE_TAUS {
                    worst = worst.max((sigma_x_double_sum(&rho, tau, eta) - sigma_x_closed(&rho, tau, eta)).abs());
                }
            }
        }
    }
    Ok(Check::bounded("resummation", worst, 1e-10, ""))
}

/// At `eta = 0` the closed form reduces to the lossless cosine sum.
pub fn eta0_reduction(cutoff: usize) -> Result<Check> {
    let mut worst = 0.0_f64;
    for spec in triangle_states() {
        let psi = make_state(spec, cutoff)?;
        for alpha in triangle_alphas() {
            for tau in TRIANGLE_TAUS {
                let closed = closed_signal(&psi, alpha, tau, 0.0);
                worst = worst.max((closed - sigma_x_lossless(&psi, alpha, tau)).abs());
            }
        }
    }
    Ok(Check::bounded("eta0_reduction", worst, 1e-12, ""))
}

fn cat15(cutoff: usize) -> Result<FieldState> {
    Ok(FieldState::Pure(make_state(StateSpec::Cat(C64::new(1.5, 0.0)), cutoff)?))
}

/// `pi Q` read out at the magic point vs `<alpha|rho|alpha>` for cat:1.5.
pub fn q_reconstruction(cutoff: usize) -> Result<Check> {
    let state = cat15(cutoff)?;
    let rho = state.density();
    let grid = GridSpec::square(Axis::new(-2.0, 2.0, 21)?);
    let err = sample_grid(|a| Ok((PI * reconstruct_q_point(&state, a) - coherent_overlap(&rho, a)).abs()), grid)?;
    Ok(Check::bounded("q_reconstruction", err.max(), 1e-8, "cat:1.5, 21x21 on [-2,2]^2"))
}

/// Lossless signal at the parity time vs `(pi/2) W`.
pub fn lossless_wigner(cutoff: usize) -> Result<Check> {
    let grid = GridSpec::square(Axis::new(-2.0, 2.0, 21)?);
    let mut worst = 0.0_f64;
    for spec in [StateSpec::Cat(C64::new(1.5, 0.0)), StateSpec::Coherent(C64::new(1.0, 0.0)), StateSpec::Fock(2)] {
        let state = FieldState::Pure(make_state(spec, cutoff)?);
        let rho = state.density();
        let err = sample_grid(
            |a| Ok((measure_sigma_x(&state, a, PARITY_TAU, 0.0) - PI / 2.0 * wigner_direct(&rho, a)).abs()),
            grid,
        )?;
        worst = worst.max(err.max());
    }
    Ok(Check::bounded("lossless_wigner", worst, 1e-9, "cat:1.5, coherent:1, fock:2 on 21x21"))
}

/// Gaussian smoothing of a sampled Wigner grid vs the exact Q function.
pub fn wigner_q_convolution(cutoff: usize) -> Result<Check> {
    let wgrid = GridSpec::square(Axis::new(-5.0, 5.0, 201)?);
    let probes = GridSpec::square(Axis::new(-2.0, 2.0, 9)?);
    let mut worst = 0.0_f64;
    for spec in [StateSpec::Vacuum, StateSpec::Cat(C64::new(1.5, 0.0))] {
        let rho = make_state(spec, cutoff)?.density();
        let w = sample_grid(|a| Ok(wigner_direct(&rho, a)), wgrid)?;
        let err = sample_grid(|a| Ok((q_from_wigner_convolution(&w, a)? - q_direct(&rho, a)).abs()), probes)?;
        worst = worst.max(err.max());
    }
    Ok(Check::bounded("wigner_q_convolution", worst, 2e-3, "W on [-5,5]^2 at 0.05; Q at 9x9 in [-2,2]^2"))
}

pub const PROBE_CUTOFF: usize = 16;
pub const PROBE_DT: f64 = 1e-3;

/// Max `<sigma_x>` deviation between the full Jaynes-Cummings evolution and the
/// dispersive closed form over `t ∈ [0, 3pi/(4 chi)]`, coherent:1 field,
/// `lambda = 1`, `gamma = 0`.
pub fn dispersive_deviation(ratio: f64) -> Result<(f64, Conservation)> {
    let params = FullParams::from_detuning(ratio, 1.0)?;
    let psi = make_state(StateSpec::Coherent(C64::new(1.0, 0.0)), PROBE_CUTOFF)?;
    let field = psi.density();
    let rho0 = joint_initial(&psi, C64::new(0.0, 0.0));
    let gen = FullJaynesCummings::new(params, 0.0, PROBE_CUTOFF);
    let t_end = MAGIC_TAU / params.chi;
    let mut worst = 0.0_f64;
    let mut cons = Conservation::default();
    let mut step = 0usize;
    cons.observe(&rho0);
    let last = evolve_rk4(&gen, &rho0, t_end, PROBE_DT, |t, r| {
        let dispersive = sigma_x_closed(&field, params.chi * t, 0.0);
        worst = worst.max((full_jc_sigma_x(r, &params, t) - dispersive).abs());
        step += 1;
        if step.is_multiple_of(256) {
            cons.observe(r);
        }
    })?;
    cons.observe(&last);
    Ok((worst, cons))
}

/// The full-coupling deviation must shrink as the detuning grows.
pub fn dispersive_probe() -> Result<(Check, Conservation)> {
    let (near, c1) = dispersive_deviation(10.0)?;
    let (far, c2) = dispersive_deviation(50.0)?;
    let check = Check {
        name: "dispersive_probe",
        passed: far < near,
        error: far,
        tolerance: near,
        note: format!("max dev at delta/lambda=50: {far:.3e}, at 10: {near:.3e}"),
    };
    Ok((check, c1.merge(c2)))
}

pub fn conservation(record: Conservation) -> Check {
    let mut check = Check::bounded(
        "conservation",
        record.trace_drift,
        1e-8,
        format!("trace drift={:.1e} hermiticity={:.1e}", record.trace_drift, record.hermiticity),
    );
    check.passed &= record.hermiticity <= 1e-9;
    check
}

/// Every check, in report order. `opts` is validated before anything runs.
pub fn run_all(opts: &SuiteOptions) -> Result<Vec<Check>> {
    opts.check()?;
    let mut checks = vec![critical_ratio(), magic_point(), mu_curve_shape()?];
    let (sup, rk4, triangle_cons) = oracle_triangle(opts)?;
    checks.push(sup);
    checks.push(rk4);
    checks.push(resummation(opts.cutoff)?);
    checks.push(eta0_reduction(opts.cutoff)?);
    checks.push(q_reconstruction(opts.cutoff)?);
    checks.push(lossless_wigner(opts.cutoff)?);
    checks.push(wigner_q_convolution(opts.cutoff)?);
    let (probe, probe_cons) = dispersive_probe()?;
    checks.push(probe);
    checks.push(conservation(triangle_cons.merge(probe_cons)));
    Ok(checks)
}
