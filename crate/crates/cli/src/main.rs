mod logger;
mod output;

use std::f64::consts::PI;
use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcav_core::closed::{critical_residual, displaced_field, measure_sigma_x, sigma_x_closed, MAGIC_TAU};
use qcav_core::fock::parse_complex;
use qcav_core::oracle::{
    evolve_rk4, joint_initial, sigma_x_expectation, superop_evolve, DispersiveLindblad, Generator,
};
use qcav_core::quasiprob::{q_direct, sample_grid};
use qcav_core::validate::{run_all, SuiteOptions};
use qcav_core::{critical_eta, make_state, mu_curve, Axis, FieldState, GridSpec, QcavError, StateSpec, C64};

use output::{format_f64, pgm, write_atomic, Csv};

#[derive(Parser)]
#[command(name = "qcav", version, about = "Dipole-signal dynamics and direct Q-function measurement of a cavity field")]
struct Cli {
    /// Log progress to stderr
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the damping ratio at which the decay factor vanishes at tau = 3pi/4
    Root,
    /// Tabulate mu and theta against tau
    MuCurve(MuCurveArgs),
    /// Dipole expectation for one phase-space point
    Sigmax(SigmaxArgs),
    /// Q function over a square grid
    Qmap(QmapArgs),
    /// Run every cross-check and report pass/fail
    Validate(ValidateArgs),
}

#[derive(Args)]
struct MuCurveArgs {
    #[arg(long, allow_negative_numbers = true)]
    eta: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 3.0 * PI)]
    tau_max: f64,
    #[arg(long, default_value_t = 3001)]
    steps: usize,
    /// CSV destination; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SigmaMethod {
    Closed,
    Superop,
    Lindblad,
    All,
}

#[derive(Args)]
struct SigmaxArgs {
    #[arg(long, allow_hyphen_values = true)]
    state: StateSpec,
    /// `<re>,<im>`
    #[arg(long, allow_hyphen_values = true, default_value = "0,0")]
    alpha: String,
    #[arg(long, allow_negative_numbers = true)]
    tau: f64,
    #[arg(long, allow_negative_numbers = true)]
    eta: f64,
    #[arg(long, value_enum, default_value_t = SigmaMethod::Closed)]
    method: SigmaMethod,
    #[arg(long, default_value_t = 32)]
    cutoff: usize,
    /// RK4 step in units of 1/chi (required for `lindblad`)
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QMethod {
    Reconstructed,
    Direct,
    Both,
}

#[derive(Args)]
struct QmapArgs {
    #[arg(long, allow_hyphen_values = true)]
    state: StateSpec,
    /// `<min>:<max>:<steps>`, applied to both axes
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    #[arg(long, default_value_t = 32)]
    cutoff: usize,
    #[arg(long, value_enum, default_value_t = QMethod::Both)]
    method: QMethod,
    #[arg(long)]
    out: PathBuf,
    /// PGM heatmap of the first Q column
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    eta_override: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tau_override: Option<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 32)]
    cutoff: usize,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-4)]
    dt: f64,
}

/// Exit status and message.
struct Failure {
    code: u8,
    message: String,
}

fn usage(flag: &str, msg: impl Display) -> Failure {
    Failure { code: 2, message: format!("{flag}: {msg}") }
}

fn runtime(err: QcavError) -> Failure {
    Failure { code: 1, message: err.to_string() }
}

type Outcome = Result<u8, Failure>;

fn nonneg(flag: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(usage(flag, format!("must be finite and >= 0 (got {v})")))
    }
}

fn check_cutoff(cutoff: usize) -> Result<usize, Failure> {
    if cutoff < 8 {
        return Err(usage("--cutoff", format!("must be >= 8 (got {cutoff})")));
    }
    Ok(cutoff)
}

fn emit(out: Option<&PathBuf>, flag: &str, contents: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            write_atomic(path, contents).map_err(|e| usage(flag, format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn cmd_root() -> Outcome {
    let eta = critical_eta();
    println!("critical_eta {eta:.12}");
    println!("residual {:e}", critical_residual(eta).abs());
    Ok(0)
}

fn cmd_mu_curve(args: &MuCurveArgs) -> Outcome {
    let eta = nonneg("--eta", args.eta)?;
    let tau_max = nonneg("--tau-max", args.tau_max)?;
    if args.steps < 2 {
        return Err(usage("--steps", format!("must be >= 2 (got {})", args.steps)));
    }
    let samples = mu_curve(eta, tau_max, args.steps).map_err(runtime)?;
    let mut csv = Csv::new(&["tau", "mu", "theta"]);
    for s in &samples {
        csv.row(&[s.tau, s.mu, s.theta]);
    }
    emit(args.out.as_ref(), "--out", &csv.into_string())?;
    Ok(0)
}

fn cmd_sigmax(args: &SigmaxArgs) -> Outcome {
    let cutoff = check_cutoff(args.cutoff)?;
    let tau = nonneg("--tau", args.tau)?;
    let eta = nonneg("--eta", args.eta)?;
    let alpha = parse_complex(&args.alpha)
        .ok_or_else(|| usage("--alpha", format!("expected <re>,<im>, got '{}'", args.alpha)))?;
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(usage("--alpha", "must be finite"));
    }
    let needs_rk4 = matches!(args.method, SigmaMethod::Lindblad | SigmaMethod::All);
    let dt = match (args.dt, args.method) {
        (Some(dt), _) => Some(dt),
        (None, SigmaMethod::Lindblad) => return Err(usage("--dt", "required for --method lindblad")),
        (None, SigmaMethod::All) => Some(1e-4),
        (None, _) => None,
    };
    let gen = DispersiveLindblad::new(1.0, eta, cutoff);
    if let (true, Some(dt)) = (needs_rk4, dt) {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(usage("--dt", format!("must be > 0 (got {dt})")));
        }
        if dt > gen.max_dt() * (1.0 + 1e-12) {
            return Err(usage("--dt", format!("{dt} exceeds the stability limit {:e}", gen.max_dt())));
        }
    }
    let psi = make_state(args.state, cutoff).map_err(|e| usage("--state", e))?;

    let mut values: Vec<(&str, f64)> = Vec::new();
    if matches!(args.method, SigmaMethod::Closed | SigmaMethod::All) {
        let field = displaced_field(&FieldState::Pure(psi.clone()), alpha);
        values.push(("closed", sigma_x_closed(&field, tau, eta)));
    }
    let rho0 = joint_initial(&psi, alpha);
    if matches!(args.method, SigmaMethod::Superop | SigmaMethod::All) {
        let rho = superop_evolve(&rho0, 1.0, eta, tau).map_err(runtime)?;
        values.push(("superop", sigma_x_expectation(&rho)));
    }
    if let (true, Some(dt)) = (needs_rk4, dt) {
        let rho = evolve_rk4(&gen, &rho0, tau, dt, |_, _| {}).map_err(runtime)?;
        values.push(("lindblad", sigma_x_expectation(&rho)));
    }
    for (name, v) in &values {
        println!("{name} {}", format_f64(*v));
    }
    if args.method == SigmaMethod::All {
        let mut dev = 0.0_f64;
        for (i, a) in values.iter().enumerate() {
            for b in &values[i + 1..] {
                dev = dev.max((a.1 - b.1).abs());
            }
        }
        println!("max_pairwise_deviation {}", format_f64(dev));
    }
    Ok(0)
}

fn cmd_qmap(args: &QmapArgs) -> Outcome {
    let cutoff = check_cutoff(args.cutoff)?;
    let axis: Axis = args.grid.parse().map_err(|e| usage("--grid", e))?;
    let eta = nonneg("--eta-override", args.eta_override.unwrap_or_else(critical_eta))?;
    let tau = nonneg("--tau-override", args.tau_override.unwrap_or(MAGIC_TAU))?;
    let spec = GridSpec::square(axis);
    let state = FieldState::Pure(make_state(args.state, cutoff).map_err(|e| usage("--state", e))?);
    let rho = state.density();
    log::info!("qmap {} on {}x{} at eta={eta}, tau={tau}", args.state, axis.steps, axis.steps);

    let reconstructed = match args.method {
        QMethod::Reconstructed | QMethod::Both => {
            Some(sample_grid(|a: C64| Ok(measure_sigma_x(&state, a, tau, eta) / PI), spec).map_err(runtime)?)
        }
        QMethod::Direct => None,
    };
    let direct = match args.method {
        QMethod::Direct | QMethod::Both => Some(sample_grid(|a: C64| Ok(q_direct(&rho, a)), spec).map_err(runtime)?),
        QMethod::Reconstructed => None,
    };

    let mut header = vec!["alpha_re", "alpha_im"];
    if reconstructed.is_some() {
        header.push("q_reconstructed");
    }
    if direct.is_some() {
        header.push("q_direct");
    }
    if reconstructed.is_some() && direct.is_some() {
        header.push("abs_error");
    }
    let mut csv = Csv::new(&header);
    let mut row = Vec::with_capacity(header.len());
    for i in 0..axis.steps {
        for j in 0..axis.steps {
            let a = spec.point(i, j);
            row.clear();
            row.extend([a.re, a.im]);
            let r = reconstructed.as_ref().map(|g| g.values[[i, j]]);
            let d = direct.as_ref().map(|g| g.values[[i, j]]);
            row.extend(r);
            row.extend(d);
            if let (Some(r), Some(d)) = (r, d) {
                row.push((r - d).abs());
            }
            csv.row(&row);
        }
    }
    write_atomic(&args.out, &csv.into_string())
        .map_err(|e| usage("--out", format!("cannot write {}: {e}", args.out.display())))?;
    if let Some(path) = &args.heatmap {
        let first = reconstructed.as_ref().or(direct.as_ref()).expect("at least one method");
        write_atomic(path, &pgm(first))
            .map_err(|e| usage("--heatmap", format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(0)
}

fn cmd_validate(args: &ValidateArgs) -> Outcome {
    let opts = SuiteOptions { cutoff: check_cutoff(args.cutoff)?, dt: args.dt };
    opts.check().map_err(|e| match e {
        QcavError::UnstableStep { .. } => usage("--dt", e),
        QcavError::InvalidParameter { name: "dt", .. } => usage("--dt", e),
        other => usage("--cutoff", other),
    })?;
    let checks = run_all(&opts).map_err(runtime)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!("{c}");
    }
    println!("{} checks, {} failed", checks.len(), failed);
    Ok(if failed == 0 { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    logger::init(cli.verbose);
    let outcome = match &cli.command {
        Command::Root => cmd_root(),
        Command::MuCurve(a) => cmd_mu_curve(a),
        Command::Sigmax(a) => cmd_sigmax(a),
        Command::Qmap(a) => cmd_qmap(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("qcav: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
