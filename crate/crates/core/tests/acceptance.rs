//! Acceptance criteria. Prints one line per criterion and exits non-zero if
//! any of them fails; every criterion runs regardless.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use qcav_core::validate::{self, Check, Conservation, SuiteOptions};
use qcav_core::Result;

struct Line {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn line_from(id: u32, check: &Check, elapsed: Duration, budget: Duration) -> Line {
    Line {
        id,
        name: check.name,
        passed: check.passed,
        detail: format!("error={:.3e} tol={:.0e} {}", check.error, check.tolerance, check.note),
        elapsed,
        budget,
    }
}

fn run(id: u32, name: &'static str, budget: Duration, f: impl FnOnce() -> Result<Check>) -> Line {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    match result {
        Ok(check) => line_from(id, &check, elapsed, budget),
        Err(e) => Line { id, name, passed: false, detail: format!("error: {e}"), elapsed, budget },
    }
}

fn print(line: &Line) {
    let status = if line.passed { "PASS" } else { "FAIL" };
    println!(
        "criterion {:>2} {status} {:<24} {} [{:.2}s, budget {}s]",
        line.id,
        line.name,
        line.detail,
        line.elapsed.as_secs_f64(),
        line.budget.as_secs()
    );
}

fn main() -> ExitCode {
    let opts = SuiteOptions::default();
    let secs = Duration::from_secs;
    let mut lines = Vec::new();
    let mut conservation = Conservation::default();

    lines.push(run(1, "critical_ratio", secs(1), || Ok(validate::critical_ratio())));
    print(lines.last().unwrap());
    lines.push(run(2, "magic_point_extinction", secs(1), || Ok(validate::magic_point())));
    print(lines.last().unwrap());
    lines.push(run(3, "mu_curve_shape", secs(1), validate::mu_curve_shape));
    print(lines.last().unwrap());

    let start = Instant::now();
    let triangle = validate::oracle_triangle(&opts);
    let elapsed = start.elapsed();
    lines.push(match triangle {
        Ok((sup, rk4, cons)) => {
            conservation = cons;
            Line {
                id: 4,
                name: "oracle_triangle",
                passed: sup.passed && rk4.passed,
                detail: format!(
                    "superop error={:.3e} tol={:.0e}; rk4 error={:.3e} tol={:.0e}; {}",
                    sup.error, sup.tolerance, rk4.error, rk4.tolerance, rk4.note
                ),
                elapsed,
                budget: secs(120),
            }
        }
        Err(e) => Line {
            id: 4,
            name: "oracle_triangle",
            passed: false,
            detail: format!("error: {e}"),
            elapsed,
            budget: secs(120),
        },
    });
    print(lines.last().unwrap());

    lines.push(run(5, "resummation", secs(5), || validate::resummation(opts.cutoff)));
    print(lines.last().unwrap());
    lines.push(run(6, "q_reconstruction", secs(10), || validate::q_reconstruction(opts.cutoff)));
    print(lines.last().unwrap());
    lines.push(run(7, "lossless_wigner", secs(10), || validate::lossless_wigner(opts.cutoff)));
    print(lines.last().unwrap());
    lines.push(run(8, "wigner_q_convolution", secs(30), || validate::wigner_q_convolution(opts.cutoff)));
    print(lines.last().unwrap());
    lines.push(run(9, "dispersive_probe", secs(60), || {
        let (check, cons) = validate::dispersive_probe()?;
        conservation = Conservation {
            trace_drift: conservation.trace_drift.max(cons.trace_drift),
            hermiticity: conservation.hermiticity.max(cons.hermiticity),
        };
        Ok(check)
    }));
    print(lines.last().unwrap());
    lines.push(run(10, "conservation", secs(1), || Ok(validate::conservation(conservation))));
    print(lines.last().unwrap());

    let failed: Vec<u32> = lines.iter().filter(|l| !l.passed).map(|l| l.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", lines.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of {} criteria failed: {:?}", failed.len(), lines.len(), failed);
        ExitCode::FAILURE
    }
}
