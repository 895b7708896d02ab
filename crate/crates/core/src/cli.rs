//! Command implementations behind the `crflow` binary.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::bubble::bubble;
use crate::constants::{constant, ConstantEstimate, ConstantName, MAX_LEVEL};
use crate::flow::{point_report, BetaThreshold, Flow, PointReport, Record, Termination};
use crate::geometry::{SpherePoint, C64};
use crate::morse::{sbc_check, theorem_gate, GateReport, MorseData};
use crate::normalization::unit_or_self;
use crate::scenario::ScenarioConfig;
use crate::selftest::{run_selftest, SelfTestOptions};
use crate::spectral::Basis;

pub const EXIT_CONFIG: i32 = 64;

/// Column names of `trajectory.csv` for dimension n.
pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut cols: Vec<String> = [
        "t",
        "E",
        "E_f",
        "alpha",
        "F2",
        "G2",
        "kw_residual",
        "abs_P",
        "eps",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for j in 1..=n + 1 {
        cols.push(format!("theta_{j}_re"));
        cols.push(format!("theta_{j}_im"));
    }
    cols.push("max_u".into());
    cols.push("mass_concentration".into());
    cols
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_row(n: usize, r: &Record) -> Vec<String> {
    let d = &r.diagnostics;
    let abs_p = d.p.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut row = vec![
        num(r.t),
        num(d.e),
        num(d.e_f),
        num(d.alpha),
        num(d.f2),
        num(d.g2),
        num(d.kw_residual),
        num(abs_p),
        num(d.centering.as_ref().map_or(f64::NAN, |c| c.eps)),
    ];
    for j in 0..=n {
        let th = d
            .centering
            .as_ref()
            .map(|c| c.theta[j])
            .unwrap_or(C64::new(f64::NAN, f64::NAN));
        row.push(num(th.re));
        row.push(num(th.im));
    }
    row.push(num(d.max_u));
    row.push(num(d.mass_concentration));
    row
}

#[derive(Serialize)]
struct FinalState {
    t: f64,
    e: f64,
    e_f: f64,
    alpha: f64,
    f2: f64,
    g2: f64,
    kw_residual: f64,
    max_u: f64,
    min_u: f64,
    mass_concentration: f64,
}

#[derive(Serialize)]
struct ShadowSummary {
    eps: f64,
    theta: Vec<C64>,
    theta_hat: Vec<C64>,
    centering_converged: bool,
    f_at_shadow: PointReport,
}

#[derive(Serialize)]
struct RunSummary {
    status: Termination,
    exit_code: i32,
    n: usize,
    degree: usize,
    basis_dimension: usize,
    nodes: usize,
    accepted_steps: usize,
    rejected_steps: usize,
    max_energy_increase: f64,
    failure: Option<String>,
    final_state: FinalState,
    shadow: Option<ShadowSummary>,
    beta: BetaThreshold,
    sbc: bool,
    morse: Option<GateReport>,
}

/// `run <config>`: integrates the scenario and writes trajectory.csv and summary.json to
/// `out_dir`. Nothing is written when the configuration is rejected.
pub fn cmd_run(
    config: &Path,
    out_dir: &Path,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let text = match std::fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(stderr, "{}: {e}", config.display());
            return EXIT_CONFIG;
        }
    };
    let cfg = match ScenarioConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "{}: {e}", config.display());
            return EXIT_CONFIG;
        }
    };
    let scenario = match cfg.prepare() {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(stderr, "{}: {e}", config.display());
            return EXIT_CONFIG;
        }
    };
    let flow = match Flow::new(scenario.f.clone(), scenario.options.clone()) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(stderr, "{}: {e}", config.display());
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = flow.initial_state(&scenario.u0) {
        let _ = writeln!(stderr, "{}: {e}", config.display());
        return EXIT_CONFIG;
    }
    let n = cfg.n;
    let mut csv = trajectory_header(n).join(",");
    csv.push('\n');
    let run = flow.run(&scenario.u0, |r| {
        csv.push_str(&trajectory_row(n, r).join(","));
        csv.push('\n');
    });
    let run = match run {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "flow failed: {e}");
            return Termination::StepFailure.exit_code();
        }
    };
    let last = run.records.last().expect("at least the initial record");
    let d = &last.diagnostics;
    let shadow = d.centering.as_ref().map(|c| {
        let x = SpherePoint::normalized(c.theta_hat.clone())
            .map(|p| p.x)
            .unwrap_or_else(|_| unit_or_self(&c.theta_hat));
        ShadowSummary {
            eps: c.eps,
            theta: c.theta.clone(),
            theta_hat: c.theta_hat.clone(),
            centering_converged: c.converged,
            f_at_shadow: run
                .shadow_report
                .clone()
                .unwrap_or_else(|| point_report(flow.f(), &x)),
        }
    });
    let beta = flow.beta().expect("f is positive");
    let summary = RunSummary {
        status: run.status,
        exit_code: run.status.exit_code(),
        n,
        degree: cfg.degree,
        basis_dimension: scenario.basis.dim(),
        nodes: scenario.basis.node_count(),
        accepted_steps: run.accepted_steps,
        rejected_steps: run.rejected_steps,
        max_energy_increase: run.max_energy_increase,
        failure: run.failure.as_ref().map(|e| e.to_string()),
        final_state: FinalState {
            t: last.t,
            e: d.e,
            e_f: d.e_f,
            alpha: d.alpha,
            f2: d.f2,
            g2: d.g2,
            kw_residual: d.kw_residual,
            max_u: d.max_u,
            min_u: d.min_u,
            mass_concentration: d.mass_concentration,
        },
        shadow,
        sbc: sbc_check(flow.f().max(), flow.f().min(), n).unwrap_or(false),
        beta,
        morse: cfg.morse.as_ref().and_then(|m| theorem_gate(m).ok()),
    };
    let write = || -> std::io::Result<()> {
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(out_dir.join("trajectory.csv"), &csv)?;
        let json = serde_json::to_string_pretty(&summary).map_err(std::io::Error::other)?;
        std::fs::write(out_dir.join("summary.json"), json + "\n")
    };
    if let Err(e) = write() {
        let _ = writeln!(stderr, "cannot write output to {}: {e}", out_dir.display());
        return Termination::StepFailure.exit_code();
    }
    let _ = writeln!(
        stdout,
        "status {:?} after {} steps (t = {:.6}), E_f = {:.12}, F2 = {:.3e}",
        run.status, run.accepted_steps, last.t, d.e_f, d.f2
    );
    if let Some(e) = &run.failure {
        let _ = writeln!(stdout, "step failure: {e}");
    }
    run.status.exit_code()
}

pub fn format_constants_table(rows: &[ConstantEstimate]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<4} {:>2} {:>24} {:>12} {:>8}",
        "name", "n", "value", "abs_error", "positive"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<4} {:>2} {:>24.16e} {:>12.3e} {:>8}",
            r.name.to_string(),
            r.n,
            r.value,
            r.abs_error_estimate,
            r.positive()
        );
    }
    s
}

/// `constants --n <n> --refine <k>`: six-row table on stdout, JSON to `json` if given.
pub fn cmd_constants(
    n: usize,
    refine: usize,
    json: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    if !(1..=4).contains(&n) {
        let _ = writeln!(stderr, "--n must lie in 1..=4, got {n}");
        return EXIT_CONFIG;
    }
    if refine > MAX_LEVEL {
        let _ = writeln!(stderr, "--refine must be at most {MAX_LEVEL}");
        return EXIT_CONFIG;
    }
    let mut rows = Vec::new();
    let mut failure = None;
    for name in ConstantName::ALL {
        match constant(name, n, refine) {
            Ok(r) => rows.push(r),
            Err(e) => {
                failure = Some(format!("{name}: {e}"));
                break;
            }
        }
    }
    let _ = write!(stdout, "{}", format_constants_table(&rows));
    if let Some(path) = json {
        let text = serde_json::to_string_pretty(&rows).expect("plain data");
        if let Err(e) = std::fs::write(path, text + "\n") {
            let _ = writeln!(stderr, "cannot write {}: {e}", path.display());
            return 1;
        }
    }
    match failure {
        Some(msg) => {
            let _ = writeln!(stderr, "{msg}");
            1
        }
        None => 0,
    }
}

/// `morse <file>`: exit 0 when the hypotheses hold, 1 when not, 64 on invalid data.
pub fn cmd_morse(path: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(stderr, "{}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let data: MorseData = match serde_json::from_str(&text) {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(
                stderr,
                "{}: line {}, column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            );
            return EXIT_CONFIG;
        }
    };
    match theorem_gate(&data) {
        Ok(report) => {
            let _ = writeln!(stdout, "{report}");
            if report.hypotheses_satisfied {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}: {e}", path.display());
            EXIT_CONFIG
        }
    }
}

/// Parses "re,im;re,im;..." or a flat list "re,im,re,im,..." into complex coordinates.
pub fn parse_point(s: &str) -> Result<Vec<C64>, String> {
    let nums: Vec<f64> = s
        .split([',', ';', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad number {t:?}: {e}"))
        })
        .collect::<Result<_, _>>()?;
    if nums.len() < 4 || nums.len() % 2 != 0 {
        return Err("point needs an even number (at least 4) of real coordinates".into());
    }
    Ok(nums.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
}

/// `bubble --p <coords> --eps <e>`: node coordinates, exact and projected bubble values.
pub fn cmd_bubble(
    p: &str,
    eps: f64,
    degree: usize,
    tolerance: f64,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let coords = match parse_point(p) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "--p: {e}");
            return EXIT_CONFIG;
        }
    };
    let n = coords.len() - 1;
    let point = match SpherePoint::normalized(coords) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "--p: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = Basis::build(n, degree).and_then(|b| bubble(&point, eps, Arc::new(b), tolerance));
    let pb = match result {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            return 1;
        }
    };
    let basis = pb.field.basis();
    let mut csv = String::new();
    for j in 1..=n + 1 {
        let _ = write!(csv, "x_{j}_re,x_{j}_im,");
    }
    csv.push_str("weight,u_exact,u_projected\n");
    for k in 0..basis.node_count() {
        for c in basis.node(k) {
            let _ = write!(csv, "{},{},", num(c.re), num(c.im));
        }
        let _ = writeln!(
            csv,
            "{},{},{}",
            num(basis.weights[k]),
            num(pb.exact.values()[k]),
            num(pb.field.values()[k])
        );
    }
    let _ = writeln!(stderr, "projection residual {:.3e}", pb.residual);
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, csv) {
                let _ = writeln!(stderr, "cannot write {}: {e}", path.display());
                return 1;
            }
        }
        None => {
            let _ = stdout.write_all(csv.as_bytes());
        }
    }
    0
}

pub fn cmd_selftest(opts: &SelfTestOptions, stdout: &mut dyn Write) -> i32 {
    let results = run_selftest(opts);
    let mut failed = Vec::new();
    for r in &results {
        let _ = writeln!(
            stdout,
            "{:<5} {:<22} {:>7.2}s  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        );
        if !r.passed {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        let _ = writeln!(stdout, "selftest passed ({} checks)", results.len());
        0
    } else {
        let _ = writeln!(stdout, "selftest failed: {}", failed.join(", "));
        1
    }
}

/// Caps the rayon pool at FLOW_THREADS when the variable is set.
pub fn configure_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("FLOW_THREADS") {
        let threads: usize = v
            .trim()
            .parse()
            .map_err(|_| format!("FLOW_THREADS must be a positive integer, got {v:?}"))?;
        if threads == 0 {
            return Err("FLOW_THREADS must be positive".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}
