//! `bearing-pose`: validate scenarios, run the observers, analyze the attitude
//! error equilibria and sweep random initial estimates.
//!
//! Every report is printed line by line and written as JSON to the output
//! directory. Exit status: 0 when every reported check passes, 2 when a check
//! fails, 1 on errors (unreadable or malformed config, bad arguments).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use bearing_pose::analysis::{
    analyze_equilibria, AnalysisError, EquilibriumKind, EscapeSettings, FollowerEquilibria,
    Isolation, EQUILIBRIUM_TOL,
};
use bearing_pose::network::{bearing_matrix, spectral_report, SpectralReport, TopologyViolation};
use bearing_pose::sim::{
    basin_sweep, builtin, export, run, ConfigError, Overrides, RunSummary, Scenario, ScenarioDoc,
    SweepDoc, SweepSummary,
};

/// Smallest converged fraction a sweep must reach.
const SWEEP_PASS_FRACTION: f64 = 0.99;

#[derive(Parser)]
#[command(name = "bearing-pose", version, about = "Distributed pose estimation from relative bearings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the topology conditions and report the per-follower spectra.
    Validate(Common),
    /// Simulate truth and observers; write the error time series and a summary.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Enumerate, linearize and perturb the attitude error equilibria.
    Equilibria(Common),
    /// Run many trials from uniformly random initial estimates.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        /// Defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file, or the name of a built-in scenario (`paper_sec5`).
    config: String,
    /// Directory for reports and artifacts; created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Integration step in seconds (for `sweep`: the sweep step).
    #[arg(long)]
    step: Option<f64>,
    /// Horizon in seconds (for `sweep`: the sweep horizon).
    #[arg(long)]
    horizon: Option<f64>,
    /// Attitude observer gain.
    #[arg(long)]
    k_r: Option<f64>,
    /// Position observer gain.
    #[arg(long)]
    k_p: Option<f64>,
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    command: &'static str,
    config: String,
    passed: bool,
    lines: Vec<String>,
    data: T,
}

/// Prints `lines`, writes the JSON report, and returns whether it passed.
fn emit<T: Serialize>(out: &Path, report: Report<T>) -> Result<bool> {
    for line in &report.lines {
        println!("{line}");
    }
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let path = out.join(format!("{}.json", report.command));
    let json = serde_json::to_string_pretty(&report)?;
    fs::write(&path, json + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    eprintln!("report: {}", path.display());
    Ok(report.passed)
}

/// A readable file wins over a built-in of the same name.
fn load_doc(config: &str) -> Result<ScenarioDoc> {
    let path = Path::new(config);
    let text = match builtin(config) {
        Some(text) if !path.exists() => text.to_owned(),
        _ => fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?,
    };
    Ok(ScenarioDoc::parse(&text)?)
}

fn overrides(c: &Common, seed: Option<u64>) -> Overrides {
    Overrides {
        step: c.step,
        horizon: c.horizon,
        seed,
        k_r: c.k_r,
        k_p: c.k_p,
        ..Overrides::default()
    }
}

fn load(c: &Common, seed: Option<u64>) -> Result<Scenario> {
    let mut doc = load_doc(&c.config)?;
    doc.apply(&overrides(c, seed));
    Ok(Scenario::from_doc(doc)?)
}

fn fmt3(v: &[f64; 3]) -> String {
    format!("[{:.6}, {:.6}, {:.6}]", v[0], v[1], v[2])
}

#[derive(Serialize)]
struct ValidateData {
    violation: Option<ViolationData>,
    spectra: Option<SpectralReport>,
}

#[derive(Serialize)]
struct ViolationData {
    clause: &'static str,
    message: String,
}

fn cmd_validate(c: &Common) -> Result<bool> {
    let mut doc = load_doc(&c.config)?;
    doc.apply(&overrides(c, None));
    let mut lines = Vec::new();
    let scenario = match Scenario::from_doc(doc) {
        Ok(s) => s,
        Err(ConfigError::Violation(v)) => {
            lines.push(format!("topology: FAIL ({}): {v}", v.clause()));
            return emit(&c.out, Report {
                command: "validate",
                config: c.config.clone(),
                passed: false,
                lines,
                data: ValidateData {
                    violation: Some(violation(&v)),
                    spectra: None,
                },
            });
        }
        Err(e) => return Err(e.into()),
    };
    let report = spectral_report(&scenario.topology, &scenario.positions, scenario.eigen_gap)?;
    lines.push(format!(
        "scenario {} ({} agents, {} followers), config sha256 {}",
        scenario.name,
        scenario.agent_count(),
        report.followers.len(),
        scenario.config_hash()
    ));
    lines.push("topology: pass (acyclic, leaders 1 and 2, earlier neighbors ≥ 2, leaders reach every follower, no collocated or collinear neighbor sets)".into());
    for f in &report.followers {
        lines.push(format!(
            "agent {}: M eigenvalues {} ({}), Q eigenvalues {}, λmin(Q) = {:.6}, λmin(ΣP) = {:.6}",
            f.agent,
            fmt3(&f.m_eigenvalues),
            if f.distinct { "distinct" } else { "repeated" },
            fmt3(&f.q_eigenvalues),
            f.lambda_min_q,
            f.lambda_min_p
        ));
    }
    if !report.all_distinct() {
        lines.push(format!(
            "note: repeated M eigenvalues (gap ≤ {:e}) make those followers' undesired equilibria non-isolated",
            report.gap
        ));
    }
    emit(&c.out, Report {
        command: "validate",
        config: c.config.clone(),
        passed: true,
        lines,
        data: ValidateData {
            violation: None,
            spectra: Some(report),
        },
    })
}

fn violation(v: &TopologyViolation) -> ViolationData {
    ViolationData {
        clause: v.clause(),
        message: v.to_string(),
    }
}

#[derive(Serialize)]
struct RunData {
    summary: RunSummary,
    csv: PathBuf,
}

fn cmd_run(c: &Common, seed: Option<u64>) -> Result<bool> {
    let scenario = load(c, seed)?;
    let out = run(&scenario)?;
    let summary = RunSummary::new(&scenario, &out);
    fs::create_dir_all(&c.out).with_context(|| format!("cannot create {}", c.out.display()))?;
    let csv = c.out.join("timeseries.csv");
    export(&out.series, &csv)?;

    let flag = |ok: bool| if ok { "converged" } else { "NOT converged" };
    let mut lines = vec![format!(
        "scenario {} (config sha256 {}), {:?} integrator, h = {:e} s, T = {} s, {} steps",
        summary.scenario, summary.config_hash, summary.integrator, summary.step, summary.horizon, out.steps
    )];
    lines.push(format!(
        "final average attitude error |R̃|_I = {:.3e} (threshold {:e}): {}",
        summary.final_rerr_avg,
        summary.attitude_threshold,
        flag(summary.attitude_converged)
    ));
    lines.push(format!(
        "final average position error ‖p̃‖ = {:.3e} (threshold {:e}): {}",
        summary.final_perr_avg,
        summary.position_threshold,
        flag(summary.position_converged)
    ));
    lines.push(format!("final average ‖p − p̂‖ = {:.3e}", summary.final_phat_err_avg));
    for f in &summary.followers {
        lines.push(format!(
            "agent {}: |R̃|_I = {:.3e} ({}), ‖p̃‖ = {:.3e} ({}), ‖p − p̂‖ = {:.3e}",
            f.agent,
            f.rerr,
            flag(f.attitude_converged),
            f.perr,
            flag(f.position_converged),
            f.phat_err
        ));
    }
    lines.push(format!("max orthonormality error {:.3e}", summary.max_orthonormality_error));
    lines.push(format!("time series: {}", csv.display()));
    let passed = summary.converged()
        && summary
            .followers
            .iter()
            .all(|f| f.attitude_converged && f.position_converged);
    emit(&c.out, Report {
        command: "run",
        config: c.config.clone(),
        passed,
        lines,
        data: RunData { summary, csv },
    })
}

#[derive(Serialize)]
struct EquilibriaEntry {
    agent: usize,
    /// Set when `M_i` violates the distinct-eigenvalue precondition.
    precondition: Option<String>,
    analysis: FollowerEquilibria,
}

fn cmd_equilibria(c: &Common) -> Result<bool> {
    let scenario = load(c, None)?;
    let k_r = scenario.gains.k_r;
    let escape = EscapeSettings::default();
    let mut lines = vec![format!(
        "scenario {}: k_R = {k_r}, escape test ε = {:e}, radius {}, horizon {} s",
        scenario.name, escape.perturbation, escape.radius, escape.horizon
    )];
    let mut entries = Vec::new();
    for i in scenario.topology.followers() {
        let m = bearing_matrix(i, &scenario.topology, &scenario.positions)?;
        let (precondition, analysis) =
            match analyze_equilibria(i, &m, k_r, scenario.eigen_gap, Isolation::Strict, &escape) {
                Ok(a) => (None, a),
                Err(e @ AnalysisError::RepeatedEigenvalues { .. }) => (
                    Some(e.to_string()),
                    analyze_equilibria(i, &m, k_r, scenario.eigen_gap, Isolation::Relaxed, &escape)?,
                ),
                Err(e) => return Err(e.into()),
            };
        match &precondition {
            None => lines.push(format!("agent {i}: {} isolated equilibria", analysis.points.len())),
            Some(why) => lines.push(format!(
                "agent {i}: precondition not met ({why}); {} equilibria from one eigenbasis",
                analysis.points.len()
            )),
        }
        for p in &analysis.points {
            let name = match p.equilibrium.kind {
                EquilibriumKind::Desired => "I".to_owned(),
                EquilibriumKind::Undesired { axis, .. } => format!("R(π, {})", fmt3(&axis)),
            };
            let behaviour = match (&p.equilibrium.kind, p.escape) {
                (EquilibriumKind::Desired, _) => "stable".to_owned(),
                (_, Some(e)) if e.escaped => format!(
                    "unstable, perturbation escaped the ball at t = {:.3} s",
                    e.time.unwrap_or(f64::NAN)
                ),
                (_, Some(e)) => format!("perturbation stayed within {:.3e}", e.max_distance),
                (_, None) => "no unstable direction".to_owned(),
            };
            lines.push(format!(
                "  {name}: residual {:.1e}, eigenvalues {} → {behaviour} [{}]",
                p.equilibrium.residual,
                fmt3(&p.linearization.eigenvalues),
                if p.as_expected { "as expected" } else { "UNEXPECTED" }
            ));
        }
        entries.push(EquilibriaEntry {
            agent: i.number(),
            precondition,
            analysis,
        });
    }
    let passed = entries
        .iter()
        .all(|e| e.analysis.as_expected() && e.analysis.max_residual() <= EQUILIBRIUM_TOL);
    emit(&c.out, Report {
        command: "equilibria",
        config: c.config.clone(),
        passed,
        lines,
        data: entries,
    })
}

fn cmd_sweep(c: &Common, trials: u64, seed: Option<u64>) -> Result<bool> {
    let mut doc = load_doc(&c.config)?;
    doc.apply(&Overrides {
        k_r: c.k_r,
        k_p: c.k_p,
        ..Overrides::default()
    });
    let sweep = doc.sweep.get_or_insert(SweepDoc {
        horizon: None,
        step: None,
        box_half_width: None,
        tolerance: None,
    });
    sweep.step = c.step.or(sweep.step);
    sweep.horizon = c.horizon.or(sweep.horizon);
    let scenario = Scenario::from_doc(doc)?;
    let seed = seed.unwrap_or(scenario.seed);
    let summary: SweepSummary = basin_sweep(&scenario, trials, seed);

    let mut lines = vec![
        format!(
            "sweep {}: {} trials, seed {}, horizon {} s, step {:e} s, box ±{} m, tolerance {:e}",
            summary.scenario,
            summary.trials,
            summary.seed,
            summary.horizon,
            summary.step,
            summary.box_half_width,
            summary.tolerance
        ),
        format!("sampler: {}", summary.sampler),
        format!(
            "converged {}/{} (fraction {:.3}, required ≥ {SWEEP_PASS_FRACTION})",
            summary.converged, summary.trials, summary.fraction
        ),
    ];
    for f in &summary.failures {
        lines.push(match &f.error {
            Some(e) => format!("trial {} failed: {e}", f.trial),
            None => format!(
                "trial {} did not converge: max |R̃|_I = {:.3e}, max ‖p̃‖ = {:.3e}",
                f.trial, f.max_rerr, f.max_perr
            ),
        });
    }
    if let Some(p) = &summary.planted {
        lines.push(format!(
            "witness (agent 3 started on an undesired equilibrium, not counted): {}, max |R̃|_I = {:.3e}, max ‖p̃‖ = {:.3e}",
            if p.converged { "converged" } else { "did not converge" },
            p.max_rerr,
            p.max_perr
        ));
    }
    emit(&c.out, Report {
        command: "sweep",
        config: c.config.clone(),
        passed: summary.fraction >= SWEEP_PASS_FRACTION,
        lines,
        data: summary,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Validate(c) => cmd_validate(c),
        Command::Run { common, seed } => cmd_run(common, *seed),
        Command::Equilibria(c) => cmd_equilibria(c),
        Command::Sweep { common, trials, seed } => cmd_sweep(common, *trials, *seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
