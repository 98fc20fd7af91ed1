//! Experiment pipeline: solve the requested modes, write trajectory CSVs,
//! plot data, and a diagnostics JSON; run the verification suite on demand.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use opinion_games::verify::{
    check_nash_deviation, check_pontryagin, check_social_deviation, check_trajectory_oracle,
    locality_probe, DeviationOptions, LocalityProbe, VerificationReport,
};
use opinion_games::{
    evaluate_social_cost, solve, solve_social, uncontrolled_closed_form, GameConfig, Trajectory,
};

use crate::spec::{ExperimentSpec, RunMode};
use crate::CliError;

/// Residual tolerance the CLI asserts for closed-form vs RK4 re-integration.
pub const TRAJECTORY_ORACLE_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Serialize)]
pub struct GraphSummary {
    pub name: String,
    pub agents: usize,
    pub edges: usize,
}

#[derive(Debug, Serialize)]
pub struct ModeDiagnostics {
    pub mode: String,
    pub initial_spread: f64,
    pub final_spread: f64,
    pub spread_ratio: f64,
    /// Condition number of the boundary matrix (`H` for nash, `H_hat` for
    /// social); absent for the uncontrolled flow.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_condition: Option<f64>,
    /// Realized per-agent game costs (nash mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent_costs: Option<Vec<f64>>,
    /// The aggregate cost functional evaluated on this mode's trajectory.
    pub social_cost: f64,
}

#[derive(Debug, Serialize)]
pub struct Diagnostics {
    pub graph: GraphSummary,
    pub t_f: f64,
    pub samples: usize,
    pub seed: u64,
    pub r: Vec<f64>,
    pub b: Vec<f64>,
    pub x0: Vec<f64>,
    pub modes: Vec<ModeDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationSummary>,
}

#[derive(Debug, Serialize)]
pub struct VerificationSummary {
    pub pass: bool,
    pub checks: Vec<VerificationReport>,
    /// Locality measurements; informational, never gating.
    pub locality: Vec<LocalityProbe>,
}

pub struct RunArtifacts {
    pub diagnostics: Diagnostics,
    pub files: Vec<PathBuf>,
}

fn fmt(v: f64) -> String {
    // 17 significant digits (1 + 16 fractional).
    format!("{v:.16e}")
}

fn write_trajectory_csv(
    path: &Path,
    times: &[f64],
    rows: &[nalgebra::DVector<f64>],
    column_prefix: char,
) -> Result<(), CliError> {
    let n = rows[0].len();
    let mut out = String::new();
    out.push('t');
    for j in 1..=n {
        out.push(',');
        out.push(column_prefix);
        out.push_str(&j.to_string());
    }
    out.push('\n');
    for (t, row) in times.iter().zip(rows) {
        out.push_str(&fmt(*t));
        for v in row.iter() {
            out.push(',');
            out.push_str(&fmt(*v));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::Config(format!("writing {path:?}: {e}")))
}

struct ModeResult {
    mode: RunMode,
    trajectory: Trajectory,
    boundary_condition: Option<f64>,
    agent_costs: Option<Vec<f64>>,
}

fn execute_mode(cfg: &GameConfig, mode: RunMode) -> Result<ModeResult, CliError> {
    match mode {
        RunMode::Uncontrolled => Ok(ModeResult {
            mode,
            trajectory: uncontrolled_closed_form(cfg)?,
            boundary_condition: None,
            agent_costs: None,
        }),
        RunMode::Nash => {
            let sol = solve(cfg)?;
            Ok(ModeResult {
                mode,
                trajectory: sol.trajectory,
                boundary_condition: Some(sol.condition),
                agent_costs: Some(sol.costs),
            })
        }
        RunMode::Social => {
            let sol = solve_social(cfg)?;
            Ok(ModeResult {
                mode,
                trajectory: sol.trajectory,
                boundary_condition: Some(sol.condition),
                agent_costs: None,
            })
        }
    }
}

/// Runs every pass of `spec.mode` into `out_dir`: per-mode opinion CSVs,
/// control CSVs for the controlled modes, a long-format plot-data CSV, and
/// `diagnostics.json`. With `with_verification`, the verification suite runs
/// and its summary is embedded in the diagnostics.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    with_verification: bool,
) -> Result<RunArtifacts, CliError> {
    let (graph_name, cfg) = spec.to_game_config()?;
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("creating {out_dir:?}: {e}")))?;

    let mut files = Vec::new();
    let mut results = Vec::new();
    for mode in spec.mode.passes() {
        results.push(execute_mode(&cfg, mode)?);
    }

    let mut plot = String::from("mode,t,agent,x,u\n");
    let mut mode_diagnostics = Vec::new();
    for result in &results {
        let name = result.mode.name();
        let traj = &result.trajectory;

        let opinions_path = out_dir.join(format!("{name}_opinions.csv"));
        write_trajectory_csv(&opinions_path, &traj.times, &traj.opinions, 'x')?;
        files.push(opinions_path);

        let controls = traj
            .controls
            .as_ref()
            .expect("solver trajectories carry controls");
        if !matches!(result.mode, RunMode::Uncontrolled) {
            let controls_path = out_dir.join(format!("{name}_controls.csv"));
            write_trajectory_csv(&controls_path, &traj.times, controls, 'u')?;
            files.push(controls_path);
        }

        for (k, t) in traj.times.iter().enumerate() {
            for (agent, (x, u)) in traj.opinions[k].iter().zip(controls[k].iter()).enumerate() {
                plot.push_str(name);
                plot.push(',');
                plot.push_str(&fmt(*t));
                plot.push(',');
                plot.push_str(&(agent + 1).to_string());
                plot.push(',');
                plot.push_str(&fmt(*x));
                plot.push(',');
                plot.push_str(&fmt(*u));
                plot.push('\n');
            }
        }

        mode_diagnostics.push(ModeDiagnostics {
            mode: name.into(),
            initial_spread: traj.initial_spread(),
            final_spread: traj.final_spread(),
            spread_ratio: traj.final_spread() / traj.initial_spread().max(f64::MIN_POSITIVE),
            boundary_condition: result.boundary_condition,
            agent_costs: result.agent_costs.clone(),
            social_cost: evaluate_social_cost(&cfg, traj)?,
        });
    }

    let plot_path = out_dir.join("plot_data.csv");
    fs::write(&plot_path, plot).map_err(|e| CliError::Config(format!("writing plot data: {e}")))?;
    files.push(plot_path);

    let verification = if with_verification {
        Some(verification_summary(spec, &cfg)?)
    } else {
        None
    };

    let diagnostics = Diagnostics {
        graph: GraphSummary {
            name: graph_name,
            agents: cfg.agent_count(),
            edges: cfg.graph().edge_count(),
        },
        t_f: cfg.horizon(),
        samples: cfg.samples(),
        seed: spec.seed,
        r: cfg.control_weights().iter().copied().collect(),
        b: cfg.input_gains().iter().copied().collect(),
        x0: cfg.initial_opinions().iter().copied().collect(),
        modes: mode_diagnostics,
        verification,
    };

    let diag_path = out_dir.join("diagnostics.json");
    let json = serde_json::to_string_pretty(&diagnostics)
        .map_err(|e| CliError::Config(format!("serializing diagnostics: {e}")))?;
    fs::write(&diag_path, json + "\n")
        .map_err(|e| CliError::Config(format!("writing diagnostics: {e}")))?;
    files.push(diag_path);

    Ok(RunArtifacts { diagnostics, files })
}

/// Probe agents for the deviation and locality checks: the first, a middle,
/// and the last agent.
fn probe_agents(n: usize) -> Vec<usize> {
    let mut agents = vec![0, n / 2, n - 1];
    agents.dedup();
    agents
}

fn verification_summary(
    spec: &ExperimentSpec,
    cfg: &GameConfig,
) -> Result<VerificationSummary, CliError> {
    let nash = solve(cfg)?;
    let social = solve_social(cfg)?;

    let mut checks = Vec::new();
    checks.push(check_trajectory_oracle(&nash, TRAJECTORY_ORACLE_TOLERANCE)?);
    checks.push(check_trajectory_oracle(
        &social,
        TRAJECTORY_ORACLE_TOLERANCE,
    )?);

    let pontryagin = check_pontryagin(&nash)?;
    checks.push(pontryagin.stationarity);
    checks.push(pontryagin.costate_ode);
    checks.push(pontryagin.terminal);

    let agents = probe_agents(cfg.agent_count());
    let deviation = check_nash_deviation(
        &nash,
        &DeviationOptions::standard(agents.clone(), spec.seed),
    )?;
    checks.push(deviation.decrease);
    checks.push(deviation.gradient);
    checks.push(check_social_deviation(&social, 20, 1e-3, spec.seed)?);

    let mut locality = Vec::new();
    for agent in &agents {
        locality.push(locality_probe(cfg, *agent)?);
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationSummary {
        pass,
        checks,
        locality,
    })
}

/// Runs the full verification suite and writes `verification.json`.
/// The locality probe is informational and never fails the run.
pub fn verify_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
) -> Result<(VerificationSummary, PathBuf), CliError> {
    let (_, cfg) = spec.to_game_config()?;
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("creating {out_dir:?}: {e}")))?;
    let summary = verification_summary(spec, &cfg)?;
    let path = out_dir.join("verification.json");
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Config(format!("serializing report: {e}")))?;
    fs::write(&path, json + "\n").map_err(|e| CliError::Config(format!("writing report: {e}")))?;
    Ok((summary, path))
}
