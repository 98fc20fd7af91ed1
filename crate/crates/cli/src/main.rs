use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use opinion_games_cli::spec::{ExperimentSpec, InitialOpinions, Mode, ParamSpec};
use opinion_games_cli::{run_experiment, verify_experiment, CliError};

/// Opinion formation on social graphs: uncontrolled averaging dynamics, the
/// open-loop equilibrium of the opinion game, and the centralized optimum.
#[derive(Parser)]
#[command(name = "opinion-games", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured modes and write trajectory CSVs, plot data, and
    /// diagnostics JSON.
    Run(RunArgs),
    /// Run the verification suite (trajectory oracle, stationarity residuals,
    /// deviation tests, locality probe) and write a structured report.
    Verify(ConfigArgs),
    /// Print basic facts about a graph.
    GraphInfo {
        /// `zachary` or a path to a one-based edge-list file.
        #[arg(long, default_value = "zachary")]
        graph: String,
    },
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Also run the verification suite and embed its summary in the
    /// diagnostics.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct ConfigArgs {
    /// Full experiment spec as a JSON file; mutually exclusive with the
    /// individual configuration flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// `zachary` or a path to a one-based edge-list file.
    #[arg(long)]
    graph: Option<String>,
    /// Horizon t_f.
    #[arg(long)]
    tf: Option<f64>,
    /// Control weight: scalar or comma-separated per-agent list.
    #[arg(long)]
    r: Option<String>,
    /// Input gain: scalar or comma-separated per-agent list.
    #[arg(long)]
    b: Option<String>,
    /// Initial opinions: comma-separated list, `cluster`, or `cluster:SEED`.
    #[arg(long)]
    x0: Option<String>,
    /// Output grid size (odd, at least 3, for the cost quadrature).
    #[arg(long)]
    samples: Option<usize>,
    /// Seed for verification probe directions (and `cluster` without an
    /// explicit seed).
    #[arg(long)]
    seed: Option<u64>,
    /// uncontrolled | nash | social | all.
    #[arg(long)]
    mode: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl ConfigArgs {
    fn into_spec(self) -> Result<(ExperimentSpec, PathBuf), CliError> {
        if let Some(spec_path) = &self.spec {
            let overridden = self.graph.is_some()
                || self.tf.is_some()
                || self.r.is_some()
                || self.b.is_some()
                || self.x0.is_some()
                || self.samples.is_some()
                || self.seed.is_some()
                || self.mode.is_some();
            if overridden {
                return Err(CliError::Config(
                    "--spec is mutually exclusive with the individual configuration flags".into(),
                ));
            }
            let text = std::fs::read_to_string(spec_path)
                .map_err(|e| CliError::Config(format!("cannot read {spec_path:?}: {e}")))?;
            return Ok((ExperimentSpec::from_json(&text)?, self.out));
        }
        let seed = self.seed.unwrap_or(0);
        let spec = ExperimentSpec {
            graph: self.graph.unwrap_or_else(|| "zachary".into()),
            t_f: self.tf.unwrap_or(10.0),
            r: self
                .r
                .as_deref()
                .map(ParamSpec::parse)
                .transpose()?
                .unwrap_or(ParamSpec::Scalar(1.0)),
            b: self
                .b
                .as_deref()
                .map(ParamSpec::parse)
                .transpose()?
                .unwrap_or(ParamSpec::Scalar(1.0)),
            x0: InitialOpinions::parse(self.x0.as_deref().unwrap_or("cluster"), seed)?,
            samples: self.samples.unwrap_or(201),
            seed,
            mode: self
                .mode
                .as_deref()
                .map(Mode::parse)
                .transpose()?
                .unwrap_or(Mode::All),
        };
        Ok((spec, self.out))
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let with_verification = args.verify;
            let (spec, out) = args.config.into_spec()?;
            let artifacts = run_experiment(&spec, &out, with_verification)?;
            for mode in &artifacts.diagnostics.modes {
                println!(
                    "{:<12} initial spread {:.6}  final spread {:.6}  (ratio {:.4})",
                    mode.mode, mode.initial_spread, mode.final_spread, mode.spread_ratio
                );
            }
            println!("wrote {} files to {}", artifacts.files.len(), out.display());
            if let Some(verification) = &artifacts.diagnostics.verification {
                if !verification.pass {
                    let failed: Vec<&str> = verification
                        .checks
                        .iter()
                        .filter(|c| !c.pass)
                        .map(|c| c.check.as_str())
                        .collect();
                    return Err(CliError::Verification(failed.join(", ")));
                }
                println!("verification: all checks passed");
            }
            Ok(())
        }
        Command::Verify(config) => {
            let (spec, out) = config.into_spec()?;
            let (summary, path) = verify_experiment(&spec, &out)?;
            for check in &summary.checks {
                println!(
                    "{} {:<28} max residual {:.3e} (tolerance {:.1e})",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.check,
                    check.max_residual,
                    check.tolerance
                );
            }
            for probe in &summary.locality {
                println!(
                    "info locality agent {}: {} non-neighbor sensitivities above {:.0e}",
                    probe.agent,
                    probe.nonlocal_agents.len(),
                    probe.threshold
                );
            }
            println!("report written to {}", path.display());
            if !summary.pass {
                let failed: Vec<&str> = summary
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.check.as_str())
                    .collect();
                return Err(CliError::Verification(failed.join(", ")));
            }
            Ok(())
        }
        Command::GraphInfo { graph } => {
            let spec = ExperimentSpec {
                graph,
                t_f: 1.0,
                r: ParamSpec::Scalar(1.0),
                b: ParamSpec::Scalar(1.0),
                x0: InitialOpinions::Explicit(vec![]),
                samples: 3,
                seed: 0,
                mode: Mode::All,
            };
            let (name, g) = spec.load_graph()?;
            let degrees: Vec<usize> = (0..g.agent_count())
                .map(|i| g.degree(i).expect("valid index"))
                .collect();
            println!("graph: {name}");
            println!("agents: {}", g.agent_count());
            println!("edges: {}", g.edge_count());
            println!(
                "degree: min {} max {}",
                degrees.iter().min().unwrap(),
                degrees.iter().max().unwrap()
            );
            println!("connected: true");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
