//! Library half of the command-line front end, kept separate so the
//! integration and acceptance suites can drive the exact pipeline the binary
//! runs.

pub mod runner;
pub mod spec;

pub use runner::{
    run_experiment, verify_experiment, Diagnostics, ModeDiagnostics, RunArtifacts,
    VerificationSummary,
};
pub use spec::{two_cluster_opinions, ExperimentSpec, InitialOpinions, Mode, ParamSpec, RunMode};

use thiserror::Error;

/// CLI failures carry their exit code: 1 for configuration problems, 2 for
/// solver failures (a numerically singular boundary matrix above all), 3 for
/// verification failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl From<opinion_games::Error> for CliError {
    fn from(err: opinion_games::Error) -> Self {
        use opinion_games::Error as E;
        match err {
            E::SingularBoundaryMatrix { .. }
            | E::NonFiniteState { .. }
            | E::NonFiniteControl { .. }
            | E::Numerical(_) => CliError::Solver(err.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
