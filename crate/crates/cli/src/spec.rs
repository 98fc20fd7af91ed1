//! Experiment configuration: graph source, game parameters, initial-opinion
//! source (explicit vector or the seeded two-cluster sampler), sampling grid,
//! and mode selection. A spec can come from CLI flags or a single JSON file.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use opinion_games::{load_edge_list, zachary_karate_club, GameConfig, Indexing, SocialGraph};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Uncontrolled,
    Nash,
    Social,
    #[default]
    All,
}

impl Mode {
    pub fn parse(text: &str) -> Result<Mode, CliError> {
        match text {
            "uncontrolled" => Ok(Mode::Uncontrolled),
            "nash" => Ok(Mode::Nash),
            "social" => Ok(Mode::Social),
            "all" => Ok(Mode::All),
            other => Err(CliError::Config(format!(
                "unknown mode '{other}' (expected uncontrolled|nash|social|all)"
            ))),
        }
    }

    /// The concrete solver passes this mode expands to.
    pub fn passes(&self) -> Vec<RunMode> {
        match self {
            Mode::Uncontrolled => vec![RunMode::Uncontrolled],
            Mode::Nash => vec![RunMode::Nash],
            Mode::Social => vec![RunMode::Social],
            Mode::All => vec![RunMode::Uncontrolled, RunMode::Nash, RunMode::Social],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Uncontrolled,
    Nash,
    Social,
}

impl RunMode {
    pub fn name(&self) -> &'static str {
        match self {
            RunMode::Uncontrolled => "uncontrolled",
            RunMode::Nash => "nash",
            RunMode::Social => "social",
        }
    }
}

/// A scalar broadcast to every agent, or one value per agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ParamSpec {
    pub fn parse(text: &str) -> Result<ParamSpec, CliError> {
        if text.contains(',') {
            let values = text
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        CliError::Config(format!("invalid number '{tok}' in list '{text}'"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ParamSpec::Vector(values))
        } else {
            text.trim()
                .parse::<f64>()
                .map(ParamSpec::Scalar)
                .map_err(|_| CliError::Config(format!("invalid number '{text}'")))
        }
    }

    pub fn broadcast(&self, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
        match self {
            ParamSpec::Scalar(v) => Ok(vec![*v; n]),
            ParamSpec::Vector(values) if values.len() == n => Ok(values.clone()),
            ParamSpec::Vector(values) => Err(CliError::Config(format!(
                "{what} has {} entries but the graph has {n} agents",
                values.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClusterSeed {
    pub seed: u64,
}

/// Initial opinions: an explicit vector, or the seeded two-cluster sampler.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialOpinions {
    Explicit(Vec<f64>),
    TwoCluster { two_cluster: ClusterSeed },
}

impl InitialOpinions {
    /// `cluster` / `cluster:SEED` selects the sampler; anything else is a
    /// comma-separated vector.
    pub fn parse(text: &str, default_seed: u64) -> Result<InitialOpinions, CliError> {
        if text == "cluster" {
            return Ok(InitialOpinions::TwoCluster {
                two_cluster: ClusterSeed { seed: default_seed },
            });
        }
        if let Some(seed_text) = text.strip_prefix("cluster:") {
            let seed = seed_text
                .parse::<u64>()
                .map_err(|_| CliError::Config(format!("invalid cluster seed '{seed_text}'")))?;
            return Ok(InitialOpinions::TwoCluster {
                two_cluster: ClusterSeed { seed },
            });
        }
        match ParamSpec::parse(text)? {
            ParamSpec::Vector(values) => Ok(InitialOpinions::Explicit(values)),
            ParamSpec::Scalar(v) => Ok(InitialOpinions::Explicit(vec![v])),
        }
    }

    pub fn materialize(&self, n: usize) -> Result<Vec<f64>, CliError> {
        match self {
            InitialOpinions::Explicit(values) if values.len() == n => Ok(values.clone()),
            InitialOpinions::Explicit(values) => Err(CliError::Config(format!(
                "x0 has {} entries but the graph has {n} agents",
                values.len()
            ))),
            InitialOpinions::TwoCluster { two_cluster } => {
                Ok(two_cluster_opinions(n, two_cluster.seed))
            }
        }
    }
}

/// Draws each initial opinion uniformly from `(-1.5, -0.5) ∪ (0.5, 1.5)`,
/// each half with probability 1/2. Per agent, two draws from a ChaCha8
/// generator seeded with `seed`: `side` in `[0, 1)` picks the half
/// (`side < 1/2` is the negative cluster), then `offset` in `[0, 1)` maps to
/// `-1.5 + offset` or `0.5 + offset`. The mapping is documented so that seeds
/// reproduce across implementations.
pub fn two_cluster_opinions(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let side: f64 = rng.random();
            let offset: f64 = rng.random();
            if side < 0.5 {
                -1.5 + offset
            } else {
                0.5 + offset
            }
        })
        .collect()
}

fn default_t_f() -> f64 {
    10.0
}

fn default_param() -> ParamSpec {
    ParamSpec::Scalar(1.0)
}

fn default_samples() -> usize {
    201
}

/// A complete experiment description; serializable as the `--spec` JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// `zachary` or a path to a one-based edge-list file.
    pub graph: String,
    #[serde(default = "default_t_f")]
    pub t_f: f64,
    #[serde(default = "default_param")]
    pub r: ParamSpec,
    #[serde(default = "default_param")]
    pub b: ParamSpec,
    pub x0: InitialOpinions,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Seed for verification probe directions (the two-cluster sampler
    /// carries its own seed).
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<ExperimentSpec, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("spec file: {e}")))
    }

    pub fn load_graph(&self) -> Result<(String, SocialGraph), CliError> {
        if self.graph == "zachary" {
            return Ok(("zachary".into(), zachary_karate_club()));
        }
        let text = std::fs::read_to_string(&self.graph)
            .map_err(|e| CliError::Config(format!("cannot read graph '{}': {e}", self.graph)))?;
        let graph = load_edge_list(&text, Indexing::OneBased)?;
        Ok((self.graph.clone(), graph))
    }

    pub fn to_game_config(&self) -> Result<(String, GameConfig), CliError> {
        let (label, graph) = self.load_graph()?;
        let n = graph.agent_count();
        let r = self.r.broadcast(n, "r")?;
        let b = self.b.broadcast(n, "b")?;
        let x0 = self.x0.materialize(n)?;
        let cfg = GameConfig::new(graph, self.t_f, r, b, x0, self.samples)?;
        Ok((label, cfg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_lands_in_the_two_clusters() {
        let x0 = two_cluster_opinions(1000, 7);
        assert!(x0
            .iter()
            .all(|&v| (-1.5..-0.5).contains(&v) || (0.5..1.5).contains(&v)));
        let negatives = x0.iter().filter(|&&v| v < 0.0).count();
        assert!(
            (300..700).contains(&negatives),
            "wildly unbalanced halves: {negatives}"
        );
        assert_eq!(two_cluster_opinions(1000, 7), x0);
        assert_ne!(two_cluster_opinions(1000, 8), x0);
    }

    #[test]
    fn param_spec_parses_scalars_and_lists() {
        assert!(matches!(ParamSpec::parse("20").unwrap(), ParamSpec::Scalar(v) if v == 20.0));
        match ParamSpec::parse("1, 2,3").unwrap() {
            ParamSpec::Vector(v) => assert_eq!(v, vec![1.0, 2.0, 3.0]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ParamSpec::parse("1,x").is_err());
    }

    #[test]
    fn x0_parses_cluster_forms() {
        match InitialOpinions::parse("cluster:42", 0).unwrap() {
            InitialOpinions::TwoCluster { two_cluster } => assert_eq!(two_cluster.seed, 42),
            other => panic!("unexpected {other:?}"),
        }
        match InitialOpinions::parse("cluster", 9).unwrap() {
            InitialOpinions::TwoCluster { two_cluster } => assert_eq!(two_cluster.seed, 9),
            other => panic!("unexpected {other:?}"),
        }
        match InitialOpinions::parse("1.0,-1.0", 0).unwrap() {
            InitialOpinions::Explicit(v) => assert_eq!(v, vec![1.0, -1.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = ExperimentSpec {
            graph: "zachary".into(),
            t_f: 10.0,
            r: ParamSpec::Scalar(1.0),
            b: ParamSpec::Scalar(1.0),
            x0: InitialOpinions::TwoCluster {
                two_cluster: ClusterSeed { seed: 42 },
            },
            samples: 201,
            seed: 0,
            mode: Mode::All,
        };
        let json = serde_json::to_string_pretty(&spec).unwrap();
        let back = ExperimentSpec::from_json(&json).unwrap();
        assert_eq!(back.graph, "zachary");
        assert!(
            matches!(back.x0, InitialOpinions::TwoCluster { two_cluster } if two_cluster.seed == 42)
        );
    }

    #[test]
    fn spec_json_minimal_defaults() {
        let spec = ExperimentSpec::from_json(r#"{"graph": "zachary", "x0": [0.0]}"#).unwrap();
        assert_eq!(spec.t_f, 10.0);
        assert_eq!(spec.samples, 201);
        assert!(matches!(spec.mode, Mode::All));
    }

    #[test]
    fn bad_r_is_a_config_error_before_any_solve() {
        let spec = ExperimentSpec {
            graph: "zachary".into(),
            t_f: 10.0,
            r: ParamSpec::Scalar(0.0),
            b: ParamSpec::Scalar(1.0),
            x0: InitialOpinions::TwoCluster {
                two_cluster: ClusterSeed { seed: 1 },
            },
            samples: 201,
            seed: 0,
            mode: Mode::Nash,
        };
        match spec.to_game_config().unwrap_err() {
            CliError::Config(msg) => assert!(msg.contains("not positive"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
