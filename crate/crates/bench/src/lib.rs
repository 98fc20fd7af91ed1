//! Shared benchmark fixtures.

use opinion_games::{zachary_karate_club, GameConfig};

/// The standard benchmark instance: the bundled 34-agent network over the
/// usual horizon, with a deterministic split initial opinion vector.
pub fn zachary_benchmark_config() -> GameConfig {
    let g = zachary_karate_club();
    let x0: Vec<f64> = (0..34)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    GameConfig::new(g, 10.0, vec![1.0; 34], vec![1.0; 34], x0, 201).unwrap()
}
