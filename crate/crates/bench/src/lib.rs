//! Fixtures shared by the criterion benchmarks in `benches/`.

use isea_core::{build_scenario, Scenario, ScenarioConfig};

/// The crossing setup: `M = L = 10`, rank-one views, 10 dB.
pub fn crossing_scenario(num_antennas: usize) -> Scenario {
    build_scenario(&ScenarioConfig {
        feature_dim: 10,
        num_classes: 10,
        num_sensors: 10,
        num_antennas,
        observation_rank: 1,
        ..Default::default()
    })
    .expect("valid fixture")
}

/// A wide feature space close to the rank-comparison setup.
pub fn wide_scenario() -> Scenario {
    build_scenario(&ScenarioConfig {
        feature_dim: 100,
        num_classes: 20,
        num_sensors: 4,
        num_antennas: 8,
        observation_rank: 50,
        ..Default::default()
    })
    .expect("valid fixture")
}
