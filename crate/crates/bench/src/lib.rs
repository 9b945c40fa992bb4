//! Shared fixtures for the benchmarks.

use treedepth::{generate, Dataset, Scenario, ScenarioSpec};

/// A seeded draw of `scenario` with `n` rows.
pub fn fixture(scenario: Scenario, n: usize) -> Dataset {
    generate(&ScenarioSpec::new(scenario, n, 7))
        .expect("benchmark scenarios generate")
        .dataset
}
