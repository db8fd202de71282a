#![allow(dead_code)]

use std::path::PathBuf;

use qsm_core::boxes::BoxScenario;
use qsm_core::scenario::{AnyScenario, Scenario};
use qsm_core::{Distribution, HypothesisId, HypothesisSet, Partition};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn example(which: u8) -> Scenario {
    match AnyScenario::load(&scenario_path(&format!("example_p{which}.json"))).unwrap() {
        AnyScenario::Partitions(s) => s,
        AnyScenario::Boxes(_) => panic!("example files hold partitions"),
    }
}

pub fn boxes(name: &str) -> BoxScenario {
    match AnyScenario::load(&scenario_path(name)).unwrap() {
        AnyScenario::Boxes(b) => b.scenario,
        AnyScenario::Partitions(_) => panic!("{name} is not a box scenario"),
    }
}

/// Set from 1-based hypothesis numbers.
pub fn set(ids: &[usize]) -> HypothesisSet {
    ids.iter().map(|&i| HypothesisId(i - 1)).collect()
}

pub fn split(n: usize, plus: &[usize]) -> Partition {
    Partition::split(HypothesisSet::first(n).unwrap(), set(plus)).unwrap()
}

pub fn queries(s: &Scenario) -> [Partition; 4] {
    [s.query("Q1").unwrap(), s.query("Q2").unwrap(), s.query("Q3").unwrap(), s.query("Q4").unwrap()]
}

/// Seeded random distributions with weights uniform in (0.01, 1) before normalization.
pub fn random_dists(n: usize, count: usize, seed: u64) -> Vec<Distribution> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Distribution::random(n, 0.01, &mut rng).unwrap()).collect()
}
