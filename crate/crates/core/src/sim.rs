//! Sequential query sessions against a simulated oracle, and benchmarks over
//! many seeded sessions.

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boxes::{synthesize_query, BoxScenario, Point};
use crate::error::{Error, Result};
use crate::measure::MeasureSpec;
use crate::space::{bayes_update, Answer, Distribution, HypothesisId, Partition};
use crate::synthesis::{SearchConfig, DEFAULT_EPSILON};

pub const DEFAULT_MASS_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleSpec {
    pub target: HypothesisId,
    /// Seeds the fair coin answering queries the target makes no prediction on.
    pub completion_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionMode {
    /// Pick the best partition of a fixed pool.
    Pool(Vec<Partition>),
    /// Synthesize a point query in a box scenario.
    Synthesis { scenario: BoxScenario, epsilon: f64, exhaustive: bool },
}

impl SessionMode {
    pub fn synthesis(scenario: BoxScenario) -> Self {
        SessionMode::Synthesis { scenario, epsilon: DEFAULT_EPSILON, exhaustive: false }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub enum StopRule {
    #[default]
    SingletonSupport,
    /// Stop once the most probable hypothesis holds at least this mass.
    MassThreshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step {
    pub partition: Partition,
    pub answer: Answer,
    pub value: f64,
    pub point: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub queries_asked: usize,
    pub history: Vec<Step>,
    pub final_dist: Distribution,
    pub identified: bool,
}

fn stop_verdict(dist: &Distribution, stop: StopRule, target: HypothesisId) -> Option<bool> {
    match stop {
        StopRule::SingletonSupport => (dist.support().len() == 1).then(|| dist.support().contains(target)),
        StopRule::MassThreshold(theta) => {
            let top = dist.argmax();
            (dist.p(top) >= theta).then_some(top == target)
        }
    }
}

fn validate_pool(pool: &[Partition], dist: &Distribution) -> Result<()> {
    for (index, part) in pool.iter().enumerate() {
        part.check_universe(dist.support())?;
        if !part.is_discriminating() {
            return Err(Error::NonDiscriminatingPoolElement { index });
        }
    }
    Ok(())
}

/// Runs one session until the stop rule fires or no discriminating query remains.
pub fn run_session(
    dist: &Distribution,
    measure: &MeasureSpec,
    mode: &SessionMode,
    oracle: OracleSpec,
    stop: StopRule,
) -> Result<RunResult> {
    if !dist.support().contains(oracle.target) {
        return Err(Error::Config(format!("target {} has zero prior mass", oracle.target)));
    }
    if let StopRule::MassThreshold(theta) = stop {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Config(format!("mass threshold {theta} outside (0, 1]")));
        }
    }
    let mut pool = match mode {
        SessionMode::Pool(pool) => {
            validate_pool(pool, dist)?;
            pool.clone()
        }
        SessionMode::Synthesis { scenario, .. } => {
            if scenario.universe() != dist.support() {
                return Err(Error::UniverseMismatch {
                    expected: scenario.universe().to_string(),
                    actual: dist.support().to_string(),
                });
            }
            Vec::new()
        }
    };
    let mut coin = ChaCha8Rng::seed_from_u64(oracle.completion_seed);
    let mut dist = dist.clone();
    let mut history = Vec::new();
    loop {
        if let Some(identified) = stop_verdict(&dist, stop, oracle.target) {
            return Ok(RunResult { queries_asked: history.len(), history, final_dist: dist, identified });
        }
        let chosen = match mode {
            SessionMode::Pool(_) => {
                if pool.is_empty() {
                    None
                } else {
                    let (i, value) = measure.select_best(&pool, &dist)?;
                    Some((pool[i], value, None))
                }
            }
            SessionMode::Synthesis { scenario, epsilon, exhaustive } => {
                let config = SearchConfig::new(*measure).epsilon(*epsilon).exhaustive(*exhaustive);
                config.validate()?;
                if dist.support().len() < 2 {
                    None
                } else {
                    match synthesize_query(&config, &scenario.with_dist(dist.clone())?) {
                        Ok(q) => {
                            let value = measure.evaluate(&q.partition, &dist)?;
                            Some((q.partition, value, Some(q.point)))
                        }
                        Err(Error::NoRealizableGoal { .. }) => None,
                        Err(e) => return Err(e),
                    }
                }
            }
        };
        let Some((partition, value, point)) = chosen else {
            return Ok(RunResult { queries_asked: history.len(), history, final_dist: dist, identified: false });
        };
        let answer = match partition.block_of(oracle.target) {
            Some(0) => Answer::Yes,
            Some(1) => Answer::No,
            _ => {
                if coin.gen_bool(0.5) {
                    Answer::Yes
                } else {
                    Answer::No
                }
            }
        };
        dist = bayes_update(&dist, &partition, answer)?;
        assert!(dist.support().contains(oracle.target), "the target survives every answer");
        let survivors = dist.support();
        pool = pool.iter().map(|p| p.restrict(survivors)).filter(Partition::is_discriminating).collect();
        history.push(Step { partition, answer, value, point });
    }
}

/// One benchmark scenario: a prior plus a selection mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchScenario {
    pub name: String,
    pub dist: Distribution,
    pub mode: SessionMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub measure: String,
    pub scenario: String,
    pub repetition: usize,
    pub target: HypothesisId,
    pub queries: usize,
    pub identified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub measure: String,
    pub scenario: String,
    pub runs: usize,
    pub mean_queries: f64,
    pub median_queries: f64,
    pub max_queries: usize,
    pub identification_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub runs: Vec<RunRecord>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `(scenario, repetition)` cell; independent of the measure so
/// that every measure faces the same targets and coins.
pub fn cell_seed(seed: u64, scenario: usize, repetition: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ scenario as u64) ^ repetition as u64)
}

/// Target drawn proportionally to the prior, and the completion seed.
pub fn draw_oracle(dist: &Distribution, cell_seed: u64) -> OracleSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
    let support: Vec<HypothesisId> = dist.support().iter().collect();
    let weights = WeightedIndex::new(support.iter().map(|h| dist.p(*h))).expect("support masses are positive");
    let target = support[weights.sample(&mut rng)];
    OracleSpec { target, completion_seed: rng.gen() }
}

fn median(sorted: &[usize]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Runs every measure on every scenario `repetitions` times.
pub fn benchmark(
    measures: &[MeasureSpec],
    scenarios: &[BenchScenario],
    repetitions: usize,
    seed: u64,
    stop: StopRule,
) -> Result<BenchmarkReport> {
    if measures.is_empty() || scenarios.is_empty() || repetitions == 0 {
        return Err(Error::Config("benchmark needs measures, scenarios and at least one repetition".into()));
    }
    let cells: Vec<(usize, usize, usize)> = (0..measures.len())
        .flat_map(|m| (0..scenarios.len()).flat_map(move |s| (0..repetitions).map(move |r| (m, s, r))))
        .collect();
    let runs: Vec<RunRecord> = cells
        .into_par_iter()
        .map(|(m, s, r)| {
            let scenario = &scenarios[s];
            let oracle = draw_oracle(&scenario.dist, cell_seed(seed, s, r));
            let result = run_session(&scenario.dist, &measures[m], &scenario.mode, oracle, stop)?;
            Ok(RunRecord {
                measure: measures[m].label(),
                scenario: scenario.name.clone(),
                repetition: r,
                target: oracle.target,
                queries: result.queries_asked,
                identified: result.identified,
            })
        })
        .collect::<Result<_>>()?;
    let rows = runs
        .chunks(repetitions)
        .map(|chunk| {
            let mut counts: Vec<usize> = chunk.iter().map(|r| r.queries).collect();
            counts.sort_unstable();
            BenchmarkRow {
                measure: chunk[0].measure.clone(),
                scenario: chunk[0].scenario.clone(),
                runs: chunk.len(),
                mean_queries: counts.iter().sum::<usize>() as f64 / chunk.len() as f64,
                median_queries: median(&counts),
                max_queries: *counts.last().expect("nonempty chunk"),
                identification_rate: chunk.iter().filter(|r| r.identified).count() as f64 / chunk.len() as f64,
            }
        })
        .collect();
    Ok(BenchmarkReport { rows, runs })
}
