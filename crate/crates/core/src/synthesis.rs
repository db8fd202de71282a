//! Search for (nearly) optimal strong discriminating partitions.
//!
//! The search starts at `<∅, V, ∅>` and moves one hypothesis at a time from
//! `V-` to `V+`, always descending into the unvisited successor with the
//! smallest heuristic value and backtracking out of dead ends. Heuristic, goal
//! test and pruning depend on the equivalence class of the measure over
//! strong queries. For the classes whose optima are characterized only by a
//! probability ordering (KL, EMCb, MPS, BME) a direct construction is offered
//! as well.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use crate::enumerate::{brute_force_optimum, EnumOptions, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::measure::{Direction, MeasureKind, MeasureSpec};
use crate::space::{Distribution, HypothesisId, HypothesisSet, Partition, PartitionStats};

/// Default goal tolerance on `|p(V+) - p(V-)|`.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Equivalence classes of measures restricted to strong queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EquivalenceClass {
    /// Probability balance: EMCa(_z), GI, LC, M, H, ENT(_z), BAL.
    Ec1,
    /// Cardinality balance: SPL(_z), VE.
    Ec2,
    /// RIO', RIO'_z.
    Ec3,
    /// KL.
    Ec4,
    /// EMCb.
    Ec5,
    /// MPS, MPS'.
    Ec6,
    /// BME.
    Ec7,
}

impl EquivalenceClass {
    pub fn of(kind: MeasureKind) -> Self {
        use MeasureKind::*;
        match kind {
            EmcA | EmcAZ | Gi | Lc | M | H | Ent | EntZ | Bal => EquivalenceClass::Ec1,
            Spl | SplZ | Ve => EquivalenceClass::Ec2,
            RioPrime | RioPrimeZ => EquivalenceClass::Ec3,
            Kl => EquivalenceClass::Ec4,
            EmcB => EquivalenceClass::Ec5,
            Mps | MpsPrime => EquivalenceClass::Ec6,
            Bme => EquivalenceClass::Ec7,
        }
    }

    pub fn has_direct_construction(self) -> bool {
        matches!(self, EquivalenceClass::Ec4 | EquivalenceClass::Ec5 | EquivalenceClass::Ec6 | EquivalenceClass::Ec7)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub measure: MeasureSpec,
    pub ec: EquivalenceClass,
    pub n: u32,
    pub epsilon: f64,
    /// `None` means `10 |V|^2`.
    pub max_expansions: Option<usize>,
    pub excluded_goals: BTreeSet<Partition>,
    /// Keep searching after the first goal for the measure-optimal partition.
    pub exhaustive: bool,
}

impl SearchConfig {
    pub fn new(measure: MeasureSpec) -> Self {
        SearchConfig {
            measure,
            ec: EquivalenceClass::of(measure.kind),
            n: measure.n.unwrap_or(1),
            epsilon: DEFAULT_EPSILON,
            max_expansions: None,
            excluded_goals: BTreeSet::new(),
            exhaustive: false,
        }
    }

    pub fn epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn exhaustive(mut self, on: bool) -> Self {
        self.exhaustive = on;
        self
    }

    pub fn max_expansions(mut self, budget: usize) -> Self {
        self.max_expansions = Some(budget);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.ec != EquivalenceClass::of(self.measure.kind) {
            return Err(Error::Config(format!("{:?} does not match measure {}", self.ec, self.measure)));
        }
        Ok(())
    }

    pub fn budget(&self, universe_size: usize) -> usize {
        self.max_expansions.unwrap_or(10 * universe_size * universe_size)
    }

    /// EC3 with `2n > |V|` has no partition meeting the cardinality target;
    /// the measure then ranks like ENT and is searched as probability balance.
    fn effective_ec(&self, universe_size: usize) -> EquivalenceClass {
        if self.ec == EquivalenceClass::Ec3 && 2 * self.n as usize > universe_size {
            EquivalenceClass::Ec1
        } else {
            self.ec
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchNode {
    pub part: Partition,
    pub g: f64,
    /// Index of the parent in [`SearchTrace::expanded`].
    pub parent: Option<usize>,
    pub moved: Option<HypothesisId>,
    /// Probability mass moved from `V-` to `V+` by this step.
    pub moved_mass: f64,
    pub depth: usize,
    /// Measure value, for discriminating nodes.
    pub value: Option<f64>,
    pub goal: bool,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchTrace {
    pub expanded: Vec<SearchNode>,
    pub backtracks: usize,
    /// Successors discarded by the pruning rule.
    pub pruned: usize,
    pub goal: Option<Partition>,
    /// Best non-excluded discriminating partition seen, by measure value.
    pub best_found: Option<(Partition, f64)>,
    pub budget_exhausted: bool,
}

impl SearchTrace {
    /// The goal, or the best-effort partition when no goal was reached.
    pub fn result(&self) -> Option<Partition> {
        self.goal.or(self.best_found.map(|(p, _)| p))
    }
}

/// Heuristic value of a search node (lower is better).
pub fn heuristic(ec: EquivalenceClass, part: &Partition, dist: &Distribution, config: &SearchConfig) -> f64 {
    let s = PartitionStats::unchecked(part, dist);
    let universe = s.n_total();
    match ec {
        EquivalenceClass::Ec3 => {
            if s.n_minus == 0 {
                return (s.p_plus - 0.5).abs();
            }
            let missing = config.n as f64 - s.n_plus as f64;
            (s.p_plus + missing * (s.p_minus / s.n_minus as f64) - 0.5).abs()
        }
        EquivalenceClass::Ec1 => (s.p_plus - 0.5).abs(),
        EquivalenceClass::Ec2 => s.n_plus.abs_diff(universe / 2) as f64,
        _ => {
            if !part.is_discriminating() {
                return 0.0;
            }
            let v = config.measure.evaluate_stats(&s);
            match config.measure.direction() {
                Direction::Minimize => v,
                Direction::Maximize => -v,
            }
        }
    }
}

struct Search<'a> {
    config: &'a SearchConfig,
    ec: EquivalenceClass,
    dist: &'a Distribution,
    universe: HypothesisSet,
    budget: usize,
    visited: HashSet<HypothesisSet>,
    trace: SearchTrace,
}

impl Search<'_> {
    fn goal_test(&self, s: &PartitionStats) -> bool {
        let balance = (s.p_plus - s.p_minus).abs();
        match self.ec {
            EquivalenceClass::Ec3 => {
                s.n_plus.min(s.n_minus) == self.config.n as usize && balance <= self.config.epsilon
            }
            EquivalenceClass::Ec1 => balance <= self.config.epsilon,
            EquivalenceClass::Ec2 => s.n_plus.abs_diff(s.n_minus) == self.universe.len() % 2,
            _ => false,
        }
    }

    /// Bound on `p(V+) - p(V-)` beyond which no descendant can beat the incumbent.
    fn balance_bound(&self) -> f64 {
        let incumbent = self.trace.best_found.map(|(p, _)| {
            let s = PartitionStats::unchecked(&p, self.dist);
            let eligible = self.ec != EquivalenceClass::Ec3 || s.n_plus.min(s.n_minus) == self.config.n as usize;
            if eligible {
                (s.p_plus - s.p_minus).abs()
            } else {
                f64::INFINITY
            }
        });
        if self.config.exhaustive {
            incumbent.unwrap_or(f64::INFINITY)
        } else {
            self.config.epsilon
        }
    }

    fn prune(&self, part: &Partition) -> bool {
        let s = PartitionStats::unchecked(part, self.dist);
        match self.ec {
            EquivalenceClass::Ec3 => {
                s.n_plus > self.config.n as usize
                    || (self.config.exhaustive && s.p_plus - s.p_minus > self.balance_bound())
            }
            EquivalenceClass::Ec1 => s.p_plus - s.p_minus > self.balance_bound(),
            EquivalenceClass::Ec2 => s.n_plus > self.universe.len().div_ceil(2),
            _ => false,
        }
    }

    fn push(&mut self, part: Partition, parent: Option<usize>, moved: Option<HypothesisId>) -> usize {
        self.visited.insert(part.plus());
        let s = PartitionStats::unchecked(&part, self.dist);
        let excluded = self.config.excluded_goals.contains(&part);
        let mut node = SearchNode {
            part,
            g: heuristic(self.ec, &part, self.dist, self.config),
            parent,
            moved,
            moved_mass: moved.map_or(0.0, |h| self.dist.p(h)),
            depth: parent.map_or(0, |p| self.trace.expanded[p].depth + 1),
            value: None,
            goal: false,
            excluded,
        };
        if part.is_discriminating() {
            let v = self.config.measure.evaluate_stats(&s);
            node.value = Some(v);
            if !excluded {
                let improves = match self.trace.best_found {
                    Some((_, bv)) => self.config.measure.better(v, bv),
                    None => true,
                };
                if improves {
                    self.trace.best_found = Some((part, v));
                }
                if !self.config.exhaustive && self.goal_test(&s) {
                    node.goal = true;
                    self.trace.goal = Some(part);
                }
            }
        }
        self.trace.expanded.push(node);
        self.trace.expanded.len() - 1
    }

    /// Returns `true` when the search must stop.
    fn visit(&mut self, idx: usize) -> bool {
        let part = self.trace.expanded[idx].part;
        let mut children: Vec<(f64, HypothesisId, Partition)> = Vec::new();
        for h in part.minus().iter() {
            let mut plus = part.plus();
            plus.insert(h);
            if self.visited.contains(&plus) {
                continue;
            }
            let child = Partition::split(self.universe, plus).expect("subset of the universe");
            if self.prune(&child) {
                self.trace.pruned += 1;
                continue;
            }
            children.push((heuristic(self.ec, &child, self.dist, self.config), h, child));
        }
        children.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, h, child) in children {
            if self.visited.contains(&child.plus()) {
                continue;
            }
            // The incumbent may have tightened since the children were generated.
            if self.prune(&child) {
                self.trace.pruned += 1;
                continue;
            }
            if self.trace.expanded.len() >= self.budget {
                self.trace.budget_exhausted = true;
                return true;
            }
            let cidx = self.push(child, Some(idx), Some(h));
            if self.trace.goal.is_some() {
                return true;
            }
            if self.visit(cidx) {
                return true;
            }
            self.trace.backtracks += 1;
        }
        false
    }
}

/// Depth-first best-successor search for a strong discriminating partition.
pub fn synthesize_partition(config: &SearchConfig, dist: &Distribution) -> Result<SearchTrace> {
    config.validate()?;
    let universe = dist.support();
    if universe.len() < 2 {
        return Err(Error::DegenerateUniverse(format!("{} hypotheses; need at least 2", universe.len())));
    }
    let mut search = Search {
        config,
        ec: config.effective_ec(universe.len()),
        dist,
        universe,
        budget: config.budget(universe.len()).max(1),
        visited: HashSet::new(),
        trace: SearchTrace {
            expanded: Vec::new(),
            backtracks: 0,
            pruned: 0,
            goal: None,
            best_found: None,
            budget_exhausted: false,
        },
    };
    let start = Partition::split(universe, HypothesisSet::EMPTY)?;
    let root = search.push(start, None, None);
    search.visit(root);
    let mut trace = search.trace;
    if config.exhaustive {
        // Report the optimum as goal when it passes the class's goal test
        // (classes without a goal test accept it unconditionally).
        if let Some((best, _)) = trace.best_found {
            let s = PartitionStats::unchecked(&best, dist);
            let probe = Search {
                config,
                ec: config.effective_ec(universe.len()),
                dist,
                universe,
                budget: 0,
                visited: HashSet::new(),
                trace: trace.clone(),
            };
            let accept = config.ec.has_direct_construction() || probe.goal_test(&s);
            if accept {
                trace.goal = Some(best);
                if let Some(node) = trace.expanded.iter_mut().find(|n| n.part == best) {
                    node.goal = true;
                }
            }
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectOptimum {
    pub partition: Partition,
    pub value: f64,
    /// Set when the class's primary requirement cannot be met.
    pub infeasible: bool,
}

/// Builds the optimum for measures whose optimal strong queries are determined
/// by a probability ordering of the hypotheses.
pub fn direct_optimum(measure: &MeasureSpec, dist: &Distribution) -> Result<DirectOptimum> {
    let universe = dist.support();
    if universe.len() < 2 {
        return Err(Error::DegenerateUniverse(format!("{} hypotheses; need at least 2", universe.len())));
    }
    let ec = EquivalenceClass::of(measure.kind);
    let eval = |part: &Partition| measure.evaluate(part, dist);
    match ec {
        EquivalenceClass::Ec6 => {
            let top = HypothesisSet::singleton(dist.argmax());
            let partition = Partition::split(universe, top)?;
            Ok(DirectOptimum { value: eval(&partition)?, partition, infeasible: false })
        }
        EquivalenceClass::Ec7 => {
            let mut ascending: Vec<HypothesisId> = universe.iter().collect();
            ascending.sort_by(|a, b| dist.p(*a).total_cmp(&dist.p(*b)).then(a.cmp(b)));
            let mut side = HypothesisSet::EMPTY;
            let mut mass = 0.0;
            for &h in &ascending {
                if mass + dist.p(h) >= 0.5 {
                    break;
                }
                mass += dist.p(h);
                side.insert(h);
            }
            let infeasible = side.is_empty();
            if infeasible {
                side.insert(ascending[0]);
            }
            let mut partition = Partition::split(universe, side)?;
            let mut value = eval(&partition)?;
            if universe.len() <= DEFAULT_CAP {
                let (best, best_value) = brute_force_optimum(measure, universe, dist, EnumOptions::strong())?;
                if measure.better(best_value, value) {
                    partition = best;
                    value = best_value;
                }
            }
            Ok(DirectOptimum { partition, value, infeasible })
        }
        EquivalenceClass::Ec4 | EquivalenceClass::Ec5 => {
            let mut descending: Vec<HypothesisId> = universe.iter().collect();
            descending.sort_by(|a, b| dist.p(*b).total_cmp(&dist.p(*a)).then(a.cmp(b)));
            let mut best: Option<(Partition, f64)> = None;
            let mut top = HypothesisSet::EMPTY;
            for &h in &descending[..descending.len() - 1] {
                top.insert(h);
                let cand = Partition::split(universe, top)?;
                for part in [cand, cand.mirror()] {
                    let v = eval(&part)?;
                    if best.is_none_or(|(_, bv)| measure.better(v, bv)) {
                        best = Some((part, v));
                    }
                }
            }
            let (partition, value) = best.expect("at least two hypotheses");
            Ok(DirectOptimum { partition, value, infeasible: false })
        }
        other => Err(Error::Config(format!("{other:?} has no direct construction; use the search"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub synthesized: Partition,
    pub synthesized_value: f64,
    pub optimum: Partition,
    pub optimum_value: f64,
    /// How much worse the synthesized value is; zero or positive.
    pub gap: f64,
    pub expansions: usize,
}

/// Compares the synthesized partition with the brute-force optimum over strong DPs.
pub fn verify_against_bruteforce(config: &SearchConfig, dist: &Distribution) -> Result<GapReport> {
    let (synthesized, expansions) = if config.ec.has_direct_construction() {
        (direct_optimum(&config.measure, dist)?.partition, 0)
    } else {
        let trace = synthesize_partition(config, dist)?;
        let part = trace.result().ok_or_else(|| Error::Config("search produced no partition".into()))?;
        (part, trace.expanded.len())
    };
    let synthesized_value = config.measure.evaluate(&synthesized, dist)?;
    let (optimum, optimum_value) = brute_force_optimum(&config.measure, dist.support(), dist, EnumOptions::strong())?;
    let gap = match config.measure.direction() {
        Direction::Minimize => synthesized_value - optimum_value,
        Direction::Maximize => optimum_value - synthesized_value,
    };
    Ok(GapReport { synthesized, synthesized_value, optimum, optimum_value, gap, expansions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fig_dist() -> Distribution {
        Distribution::new(vec![0.41, 0.15, 0.07, 0.37]).unwrap()
    }

    fn set(ids: &[usize]) -> HypothesisSet {
        ids.iter().map(|&i| HypothesisId(i - 1)).collect()
    }

    #[test]
    fn rio_heuristic_values() {
        let cfg = SearchConfig::new(MeasureSpec::rio(2));
        let u = HypothesisSet::first(4).unwrap();
        let p1 = Partition::split(u, set(&[2])).unwrap();
        let p2 = Partition::split(u, set(&[2, 4])).unwrap();
        assert!((heuristic(EquivalenceClass::Ec3, &p1, &fig_dist(), &cfg) - 0.0666667).abs() < 1e-6);
        assert!((heuristic(EquivalenceClass::Ec3, &p2, &fig_dist(), &cfg) - 0.02).abs() < 1e-9);
        let balanced = Distribution::uniform(2).unwrap();
        let half = Partition::split(balanced.support(), set(&[1])).unwrap();
        assert_eq!(heuristic(EquivalenceClass::Ec1, &half, &balanced, &cfg), 0.0);
    }

    #[test]
    fn rio_search_descends_directly() {
        let trace = synthesize_partition(&SearchConfig::new(MeasureSpec::rio(2)), &fig_dist()).unwrap();
        let plus: Vec<_> = trace.expanded.iter().map(|n| n.part.plus()).collect();
        assert_eq!(plus, vec![HypothesisSet::EMPTY, set(&[2]), set(&[2, 4])]);
        assert_eq!(trace.backtracks, 0);
        assert_eq!(trace.goal, Some(Partition::split(HypothesisSet::first(4).unwrap(), set(&[2, 4])).unwrap()));
        assert!((trace.expanded[1].moved_mass - 0.15).abs() < 1e-12);
        assert!((trace.expanded[2].moved_mass - 0.37).abs() < 1e-12);
    }

    #[test]
    fn excluded_goal_forces_continuation() {
        let u = HypothesisSet::first(4).unwrap();
        let mut cfg = SearchConfig::new(MeasureSpec::rio(2));
        cfg.excluded_goals.insert(Partition::split(u, set(&[2, 4])).unwrap());
        let trace = synthesize_partition(&cfg, &fig_dist()).unwrap();
        assert_eq!(trace.goal, Some(Partition::split(u, set(&[1, 3])).unwrap()));
        assert!(trace.backtracks > 0);
    }

    #[test]
    fn cardinality_search_on_uniform_four() {
        let trace = synthesize_partition(
            &SearchConfig::new(MeasureSpec::plain(MeasureKind::Spl)),
            &Distribution::uniform(4).unwrap(),
        )
        .unwrap();
        let goal = trace.goal.unwrap();
        assert_eq!(goal.plus().len(), 2);
        assert_eq!(
            MeasureSpec::plain(MeasureKind::Spl).evaluate(&goal, &Distribution::uniform(4).unwrap()).unwrap(),
            0.0
        );
    }

    #[test]
    fn direct_constructions() {
        let mps = direct_optimum(&MeasureSpec::plain(MeasureKind::Mps), &fig_dist()).unwrap();
        assert!((mps.value - 0.41).abs() < 1e-12);
        assert_eq!(mps.partition.plus(), set(&[1]));

        let bme = direct_optimum(&MeasureSpec::plain(MeasureKind::Bme), &fig_dist()).unwrap();
        assert_eq!(bme.partition.plus(), set(&[2, 3]));
        assert_eq!(bme.value, 2.0);
        assert!(!bme.infeasible);
        // Exhaustive subset scan: largest side with mass below one half.
        let best =
            set(&[1, 2, 3, 4]).subsets().filter(|s| fig_dist().mass(*s) < 0.5 && !s.is_empty()).map(|s| s.len()).max();
        assert_eq!(best, Some(2));

        let tie = direct_optimum(&MeasureSpec::plain(MeasureKind::Bme), &Distribution::uniform(2).unwrap()).unwrap();
        assert!(tie.infeasible);
        assert!(direct_optimum(&MeasureSpec::plain(MeasureKind::Ent), &fig_dist()).is_err());
    }

    #[test]
    fn kl_candidate_scan_matches_brute_force_on_small_universes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let d = Distribution::random(4, 0.01, &mut rng).unwrap();
            for m in [MeasureSpec::plain(MeasureKind::Kl), MeasureSpec::plain(MeasureKind::EmcB)] {
                let gap = verify_against_bruteforce(&SearchConfig::new(m), &d).unwrap();
                assert!(gap.gap.abs() < 1e-9, "{m}: {gap:?}");
            }
        }
    }

    #[test]
    fn degenerate_universe_is_an_error() {
        let d = Distribution::new(vec![1.0]).unwrap();
        assert!(matches!(
            synthesize_partition(&SearchConfig::new(MeasureSpec::plain(MeasureKind::Ent)), &d),
            Err(Error::DegenerateUniverse(_))
        ));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = SearchConfig::new(MeasureSpec::rio(2)).epsilon(0.0);
        assert!(matches!(synthesize_partition(&cfg, &fig_dist()), Err(Error::Config(_))));
    }

    #[test]
    fn budget_limits_expansions() {
        let cfg = SearchConfig::new(MeasureSpec::plain(MeasureKind::Kl)).max_expansions(3);
        let trace = synthesize_partition(&cfg, &fig_dist()).unwrap();
        assert_eq!(trace.expanded.len(), 3);
        assert!(trace.budget_exhausted);
    }
}
