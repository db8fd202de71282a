//! The discrimination preference order (DPO) on queries and empirical
//! checkers relating measures to it.
//!
//! `q ≺_DPO q2` holds when, under some bijection between the answers of the
//! two queries, each answer to `q` eliminates at least what the matched answer
//! to `q2` eliminates, and strictly more for one of them. Equivalently `q2`
//! arises from `q` by moving a nonempty set `X` of predicting hypotheses into
//! `V0`, possibly swapping the two predicting blocks.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::MeasureSpec;
use crate::space::{Answer, Distribution, HypothesisSet, Partition, PartitionStats};

/// Cap on stored counterexamples per report; counts are always complete.
pub const MAX_WITNESSES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DpoWitness {
    /// Hypotheses moved into `V0`.
    pub transfer: HypothesisSet,
    /// Whether the predicting blocks were interchanged.
    pub swapped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DpoVerdict {
    pub preferred: bool,
    pub witness: Option<DpoWitness>,
}

impl DpoVerdict {
    const NO: DpoVerdict = DpoVerdict { preferred: false, witness: None };
}

fn same_universe(q: &Partition, q2: &Partition) -> Result<()> {
    if q.universe() != q2.universe() {
        return Err(Error::UniverseMismatch { expected: q.universe().to_string(), actual: q2.universe().to_string() });
    }
    Ok(())
}

/// Both inclusions hold and at least one is strict.
fn dominates(a: (HypothesisSet, HypothesisSet), b: (HypothesisSet, HypothesisSet)) -> bool {
    b.0.is_subset(a.0) && b.1.is_subset(a.1) && (a.0 != b.0 || a.1 != b.1)
}

/// Checks the DPO by comparing eliminated sets under both answer bijections.
pub fn dpo_preferred_direct(q: &Partition, q2: &Partition) -> Result<DpoVerdict> {
    same_universe(q, q2)?;
    let mine = (q.eliminated(Answer::Yes), q.eliminated(Answer::No));
    let identity = (q2.eliminated(Answer::Yes), q2.eliminated(Answer::No));
    let swapped = (identity.1, identity.0);
    let swap = if dominates(mine, identity) {
        false
    } else if dominates(mine, swapped) {
        true
    } else {
        return Ok(DpoVerdict::NO);
    };
    Ok(DpoVerdict { preferred: true, witness: Some(DpoWitness { transfer: q2.zero() - q.zero(), swapped: swap }) })
}

/// Checks the DPO constructively: the only candidate transfer set is
/// `V0(q2) \ V0(q)`, so the test is a handful of set operations.
///
/// The transfer set may be all of `V+ ∪ V-`, making `q2` entirely
/// non-predicting; that case is DPO-dispreferred to any query eliminating
/// something and the direct check agrees.
pub fn dpo_preferred_constructive(q: &Partition, q2: &Partition) -> Result<DpoVerdict> {
    same_universe(q, q2)?;
    if !q.zero().is_subset(q2.zero()) {
        return Ok(DpoVerdict::NO);
    }
    let transfer = q2.zero() - q.zero();
    if transfer.is_empty() || !transfer.is_subset(q.predicting()) {
        return Ok(DpoVerdict::NO);
    }
    let (plus, minus) = (q.plus() - transfer, q.minus() - transfer);
    let swapped = if q2.plus() == plus && q2.minus() == minus {
        false
    } else if q2.plus() == minus && q2.minus() == plus {
        true
    } else {
        return Ok(DpoVerdict::NO);
    };
    Ok(DpoVerdict { preferred: true, witness: Some(DpoWitness { transfer, swapped }) })
}

/// Every partition DPO-dispreferred to the discriminating partition `q`.
pub fn dpo_dispreferred_all(q: &Partition) -> Result<Vec<Partition>> {
    if !q.is_discriminating() {
        return Err(Error::NotDiscriminating(q.to_string()));
    }
    let mut out = Vec::new();
    for transfer in q.predicting().subsets().skip(1) {
        let zero = q.zero() | transfer;
        let (plus, minus) = (q.plus() - transfer, q.minus() - transfer);
        let keep = Partition::new(plus, minus, zero)?;
        out.push(keep);
        if plus != minus {
            out.push(keep.mirror());
        }
    }
    Ok(out)
}

/// Ordered index pairs `(i, j)` with `parts[i] ≺_DPO parts[j]`; depends only
/// on the partitions, so it can be reused across measures and distributions.
#[derive(Debug, Clone)]
pub struct DpoPairs {
    pairs: Vec<(usize, usize)>,
    total_pairs: usize,
}

impl DpoPairs {
    pub fn new(parts: &[Partition]) -> Result<Self> {
        if let Some(first) = parts.first() {
            let universe = first.universe();
            for p in parts {
                p.check_universe(universe)?;
            }
        }
        let pairs: Vec<(usize, usize)> = (0..parts.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                (0..parts.len()).filter_map(move |j| {
                    let v = dpo_preferred_constructive(&parts[i], &parts[j]).expect("universes checked");
                    v.preferred.then_some((i, j))
                })
            })
            .collect();
        Ok(DpoPairs { pairs, total_pairs: parts.len() * parts.len().saturating_sub(1) })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn total_pairs(&self) -> usize {
        self.total_pairs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ComplianceMode {
    Satisfies,
    ConsistentOnly,
    Inconsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    /// DPO-preferred query is not strictly preferred by the measure.
    Unsatisfied,
    /// The measure strictly prefers the DPO-dispreferred query.
    Inverted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub preferred: Partition,
    pub dispreferred: Partition,
    pub values: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceReport {
    pub measure: String,
    pub mode: ComplianceMode,
    /// DPO-related ordered pairs examined.
    pub pairs_checked: usize,
    pub unsatisfied: usize,
    pub inverted: usize,
    pub violations: Vec<Violation>,
}

impl ComplianceReport {
    fn empty(m: &MeasureSpec) -> Self {
        ComplianceReport {
            measure: m.label(),
            mode: ComplianceMode::Satisfies,
            pairs_checked: 0,
            unsatisfied: 0,
            inverted: 0,
            violations: Vec::new(),
        }
    }

    /// Folds another report (e.g. from a further distribution) into this one.
    pub fn merge(&mut self, other: ComplianceReport) {
        self.pairs_checked += other.pairs_checked;
        self.unsatisfied += other.unsatisfied;
        self.inverted += other.inverted;
        let room = MAX_WITNESSES.saturating_sub(self.violations.len());
        self.violations.extend(other.violations.into_iter().take(room));
        self.mode = self.mode.max(other.mode);
    }

    pub fn satisfaction_violations(&self) -> usize {
        self.unsatisfied + self.inverted
    }

    pub fn consistency_violations(&self) -> usize {
        self.inverted
    }
}

fn values(m: &MeasureSpec, parts: &[Partition], dist: &Distribution) -> Result<Vec<f64>> {
    parts.iter().map(|p| m.evaluate(p, dist)).collect()
}

pub fn check_compliance(m: &MeasureSpec, parts: &[Partition], dist: &Distribution) -> Result<ComplianceReport> {
    check_compliance_with(m, parts, &DpoPairs::new(parts)?, dist)
}

/// Compliance over precomputed DPO pairs of `parts`.
pub fn check_compliance_with(
    m: &MeasureSpec,
    parts: &[Partition],
    dpo: &DpoPairs,
    dist: &Distribution,
) -> Result<ComplianceReport> {
    let vals = values(m, parts, dist)?;
    let mut report = ComplianceReport::empty(m);
    for &(i, j) in dpo.pairs() {
        report.pairs_checked += 1;
        let kind = if m.better(vals[i], vals[j]) {
            continue;
        } else if m.better(vals[j], vals[i]) {
            report.inverted += 1;
            ViolationKind::Inverted
        } else {
            report.unsatisfied += 1;
            ViolationKind::Unsatisfied
        };
        if report.violations.len() < MAX_WITNESSES {
            report.violations.push(Violation {
                kind,
                preferred: parts[i],
                dispreferred: parts[j],
                values: (vals[i], vals[j]),
            });
        }
    }
    report.mode = if report.inverted > 0 {
        ComplianceMode::Inconsistent
    } else if report.unsatisfied > 0 {
        ComplianceMode::ConsistentOnly
    } else {
        ComplianceMode::Satisfies
    };
    // Satisfaction implies consistency.
    debug_assert!(report.mode != ComplianceMode::Satisfies || report.inverted == 0);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    pub pairs_checked: usize,
    /// First ordered pair on which the strict preferences differ.
    pub witness: Option<(Partition, Partition)>,
}

/// Whether two measures induce the same strict preference on `parts`.
pub fn check_equivalence(
    m1: &MeasureSpec,
    m2: &MeasureSpec,
    parts: &[Partition],
    dist: &Distribution,
) -> Result<EquivalenceReport> {
    let v1 = values(m1, parts, dist)?;
    let v2 = values(m2, parts, dist)?;
    let mut pairs_checked = 0;
    for i in 0..parts.len() {
        for j in 0..parts.len() {
            if i == j {
                continue;
            }
            pairs_checked += 1;
            if m1.better(v1[i], v1[j]) != m2.better(v2[i], v2[j]) {
                return Ok(EquivalenceReport { equivalent: false, pairs_checked, witness: Some((parts[i], parts[j])) });
            }
        }
    }
    Ok(EquivalenceReport { equivalent: true, pairs_checked, witness: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Superiority {
    FirstSuperior,
    SecondSuperior,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEvidence {
    pub dist_index: usize,
    pub preferred: Partition,
    pub dispreferred: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperiorityVerdict {
    pub value: Superiority,
    /// DPO pairs honored by the first measure but not the second.
    pub first_only: usize,
    /// DPO pairs honored by the second measure but not the first.
    pub second_only: usize,
    pub pairs_checked: usize,
    pub first_evidence: Vec<PairEvidence>,
    pub second_evidence: Vec<PairEvidence>,
}

/// Superiority of two measures over the set `parts` and the given distributions.
pub fn check_superiority(
    m1: &MeasureSpec,
    m2: &MeasureSpec,
    parts: &[Partition],
    dists: &[Distribution],
) -> Result<SuperiorityVerdict> {
    let dpo = DpoPairs::new(parts)?;
    let mut verdict = SuperiorityVerdict {
        value: Superiority::Neither,
        first_only: 0,
        second_only: 0,
        pairs_checked: 0,
        first_evidence: Vec::new(),
        second_evidence: Vec::new(),
    };
    for (d, dist) in dists.iter().enumerate() {
        let v1 = values(m1, parts, dist)?;
        let v2 = values(m2, parts, dist)?;
        for &(i, j) in dpo.pairs() {
            verdict.pairs_checked += 1;
            let by1 = m1.better(v1[i], v1[j]);
            let by2 = m2.better(v2[i], v2[j]);
            let evidence = || PairEvidence { dist_index: d, preferred: parts[i], dispreferred: parts[j] };
            if by1 && !by2 {
                verdict.first_only += 1;
                if verdict.first_evidence.len() < MAX_WITNESSES {
                    verdict.first_evidence.push(evidence());
                }
            } else if by2 && !by1 {
                verdict.second_only += 1;
                if verdict.second_evidence.len() < MAX_WITNESSES {
                    verdict.second_evidence.push(evidence());
                }
            }
        }
    }
    verdict.value = match (verdict.first_only > 0, verdict.second_only > 0) {
        (true, false) => Superiority::FirstSuperior,
        (false, true) => Superiority::SecondSuperior,
        _ => Superiority::Neither,
    };
    Ok(verdict)
}

/// Smallest answer probability over the partitions; a lower bound `t` on
/// this value is what the ENT_z threshold needs.
pub fn min_answer_probability(parts: &[Partition], dist: &Distribution) -> Result<f64> {
    let mut min = f64::INFINITY;
    for p in parts {
        let s = PartitionStats::new(p, dist)?;
        min = min.min(s.p_yes.min(s.p_no));
    }
    Ok(min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::{all_dps, all_partitions, EnumOptions};
    use crate::space::HypothesisId;

    fn set(ids: &[usize]) -> HypothesisSet {
        ids.iter().map(|&i| HypothesisId(i - 1)).collect()
    }

    fn q(plus: &[usize], minus: &[usize], zero: &[usize]) -> Partition {
        let n = plus.len() + minus.len() + zero.len();
        Partition::over(HypothesisSet::first(n).unwrap(), set(plus), set(minus), set(zero)).unwrap()
    }

    fn example() -> [Partition; 4] {
        [q(&[1, 2], &[3, 4, 5], &[]), q(&[1, 2], &[3, 4], &[5]), q(&[4], &[1, 2, 3, 5], &[]), q(&[1, 2, 5], &[4], &[3])]
    }

    #[test]
    fn running_example_relations() {
        let [q1, q2, q3, q4] = example();
        assert!(dpo_preferred_direct(&q1, &q2).unwrap().preferred);
        assert!(dpo_preferred_direct(&q3, &q4).unwrap().preferred);
        assert!(!dpo_preferred_direct(&q2, &q3).unwrap().preferred);
        assert!(!dpo_preferred_direct(&q3, &q2).unwrap().preferred);
        assert!(!dpo_preferred_direct(&q1, &q1).unwrap().preferred);
    }

    #[test]
    fn constructive_witness() {
        let [q1, q2, q3, q4] = example();
        let v = dpo_preferred_constructive(&q3, &q4).unwrap();
        assert_eq!(v.witness, Some(DpoWitness { transfer: set(&[3]), swapped: true }));
        assert!(!dpo_preferred_constructive(&q2, &q3).unwrap().preferred);
        assert!(!dpo_preferred_constructive(&q1, &q1).unwrap().preferred);
        assert_eq!(dpo_preferred_direct(&q3, &q4).unwrap(), v);
    }

    #[test]
    fn checkers_agree_exhaustively_up_to_four() {
        for n in 1..=4 {
            let parts: Vec<_> = all_partitions(HypothesisSet::first(n).unwrap(), 12).unwrap().collect();
            for a in &parts {
                for b in &parts {
                    assert_eq!(dpo_preferred_direct(a, b).unwrap(), dpo_preferred_constructive(a, b).unwrap());
                }
            }
        }
    }

    #[test]
    fn dispreferred_generator_matches_filter() {
        let q1 = example()[0];
        let gen = dpo_dispreferred_all(&q1).unwrap();
        let oracle: Vec<_> = all_partitions(q1.universe(), 12)
            .unwrap()
            .filter(|p| dpo_preferred_direct(&q1, p).unwrap().preferred)
            .collect();
        assert_eq!(gen.len(), oracle.len());
        assert_eq!(gen.len(), 61);
        for p in &gen {
            assert!(oracle.contains(p));
            assert!(q1.zero().is_proper_subset(p.zero()));
        }

        let ab = q(&[1], &[2], &[]);
        let gen = dpo_dispreferred_all(&ab).unwrap();
        let oracle = all_partitions(ab.universe(), 12)
            .unwrap()
            .filter(|p| dpo_preferred_direct(&ab, p).unwrap().preferred)
            .count();
        assert_eq!(gen.len(), oracle);
        assert!(gen.contains(&q(&[], &[2], &[1])));
        assert!(dpo_dispreferred_all(&q(&[], &[1, 2], &[])).is_err());
    }

    #[test]
    fn lc_is_inconsistent_on_running_example() {
        let p1 = Distribution::new(vec![0.35, 0.05, 0.15, 0.25, 0.2]).unwrap();
        let report = check_compliance(&"LC".parse().unwrap(), &example()[..2], &p1).unwrap();
        assert_eq!(report.mode, ComplianceMode::Inconsistent);
        assert_eq!(report.violations[0].preferred, example()[0]);
        assert_eq!(report.violations[0].dispreferred, example()[1]);
    }

    #[test]
    fn reflexive_equivalence_and_irreflexive_superiority() {
        let parts: Vec<_> = all_dps(HypothesisSet::first(3).unwrap(), EnumOptions::default()).unwrap().collect();
        let d = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let m: MeasureSpec = "KL".parse().unwrap();
        assert!(check_equivalence(&m, &m, &parts, &d).unwrap().equivalent);
        assert_eq!(check_superiority(&m, &m, &parts, &[d]).unwrap().value, Superiority::Neither);
    }
}
