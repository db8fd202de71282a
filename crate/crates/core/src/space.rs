//! Hypotheses, query partitions, answer probabilities and Bayesian
//! version-space updates.
//!
//! A query is represented by the partition it induces on the known
//! hypotheses `V`: those predicting answer 1 (`plus`), answer 0 (`minus`),
//! and neither (`zero`). Hypotheses are opaque indices below
//! [`MAX_HYPOTHESES`]; sets of them are 64-bit masks.

use std::fmt;
use std::ops::{BitAnd, BitOr, Not, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported universe.
pub const MAX_HYPOTHESES: usize = 64;

/// Input distributions must sum to one within this tolerance.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HypothesisId(pub usize);

impl fmt::Display for HypothesisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0 + 1)
    }
}

/// A set of hypotheses stored as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HypothesisSet(u64);

impl HypothesisSet {
    pub const EMPTY: HypothesisSet = HypothesisSet(0);

    pub fn from_bits(bits: u64) -> Self {
        HypothesisSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// The first `n` hypotheses, `{0, .., n-1}`.
    pub fn first(n: usize) -> Result<Self> {
        match n {
            0 => Ok(Self::EMPTY),
            n if n < MAX_HYPOTHESES => Ok(HypothesisSet((1u64 << n) - 1)),
            MAX_HYPOTHESES => Ok(HypothesisSet(u64::MAX)),
            n => Err(Error::UniverseTooLarge(n)),
        }
    }

    pub fn singleton(h: HypothesisId) -> Self {
        debug_assert!(h.0 < MAX_HYPOTHESES);
        HypothesisSet(1u64 << h.0)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, h: HypothesisId) -> bool {
        h.0 < MAX_HYPOTHESES && self.0 & (1u64 << h.0) != 0
    }

    pub fn insert(&mut self, h: HypothesisId) {
        self.0 |= 1u64 << h.0;
    }

    pub fn remove(&mut self, h: HypothesisId) {
        self.0 &= !(1u64 << h.0);
    }

    pub fn is_subset(self, other: HypothesisSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_proper_subset(self, other: HypothesisSet) -> bool {
        self.is_subset(other) && self != other
    }

    pub fn is_disjoint(self, other: HypothesisSet) -> bool {
        self.0 & other.0 == 0
    }

    /// Smallest member, if any.
    pub fn min(self) -> Option<HypothesisId> {
        (self.0 != 0).then(|| HypothesisId(self.0.trailing_zeros() as usize))
    }

    /// Members in ascending order.
    pub fn iter(self) -> impl Iterator<Item = HypothesisId> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(HypothesisId(i))
        })
    }

    /// Every subset of `self`, in ascending order of the induced mask.
    pub fn subsets(self) -> impl Iterator<Item = HypothesisSet> {
        // Carry-rippling trick: enumerates submasks of `self` in increasing order.
        let full = self.0;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some((cur.wrapping_sub(full)) & full) };
            Some(HypothesisSet(cur))
        })
    }
}

impl BitOr for HypothesisSet {
    type Output = HypothesisSet;
    fn bitor(self, rhs: Self) -> Self {
        HypothesisSet(self.0 | rhs.0)
    }
}

impl BitAnd for HypothesisSet {
    type Output = HypothesisSet;
    fn bitand(self, rhs: Self) -> Self {
        HypothesisSet(self.0 & rhs.0)
    }
}

impl Sub for HypothesisSet {
    type Output = HypothesisSet;
    fn sub(self, rhs: Self) -> Self {
        HypothesisSet(self.0 & !rhs.0)
    }
}

impl Not for HypothesisSet {
    type Output = HypothesisSet;
    fn not(self) -> Self {
        HypothesisSet(!self.0)
    }
}

impl FromIterator<HypothesisId> for HypothesisSet {
    fn from_iter<I: IntoIterator<Item = HypothesisId>>(iter: I) -> Self {
        let mut s = HypothesisSet::EMPTY;
        for h in iter {
            s.insert(h);
        }
        s
    }
}

impl fmt::Display for HypothesisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, h) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{h}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for HypothesisSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for HypothesisSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let ids = Vec::<HypothesisId>::deserialize(d)?;
        if let Some(bad) = ids.iter().find(|h| h.0 >= MAX_HYPOTHESES) {
            return Err(serde::de::Error::custom(format!("hypothesis index {} out of range", bad.0)));
        }
        Ok(ids.into_iter().collect())
    }
}

/// Oracle answer to a binary query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Answer {
    No = 0,
    Yes = 1,
}

impl Answer {
    pub const BOTH: [Answer; 2] = [Answer::Yes, Answer::No];

    pub fn flip(self) -> Answer {
        match self {
            Answer::Yes => Answer::No,
            Answer::No => Answer::Yes,
        }
    }
}

impl From<Answer> for u8 {
    fn from(a: Answer) -> u8 {
        a as u8
    }
}

impl TryFrom<u8> for Answer {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Answer::No),
            1 => Ok(Answer::Yes),
            v => Err(format!("answer must be 0 or 1, got {v}")),
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartitionClass {
    NonDiscriminating,
    StrongDq,
    WeakDq,
}

/// The partition `<V+, V-, V0>` a query induces on the known hypotheses.
///
/// Blocks are pairwise disjoint; the universe is their union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Partition {
    plus: HypothesisSet,
    minus: HypothesisSet,
    zero: HypothesisSet,
}

impl Partition {
    pub fn new(plus: HypothesisSet, minus: HypothesisSet, zero: HypothesisSet) -> Result<Self> {
        let overlap = (plus & minus) | (plus & zero) | (minus & zero);
        if let Some(h) = overlap.min() {
            return Err(Error::Overlap(h));
        }
        Ok(Partition { plus, minus, zero })
    }

    /// Builds a partition that must cover exactly `universe`.
    pub fn over(
        universe: HypothesisSet,
        plus: HypothesisSet,
        minus: HypothesisSet,
        zero: HypothesisSet,
    ) -> Result<Self> {
        let p = Partition::new(plus, minus, zero)?;
        p.check_universe(universe)?;
        Ok(p)
    }

    /// Strong bipartition of `universe` with the given positive side.
    pub fn split(universe: HypothesisSet, plus: HypothesisSet) -> Result<Self> {
        Partition::over(universe, plus, universe - plus, HypothesisSet::EMPTY)
    }

    pub fn check_universe(&self, universe: HypothesisSet) -> Result<()> {
        let covered = self.universe();
        if let Some(h) = (covered - universe).min() {
            return Err(Error::Foreign(h));
        }
        if let Some(h) = (universe - covered).min() {
            return Err(Error::Uncovered(h));
        }
        Ok(())
    }

    pub fn plus(&self) -> HypothesisSet {
        self.plus
    }

    pub fn minus(&self) -> HypothesisSet {
        self.minus
    }

    pub fn zero(&self) -> HypothesisSet {
        self.zero
    }

    pub fn universe(&self) -> HypothesisSet {
        self.plus | self.minus | self.zero
    }

    /// Hypotheses predicting some answer (`V+ ∪ V-`).
    pub fn predicting(&self) -> HypothesisSet {
        self.plus | self.minus
    }

    pub fn classify(&self) -> PartitionClass {
        if self.plus.is_empty() || self.minus.is_empty() {
            PartitionClass::NonDiscriminating
        } else if self.zero.is_empty() {
            PartitionClass::StrongDq
        } else {
            PartitionClass::WeakDq
        }
    }

    pub fn is_discriminating(&self) -> bool {
        !self.plus.is_empty() && !self.minus.is_empty()
    }

    pub fn is_strong(&self) -> bool {
        self.is_discriminating() && self.zero.is_empty()
    }

    /// Swaps the roles of the positive and negative blocks.
    pub fn mirror(&self) -> Partition {
        Partition { plus: self.minus, minus: self.plus, zero: self.zero }
    }

    /// Projects the partition onto the surviving hypotheses.
    pub fn restrict(&self, survivors: HypothesisSet) -> Partition {
        Partition { plus: self.plus & survivors, minus: self.minus & survivors, zero: self.zero & survivors }
    }

    /// Hypotheses eliminated when the query is answered with `a`.
    pub fn eliminated(&self, a: Answer) -> HypothesisSet {
        match a {
            Answer::Yes => self.minus,
            Answer::No => self.plus,
        }
    }

    /// Block the hypothesis belongs to as a ternary digit: 0 = plus,
    /// 1 = minus, 2 = zero.
    pub fn block_of(&self, h: HypothesisId) -> Option<u8> {
        if self.plus.contains(h) {
            Some(0)
        } else if self.minus.contains(h) {
            Some(1)
        } else if self.zero.contains(h) {
            Some(2)
        } else {
            None
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.plus, self.minus, self.zero)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            plus: HypothesisSet,
            minus: HypothesisSet,
            #[serde(default)]
            zero: HypothesisSet,
        }
        let raw = Raw::deserialize(d)?;
        Partition::new(raw.plus, raw.minus, raw.zero).map_err(serde::de::Error::custom)
    }
}

/// Strictly positive probability mass over a set of hypotheses, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    weights: Vec<f64>,
    support: HypothesisSet,
}

impl Distribution {
    /// Distribution over hypotheses `0..weights.len()`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let support = HypothesisSet::first(weights.len())?;
        Distribution::with_support(support, weights)
    }

    /// `weights` is indexed by hypothesis id; entries outside `support` must be zero.
    pub fn with_support(support: HypothesisSet, mut weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Distribution("empty support".into()));
        }
        if weights.len() > MAX_HYPOTHESES {
            return Err(Error::UniverseTooLarge(weights.len()));
        }
        for (i, &w) in weights.iter().enumerate() {
            let h = HypothesisId(i);
            if support.contains(h) {
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::Distribution(format!("p({h}) = {w} must be strictly positive")));
                }
            } else if w != 0.0 {
                return Err(Error::Distribution(format!("p({h}) = {w} outside the support")));
            }
        }
        if let Some(h) = support.iter().find(|h| h.0 >= weights.len()) {
            return Err(Error::Distribution(format!("no weight given for {h}")));
        }
        let total: f64 = support.iter().map(|h| weights[h.0]).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Distribution(format!("weights sum to {total}, expected 1")));
        }
        // Absorb the residual so derived answer probabilities complement exactly.
        for h in support.iter() {
            weights[h.0] /= total;
        }
        Ok(Distribution { weights, support })
    }

    /// Normalizes arbitrary positive weights over `0..weights.len()`.
    pub fn from_unnormalized(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Distribution(format!("weights sum to {total}")));
        }
        Distribution::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Distribution::new(vec![1.0 / n as f64; n])
    }

    /// Independent uniform(floor, 1) weights, normalized.
    pub fn random<R: Rng + ?Sized>(n: usize, floor: f64, rng: &mut R) -> Result<Self> {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(floor..1.0)).collect();
        Distribution::from_unnormalized(&w)
    }

    pub fn support(&self) -> HypothesisSet {
        self.support
    }

    pub fn p(&self, h: HypothesisId) -> f64 {
        self.weights.get(h.0).copied().unwrap_or(0.0)
    }

    /// `p(X)`; hypotheses outside the support contribute nothing.
    pub fn mass(&self, set: HypothesisSet) -> f64 {
        (set & self.support).iter().map(|h| self.weights[h.0]).sum()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Hypothesis with the largest mass; ties go to the lower index.
    pub fn argmax(&self) -> HypothesisId {
        self.support
            .iter()
            .fold(None::<HypothesisId>, |best, h| match best {
                Some(b) if self.p(b) >= self.p(h) => Some(b),
                _ => Some(h),
            })
            .expect("support is never empty")
    }

    fn check_partition(&self, part: &Partition) -> Result<()> {
        if part.universe() != self.support {
            return Err(Error::UniverseMismatch {
                expected: self.support.to_string(),
                actual: part.universe().to_string(),
            });
        }
        Ok(())
    }
}

/// Block sizes, block masses and answer probabilities of a partition under a
/// distribution; everything a query selection measure looks at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionStats {
    pub n_plus: usize,
    pub n_minus: usize,
    pub n_zero: usize,
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_zero: f64,
    /// `p(ans = 1)`
    pub p_yes: f64,
    /// `p(ans = 0)`
    pub p_no: f64,
}

impl PartitionStats {
    pub fn new(part: &Partition, dist: &Distribution) -> Result<Self> {
        dist.check_partition(part)?;
        Ok(Self::unchecked(part, dist))
    }

    pub(crate) fn unchecked(part: &Partition, dist: &Distribution) -> Self {
        let p_plus = dist.mass(part.plus);
        let p_minus = dist.mass(part.minus);
        let p_zero = dist.mass(part.zero);
        PartitionStats {
            n_plus: part.plus.len(),
            n_minus: part.minus.len(),
            n_zero: part.zero.len(),
            p_plus,
            p_minus,
            p_zero,
            p_yes: p_plus + p_zero / 2.0,
            p_no: p_minus + p_zero / 2.0,
        }
    }

    pub fn n_total(&self) -> usize {
        self.n_plus + self.n_minus + self.n_zero
    }

    pub fn answer(&self, a: Answer) -> f64 {
        match a {
            Answer::Yes => self.p_yes,
            Answer::No => self.p_no,
        }
    }
}

pub fn classify_partition(part: &Partition) -> PartitionClass {
    part.classify()
}

/// `p(ans(Q) = a)`: mass predicting `a` plus half the non-predicting mass.
pub fn answer_probability(part: &Partition, dist: &Distribution, a: Answer) -> Result<f64> {
    Ok(PartitionStats::new(part, dist)?.answer(a))
}

pub fn eliminated_set(part: &Partition, a: Answer) -> HypothesisSet {
    part.eliminated(a)
}

/// Posterior after observing answer `a`; eliminated hypotheses leave the support.
pub fn bayes_update(dist: &Distribution, part: &Partition, a: Answer) -> Result<Distribution> {
    let stats = PartitionStats::new(part, dist)?;
    let evidence = stats.answer(a);
    if evidence <= 0.0 {
        return Err(Error::ImpossibleAnswer { answer: a as u8 });
    }
    let survivors = dist.support - part.eliminated(a);
    let mut weights = vec![0.0; dist.weights.len()];
    for h in survivors.iter() {
        let likelihood = if part.zero.contains(h) { 0.5 } else { 1.0 };
        weights[h.0] = dist.p(h) * likelihood / evidence;
    }
    Distribution::with_support(survivors, weights)
}
