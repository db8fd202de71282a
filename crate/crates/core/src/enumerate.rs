//! Exhaustive generation of discriminating partitions.
//!
//! Partitions of a universe `V = {u_0 < .. < u_{k-1}}` correspond to ternary
//! vectors `(d_0, .., d_{k-1})` with `d_i ∈ {0 = plus, 1 = minus, 2 = zero}`.
//! Streams run over these vectors in lexicographic order, `d_0` most
//! significant; with `strong_only` the digits are binary.

use crate::error::{Error, Result};
use crate::measure::MeasureSpec;
use crate::space::{Distribution, HypothesisId, HypothesisSet, Partition};

pub const DEFAULT_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumOptions {
    pub strong_only: bool,
    /// Keep only the mirror image whose smallest predicting hypothesis is in `V+`.
    pub canonical_dedup: bool,
    pub cap: usize,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { strong_only: false, canonical_dedup: false, cap: DEFAULT_CAP }
    }
}

impl EnumOptions {
    pub fn strong() -> Self {
        EnumOptions { strong_only: true, ..Default::default() }
    }
}

/// Streaming iterator over partitions of a universe.
#[derive(Debug, Clone)]
pub struct PartitionStream {
    members: Vec<HypothesisId>,
    radix: u64,
    next: u64,
    end: u64,
    discriminating_only: bool,
    canonical_dedup: bool,
}

impl PartitionStream {
    /// Restarts the stream at the given assignment index.
    pub fn starting_at(mut self, index: u64) -> Self {
        self.next = index.min(self.end);
        self
    }

    /// Number of assignment vectors (not all of which are yielded).
    pub fn assignment_count(&self) -> u64 {
        self.end
    }

    fn decode(&self, mut index: u64) -> Partition {
        let mut blocks = [HypothesisSet::EMPTY; 3];
        for &h in self.members.iter().rev() {
            blocks[(index % self.radix) as usize].insert(h);
            index /= self.radix;
        }
        Partition::new(blocks[0], blocks[1], blocks[2]).expect("assignment blocks are disjoint")
    }
}

impl Iterator for PartitionStream {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        while self.next < self.end {
            let part = self.decode(self.next);
            self.next += 1;
            if self.discriminating_only && !part.is_discriminating() {
                continue;
            }
            if self.canonical_dedup {
                let first = part.predicting().min();
                if first.is_some_and(|h| !part.plus().contains(h)) {
                    continue;
                }
            }
            return Some(part);
        }
        None
    }
}

fn stream(universe: HypothesisSet, radix: u64, cap: usize) -> Result<PartitionStream> {
    let k = universe.len();
    if k == 0 {
        return Err(Error::DegenerateUniverse("empty universe".into()));
    }
    if k > cap {
        return Err(Error::EnumerationCap { size: k, cap });
    }
    let end = radix.checked_pow(k as u32).ok_or(Error::EnumerationCap { size: k, cap })?;
    Ok(PartitionStream {
        members: universe.iter().collect(),
        radix,
        next: 0,
        end,
        discriminating_only: true,
        canonical_dedup: false,
    })
}

/// Every discriminating partition of `universe`.
pub fn all_dps(universe: HypothesisSet, opts: EnumOptions) -> Result<PartitionStream> {
    let mut s = stream(universe, if opts.strong_only { 2 } else { 3 }, opts.cap)?;
    s.canonical_dedup = opts.canonical_dedup;
    Ok(s)
}

/// Every partition of `universe`, discriminating or not.
pub fn all_partitions(universe: HypothesisSet, cap: usize) -> Result<PartitionStream> {
    let mut s = stream(universe, 3, cap)?;
    s.discriminating_only = false;
    Ok(s)
}

/// Exact optimum of `m` over the enumerated partitions; ties keep the first.
pub fn brute_force_optimum(
    m: &MeasureSpec,
    universe: HypothesisSet,
    dist: &Distribution,
    opts: EnumOptions,
) -> Result<(Partition, f64)> {
    optimum_over(m, all_dps(universe, opts)?, dist)
}

/// Exact optimum of `m` over an arbitrary stream of partitions.
pub fn optimum_over<I>(m: &MeasureSpec, parts: I, dist: &Distribution) -> Result<(Partition, f64)>
where
    I: IntoIterator<Item = Partition>,
{
    let mut best: Option<(Partition, f64)> = None;
    for part in parts {
        let v = m.evaluate(&part, dist)?;
        match best {
            Some((_, bv)) if !m.better(v, bv) => {}
            _ => best = Some((part, v)),
        }
    }
    best.ok_or(Error::EmptyPool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureKind;
    use crate::space::PartitionClass;

    fn u(n: usize) -> HypothesisSet {
        HypothesisSet::first(n).unwrap()
    }

    /// Independent count: literal nested loops over ternary labels.
    fn triple_loop_count(n: usize) -> usize {
        let mut count = 0;
        let mut labels = vec![0u8; n];
        loop {
            let has_plus = labels.contains(&0);
            let has_minus = labels.contains(&1);
            if has_plus && has_minus {
                count += 1;
            }
            let mut i = 0;
            while i < n && labels[i] == 2 {
                labels[i] = 0;
                i += 1;
            }
            if i == n {
                return count;
            }
            labels[i] += 1;
        }
    }

    #[test]
    fn counts_match_literal_loops() {
        assert_eq!(triple_loop_count(3), 12);
        assert_eq!(triple_loop_count(5), 180);
        assert_eq!(all_dps(u(3), EnumOptions::default()).unwrap().count(), 12);
        assert_eq!(all_dps(u(3), EnumOptions::strong()).unwrap().count(), 6);
        assert_eq!(all_dps(u(5), EnumOptions::default()).unwrap().count(), 180);
    }

    #[test]
    fn every_yield_is_a_dq() {
        for part in all_dps(u(4), EnumOptions::default()).unwrap() {
            assert_ne!(part.classify(), PartitionClass::NonDiscriminating);
            part.check_universe(u(4)).unwrap();
        }
    }

    #[test]
    fn lexicographic_order_and_restart() {
        let all: Vec<_> = all_partitions(u(2), 12).unwrap().collect();
        assert_eq!(all.len(), 9);
        // First vector (0,0): everything positive; last (2,2): everything silent.
        assert_eq!(all[0].plus(), u(2));
        assert_eq!(all[8].zero(), u(2));
        let tail: Vec<_> = all_partitions(u(2), 12).unwrap().starting_at(7).collect();
        assert_eq!(tail, all[7..]);
    }

    #[test]
    fn canonical_dedup_halves_the_stream() {
        let opts = EnumOptions { canonical_dedup: true, ..Default::default() };
        assert_eq!(all_dps(u(4), opts).unwrap().count(), 25);
        let strong = EnumOptions { canonical_dedup: true, ..EnumOptions::strong() };
        assert_eq!(all_dps(u(4), strong).unwrap().count(), 7);
    }

    #[test]
    fn cap_is_enforced() {
        let err = all_dps(u(13), EnumOptions::default()).unwrap_err();
        assert_eq!(err, Error::EnumerationCap { size: 13, cap: 12 });
    }

    #[test]
    fn non_contiguous_universe() {
        let universe: HypothesisSet = [HypothesisId(1), HypothesisId(4)].into_iter().collect();
        let parts: Vec<_> = all_dps(universe, EnumOptions::default()).unwrap().collect();
        assert_eq!(parts.len(), 2);
        assert!(parts.iter().all(|p| p.universe() == universe));
    }

    #[test]
    fn spl_optimum_is_a_perfect_split() {
        let d = Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (part, v) =
            brute_force_optimum(&MeasureSpec::plain(MeasureKind::Spl), u(4), &d, EnumOptions::strong()).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(part.plus().len(), 2);
    }

    #[test]
    fn mps_optimum_is_the_most_probable_singleton() {
        let d = Distribution::new(vec![0.41, 0.15, 0.07, 0.37]).unwrap();
        let (part, v) =
            brute_force_optimum(&MeasureSpec::plain(MeasureKind::Mps), u(4), &d, EnumOptions::default()).unwrap();
        assert!((v - 0.41).abs() < 1e-12);
        let single = if part.plus().len() == 1 { part.plus() } else { part.minus() };
        assert_eq!(single, HypothesisSet::singleton(HypothesisId(0)));
    }
}
