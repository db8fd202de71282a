//! Query selection measures (QSMs), their optimization directions, and the
//! strict preference order each measure induces on queries.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Distribution, Partition, PartitionStats};

/// Relative tolerance below which two measure values count as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasureKind {
    /// Least confidence.
    Lc,
    /// Margin.
    M,
    /// Answer entropy.
    H,
    /// Gini index.
    Gi,
    /// Information gain (expected posterior entropy form).
    Ent,
    EntZ,
    /// Split-in-half.
    Spl,
    SplZ,
    /// Vote entropy.
    Ve,
    /// Kullback-Leibler committee disagreement.
    Kl,
    /// Expected eliminated probability mass.
    EmcA,
    EmcAZ,
    /// Expected number of eliminated hypotheses.
    EmcB,
    /// Most probable singleton.
    Mps,
    /// Most probable singleton, penalizing non-predicting hypotheses.
    MpsPrime,
    /// Biased maximal elimination.
    Bme,
    /// Closed-form risk optimization.
    RioPrime,
    RioPrimeZ,
    /// `|p(V+) - p(V-)| + p(V0)`.
    Bal,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 19] = [
        MeasureKind::Lc,
        MeasureKind::M,
        MeasureKind::H,
        MeasureKind::Gi,
        MeasureKind::Ent,
        MeasureKind::EntZ,
        MeasureKind::Spl,
        MeasureKind::SplZ,
        MeasureKind::Ve,
        MeasureKind::Kl,
        MeasureKind::EmcA,
        MeasureKind::EmcAZ,
        MeasureKind::EmcB,
        MeasureKind::Mps,
        MeasureKind::MpsPrime,
        MeasureKind::Bme,
        MeasureKind::RioPrime,
        MeasureKind::RioPrimeZ,
        MeasureKind::Bal,
    ];

    pub fn takes_z(self) -> bool {
        matches!(self, MeasureKind::EntZ | MeasureKind::SplZ | MeasureKind::EmcAZ | MeasureKind::RioPrimeZ)
    }

    pub fn takes_n(self) -> bool {
        matches!(self, MeasureKind::RioPrime | MeasureKind::RioPrimeZ)
    }

    pub fn direction(self) -> Direction {
        use MeasureKind::*;
        match self {
            Lc | M | Ent | EntZ | Spl | SplZ | RioPrime | RioPrimeZ | Bal => Direction::Minimize,
            H | Gi | Ve | Kl | EmcA | EmcAZ | EmcB | Mps | MpsPrime | Bme => Direction::Maximize,
        }
    }

    fn base_name(self) -> &'static str {
        use MeasureKind::*;
        match self {
            Lc => "LC",
            M => "M",
            H => "H",
            Gi => "GI",
            Ent | EntZ => "ENT",
            Spl | SplZ => "SPL",
            Ve => "VE",
            Kl => "KL",
            EmcA | EmcAZ => "EMCa",
            EmcB => "EMCb",
            Mps => "MPS",
            MpsPrime => "MPSp",
            Bme => "BME",
            RioPrime | RioPrimeZ => "RIO",
            Bal => "BAL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// How MPS / MPS' decide that a partition qualifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum MpsRule {
    /// Strong DQ whose smaller predicting side is a singleton.
    #[default]
    Singleton,
    /// Strong DQ with `||V+| - |V-|| = 2`.
    Literal,
}

/// One query selection measure together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub kind: MeasureKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default)]
    pub mps_rule: MpsRule,
}

impl MeasureSpec {
    /// Unparameterized measure. Panics for kinds needing `z` or `n`.
    pub fn plain(kind: MeasureKind) -> Self {
        Self::new(kind, None, None).expect("kind takes parameters")
    }

    pub fn with_z(kind: MeasureKind, z: f64) -> Self {
        Self::new(kind, Some(z), None).expect("kind does not take z alone")
    }

    pub fn rio(n: u32) -> Self {
        Self::new(MeasureKind::RioPrime, None, Some(n)).expect("n >= 1")
    }

    pub fn rio_z(z: f64, n: u32) -> Self {
        Self::new(MeasureKind::RioPrimeZ, Some(z), Some(n)).expect("n >= 1, finite z")
    }

    pub fn new(kind: MeasureKind, z: Option<f64>, n: Option<u32>) -> Result<Self> {
        match (kind.takes_z(), z) {
            (true, None) => return Err(Error::MeasureParams(format!("{} requires z", kind.base_name()))),
            (false, Some(_)) => return Err(Error::MeasureParams(format!("{} takes no z", kind.base_name()))),
            (true, Some(z)) if !z.is_finite() => return Err(Error::MeasureParams(format!("z = {z} must be finite"))),
            _ => {}
        }
        match (kind.takes_n(), n) {
            (true, None) => return Err(Error::MeasureParams("RIO requires n".into())),
            (true, Some(0)) => return Err(Error::MeasureParams("n must be at least 1".into())),
            (false, Some(_)) => return Err(Error::MeasureParams(format!("{} takes no n", kind.base_name()))),
            _ => {}
        }
        Ok(MeasureSpec { kind, z, n, mps_rule: MpsRule::Singleton })
    }

    pub fn with_mps_rule(mut self, rule: MpsRule) -> Self {
        self.mps_rule = rule;
        self
    }

    pub fn direction(&self) -> Direction {
        self.kind.direction()
    }

    /// Value on a discriminating partition.
    pub fn evaluate(&self, part: &Partition, dist: &Distribution) -> Result<f64> {
        if !part.is_discriminating() {
            return Err(Error::NotDiscriminating(part.to_string()));
        }
        let stats = PartitionStats::new(part, dist)?;
        Ok(self.evaluate_stats(&stats))
    }

    /// Measure value from precomputed statistics. The caller guarantees the
    /// statistics belong to a discriminating partition.
    pub fn evaluate_stats(&self, s: &PartitionStats) -> f64 {
        use MeasureKind::*;
        let z = self.z.unwrap_or(1.0);
        let diff = s.n_plus.abs_diff(s.n_minus) as f64;
        match self.kind {
            Lc => s.p_yes.max(s.p_no),
            M => (s.p_yes - s.p_no).abs(),
            H => -(xlog2x(s.p_yes) + xlog2x(s.p_no)),
            Gi => 1.0 - (s.p_yes * s.p_yes + s.p_no * s.p_no),
            Ent | EntZ => z * s.p_zero + (xlog2x(s.p_yes) + xlog2x(s.p_no)),
            Spl | SplZ => diff + z * s.n_zero as f64,
            Ve => {
                let c = (s.n_plus + s.n_minus) as f64;
                -(xlog2x(s.n_plus as f64 / c) + xlog2x(s.n_minus as f64 / c))
            }
            Kl => {
                let c = (s.n_plus + s.n_minus) as f64;
                let pc = s.p_plus + s.p_minus;
                -(s.n_plus as f64 / c * (s.p_plus / pc).log2() + s.n_minus as f64 / c * (s.p_minus / pc).log2())
            }
            EmcA | EmcAZ => 2.0 * (s.p_yes - s.p_yes * s.p_yes) - z * s.p_zero / 2.0,
            EmcB => s.p_yes * s.n_minus as f64 + s.p_no * s.n_plus as f64,
            Mps => self.mps_singleton_mass(s).unwrap_or(0.0),
            MpsPrime => self.mps_singleton_mass(s).unwrap_or(-(s.n_zero as f64)),
            Bme => {
                if approx_eq(s.p_plus, s.p_minus) {
                    0.0
                } else if s.p_minus < s.p_plus {
                    s.n_minus as f64
                } else {
                    s.n_plus as f64
                }
            }
            RioPrime | RioPrimeZ => {
                let n = self.n.expect("validated") as usize;
                let ent = z * s.p_zero + (xlog2x(s.p_yes) + xlog2x(s.p_no));
                let smaller = s.n_plus.min(s.n_minus);
                let shortfall = if smaller >= n { (smaller - n) as f64 } else { s.n_total() as f64 };
                ent / 2.0 + shortfall
            }
            Bal => (s.p_plus - s.p_minus).abs() + s.p_zero,
        }
    }

    /// Mass of the qualifying singleton side, if the partition qualifies.
    fn mps_singleton_mass(&self, s: &PartitionStats) -> Option<f64> {
        if s.n_zero != 0 {
            return None;
        }
        match self.mps_rule {
            MpsRule::Singleton => {
                let mut best: Option<f64> = None;
                if s.n_plus == 1 {
                    best = Some(s.p_plus);
                }
                if s.n_minus == 1 {
                    best = Some(best.map_or(s.p_minus, |b| b.max(s.p_minus)));
                }
                best
            }
            MpsRule::Literal => {
                (s.n_plus.abs_diff(s.n_minus) == 2).then_some(if s.n_plus < s.n_minus { s.p_plus } else { s.p_minus })
            }
        }
    }

    /// `true` iff `a` is strictly better than `b` under this measure's direction.
    pub fn better(&self, a: f64, b: f64) -> bool {
        strictly_better(self.direction(), a, b)
    }

    /// Strict preference `q ≺_m q2`.
    pub fn prefers(&self, q: &Partition, q2: &Partition, dist: &Distribution) -> Result<bool> {
        let a = self.evaluate(q, dist)?;
        let b = self.evaluate(q2, dist)?;
        Ok(self.better(a, b))
    }

    /// Best element of the pool; ties resolve to the lowest index.
    pub fn select_best(&self, pool: &[Partition], dist: &Distribution) -> Result<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, part) in pool.iter().enumerate() {
            if !part.is_discriminating() {
                return Err(Error::NonDiscriminatingPoolElement { index: i });
            }
            let v = self.evaluate(part, dist)?;
            match best {
                Some((_, bv)) if !self.better(v, bv) => {}
                _ => best = Some((i, v)),
            }
        }
        best.ok_or(Error::EmptyPool)
    }

    /// Short label for reports, naming the MPS variant where relevant.
    pub fn label(&self) -> String {
        let base = self.to_string();
        match (self.kind, self.mps_rule) {
            (MeasureKind::Mps | MeasureKind::MpsPrime, MpsRule::Singleton) => format!("{base}[singleton]"),
            (MeasureKind::Mps | MeasureKind::MpsPrime, MpsRule::Literal) => format!("{base}[literal]"),
            _ => base,
        }
    }
}

pub fn strictly_better(dir: Direction, a: f64, b: f64) -> bool {
    if approx_eq(a, b) {
        return false;
    }
    match dir {
        Direction::Minimize => a < b,
        Direction::Maximize => a > b,
    }
}

pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * 1f64.max(a.abs()).max(b.abs())
}

/// `x log2 x` with `0 log 0 = 0`.
pub fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Smallest `z` for which ENT_z is guaranteed to satisfy the discrimination
/// order when every answer probability exceeds `t`.
pub fn ent_z_threshold(t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 0.5) {
        return Err(Error::ThresholdDomain(t));
    }
    Ok((-0.5 * (t.log2() - (1.0 - t).log2())).max(1.0))
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.base_name())?;
        if let Some(z) = self.z {
            write!(f, "_z={z}")?;
        }
        if let Some(n) = self.n {
            write!(f, "_n={n}")?;
        }
        Ok(())
    }
}

impl FromStr for MeasureSpec {
    type Err = Error;

    /// Grammar: `NAME` followed by optional `_z=REAL` and `_n=INT` tokens,
    /// e.g. `ENT`, `ENT_z=1.5`, `RIO_n=2`, `RIO_z=1.5_n=2`.
    fn from_str(spec: &str) -> Result<Self> {
        let err = |token: &str| Error::MeasureParse { spec: spec.to_string(), token: token.to_string() };
        let mut tokens = spec.trim().split('_');
        let name = tokens.next().filter(|t| !t.is_empty()).ok_or_else(|| err(""))?;
        let mut z = None;
        let mut n = None;
        for tok in tokens {
            match tok.split_once('=') {
                Some(("z", v)) if z.is_none() => z = Some(v.parse::<f64>().map_err(|_| err(tok))?),
                Some(("n", v)) if n.is_none() => n = Some(v.parse::<u32>().map_err(|_| err(tok))?),
                _ => return Err(err(tok)),
            }
        }
        use MeasureKind::*;
        let kind = match (name.to_ascii_uppercase().as_str(), z.is_some()) {
            ("LC", _) => Lc,
            ("M", _) => M,
            ("H", _) => H,
            ("GI", _) => Gi,
            ("ENT", false) => Ent,
            ("ENT", true) => EntZ,
            ("SPL", false) => Spl,
            ("SPL", true) => SplZ,
            ("VE", _) => Ve,
            ("KL", _) => Kl,
            ("EMCA", false) => EmcA,
            ("EMCA", true) => EmcAZ,
            ("EMCB", _) => EmcB,
            ("MPS", _) => Mps,
            ("MPSP" | "MPS'", _) => MpsPrime,
            ("BME", _) => Bme,
            ("RIO" | "RIOP" | "RIO'", false) => RioPrime,
            ("RIO" | "RIOP" | "RIO'", true) => RioPrimeZ,
            ("BAL", _) => Bal,
            _ => return Err(err(name)),
        };
        MeasureSpec::new(kind, z, n).map_err(|e| match e {
            Error::MeasureParams(msg) => Error::MeasureParse { spec: spec.to_string(), token: msg },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{HypothesisId, HypothesisSet};

    fn set(ids: &[usize]) -> HypothesisSet {
        ids.iter().map(|&i| HypothesisId(i - 1)).collect()
    }

    fn q(plus: &[usize], minus: &[usize], zero: &[usize]) -> Partition {
        Partition::over(HypothesisSet::first(5).unwrap(), set(plus), set(minus), set(zero)).unwrap()
    }

    fn example() -> [Partition; 4] {
        [q(&[1, 2], &[3, 4, 5], &[]), q(&[1, 2], &[3, 4], &[5]), q(&[4], &[1, 2, 3, 5], &[]), q(&[1, 2, 5], &[4], &[3])]
    }

    fn p1() -> Distribution {
        Distribution::new(vec![0.35, 0.05, 0.15, 0.25, 0.2]).unwrap()
    }

    fn p3() -> Distribution {
        Distribution::new(vec![0.4, 0.2, 0.05, 0.1, 0.25]).unwrap()
    }

    fn m(s: &str) -> MeasureSpec {
        s.parse().unwrap()
    }

    #[test]
    fn directions() {
        assert_eq!(m("ENT").direction(), Direction::Minimize);
        assert_eq!(m("GI").direction(), Direction::Maximize);
        assert_eq!(m("BAL").direction(), Direction::Minimize);
    }

    #[test]
    fn bal_on_running_example() {
        let vals: Vec<f64> = example().iter().map(|p| m("BAL").evaluate(p, &p1()).unwrap()).collect();
        for (v, want) in vals.iter().zip([0.2, 0.2, 0.5, 0.5]) {
            assert!((v - want).abs() < 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn least_confidence_and_vote_entropy() {
        let [q1, q2, q3, _] = example();
        assert!((m("LC").evaluate(&q2, &p1()).unwrap() - 0.5).abs() < 1e-12);
        assert!((m("LC").evaluate(&q1, &p1()).unwrap() - 0.6).abs() < 1e-12);
        assert!((m("VE").evaluate(&q2, &p1()).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m("SPL").evaluate(&q1, &p1()).unwrap(), 1.0);
        assert_eq!(m("SPL").evaluate(&q2, &p1()).unwrap(), 1.0);
        assert_eq!(m("SPL").evaluate(&q3, &p1()).unwrap(), 3.0);
    }

    #[test]
    fn mps_rules_disagree_when_universe_is_not_four() {
        let q3 = example()[2];
        assert!((m("MPS").evaluate(&q3, &p1()).unwrap() - 0.25).abs() < 1e-12);
        let literal = m("MPS").with_mps_rule(MpsRule::Literal);
        assert_eq!(literal.evaluate(&q3, &p1()).unwrap(), 0.0);
        assert_eq!(m("MPSp").evaluate(&example()[3], &p1()).unwrap(), -1.0);
    }

    #[test]
    fn bme_tie_is_zero() {
        let d = Distribution::new(vec![0.25, 0.25, 0.5]).unwrap();
        let part = Partition::over(HypothesisSet::first(3).unwrap(), set(&[1, 2]), set(&[3]), set(&[])).unwrap();
        assert_eq!(m("BME").evaluate(&part, &d).unwrap(), 0.0);
    }

    #[test]
    fn rio_shortfall_uses_universe_size() {
        let q2 = example()[1];
        let ent = m("ENT").evaluate(&q2, &p1()).unwrap();
        assert!((m("RIO_n=3").evaluate(&q2, &p1()).unwrap() - (ent / 2.0 + 5.0)).abs() < 1e-12);
        assert!((m("RIO_n=2").evaluate(&q2, &p1()).unwrap() - ent / 2.0).abs() < 1e-12);
    }

    #[test]
    fn preference_examples() {
        let [q1, q2, q3, q4] = example();
        assert!(m("LC").prefers(&q2, &q1, &p1()).unwrap());
        assert!(m("ENT").prefers(&q4, &q3, &p3()).unwrap());
        for kind in MeasureKind::ALL {
            let spec = MeasureSpec::new(kind, kind.takes_z().then_some(1.5), kind.takes_n().then_some(1)).unwrap();
            for part in example() {
                assert!(!spec.prefers(&part, &part, &p1()).unwrap());
            }
        }
    }

    #[test]
    fn non_discriminating_input_is_rejected() {
        let part = q(&[], &[1, 2, 3, 4, 5], &[]);
        assert!(matches!(m("H").evaluate(&part, &p1()), Err(Error::NotDiscriminating(_))));
    }

    #[test]
    fn select_best_breaks_ties_by_index() {
        assert_eq!(m("BAL").select_best(&example(), &p1()).unwrap().0, 0);
        assert_eq!(m("BAL").select_best(&example()[2..3], &p1()).unwrap().0, 0);
        assert_eq!(m("BAL").select_best(&[], &p1()).unwrap_err(), Error::EmptyPool);
        let pool = [example()[0], q(&[1, 2, 3, 4, 5], &[], &[])];
        assert_eq!(m("BAL").select_best(&pool, &p1()).unwrap_err(), Error::NonDiscriminatingPoolElement { index: 1 });
    }

    #[test]
    fn threshold_values() {
        assert!((ent_z_threshold(0.4999999).unwrap() - 1.0).abs() < 1e-12);
        assert!((ent_z_threshold(0.1).unwrap() - 0.5 * 9f64.log2()).abs() < 1e-12);
        assert_eq!(ent_z_threshold(0.25).unwrap(), 1.0);
        assert!(ent_z_threshold(0.5).is_err());
        assert!(ent_z_threshold(0.0).is_err());
    }

    #[test]
    fn spec_grammar() {
        assert_eq!(m("ENT_z=1.5"), MeasureSpec::with_z(MeasureKind::EntZ, 1.5));
        assert_eq!(m("RIO_n=2"), MeasureSpec::rio(2));
        assert_eq!(m("RIO_z=1.5_n=2"), MeasureSpec::rio_z(1.5, 2));
        assert_eq!(m("SPL_z=1.1").to_string(), "SPL_z=1.1");
        assert_eq!(m("MPS'").kind, MeasureKind::MpsPrime);
        for bad in ["XYZ", "ENT_q=1", "ENT_z=abc", "RIO", "RIO_n=0", "LC_z=2", "SPL_z=1_z=2", ""] {
            let e = bad.parse::<MeasureSpec>().unwrap_err();
            assert!(matches!(e, Error::MeasureParse { .. }), "{bad}: {e}");
        }
        let e = "ENT_z=abc".parse::<MeasureSpec>().unwrap_err();
        assert!(e.to_string().contains("`z=abc`"));
    }
}
