//! Axis-parallel box hypotheses in the plane; points are queries.
//!
//! Containment is closed, so every partition a point can induce is induced by
//! some point of the finite grid built from the box edges: the edges
//! themselves, the midpoints between consecutive distinct edges, and one point
//! beyond each extreme.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Distribution, HypothesisId, HypothesisSet, Partition};
use crate::synthesis::{synthesize_partition, SearchConfig, SearchTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Geometry(format!("point ({x}, {y}) is not finite")));
        }
        Ok(Point { x, y })
    }
}

impl TryFrom<[f64; 2]> for Point {
    type Error = Error;

    fn try_from([x, y]: [f64; 2]) -> Result<Self> {
        Point::new(x, y)
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Closed rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct AxisBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl AxisBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::Geometry(format!(
                "box [{x_min}, {x_max}] x [{y_min}, {y_max}] needs finite bounds with min < max"
            )));
        }
        Ok(AxisBox { x_min, x_max, y_min, y_max })
    }

    pub fn contains(&self, p: Point) -> bool {
        self.x_min <= p.x && p.x <= self.x_max && self.y_min <= p.y && p.y <= self.y_max
    }
}

impl TryFrom<[f64; 4]> for AxisBox {
    type Error = Error;

    fn try_from([a, b, c, d]: [f64; 4]) -> Result<Self> {
        AxisBox::new(a, b, c, d)
    }
}

impl From<AxisBox> for [f64; 4] {
    fn from(b: AxisBox) -> Self {
        [b.x_min, b.x_max, b.y_min, b.y_max]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxScenario {
    boxes: Vec<AxisBox>,
    dist: Distribution,
    positives: Vec<Point>,
    negatives: Vec<Point>,
    /// Finite query pool; `None` means any point of the plane may be asked.
    instances: Option<Vec<Point>>,
}

impl BoxScenario {
    pub fn new(boxes: Vec<AxisBox>, dist: Distribution, positives: Vec<Point>, negatives: Vec<Point>) -> Result<Self> {
        let universe = HypothesisSet::first(boxes.len())?;
        if dist.support() != universe {
            return Err(Error::UniverseMismatch { expected: universe.to_string(), actual: dist.support().to_string() });
        }
        for (i, b) in boxes.iter().enumerate() {
            let h = HypothesisId(i);
            if let Some(p) = positives.iter().find(|p| !b.contains(**p)) {
                return Err(Error::Geometry(format!("{h} does not contain positive ({}, {})", p.x, p.y)));
            }
            if let Some(p) = negatives.iter().find(|p| b.contains(**p)) {
                return Err(Error::Geometry(format!("{h} contains negative ({}, {})", p.x, p.y)));
            }
        }
        Ok(BoxScenario { boxes, dist, positives, negatives, instances: None })
    }

    pub fn with_instances(mut self, instances: Vec<Point>) -> Self {
        self.instances = Some(instances);
        self
    }

    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    pub fn dist(&self) -> &Distribution {
        &self.dist
    }

    pub fn positives(&self) -> &[Point] {
        &self.positives
    }

    pub fn negatives(&self) -> &[Point] {
        &self.negatives
    }

    pub fn instances(&self) -> Option<&[Point]> {
        self.instances.as_deref()
    }

    pub fn universe(&self) -> HypothesisSet {
        self.dist.support()
    }

    /// The same geometry under another distribution, possibly supported on
    /// fewer boxes.
    pub fn with_dist(&self, dist: Distribution) -> Result<Self> {
        let all = HypothesisSet::first(self.boxes.len())?;
        if !dist.support().is_subset(all) {
            return Err(Error::UniverseMismatch { expected: all.to_string(), actual: dist.support().to_string() });
        }
        Ok(BoxScenario { dist, ..self.clone() })
    }
}

pub fn partition_of_point(pt: Point, scenario: &BoxScenario) -> Partition {
    let universe = scenario.universe();
    let plus: HypothesisSet = universe.iter().filter(|h| scenario.boxes[h.0].contains(pt)).collect();
    Partition::split(universe, plus).expect("plus is drawn from the universe")
}

fn axis_candidates(mut edges: Vec<f64>) -> Vec<f64> {
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut out: Vec<f64> = edges.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    out.extend(&edges);
    if let (Some(lo), Some(hi)) = (edges.first(), edges.last()) {
        out.push(lo - 1.0);
        out.push(hi + 1.0);
    }
    out
}

/// Candidate points: open cells first, then edges and vertices, then the outside.
pub fn candidate_points(scenario: &BoxScenario) -> Vec<Point> {
    let xs = axis_candidates(scenario.boxes.iter().flat_map(|b| [b.x_min, b.x_max]).collect());
    let ys = axis_candidates(scenario.boxes.iter().flat_map(|b| [b.y_min, b.y_max]).collect());
    let mut pts = Vec::with_capacity(xs.len() * ys.len());
    for &x in &xs {
        for &y in &ys {
            pts.push(Point { x, y });
        }
    }
    pts
}

/// One representative point per distinct partition of the arrangement, in
/// candidate order.
pub fn arrangement_cells(scenario: &BoxScenario) -> Vec<(Point, Partition)> {
    let labelled: Vec<(Point, Partition)> =
        candidate_points(scenario).into_par_iter().map(|p| (p, partition_of_point(p, scenario))).collect();
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (p, part) in labelled {
        if seen.insert(part, ()).is_none() {
            out.push((p, part));
        }
    }
    out
}

/// Every strong DP realizable by a point of the plane, with a witness.
pub fn realizable_partitions(scenario: &BoxScenario) -> BTreeMap<Partition, Point> {
    arrangement_cells(scenario)
        .into_iter()
        .filter(|(_, part)| part.is_discriminating())
        .map(|(p, part)| (part, p))
        .collect()
}

fn check_goal(goal: &Partition, scenario: &BoxScenario) -> Result<()> {
    goal.check_universe(scenario.universe())?;
    if !goal.is_discriminating() {
        return Err(Error::NotDiscriminating(goal.to_string()));
    }
    Ok(())
}

/// A point whose partition is exactly `goal`, if one exists anywhere in the plane.
pub fn realize_query(goal: &Partition, scenario: &BoxScenario) -> Result<Option<Point>> {
    check_goal(goal, scenario)?;
    if !goal.is_strong() {
        return Ok(None);
    }
    Ok(candidate_points(scenario).into_iter().find(|p| partition_of_point(*p, scenario) == *goal))
}

/// The first instance of a finite pool whose partition is exactly `goal`.
pub fn realize_from_instances(goal: &Partition, scenario: &BoxScenario, instances: &[Point]) -> Result<Option<Point>> {
    check_goal(goal, scenario)?;
    Ok(instances.iter().copied().find(|p| partition_of_point(*p, scenario) == *goal))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesizedQuery {
    pub point: Point,
    pub partition: Partition,
    pub trace: SearchTrace,
    /// Goals found but not realizable, in the order they were rejected.
    pub rejected: Vec<Partition>,
}

/// Searches for a goal partition and realizes it as a point, excluding
/// unrealizable goals and searching again until one succeeds.
pub fn synthesize_query(config: &SearchConfig, scenario: &BoxScenario) -> Result<SynthesizedQuery> {
    let mut config = config.clone();
    let mut rejected = Vec::new();
    loop {
        let trace = synthesize_partition(&config, &scenario.dist)?;
        let Some(goal) = trace.result() else {
            return Err(Error::NoRealizableGoal { tried: rejected.len() });
        };
        let point = match scenario.instances() {
            Some(pool) => realize_from_instances(&goal, scenario, pool)?,
            None => realize_query(&goal, scenario)?,
        };
        if let Some(point) = point {
            return Ok(SynthesizedQuery { point, partition: goal, trace, rejected });
        }
        rejected.push(goal);
        config.excluded_goals.insert(goal);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureSpec;

    fn b(a: f64, c: f64, d: f64, e: f64) -> AxisBox {
        AxisBox::new(a, c, d, e).unwrap()
    }

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y).unwrap()
    }

    fn fixture() -> BoxScenario {
        BoxScenario::new(
            vec![b(0., 7., 3., 7.), b(2., 8., 2., 8.), b(3., 7., 0., 7.), b(4., 10., 4., 6.)],
            Distribution::new(vec![0.41, 0.15, 0.07, 0.37]).unwrap(),
            vec![pt(5., 5.)],
            vec![pt(11., 11.), pt(-1., -1.)],
        )
        .unwrap()
    }

    fn set(ids: &[usize]) -> HypothesisSet {
        ids.iter().map(|&i| HypothesisId(i - 1)).collect()
    }

    fn split(ids: &[usize]) -> Partition {
        Partition::split(HypothesisSet::first(4).unwrap(), set(ids)).unwrap()
    }

    #[test]
    fn membership() {
        let s = fixture();
        assert_eq!(partition_of_point(pt(7.5, 7.5), &s), split(&[2]));
        assert_eq!(partition_of_point(pt(7.5, 5.), &s), split(&[2, 4]));
        assert_eq!(partition_of_point(pt(5., 5.), &s), split(&[1, 2, 3, 4]));
        assert!(!partition_of_point(pt(5., 5.), &s).is_discriminating());
        // Closed boundary.
        assert_eq!(partition_of_point(pt(10., 4.), &s), split(&[4]));
    }

    #[test]
    fn realization_round_trip() {
        let s = fixture();
        let p = realize_query(&split(&[2, 4]), &s).unwrap().unwrap();
        assert_eq!(partition_of_point(p, &s), split(&[2, 4]));
        assert_eq!(realize_query(&split(&[1, 3]), &s).unwrap(), None);
        assert!(matches!(realize_query(&split(&[1, 2, 3, 4]), &s), Err(Error::NotDiscriminating(_))));
        for (p, part) in arrangement_cells(&s) {
            if part.is_discriminating() {
                let q = realize_query(&part, &s).unwrap().unwrap();
                assert_eq!(partition_of_point(q, &s), partition_of_point(p, &s));
            }
        }
    }

    #[test]
    fn invalid_geometry() {
        assert!(AxisBox::new(1., 1., 0., 1.).is_err());
        assert!(Point::new(f64::NAN, 0.).is_err());
        let err =
            BoxScenario::new(vec![b(0., 1., 0., 1.)], Distribution::new(vec![1.0]).unwrap(), vec![pt(2., 2.)], vec![]);
        assert!(matches!(err, Err(Error::Geometry(_))));
        let mismatch = BoxScenario::new(vec![b(0., 1., 0., 1.)], Distribution::uniform(2).unwrap(), vec![], vec![]);
        assert!(matches!(mismatch, Err(Error::UniverseMismatch { .. })));
    }

    #[test]
    fn serde_shapes() {
        let bx: AxisBox = serde_json::from_str("[0, 7, 3, 7]").unwrap();
        assert_eq!(bx, b(0., 7., 3., 7.));
        assert!(serde_json::from_str::<AxisBox>("[7, 0, 3, 7]").is_err());
        assert_eq!(serde_json::to_string(&pt(1.5, 2.)).unwrap(), "[1.5,2.0]");
    }

    #[test]
    fn synthesis_realizes_the_goal() {
        let s = fixture();
        let q = synthesize_query(&SearchConfig::new(MeasureSpec::rio(2)), &s).unwrap();
        assert_eq!(q.partition, split(&[2, 4]));
        assert_eq!(partition_of_point(q.point, &s), q.partition);
        assert!(q.rejected.is_empty());
    }

    #[test]
    fn finite_pool_realization() {
        let s = fixture().with_instances(vec![pt(7.5, 7.5), pt(5., 5.)]);
        assert_eq!(realize_from_instances(&split(&[2]), &s, s.instances().unwrap()).unwrap(), Some(pt(7.5, 7.5)));
        assert_eq!(realize_from_instances(&split(&[2, 4]), &s, s.instances().unwrap()).unwrap(), None);
        let q = synthesize_query(&SearchConfig::new(MeasureSpec::rio(1)), &s).unwrap();
        assert_eq!(q.partition, split(&[2]));
    }
}
