//! JSON scenario files.
//!
//! A partition scenario names the hypotheses, gives the prior `p` and a list
//! of query partitions whose blocks list hypothesis names:
//!
//! ```json
//! {"hypotheses": ["h1", "h2", "h3"], "p": [0.5, 0.3, 0.2],
//!  "partitions": [{"name": "Q1", "plus": ["h1"], "minus": ["h2"], "zero": ["h3"]}]}
//! ```
//!
//! A box scenario replaces `partitions` with `boxes` given as
//! `[x_min, x_max, y_min, y_max]` and optional `positives`, `negatives` and
//! `instances` point lists.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boxes::{AxisBox, BoxScenario, Point};
use crate::error::{Error, Result};
use crate::space::{Distribution, HypothesisId, HypothesisSet, Partition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub plus: Vec<String>,
    pub minus: Vec<String>,
    #[serde(default)]
    pub zero: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub hypotheses: Vec<String>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub partitions: Vec<PartitionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxScenarioFile {
    #[serde(default)]
    pub hypotheses: Vec<String>,
    pub boxes: Vec<AxisBox>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub positives: Vec<Point>,
    #[serde(default)]
    pub negatives: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<Vec<Point>>,
}

/// A validated partition scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub names: Vec<String>,
    pub dist: Distribution,
    pub queries: Vec<(String, Partition)>,
    pub digest: String,
}

/// A validated box scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxScenarioSpec {
    pub names: Vec<String>,
    pub scenario: BoxScenario,
    pub digest: String,
}

/// Either kind of scenario, told apart by the presence of `boxes`.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyScenario {
    Partitions(Scenario),
    Boxes(BoxScenarioSpec),
}

impl AnyScenario {
    pub fn names(&self) -> &[String] {
        match self {
            AnyScenario::Partitions(s) => &s.names,
            AnyScenario::Boxes(b) => &b.names,
        }
    }

    pub fn dist(&self) -> &Distribution {
        match self {
            AnyScenario::Partitions(s) => &s.dist,
            AnyScenario::Boxes(b) => b.scenario.dist(),
        }
    }

    pub fn digest(&self) -> &str {
        match self {
            AnyScenario::Partitions(s) => &s.digest,
            AnyScenario::Boxes(b) => &b.digest,
        }
    }
}

fn digest_of<T: Serialize>(file: &T) -> String {
    let canonical = serde_json::to_vec(file).expect("scenario files serialize");
    hex::encode(Sha256::digest(&canonical))
}

fn hypothesis_names(given: &[String], n: usize) -> Result<Vec<String>> {
    if given.is_empty() {
        return Ok((1..=n).map(|i| format!("h{i}")).collect());
    }
    if given.len() != n {
        return Err(Error::Scenario(format!("hypotheses: {} names for {} probabilities in p", given.len(), n)));
    }
    for (i, name) in given.iter().enumerate() {
        if given[..i].contains(name) {
            return Err(Error::Scenario(format!("hypotheses[{i}]: duplicate name `{name}`")));
        }
    }
    Ok(given.to_vec())
}

fn field_error(field: &str, e: Error) -> Error {
    Error::Scenario(format!("{field}: {e}"))
}

/// Resolves hypothesis names to a set.
pub fn resolve_names(names: &[String], items: &[String], field: &str) -> Result<HypothesisSet> {
    let mut set = HypothesisSet::EMPTY;
    for item in items {
        let idx = names
            .iter()
            .position(|n| n == item)
            .ok_or_else(|| Error::Scenario(format!("{field}: unknown hypothesis `{item}`")))?;
        if set.contains(HypothesisId(idx)) {
            return Err(Error::Scenario(format!("{field}: `{item}` listed twice")));
        }
        set.insert(HypothesisId(idx));
    }
    Ok(set)
}

/// Renders a set with the scenario's hypothesis names.
pub fn named_set(names: &[String], set: HypothesisSet) -> String {
    let items: Vec<&str> = set.iter().map(|h| names.get(h.0).map_or("?", String::as_str)).collect();
    format!("{{{}}}", items.join(","))
}

/// Renders a partition with the scenario's hypothesis names.
pub fn named_partition(names: &[String], part: &Partition) -> String {
    format!(
        "<{}, {}, {}>",
        named_set(names, part.plus()),
        named_set(names, part.minus()),
        named_set(names, part.zero())
    )
}

impl Scenario {
    pub fn from_file(file: &ScenarioFile) -> Result<Self> {
        let names = hypothesis_names(&file.hypotheses, file.p.len())?;
        let dist = Distribution::new(file.p.clone()).map_err(|e| field_error("p", e))?;
        let universe = dist.support();
        let mut queries = Vec::with_capacity(file.partitions.len());
        for (i, entry) in file.partitions.iter().enumerate() {
            let field = format!("partitions[{i}]");
            let plus = resolve_names(&names, &entry.plus, &format!("{field}.plus"))?;
            let minus = resolve_names(&names, &entry.minus, &format!("{field}.minus"))?;
            let zero = resolve_names(&names, &entry.zero, &format!("{field}.zero"))?;
            let part = Partition::over(universe, plus, minus, zero).map_err(|e| field_error(&field, e))?;
            let name = entry.name.clone().unwrap_or_else(|| format!("Q{}", i + 1));
            if queries.iter().any(|(n, _)| *n == name) {
                return Err(Error::Scenario(format!("{field}.name: duplicate query name `{name}`")));
            }
            queries.push((name, part));
        }
        Ok(Scenario { names, dist, queries, digest: digest_of(file) })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        Scenario::from_file(&file)
    }

    pub fn partitions(&self) -> Vec<Partition> {
        self.queries.iter().map(|(_, p)| *p).collect()
    }

    pub fn query(&self, name: &str) -> Result<Partition> {
        self.queries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| *p)
            .ok_or_else(|| Error::Scenario(format!("no query named `{name}`")))
    }
}

impl BoxScenarioSpec {
    pub fn from_file(file: &BoxScenarioFile) -> Result<Self> {
        if file.boxes.len() != file.p.len() {
            return Err(Error::Scenario(format!(
                "boxes: {} boxes for {} probabilities in p",
                file.boxes.len(),
                file.p.len()
            )));
        }
        let names = hypothesis_names(&file.hypotheses, file.p.len())?;
        let dist = Distribution::new(file.p.clone()).map_err(|e| field_error("p", e))?;
        let mut scenario = BoxScenario::new(file.boxes.clone(), dist, file.positives.clone(), file.negatives.clone())
            .map_err(|e| field_error("boxes", e))?;
        if let Some(pool) = &file.instances {
            scenario = scenario.with_instances(pool.clone());
        }
        Ok(BoxScenarioSpec { names, scenario, digest: digest_of(file) })
    }
}

impl AnyScenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        if value.get("boxes").is_some() {
            let file: BoxScenarioFile = serde_json::from_value(value).map_err(|e| Error::Scenario(e.to_string()))?;
            Ok(AnyScenario::Boxes(BoxScenarioSpec::from_file(&file)?))
        } else {
            let file: ScenarioFile = serde_json::from_value(value).map_err(|e| Error::Scenario(e.to_string()))?;
            Ok(AnyScenario::Partitions(Scenario::from_file(&file)?))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        AnyScenario::from_json(&text).map_err(|e| match e {
            Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE1: &str = r#"{
        "p": [0.35, 0.05, 0.15, 0.25, 0.2],
        "partitions": [
            {"plus": ["h1", "h2"], "minus": ["h3", "h4", "h5"]},
            {"plus": ["h1", "h2"], "minus": ["h3", "h4"], "zero": ["h5"]}
        ]
    }"#;

    #[test]
    fn parses_and_names() {
        let s = Scenario::from_json(TABLE1).unwrap();
        assert_eq!(s.names[4], "h5");
        assert_eq!(s.queries[1].0, "Q2");
        assert_eq!(named_partition(&s.names, &s.queries[1].1), "<{h1,h2}, {h3,h4}, {h5}>");
        assert_eq!(s.digest.len(), 64);
        assert_eq!(s.digest, Scenario::from_json(&TABLE1.replace(' ', "")).unwrap().digest);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = TABLE1.replace(r#""minus": ["h3", "h4"]"#, r#""minus": ["h3", "h9"]"#);
        let msg = Scenario::from_json(&bad).unwrap_err().to_string();
        assert!(msg.contains("partitions[1].minus") && msg.contains("h9"), "{msg}");
        let uncovered = TABLE1.replace(r#", "zero": ["h5"]"#, "");
        let msg = Scenario::from_json(&uncovered).unwrap_err().to_string();
        assert!(msg.contains("partitions[1]"), "{msg}");
        let msg = Scenario::from_json(r#"{"p": [0.5, 0.6]}"#).unwrap_err().to_string();
        assert!(msg.contains("p:"), "{msg}");
    }

    #[test]
    fn box_scenarios_are_detected() {
        let text = r#"{"boxes": [[0, 2, 0, 2], [1, 3, 1, 3]], "p": [0.5, 0.5], "positives": [[1.5, 1.5]]}"#;
        let AnyScenario::Boxes(spec) = AnyScenario::from_json(text).unwrap() else { panic!("expected boxes") };
        assert_eq!(spec.scenario.boxes().len(), 2);
        let msg = AnyScenario::from_json(&text.replace("[1.5, 1.5]", "[0.5, 0.5]")).unwrap_err().to_string();
        assert!(msg.contains("boxes"), "{msg}");
    }
}
