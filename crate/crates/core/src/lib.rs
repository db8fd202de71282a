//! Query selection measures over partitions of a finite hypothesis set.
//!
//! A query is identified with its partition `<V+, V-, V0>` of the current
//! hypotheses: those predicting a positive answer, a negative answer, or
//! neither. The crate evaluates selection measures on such partitions, relates
//! them to the discrimination preference order, synthesizes optimal
//! partitions (and point queries for box hypotheses) and simulates query
//! sessions.

pub mod boxes;
pub mod cli;
pub mod enumerate;
pub mod error;
pub mod measure;
pub mod relations;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod space;
pub mod synthesis;

pub use error::{Error, Result};
pub use measure::{Direction, MeasureKind, MeasureSpec, MpsRule};
pub use space::{Answer, Distribution, HypothesisId, HypothesisSet, Partition, PartitionClass, PartitionStats};
