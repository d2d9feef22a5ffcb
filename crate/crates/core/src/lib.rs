//! Random linear network coding over prime fields.
//!
//! This crate models single-source multicast networks in canonical form,
//! decides per-sink decodability of scalar linear codes through three
//! equivalent matrix conditions (transfer, Edmonds, critical), evaluates the
//! closed-form success-probability bounds exactly, and runs seeded Monte
//! Carlo experiments to compare the bounds with measured success rates.

#![forbid(unsafe_code)]

pub mod bounds;
pub mod code;
pub mod experiment;
pub mod linalg;
pub mod network;

pub use bounds::{BoundError, BoundReport};
pub use code::{CodeInstance, CodeSampler, CodingError, CriticalView, SamplingMode};
pub use experiment::{
    CompareRow, ExperimentError, MatrixEstimate, SparseMatrixConfig, TrialSummary,
};
pub use linalg::{Field, LinalgError, Matrix};
pub use network::{
    butterfly, normalize_network, parse_network, FlowSolution, NetworkError, NetworkParameters,
    NetworkSpec,
};
