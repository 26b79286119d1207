//! Online matching-and-pricing under known, time-varying arrival distributions.
//!
//! The model: a bipartite graph between offline agent types (with matching
//! capacities) and online agent types. In each of `T` rounds one online agent
//! arrives according to a known per-round distribution; the platform may offer
//! it an assignment (an edge plus a price level), which the agent accepts with
//! a known probability, consuming one unit of the offline agent's capacity and
//! yielding a profit.
//!
//! This crate provides:
//!
//! - [`instance`] — the input model, validation, capacity expansion to unit
//!   form, built-in worst-case examples, and random instance generation;
//! - [`lp`] — the benchmark linear program and a dense-tableau simplex solver;
//! - [`policy`] — the two LP-based sampling policies (with and without
//!   attenuation factors);
//! - [`oracle`] — exact small-instance computations: clairvoyant and online
//!   optima, and exact expectation/variance evaluation of the policies;
//! - [`simulate`] — seeded Monte Carlo execution and replication statistics;
//! - [`stats`] — one-pass moment accumulation.

pub mod error;
pub mod instance;
pub mod lp;
pub mod oracle;
pub mod policy;
pub mod simplex;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use instance::{Assignment, Expanded, Instance, OriginMap, ValidationReport};
pub use lp::{LpProblem, LpSolution};
pub use oracle::{Budget, ExactEval, MatchMoments, OracleValue};
pub use policy::{Policy, PolicyConfig, PolicyKind, PolicyState, RoundOutcome};
pub use simulate::{McSummary, Trajectory};
