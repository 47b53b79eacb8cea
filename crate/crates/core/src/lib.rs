//! Sequential steering of three-qubit states by unsharp observers.
//!
//! A chain of observers on one wing measures in turn with sharpness `λ`,
//! each passing the averaged post-measurement state on. The crate evaluates
//! tripartite steering inequalities for every observer, finds the smallest
//! sharpness that still violates, and builds the resulting threshold tables.

pub mod cascade;
pub mod cli;
pub mod error;
pub mod inequalities;
pub mod measurement;
pub mod qop;
pub mod search;
pub mod states;

pub use cascade::{run_cascade, run_cascade_oracle, CascadeResult, Scenario, ScenarioSpec};
pub use error::{Error, Result};
pub use inequalities::{evaluate, InequalityKind, SteeringDirection};
pub use measurement::{SettingTriple, Sharpness, UnsharpSetting};
pub use qop::{BlochDirection, ComplexMatrix, DensityMatrix, Outcome, Wing};
pub use search::{build_table, threshold_lambda, SearchConfig, ThresholdTable};
pub use states::{build_state, StateSpec};
