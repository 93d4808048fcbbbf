//! Monte Carlo simulation and closed-form analysis of multi-view sensing
//! with over-the-air (AirComp) and analog orthogonal aggregation.
//!
//! Sensors observe a Gaussian-mixture class model through random low-rank
//! subspaces, upload analog features over a Rayleigh SIMO channel, and an
//! edge server classifies the aggregated feature by maximum likelihood.
//! The crate simulates that chain end to end ([`inference`]) and provides
//! the matching surrogates, bounds and asymptotic distributions
//! ([`theory`]) to compare against.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod feature_model;
pub mod harness;
pub mod inference;
pub mod rng;
pub mod scenario;
pub mod theory;

pub use channel::{AccessMode, AggregationOutcome, ChannelRealization};
pub use error::{IseaError, Result};
pub use harness::{ExperimentKind, ExperimentSpec, SweepReport, SweepRow};
pub use inference::{ClassifierModel, Pipeline, TrialRecord};
pub use rng::{SimRng, StreamKey};
pub use scenario::{build_scenario, Scenario, ScenarioBuilder, ScenarioConfig};
pub use theory::{SeparationSummary, SurrogateParams};
