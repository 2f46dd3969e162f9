//! Nested distributed optimization under heavy-tailed gradient noise.
//!
//! Nodes run clipped local SGD on their data shard; a coordinator averages
//! the resulting displacements into a pseudogradient and feeds it to an outer
//! optimizer (plain averaging, BiClip, Adagrad, RMSProp or Adam). The crate
//! provides the clipping operators and schedules, heavy-tailed noise
//! samplers, synthetic least-squares problems, a deterministic multi-node
//! simulator and an experiment harness.
//!
//! The numerical core is generic over [`Real`]; the aliases below fix it to
//! `f64`, which is what the harness and CLI use.

// `!(a > b)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clipping;
pub mod engine;
pub mod error;
pub mod harness;
pub mod noise;
pub mod problems;
pub mod scalar;
pub mod stream;
pub mod vectorops;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ParamVector = vectorops::Vector<f64>;
pub type BiClipThresholds = clipping::BiClipThresholds<f64>;
pub type Schedule = clipping::Schedule<f64>;
pub type RegressionProblem = problems::RegressionProblem<f64>;
pub type InnerSpec = engine::InnerSpec<f64>;
pub type OuterSpec = engine::OuterSpec<f64>;
pub type OuterOptState = engine::OuterOptState<f64>;
pub type RoundReport = engine::RoundReport<f64>;
