//! Solvers for the chance-constrained travelling thief problem under a
//! weighted scenario model.
//!
//! The thief visits every city once on a tour starting at the first city and
//! picks a subset of items. Item weights are uncertain and described by a
//! [`ScenarioSet`]; a packing plan is feasible when the probability mass of
//! scenarios in which it fits the knapsack reaches a confidence level
//! `alpha`. Three solvers are provided: a (1+1) EA over packing plans on a
//! fixed tour, and the S5/C5 restart pipelines built from tour search,
//! greedy packing and local refinements.

// NaN must fail range checks, so `!(x > 0.0)` is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budget;
pub mod ea;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod instance;
pub mod packing;
pub mod pipeline;
pub mod scenario;
pub mod seed;
pub mod stats;
pub mod tour;

pub use error::{Error, Result};
pub use evaluation::{chance_rate, deterministic_objective, evaluate, meets_alpha, EvalContext, Evaluation, Solution};
pub use instance::Instance;
pub use scenario::{generate_scenarios, ScenarioSet, SetLabel};
