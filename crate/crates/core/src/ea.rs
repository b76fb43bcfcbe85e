//! (1+1) EA over packing plans on a fixed tour.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::evaluation::EvalContext;
use crate::instance::Instance;
use crate::packing::validate_alpha;
use crate::scenario::ScenarioSet;
use crate::seed;

/// How often the wall clock is consulted, in iterations.
const CLOCK_STRIDE: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EaConfig {
    /// Per-bit flip probability; `None` means `1/m`.
    pub mutation_rate: Option<f64>,
    pub alpha: f64,
    pub max_iterations: Option<u64>,
    pub budget_seconds: Option<f64>,
    pub rng_seed: u64,
}

impl EaConfig {
    pub fn iterations(alpha: f64, max_iterations: u64, rng_seed: u64) -> Self {
        Self {
            mutation_rate: None,
            alpha,
            max_iterations: Some(max_iterations),
            budget_seconds: None,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_alpha(self.alpha)?;
        if let Some(rate) = self.mutation_rate {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(Error::Config(format!("mutation rate must lie in (0, 1], got {rate}")));
            }
        }
        if self.max_iterations.is_none() && self.budget_seconds.is_none() {
            return Err(Error::Config("the EA needs an iteration cap or a time budget".into()));
        }
        Ok(())
    }

    fn rate_for(&self, m: usize) -> f64 {
        self.mutation_rate.unwrap_or(if m == 0 { 1.0 } else { 1.0 / m as f64 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EaTrace {
    pub iterations: u64,
    /// Best accepted objective; `-inf` until something is accepted.
    pub best_z: f64,
    pub best_plan: Vec<bool>,
    pub acceptances: u64,
    /// `(iteration, best_z)` each time the best objective strictly rose.
    pub improvements: Vec<(u64, f64)>,
}

impl EaTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,best_z\n");
        for (t, z) in &self.improvements {
            let _ = writeln!(out, "{t},{z}");
        }
        out
    }
}

/// Flips each bit independently with probability `rate`; returns the number flipped.
pub fn mutate<R: Rng>(plan: &mut [bool], rate: f64, rng: &mut R) -> usize {
    let mut flips = 0;
    for bit in plan.iter_mut() {
        if rng.random::<f64>() < rate {
            *bit = !*bit;
            flips += 1;
        }
    }
    flips
}

/// Runs the EA from the empty plan. A mutant replaces both the current and
/// the best plan when it meets `alpha` and its expected objective is at
/// least the best so far.
pub fn ea_run(instance: &Instance, scenarios: &ScenarioSet, tour: &[usize], config: &EaConfig) -> (Vec<bool>, EaTrace) {
    let ctx = EvalContext::new(instance, scenarios, tour);
    let m = instance.num_items();
    let rate = config.rate_for(m);
    let mut budget = Budget::unlimited();
    if let Some(cap) = config.max_iterations {
        budget = budget.with_steps(cap);
    }
    if let Some(secs) = config.budget_seconds {
        budget = budget.with_seconds(secs);
    }
    let time_only = Budget::unlimited().with_deadline(budget.deadline());
    let step_only = budget.max_steps().map(Budget::steps).unwrap_or_default();

    let mut rng = seed::rng(config.rng_seed);
    let mut current = vec![false; m];
    let mut trace = EaTrace {
        iterations: 0,
        best_z: f64::NEG_INFINITY,
        best_plan: current.clone(),
        acceptances: 0,
        improvements: Vec::new(),
    };
    let mut candidate = current.clone();

    loop {
        if step_only.exhausted(trace.iterations)
            || (trace.iterations.is_multiple_of(CLOCK_STRIDE) && time_only.exhausted(0))
        {
            break;
        }
        candidate.copy_from_slice(&current);
        mutate(&mut candidate, rate, &mut rng);
        let ev = ctx.evaluate(&candidate, config.alpha);
        trace.iterations += 1;
        if ev.is_feasible() && ev.expected_z >= trace.best_z {
            if ev.expected_z > trace.best_z {
                trace.improvements.push((trace.iterations, ev.expected_z));
            }
            trace.best_z = ev.expected_z;
            trace.acceptances += 1;
            current.copy_from_slice(&candidate);
            trace.best_plan.copy_from_slice(&candidate);
        }
    }
    (trace.best_plan.clone(), trace)
}
