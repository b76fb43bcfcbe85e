//! Objective and chance-constraint evaluation.
//!
//! A plan is feasible in scenario `s` when its total weight under that
//! scenario's weights fits the knapsack. The feasibility rate is the
//! probability mass of those scenarios, and the expected objective charges
//! travel time only for the feasible ones, each weighted by its raw
//! probability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::scenario::ScenarioSet;

/// Slack allowed when comparing a feasibility rate with `alpha`. Rates are
/// sums of decimal probabilities, e.g. `0.3 + 0.3 + 0.1 + 0.1` evaluates to
/// `0.7999999999999999`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Whether a feasibility rate satisfies the confidence level `alpha`.
pub fn meets_alpha(rate: f64, alpha: f64) -> bool {
    rate + FEASIBILITY_TOL >= alpha
}

/// A tour (0-based cities, starting at city 0) and a packing plan.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Solution {
    pub tour: Vec<usize>,
    pub plan: Vec<bool>,
}

impl Solution {
    pub fn new(tour: Vec<usize>, plan: Vec<bool>) -> Self {
        Self { tour, plan }
    }

    pub fn empty_plan(tour: Vec<usize>, items: usize) -> Self {
        Self { tour, plan: vec![false; items] }
    }

    pub fn validate(&self, instance: &Instance) -> Result<()> {
        validate_tour(&self.tour, instance.num_cities())?;
        if self.plan.len() != instance.num_items() {
            return Err(Error::Config(format!(
                "plan has {} bits, instance has {} items",
                self.plan.len(),
                instance.num_items()
            )));
        }
        Ok(())
    }

    pub fn picked(&self) -> impl Iterator<Item = usize> + '_ {
        self.plan.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }
}

pub fn validate_tour(tour: &[usize], n: usize) -> Result<()> {
    if tour.len() != n {
        return Err(Error::Config(format!("tour visits {} of {n} cities", tour.len())));
    }
    if tour.first() != Some(&0) {
        return Err(Error::Config("tour must start at the first city".into()));
    }
    let mut seen = vec![false; n];
    for &c in tour {
        if c >= n || std::mem::replace(&mut seen[c], true) {
            return Err(Error::Config(format!("tour is not a permutation (city {})", c + 1)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Expected objective, `-inf` when no scenario is feasible.
    pub expected_z: f64,
    pub feasibility_rate: f64,
    pub total_profit: f64,
    pub per_scenario_feasible: Vec<bool>,
    /// Travel time per scenario; `+inf` for scenarios the plan overloads.
    pub per_scenario_travel_time: Vec<f64>,
    pub alpha: f64,
}

impl Evaluation {
    pub fn is_feasible(&self) -> bool {
        meets_alpha(self.feasibility_rate, self.alpha)
    }
}

fn plan_weight(weights: &[f64], plan: &[bool]) -> f64 {
    weights.iter().zip(plan).filter(|(_, b)| **b).map(|(w, _)| w).sum()
}

fn plan_profit(instance: &Instance, plan: &[bool]) -> f64 {
    plan_weight(instance.profits(), plan)
}

/// Per-scenario total weight of the picked items.
pub fn scenario_weights(scenarios: &ScenarioSet, plan: &[bool]) -> Vec<f64> {
    scenarios.all_weights().iter().map(|w| plan_weight(w, plan)).collect()
}

/// Travel time of `tour` when the thief picks `plan` and items weigh `weights`.
/// `legs[i]` is the distance from `tour[i]` to the next city on the cycle.
fn travel_time(instance: &Instance, tour: &[usize], legs: &[f64], weights: &[f64], plan: &[bool]) -> f64 {
    let v_max = instance.v_max();
    let nu = instance.nu();
    let mut carried = 0.0;
    let mut time = 0.0;
    for (&city, &leg) in tour.iter().zip(legs) {
        for &item in instance.items_at(city) {
            if plan[item] {
                carried += weights[item];
            }
        }
        time += leg / (v_max - nu * carried);
    }
    time
}

fn tour_legs(instance: &Instance, tour: &[usize]) -> Vec<f64> {
    let n = tour.len();
    (0..n).map(|i| instance.distance(tour[i], tour[(i + 1) % n])).collect()
}

/// Classical TTP objective for one weight profile: profit minus renting rate
/// times travel time.
///
/// Returns [`Error::Overweight`] if the plan exceeds the capacity, since leg
/// speeds are then no longer bounded below by `v_min`.
pub fn deterministic_objective(instance: &Instance, weights: &[f64], solution: &Solution) -> Result<f64> {
    let weight = plan_weight(weights, &solution.plan);
    if weight > instance.capacity() {
        return Err(Error::Overweight { weight, capacity: instance.capacity() });
    }
    let legs = tour_legs(instance, &solution.tour);
    let time = travel_time(instance, &solution.tour, &legs, weights, &solution.plan);
    Ok(plan_profit(instance, &solution.plan) - instance.renting_rate() * time)
}

/// Probability mass of the scenarios in which `plan` fits the knapsack.
pub fn chance_rate(instance: &Instance, scenarios: &ScenarioSet, plan: &[bool]) -> f64 {
    let capacity = instance.capacity();
    scenarios
        .probs()
        .iter()
        .zip(scenarios.all_weights())
        .filter(|(_, w)| plan_weight(w, plan) <= capacity)
        .map(|(p, _)| p)
        .sum()
}

fn evaluate_with_legs(
    instance: &Instance,
    scenarios: &ScenarioSet,
    tour: &[usize],
    legs: &[f64],
    plan: &[bool],
    alpha: f64,
) -> Evaluation {
    let capacity = instance.capacity();
    let total_profit = plan_profit(instance, plan);
    let k = scenarios.k();
    let mut feasible = Vec::with_capacity(k);
    let mut times = Vec::with_capacity(k);
    let mut rate = 0.0;
    let mut expected_time = 0.0;
    for (p, weights) in scenarios.probs().iter().zip(scenarios.all_weights()) {
        if plan_weight(weights, plan) <= capacity {
            let t = travel_time(instance, tour, legs, weights, plan);
            rate += p;
            expected_time += p * t;
            feasible.push(true);
            times.push(t);
        } else {
            feasible.push(false);
            times.push(f64::INFINITY);
        }
    }
    let expected_z = if feasible.iter().any(|f| *f) {
        total_profit - instance.renting_rate() * expected_time
    } else {
        f64::NEG_INFINITY
    };
    Evaluation {
        expected_z,
        feasibility_rate: rate,
        total_profit,
        per_scenario_feasible: feasible,
        per_scenario_travel_time: times,
        alpha,
    }
}

/// Full evaluation of a solution against a scenario set.
pub fn evaluate(instance: &Instance, scenarios: &ScenarioSet, solution: &Solution, alpha: f64) -> Evaluation {
    let legs = tour_legs(instance, &solution.tour);
    evaluate_with_legs(instance, scenarios, &solution.tour, &legs, &solution.plan, alpha)
}

/// Evaluator bound to one tour, for loops that score many plans on it.
#[derive(Debug, Clone)]
pub struct EvalContext<'a> {
    instance: &'a Instance,
    scenarios: &'a ScenarioSet,
    tour: Vec<usize>,
    legs: Vec<f64>,
}

impl<'a> EvalContext<'a> {
    pub fn new(instance: &'a Instance, scenarios: &'a ScenarioSet, tour: &[usize]) -> Self {
        Self {
            instance,
            scenarios,
            tour: tour.to_vec(),
            legs: tour_legs(instance, tour),
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn scenarios(&self) -> &'a ScenarioSet {
        self.scenarios
    }

    pub fn tour(&self) -> &[usize] {
        &self.tour
    }

    pub fn evaluate(&self, plan: &[bool], alpha: f64) -> Evaluation {
        evaluate_with_legs(self.instance, self.scenarios, &self.tour, &self.legs, plan, alpha)
    }

    pub fn chance_rate(&self, plan: &[bool]) -> f64 {
        chance_rate(self.instance, self.scenarios, plan)
    }

    /// Distance from each tour position back to the start along the tour.
    pub fn remaining_distance(&self) -> Vec<f64> {
        let mut rest = vec![0.0; self.legs.len()];
        let mut acc = 0.0;
        for i in (0..self.legs.len()).rev() {
            acc += self.legs[i];
            rest[i] = acc;
        }
        rest
    }
}
