//! Solver entry points: the EA on a constructed tour, and the S5/C5 restart
//! pipelines.
//!
//! Each S5 restart builds a fresh tour and packs it with the exponent search.
//! C5 additionally runs one bit-flip pass and one insertion pass before the
//! restart is scored. Restart `r` draws its tour seed from the master seed
//! and `r` alone, so C5 and S5 with equal seeds walk the same tours.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::budget::Budget;
use crate::ea::{ea_run, EaConfig};
use crate::error::{Error, Result};
use crate::evaluation::{EvalContext, Evaluation, Solution};
use crate::instance::Instance;
use crate::packing::{bitflip_in_context, pack_iterative_in_context, validate_alpha, PackIterativeConfig};
use crate::scenario::ScenarioSet;
use crate::seed;
use crate::tour::{construct_tour_until, insertion_step_evaluated, TourSearchConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "EA_ws")]
    Ea,
    #[serde(rename = "S5_ws")]
    S5,
    #[serde(rename = "C5_ws")]
    C5,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Ea, Algorithm::S5, Algorithm::C5];

    /// Fixed column number used in result tables.
    pub fn number(self) -> usize {
        match self {
            Algorithm::Ea => 1,
            Algorithm::S5 => 2,
            Algorithm::C5 => 3,
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::Ea => "(1+1) EA_ws",
            Algorithm::S5 => "S5_ws",
            Algorithm::C5 => "C5_ws",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Ea => "EA_ws",
            Algorithm::S5 => "S5_ws",
            Algorithm::C5 => "C5_ws",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ea" | "ea_ws" | "(1+1) ea_ws" => Ok(Algorithm::Ea),
            "s5" | "s5_ws" => Ok(Algorithm::S5),
            "c5" | "c5_ws" => Ok(Algorithm::C5),
            _ => Err(Error::Config(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub budget_seconds: f64,
    /// Restart cap for S5/C5. With a cap that is reached before the
    /// deadline, results depend on the seed only.
    pub max_restarts: Option<u64>,
    /// Iteration cap for the EA.
    pub max_iterations: Option<u64>,
    pub rng_seed: u64,
    pub tour: TourSearchConfig,
    pub pack: PackIterativeConfig,
    pub mutation_rate: Option<f64>,
}

impl PipelineConfig {
    pub fn new(algorithm: Algorithm, alpha: f64, budget_seconds: f64, rng_seed: u64) -> Self {
        Self {
            algorithm,
            alpha,
            budget_seconds,
            max_restarts: None,
            max_iterations: None,
            rng_seed,
            tour: TourSearchConfig::default(),
            pack: PackIterativeConfig::default(),
            mutation_rate: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_alpha(self.alpha)?;
        if !(self.budget_seconds > 0.0) {
            return Err(Error::Config(format!("budget must be positive, got {}", self.budget_seconds)));
        }
        self.tour.validate()?;
        self.pack.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub solution: Solution,
    pub evaluation: Evaluation,
    /// Restarts for S5/C5, iterations for the EA.
    pub steps: u64,
    /// Expected objective of each restart, in order (empty for the EA).
    pub restart_scores: Vec<f64>,
    pub elapsed: Duration,
}

impl PipelineOutcome {
    pub fn is_empty_plan(&self) -> bool {
        !self.solution.plan.iter().any(|b| *b)
    }
}

pub fn run_pipeline(instance: &Instance, scenarios: &ScenarioSet, config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    if scenarios.num_items() != instance.num_items() {
        return Err(Error::Config(format!(
            "scenario set has {} items, instance has {}",
            scenarios.num_items(),
            instance.num_items()
        )));
    }
    Ok(match config.algorithm {
        Algorithm::Ea => ea_pipeline(instance, scenarios, config),
        Algorithm::S5 => restarts(instance, scenarios, config, false),
        Algorithm::C5 => restarts(instance, scenarios, config, true),
    })
}

pub fn s5_ws(instance: &Instance, scenarios: &ScenarioSet, config: &PipelineConfig) -> Result<PipelineOutcome> {
    run_pipeline(instance, scenarios, &PipelineConfig { algorithm: Algorithm::S5, ..*config })
}

pub fn c5_ws(instance: &Instance, scenarios: &ScenarioSet, config: &PipelineConfig) -> Result<PipelineOutcome> {
    run_pipeline(instance, scenarios, &PipelineConfig { algorithm: Algorithm::C5, ..*config })
}

fn restart_tour(instance: &Instance, config: &PipelineConfig, restart: u64) -> Vec<usize> {
    let tour_cfg = TourSearchConfig {
        rng_seed: seed::split(config.rng_seed, restart),
        ..config.tour
    };
    let kick_deadline = Instant::now().checked_add(Duration::from_secs_f64(
        (config.budget_seconds * tour_cfg.time_share).min(1e9),
    ));
    construct_tour_until(instance, &tour_cfg, kick_deadline)
}

fn restarts(instance: &Instance, scenarios: &ScenarioSet, config: &PipelineConfig, refine: bool) -> PipelineOutcome {
    let start = Instant::now();
    let mut budget = Budget::seconds(config.budget_seconds);
    if let Some(cap) = config.max_restarts {
        budget = budget.with_steps(cap.max(1));
    }
    let mut best: Option<(Solution, Evaluation)> = None;
    let mut scores = Vec::new();
    let mut done = 0u64;

    while done == 0 || !budget.exhausted(done) {
        let tour = restart_tour(instance, config, done);
        let ctx = EvalContext::new(instance, scenarios, &tour);
        let packed = pack_iterative_in_context(&ctx, config.alpha, &config.pack, &Budget::unlimited());
        let (solution, evaluation) = if refine {
            let (plan, _) = bitflip_in_context(&ctx, &packed.plan, config.alpha);
            insertion_step_evaluated(instance, scenarios, &Solution::new(tour, plan), config.alpha)
        } else {
            let ev = ctx.evaluate(&packed.plan, config.alpha);
            (Solution::new(tour, packed.plan), ev)
        };
        done += 1;
        scores.push(evaluation.expected_z);
        log::trace!("restart {done}: expected_z = {}", evaluation.expected_z);
        if best.as_ref().is_none_or(|(_, b)| evaluation.expected_z > b.expected_z) {
            best = Some((solution, evaluation));
        }
    }

    let (solution, evaluation) = best.expect("at least one restart runs");
    PipelineOutcome {
        solution,
        evaluation,
        steps: done,
        restart_scores: scores,
        elapsed: start.elapsed(),
    }
}

fn ea_pipeline(instance: &Instance, scenarios: &ScenarioSet, config: &PipelineConfig) -> PipelineOutcome {
    let start = Instant::now();
    let tour = restart_tour(instance, config, 0);
    let remaining = config.budget_seconds - start.elapsed().as_secs_f64();
    let ea_cfg = EaConfig {
        mutation_rate: config.mutation_rate,
        alpha: config.alpha,
        max_iterations: config.max_iterations,
        budget_seconds: Some(remaining.max(0.0)),
        rng_seed: seed::split(config.rng_seed, u64::MAX),
    };
    let (plan, trace) = ea_run(instance, scenarios, &tour, &ea_cfg);
    // With nothing accepted the best plan is still the empty one, which is always feasible.
    let evaluation = EvalContext::new(instance, scenarios, &tour).evaluate(&plan, config.alpha);
    PipelineOutcome {
        solution: Solution::new(tour, plan),
        evaluation,
        steps: trace.iterations,
        restart_scores: Vec::new(),
        elapsed: start.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::evaluate;
    use crate::packing::pack_iterative_ws;
    use crate::scenario::{generate_scenarios, SetLabel};
    use crate::tour::construct_tour;

    fn toy4() -> Instance {
        crate::instance::tests::TOY4.parse().unwrap()
    }

    fn capped(algorithm: Algorithm, restarts: u64, seed: u64) -> PipelineConfig {
        PipelineConfig {
            max_restarts: Some(restarts),
            max_iterations: Some(20_000),
            ..PipelineConfig::new(algorithm, 0.8, 60.0, seed)
        }
    }

    /// Best expected objective over all 3! tours starting at city 0 and all 2^3 plans.
    fn toy4_global_optimum(set: &ScenarioSet) -> f64 {
        let inst = toy4();
        let tours = [[0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1]];
        let mut best = f64::NEG_INFINITY;
        for tour in tours {
            for mask in 0u32..8 {
                let plan = (0..3).map(|i| mask >> i & 1 == 1).collect();
                let ev = evaluate(&inst, set, &Solution::new(tour.to_vec(), plan), 0.8);
                if ev.is_feasible() {
                    best = best.max(ev.expected_z);
                }
            }
        }
        best
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("c5".parse::<Algorithm>().unwrap(), Algorithm::C5);
        assert!("s6".parse::<Algorithm>().is_err());
    }

    #[test]
    fn single_restart_is_tour_plus_pack() {
        let inst = toy4();
        let set = generate_scenarios(&inst, 2.0, SetLabel::A).unwrap();
        let cfg = capped(Algorithm::S5, 1, 3);
        let out = s5_ws(&inst, &set, &cfg).unwrap();
        let tour = construct_tour(&inst, &TourSearchConfig { rng_seed: seed::split(3, 0), ..cfg.tour });
        let packed = pack_iterative_ws(&inst, &set, &tour, 0.8, &cfg.pack, &Budget::unlimited());
        assert_eq!(out.steps, 1);
        assert_eq!(out.solution, Solution::new(tour, packed.plan));
        assert_eq!(out.evaluation.expected_z, packed.expected_z);
    }

    #[test]
    fn toy4_restarts_reach_global_optimum() {
        let inst = toy4();
        let set = generate_scenarios(&inst, 2.0, SetLabel::A).unwrap();
        let opt = toy4_global_optimum(&set);
        let c5 = c5_ws(&inst, &set, &capped(Algorithm::C5, 20, 1)).unwrap();
        assert!((c5.evaluation.expected_z - opt).abs() < 1e-9, "{} vs {opt}", c5.evaluation.expected_z);
        let s5 = s5_ws(&inst, &set, &capped(Algorithm::S5, 20, 1)).unwrap();
        assert!(s5.evaluation.expected_z <= opt + 1e-9);
        assert!(c5.evaluation.expected_z >= s5.evaluation.expected_z);
    }

    #[test]
    fn c5_dominates_s5_per_restart() {
        let inst = toy4();
        for label in [SetLabel::A, SetLabel::B, SetLabel::C] {
            let set = generate_scenarios(&inst, 2.0, label).unwrap();
            let s5 = s5_ws(&inst, &set, &capped(Algorithm::S5, 5, 8)).unwrap();
            let c5 = c5_ws(&inst, &set, &capped(Algorithm::C5, 5, 8)).unwrap();
            for (s, c) in s5.restart_scores.iter().zip(&c5.restart_scores) {
                assert!(c >= s);
            }
        }
    }

    #[test]
    fn deterministic_with_restart_cap() {
        let inst = toy4();
        let set = generate_scenarios(&inst, 2.0, SetLabel::C).unwrap();
        for alg in Algorithm::ALL {
            let a = run_pipeline(&inst, &set, &capped(alg, 4, 21)).unwrap();
            let b = run_pipeline(&inst, &set, &capped(alg, 4, 21)).unwrap();
            assert_eq!(a.solution, b.solution);
            assert!(a.evaluation.is_feasible());
        }
    }

    #[test]
    fn tiny_budget_still_returns_a_feasible_solution() {
        let inst = toy4();
        let set = generate_scenarios(&inst, 2.0, SetLabel::B).unwrap();
        for alg in Algorithm::ALL {
            let out = run_pipeline(&inst, &set, &PipelineConfig::new(alg, 0.9, 1e-9, 0)).unwrap();
            assert!(out.evaluation.is_feasible());
            assert_eq!(
                out.evaluation.expected_z,
                evaluate(&inst, &set, &out.solution, 0.9).expected_z
            );
        }
    }

    #[test]
    fn rejects_mismatched_scenarios() {
        let inst = toy4();
        let set = ScenarioSet::deterministic(vec![1.0]);
        assert!(run_pipeline(&inst, &set, &capped(Algorithm::S5, 1, 0)).is_err());
    }
}
