//! Greedy packing for a fixed tour under the chance constraint.
//!
//! Items are ranked by `profit^exp / (mean_weight^exp * remaining_distance)`
//! and added best first, keeping an item only while the plan still meets the
//! confidence level. The objective is only evaluated every `omega` items; a
//! window that lowers it is rolled back and the window size halved.

use serde::{Deserialize, Serialize};

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::evaluation::{meets_alpha, EvalContext, Evaluation, Solution};
use crate::instance::Instance;
use crate::scenario::ScenarioSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackConfig {
    pub exp: f64,
    pub tau: usize,
    pub alpha: f64,
}

impl PackConfig {
    pub fn new(exp: f64, alpha: f64) -> Self {
        Self { exp, tau: 10, alpha }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        validate_alpha(self.alpha)?;
        if !(self.exp >= 0.0) {
            return Err(Error::Config(format!("exponent must be non-negative, got {}", self.exp)));
        }
        Ok(())
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

/// Scores used to order items. Items with zero mean weight or at the end of
/// the tour score `+inf`.
pub fn item_scores(instance: &Instance, scenarios: &ScenarioSet, tour: &[usize], exp: f64) -> Vec<f64> {
    let ctx = EvalContext::new(instance, scenarios, tour);
    scores_in_context(&ctx, exp)
}

fn scores_in_context(ctx: &EvalContext<'_>, exp: f64) -> Vec<f64> {
    let instance = ctx.instance();
    let mean = ctx.scenarios().mean_weights();
    let rest = ctx.remaining_distance();
    let mut position = vec![0; instance.num_cities()];
    for (i, &c) in ctx.tour().iter().enumerate() {
        position[c] = i;
    }
    instance
        .profits()
        .iter()
        .zip(&mean)
        .zip(instance.item_city())
        .map(|((&p, &w), &city)| {
            let d = rest[position[city]];
            if w == 0.0 || d == 0.0 {
                f64::INFINITY
            } else {
                p.powf(exp) / (w.powf(exp) * d)
            }
        })
        .collect()
}

/// Item indices by non-increasing score, ties to the lower index.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Per-scenario carried weight, updated one item at a time.
#[derive(Debug, Clone, PartialEq)]
struct Loads {
    per_scenario: Vec<f64>,
}

impl Loads {
    fn empty(k: usize) -> Self {
        Self { per_scenario: vec![0.0; k] }
    }

    fn add(&mut self, scenarios: &ScenarioSet, item: usize) {
        for (s, load) in self.per_scenario.iter_mut().enumerate() {
            *load += scenarios.weights(s)[item];
        }
    }

    fn remove(&mut self, scenarios: &ScenarioSet, item: usize) {
        for (s, load) in self.per_scenario.iter_mut().enumerate() {
            *load -= scenarios.weights(s)[item];
        }
    }

    fn rate(&self, scenarios: &ScenarioSet, capacity: f64) -> f64 {
        scenarios
            .probs()
            .iter()
            .zip(&self.per_scenario)
            .filter(|(_, load)| **load <= capacity)
            .map(|(p, _)| p)
            .sum()
    }
}

/// Greedy packing for one exponent. The returned plan always meets `alpha`.
pub fn pack_ws(instance: &Instance, scenarios: &ScenarioSet, tour: &[usize], config: &PackConfig) -> Vec<bool> {
    pack_in_context(&EvalContext::new(instance, scenarios, tour), config).0
}

fn pack_in_context(ctx: &EvalContext<'_>, config: &PackConfig) -> (Vec<bool>, f64) {
    let scenarios = ctx.scenarios();
    let capacity = ctx.instance().capacity();
    let m = ctx.instance().num_items();
    let alpha = config.alpha;
    let order = ranking(&scores_in_context(ctx, config.exp));

    let mut omega = (m / config.tau.max(1)).max(1);
    let mut plan = vec![false; m];
    let mut loads = Loads::empty(scenarios.k());
    let mut best_plan = plan.clone();
    let mut best_loads = loads.clone();
    let mut best_z = f64::NEG_INFINITY;
    let mut t = 1;
    let mut t_best = 1;

    while t <= m && omega >= 1 {
        let item = order[t - 1];
        plan[item] = true;
        loads.add(scenarios, item);
        if meets_alpha(loads.rate(scenarios, capacity), alpha) {
            if t % omega == 0 {
                let z = ctx.evaluate(&plan, alpha).expected_z;
                if z < best_z {
                    plan.clone_from(&best_plan);
                    loads.clone_from(&best_loads);
                    t = t_best;
                    omega /= 2;
                } else {
                    best_plan.clone_from(&plan);
                    best_loads.clone_from(&loads);
                    best_z = z;
                    t_best = t;
                }
            }
        } else {
            plan[item] = false;
            loads.remove(scenarios, item);
        }
        t += 1;
    }

    // Items added after the last checkpoint have not been scored yet.
    if plan != best_plan {
        let z = ctx.evaluate(&plan, alpha).expected_z;
        if z >= best_z {
            best_plan = plan;
            best_z = z;
        }
    }
    if best_z == f64::NEG_INFINITY {
        best_z = ctx.evaluate(&best_plan, alpha).expected_z;
    }
    (best_plan, best_z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PackIterativeConfig {
    pub exp_lo: f64,
    pub exp_hi: f64,
    pub refinements: usize,
    /// Stop once the exponent interval is narrower than this.
    pub min_width: f64,
    pub tau: usize,
}

impl Default for PackIterativeConfig {
    fn default() -> Self {
        Self {
            exp_lo: 0.0,
            exp_hi: 10.0,
            refinements: 10,
            min_width: 0.1,
            tau: 10,
        }
    }
}

impl PackIterativeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.exp_lo >= 0.0 && self.exp_hi >= self.exp_lo) {
            return Err(Error::Config("exponent bounds must satisfy 0 <= lo <= hi".into()));
        }
        if self.tau == 0 {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackOutcome {
    pub plan: Vec<bool>,
    pub expected_z: f64,
    pub exp: f64,
    /// Number of greedy packings run.
    pub calls: u64,
}

/// Exponent search around [`pack_ws`]: packs at the middle and both ends of
/// the exponent interval, then repeatedly narrows the interval around the
/// best of the three. The budget counts greedy packings; the first one
/// (at the midpoint) always runs.
pub fn pack_iterative_ws(
    instance: &Instance,
    scenarios: &ScenarioSet,
    tour: &[usize],
    alpha: f64,
    config: &PackIterativeConfig,
    budget: &Budget,
) -> PackOutcome {
    pack_iterative_in_context(&EvalContext::new(instance, scenarios, tour), alpha, config, budget)
}

pub(crate) fn pack_iterative_in_context(
    ctx: &EvalContext<'_>,
    alpha: f64,
    config: &PackIterativeConfig,
    budget: &Budget,
) -> PackOutcome {
    let mut tried: Vec<(f64, Vec<bool>, f64)> = Vec::new();
    let mut calls = 0u64;

    let run = |exp: f64, tried: &mut Vec<(f64, Vec<bool>, f64)>, calls: &mut u64| -> Option<f64> {
        if let Some((_, _, z)) = tried.iter().find(|(e, _, _)| *e == exp) {
            return Some(*z);
        }
        if *calls > 0 && budget.exhausted(*calls) {
            return None;
        }
        let pc = PackConfig { exp, tau: config.tau, alpha };
        let (plan, z) = pack_in_context(ctx, &pc);
        *calls += 1;
        tried.push((exp, plan, z));
        Some(z)
    };

    let (mut lo, mut hi) = (config.exp_lo, config.exp_hi);
    let mut mid = (lo + hi) / 2.0;
    'search: {
        for e in [mid, lo, hi] {
            if run(e, &mut tried, &mut calls).is_none() {
                break 'search;
            }
        }
        for _ in 0..config.refinements {
            if hi - lo < config.min_width {
                break;
            }
            let z_of = |e: f64| tried.iter().find(|(x, _, _)| *x == e).map(|(_, _, z)| *z).unwrap();
            let (zl, zm, zh) = (z_of(lo), z_of(mid), z_of(hi));
            if zl >= zm && zl >= zh {
                hi = mid;
            } else if zm >= zh {
                lo = (lo + mid) / 2.0;
                hi = (mid + hi) / 2.0;
            } else {
                lo = mid;
            }
            mid = (lo + hi) / 2.0;
            for e in [mid, lo, hi] {
                if run(e, &mut tried, &mut calls).is_none() {
                    break 'search;
                }
            }
        }
    }

    let (exp, plan, expected_z) = tried
        .into_iter()
        .reduce(|best, next| {
            if next.2 > best.2 || (next.2 == best.2 && next.0 < best.0) {
                next
            } else {
                best
            }
        })
        .expect("the midpoint exponent is always packed");
    PackOutcome { plan, expected_z, exp, calls }
}

/// One pass over the plan's bits in index order, keeping each flip that
/// strictly raises the expected objective while still meeting `alpha`.
pub fn bitflip_step(instance: &Instance, scenarios: &ScenarioSet, solution: &Solution, alpha: f64) -> Vec<bool> {
    let ctx = EvalContext::new(instance, scenarios, &solution.tour);
    bitflip_in_context(&ctx, &solution.plan, alpha).0
}

pub(crate) fn bitflip_in_context(ctx: &EvalContext<'_>, plan: &[bool], alpha: f64) -> (Vec<bool>, Evaluation) {
    let mut plan = plan.to_vec();
    let mut current = ctx.evaluate(&plan, alpha);
    for i in 0..plan.len() {
        plan[i] = !plan[i];
        let ev = ctx.evaluate(&plan, alpha);
        if ev.is_feasible() && ev.expected_z > current.expected_z {
            current = ev;
        } else {
            plan[i] = !plan[i];
        }
    }
    (plan, current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{chance_rate, evaluate};
    use crate::instance::ItemSpec;
    use crate::scenario::{generate_scenarios, SetLabel};
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    const TOUR: [usize; 4] = [0, 1, 2, 3];

    fn toy4() -> Instance {
        crate::instance::tests::TOY4.parse().unwrap()
    }

    fn plans(m: usize) -> impl Iterator<Item = Vec<bool>> {
        (0u32..1 << m).map(move |mask| (0..m).map(|i| mask >> i & 1 == 1).collect())
    }

    /// Best feasible expected objective over every plan on a fixed tour.
    fn exhaustive_best(inst: &Instance, set: &ScenarioSet, tour: &[usize], alpha: f64) -> f64 {
        plans(inst.num_items())
            .map(|p| evaluate(inst, set, &Solution::new(tour.to_vec(), p), alpha))
            .filter(|e| e.is_feasible())
            .map(|e| e.expected_z)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn random_instance(n: usize, seed: u64) -> Instance {
        let mut rng = seed::rng(seed);
        let coords = (0..n).map(|_| (rng.random_range(0..60) as f64, rng.random_range(0..60) as f64)).collect();
        let items: Vec<ItemSpec> = (0..n - 1)
            .map(|i| ItemSpec {
                profit: rng.random_range(1..200) as f64,
                weight: rng.random_range(1..60) as f64,
                city: 1 + i % (n - 1),
            })
            .collect();
        Instance::new("rand", coords, &items, 120.0, 0.1, 1.0, 0.3).unwrap()
    }

    #[test]
    fn worked_scores() {
        let inst = toy4();
        let set = generate_scenarios(&inst, 0.0, SetLabel::A).unwrap();
        let s = item_scores(&inst, &set, &TOUR, 1.0);
        assert!((s[2] - 10.0).abs() < 1e-12);
        assert!((s[0] - 10.0 / 3.0).abs() < 1e-12);
        // Item 1 sits at city 2, seven units from the end of the tour.
        assert!((s[1] - 40.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn zero_exponent_scores_by_distance_only() {
        let inst = toy4();
        let set = generate_scenarios(&inst, 2.0, SetLabel::B).unwrap();
        let s = item_scores(&inst, &set, &TOUR, 0.0);
        assert_eq!(s, vec![1.0 / 10.0, 1.0 / 7.0, 1.0 / 3.0]);
    }

    #[test]
    fn zero_delta_scores_use_nominal_weights() {
        let inst = toy4();
        let set = generate_scenarios(&inst, 0.0, SetLabel::C).unwrap();
        let det = ScenarioSet::deterministic(inst.nominal_weights().to_vec());
        assert_eq!(item_scores(&inst, &set, &TOUR, 2.0), item_scores(&inst, &det, &TOUR, 2.0));
    }

    #[test]
    fn weightless_items_score_infinite() {
        let inst = Instance::new(
            "w0",
            vec![(0.0, 0.0), (3.0, 0.0)],
            &[ItemSpec { profit: 5.0, weight: 0.0, city: 1 }],
            1.0,
            0.1,
            1.0,
            1.0,
        )
        .unwrap();
        let set = ScenarioSet::deterministic(vec![0.0]);
        assert_eq!(item_scores(&inst, &set, &[0, 1], 1.0), vec![f64::INFINITY]);
    }

    #[test]
    fn nothing_fits() {
        let inst = Instance::new(
            "big",
            vec![(0.0, 0.0), (3.0, 0.0), (0.0, 4.0)],
            &[
                ItemSpec { profit: 5.0, weight: 10.0, city: 1 },
                ItemSpec { profit: 8.0, weight: 12.0, city: 2 },
            ],
            5.0,
            0.1,
            1.0,
            1.0,
        )
        .unwrap();
        let set = generate_scenarios(&inst, 2.0, SetLabel::A).unwrap();
        let plan = pack_ws(&inst, &set, &[0, 1, 2], &PackConfig::new(1.0, 0.8));
        assert_eq!(plan, vec![false, false]);
    }

    #[test]
    fn toy4_pack_below_exhaustive_optimum() {
        let inst = toy4();
        let set = generate_scenarios(&inst, 2.0, SetLabel::A).unwrap();
        let cfg = PackConfig { exp: 1.0, tau: 1, alpha: 0.8 };
        let plan = pack_ws(&inst, &set, &TOUR, &cfg);
        let ev = evaluate(&inst, &set, &Solution::new(TOUR.to_vec(), plan), 0.8);
        assert!(ev.is_feasible());
        assert!(ev.expected_z <= exhaustive_best(&inst, &set, &TOUR, 0.8));
        // The top-scored item (at the last city) packed on its own is feasible,
        // so the greedy result is at least as good as that single-item plan.
        let single = evaluate(&inst, &set, &Solution::new(TOUR.to_vec(), vec![false, false, true]), 0.8);
        assert!(single.is_feasible());
        assert!(ev.expected_z >= single.expected_z);
    }

    #[test]
    fn single_certain_scenario_equals_deterministic_greedy() {
        let inst = random_instance(15, 4);
        let det = ScenarioSet::deterministic(inst.nominal_weights().to_vec());
        let zero = generate_scenarios(&inst, 0.0, SetLabel::A).unwrap();
        let tour: Vec<usize> = (0..15).collect();
        let cfg = PackConfig::new(1.5, 1.0);
        assert_eq!(pack_ws(&inst, &det, &tour, &cfg), pack_ws(&inst, &zero, &tour, &cfg));
    }

    #[test]
    fn one_call_budget_packs_midpoint() {
        let inst = random_instance(20, 8);
        let set = generate_scenarios(&inst, 5.0, SetLabel::B).unwrap();
        let tour: Vec<usize> = (0..20).collect();
        let cfg = PackIterativeConfig::default();
        let out = pack_iterative_ws(&inst, &set, &tour, 0.8, &cfg, &Budget::steps(1));
        assert_eq!(out.calls, 1);
        assert_eq!(out.exp, 5.0);
        let mid = pack_ws(&inst, &set, &tour, &PackConfig { exp: 5.0, tau: cfg.tau, alpha: 0.8 });
        assert_eq!(out.plan, mid);
    }

    #[test]
    fn iterative_beats_single_exponent_on_toy4() {
        let inst = toy4();
        let set = generate_scenarios(&inst, 2.0, SetLabel::A).unwrap();
        let cfg = PackIterativeConfig { tau: 1, ..Default::default() };
        let out = pack_iterative_ws(&inst, &set, &TOUR, 0.8, &cfg, &Budget::unlimited());
        let single = pack_ws(&inst, &set, &TOUR, &PackConfig { exp: 1.0, tau: 1, alpha: 0.8 });
        let single_z = evaluate(&inst, &set, &Solution::new(TOUR.to_vec(), single), 0.8).expected_z;
        assert!(out.expected_z >= single_z);
        assert!(meets_alpha(chance_rate(&inst, &set, &out.plan), 0.8));
    }

    #[test]
    fn bitflip_fixed_point_at_optimum() {
        let inst = toy4();
        let set = generate_scenarios(&inst, 2.0, SetLabel::A).unwrap();
        let best = plans(3)
            .map(|p| (evaluate(&inst, &set, &Solution::new(TOUR.to_vec(), p.clone()), 0.8), p))
            .filter(|(e, _)| e.is_feasible())
            .max_by(|a, b| a.0.expected_z.total_cmp(&b.0.expected_z))
            .unwrap()
            .1;
        let out = bitflip_step(&inst, &set, &Solution::new(TOUR.to_vec(), best.clone()), 0.8);
        assert_eq!(out, best);
    }

    #[test]
    fn bitflip_picks_free_profit() {
        let inst = Instance::new(
            "r0",
            vec![(0.0, 0.0), (4.0, 0.0)],
            &[ItemSpec { profit: 9.0, weight: 1.0, city: 1 }],
            5.0,
            0.1,
            1.0,
            0.0,
        )
        .unwrap();
        let set = generate_scenarios(&inst, 1.0, SetLabel::A).unwrap();
        let out = bitflip_step(&inst, &set, &Solution::empty_plan(vec![0, 1], 1), 0.9);
        assert_eq!(out, vec![true]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn heuristics_feasible_and_below_optimum(
            seed in any::<u64>(),
            n in 3usize..10,
            delta in 0.0f64..20.0,
            label in 0usize..3,
            alpha in prop::sample::select(vec![0.8, 0.9, 1.0]),
        ) {
            let inst = random_instance(n, seed);
            let label = [SetLabel::A, SetLabel::B, SetLabel::C][label];
            let set = generate_scenarios(&inst, delta, label).unwrap();
            let tour: Vec<usize> = (0..n).collect();
            let opt = exhaustive_best(&inst, &set, &tour, alpha);
            let exp = (seed % 7) as f64;

            let packed = pack_ws(&inst, &set, &tour, &PackConfig { exp, tau: 1 + (seed % 4) as usize, alpha });
            let ev = evaluate(&inst, &set, &Solution::new(tour.clone(), packed.clone()), alpha);
            prop_assert!(ev.is_feasible());
            prop_assert!(ev.expected_z <= opt);

            let iter = pack_iterative_ws(&inst, &set, &tour, alpha, &PackIterativeConfig::default(), &Budget::unlimited());
            prop_assert!(meets_alpha(chance_rate(&inst, &set, &iter.plan), alpha));
            prop_assert!(iter.expected_z <= opt);

            let flipped = bitflip_step(&inst, &set, &Solution::new(tour.clone(), packed), alpha);
            let fev = evaluate(&inst, &set, &Solution::new(tour.clone(), flipped), alpha);
            prop_assert!(fev.is_feasible());
            prop_assert!(fev.expected_z >= ev.expected_z);
            prop_assert!(fev.expected_z <= opt);
        }

        #[test]
        fn pack_is_deterministic(seed in any::<u64>()) {
            let inst = random_instance(12, seed);
            let set = generate_scenarios(&inst, 10.0, SetLabel::C).unwrap();
            let tour: Vec<usize> = (0..12).collect();
            let cfg = PackConfig::new(2.0, 0.9);
            prop_assert_eq!(pack_ws(&inst, &set, &tour, &cfg), pack_ws(&inst, &set, &tour, &cfg));
        }
    }
}
