//! Tour construction and refinement.
//!
//! Tours come from a chained local search: nearest neighbour from the first
//! city, 2-opt with neighbour lists and don't-look bits, then rounds of
//! double-bridge kicks each followed by re-optimisation, keeping the shortest
//! tour seen. [`insertion_step`] refines a tour for a given packing plan by
//! moving a city with picked items further back so its items ride for a
//! shorter distance.

use std::collections::VecDeque;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Evaluation, Solution};
use crate::instance::Instance;
use crate::scenario::ScenarioSet;
use crate::seed;

const NEIGHBOURS: usize = 10;
const GAIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TourSearchConfig {
    pub rng_seed: u64,
    pub max_chain_kicks: usize,
    pub dont_look_bits: bool,
    /// Share of the pipeline budget the kick phase may use per restart.
    pub time_share: f64,
}

impl Default for TourSearchConfig {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            max_chain_kicks: 50,
            dont_look_bits: true,
            time_share: 1.0,
        }
    }
}

impl TourSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_share > 0.0 && self.time_share <= 1.0) {
            return Err(Error::Config(format!("time_share must lie in (0, 1], got {}", self.time_share)));
        }
        Ok(())
    }
}

/// Builds a tour starting at city 0. Deterministic for a given seed.
pub fn construct_tour(instance: &Instance, config: &TourSearchConfig) -> Vec<usize> {
    construct_tour_until(instance, config, None)
}

/// As [`construct_tour`], but stops kicking once `deadline` has passed.
pub fn construct_tour_until(instance: &Instance, config: &TourSearchConfig, deadline: Option<Instant>) -> Vec<usize> {
    let n = instance.num_cities();
    if n <= 3 {
        return (0..n).collect();
    }
    let dist = DistanceCache::new(instance);
    let neighbours = neighbour_lists(&dist, NEIGHBOURS.min(n - 1));
    let mut current = CyclicTour::new(nearest_neighbour(&dist));
    two_opt(&mut current, &dist, &neighbours, config.dont_look_bits, None);
    let mut current_len = current.length(&dist);
    let mut best = current.clone();
    let mut best_len = current_len;

    let mut rng = seed::rng(config.rng_seed);
    for _ in 0..config.max_chain_kicks {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        let (candidate, touched) = double_bridge(&current.order, &mut rng);
        let mut candidate = CyclicTour::new(candidate);
        two_opt(&mut candidate, &dist, &neighbours, config.dont_look_bits, Some(&touched));
        let len = candidate.length(&dist);
        if len < current_len {
            current = candidate;
            current_len = len;
            if len < best_len {
                best = current.clone();
                best_len = len;
            }
        }
    }
    best.rotated_to_start()
}

/// Nearest-neighbour tour from city 0, ties to the lower index.
pub fn nearest_neighbour_tour(instance: &Instance) -> Vec<usize> {
    nearest_neighbour(&DistanceCache::new(instance))
}

struct DistanceCache {
    n: usize,
    d: Vec<f64>,
}

impl DistanceCache {
    fn new(instance: &Instance) -> Self {
        let n = instance.num_cities();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = instance.distance(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

fn nearest_neighbour(dist: &DistanceCache) -> Vec<usize> {
    let n = dist.n;
    let mut visited = vec![false; n];
    let mut tour = Vec::with_capacity(n);
    let mut at = 0;
    visited[0] = true;
    tour.push(0);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&c| !visited[c])
            .min_by(|&a, &b| dist.get(at, a).total_cmp(&dist.get(at, b)).then(a.cmp(&b)))
            .expect("unvisited city remains");
        visited[next] = true;
        tour.push(next);
        at = next;
    }
    tour
}

fn neighbour_lists(dist: &DistanceCache, k: usize) -> Vec<Vec<usize>> {
    (0..dist.n)
        .map(|i| {
            let mut others: Vec<usize> = (0..dist.n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dist.get(i, a).total_cmp(&dist.get(i, b)).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect()
}

#[derive(Debug, Clone)]
struct CyclicTour {
    order: Vec<usize>,
    pos: Vec<usize>,
}

impl CyclicTour {
    fn new(order: Vec<usize>) -> Self {
        let mut pos = vec![0; order.len()];
        for (i, &c) in order.iter().enumerate() {
            pos[c] = i;
        }
        Self { order, pos }
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    fn succ(&self, city: usize) -> usize {
        self.order[(self.pos[city] + 1) % self.len()]
    }

    fn pred(&self, city: usize) -> usize {
        self.order[(self.pos[city] + self.len() - 1) % self.len()]
    }

    fn length(&self, dist: &DistanceCache) -> f64 {
        let n = self.len();
        (0..n).map(|i| dist.get(self.order[i], self.order[(i + 1) % n])).sum()
    }

    /// Reverses the path from `from` to `to` (following successors). Reverses
    /// the complementary path instead when that one is shorter; both yield
    /// the same cycle.
    fn reverse_path(&mut self, from: usize, to: usize) {
        let n = self.len();
        let (mut i, mut j) = (self.pos[from], self.pos[to]);
        let mut span = (j + n - i) % n + 1;
        if 2 * span > n {
            let (ni, nj) = ((j + 1) % n, (i + n - 1) % n);
            i = ni;
            j = nj;
            span = n - span;
        }
        for _ in 0..span / 2 {
            let (a, b) = (self.order[i], self.order[j]);
            self.order[i] = b;
            self.order[j] = a;
            self.pos[b] = i;
            self.pos[a] = j;
            i = (i + 1) % n;
            j = (j + n - 1) % n;
        }
    }

    fn rotated_to_start(&self) -> Vec<usize> {
        let start = self.pos[0];
        let n = self.len();
        (0..n).map(|k| self.order[(start + k) % n]).collect()
    }
}

/// First-improvement 2-opt over neighbour lists. With don't-look bits only
/// cities near a recent change are re-examined; `seeds` restricts the
/// initial queue.
fn two_opt(
    tour: &mut CyclicTour,
    dist: &DistanceCache,
    neighbours: &[Vec<usize>],
    dont_look_bits: bool,
    seeds: Option<&[usize]>,
) {
    let n = tour.len();
    if n < 4 {
        return;
    }
    let mut queued = vec![false; n];
    let mut queue = VecDeque::new();
    let initial: Vec<usize> = match (dont_look_bits, seeds) {
        (true, Some(s)) => s.to_vec(),
        _ => tour.order.clone(),
    };
    for c in initial {
        if !queued[c] {
            queued[c] = true;
            queue.push_back(c);
        }
    }

    loop {
        let Some(a) = queue.pop_front() else {
            if dont_look_bits {
                break;
            }
            // Without don't-look bits, sweep every city until a full pass finds nothing.
            let mut improved = false;
            for idx in 0..n {
                let a = tour.order[idx];
                if improve_city(tour, dist, neighbours, a).is_some() {
                    improved = true;
                }
            }
            if !improved {
                break;
            }
            continue;
        };
        queued[a] = false;
        if let Some(touched) = improve_city(tour, dist, neighbours, a) {
            for c in touched {
                if !queued[c] {
                    queued[c] = true;
                    queue.push_back(c);
                }
            }
        }
    }
}

/// Applies the first improving 2-opt move around `a`, returning the
/// endpoints of the exchanged edges.
fn improve_city(tour: &mut CyclicTour, dist: &DistanceCache, neighbours: &[Vec<usize>], a: usize) -> Option<[usize; 4]> {
    // Successor direction: edges (a, succ a) and (c, succ c) become (a, c) and (succ a, succ c).
    let b = tour.succ(a);
    let ab = dist.get(a, b);
    for &c in &neighbours[a] {
        let ac = dist.get(a, c);
        if ac >= ab {
            break;
        }
        let d = tour.succ(c);
        if c == b || d == a {
            continue;
        }
        let gain = ab + dist.get(c, d) - ac - dist.get(b, d);
        if gain > GAIN_EPS {
            tour.reverse_path(b, c);
            return Some([a, b, c, d]);
        }
    }
    // Predecessor direction: edges (pred a, a) and (pred c, c) become (c, a) and (pred c, pred a).
    let b = tour.pred(a);
    let ab = dist.get(a, b);
    for &c in &neighbours[a] {
        let ac = dist.get(a, c);
        if ac >= ab {
            break;
        }
        let d = tour.pred(c);
        if c == b || d == a {
            continue;
        }
        let gain = ab + dist.get(c, d) - ac - dist.get(b, d);
        if gain > GAIN_EPS {
            tour.reverse_path(a, d);
            return Some([a, b, c, d]);
        }
    }
    None
}

/// Double-bridge kick: splits the tour into A B C D and reconnects as A C B D.
/// Returns the new order and the cities at the broken edges.
fn double_bridge<R: Rng>(order: &[usize], rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let n = order.len();
    if n < 5 {
        return (order.to_vec(), Vec::new());
    }
    let mut cuts = [0usize; 3];
    loop {
        for c in cuts.iter_mut() {
            *c = rng.random_range(1..n);
        }
        cuts.sort_unstable();
        if cuts[0] < cuts[1] && cuts[1] < cuts[2] {
            break;
        }
    }
    let [p1, p2, p3] = cuts;
    let mut next = Vec::with_capacity(n);
    next.extend_from_slice(&order[..p1]);
    next.extend_from_slice(&order[p2..p3]);
    next.extend_from_slice(&order[p1..p2]);
    next.extend_from_slice(&order[p3..]);
    let touched = vec![
        order[p1 - 1],
        order[p1],
        order[p2 - 1],
        order[p2],
        order[p3 - 1],
        order[p3],
        order[n - 1],
        order[0],
    ];
    (next, touched)
}

/// Moves the city at position `from` so that it ends up at position `to` (`to > from`).
fn relocate(tour: &[usize], from: usize, to: usize) -> Vec<usize> {
    let mut next = tour.to_vec();
    let city = next.remove(from);
    next.insert(to, city);
    next
}

/// One pass of the insertion refinement: for every city holding a picked
/// item, tries each later position in the tour and applies the single move
/// with the largest strict gain in expected objective. Ties go to the city
/// earlier in the tour, then to the smaller target position.
///
/// The packing plan is unchanged, so the feasibility rate is unchanged too.
pub fn insertion_step(instance: &Instance, scenarios: &ScenarioSet, solution: &Solution, alpha: f64) -> Solution {
    insertion_step_evaluated(instance, scenarios, solution, alpha).0
}

/// [`insertion_step`] that also returns the evaluation of the result.
pub fn insertion_step_evaluated(
    instance: &Instance,
    scenarios: &ScenarioSet,
    solution: &Solution,
    alpha: f64,
) -> (Solution, Evaluation) {
    let current = evaluate(instance, scenarios, solution, alpha);
    if !current.is_feasible() {
        return (solution.clone(), current);
    }
    let n = solution.tour.len();
    let mut best: Option<(Vec<usize>, Evaluation)> = None;
    let mut best_z = current.expected_z;
    for from in 1..n {
        let city = solution.tour[from];
        if !instance.items_at(city).iter().any(|&i| solution.plan[i]) {
            continue;
        }
        for to in (from + 1)..n {
            let tour = relocate(&solution.tour, from, to);
            let candidate = Solution::new(tour, solution.plan.clone());
            let ev = evaluate(instance, scenarios, &candidate, alpha);
            if ev.expected_z > best_z {
                best_z = ev.expected_z;
                best = Some((candidate.tour, ev));
            }
        }
    }
    match best {
        Some((tour, ev)) => (Solution::new(tour, solution.plan.clone()), ev),
        None => (solution.clone(), current),
    }
}
