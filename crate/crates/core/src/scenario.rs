//! Weighted scenario sets: `k` item-weight profiles, each with a probability
//! of occurrence.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;

/// Tolerance on the probability sum of a scenario set.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetLabel {
    A,
    B,
    C,
    #[serde(rename = "custom")]
    Custom,
}

impl SetLabel {
    /// Occurrence probabilities of the five shifted scenarios, lightest first.
    pub fn probabilities(self) -> Option<[f64; 5]> {
        match self {
            SetLabel::A => Some([0.2, 0.2, 0.2, 0.2, 0.2]),
            SetLabel::B => Some([0.1, 0.1, 0.2, 0.3, 0.3]),
            SetLabel::C => Some([0.3, 0.3, 0.2, 0.1, 0.1]),
            SetLabel::Custom => None,
        }
    }
}

impl fmt::Display for SetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetLabel::A => "A",
            SetLabel::B => "B",
            SetLabel::C => "C",
            SetLabel::Custom => "custom",
        })
    }
}

impl FromStr for SetLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(SetLabel::A),
            "B" | "b" => Ok(SetLabel::B),
            "C" | "c" => Ok(SetLabel::C),
            "custom" => Ok(SetLabel::Custom),
            other => Err(Error::Config(format!("unknown scenario set {other:?}"))),
        }
    }
}

/// A validated scenario set. Construct with [`ScenarioSet::new`] or
/// [`generate_scenarios`]; the fields cannot be mutated afterwards.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSet {
    label: SetLabel,
    delta: f64,
    probs: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawScenarioSet {
    label: SetLabel,
    delta: f64,
    probs: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

impl ScenarioSet {
    pub fn new(label: SetLabel, delta: f64, probs: Vec<f64>, weights: Vec<Vec<f64>>) -> Result<Self> {
        let bad = |m: String| Err(Error::Scenario(m));
        if probs.is_empty() {
            return bad("at least one scenario is required".into());
        }
        if probs.len() != weights.len() {
            return bad(format!("{} probabilities for {} weight profiles", probs.len(), weights.len()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return bad(format!("probabilities sum to {total}, not 1"));
        }
        let m = weights[0].len();
        if weights.iter().any(|w| w.len() != m) {
            return bad("weight profiles differ in length".into());
        }
        if weights.iter().flatten().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad("weights must be finite and non-negative".into());
        }
        if !(delta >= 0.0) {
            return bad(format!("delta must be non-negative, got {delta}"));
        }
        Ok(Self { label, delta, probs, weights })
    }

    /// A single scenario with probability one: the deterministic problem.
    pub fn deterministic(weights: Vec<f64>) -> Self {
        Self::new(SetLabel::Custom, 0.0, vec![1.0], vec![weights]).expect("single scenario is valid")
    }

    pub fn label(&self) -> SetLabel {
        self.label
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn num_items(&self) -> usize {
        self.weights[0].len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn weights(&self, scenario: usize) -> &[f64] {
        &self.weights[scenario]
    }

    pub fn all_weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Probability-weighted mean weight of each item.
    pub fn mean_weights(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.num_items()];
        for (p, w) in self.probs.iter().zip(&self.weights) {
            for (acc, wi) in mean.iter_mut().zip(w) {
                *acc += p * wi;
            }
        }
        mean
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario sets always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawScenarioSet = serde_json::from_str(text)?;
        Self::new(raw.label, raw.delta, raw.probs, raw.weights)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Builds the five-scenario set obtained by shifting every nominal weight by
/// `-delta, -delta/2, 0, +delta/2, +delta`. Downward shifts are skipped for
/// items lighter than the shift so no weight goes negative.
pub fn generate_scenarios(instance: &Instance, delta: f64, label: SetLabel) -> Result<ScenarioSet> {
    let probs = label
        .probabilities()
        .ok_or_else(|| Error::Scenario("custom sets cannot be generated".into()))?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Scenario(format!("delta must be non-negative, got {delta}")));
    }
    let half = delta / 2.0;
    let shift_down = |a: f64, by: f64| if a >= by { a - by } else { a };
    let nominal = instance.nominal_weights();
    let weights = vec![
        nominal.iter().map(|&a| shift_down(a, delta)).collect(),
        nominal.iter().map(|&a| shift_down(a, half)).collect(),
        nominal.to_vec(),
        nominal.iter().map(|&a| a + half).collect(),
        nominal.iter().map(|&a| a + delta).collect(),
    ];
    ScenarioSet::new(label, delta, probs.to_vec(), weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::ItemSpec;
    use proptest::prelude::*;

    fn single_item(weight: f64) -> Instance {
        Instance::new(
            "one",
            vec![(0.0, 0.0), (1.0, 0.0)],
            &[ItemSpec { profit: 1.0, weight, city: 1 }],
            1000.0,
            0.1,
            1.0,
            1.0,
        )
        .unwrap()
    }

    fn column(set: &ScenarioSet, item: usize) -> Vec<f64> {
        (0..set.k()).map(|s| set.weights(s)[item]).collect()
    }

    #[test]
    fn shifted_weights_for_heavy_item() {
        let set = generate_scenarios(&single_item(100.0), 20.0, SetLabel::A).unwrap();
        assert_eq!(column(&set, 0), vec![80.0, 90.0, 100.0, 110.0, 120.0]);
    }

    #[test]
    fn light_item_skips_downward_shifts() {
        let set = generate_scenarios(&single_item(5.0), 20.0, SetLabel::A).unwrap();
        assert_eq!(column(&set, 0), vec![5.0, 5.0, 5.0, 15.0, 25.0]);
    }

    #[test]
    fn probability_columns() {
        let inst = single_item(5.0);
        let b = generate_scenarios(&inst, 20.0, SetLabel::B).unwrap();
        assert_eq!(b.probs(), &[0.1, 0.1, 0.2, 0.3, 0.3]);
        for label in [SetLabel::A, SetLabel::B, SetLabel::C] {
            let total: f64 = label.probabilities().unwrap().iter().sum();
            assert_eq!(total, 1.0);
        }
    }

    #[test]
    fn zero_delta_repeats_nominal() {
        let inst: Instance = crate::instance::tests::TOY4.parse().unwrap();
        let set = generate_scenarios(&inst, 0.0, SetLabel::C).unwrap();
        for s in 0..5 {
            assert_eq!(set.weights(s), inst.nominal_weights());
        }
    }

    #[test]
    fn json_round_trip() {
        let inst: Instance = crate::instance::tests::TOY4.parse().unwrap();
        let set = generate_scenarios(&inst, 20.0, SetLabel::A).unwrap();
        assert_eq!(ScenarioSet::from_json(&set.to_json()).unwrap(), set);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let text = r#"{"label":"custom","delta":0,"probs":[0.5,0.6],"weights":[[1],[1]]}"#;
        assert!(matches!(ScenarioSet::from_json(text), Err(Error::Scenario(_))));
    }

    #[test]
    fn rejects_empty_and_negative() {
        let empty = r#"{"label":"custom","delta":0,"probs":[],"weights":[]}"#;
        assert!(ScenarioSet::from_json(empty).is_err());
        let negative = r#"{"label":"A","delta":0,"probs":[1.0],"weights":[[-1]]}"#;
        assert!(ScenarioSet::from_json(negative).is_err());
    }

    proptest! {
        #[test]
        fn generated_weights_ordered_and_non_negative(
            a in 0.0f64..500.0,
            delta in 0.0f64..100.0,
        ) {
            let set = generate_scenarios(&single_item(a), delta, SetLabel::B).unwrap();
            let col = column(&set, 0);
            prop_assert!(col.iter().all(|w| *w >= 0.0));
            if a >= delta {
                prop_assert!(col.windows(2).all(|w| w[0] <= w[1]));
            }
        }

        #[test]
        fn json_round_trip_is_exact(
            weights in proptest::collection::vec(0.0f64..1e6, 1..20),
            delta in 0.0f64..50.0,
        ) {
            let inst = Instance::new(
                "p",
                (0..=weights.len()).map(|i| (i as f64, 0.0)).collect(),
                &weights
                    .iter()
                    .enumerate()
                    .map(|(i, &w)| ItemSpec { profit: 1.0, weight: w, city: i + 1 })
                    .collect::<Vec<_>>(),
                10.0,
                0.1,
                1.0,
                1.0,
            )
            .unwrap();
            let set = generate_scenarios(&inst, delta, SetLabel::C).unwrap();
            prop_assert_eq!(ScenarioSet::from_json(&set.to_json()).unwrap(), set);
        }
    }
}
