//! Rank-based comparison of algorithms: the Kruskal-Wallis H test and Dunn's
//! pairwise post-hoc test with Bonferroni-adjusted p-values.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGroup {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleGroup {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self { label: label.into(), values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// Significantly higher mean rank.
    Better,
    Worse,
    NoDifference,
}

impl Verdict {
    pub fn symbol(self) -> char {
        match self {
            Verdict::Better => '+',
            Verdict::Worse => '-',
            Verdict::NoDifference => '*',
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Verdict::Better => Verdict::Worse,
            Verdict::Worse => Verdict::Better,
            Verdict::NoDifference => Verdict::NoDifference,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KruskalWallis {
    pub h: f64,
    pub p: f64,
    pub df: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseComparison {
    pub first: usize,
    pub second: usize,
    /// Positive when `first` has the higher mean rank.
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    /// Verdict from the perspective of `first`.
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    pub h: f64,
    pub p: f64,
    pub significance: f64,
    pub labels: Vec<String>,
    pub mean_ranks: Vec<f64>,
    pub pairs: Vec<PairwiseComparison>,
}

impl ComparisonResult {
    pub fn omnibus_significant(&self) -> bool {
        self.p < self.significance
    }

    /// Verdict of group `row` against group `col`.
    pub fn verdict(&self, row: usize, col: usize) -> Verdict {
        if row == col {
            return Verdict::NoDifference;
        }
        let pair = self
            .pairs
            .iter()
            .find(|p| (p.first, p.second) == (row.min(col), row.max(col)))
            .expect("every pair is compared");
        if pair.first == row {
            pair.verdict
        } else {
            pair.verdict.flipped()
        }
    }
}

/// Midranks of `values` (1-based) and the tie term `sum(t^3 - t)` over tie groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

struct Pooled {
    n_total: f64,
    mean_ranks: Vec<f64>,
    sizes: Vec<f64>,
    ties: f64,
}

fn pool(groups: &[SampleGroup]) -> Result<Pooled> {
    if groups.len() < 2 {
        return Err(Error::Config("at least two groups are needed".into()));
    }
    if let Some(g) = groups.iter().find(|g| g.values.is_empty()) {
        return Err(Error::Config(format!("group {:?} is empty", g.label)));
    }
    let all: Vec<f64> = groups.iter().flat_map(|g| g.values.iter().copied()).collect();
    let (ranks, ties) = midranks(&all);
    let mut mean_ranks = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for g in groups {
        let n = g.values.len();
        mean_ranks.push(ranks[offset..offset + n].iter().sum::<f64>() / n as f64);
        offset += n;
    }
    Ok(Pooled {
        n_total: all.len() as f64,
        mean_ranks,
        sizes: groups.iter().map(|g| g.values.len() as f64).collect(),
        ties,
    })
}

/// Kruskal-Wallis H with tie correction; the p-value comes from the
/// chi-squared distribution with `groups - 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[SampleGroup]) -> Result<KruskalWallis> {
    let pooled = pool(groups)?;
    Ok(kruskal_from_pooled(&pooled))
}

fn kruskal_from_pooled(pooled: &Pooled) -> KruskalWallis {
    let n = pooled.n_total;
    let df = pooled.sizes.len() - 1;
    let correction = 1.0 - pooled.ties / (n * n * n - n);
    if correction <= 0.0 {
        return KruskalWallis { h: 0.0, p: 1.0, df };
    }
    let sum: f64 = pooled
        .mean_ranks
        .iter()
        .zip(&pooled.sizes)
        .map(|(r, s)| s * r * r)
        .sum();
    let h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
    let h = h.max(0.0);
    KruskalWallis { h, p: chi_squared_sf(h, df as f64), df }
}

/// Dunn's test on every pair of groups with Bonferroni correction. Pairwise
/// verdicts are only issued when the Kruskal-Wallis test rejects at
/// `significance`; otherwise every verdict is [`Verdict::NoDifference`].
pub fn dunn_bonferroni(groups: &[SampleGroup], significance: f64) -> Result<ComparisonResult> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::Config(format!("significance must lie in (0, 1), got {significance}")));
    }
    let pooled = pool(groups)?;
    let kw = kruskal_from_pooled(&pooled);
    let g = groups.len();
    let n = pooled.n_total;
    let pair_count = (g * (g - 1) / 2) as f64;
    let variance_base = n * (n + 1.0) / 12.0 - pooled.ties / (12.0 * (n - 1.0));
    let gate = kw.p < significance;

    let mut pairs = Vec::with_capacity(g * (g - 1) / 2);
    for i in 0..g {
        for j in (i + 1)..g {
            let se = (variance_base * (1.0 / pooled.sizes[i] + 1.0 / pooled.sizes[j])).sqrt();
            let diff = pooled.mean_ranks[i] - pooled.mean_ranks[j];
            let z = if se > 0.0 { diff / se } else { 0.0 };
            let p_raw = (2.0 * normal_sf(z.abs())).min(1.0);
            let p_adjusted = (p_raw * pair_count).min(1.0);
            let verdict = if gate && p_adjusted < significance {
                if diff > 0.0 {
                    Verdict::Better
                } else {
                    Verdict::Worse
                }
            } else {
                Verdict::NoDifference
            };
            pairs.push(PairwiseComparison { first: i, second: j, z, p_raw, p_adjusted, verdict });
        }
    }
    Ok(ComparisonResult {
        h: kw.h,
        p: kw.p,
        significance,
        labels: groups.iter().map(|g| g.label.clone()).collect(),
        mean_ranks: pooled.mean_ranks,
        pairs,
    })
}

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "gamma_q needs a > 0");
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // Series for P(a, x).
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        // Continued fraction for Q(a, x), modified Lentz.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// Survival function of the chi-squared distribution.
pub fn chi_squared_sf(x: f64, df: f64) -> f64 {
    gamma_q(df / 2.0, x / 2.0)
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        gamma_q(0.5, x * x)
    } else {
        2.0 - gamma_q(0.5, x * x)
    }
}

/// Upper tail of the standard normal distribution.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}
