//! A fixed catalog of time-series features and Boruta all-relevant
//! feature selection on top of random-forest importances.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classifiers::{fit_random_forest, importances, Dataset, ForestParams};
use crate::error::{invalid, Error, Result};
use crate::features::FeatureVector;
use crate::rng::{derive_seed, derived_rng};
use crate::trajectory::Trajectory;

pub const PREFIX: &str = "ts.";

pub const CATALOG: [&str; 26] = [
    "mean",
    "variance",
    "standard_deviation",
    "skewness",
    "kurtosis",
    "minimum",
    "maximum",
    "median",
    "quantile_0.1",
    "quantile_0.9",
    "abs_energy",
    "mean_abs_change",
    "mean_change",
    "count_above_mean",
    "count_below_mean",
    "longest_strike_above_mean",
    "longest_strike_below_mean",
    "first_location_of_minimum",
    "last_location_of_maximum",
    "number_mean_crossings",
    "autocorrelation_lag1",
    "autocorrelation_lag2",
    "autocorrelation_lag3",
    "linear_trend_slope",
    "linear_trend_intercept",
    "linear_trend_r2",
];

pub fn feature_names() -> Vec<String> {
    CATALOG.iter().map(|n| format!("{PREFIX}{n}")).collect()
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn longest_run(x: &[f64], pred: impl Fn(f64) -> bool) -> usize {
    let mut best = 0;
    let mut cur = 0;
    for &v in x {
        if pred(v) {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

/// Feature values in catalog order.
pub fn compute(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("series of length {n}, need at least 4")));
    }
    let nf = n as f64;
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let constant = lo == hi;
    let mean = if constant { lo } else { x.iter().sum::<f64>() / nf };
    let moment = |k: i32| x.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / nf;
    let m2 = if constant { 0.0 } else { moment(2) };
    let (skew, kurt) = if m2 > 0.0 {
        (moment(3) / m2.powf(1.5), moment(4) / (m2 * m2) - 3.0)
    } else {
        (f64::NAN, f64::NAN)
    };
    let diffs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let argmin = x.iter().enumerate().fold(0, |b, (i, &v)| if v < x[b] { i } else { b });
    let argmax_last = x.iter().enumerate().fold(0, |b, (i, &v)| if v >= x[b] { i } else { b });
    let above: Vec<bool> = x.iter().map(|&v| v > mean).collect();
    let crossings = above.windows(2).filter(|w| w[0] != w[1]).count();
    let acf = |lag: usize| {
        if m2 > 0.0 {
            (0..n - lag).map(|t| (x[t] - mean) * (x[t + lag] - mean)).sum::<f64>() / ((n - lag) as f64 * m2)
        } else {
            f64::NAN
        }
    };
    let t_mean = (nf - 1.0) / 2.0;
    let sxx: f64 = (0..n).map(|t| (t as f64 - t_mean).powi(2)).sum();
    let sxy: f64 = x.iter().enumerate().map(|(t, v)| (t as f64 - t_mean) * (v - mean)).sum();
    let slope = sxy / sxx;
    let syy = m2 * nf;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).min(1.0) } else { f64::NAN };

    Ok(vec![
        mean,
        m2,
        m2.sqrt(),
        skew,
        kurt,
        lo,
        hi,
        quantile(&sorted, 0.5),
        quantile(&sorted, 0.1),
        quantile(&sorted, 0.9),
        x.iter().map(|v| v * v).sum(),
        diffs.iter().map(|d| d.abs()).sum::<f64>() / (n - 1) as f64,
        (x[n - 1] - x[0]) / (n - 1) as f64,
        x.iter().filter(|&&v| v > mean).count() as f64,
        x.iter().filter(|&&v| v < mean).count() as f64,
        longest_run(x, |v| v > mean) as f64,
        longest_run(x, |v| v < mean) as f64,
        argmin as f64 / nf,
        (argmax_last + 1) as f64 / nf,
        crossings as f64,
        acf(1),
        acf(2),
        acf(3),
        slope,
        mean - slope * t_mean,
        r2,
    ])
}

pub fn extract(t: &Trajectory) -> Result<FeatureVector> {
    Ok(FeatureVector { names: feature_names(), values: compute(&t.values)?, origin: t.origin })
}

/// Catalog applied to each algorithm segment of a (concatenated)
/// trajectory, names prefixed with the segment letter.
pub fn extract_parts(t: &Trajectory) -> Result<FeatureVector> {
    t.check_layout()?;
    let mut names = Vec::new();
    let mut values = Vec::new();
    let mut start = 0;
    for part in &t.parts {
        let seg = &t.values[start..start + part.len()];
        start += part.len();
        values.extend(compute(seg)?);
        names.extend(feature_names().into_iter().map(|n| format!("{}.{n}", part.algorithm.letter())));
    }
    Ok(FeatureVector { names, values, origin: t.origin })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BorutaParams {
    pub max_iter: usize,
    pub alpha: f64,
    pub n_trees: usize,
}

impl Default for BorutaParams {
    fn default() -> Self {
        Self { max_iter: 50, alpha: 0.05, n_trees: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accepted,
    Rejected,
    Tentative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub names: Vec<String>,
    pub kept: Vec<bool>,
    pub iterations: usize,
    pub hit_counts: Vec<usize>,
    /// State when the procedure stopped; features still tentative count as
    /// rejected in `kept`.
    pub decisions: Vec<Decision>,
    pub fallback: bool,
}

impl SelectionMask {
    pub fn kept_indices(&self) -> Vec<usize> {
        (0..self.kept.len()).filter(|&i| self.kept[i]).collect()
    }
}

/// ln C(n, k) for every k.
fn ln_binomials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + ((n - k + 1) as f64).ln() - (k as f64).ln();
    }
    out
}

/// P(X >= h) and P(X <= h) for X ~ Binomial(n, 1/2).
pub fn binomial_tails(n: usize, h: usize) -> (f64, f64) {
    let lc = ln_binomials(n);
    let half = n as f64 * 0.5f64.ln();
    let pmf = |k: usize| (lc[k] + half).exp();
    let upper: f64 = (h..=n).map(pmf).sum();
    let lower: f64 = (0..=h.min(n)).map(pmf).sum();
    (upper.min(1.0), lower.min(1.0))
}

pub fn boruta_select(d: &Dataset, params: &BorutaParams, seed: u64) -> Result<SelectionMask> {
    d.validate()?;
    if d.n_rows() < 10 {
        return Err(Error::InsufficientData(format!("{} rows, need at least 10", d.n_rows())));
    }
    if d.classes().len() < 2 {
        return Err(invalid("feature selection needs at least two classes"));
    }
    if params.max_iter == 0 || !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(invalid("max_iter must be positive and alpha in (0, 1)"));
    }
    let p = d.n_features();
    let mut decisions = vec![Decision::Tentative; p];
    let mut hits = vec![0usize; p];
    let mut imp_sum = vec![0.0; p];
    let mut imp_n = vec![0usize; p];
    let threshold = params.alpha / 2.0 / p as f64;
    let forest = ForestParams { n_trees: params.n_trees, ..ForestParams::default() };
    let mut iterations = 0;

    while iterations < params.max_iter && decisions.contains(&Decision::Tentative) {
        iterations += 1;
        let it = iterations as u64;
        let active: Vec<usize> = (0..p).filter(|&j| decisions[j] != Decision::Rejected).collect();
        let mut rng = derived_rng(seed, &[it, 0]);
        let mut shadows: Vec<Vec<f64>> = Vec::with_capacity(active.len());
        for &j in &active {
            let mut col: Vec<f64> = d.x.iter().map(|r| r[j]).collect();
            col.shuffle(&mut rng);
            shadows.push(col);
        }
        let x: Vec<Vec<f64>> = d
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| active.iter().map(|&j| r[j]).chain(shadows.iter().map(|s| s[i])).collect())
            .collect();
        let names = (0..2 * active.len()).map(|k| format!("c{k}")).collect();
        let aug = Dataset { x, y: d.y.clone(), groups: d.groups.clone(), feature_names: names };
        let model = fit_random_forest(&aug, &forest, derive_seed(seed, &[it, 1]))?;
        let imp = importances(&model)?;
        let shadow_max = imp[active.len()..].iter().copied().fold(0.0, f64::max);
        for (k, &j) in active.iter().enumerate() {
            imp_sum[j] += imp[k];
            imp_n[j] += 1;
            if imp[k] > shadow_max {
                hits[j] += 1;
            }
            if decisions[j] == Decision::Tentative {
                let (upper, lower) = binomial_tails(iterations, hits[j]);
                if upper < threshold {
                    decisions[j] = Decision::Accepted;
                } else if lower < threshold {
                    decisions[j] = Decision::Rejected;
                }
            }
        }
    }

    let mut kept: Vec<bool> = decisions.iter().map(|&s| s == Decision::Accepted).collect();
    let fallback = !kept.contains(&true);
    if fallback {
        let mean = |j: usize| if imp_n[j] > 0 { imp_sum[j] / imp_n[j] as f64 } else { 0.0 };
        let top = (0..p).fold(0, |b, j| if mean(j) > mean(b) { j } else { b });
        kept[top] = true;
    }
    Ok(SelectionMask {
        names: d.feature_names.clone(),
        kept,
        iterations,
        hit_counts: hits,
        decisions,
        fallback,
    })
}
