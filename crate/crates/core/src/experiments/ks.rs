//! Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `P(K > lambda)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        let root = (2.0 * PI).sqrt() / lambda;
        let t = -PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (t * ((2 * k - 1) as f64).powi(2)).exp()).sum();
        1.0 - root * s
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        2.0 * s
    };
    q.clamp(0.0, 1.0)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("KS test needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(invalid("KS test on NaN values"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    // max |i·m − j·n| over all step points, kept in integers
    let (mut i, mut j) = (0usize, 0usize);
    let mut worst = 0usize;
    while i < n || j < m {
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        worst = worst.max((i * m).abs_diff(j * n));
    }
    let statistic = worst as f64 / (n * m) as f64;
    let effective = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult { statistic, p_value: kolmogorov_q(effective.sqrt() * statistic) })
}
