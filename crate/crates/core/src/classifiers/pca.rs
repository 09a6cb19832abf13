//! Principal component analysis of the sample covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k` unit rows, most variance first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub projected: Vec<Vec<f64>>,
}

/// Full eigenbasis of the covariance of `x` (n − 1 denominator, or n when
/// there is a single row). Returns (eigenvalues descending, unit
/// eigenvectors as rows, column means). Each vector's largest-magnitude
/// entry is positive.
pub(crate) fn eigenbasis(x: &[Vec<f64>], p: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let n = x.len();
    let mean: Vec<f64> = (0..p)
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n.max(1) as f64)
        .collect();
    let centred = DMatrix::from_fn(n, p, |i, j| x[i][j] - mean[j]);
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = (centred.transpose() * &centred) / denom;
    let cov = (&cov + cov.transpose()) * 0.5;
    // The covariance is symmetric PSD, so its singular vectors are
    // eigenvectors. SVD stays finite on nearly-zero matrices where the
    // symmetric QR iteration does not.
    let svd = cov.svd(true, false);
    let (eigenvalues, basis) = match svd.u {
        Some(u) if u.iter().all(|v| v.is_finite()) => (svd.singular_values, u),
        _ => (DVector::zeros(p), DMatrix::identity(p, p)),
    };
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| eigenvalues[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = basis.column(k).iter().copied().collect();
            let mut lead = 0;
            for (i, e) in v.iter().enumerate() {
                if e.abs() > v[lead].abs() {
                    lead = i;
                }
            }
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|e| *e = -*e);
            }
            v
        })
        .collect();
    (values, vectors, mean)
}

pub fn pca(x: &[Vec<f64>], k: usize) -> Result<Pca> {
    let n = x.len();
    let p = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != p) {
        return Err(invalid("ragged matrix"));
    }
    if k == 0 || k > n.min(p) {
        return Err(invalid(format!("k = {k} outside 1..={}", n.min(p))));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite entry"));
    }
    let (values, mut vectors, mean) = eigenbasis(x, p);
    vectors.truncate(k);
    let projected = x
        .iter()
        .map(|r| {
            vectors
                .iter()
                .map(|c| c.iter().zip(r).zip(&mean).map(|((ci, xi), mi)| ci * (xi - mi)).sum())
                .collect()
        })
        .collect();
    Ok(Pca { mean, components: vectors, explained_variance: values[..k].to_vec(), projected })
}

impl Pca {
    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(row).zip(&self.mean).map(|((ci, xi), mi)| ci * (xi - mi)).sum())
            .collect()
    }

    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, s) in self.components.iter().zip(scores) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += s * ci;
            }
        }
        out
    }
}
