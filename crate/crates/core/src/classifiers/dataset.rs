use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Marker for undefined feature values. Imputed with training medians
/// before any model sees the data.
pub const SENTINEL: f64 = f64::NAN;

pub fn is_sentinel(v: f64) -> bool {
    !v.is_finite()
}

/// Row-major design matrix with class labels and LOIO group ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub groups: Vec<u32>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<usize>, groups: Vec<u32>, feature_names: Vec<String>) -> Result<Self> {
        let d = Dataset { x, y, groups, feature_names };
        d.validate()?;
        Ok(d)
    }

    /// Dataset whose feature names are `f0, f1, ...` and whose rows all sit
    /// in group 1.
    pub fn unnamed(x: Vec<Vec<f64>>, y: Vec<usize>) -> Result<Self> {
        let p = x.first().map_or(0, Vec::len);
        let n = x.len();
        Self::new(x, y, vec![1; n], (0..p).map(|i| format!("f{i}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if self.y.len() != n || self.groups.len() != n {
            return Err(invalid(format!(
                "row counts differ: x {n}, y {}, groups {}",
                self.y.len(),
                self.groups.len()
            )));
        }
        let p = self.feature_names.len();
        if let Some(row) = self.x.iter().find(|r| r.len() != p) {
            return Err(invalid(format!("row of width {} in dataset of {p} features", row.len())));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.x.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            groups: rows.iter().map(|&i| self.groups[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Keeps only the named columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Dataset {
        Dataset {
            x: self.x.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect(),
            y: self.y.clone(),
            groups: self.groups.clone(),
            feature_names: columns.iter().map(|&c| self.feature_names[c].clone()).collect(),
        }
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<usize> {
        let mut c = self.y.clone();
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// Per-column median of the finite entries; 0 for all-sentinel columns.
pub fn column_medians(x: &[Vec<f64>], p: usize) -> Vec<f64> {
    (0..p)
        .map(|j| {
            let mut col: Vec<f64> = x.iter().map(|r| r[j]).filter(|v| !is_sentinel(*v)).collect();
            if col.is_empty() {
                return 0.0;
            }
            col.sort_by(f64::total_cmp);
            let m = col.len();
            if m % 2 == 1 {
                col[m / 2]
            } else {
                0.5 * (col[m / 2 - 1] + col[m / 2])
            }
        })
        .collect()
}

pub fn impute_row(row: &[f64], medians: &[f64]) -> Vec<f64> {
    row.iter()
        .zip(medians)
        .map(|(&v, &m)| if is_sentinel(v) { m } else { v })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians_skip_sentinels() {
        let x = vec![vec![1.0, SENTINEL], vec![SENTINEL, SENTINEL], vec![3.0, SENTINEL], vec![10.0, SENTINEL]];
        assert_eq!(column_medians(&x, 2), vec![3.0, 0.0]);
        assert_eq!(impute_row(&[SENTINEL, 2.0], &[5.0, 6.0]), vec![5.0, 2.0]);
    }

    #[test]
    fn shape_checks() {
        assert!(Dataset::new(vec![vec![1.0]], vec![0, 1], vec![1], vec!["a".into()]).is_err());
        assert!(Dataset::new(vec![vec![1.0, 2.0]], vec![0], vec![1], vec!["a".into()]).is_err());
        let d = Dataset::unnamed(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![1, 0]).unwrap();
        assert_eq!(d.classes(), vec![0, 1]);
        assert_eq!(d.select_columns(&[1]).x, vec![vec![2.0], vec![4.0]]);
    }
}
