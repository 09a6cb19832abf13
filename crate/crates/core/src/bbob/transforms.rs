//! Elementwise and linear building blocks shared by the function definitions.

use nalgebra::DMatrix;

pub(crate) fn tosz(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let xh = x.abs().ln();
    let (c1, c2) = if x > 0.0 { (10.0, 7.9) } else { (5.5, 3.1) };
    x.signum() * (xh + 0.049 * ((c1 * xh).sin() + (c2 * xh).sin())).exp()
}

pub(crate) fn tosz_all(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = tosz(*x);
    }
}

pub(crate) fn tasy(v: &mut [f64], beta: f64) {
    let d = v.len();
    for (i, x) in v.iter_mut().enumerate() {
        if *x > 0.0 {
            *x = x.powf(1.0 + beta * ratio(i, d) * x.sqrt());
        }
    }
}

/// `(i - 1) / (D - 1)` with zero-based `i`.
pub(crate) fn ratio(i: usize, d: usize) -> f64 {
    i as f64 / (d - 1) as f64
}

/// Scales by the diagonal conditioning matrix with factor `alpha`.
pub(crate) fn scale_lambda(v: &mut [f64], alpha: f64) {
    let d = v.len();
    for (i, x) in v.iter_mut().enumerate() {
        *x *= alpha.powf(0.5 * ratio(i, d));
    }
}

pub(crate) fn matvec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; n];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let col = m.column(j);
        for (o, &mij) in out.iter_mut().zip(col.iter()) {
            *o += mij * xj;
        }
    }
    out
}

pub(crate) fn boundary_penalty(x: &[f64]) -> f64 {
    x.iter()
        .map(|&xi| {
            let over = xi.abs() - 5.0;
            if over > 0.0 {
                over * over
            } else {
                0.0
            }
        })
        .sum()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Modified Gram–Schmidt, applied twice, on the columns of a square matrix.
pub(crate) fn orthonormalize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    for _pass in 0..2 {
        for j in 0..n {
            for k in 0..j {
                let dot = m.column(j).dot(&m.column(k));
                let ck = m.column(k).clone_owned();
                let mut cj = m.column_mut(j);
                cj.axpy(-dot, &ck, 1.0);
            }
            let norm = m.column(j).norm();
            m.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tosz_is_odd_monotone_and_fixes_zero() {
        assert_eq!(tosz(0.0), 0.0);
        let xs: Vec<f64> = (-50..=50).map(|i| i as f64 * 0.2).collect();
        for w in xs.windows(2) {
            assert!(tosz(w[1]) > tosz(w[0]));
        }
        assert!(tosz(1.0) == 1.0);
    }

    #[test]
    fn tasy_leaves_nonpositive_entries() {
        let mut v = vec![-1.0, 0.0, 2.0];
        tasy(&mut v, 0.5);
        assert_eq!(v[0], -1.0);
        assert_eq!(v[1], 0.0);
        assert!(v[2] > 2.0);
    }

    #[test]
    fn penalty_only_outside_box() {
        assert_eq!(boundary_penalty(&[5.0, -5.0, 0.0]), 0.0);
        assert!((boundary_penalty(&[6.0, -7.0]) - 5.0).abs() < 1e-12);
    }
}
