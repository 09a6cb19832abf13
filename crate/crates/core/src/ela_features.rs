//! Sobol sampling of the search box and ten cheap landscape features.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bbob::{ProblemInstance, LOWER_BOUND, UPPER_BOUND};
use crate::error::{invalid, Error, Result};
use crate::features::FeatureVector;
use crate::rng::rng_from;
use crate::trajectory::Origin;

const BITS: usize = 32;

/// (degree s, coefficient a, initial m_1..m_s) for dimensions 2..=21 of the
/// Joe–Kuo "new-joe-kuo-6.21201" table.
const DIRECTIONS: [(u32, u32, &[u32]); 20] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
];

pub const MAX_SOBOL_DIMENSION: usize = DIRECTIONS.len() + 1;

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (s, a, m) = DIRECTIONS[dim - 1];
    let s = s as usize;
    for k in 0..s.min(BITS) {
        v[k] = m[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for i in 1..s {
            if (a >> (s - 1 - i)) & 1 == 1 {
                x ^= v[k - i];
            }
        }
        v[k] = x;
    }
    v
}

/// Gray-code Sobol sequence on 32-bit integers, starting after the origin.
#[derive(Clone, Debug)]
pub struct SobolGenerator {
    dimension: usize,
    directions: Vec<[u32; BITS]>,
    shift: Vec<u32>,
    state: Vec<u32>,
    index: u64,
}

impl SobolGenerator {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 || dimension > MAX_SOBOL_DIMENSION {
            return Err(invalid(format!("Sobol dimension {dimension} outside 1..={MAX_SOBOL_DIMENSION}")));
        }
        Ok(Self {
            dimension,
            directions: (0..dimension).map(direction_numbers).collect(),
            shift: vec![0; dimension],
            state: vec![0; dimension],
            index: 0,
        })
    }

    /// Sequence XOR-ed with a random 32-bit digital shift per coordinate.
    pub fn shifted(dimension: usize, seed: u64) -> Result<Self> {
        let mut g = Self::new(dimension)?;
        let mut rng = rng_from(seed);
        g.shift = (0..dimension).map(|_| rng.random()).collect();
        Ok(g)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of points emitted so far.
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let c = self.index.trailing_ones() as usize;
        assert!(c < BITS, "Sobol sequence exhausted");
        self.index += 1;
        let scale = 1.0 / (1u64 << BITS) as f64;
        self.state
            .iter_mut()
            .zip(&self.directions)
            .zip(&self.shift)
            .map(|((s, v), sh)| {
                *s ^= v[c];
                (*s ^ sh) as f64 * scale
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BudgetTag {
    B30D,
    B50D,
    Custom(usize),
}

impl BudgetTag {
    pub fn classify(m: usize, d: usize) -> Self {
        if m == 30 * d {
            BudgetTag::B30D
        } else if m == 50 * d {
            BudgetTag::B50D
        } else {
            BudgetTag::Custom(m)
        }
    }
}

impl fmt::Display for BudgetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BudgetTag::B30D => f.write_str("30d"),
            BudgetTag::B50D => f.write_str("50d"),
            BudgetTag::Custom(m) => write!(f, "m{m}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub fitnesses: Vec<f64>,
    pub budget_tag: BudgetTag,
}

/// Maps unit-cube points onto the search box.
pub fn to_box(u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| LOWER_BOUND + (UPPER_BOUND - LOWER_BOUND) * v).collect()
}

pub fn sobol_sample(inst: &ProblemInstance, m: usize, seed: u64) -> Result<SampleSet> {
    let d = inst.dimension;
    if m < d + 2 {
        return Err(Error::InsufficientData(format!("{m} points in dimension {d}, need at least {}", d + 2)));
    }
    let mut g = SobolGenerator::shifted(d, seed)?;
    let points: Vec<Vec<f64>> = (0..m).map(|_| to_box(&g.next_point())).collect();
    let fitnesses = points.iter().map(|p| inst.evaluate(p)).collect::<Result<Vec<_>>>()?;
    Ok(SampleSet { points, fitnesses, budget_tag: BudgetTag::classify(m, d) })
}

pub const PREFIX: &str = "ela.";

pub const CATALOG: [&str; 10] = [
    "distr.skewness",
    "distr.kurtosis",
    "distr.number_of_peaks",
    "meta.lin_simple.adj_r2",
    "meta.lin_simple.coef.max_by_min",
    "meta.quad_simple.adj_r2",
    "meta.quad_simple.cond",
    "disp.ratio_mean_02",
    "nbc.nn_nb.sd_ratio",
    "nbc.nb_fitness.cor",
];

pub fn feature_names() -> Vec<String> {
    CATALOG.iter().map(|n| format!("{PREFIX}{n}")).collect()
}

const HISTOGRAM_BINS: usize = 32;
const DISPERSION_QUANTILE: f64 = 0.02;

fn moments(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let m = |k: i32| y.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let m2 = m(2);
    if m2 > 0.0 {
        (m(3) / m2.powf(1.5), m(4) / (m2 * m2) - 3.0)
    } else {
        (f64::NAN, f64::NAN)
    }
}

fn number_of_peaks(y: &[f64]) -> f64 {
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) || !(hi - lo).is_finite() {
        return 1.0;
    }
    let mut counts = [0usize; HISTOGRAM_BINS];
    for &v in y {
        let b = (((v - lo) / (hi - lo)) * HISTOGRAM_BINS as f64) as usize;
        counts[b.min(HISTOGRAM_BINS - 1)] += 1;
    }
    (0..HISTOGRAM_BINS)
        .filter(|&i| {
            let left = i == 0 || counts[i] > counts[i - 1];
            let right = i == HISTOGRAM_BINS - 1 || counts[i] > counts[i + 1];
            left && right
        })
        .count() as f64
}

/// Least-squares fit with an intercept column. Returns (adjusted R²,
/// coefficients without the intercept), or `None` when the design is rank
/// deficient or the response has no variance.
fn regression(design: &[Vec<f64>], y: &[f64]) -> Option<(f64, Vec<f64>)> {
    let m = y.len();
    let p = design[0].len();
    if m <= p + 1 {
        return None;
    }
    let a = DMatrix::from_fn(m, p + 1, |i, j| if j == 0 { 1.0 } else { design[i][j - 1] });
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (m.max(p + 1) as f64) * f64::EPSILON;
    if svd.rank(tol) < p + 1 {
        return None;
    }
    let beta = svd.solve(&b, tol).ok()?;
    let mean = y.iter().sum::<f64>() / m as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return None;
    }
    let resid = &b - &a * &beta;
    let ss_res = resid.norm_squared();
    let r2 = 1.0 - ss_res / ss_tot;
    let adj = 1.0 - (1.0 - r2) * (m - 1) as f64 / (m - p - 1) as f64;
    Some((adj, beta.iter().skip(1).copied().collect()))
}

fn abs_ratio(c: &[f64]) -> f64 {
    let max = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let min = c.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if min > 0.0 { max / min } else { f64::NAN }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn mean_pairwise(points: &[&Vec<f64>]) -> f64 {
    let k = points.len();
    let mut s = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            s += distance(points[i], points[j]);
        }
    }
    s / (k * (k - 1) / 2) as f64
}

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    let r = cov / (va * vb).sqrt();
    if r.is_finite() { r.clamp(-1.0, 1.0) } else { f64::NAN }
}

/// (nearest-neighbour distances of all points, nearest-better distances and
/// fitnesses of the points that have a strictly better point).
fn nbc(points: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = points.len();
    let mut nn = Vec::with_capacity(m);
    let mut nb = Vec::with_capacity(m);
    let mut nb_y = Vec::with_capacity(m);
    for i in 0..m {
        let mut near = f64::INFINITY;
        let mut better = f64::INFINITY;
        for j in 0..m {
            if i == j {
                continue;
            }
            let dist = distance(&points[i], &points[j]);
            near = near.min(dist);
            if y[j] < y[i] {
                better = better.min(dist);
            }
        }
        nn.push(near);
        if better.is_finite() {
            nb.push(better);
            nb_y.push(y[i]);
        }
    }
    (nn, nb, nb_y)
}

pub fn compute_ela(s: &SampleSet, origin: Origin) -> Result<FeatureVector> {
    let m = s.points.len();
    let d = s.points.first().map_or(0, Vec::len);
    if m != s.fitnesses.len() {
        return Err(invalid("points and fitnesses differ in length"));
    }
    if d == 0 || m < 4 * (d + 1) {
        return Err(Error::InsufficientData(format!("{m} points in dimension {d}, need at least {}", 4 * (d + 1))));
    }
    let y = &s.fitnesses;
    let (skew, kurt) = moments(y);

    let lin = regression(&s.points, y);
    let quad_design: Vec<Vec<f64>> =
        s.points.iter().map(|p| p.iter().copied().chain(p.iter().map(|v| v * v)).collect()).collect();
    let quad = regression(&quad_design, y);

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    let best_k = (DISPERSION_QUANTILE * m as f64).ceil() as usize;
    let disp = if best_k >= 2 {
        let best: Vec<&Vec<f64>> = order[..best_k].iter().map(|&i| &s.points[i]).collect();
        let all: Vec<&Vec<f64>> = s.points.iter().collect();
        mean_pairwise(&best) / mean_pairwise(&all)
    } else {
        f64::NAN
    };

    let (nn, nb, nb_y) = nbc(&s.points, y);
    let (sd_ratio, nb_cor) = if nb.len() >= 2 {
        let r = sd(&nn) / sd(&nb);
        (if r.is_finite() { r } else { f64::NAN }, pearson(&nb, &nb_y))
    } else {
        (f64::NAN, f64::NAN)
    };

    let values = vec![
        skew,
        kurt,
        number_of_peaks(y),
        lin.as_ref().map_or(f64::NAN, |l| l.0),
        lin.as_ref().map_or(f64::NAN, |l| abs_ratio(&l.1)),
        quad.as_ref().map_or(f64::NAN, |q| q.0),
        quad.as_ref().map_or(f64::NAN, |q| abs_ratio(&q.1[d..])),
        disp,
        sd_ratio,
        nb_cor,
    ];
    Ok(FeatureVector { names: feature_names(), values, origin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peaks_of_bimodal_sample() {
        let mut y = vec![0.0; 10];
        y.extend(vec![1.0; 10]);
        assert_eq!(number_of_peaks(&y), 2.0);
        assert_eq!(number_of_peaks(&[3.0; 5]), 1.0);
    }

    #[test]
    fn tags() {
        assert_eq!(BudgetTag::classify(300, 10), BudgetTag::B30D);
        assert_eq!(BudgetTag::classify(500, 10).to_string(), "50d");
        assert_eq!(BudgetTag::classify(7, 10), BudgetTag::Custom(7));
    }
}
