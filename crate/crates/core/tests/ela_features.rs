use rand::Rng as _;
use rand_distr::StandardNormal;
use trajsel::bbob::make_instance;
use trajsel::ela_features::*;
use trajsel::rng::rng_from;
use trajsel::trajectory::Origin;

const ORIGIN: Origin = Origin { function_id: 0, instance_id: 0, run_index: 0 };

/// One-dimensional Sobol points are the bit-reversed Gray code of the index.
fn van_der_corput_gray(n: u32) -> f64 {
    (n ^ (n >> 1)).reverse_bits() as f64 / 2f64.powi(32)
}

#[test]
fn first_one_dimensional_points_match_reference() {
    let mut g = SobolGenerator::new(1).unwrap();
    let pts: Vec<f64> = (0..32).map(|_| g.next_point()[0]).collect();
    for (i, p) in pts.iter().enumerate() {
        assert_eq!(*p, van_der_corput_gray(i as u32 + 1), "point {i}");
    }
    assert_eq!(&pts[..3], &[0.5, 0.75, 0.25]);
    let boxed: Vec<f64> = pts[..3].iter().map(|&u| to_box(&[u])[0]).collect();
    assert_eq!(boxed, vec![0.0, 2.5, -2.5]);
}

#[test]
fn two_dimensional_prefix() {
    let mut g = SobolGenerator::new(2).unwrap();
    let want = [[0.5, 0.5], [0.75, 0.25], [0.25, 0.75], [0.375, 0.375], [0.875, 0.875], [0.625, 0.125], [0.125, 0.625]];
    for w in want {
        assert_eq!(g.next_point(), w.to_vec());
    }
}

#[test]
fn every_dimension_stratifies_dyadic_intervals() {
    // Each coordinate of the first 2^k points (with the origin) hits every
    // interval of width 2^-k exactly once.
    let mut g = SobolGenerator::new(MAX_SOBOL_DIMENSION).unwrap();
    let mut pts = vec![vec![0.0; MAX_SOBOL_DIMENSION]];
    pts.extend((0..255).map(|_| g.next_point()));
    for j in 0..MAX_SOBOL_DIMENSION {
        let mut seen = [false; 256];
        for p in &pts {
            seen[(p[j] * 256.0) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s), "dimension {j}");
    }
    assert!(SobolGenerator::new(MAX_SOBOL_DIMENSION + 1).is_err());
}

fn star_discrepancy(points: &[Vec<f64>]) -> f64 {
    let n = points.len() as f64;
    let mut worst: f64 = 0.0;
    for a in 1..=64 {
        for b in 1..=64 {
            let (x, y) = (a as f64 / 64.0, b as f64 / 64.0);
            let inside = points.iter().filter(|p| p[0] < x && p[1] < y).count() as f64;
            worst = worst.max((inside / n - x * y).abs());
        }
    }
    worst
}

#[test]
fn sobol_beats_uniform_on_discrepancy() {
    let mut g = SobolGenerator::shifted(2, 4).unwrap();
    let sobol: Vec<Vec<f64>> = (0..1024).map(|_| g.next_point()).collect();
    let mut rng = rng_from(4);
    let uniform: Vec<Vec<f64>> = (0..1024).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    assert!(sobol.iter().flatten().all(|&v| (0.0..1.0).contains(&v)));
    assert!(star_discrepancy(&sobol) < star_discrepancy(&uniform));
}

#[test]
fn samples_are_tagged_and_reproducible() {
    let inst = make_instance(7, 2, 10).unwrap();
    let s = sobol_sample(&inst, 300, 9).unwrap();
    assert_eq!(s.budget_tag, BudgetTag::B30D);
    assert_eq!(s, sobol_sample(&inst, 300, 9).unwrap());
    assert_ne!(s, sobol_sample(&inst, 300, 10).unwrap());
    assert!(s.points.iter().flatten().all(|v| (-5.0..=5.0).contains(v)));
    assert!(matches!(sobol_sample(&inst, 11, 0), Err(trajsel::Error::InsufficientData(_))));
}

#[test]
fn rastrigin_scan_respects_the_optimum() {
    let inst = make_instance(3, 1, 10).unwrap();
    let s = sobol_sample(&inst, 1000, 1).unwrap();
    assert!(s.fitnesses.iter().all(|f| f.is_finite() && *f >= inst.f_opt - 1e-9));
}

fn sample(points: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> SampleSet {
    let fitnesses = points.iter().map(|p| f(p)).collect();
    let m = points.len();
    SampleSet { points, fitnesses, budget_tag: BudgetTag::Custom(m) }
}

fn sobol_points(d: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut g = SobolGenerator::shifted(d, seed).unwrap();
    (0..m).map(|_| to_box(&g.next_point())).collect()
}

#[test]
fn linear_response_fits_exactly() {
    let s = sample(sobol_points(4, 100, 2), |x| 3.0 + x[0] - 2.0 * x[1] + 0.5 * x[2] + 4.0 * x[3]);
    let f = compute_ela(&s, ORIGIN).unwrap();
    assert_eq!(f.names.len(), 10);
    assert!((f.get("ela.meta.lin_simple.adj_r2").unwrap() - 1.0).abs() < 1e-9);
    assert!((f.get("ela.meta.lin_simple.coef.max_by_min").unwrap() - 8.0).abs() < 1e-6);
}

#[test]
fn antisymmetric_sample_has_zero_skew() {
    let mut points = sobol_points(3, 50, 3);
    points.extend(points.clone().into_iter().map(|p| p.iter().map(|v| -v).collect::<Vec<_>>()));
    let s = sample(points, |x| x[0] + x[1].powi(3) - x[2]);
    let f = compute_ela(&s, ORIGIN).unwrap();
    assert!(f.get("ela.distr.skewness").unwrap().abs() < 1e-9);

    let mut shifted = s.clone();
    shifted.fitnesses.iter_mut().for_each(|y| *y += 1234.5);
    let g = compute_ela(&shifted, ORIGIN).unwrap();
    for name in ["ela.distr.skewness", "ela.distr.kurtosis"] {
        assert!((f.get(name).unwrap() - g.get(name).unwrap()).abs() < 1e-9);
    }
}

/// adj-R² from the normal equations solved by Gaussian elimination.
fn normal_equations_adj_r2(design: &[Vec<f64>], y: &[f64]) -> f64 {
    let p = design[0].len() + 1;
    let rows: Vec<Vec<f64>> = design.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += r[i] * r[j];
            }
            a[i][p] += r[i] * yi;
        }
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        for r in 0..p {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=p {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..p).map(|i| a[i][p] / a[i][i]).collect();
    let m = y.len() as f64;
    let mean = y.iter().sum::<f64>() / m;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = rows
        .iter()
        .zip(y)
        .map(|(r, yi)| (yi - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).powi(2))
        .sum();
    1.0 - (ss_res / ss_tot) * (m - 1.0) / (m - p as f64)
}

#[test]
fn sphere_is_quadratic() {
    let inst = make_instance(1, 1, 5).unwrap();
    let s = sobol_sample(&inst, 250, 5).unwrap();
    let f = compute_ela(&s, ORIGIN).unwrap();
    let quad: Vec<Vec<f64>> = s.points.iter().map(|p| p.iter().copied().chain(p.iter().map(|v| v * v)).collect()).collect();
    let oracle = normal_equations_adj_r2(&quad, &s.fitnesses);
    let got = f.get("ela.meta.quad_simple.adj_r2").unwrap();
    assert!(got > 0.99, "{got}");
    assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    assert!(f.get("ela.meta.quad_simple.cond").unwrap() >= 1.0);
}

#[test]
fn small_or_degenerate_samples() {
    let s = sample(sobol_points(3, 15, 1), |x| x[0]);
    assert!(matches!(compute_ela(&s, ORIGIN), Err(trajsel::Error::InsufficientData(_))));
    // Low budgets leave the best-2% set with a single point.
    let mut rng = rng_from(2);
    let pts: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let f = compute_ela(&sample(pts.clone(), |x| x[0] * x[0]), ORIGIN).unwrap();
    assert!(f.get("ela.disp.ratio_mean_02").unwrap().is_nan());
    let c = compute_ela(&sample(pts, |_| 1.0), ORIGIN).unwrap();
    assert!(c.get("ela.meta.lin_simple.adj_r2").unwrap().is_nan());
    assert!(c.get("ela.nbc.nb_fitness.cor").unwrap().is_nan());
}
