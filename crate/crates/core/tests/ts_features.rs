use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand_distr::StandardNormal;
use trajsel::classifiers::Dataset;
use trajsel::rng::rng_from;
use trajsel::solvers::Algorithm;
use trajsel::trajectory::{Mode, Origin, Part, Trajectory};
use trajsel::ts_features::*;

fn series(values: Vec<f64>) -> Trajectory {
    let n = values.len();
    Trajectory {
        values,
        mode: Mode::Current,
        parts: vec![Part { algorithm: Algorithm::Cmaes, generations: 1, population_size: n }],
        origin: Origin { function_id: 1, instance_id: 1, run_index: 0 },
        label: None,
    }
}

#[test]
fn constant_series() {
    let f = extract(&series(vec![0.1; 9])).unwrap();
    assert_eq!(f.get("ts.variance"), Some(0.0));
    assert_eq!(f.get("ts.mean"), Some(0.1));
    assert_eq!(f.get("ts.mean_abs_change"), Some(0.0));
    assert_eq!(f.get("ts.linear_trend_slope"), Some(0.0));
    assert!(f.get("ts.autocorrelation_lag1").unwrap().is_nan());
    assert!(f.get("ts.skewness").unwrap().is_nan());
    assert_eq!(f.names.len(), CATALOG.len());
}

#[test]
fn exact_line() {
    let f = extract(&series(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
    assert!((f.get("ts.linear_trend_slope").unwrap() - 1.0).abs() < 1e-12);
    assert!((f.get("ts.linear_trend_intercept").unwrap() - 1.0).abs() < 1e-12);
    assert!((f.get("ts.linear_trend_r2").unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(f.get("ts.mean_change"), Some(1.0));
    assert_eq!(f.get("ts.first_location_of_minimum"), Some(0.0));
    assert_eq!(f.get("ts.last_location_of_maximum"), Some(1.0));
}

#[test]
fn alternating_autocorrelation() {
    let x: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    // Direct evaluation of sum (x_t - mean)(x_{t+1} - mean) / ((n - 1) var).
    let mean = x.iter().sum::<f64>() / 20.0;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 20.0;
    let oracle = (0..19).map(|t| (x[t] - mean) * (x[t + 1] - mean)).sum::<f64>() / (19.0 * var);
    let f = extract(&series(x)).unwrap();
    assert!((f.get("ts.autocorrelation_lag1").unwrap() - oracle).abs() < 1e-9);
    assert!((f.get("ts.autocorrelation_lag1").unwrap() + 1.0).abs() < 1e-9);
    assert!((f.get("ts.autocorrelation_lag2").unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(f.get("ts.number_mean_crossings"), Some(19.0));
    assert_eq!(f.get("ts.longest_strike_above_mean"), Some(1.0));
}

#[test]
fn short_series_is_rejected() {
    assert!(matches!(extract(&series(vec![1.0, 2.0, 3.0])), Err(trajsel::Error::InsufficientData(_))));
}

const DISTRIBUTIONAL: [&str; 10] = [
    "ts.mean",
    "ts.variance",
    "ts.standard_deviation",
    "ts.skewness",
    "ts.kurtosis",
    "ts.minimum",
    "ts.maximum",
    "ts.median",
    "ts.quantile_0.1",
    "ts.quantile_0.9",
];

proptest! {
    #[test]
    fn distributional_features_ignore_order(
        x in prop::collection::vec(-1e3f64..1e3, 4..60),
        seed in any::<u64>(),
    ) {
        let mut y = x.clone();
        y.shuffle(&mut rng_from(seed));
        let a = extract(&series(x)).unwrap();
        let b = extract(&series(y)).unwrap();
        for name in DISTRIBUTIONAL {
            let (u, v) = (a.get(name).unwrap(), b.get(name).unwrap());
            let scale = u.abs().max(1.0);
            prop_assert!((u - v).abs() <= 1e-9 * scale || (u.is_nan() && v.is_nan()), "{name}: {u} vs {v}");
        }
    }
}

fn sign_dataset(seed: u64) -> Dataset {
    let mut rng = rng_from(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..200 {
        let row: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        y.push(usize::from(row[0] > 0.0));
        x.push(row);
    }
    Dataset::new(x, y, vec![1; 200], (0..6).map(|i| format!("f{i}")).collect()).unwrap()
}

#[test]
fn boruta_keeps_the_signal_feature() {
    let d = sign_dataset(17);
    let params = BorutaParams { n_trees: 50, ..Default::default() };
    let mask = boruta_select(&d, &params, 3).unwrap();
    assert!(mask.kept[0], "{mask:?}");
    assert!(!mask.fallback);
    assert!(mask.hit_counts.iter().all(|&h| h <= mask.iterations));
    assert_eq!(mask, boruta_select(&d, &params, 3).unwrap());
}

#[test]
fn boruta_falls_back_on_constant_features() {
    let x = vec![vec![1.0, 1.0, 1.0]; 20];
    let y = (0..20).map(|i| i % 2).collect();
    let d = Dataset::unnamed(x, y).unwrap();
    let mask = boruta_select(&d, &BorutaParams { n_trees: 10, max_iter: 5, ..Default::default() }, 0).unwrap();
    assert!(mask.fallback);
    assert_eq!(mask.kept.iter().filter(|&&k| k).count(), 1);
    let single = Dataset::unnamed(vec![vec![1.0]; 20], vec![0; 20]).unwrap();
    assert!(matches!(boruta_select(&single, &BorutaParams::default(), 0), Err(trajsel::Error::InvalidArgument(_))));
}
