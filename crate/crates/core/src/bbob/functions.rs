//! Core definitions of the 24 noiseless functions.
//!
//! `raw_value` returns the objective without the target offset `f_opt`. All
//! definitions attain their global minimum of zero at `x_opt`; the linear
//! slope, rotated Rosenbrock and Griewank–Rosenbrock variants are translated
//! so that this holds.

use std::f64::consts::PI;

use super::transforms::{
    boundary_penalty, matvec, ratio, scale_lambda, sub, tasy, tosz, tosz_all,
};
use super::ProblemInstance;

pub(crate) fn raw_value(inst: &ProblemInstance, x: &[f64]) -> f64 {
    let d = inst.dimension;
    let df = d as f64;
    let r = &inst.rotation_r;
    let q = &inst.rotation_q;
    let shifted = || sub(x, &inst.x_opt);

    match inst.function_id {
        1 => shifted().iter().map(|z| z * z).sum(),
        2 => {
            let mut z = shifted();
            tosz_all(&mut z);
            ellipsoid(&z)
        }
        3 => {
            let mut z = shifted();
            tosz_all(&mut z);
            tasy(&mut z, 0.2);
            scale_lambda(&mut z, 10.0);
            rastrigin(&z)
        }
        4 => {
            let mut z = shifted();
            for (i, zi) in z.iter_mut().enumerate() {
                let t = tosz(*zi);
                let base = 10f64.powf(0.5 * ratio(i, d));
                *zi = if t > 0.0 && i % 2 == 0 { 10.0 * base * t } else { base * t };
            }
            rastrigin(&z) + 100.0 * boundary_penalty(x)
        }
        5 => x
            .iter()
            .zip(&inst.x_opt)
            .enumerate()
            .map(|(i, (&xi, &oi))| {
                let sign = if oi < 0.0 { -1.0 } else { 1.0 };
                10f64.powf(ratio(i, d)) * (sign * (oi - xi)).max(0.0)
            })
            .sum(),
        6 => {
            let mut z = matvec(r, &shifted());
            scale_lambda(&mut z, 10.0);
            let z = matvec(q, &z);
            let s: f64 = z
                .iter()
                .zip(&inst.x_opt)
                .map(|(&zi, &oi)| {
                    let w = if zi * oi > 0.0 { 100.0 } else { 1.0 };
                    (w * zi) * (w * zi)
                })
                .sum();
            tosz(s).powf(0.9)
        }
        7 => {
            let mut zh = matvec(r, &shifted());
            scale_lambda(&mut zh, 10.0);
            let zt: Vec<f64> = zh
                .iter()
                .map(|&v| {
                    if v.abs() > 0.5 {
                        (0.5 + v).floor()
                    } else {
                        (0.5 + 10.0 * v).floor() / 10.0
                    }
                })
                .collect();
            let z = matvec(q, &zt);
            let s: f64 = z
                .iter()
                .enumerate()
                .map(|(i, zi)| 10f64.powf(2.0 * ratio(i, d)) * zi * zi)
                .sum();
            0.1 * (zh[0].abs() / 1e4).max(s) + boundary_penalty(x)
        }
        8 => {
            let c = rosenbrock_scale(df);
            let z: Vec<f64> = shifted().iter().map(|v| c * v + 1.0).collect();
            rosenbrock(&z)
        }
        9 => {
            let c = rosenbrock_scale(df);
            let z: Vec<f64> = matvec(r, &shifted()).iter().map(|v| c * v + 1.0).collect();
            rosenbrock(&z)
        }
        10 => {
            let mut z = matvec(r, &shifted());
            tosz_all(&mut z);
            ellipsoid(&z)
        }
        11 => {
            let mut z = matvec(r, &shifted());
            tosz_all(&mut z);
            1e6 * z[0] * z[0] + z[1..].iter().map(|v| v * v).sum::<f64>()
        }
        12 => {
            let mut z = matvec(r, &shifted());
            tasy(&mut z, 0.5);
            let z = matvec(r, &z);
            z[0] * z[0] + 1e6 * z[1..].iter().map(|v| v * v).sum::<f64>()
        }
        13 => {
            let mut z = matvec(r, &shifted());
            scale_lambda(&mut z, 10.0);
            let z = matvec(q, &z);
            z[0] * z[0] + 100.0 * z[1..].iter().map(|v| v * v).sum::<f64>().sqrt()
        }
        14 => {
            let z = matvec(r, &shifted());
            z.iter()
                .enumerate()
                .map(|(i, v)| v.abs().powf(2.0 + 4.0 * ratio(i, d)))
                .sum::<f64>()
                .sqrt()
        }
        15 => {
            let mut z = matvec(r, &shifted());
            tosz_all(&mut z);
            tasy(&mut z, 0.2);
            let mut z = matvec(q, &z);
            scale_lambda(&mut z, 10.0);
            let z = matvec(r, &z);
            rastrigin(&z)
        }
        16 => {
            let mut z = matvec(r, &shifted());
            tosz_all(&mut z);
            let mut z = matvec(q, &z);
            scale_lambda(&mut z, 0.01);
            let z = matvec(r, &z);
            let f0 = weierstrass_term(0.0);
            let mean = z.iter().map(|&v| weierstrass_term(v)).sum::<f64>() / df;
            10.0 * (mean - f0).powi(3) + 10.0 / df * boundary_penalty(x)
        }
        17 => schaffers(inst, x, 10.0),
        18 => schaffers(inst, x, 1000.0),
        19 => {
            let c = rosenbrock_scale(df);
            let z: Vec<f64> = matvec(r, &shifted()).iter().map(|v| c * v + 1.0).collect();
            let s: f64 = z
                .windows(2)
                .map(|w| {
                    let s = 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2);
                    s / 4000.0 - s.cos()
                })
                .sum();
            10.0 / (df - 1.0) * s + 10.0
        }
        20 => {
            let xh: Vec<f64> = x
                .iter()
                .zip(&inst.x_opt)
                .map(|(&xi, &oi)| 2.0 * oi.signum() * xi)
                .collect();
            let two_opt: Vec<f64> = inst.x_opt.iter().map(|o| 2.0 * o.abs()).collect();
            let mut zh = xh.clone();
            for i in 1..d {
                zh[i] = xh[i] + 0.25 * (xh[i - 1] - two_opt[i - 1]);
            }
            let mut z = sub(&zh, &two_opt);
            scale_lambda(&mut z, 10.0);
            let z: Vec<f64> = z.iter().zip(&two_opt).map(|(v, o)| 100.0 * (v + o)).collect();
            let scaled: Vec<f64> = z.iter().map(|v| v / 100.0).collect();
            -z.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>() / (100.0 * df)
                + 100.0 * boundary_penalty(&scaled)
        }
        21 | 22 => {
            let peaks = inst.peaks.as_ref().expect("gallagher peaks");
            let rx = matvec(r, x);
            let best = peaks
                .rotated_centres
                .iter()
                .zip(&peaks.heights)
                .zip(&peaks.scales)
                .map(|((centre, &w), scale)| {
                    let quad: f64 = rx
                        .iter()
                        .zip(centre)
                        .zip(scale)
                        .map(|((a, b), c)| c * (a - b) * (a - b))
                        .sum();
                    w * (-quad / (2.0 * df)).exp()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            tosz(10.0 - best).powi(2) + boundary_penalty(x)
        }
        23 => {
            let mut z = matvec(r, &shifted());
            scale_lambda(&mut z, 100.0);
            let z = matvec(q, &z);
            let exponent = 10.0 / df.powf(1.2);
            let prod: f64 = z
                .iter()
                .enumerate()
                .map(|(i, &zi)| {
                    let s: f64 = (1..=32)
                        .map(|j| {
                            let p = 2f64.powi(j);
                            (p * zi - (p * zi).round()).abs() / p
                        })
                        .sum();
                    (1.0 + (i + 1) as f64 * s).powf(exponent)
                })
                .product();
            10.0 / (df * df) * prod - 10.0 / (df * df) + boundary_penalty(x)
        }
        24 => {
            let mu0 = super::LUNACEK_MU0;
            let s = 1.0 - 1.0 / (2.0 * (df + 20.0).sqrt() - 8.2);
            let mu1 = -((mu0 * mu0 - 1.0) / s).sqrt();
            let xh: Vec<f64> = x
                .iter()
                .zip(&inst.x_opt)
                .map(|(&xi, &oi)| 2.0 * oi.signum() * xi)
                .collect();
            let first: f64 = xh.iter().map(|v| (v - mu0).powi(2)).sum();
            let second: f64 = df + s * xh.iter().map(|v| (v - mu1).powi(2)).sum::<f64>();
            let centred: Vec<f64> = xh.iter().map(|v| v - mu0).collect();
            let mut z = matvec(r, &centred);
            scale_lambda(&mut z, 100.0);
            let z = matvec(q, &z);
            let cosines: f64 = z.iter().map(|v| (2.0 * PI * v).cos()).sum();
            first.min(second) + 10.0 * (df - cosines) + 1e4 * boundary_penalty(x)
        }
        other => unreachable!("function id {other} validated at construction"),
    }
}

fn rosenbrock_scale(d: f64) -> f64 {
    (d.sqrt() / 8.0).max(1.0)
}

fn ellipsoid(z: &[f64]) -> f64 {
    let d = z.len();
    z.iter()
        .enumerate()
        .map(|(i, v)| 10f64.powf(6.0 * ratio(i, d)) * v * v)
        .sum()
}

fn rastrigin(z: &[f64]) -> f64 {
    let cosines: f64 = z.iter().map(|v| (2.0 * PI * v).cos()).sum();
    10.0 * (z.len() as f64 - cosines) + z.iter().map(|v| v * v).sum::<f64>()
}

fn rosenbrock(z: &[f64]) -> f64 {
    z.windows(2)
        .map(|w| 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

fn weierstrass_term(z: f64) -> f64 {
    (0..12)
        .map(|k| 0.5f64.powi(k) * (2.0 * PI * 3f64.powi(k) * (z + 0.5)).cos())
        .sum()
}

fn schaffers(inst: &ProblemInstance, x: &[f64], conditioning: f64) -> f64 {
    let d = inst.dimension;
    let mut z = matvec(&inst.rotation_r, &sub(x, &inst.x_opt));
    tasy(&mut z, 0.5);
    let mut z = matvec(&inst.rotation_q, &z);
    scale_lambda(&mut z, conditioning);
    let sum: f64 = z
        .windows(2)
        .map(|w| {
            let s = (w[0] * w[0] + w[1] * w[1]).sqrt();
            let root = s.sqrt();
            root + root * (50.0 * s.powf(0.2)).sin().powi(2)
        })
        .sum();
    (sum / (d - 1) as f64).powi(2) + 10.0 * boundary_penalty(x)
}
