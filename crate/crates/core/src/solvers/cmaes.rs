//! (μ/μ_w, λ)-CMA-ES with default learning rates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::codec::{Reader, Writer};
use crate::bbob::ProblemInstance;
use crate::error::Result;
use crate::rng::Rng;

const SIGMA_MAX: f64 = 1e4;
const EIGEN_FLOOR: f64 = 1e-300;

/// Strategy parameters derived from dimension and population size.
struct Params {
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Params {
    fn new(n: usize, lambda: usize) -> Self {
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma =
            1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Self { mu, weights, mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct State {
    pub rng: Rng,
    pub lambda: usize,
    pub mean: Vec<f64>,
    pub sigma: f64,
    /// Row-major `n × n` covariance.
    pub cov: Vec<f64>,
    pub p_c: Vec<f64>,
    pub p_sigma: Vec<f64>,
    pub generation: u64,
}

impl State {
    pub fn new(mut rng: Rng, n: usize, lambda: usize, sigma0: f64) -> Self {
        let mean = (0..n).map(|_| rng.random_range(-4.0..=4.0)).collect();
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            cov[i * n + i] = 1.0;
        }
        Self {
            rng,
            lambda,
            mean,
            sigma: sigma0,
            cov,
            p_c: vec![0.0; n],
            p_sigma: vec![0.0; n],
            generation: 0,
        }
    }

    fn n(&self) -> usize {
        self.mean.len()
    }

    /// Samples and evaluates one generation. Returns early, leaving the
    /// distribution untouched, when fewer than `lambda` evaluations remain.
    pub fn step(&mut self, inst: &ProblemInstance, limit: usize, out: &mut Vec<f64>) -> Result<()> {
        let n = self.n();
        let cov = DMatrix::from_row_slice(n, n, &self.cov);
        let eig = SymmetricEigen::new(cov);
        let b = eig.eigenvectors;
        let d: Vec<f64> = eig.eigenvalues.iter().map(|&e| e.max(EIGEN_FLOOR).sqrt()).collect();

        let mut steps = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let z = DVector::from_fn(n, |i, _| {
                let v: f64 = self.rng.sample(StandardNormal);
                v * d[i]
            });
            steps.push(&b * z);
        }
        let mut fitness = Vec::with_capacity(self.lambda);
        for y in steps.iter().take(limit) {
            let x: Vec<f64> = self.mean.iter().zip(y.iter()).map(|(m, yi)| m + self.sigma * yi).collect();
            let f = inst.evaluate(&x)?;
            out.push(f);
            fitness.push(f);
        }
        if fitness.len() < self.lambda {
            return Ok(());
        }

        let p = Params::new(n, self.lambda);
        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));

        let mut y_w = DVector::zeros(n);
        for (w, &k) in p.weights.iter().zip(&order[..p.mu]) {
            y_w.axpy(*w, &steps[k], 1.0);
        }
        for (m, yi) in self.mean.iter_mut().zip(y_w.iter()) {
            *m += self.sigma * yi;
        }

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let mut bt_y = b.transpose() * &y_w;
        for (v, di) in bt_y.iter_mut().zip(&d) {
            *v /= di;
        }
        let inv_sqrt_y = &b * bt_y;
        let cs = (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt();
        for (ps, v) in self.p_sigma.iter_mut().zip(inv_sqrt_y.iter()) {
            *ps = (1.0 - p.c_sigma) * *ps + cs * v;
        }
        let ps_norm = self.p_sigma.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.generation += 1;
        let decay = 1.0 - (1.0 - p.c_sigma).powi(2 * self.generation as i32);
        let h_sigma = ps_norm / decay.sqrt() / p.chi_n < 1.4 + 2.0 / (n as f64 + 1.0);
        let cc = (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt();
        for (pc, v) in self.p_c.iter_mut().zip(y_w.iter()) {
            *pc = (1.0 - p.c_c) * *pc + if h_sigma { cc * v } else { 0.0 };
        }

        let delta_h = if h_sigma { 0.0 } else { p.c_c * (2.0 - p.c_c) };
        let keep = 1.0 - p.c_1 - p.c_mu + p.c_1 * delta_h;
        for i in 0..n {
            for j in 0..=i {
                let mut rank_mu = 0.0;
                for (w, &k) in p.weights.iter().zip(&order[..p.mu]) {
                    rank_mu += w * steps[k][i] * steps[k][j];
                }
                let v = keep * self.cov[i * n + j]
                    + p.c_1 * self.p_c[i] * self.p_c[j]
                    + p.c_mu * rank_mu;
                self.cov[i * n + j] = v;
                self.cov[j * n + i] = v;
            }
        }

        self.sigma *= ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();
        self.sigma = self.sigma.min(SIGMA_MAX);
        Ok(())
    }

    pub fn encode(&self, w: &mut Writer) {
        w.rng(&self.rng);
        w.u64(self.lambda as u64);
        w.f64s(&self.mean);
        w.f64(self.sigma);
        w.f64s(&self.cov);
        w.f64s(&self.p_c);
        w.f64s(&self.p_sigma);
        w.u64(self.generation);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        Ok(Self {
            rng: r.rng()?,
            lambda: r.u64()? as usize,
            mean: r.f64s()?,
            sigma: r.f64()?,
            cov: r.f64s()?,
            p_c: r.f64s()?,
            p_sigma: r.f64s()?,
            generation: r.u64()?,
        })
    }
}
