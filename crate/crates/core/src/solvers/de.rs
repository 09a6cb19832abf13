//! DE/rand/1/bin with synchronous generational replacement.

use rand::Rng as _;

use super::codec::{Reader, Writer};
use crate::bbob::{ProblemInstance, LOWER_BOUND, UPPER_BOUND};
use crate::error::Result;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Coefficients {
    pub f: f64,
    pub cr: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct State {
    pub rng: Rng,
    pub population: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub started: bool,
}

impl State {
    pub fn new(mut rng: Rng, n: usize, size: usize) -> Self {
        let population = (0..size)
            .map(|_| (0..n).map(|_| rng.random_range(LOWER_BOUND..=UPPER_BOUND)).collect())
            .collect();
        Self { rng, population, fitness: vec![f64::INFINITY; size], started: false }
    }

    fn trial(&mut self, target: usize, coef: &Coefficients) -> Vec<f64> {
        let np = self.population.len();
        let pick = |taken: &[usize], rng: &mut Rng| loop {
            let r = rng.random_range(0..np);
            if !taken.contains(&r) {
                return r;
            }
        };
        let r1 = pick(&[target], &mut self.rng);
        let r2 = pick(&[target, r1], &mut self.rng);
        let r3 = pick(&[target, r1, r2], &mut self.rng);
        let n = self.population[target].len();
        let forced = self.rng.random_range(0..n);
        (0..n)
            .map(|j| {
                let cross: f64 = self.rng.random();
                let v = if cross < coef.cr || j == forced {
                    self.population[r1][j]
                        + coef.f * (self.population[r2][j] - self.population[r3][j])
                } else {
                    self.population[target][j]
                };
                v.clamp(LOWER_BOUND, UPPER_BOUND)
            })
            .collect()
    }

    pub fn step(
        &mut self,
        inst: &ProblemInstance,
        coef: &Coefficients,
        limit: usize,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        let np = self.population.len();
        if !self.started {
            self.started = true;
            for i in 0..np.min(limit) {
                let f = inst.evaluate(&self.population[i])?;
                out.push(f);
                self.fitness[i] = f;
            }
            return Ok(());
        }
        let trials: Vec<Vec<f64>> = (0..np).map(|i| self.trial(i, coef)).collect();
        let mut scores = Vec::with_capacity(np);
        for t in trials.iter().take(limit) {
            let f = inst.evaluate(t)?;
            out.push(f);
            scores.push(f);
        }
        if scores.len() < np {
            return Ok(());
        }
        for (i, (t, f)) in trials.into_iter().zip(scores).enumerate() {
            if f <= self.fitness[i] {
                self.population[i] = t;
                self.fitness[i] = f;
            }
        }
        Ok(())
    }

    pub fn encode(&self, w: &mut Writer) {
        w.rng(&self.rng);
        w.rows(&self.population);
        w.f64s(&self.fitness);
        w.bool(self.started);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        Ok(Self {
            rng: r.rng()?,
            population: r.rows()?,
            fitness: r.f64s()?,
            started: r.bool()?,
        })
    }
}
