//! Global-best particle swarm with constriction-equivalent coefficients.

use rand::Rng as _;

use super::codec::{Reader, Writer};
use crate::bbob::{ProblemInstance, LOWER_BOUND, UPPER_BOUND};
use crate::error::Result;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Coefficients {
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub v_max: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct State {
    pub rng: Rng,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub personal_best: Vec<Vec<f64>>,
    pub personal_best_fitness: Vec<f64>,
    pub global_best: Vec<f64>,
    pub global_best_fitness: f64,
    pub started: bool,
}

impl State {
    pub fn new(mut rng: Rng, n: usize, swarm: usize, coef: &Coefficients) -> Self {
        let positions: Vec<Vec<f64>> = (0..swarm)
            .map(|_| (0..n).map(|_| rng.random_range(LOWER_BOUND..=UPPER_BOUND)).collect())
            .collect();
        let velocities = (0..swarm)
            .map(|_| (0..n).map(|_| rng.random_range(-coef.v_max..=coef.v_max) * 0.5).collect())
            .collect();
        Self {
            rng,
            personal_best: positions.clone(),
            personal_best_fitness: vec![f64::INFINITY; swarm],
            global_best: positions[0].clone(),
            global_best_fitness: f64::INFINITY,
            positions,
            velocities,
            started: false,
        }
    }

    pub fn step(
        &mut self,
        inst: &ProblemInstance,
        coef: &Coefficients,
        limit: usize,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        if self.started {
            for i in 0..self.positions.len() {
                for j in 0..self.positions[i].len() {
                    let r1: f64 = self.rng.random();
                    let r2: f64 = self.rng.random();
                    let x = self.positions[i][j];
                    let v = coef.inertia * self.velocities[i][j]
                        + coef.c1 * r1 * (self.personal_best[i][j] - x)
                        + coef.c2 * r2 * (self.global_best[j] - x);
                    let v = v.clamp(-coef.v_max, coef.v_max);
                    self.velocities[i][j] = v;
                    self.positions[i][j] = (x + v).clamp(LOWER_BOUND, UPPER_BOUND);
                }
            }
        }
        self.started = true;
        let swarm = self.positions.len();
        let mut fitness = Vec::with_capacity(swarm);
        for x in self.positions.iter().take(limit) {
            let f = inst.evaluate(x)?;
            out.push(f);
            fitness.push(f);
        }
        if fitness.len() < swarm {
            return Ok(());
        }
        for (i, &f) in fitness.iter().enumerate() {
            if f < self.personal_best_fitness[i] {
                self.personal_best_fitness[i] = f;
                self.personal_best[i].clone_from(&self.positions[i]);
            }
            if f < self.global_best_fitness {
                self.global_best_fitness = f;
                self.global_best.clone_from(&self.positions[i]);
            }
        }
        Ok(())
    }

    pub fn encode(&self, w: &mut Writer) {
        w.rng(&self.rng);
        w.rows(&self.positions);
        w.rows(&self.velocities);
        w.rows(&self.personal_best);
        w.f64s(&self.personal_best_fitness);
        w.f64s(&self.global_best);
        w.f64(self.global_best_fitness);
        w.bool(self.started);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        Ok(Self {
            rng: r.rng()?,
            positions: r.rows()?,
            velocities: r.rows()?,
            personal_best: r.rows()?,
            personal_best_fitness: r.f64s()?,
            global_best: r.f64s()?,
            global_best_fitness: r.f64()?,
            started: r.bool()?,
        })
    }
}
