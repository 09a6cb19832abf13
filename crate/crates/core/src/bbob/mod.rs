//! Noiseless BBOB-style benchmark functions with seeded instance
//! transformations.
//!
//! Each [`ProblemInstance`] is fully determined by its function id, instance
//! id and dimension. The transformation parameters (optimum location, target
//! offset, rotations, peak layouts) are re-derived from a seed on
//! construction and are never serialized.

mod functions;
pub(crate) mod transforms;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{derive_seed, rng_from, Rng};

pub const NUM_FUNCTIONS: u32 = 24;
pub const LOWER_BOUND: f64 = -5.0;
pub const UPPER_BOUND: f64 = 5.0;

const SUITE_SEED: u64 = 0xBB0B_5EED;
const SCHWEFEL_OPT_HALF: f64 = 4.209_687_462_275_036 / 2.0;
const LUNACEK_MU0: f64 = 2.5;

/// Serializable identity of an instance. Transformations are re-derived from
/// `seed`, which itself is a function of the other three fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub function_id: u32,
    pub instance_id: u32,
    pub dimension: usize,
    pub seed: u64,
}

impl InstanceDescriptor {
    pub fn instantiate(&self) -> Result<ProblemInstance> {
        let inst = make_instance(self.function_id, self.instance_id, self.dimension)?;
        if inst.seed != self.seed {
            return Err(invalid(format!(
                "descriptor seed {} does not match derived seed {} for f{} i{} d{}",
                self.seed, inst.seed, self.function_id, self.instance_id, self.dimension
            )));
        }
        Ok(inst)
    }
}

/// Peaks of the Gallagher functions, pre-rotated.
#[derive(Clone, Debug)]
pub(crate) struct Peaks {
    /// `R y_i` for every peak centre `y_i`; peak 0 is the global optimum.
    pub rotated_centres: Vec<Vec<f64>>,
    pub heights: Vec<f64>,
    /// Diagonal of the per-peak conditioning matrix.
    pub scales: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub function_id: u32,
    pub instance_id: u32,
    pub dimension: usize,
    pub x_opt: Vec<f64>,
    pub f_opt: f64,
    pub rotation_r: DMatrix<f64>,
    pub rotation_q: DMatrix<f64>,
    pub seed: u64,
    pub(crate) peaks: Option<Peaks>,
    /// Constant that zeroes the raw Schwefel value at the optimum.
    pub(crate) offset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchPoint {
    pub x: Vec<f64>,
    fitness: Option<f64>,
}

impl SearchPoint {
    pub fn new(x: Vec<f64>) -> Self {
        Self { x, fitness: None }
    }

    pub fn fitness(&self) -> Option<f64> {
        self.fitness
    }

    /// Records the fitness; a second call with a different value is rejected.
    pub fn set_fitness(&mut self, f: f64) -> Result<()> {
        match self.fitness {
            Some(old) if old.to_bits() != f.to_bits() => {
                Err(invalid("fitness of a search point is immutable once set"))
            }
            _ => {
                self.fitness = Some(f);
                Ok(())
            }
        }
    }
}

pub fn instance_seed(function_id: u32, instance_id: u32, dimension: usize) -> u64 {
    derive_seed(
        SUITE_SEED,
        &[function_id as u64, instance_id as u64, dimension as u64],
    )
}

fn random_rotation(rng: &mut Rng, d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    transforms::orthonormalize(m)
}

fn random_signs(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

fn gallagher_peaks(
    rng: &mut Rng,
    d: usize,
    count: usize,
    best_alpha: f64,
    centre: &[f64],
    rotation: &DMatrix<f64>,
) -> Peaks {
    let spread = (count - 1) as f64;
    let mut alphas: Vec<f64> = (0..count - 1)
        .map(|j| 1000f64.powf(2.0 * j as f64 / (spread - 1.0)))
        .collect();
    shuffle(rng, &mut alphas);
    alphas.insert(0, best_alpha);

    let mut centres = vec![centre.to_vec()];
    for _ in 1..count {
        centres.push((0..d).map(|_| rng.random_range(-4.9..4.9)).collect());
    }
    let heights = (0..count)
        .map(|i| {
            if i == 0 {
                10.0
            } else {
                1.1 + 8.0 * (i - 1) as f64 / (spread - 1.0)
            }
        })
        .collect();
    let scales = alphas
        .iter()
        .map(|&alpha| {
            let mut diag: Vec<f64> = (0..d)
                .map(|k| alpha.powf(0.5 * transforms::ratio(k, d)))
                .collect();
            shuffle(rng, &mut diag);
            let norm = alpha.powf(0.25);
            diag.iter_mut().for_each(|c| *c /= norm);
            diag
        })
        .collect();
    Peaks {
        rotated_centres: centres
            .iter()
            .map(|c| transforms::matvec(rotation, c))
            .collect(),
        heights,
        scales,
    }
}

fn shuffle<T>(rng: &mut Rng, v: &mut [T]) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Builds the instance `(function_id, instance_id, dimension)`.
pub fn make_instance(function_id: u32, instance_id: u32, dimension: usize) -> Result<ProblemInstance> {
    if !(1..=NUM_FUNCTIONS).contains(&function_id) {
        return Err(invalid(format!("function_id {function_id} not in 1..=24")));
    }
    if instance_id < 1 {
        return Err(invalid("instance_id must be >= 1"));
    }
    if dimension < 2 {
        return Err(invalid(format!("dimension {dimension} < 2")));
    }
    let seed = instance_seed(function_id, instance_id, dimension);
    let mut rng = rng_from(seed);
    let d = dimension;

    let mut x_opt: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..=4.0)).collect();
    let cauchy = Cauchy::new(0.0, 100.0).expect("valid scale");
    let raw: f64 = cauchy.sample(&mut rng);
    let f_opt = ((raw * 100.0).round() / 100.0).clamp(-1000.0, 1000.0);
    let rotation_r = random_rotation(&mut rng, d);
    let rotation_q = random_rotation(&mut rng, d);
    let signs = random_signs(&mut rng, d);

    match function_id {
        20 => x_opt = signs.iter().map(|s| s * SCHWEFEL_OPT_HALF).collect(),
        24 => x_opt = signs.iter().map(|s| s * LUNACEK_MU0 / 2.0).collect(),
        _ => {}
    }
    let peaks = match function_id {
        21 => Some(gallagher_peaks(&mut rng, d, 101, 1000.0, &x_opt, &rotation_r)),
        22 => Some(gallagher_peaks(&mut rng, d, 21, 1000.0 * 1000.0, &x_opt, &rotation_r)),
        _ => None,
    };

    let mut inst = ProblemInstance {
        function_id,
        instance_id,
        dimension,
        x_opt,
        f_opt,
        rotation_r,
        rotation_q,
        seed,
        peaks,
        offset: 0.0,
    };
    if function_id == 20 {
        inst.offset = -functions::raw_value(&inst, &inst.x_opt.clone());
    }
    Ok(inst)
}

impl ProblemInstance {
    pub fn descriptor(&self) -> InstanceDescriptor {
        InstanceDescriptor {
            function_id: self.function_id,
            instance_id: self.instance_id,
            dimension: self.dimension,
            seed: self.seed,
        }
    }

    /// Objective value at `x`. Points outside `[-5, 5]^d` are evaluated
    /// as-is apart from the penalties built into some definitions.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(invalid(format!(
                "point has length {}, instance dimension is {}",
                x.len(),
                self.dimension
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("point has non-finite coordinates"));
        }
        Ok(functions::raw_value(self, x) + self.offset + self.f_opt)
    }

    pub fn evaluate_point(&self, p: &mut SearchPoint) -> Result<f64> {
        let f = self.evaluate(&p.x)?;
        p.set_fitness(f)?;
        Ok(f)
    }
}

/// All 24 functions with `instances_per_function` instances each, ordered by
/// `(function_id, instance_id)`.
pub fn list_suite(instances_per_function: u32, dimension: usize) -> Result<Vec<ProblemInstance>> {
    if instances_per_function < 1 {
        return Err(invalid("instances_per_function must be >= 1"));
    }
    let mut out = Vec::with_capacity((NUM_FUNCTIONS * instances_per_function) as usize);
    for fid in 1..=NUM_FUNCTIONS {
        for iid in 1..=instances_per_function {
            out.push(make_instance(fid, iid, dimension)?);
        }
    }
    Ok(out)
}
