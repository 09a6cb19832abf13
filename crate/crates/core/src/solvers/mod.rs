//! Population-based solvers with full evaluation logs, per-generation
//! checkpoints and exact warm-start resumption.

mod cmaes;
mod codec;
mod de;
pub mod io;
mod pso;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use base64::Engine as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bbob::{InstanceDescriptor, ProblemInstance};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, rng_from};

use codec::{Reader, Writer};

/// Portfolio member. The declaration order is the class order used for tie
/// breaking everywhere: CMA-ES < DE < PSO.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "CMAES")]
    Cmaes,
    #[serde(rename = "DE")]
    De,
    #[serde(rename = "PSO")]
    Pso,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Cmaes, Algorithm::De, Algorithm::Pso];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| invalid(format!("no algorithm with class index {i}")))
    }

    /// One-letter code used in input-kind names (`C-P`, `D-P`, ...).
    pub fn letter(self) -> char {
        match self {
            Algorithm::Cmaes => 'C',
            Algorithm::De => 'D',
            Algorithm::Pso => 'P',
        }
    }

    pub fn from_letter(c: char) -> Result<Self> {
        match c {
            'C' => Ok(Algorithm::Cmaes),
            'D' => Ok(Algorithm::De),
            'P' => Ok(Algorithm::Pso),
            other => Err(invalid(format!("unknown algorithm letter {other:?}"))),
        }
    }

    pub fn default_population(self) -> usize {
        match self {
            Algorithm::Cmaes => 10,
            Algorithm::De => 30,
            Algorithm::Pso => 40,
        }
    }

    fn default_hyperparameters(self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            Algorithm::Cmaes => &[("sigma0", 2.0)],
            Algorithm::Pso => &[("inertia", 0.7298), ("c1", 1.49618), ("c2", 1.49618), ("v_max", 10.0)],
            Algorithm::De => &[("f", 0.5), ("cr", 0.9)],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn tag(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Cmaes => "CMAES",
            Algorithm::De => "DE",
            Algorithm::Pso => "PSO",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CMAES" | "CMA-ES" | "C" => Ok(Algorithm::Cmaes),
            "DE" | "D" => Ok(Algorithm::De),
            "PSO" | "P" => Ok(Algorithm::Pso),
            _ => Err(invalid(format!("unknown algorithm {s:?}"))),
        }
    }
}

pub const DEFAULT_CHECKPOINT_CAP: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub population_size: usize,
    pub seed: u64,
    pub budget_evals: usize,
    pub hyperparameters: BTreeMap<String, f64>,
    /// Checkpoints are kept after generations `1..=checkpoint_cap`.
    pub checkpoint_cap: usize,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, seed: u64, budget_evals: usize) -> Self {
        Self {
            algorithm,
            population_size: algorithm.default_population(),
            seed,
            budget_evals,
            hyperparameters: algorithm.default_hyperparameters(),
            checkpoint_cap: DEFAULT_CHECKPOINT_CAP,
        }
    }

    pub fn with_population(mut self, size: usize) -> Self {
        self.population_size = size;
        self
    }

    pub fn with_checkpoint_cap(mut self, cap: usize) -> Self {
        self.checkpoint_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(invalid(format!("population_size {} < 4", self.population_size)));
        }
        if self.budget_evals < self.population_size {
            return Err(invalid(format!(
                "budget {} is smaller than one generation of {}",
                self.budget_evals, self.population_size
            )));
        }
        let known = self.algorithm.default_hyperparameters();
        for (k, v) in &self.hyperparameters {
            if !known.contains_key(k) {
                return Err(invalid(format!("unknown {} hyperparameter {k:?}", self.algorithm)));
            }
            if !v.is_finite() {
                return Err(invalid(format!("hyperparameter {k} is not finite")));
            }
        }
        Ok(())
    }

    fn hyper(&self, key: &str) -> f64 {
        self.hyperparameters
            .get(key)
            .copied()
            .unwrap_or_else(|| self.algorithm.default_hyperparameters()[key])
    }

    fn pso_coefficients(&self) -> pso::Coefficients {
        pso::Coefficients {
            inertia: self.hyper("inertia"),
            c1: self.hyper("c1"),
            c2: self.hyper("c2"),
            v_max: self.hyper("v_max"),
        }
    }

    fn de_coefficients(&self) -> de::Coefficients {
        de::Coefficients { f: self.hyper("f"), cr: self.hyper("cr") }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub eval_index: usize,
    pub generation: usize,
    pub fitness: f64,
}

#[derive(Clone, Debug)]
enum SolverState {
    Cmaes(cmaes::State),
    Pso(pso::State),
    De(de::State),
}

impl SolverState {
    fn init(inst: &ProblemInstance, cfg: &SolverConfig) -> Self {
        let rng = rng_from(cfg.seed);
        let n = inst.dimension;
        match cfg.algorithm {
            Algorithm::Cmaes => {
                SolverState::Cmaes(cmaes::State::new(rng, n, cfg.population_size, cfg.hyper("sigma0")))
            }
            Algorithm::Pso => {
                SolverState::Pso(pso::State::new(rng, n, cfg.population_size, &cfg.pso_coefficients()))
            }
            Algorithm::De => SolverState::De(de::State::new(rng, n, cfg.population_size)),
        }
    }

    fn step(
        &mut self,
        inst: &ProblemInstance,
        cfg: &SolverConfig,
        limit: usize,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        match self {
            SolverState::Cmaes(s) => s.step(inst, limit, out),
            SolverState::Pso(s) => s.step(inst, &cfg.pso_coefficients(), limit, out),
            SolverState::De(s) => s.step(inst, &cfg.de_coefficients(), limit, out),
        }
    }

    fn algorithm(&self) -> Algorithm {
        match self {
            SolverState::Cmaes(_) => Algorithm::Cmaes,
            SolverState::Pso(_) => Algorithm::Pso,
            SolverState::De(_) => Algorithm::De,
        }
    }

    fn encode(&self, w: &mut Writer) {
        w.u8(self.algorithm().tag());
        match self {
            SolverState::Cmaes(s) => s.encode(w),
            SolverState::Pso(s) => s.encode(w),
            SolverState::De(s) => s.encode(w),
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let tag = r.u8()?;
        Ok(match Algorithm::from_index(tag as usize)? {
            Algorithm::Cmaes => SolverState::Cmaes(cmaes::State::decode(r)?),
            Algorithm::Pso => SolverState::Pso(pso::State::decode(r)?),
            Algorithm::De => SolverState::De(de::State::decode(r)?),
        })
    }
}

/// Complete solver state after a generation boundary.
#[derive(Clone, Debug)]
pub struct SolverCheckpoint {
    pub algorithm: Algorithm,
    pub instance: InstanceDescriptor,
    pub population_size: usize,
    /// Number of completed generations.
    pub generation: usize,
    pub evals_done: usize,
    pub best_so_far: f64,
    state: SolverState,
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"TSC1";

impl SolverCheckpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.buf.extend_from_slice(CHECKPOINT_MAGIC);
        w.u8(self.algorithm.tag());
        w.u64(self.instance.function_id as u64);
        w.u64(self.instance.instance_id as u64);
        w.u64(self.instance.dimension as u64);
        w.u64(self.instance.seed);
        w.u64(self.population_size as u64);
        w.u64(self.generation as u64);
        w.u64(self.evals_done as u64);
        w.f64(self.best_so_far);
        self.state.encode(&mut w);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a solver checkpoint".into()));
        }
        let mut r = Reader::new(&bytes[4..]);
        let algorithm = Algorithm::from_index(r.u8()? as usize)?;
        let instance = InstanceDescriptor {
            function_id: r.u64()? as u32,
            instance_id: r.u64()? as u32,
            dimension: r.u64()? as usize,
            seed: r.u64()?,
        };
        let chk = Self {
            algorithm,
            instance,
            population_size: r.u64()? as usize,
            generation: r.u64()? as usize,
            evals_done: r.u64()? as usize,
            best_so_far: r.f64()?,
            state: SolverState::decode(&mut r)?,
        };
        r.finish()?;
        if chk.state.algorithm() != chk.algorithm {
            return Err(Error::Format("checkpoint state does not match its algorithm tag".into()));
        }
        Ok(chk)
    }

    pub fn to_base64(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(self.to_bytes())
    }

    pub fn from_base64(s: &str) -> Result<Self> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(s)
            .map_err(|e| Error::Format(format!("checkpoint payload is not base64: {e}")))?;
        Self::from_bytes(&bytes)
    }
}

#[derive(Clone, Debug)]
pub struct RunLog {
    pub config: SolverConfig,
    pub instance: InstanceDescriptor,
    pub run_index: u32,
    pub records: Vec<Record>,
    pub checkpoints: BTreeMap<usize, SolverCheckpoint>,
    pub final_best: f64,
}

impl RunLog {
    pub fn fitness(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fitness).collect()
    }

    /// Number of generations with exactly `population_size` records.
    pub fn complete_generations(&self) -> usize {
        let pop = self.config.population_size;
        let Some(first) = self.records.first() else {
            return 0;
        };
        let span = self.records.len() + first.eval_index;
        span / pop - first.generation
    }
}

fn drive(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    mut state: SolverState,
    mut generation: usize,
    mut evals: usize,
    mut best: f64,
    total: usize,
) -> Result<(Vec<Record>, BTreeMap<usize, SolverCheckpoint>, f64)> {
    let pop = cfg.population_size;
    let mut records = Vec::with_capacity(total.saturating_sub(evals));
    let mut checkpoints = BTreeMap::new();
    let mut batch = Vec::with_capacity(pop);
    while evals < total {
        let limit = pop.min(total - evals);
        batch.clear();
        state.step(inst, cfg, limit, &mut batch)?;
        for &f in &batch {
            records.push(Record { eval_index: evals, generation, fitness: f });
            evals += 1;
            if f < best {
                best = f;
            }
        }
        if limit < pop {
            break;
        }
        generation += 1;
        if generation <= cfg.checkpoint_cap {
            checkpoints.insert(
                generation,
                SolverCheckpoint {
                    algorithm: cfg.algorithm,
                    instance: inst.descriptor(),
                    population_size: pop,
                    generation,
                    evals_done: evals,
                    best_so_far: best,
                    state: state.clone(),
                },
            );
        }
    }
    Ok((records, checkpoints, best))
}

/// Runs `cfg` on `inst` for exactly `cfg.budget_evals` evaluations.
pub fn run(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<RunLog> {
    cfg.validate()?;
    let state = SolverState::init(inst, cfg);
    let (records, checkpoints, best) =
        drive(inst, cfg, state, 0, 0, f64::INFINITY, cfg.budget_evals)?;
    Ok(RunLog {
        config: cfg.clone(),
        instance: inst.descriptor(),
        run_index: 0,
        records,
        checkpoints,
        final_best: best,
    })
}

/// Continues a run from `chk` for `extra_evals` evaluations.
///
/// The returned log holds only the continuation; its eval indices and
/// generations carry on from the checkpoint, and its `config.budget_evals`
/// is the combined budget.
pub fn resume(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    chk: &SolverCheckpoint,
    extra_evals: usize,
) -> Result<RunLog> {
    if chk.algorithm != cfg.algorithm {
        return Err(Error::IncompatibleCheckpoint(format!(
            "checkpoint is from {}, config is {}",
            chk.algorithm, cfg.algorithm
        )));
    }
    if chk.instance != inst.descriptor() {
        return Err(Error::IncompatibleCheckpoint(format!(
            "checkpoint is for f{} i{} d{}, instance is f{} i{} d{}",
            chk.instance.function_id,
            chk.instance.instance_id,
            chk.instance.dimension,
            inst.function_id,
            inst.instance_id,
            inst.dimension
        )));
    }
    if chk.population_size != cfg.population_size {
        return Err(Error::IncompatibleCheckpoint("population size differs".into()));
    }
    let mut total_cfg = cfg.clone();
    total_cfg.budget_evals = chk.evals_done + extra_evals;
    let (records, checkpoints, best) = drive(
        inst,
        &total_cfg,
        chk.state.clone(),
        chk.generation,
        chk.evals_done,
        chk.best_so_far,
        total_cfg.budget_evals,
    )?;
    Ok(RunLog {
        config: total_cfg,
        instance: inst.descriptor(),
        run_index: 0,
        records,
        checkpoints,
        final_best: best,
    })
}

pub fn run_seed(base_seed: u64, algorithm: Algorithm, inst: &InstanceDescriptor, run_index: u32) -> u64 {
    derive_seed(
        base_seed,
        &[
            algorithm.index() as u64,
            inst.function_id as u64,
            inst.instance_id as u64,
            run_index as u64,
        ],
    )
}

/// One cell of a portfolio experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RunKey {
    pub algorithm: Algorithm,
    pub function_id: u32,
    pub instance_id: u32,
    pub run_index: u32,
}

impl fmt::Display for RunKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} f{} i{} run {}",
            self.algorithm, self.function_id, self.instance_id, self.run_index
        )
    }
}

/// Enumerates portfolio cells in (algorithm, function, instance, run) order.
pub fn portfolio_cells(suite: &[ProblemInstance], runs_per_instance: u32) -> Vec<(RunKey, usize)> {
    let mut cells = Vec::new();
    for alg in Algorithm::ALL {
        for (idx, inst) in suite.iter().enumerate() {
            for run_index in 0..runs_per_instance {
                cells.push((
                    RunKey {
                        algorithm: alg,
                        function_id: inst.function_id,
                        instance_id: inst.instance_id,
                        run_index,
                    },
                    idx,
                ));
            }
        }
    }
    cells
}

/// Config for one portfolio cell with default population and hyperparameters.
pub fn cell_config(key: &RunKey, inst: &ProblemInstance, budget: usize, base_seed: u64) -> SolverConfig {
    SolverConfig::new(key.algorithm, run_seed(base_seed, key.algorithm, &inst.descriptor(), key.run_index), budget)
}

pub fn run_cell(inst: &ProblemInstance, key: &RunKey, cfg: &SolverConfig) -> Result<RunLog> {
    let mut log = run(inst, cfg).map_err(|e| Error::Run { id: key.to_string(), source: Box::new(e) })?;
    log.run_index = key.run_index;
    Ok(log)
}

/// Runs all three solvers `runs_per_instance` times on every instance.
pub fn run_portfolio(
    suite: &[ProblemInstance],
    runs_per_instance: u32,
    budget: usize,
    base_seed: u64,
) -> Result<Vec<RunLog>> {
    if runs_per_instance < 1 {
        return Err(invalid("runs_per_instance must be >= 1"));
    }
    portfolio_cells(suite, runs_per_instance)
        .par_iter()
        .map(|(key, idx)| {
            let inst = &suite[*idx];
            run_cell(inst, key, &cell_config(key, inst, budget, base_seed))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbob::make_instance;

    fn bits(log: &RunLog) -> Vec<u64> {
        log.records.iter().map(|r| r.fitness.to_bits()).collect()
    }

    #[test]
    fn pso_generation_counts() {
        let inst = make_instance(1, 1, 10).unwrap();
        let log = run(&inst, &SolverConfig::new(Algorithm::Pso, 1, 280)).unwrap();
        assert_eq!(log.records.len(), 280);
        assert_eq!(log.complete_generations(), 7);
        assert_eq!(log.records.last().unwrap().generation, 6);
    }

    #[test]
    fn cmaes_two_generations() {
        let inst = make_instance(1, 1, 10).unwrap();
        let log = run(&inst, &SolverConfig::new(Algorithm::Cmaes, 1, 20)).unwrap();
        assert_eq!(log.records.len(), 20);
        assert!(log.records[..10].iter().all(|r| r.generation == 0));
        assert!(log.records[10..].iter().all(|r| r.generation == 1));
    }

    #[test]
    fn runs_are_reproducible() {
        let inst = make_instance(7, 2, 5).unwrap();
        for alg in Algorithm::ALL {
            let cfg = SolverConfig::new(alg, 11, 500);
            assert_eq!(bits(&run(&inst, &cfg).unwrap()), bits(&run(&inst, &cfg).unwrap()));
        }
    }

    #[test]
    fn log_structure_invariants() {
        let inst = make_instance(15, 1, 4).unwrap();
        for alg in Algorithm::ALL {
            let cfg = SolverConfig::new(alg, 3, 437);
            let log = run(&inst, &cfg).unwrap();
            assert_eq!(log.records.len(), 437);
            for (i, r) in log.records.iter().enumerate() {
                assert_eq!(r.eval_index, i);
                assert_eq!(r.generation, i / cfg.population_size);
            }
            let min = log.records.iter().map(|r| r.fitness).fold(f64::INFINITY, f64::min);
            assert_eq!(log.final_best, min);
            assert_eq!(log.checkpoints.len(), DEFAULT_CHECKPOINT_CAP);
        }
    }

    #[test]
    fn budget_below_one_generation_is_rejected() {
        let inst = make_instance(1, 1, 3).unwrap();
        let cfg = SolverConfig::new(Algorithm::Pso, 0, 39);
        assert!(matches!(run(&inst, &cfg), Err(Error::InvalidArgument(_))));
        let cfg = SolverConfig::new(Algorithm::De, 0, 100).with_population(3);
        assert!(run(&inst, &cfg).is_err());
    }

    #[test]
    fn unknown_hyperparameter_is_rejected() {
        let mut cfg = SolverConfig::new(Algorithm::De, 0, 100);
        cfg.hyperparameters.insert("momentum".into(), 1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn resume_continues_exactly() {
        let inst = make_instance(8, 3, 10).unwrap();
        for alg in Algorithm::ALL {
            let pop = alg.default_population();
            let cfg = SolverConfig::new(alg, 5, 10 * pop);
            let full = run(&inst, &cfg).unwrap();
            let prefix = run(&inst, &SolverConfig { budget_evals: 7 * pop, ..cfg.clone() }).unwrap();
            let chk = &prefix.checkpoints[&7];
            let tail = resume(&inst, &cfg, chk, 3 * pop).unwrap();
            assert_eq!(tail.records.first().unwrap().eval_index, 7 * pop);
            assert_eq!(tail.records.first().unwrap().generation, 7);
            let joined: Vec<u64> = bits(&prefix).into_iter().chain(bits(&tail)).collect();
            assert_eq!(joined, bits(&full));
            assert_eq!(tail.final_best, full.final_best);
            assert_eq!(tail.complete_generations(), 3);
        }
    }

    #[test]
    fn resume_with_zero_extra_is_empty() {
        let inst = make_instance(2, 1, 5).unwrap();
        let cfg = SolverConfig::new(Algorithm::De, 9, 90);
        let log = run(&inst, &cfg).unwrap();
        let chk = &log.checkpoints[&3];
        let tail = resume(&inst, &cfg, chk, 0).unwrap();
        assert!(tail.records.is_empty());
        assert_eq!(tail.final_best, log.final_best);
    }

    #[test]
    fn resume_rejects_foreign_checkpoints() {
        let inst = make_instance(2, 1, 5).unwrap();
        let de = SolverConfig::new(Algorithm::De, 9, 90);
        let chk = run(&inst, &de).unwrap().checkpoints[&1].clone();
        let pso = SolverConfig::new(Algorithm::Pso, 9, 90);
        assert!(matches!(resume(&inst, &pso, &chk, 40), Err(Error::IncompatibleCheckpoint(_))));
        let other = make_instance(2, 2, 5).unwrap();
        assert!(matches!(resume(&other, &de, &chk, 30), Err(Error::IncompatibleCheckpoint(_))));
    }

    #[test]
    fn checkpoint_bytes_round_trip() {
        let inst = make_instance(12, 1, 6).unwrap();
        for alg in Algorithm::ALL {
            let cfg = SolverConfig::new(alg, 2, 6 * alg.default_population());
            let log = run(&inst, &cfg).unwrap();
            let chk = &log.checkpoints[&2];
            let back = SolverCheckpoint::from_base64(&chk.to_base64()).unwrap();
            assert_eq!(back.to_bytes(), chk.to_bytes());
            let a = resume(&inst, &cfg, chk, 100).unwrap();
            let b = resume(&inst, &cfg, &back, 100).unwrap();
            assert_eq!(bits(&a), bits(&b));
        }
        assert!(SolverCheckpoint::from_bytes(b"nope").is_err());
    }

    #[test]
    fn portfolio_counts_and_order() {
        let suite = vec![make_instance(1, 1, 3).unwrap()];
        let logs = run_portfolio(&suite, 1, 100, 0).unwrap();
        assert_eq!(logs.len(), 3);
        let algs: Vec<_> = logs.iter().map(|l| l.config.algorithm).collect();
        assert_eq!(algs, Algorithm::ALL.to_vec());
        assert!(run_portfolio(&[], 5, 100, 0).unwrap().is_empty());
        assert!(run_portfolio(&suite, 0, 100, 0).is_err());
    }

    #[test]
    fn every_solver_solves_the_sphere() {
        let inst = make_instance(1, 1, 5).unwrap();
        for alg in Algorithm::ALL {
            let log = run(&inst, &SolverConfig::new(alg, 21, 10_000)).unwrap();
            let gap = log.final_best - inst.f_opt;
            assert!(gap < 1e-3, "{alg} reached only {gap}");
        }
    }
}
