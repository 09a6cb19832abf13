//! Config-driven stages over an output directory:
//! generate → extract → study → report.
//!
//! ```text
//! <root>/manifest.json
//! <root>/runs/<ALG>/fNN_iI_rR.csv + .json
//! <root>/datasets/labels.json
//! <root>/datasets/traj_<kind>_<mode>_g<g>.csv
//! <root>/datasets/ts_<kind>_<mode>_g<g>.csv
//! <root>/datasets/ela_<k>d.csv
//! <root>/reports/<study>_<hash>.json (+ CSV and SVG companions)
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bbob::{list_suite, ProblemInstance};
use crate::config::{ExperimentConfig, InputFamily};
use crate::ela_features::{compute_ela, sobol_sample};
use crate::error::{invalid, Error, Result};
use crate::experiments::report::ExperimentReport;
use crate::experiments::{
    evaluate_selector, generation_sweep, order_study, project, shuffle_study, LabelTable, LabeledData, Method,
};
use crate::features::FeatureTable;
use crate::rng::derive_seed;
use crate::solvers::io::{read_run, stored_hash, write_run};
use crate::solvers::{portfolio_cells, run_seed, Algorithm, RunKey, RunLog, SolverConfig};
use crate::trajectory::{concat, probe, Combination, Mode, Origin, TrajectorySet};
use crate::ts_features::extract_parts;

const MANIFEST_VERSION: u32 = 1;
const ELA_SEED_TAG: u64 = 0xE1A;
const STUDY_SEED_TAG: u64 = 0x57D;

#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn run_paths(&self, key: &RunKey) -> (PathBuf, PathBuf) {
        let dir = self.root.join("runs").join(key.algorithm.to_string());
        let stem = format!("f{:02}_i{}_r{}", key.function_id, key.instance_id, key.run_index);
        (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.json")))
    }

    pub fn datasets(&self) -> PathBuf {
        self.root.join("datasets")
    }

    pub fn labels(&self) -> PathBuf {
        self.datasets().join("labels.json")
    }

    pub fn trajectories(&self, c: &Combination, mode: Mode, g: usize) -> PathBuf {
        self.datasets().join(format!("traj_{c}_{mode}_g{g}.csv"))
    }

    pub fn ts_features(&self, c: &Combination, mode: Mode, g: usize) -> PathBuf {
        self.datasets().join(format!("ts_{c}_{mode}_g{g}.csv"))
    }

    pub fn ela(&self, k: usize) -> PathBuf {
        self.datasets().join(format!("ela_{k}d.csv"))
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    v: u32,
    config_hash: String,
    config: ExperimentConfig,
}

/// Pipeline bound to a validated config and an output root.
pub struct Pipeline {
    pub config: ExperimentConfig,
    pub layout: Layout,
    pub hash: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GenerateSummary {
    pub computed: usize,
    pub cached: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtractSummary {
    pub files: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    Accuracy,
    Shuffle,
    Order,
    Sweep,
    Project,
}

impl Study {
    pub const ALL: [Study; 5] = [Study::Accuracy, Study::Shuffle, Study::Order, Study::Sweep, Study::Project];
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Study::Accuracy => "accuracy",
            Study::Shuffle => "shuffle",
            Study::Order => "order",
            Study::Sweep => "sweep",
            Study::Project => "project",
        })
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Study::ALL
            .into_iter()
            .find(|st| st.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown study {s:?}")))
    }
}

fn population(a: Algorithm) -> usize {
    a.default_population()
}

fn stale(msg: impl Into<String>) -> Error {
    Error::StaleCache(msg.into())
}

impl Pipeline {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config.output_dir.clone());
        let hash = config.hash();
        Ok(Self { config, layout, hash })
    }

    fn suite(&self) -> Result<Vec<ProblemInstance>> {
        let all = list_suite(self.config.instances_per_function, self.config.dimension)?;
        Ok(all.into_iter().filter(|i| self.config.functions.contains(&i.function_id)).collect())
    }

    fn cells(&self, suite: &[ProblemInstance]) -> Vec<(RunKey, usize)> {
        portfolio_cells(suite, self.config.runs_per_instance)
    }

    fn read_manifest(&self) -> Result<Option<Manifest>> {
        let path = self.layout.manifest();
        if !path.exists() {
            return Ok(None);
        }
        let m: Manifest = serde_json::from_slice(&fs::read(&path)?)?;
        Ok(Some(m))
    }

    /// Fails unless the output directory was produced by this config.
    fn check_manifest(&self, stage: &str) -> Result<()> {
        match self.read_manifest()? {
            None => Err(Error::IncompleteData(format!(
                "{stage}: no manifest in {}; run generate first",
                self.layout.root.display()
            ))),
            Some(m) if m.config_hash != self.hash => Err(stale(format!(
                "{} was produced by config {}, current config is {}",
                self.layout.root.display(),
                m.config_hash,
                self.hash
            ))),
            Some(_) => Ok(()),
        }
    }

    fn write_manifest(&self) -> Result<()> {
        let config = ExperimentConfig { output_dir: PathBuf::new(), ..self.config.clone() };
        let m = Manifest { v: MANIFEST_VERSION, config_hash: self.hash.clone(), config };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(self.layout.manifest(), text)?;
        Ok(())
    }

    fn solver_config(&self, key: &RunKey, inst: &ProblemInstance) -> SolverConfig {
        SolverConfig::new(
            key.algorithm,
            run_seed(self.config.base_seed, key.algorithm, &inst.descriptor(), key.run_index),
            self.config.labeling_budget,
        )
        .with_checkpoint_cap(self.config.checkpoint_cap)
    }

    /// Runs every (algorithm, function, instance, run) cell not already on
    /// disk under the current config hash.
    pub fn generate(&self, force: bool) -> Result<GenerateSummary> {
        fs::create_dir_all(&self.layout.root)?;
        match self.read_manifest()? {
            Some(m) if m.config_hash != self.hash => {
                if !force {
                    return Err(stale(format!(
                        "{} holds data of config {}; pass --force to overwrite",
                        self.layout.root.display(),
                        m.config_hash
                    )));
                }
                for sub in ["runs", "datasets", "reports"] {
                    let p = self.layout.root.join(sub);
                    if p.exists() {
                        fs::remove_dir_all(p)?;
                    }
                }
            }
            _ => {}
        }
        for alg in Algorithm::ALL {
            fs::create_dir_all(self.layout.root.join("runs").join(alg.to_string()))?;
        }
        self.write_manifest()?;

        let suite = self.suite()?;
        let cells = self.cells(&suite);
        let persist = self.config.max_generations();
        let outcomes = cells
            .par_iter()
            .map(|(key, idx)| -> Result<bool> {
                let (csv, json) = self.layout.run_paths(key);
                if json.exists() && csv.exists() {
                    let hash = stored_hash(&json)?;
                    if hash == self.hash && first_line_hash(&csv)?.as_deref() == Some(self.hash.as_str()) {
                        return Ok(false);
                    }
                    if !force {
                        return Err(stale(format!("{} carries config hash {hash}", json.display())));
                    }
                }
                let inst = &suite[*idx];
                let cfg = self.solver_config(key, inst);
                let mut log = crate::solvers::run_cell(inst, key, &cfg)?;
                log.run_index = key.run_index;
                write_run(&log, &csv, &json, Some(persist * cfg.population_size), &self.hash)?;
                Ok(true)
            })
            .collect::<Vec<_>>();
        let mut summary = GenerateSummary::default();
        for o in outcomes {
            if o? {
                summary.computed += 1;
            } else {
                summary.cached += 1;
            }
        }
        Ok(summary)
    }

    /// Loads every run log; the records hold the persisted probing prefix.
    pub fn load_runs(&self) -> Result<Vec<RunLog>> {
        let suite = self.suite()?;
        self.cells(&suite)
            .par_iter()
            .map(|(key, _)| {
                let (csv, json) = self.layout.run_paths(key);
                if !json.exists() || !csv.exists() {
                    return Err(Error::IncompleteData(format!(
                        "generate stage output missing: {}",
                        csv.display()
                    )));
                }
                let (log, hash) = read_run(&csv, &json)?;
                if hash != self.hash {
                    return Err(stale(format!("{} carries config hash {hash}", csv.display())));
                }
                Ok(log)
            })
            .collect()
    }

    /// Every (combination, mode, generations) trajectory set any stage needs.
    pub fn trajectory_kinds(&self) -> Vec<(Combination, Mode, usize)> {
        let cfg = &self.config;
        let mut kinds = BTreeSet::new();
        for c in &cfg.combinations {
            for &m in &cfg.modes {
                for &g in &cfg.generations {
                    kinds.insert((c.clone(), m, g));
                }
            }
        }
        for m in [Mode::Current, Mode::Best] {
            for &g in &cfg.studies.sweep_generations {
                kinds.insert((Combination::all(), m, g));
            }
        }
        kinds.insert((Combination::all(), Mode::Current, cfg.studies.study_generations));
        kinds.into_iter().collect()
    }

    fn wants_ts(&self) -> bool {
        self.config.input_kinds.iter().any(|k| matches!(k, InputFamily::Ts | InputFamily::TsSelected))
    }

    pub fn extract(&self) -> Result<ExtractSummary> {
        self.check_manifest("extract")?;
        fs::create_dir_all(self.layout.datasets())?;
        let runs = self.load_runs()?;
        let labels = crate::experiments::label(&runs)?;
        let mut files = Vec::new();
        let labels_path = self.layout.labels();
        write_labels(&labels_path, &labels, &self.hash)?;
        files.push(labels_path);

        // Group logs by run origin, one per algorithm.
        let mut by_origin: std::collections::BTreeMap<Origin, [Option<&RunLog>; 3]> = Default::default();
        for log in &runs {
            let o = Origin {
                function_id: log.instance.function_id,
                instance_id: log.instance.instance_id,
                run_index: log.run_index,
            };
            by_origin.entry(o).or_default()[log.config.algorithm.index()] = Some(log);
        }

        let ts_kinds: BTreeSet<(Combination, Mode, usize)> = if self.wants_ts() {
            let cfg = &self.config;
            cfg.combinations
                .iter()
                .flat_map(|c| cfg.modes.iter().flat_map(move |&m| cfg.generations.iter().map(move |&g| (c.clone(), m, g))))
                .collect()
        } else {
            BTreeSet::new()
        };

        for (combination, mode, g) in self.trajectory_kinds() {
            let trajectories = by_origin
                .iter()
                .map(|(o, logs)| {
                    let parts = combination
                        .0
                        .iter()
                        .map(|a| {
                            let log = logs[a.index()].ok_or_else(|| {
                                Error::IncompleteData(format!("no {a} run for f{} i{} r{}", o.function_id, o.instance_id, o.run_index))
                            })?;
                            probe(log, g, mode)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let mut t = concat(&parts)?;
                    if self.config.normalize_trajectories {
                        t = t.normalized();
                    }
                    t.label = Some(labels.winner(o.function_id)?);
                    Ok(t)
                })
                .collect::<Result<Vec<_>>>()?;
            let set = TrajectorySet { combination: combination.clone(), mode, generations: g, trajectories };
            let path = self.layout.trajectories(&combination, mode, g);
            set.write_csv(&path, &self.hash)?;
            files.push(path);
            if ts_kinds.contains(&(combination.clone(), mode, g)) {
                let rows = set.trajectories.par_iter().map(extract_parts).collect::<Result<Vec<_>>>()?;
                let path = self.layout.ts_features(&combination, mode, g);
                FeatureTable::new(rows)?.write_csv(&path, &self.hash)?;
                files.push(path);
            }
        }

        if !self.config.ela_budgets.is_empty() {
            let suite = self.suite()?;
            for &k in &self.config.ela_budgets {
                let m = k * self.config.dimension;
                let jobs: Vec<(&ProblemInstance, u32)> = suite
                    .iter()
                    .flat_map(|inst| (0..self.config.runs_per_instance).map(move |r| (inst, r)))
                    .collect();
                let rows = jobs
                    .par_iter()
                    .map(|&(inst, r)| {
                        let seed = derive_seed(
                            self.config.base_seed,
                            &[ELA_SEED_TAG, inst.function_id as u64, inst.instance_id as u64, r as u64, m as u64],
                        );
                        let sample = sobol_sample(inst, m, seed)?;
                        let origin = Origin { function_id: inst.function_id, instance_id: inst.instance_id, run_index: r };
                        compute_ela(&sample, origin)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let path = self.layout.ela(k);
                FeatureTable::new(rows)?.write_csv(&path, &self.hash)?;
                files.push(path);
            }
        }
        Ok(ExtractSummary { files })
    }

    fn need(&self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Error::IncompleteData(format!("extract stage output missing: {}", path.display())));
        }
        Ok(())
    }

    pub fn load_labels(&self) -> Result<LabelTable> {
        let path = self.layout.labels();
        self.need(&path)?;
        let file: LabelFile = serde_json::from_slice(&fs::read(&path)?)?;
        if file.config_hash != self.hash {
            return Err(stale(format!("{} carries config hash {}", path.display(), file.config_hash)));
        }
        Ok(file.labels)
    }

    pub fn load_trajectories(&self, c: &Combination, mode: Mode, g: usize) -> Result<TrajectorySet> {
        let path = self.layout.trajectories(c, mode, g);
        self.need(&path)?;
        let (set, hash) = TrajectorySet::read_csv(&path, population)?;
        if hash != self.hash {
            return Err(stale(format!("{} carries config hash {hash}", path.display())));
        }
        Ok(set)
    }

    fn load_features(&self, path: &Path) -> Result<FeatureTable> {
        self.need(path)?;
        let (table, hash) = FeatureTable::read_csv(path)?;
        if hash != self.hash {
            return Err(stale(format!("{} carries config hash {hash}", path.display())));
        }
        Ok(table)
    }

    fn study_seed(&self, study: Study) -> u64 {
        derive_seed(self.config.base_seed, &[STUDY_SEED_TAG, study as u64])
    }

    /// Input names and their data for the accuracy comparison.
    pub fn accuracy_inputs(&self, labels: &LabelTable) -> Result<Vec<(String, Method, LabeledData)>> {
        let cfg = &self.config;
        let mut inputs = Vec::new();
        for c in &cfg.combinations {
            for &m in &cfg.modes {
                for &g in &cfg.generations {
                    let tag = format!("{c}:{m}:g{g}");
                    for &family in &cfg.input_kinds {
                        match family {
                            InputFamily::Raw => {
                                let set = self.load_trajectories(c, m, g)?;
                                inputs.push((
                                    format!("raw:{tag}"),
                                    Method::RotationForest,
                                    LabeledData::from_trajectories(&set, labels)?,
                                ));
                            }
                            InputFamily::Ts | InputFamily::TsSelected => {
                                let table = self.load_features(&self.layout.ts_features(c, m, g))?;
                                let (name, method) = if family == InputFamily::Ts {
                                    ("ts", Method::RandomForest)
                                } else {
                                    ("ts_selected", Method::SelectedRandomForest)
                                };
                                inputs.push((
                                    format!("{name}:{tag}"),
                                    method,
                                    LabeledData::from_features(&table, labels)?,
                                ));
                            }
                        }
                    }
                }
            }
        }
        for &k in &cfg.ela_budgets {
            let table = self.load_features(&self.layout.ela(k))?;
            inputs.push((
                format!("ela:{}", k * cfg.dimension),
                Method::RandomForest,
                LabeledData::from_features(&table, labels)?,
            ));
        }
        Ok(inputs)
    }

    /// Runs one study and writes its report files.
    pub fn study(&self, study: Study) -> Result<ExperimentReport> {
        self.check_manifest("study")?;
        let labels = self.load_labels()?;
        let params = &self.config.classifiers;
        let seed = self.study_seed(study);
        let g = self.config.studies.study_generations;
        let mut report = ExperimentReport::new(&study.to_string(), &self.hash, &labels);
        match study {
            Study::Accuracy => {
                for (name, method, data) in self.accuracy_inputs(&labels)? {
                    report.evaluations.push(evaluate_selector(&name, &data, method, params, seed)?);
                }
            }
            Study::Shuffle => {
                let set = self.load_trajectories(&Combination::all(), Mode::Current, g)?;
                let r = shuffle_study(&set, &labels, self.config.studies.shuffles, params, seed)?;
                report.evaluations = r.evaluations;
                report.ks = r.ks;
            }
            Study::Order => {
                let set = self.load_trajectories(&Combination::all(), Mode::Current, g)?;
                let r = order_study(&set, &labels, params, seed)?;
                report.evaluations = r.evaluations;
                report.ks = r.ks;
            }
            Study::Sweep => {
                let mut sets = Vec::new();
                for &g in &self.config.studies.sweep_generations {
                    for m in [Mode::Best, Mode::Current] {
                        sets.push(self.load_trajectories(&Combination::all(), m, g)?);
                    }
                }
                report.evaluations =
                    generation_sweep(&sets, &labels, params, seed)?.into_iter().map(|p| p.evaluation).collect();
            }
            Study::Project => {
                let set = self.load_trajectories(&Combination::all(), Mode::Current, g)?;
                report.projection = Some(project(&set, &labels)?);
            }
        }
        report.write(&self.layout.reports())?;
        Ok(report)
    }

    /// Reports already written for the current config hash, in study order.
    pub fn existing_reports(&self) -> Result<Vec<ExperimentReport>> {
        self.check_manifest("report")?;
        let mut out = Vec::new();
        for study in Study::ALL {
            let probe = ExperimentReport::new(&study.to_string(), &self.hash, &LabelTable::default());
            let path = self.layout.reports().join(format!("{}.json", probe.stem()));
            if path.exists() {
                let r: ExperimentReport = serde_json::from_slice(&fs::read(&path)?)?;
                if r.config_hash != self.hash {
                    return Err(stale(format!("{} carries config hash {}", path.display(), r.config_hash)));
                }
                out.push(r);
            }
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct LabelFile {
    config_hash: String,
    labels: LabelTable,
}

fn write_labels(path: &Path, labels: &LabelTable, hash: &str) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&LabelFile { config_hash: hash.to_string(), labels: labels.clone() })?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn first_line_hash(path: &Path) -> Result<Option<String>> {
    use std::io::BufRead;
    let mut line = String::new();
    std::io::BufReader::new(fs::File::open(path)?).read_line(&mut line)?;
    Ok(line.trim_end().strip_prefix("# config_hash=").map(String::from))
}
