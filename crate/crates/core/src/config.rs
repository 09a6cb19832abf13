//! Experiment configuration: a TOML document, validated before any stage
//! runs and identified by a hash of its canonical form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bbob::NUM_FUNCTIONS;
use crate::ela_features::MAX_SOBOL_DIMENSION;
use crate::error::{Error, Result};
use crate::experiments::ClassifierParams;
use crate::solvers::{Algorithm, DEFAULT_CHECKPOINT_CAP};
use crate::trajectory::{Combination, Mode};

/// Families of selector inputs built from trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFamily {
    /// Raw trajectories, rotation forest.
    Raw,
    /// Time-series features, random forest.
    Ts,
    /// Time-series features after Boruta selection, random forest.
    TsSelected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub shuffles: usize,
    /// Generations of the ALL-current data used by the shuffle, order and
    /// projection studies.
    pub study_generations: usize,
    pub sweep_generations: Vec<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { shuffles: 5, study_generations: 7, sweep_generations: (2..=7).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub functions: Vec<u32>,
    pub instances_per_function: u32,
    pub runs_per_instance: u32,
    pub labeling_budget: usize,
    pub checkpoint_cap: usize,
    pub generations: Vec<usize>,
    pub modes: Vec<Mode>,
    pub combinations: Vec<Combination>,
    pub input_kinds: Vec<InputFamily>,
    /// Min–max scale each probed trajectory to [0, 1] before it is stored.
    pub normalize_trajectories: bool,
    /// ELA sample sizes as multiples of the dimension.
    pub ela_budgets: Vec<usize>,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub studies: StudyConfig,
    pub classifiers: ClassifierParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dimension: 10,
            functions: (1..=NUM_FUNCTIONS).collect(),
            instances_per_function: 5,
            runs_per_instance: 5,
            labeling_budget: 10_000,
            checkpoint_cap: DEFAULT_CHECKPOINT_CAP,
            generations: vec![2, 7],
            modes: vec![Mode::Current, Mode::Best],
            combinations: ["C", "D", "P", "C-P", "C-D", "D-P", "ALL"]
                .iter()
                .map(|s| s.parse().expect("built-in combination"))
                .collect(),
            input_kinds: vec![InputFamily::Raw, InputFamily::Ts, InputFamily::TsSelected],
            normalize_trajectories: false,
            ela_budgets: vec![30, 50],
            base_seed: 1,
            output_dir: PathBuf::from("trajsel-out"),
            studies: StudyConfig::default(),
            classifiers: ClassifierParams::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// Largest generation count any stage probes.
    pub fn max_generations(&self) -> usize {
        self.generations
            .iter()
            .chain(&self.studies.sweep_generations)
            .copied()
            .chain([self.studies.study_generations])
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        if d < 2 {
            return Err(config_err("dimension must be at least 2"));
        }
        if self.functions.is_empty() {
            return Err(config_err("functions must not be empty"));
        }
        let mut f = self.functions.clone();
        f.sort_unstable();
        f.dedup();
        if f.len() != self.functions.len() || f.iter().any(|&id| id == 0 || id > NUM_FUNCTIONS) {
            return Err(config_err(format!("functions must be distinct ids in 1..={NUM_FUNCTIONS}")));
        }
        if self.instances_per_function < 2 {
            return Err(config_err("leave-one-instance-out needs instances_per_function >= 2"));
        }
        if self.runs_per_instance < 1 {
            return Err(config_err("runs_per_instance must be at least 1"));
        }
        if self.generations.is_empty() || self.generations.contains(&0) {
            return Err(config_err("generations must be a non-empty list of positive counts"));
        }
        if self.studies.sweep_generations.contains(&0) || self.studies.study_generations == 0 {
            return Err(config_err("study generations must be positive"));
        }
        if self.modes.is_empty() {
            return Err(config_err("modes must not be empty"));
        }
        if self.combinations.is_empty() {
            return Err(config_err("combinations must not be empty"));
        }
        if self.input_kinds.is_empty() {
            return Err(config_err("input_kinds must not be empty"));
        }
        let longest = Algorithm::ALL.iter().map(|a| a.default_population()).max().unwrap_or(0);
        let needed = longest * self.max_generations();
        if self.labeling_budget < needed {
            return Err(config_err(format!(
                "labeling_budget {} is shorter than the longest probe ({needed} evaluations)",
                self.labeling_budget
            )));
        }
        if !self.ela_budgets.is_empty() && d > MAX_SOBOL_DIMENSION {
            return Err(config_err(format!("ELA sampling supports dimensions up to {MAX_SOBOL_DIMENSION}")));
        }
        if let Some(k) = self.ela_budgets.iter().find(|&&k| k * d < 4 * (d + 1)) {
            return Err(config_err(format!("ELA budget {k}d is below the 4(d+1) feature minimum")));
        }
        if self.studies.shuffles == 0 {
            return Err(config_err("studies.shuffles must be at least 1"));
        }
        let c = &self.classifiers;
        if c.random_forest.n_trees == 0 || c.rotation_forest.n_trees == 0 || c.boruta.n_trees == 0 {
            return Err(config_err("classifier ensembles need at least one tree"));
        }
        if c.rotation_forest.groups == 0 || !(c.rotation_forest.sample_fraction > 0.0 && c.rotation_forest.sample_fraction <= 1.0) {
            return Err(config_err("rotation forest needs groups >= 1 and sample_fraction in (0, 1]"));
        }
        if c.boruta.max_iter == 0 || !(c.boruta.alpha > 0.0 && c.boruta.alpha < 1.0) {
            return Err(config_err("boruta needs max_iter >= 1 and alpha in (0, 1)"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output location.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order_and_output_dir() {
        let a = ExperimentConfig::from_toml("dimension = 5\nbase_seed = 3\noutput_dir = \"x\"\n").unwrap();
        let b = ExperimentConfig::from_toml("base_seed = 3\noutput_dir = \"y\"\ndimension = 5\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::from_toml("base_seed = 4\ndimension = 5\n").unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn defaults_round_trip_and_validate() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.max_generations(), 7);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        for bad in [
            "combinations = []",
            "input_kinds = []",
            "dimension = 1",
            "functions = [25]",
            "instances_per_function = 1",
            "labeling_budget = 100",
            "unknown_key = 3",
            "modes = [\"sideways\"]",
        ] {
            let e = ExperimentConfig::from_toml(bad).unwrap_err();
            assert!(e.is_usage(), "{bad}: {e}");
        }
    }
}
