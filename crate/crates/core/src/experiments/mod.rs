//! Labeling, leave-one-instance-out evaluation and the invariance,
//! generation-sweep and projection studies.

pub mod ks;
pub mod labels;
pub mod report;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ks::{kolmogorov_q, ks_two_sample, KsResult};
pub use labels::{label, median, pick_winner, FunctionLabel, LabelTable};

use crate::classifiers::{
    accuracy, fit_random_forest, fit_rotation_forest, pca, predict, Dataset, ForestParams, RotationParams,
};
use crate::error::{invalid, Error, Result};
use crate::features::FeatureTable;
use crate::rng::derive_seed;
use crate::solvers::Algorithm;
use crate::trajectory::{reorder_parts, shuffle_within_generations, Mode, Origin, TrajectorySet};
use crate::ts_features::{boruta_select, BorutaParams};

/// Dataset rows together with the run each row came from.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledData {
    pub dataset: Dataset,
    pub origins: Vec<Origin>,
}

impl LabeledData {
    pub fn from_trajectories(set: &TrajectorySet, labels: &LabelTable) -> Result<Self> {
        let width = set.width().unwrap_or(0);
        let mut x = Vec::with_capacity(set.trajectories.len());
        let mut y = Vec::with_capacity(set.trajectories.len());
        let mut groups = Vec::with_capacity(set.trajectories.len());
        let mut origins = Vec::with_capacity(set.trajectories.len());
        for t in &set.trajectories {
            x.push(t.values.clone());
            y.push(labels.winner(t.origin.function_id)?.index());
            groups.push(t.origin.instance_id);
            origins.push(t.origin);
        }
        let names = (0..width).map(|i| format!("v{i}")).collect();
        Ok(Self { dataset: Dataset::new(x, y, groups, names)?, origins })
    }

    pub fn from_features(table: &FeatureTable, labels: &LabelTable) -> Result<Self> {
        let mut x = Vec::with_capacity(table.rows.len());
        let mut y = Vec::with_capacity(table.rows.len());
        let mut groups = Vec::with_capacity(table.rows.len());
        let mut origins = Vec::with_capacity(table.rows.len());
        for r in &table.rows {
            x.push(r.values.clone());
            y.push(labels.winner(r.origin.function_id)?.index());
            groups.push(r.origin.instance_id);
            origins.push(r.origin);
        }
        Ok(Self { dataset: Dataset::new(x, y, groups, table.names.clone())?, origins })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub instance_id: u32,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// One fold per instance id, in increasing id order.
pub fn loio_folds(d: &Dataset) -> Result<Vec<Fold>> {
    let ids: BTreeSet<u32> = d.groups.iter().copied().collect();
    if ids.len() < 2 {
        return Err(invalid(format!("LOIO needs at least two instance ids, found {}", ids.len())));
    }
    Ok(ids
        .into_iter()
        .map(|id| {
            let (validation, train) = (0..d.n_rows()).partition(|&i| d.groups[i] == id);
            Fold { instance_id: id, train, validation }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RotationForest,
    RandomForest,
    /// Boruta on the training fold, then a random forest on the kept
    /// features.
    SelectedRandomForest,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierParams {
    #[serde(default)]
    pub random_forest: ForestParams,
    #[serde(default)]
    pub rotation_forest: RotationParams,
    #[serde(default)]
    pub boruta: BorutaParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub function_id: u32,
    pub instance_id: u32,
    pub run_index: u32,
    pub truth: Algorithm,
    pub predicted: Algorithm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub instance_id: u32,
    pub accuracy: f64,
    pub n_train: usize,
    pub n_validation: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_features: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        Summary {
            median: median(values),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// LOIO outcome of one selector on one input kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub input: String,
    pub method: Method,
    pub folds: Vec<FoldResult>,
    pub summary: Summary,
    pub predictions: Vec<Prediction>,
}

impl Evaluation {
    pub fn accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.accuracy).collect()
    }
}

pub fn evaluate_selector(
    input: &str,
    data: &LabeledData,
    method: Method,
    params: &ClassifierParams,
    seed: u64,
) -> Result<Evaluation> {
    let d = &data.dataset;
    let folds = loio_folds(d)?;
    let outcomes = folds
        .par_iter()
        .map(|fold| -> Result<(FoldResult, Vec<usize>)> {
            let fold_seed = derive_seed(seed, &[fold.instance_id as u64]);
            let mut train = d.subset(&fold.train);
            let mut valid = d.subset(&fold.validation);
            let mut selected = None;
            let model = match method {
                Method::RotationForest => fit_rotation_forest(&train, &params.rotation_forest, fold_seed)?,
                Method::RandomForest => fit_random_forest(&train, &params.random_forest, fold_seed)?,
                Method::SelectedRandomForest => {
                    let keep = if train.classes().len() >= 2 {
                        boruta_select(&train, &params.boruta, derive_seed(fold_seed, &[1]))?.kept_indices()
                    } else {
                        (0..train.n_features()).collect()
                    };
                    train = train.select_columns(&keep);
                    valid = valid.select_columns(&keep);
                    selected = Some(train.feature_names.clone());
                    fit_random_forest(&train, &params.random_forest, fold_seed)?
                }
            };
            let predicted = predict(&model, &valid.x)?;
            let result = FoldResult {
                instance_id: fold.instance_id,
                accuracy: accuracy(&predicted, &valid.y),
                n_train: fold.train.len(),
                n_validation: fold.validation.len(),
                selected_features: selected,
            };
            Ok((result, predicted))
        })
        .collect::<Vec<_>>();

    let mut fold_results = Vec::with_capacity(folds.len());
    let mut predictions = Vec::with_capacity(d.n_rows());
    for (fold, outcome) in folds.iter().zip(outcomes) {
        let (result, predicted) = outcome?;
        for (&row, &p) in fold.validation.iter().zip(&predicted) {
            let o = data.origins[row];
            predictions.push(Prediction {
                function_id: o.function_id,
                instance_id: o.instance_id,
                run_index: o.run_index,
                truth: Algorithm::from_index(d.y[row])?,
                predicted: Algorithm::from_index(p)?,
            });
        }
        fold_results.push(result);
    }
    predictions.sort_by_key(|p| (p.function_id, p.instance_id, p.run_index));
    let accs: Vec<f64> = fold_results.iter().map(|f| f.accuracy).collect();
    Ok(Evaluation {
        input: input.to_string(),
        method,
        summary: Summary::of(&accs),
        folds: fold_results,
        predictions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsComparison {
    pub baseline: String,
    pub candidate: String,
    pub statistic: f64,
    pub p_value: f64,
}

fn compare(baseline: &Evaluation, candidate: &Evaluation) -> Result<KsComparison> {
    let r = ks_two_sample(&baseline.accuracies(), &candidate.accuracies())?;
    Ok(KsComparison {
        baseline: baseline.input.clone(),
        candidate: candidate.input.clone(),
        statistic: r.statistic,
        p_value: r.p_value,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub evaluations: Vec<Evaluation>,
    pub ks: Vec<KsComparison>,
}

fn require(set: &TrajectorySet, mode: Mode, what: &str) -> Result<()> {
    if set.mode != mode {
        return Err(Error::InvalidMode(format!("{what} needs {mode} trajectories, got {}", set.mode)));
    }
    if set.trajectories.is_empty() {
        return Err(Error::IncompleteData(format!("{what}: empty trajectory set")));
    }
    Ok(())
}

/// Re-evaluates the raw selector on `shuffles` datasets whose current
/// trajectories were permuted within every generation, and compares each
/// fold-accuracy distribution with the original one.
pub fn shuffle_study(
    set: &TrajectorySet,
    labels: &LabelTable,
    shuffles: usize,
    params: &ClassifierParams,
    seed: u64,
) -> Result<StudyResult> {
    require(set, Mode::Current, "shuffle study")?;
    let name = |s: Option<usize>| {
        let base = format!("raw:{}:{}:g{}", set.combination, set.mode, set.generations);
        match s {
            None => base,
            Some(k) => format!("{base}:shuffle{k}"),
        }
    };
    let eval_seed = derive_seed(seed, &[0]);
    let original = evaluate_selector(
        &name(None),
        &LabeledData::from_trajectories(set, labels)?,
        Method::RotationForest,
        params,
        eval_seed,
    )?;
    let mut evaluations = vec![original];
    let mut ks = Vec::new();
    for k in 1..=shuffles {
        let shuffled = TrajectorySet {
            trajectories: set
                .trajectories
                .iter()
                .map(|t| shuffle_within_generations(t, derive_seed(seed, &[1, k as u64])))
                .collect::<Result<_>>()?,
            ..set.clone()
        };
        let e = evaluate_selector(
            &name(Some(k)),
            &LabeledData::from_trajectories(&shuffled, labels)?,
            Method::RotationForest,
            params,
            eval_seed,
        )?;
        ks.push(compare(&evaluations[0], &e)?);
        evaluations.push(e);
    }
    Ok(StudyResult { evaluations, ks })
}

/// All orderings of the parts of `set`, lexicographic in part indices;
/// the identity comes first.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for i in 0..n {
            if !prefix.contains(&i) {
                prefix.push(i);
                go(prefix, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), n, &mut out);
    out
}

/// Evaluates every ordering of the concatenated parts and compares each
/// with the original order.
pub fn order_study(
    set: &TrajectorySet,
    labels: &LabelTable,
    params: &ClassifierParams,
    seed: u64,
) -> Result<StudyResult> {
    require(set, Mode::Current, "order study")?;
    let eval_seed = derive_seed(seed, &[0]);
    let mut evaluations = Vec::new();
    for order in permutations(set.combination.0.len()) {
        let reordered = TrajectorySet {
            combination: crate::trajectory::Combination(order.iter().map(|&i| set.combination.0[i]).collect()),
            trajectories: set.trajectories.iter().map(|t| reorder_parts(t, &order)).collect::<Result<_>>()?,
            ..set.clone()
        };
        let letters: Vec<String> = reordered.combination.0.iter().map(|a| a.letter().to_string()).collect();
        let name = format!("raw:{}:{}:g{}", letters.join("-"), set.mode, set.generations);
        evaluations.push(evaluate_selector(
            &name,
            &LabeledData::from_trajectories(&reordered, labels)?,
            Method::RotationForest,
            params,
            eval_seed,
        )?);
    }
    let ks = evaluations[1..].iter().map(|e| compare(&evaluations[0], e)).collect::<Result<_>>()?;
    Ok(StudyResult { evaluations, ks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub generations: usize,
    pub mode: Mode,
    pub evaluation: Evaluation,
}

/// Raw-selector accuracy for every supplied (generations, mode) set.
pub fn generation_sweep(
    sets: &[TrajectorySet],
    labels: &LabelTable,
    params: &ClassifierParams,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::with_capacity(sets.len());
    for set in sets {
        let name = format!("raw:{}:{}:g{}", set.combination, set.mode, set.generations);
        let evaluation = evaluate_selector(
            &name,
            &LabeledData::from_trajectories(set, labels)?,
            Method::RotationForest,
            params,
            derive_seed(seed, &[set.generations as u64]),
        )?;
        out.push(SweepPoint { generations: set.generations, mode: set.mode, evaluation });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPoint {
    pub x: f64,
    pub y: f64,
    pub function_id: u32,
    pub instance_id: u32,
    pub run: u32,
    pub winner: Algorithm,
}

/// Two-dimensional PCA of the column-standardized trajectories.
pub fn project(set: &TrajectorySet, labels: &LabelTable) -> Result<Vec<ProjectionPoint>> {
    if set.trajectories.len() < 2 {
        return Err(Error::InsufficientData("projection needs at least two trajectories".into()));
    }
    let rows: Vec<&Vec<f64>> = set.trajectories.iter().map(|t| &t.values).collect();
    let n = rows.len() as f64;
    let p = rows[0].len();
    let stats: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var.sqrt())
        })
        .collect();
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&stats)
                .map(|(v, (m, s))| if *s > 0.0 && s.is_finite() { (v - m) / s } else { 0.0 })
                .collect()
        })
        .collect();
    let k = 2.min(p).min(z.len());
    let fit = pca(&z, k)?;
    set.trajectories
        .iter()
        .zip(&fit.projected)
        .map(|(t, c)| {
            Ok(ProjectionPoint {
                x: c[0],
                y: c.get(1).copied().unwrap_or(0.0),
                function_id: t.origin.function_id,
                instance_id: t.origin.instance_id,
                run: t.origin.run_index,
                winner: labels.winner(t.origin.function_id)?,
            })
        })
        .collect()
}
