//! Tree ensembles for algorithm selection: Random Forests on feature
//! vectors and Rotation Forests on raw trajectories.

mod dataset;
mod pca;
mod tree;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dataset::{column_medians, impute_row, is_sentinel, Dataset, SENTINEL};
pub use pca::{pca, Pca};
pub use tree::{best_split, fit_tree, gini, majority, to_columns, Node, Split, Tree, TreeParams};

use crate::error::{invalid, Error, Result};
use crate::rng::derived_rng;

pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelKind {
    RandomForest,
    RotationForest,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features examined per split; `floor(sqrt(p))` (at least 1) when `None`.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_features: None, min_samples_leaf: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotationParams {
    pub n_trees: usize,
    pub groups: usize,
    /// Share of the class-subsampled rows drawn (with replacement) for each
    /// group's PCA.
    pub sample_fraction: f64,
}

impl Default for RotationParams {
    fn default() -> Self {
        Self { n_trees: 10, groups: 3, sample_fraction: 0.75 }
    }
}

/// One PCA rotation applied to a subset of (scaled) input columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub columns: Vec<usize>,
    /// Principal axes as rows; each yields one rotated feature.
    pub rotation: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub tree: Tree,
    pub blocks: Vec<Block>,
}

/// Min/range normalization of the non-constant training columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub columns: Vec<usize>,
    pub min: Vec<f64>,
    pub range: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub v: u32,
    pub kind: ModelKind,
    pub n_features: usize,
    pub n_classes: usize,
    pub classes: Vec<usize>,
    pub seed: u64,
    pub medians: Vec<f64>,
    /// Set when training saw one class only; the model then always
    /// predicts it.
    pub degenerate: Option<usize>,
    pub scaling: Option<Scaling>,
    pub members: Vec<Member>,
}

fn prepare(d: &Dataset, min_rows: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    d.validate()?;
    if d.n_rows() < min_rows {
        return Err(Error::InsufficientData(format!("{} rows, need at least {min_rows}", d.n_rows())));
    }
    let medians = column_medians(&d.x, d.n_features());
    let x = d.x.iter().map(|r| impute_row(r, &medians)).collect();
    Ok((medians, x))
}

fn shell(kind: ModelKind, d: &Dataset, seed: u64, medians: Vec<f64>) -> TrainedModel {
    let classes = d.classes();
    TrainedModel {
        v: MODEL_VERSION,
        kind,
        n_features: d.n_features(),
        n_classes: classes.last().map_or(0, |c| c + 1),
        degenerate: if classes.len() == 1 { Some(classes[0]) } else { None },
        classes,
        seed,
        medians,
        scaling: None,
        members: Vec::new(),
    }
}

pub fn fit_random_forest(d: &Dataset, params: &ForestParams, seed: u64) -> Result<TrainedModel> {
    if params.n_trees == 0 {
        return Err(invalid("forest needs at least one tree"));
    }
    let (medians, x) = prepare(d, 5)?;
    let mut model = shell(ModelKind::RandomForest, d, seed, medians);
    if model.degenerate.is_some() {
        return Ok(model);
    }
    let p = d.n_features();
    let cols = to_columns(&x);
    let n = d.n_rows();
    let tree_params = TreeParams {
        max_features: Some(params.max_features.unwrap_or(((p as f64).sqrt().floor() as usize).max(1)).min(p)),
        max_depth: None,
        min_samples_leaf: params.min_samples_leaf,
    };
    let n_classes = model.n_classes;
    model.members = (0..params.n_trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = derived_rng(seed, &[k as u64]);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let tree = fit_tree(&cols, &d.y, n_classes, rows, tree_params, Some(&mut rng));
            Member { tree, blocks: Vec::new() }
        })
        .collect();
    Ok(model)
}

fn scale_fit(x: &[Vec<f64>], p: usize) -> Scaling {
    let mut s = Scaling { columns: Vec::new(), min: Vec::new(), range: Vec::new() };
    for j in 0..p {
        let lo = x.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let hi = x.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            s.columns.push(j);
            s.min.push(lo);
            s.range.push(hi - lo);
        }
    }
    s
}

impl Scaling {
    fn apply(&self, row: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .zip(self.min.iter().zip(&self.range))
            .map(|(&j, (lo, r))| (row[j] - lo) / r)
            .collect()
    }
}

fn rotate(blocks: &[Block], row: &[f64]) -> Vec<f64> {
    blocks
        .iter()
        .flat_map(|b| {
            b.rotation
                .iter()
                .map(|axis| axis.iter().zip(&b.columns).map(|(a, &c)| a * row[c]).sum::<f64>())
        })
        .collect()
}

pub fn fit_rotation_forest(d: &Dataset, params: &RotationParams, seed: u64) -> Result<TrainedModel> {
    if params.n_trees == 0 || params.groups == 0 {
        return Err(invalid("rotation forest needs at least one tree and one group"));
    }
    if !(params.sample_fraction > 0.0 && params.sample_fraction <= 1.0) {
        return Err(invalid(format!("sample fraction {} outside (0, 1]", params.sample_fraction)));
    }
    if d.n_features() < params.groups {
        return Err(invalid(format!(
            "{} features cannot form {} groups",
            d.n_features(),
            params.groups
        )));
    }
    let (medians, x) = prepare(d, 10)?;
    let mut model = shell(ModelKind::RotationForest, d, seed, medians);
    if model.degenerate.is_some() {
        return Ok(model);
    }
    let scaling = scale_fit(&x, d.n_features());
    let scaled: Vec<Vec<f64>> = x.iter().map(|r| scaling.apply(r)).collect();
    let q = scaling.columns.len();
    let n = d.n_rows();
    let n_classes = model.n_classes;
    let classes = model.classes.clone();
    model.members = (0..params.n_trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = derived_rng(seed, &[k as u64]);
            let mut cols: Vec<usize> = (0..q).collect();
            cols.shuffle(&mut rng);
            let groups = params.groups.min(q.max(1));
            let mut blocks = Vec::with_capacity(groups);
            let mut start = 0;
            for g in 0..groups {
                let size = q / groups + usize::from(g < q % groups);
                let mut columns = cols[start..start + size].to_vec();
                start += size;
                if columns.is_empty() {
                    continue;
                }
                columns.sort_unstable();
                let mut chosen: Vec<usize> = classes.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
                if chosen.is_empty() {
                    chosen.push(classes[rng.random_range(0..classes.len())]);
                }
                let pool: Vec<usize> = (0..n).filter(|&i| chosen.contains(&d.y[i])).collect();
                let m = ((params.sample_fraction * pool.len() as f64).ceil() as usize).max(1);
                let sample: Vec<Vec<f64>> = (0..m)
                    .map(|_| {
                        let r = pool[rng.random_range(0..pool.len())];
                        columns.iter().map(|&c| scaled[r][c]).collect()
                    })
                    .collect();
                let (_, rotation, _) = pca::eigenbasis(&sample, columns.len());
                blocks.push(Block { columns, rotation });
            }
            let rotated: Vec<Vec<f64>> = scaled.iter().map(|r| rotate(&blocks, r)).collect();
            let tree = fit_tree(
                &to_columns(&rotated),
                &d.y,
                n_classes,
                (0..n).collect(),
                TreeParams::default(),
                None,
            );
            Member { tree, blocks }
        })
        .collect();
    model.scaling = Some(scaling);
    Ok(model)
}

impl TrainedModel {
    fn vote(&self, row: &[f64]) -> usize {
        if let Some(c) = self.degenerate {
            return c;
        }
        let row = impute_row(row, &self.medians);
        let mut votes = vec![0usize; self.n_classes];
        match &self.scaling {
            Some(s) => {
                let scaled = s.apply(&row);
                for m in &self.members {
                    votes[m.tree.predict(&rotate(&m.blocks, &scaled))] += 1;
                }
            }
            None => {
                for m in &self.members {
                    votes[m.tree.predict(&row)] += 1;
                }
            }
        }
        majority(&votes)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(text)?;
        if m.v != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {}", m.v)));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// All PCA blocks of a rotation forest, in member order.
    pub fn rotation_blocks(&self) -> impl Iterator<Item = &Block> {
        self.members.iter().flat_map(|m| m.blocks.iter())
    }
}

pub fn predict(m: &TrainedModel, x: &[Vec<f64>]) -> Result<Vec<usize>> {
    if let Some(r) = x.iter().find(|r| r.len() != m.n_features) {
        return Err(invalid(format!("row of width {} for a model of {} features", r.len(), m.n_features)));
    }
    Ok(x.iter().map(|r| m.vote(r)).collect())
}

/// Mean impurity decrease per feature, each tree normalized first, summing
/// to one. All zeros when no tree ever split.
pub fn importances(m: &TrainedModel) -> Result<Vec<f64>> {
    if m.kind != ModelKind::RandomForest {
        return Err(Error::Unsupported("importances are defined for random forests only".into()));
    }
    let mut acc = vec![0.0; m.n_features];
    for member in &m.members {
        let total: f64 = member.tree.importance.iter().sum();
        if total > 0.0 {
            for (a, v) in acc.iter_mut().zip(&member.tree.importance) {
                *a += v / total;
            }
        }
    }
    let total: f64 = acc.iter().sum();
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    Ok(acc)
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}
