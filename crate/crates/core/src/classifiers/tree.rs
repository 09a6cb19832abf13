//! CART classification trees with Gini impurity.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Sample-weighted impurity decrease accumulated per feature.
    pub importance: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeParams {
    /// Number of non-constant features examined per split; all when `None`.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_features: None, max_depth: None, min_samples_leaf: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted mean Gini impurity of the two children.
    pub impurity: f64,
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// Most frequent class; the lowest index wins ties.
pub fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

struct Builder<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    rng: Option<&'a mut Rng>,
    nodes: Vec<Node>,
    importance: Vec<f64>,
    order: Vec<usize>,
    pairs: Vec<(f64, usize)>,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    /// Best threshold on one feature, `None` when the feature is constant on
    /// `rows`.
    fn scan(&mut self, feature: usize, rows: &[usize], total: &[usize]) -> Option<(f64, f64)> {
        let col = &self.cols[feature];
        self.pairs.clear();
        self.pairs.extend(rows.iter().map(|&r| (col[r], self.y[r])));
        self.pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = self.pairs.len();
        if self.pairs[0].0 == self.pairs[n - 1].0 {
            return None;
        }
        let min_leaf = self.params.min_samples_leaf;
        let mut left = vec![0usize; self.n_classes];
        let mut best: Option<(f64, f64)> = None;
        for i in 0..n - 1 {
            left[self.pairs[i].1] += 1;
            let (a, b) = (self.pairs[i].0, self.pairs[i + 1].0);
            if a == b {
                continue;
            }
            let nl = i + 1;
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let sl: f64 = left.iter().map(|&c| (c * c) as f64).sum::<f64>() / nl as f64;
            let sr: f64 = left
                .iter()
                .zip(total)
                .map(|(&l, &t)| ((t - l) * (t - l)) as f64)
                .sum::<f64>()
                / nr as f64;
            let impurity = (n as f64 - sl - sr) / n as f64;
            if best.is_none_or(|(imp, _)| impurity < imp) {
                let mid = 0.5 * (a + b);
                let threshold = if mid < b { mid } else { a };
                best = Some((impurity, threshold));
            }
        }
        best
    }

    fn best_split(&mut self, rows: &[usize], total: &[usize]) -> Option<Split> {
        let p = self.cols.len();
        self.order.clear();
        self.order.extend(0..p);
        if let (Some(rng), Some(_)) = (self.rng.as_deref_mut(), self.params.max_features) {
            self.order.shuffle(rng);
        }
        let limit = self.params.max_features.unwrap_or(p);
        let mut visited = 0;
        let mut best: Option<Split> = None;
        for k in 0..p {
            if visited >= limit {
                break;
            }
            let feature = self.order[k];
            let Some((impurity, threshold)) = self.scan(feature, rows, total) else {
                continue;
            };
            visited += 1;
            if best.is_none_or(|b| impurity < b.impurity) {
                best = Some(Split { feature, threshold, impurity });
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = self.counts(&rows);
        self.nodes.push(Node::Leaf { class: majority(&counts) });
        let parent = gini(&counts);
        if parent == 0.0
            || rows.len() < 2 * self.params.min_samples_leaf.max(1)
            || self.params.max_depth.is_some_and(|m| depth >= m)
        {
            return id;
        }
        let Some(split) = self.best_split(&rows, &counts) else {
            return id;
        };
        let col = &self.cols[split.feature];
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] <= split.threshold);
        let n = rows.len() as f64;
        self.importance[split.feature] += n * (parent - split.impurity);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }
}

/// Grows a tree on `rows` (repeats allowed) of column-major data. The rng
/// drives the per-node feature order when `max_features` is set.
pub fn fit_tree(
    cols: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    rows: Vec<usize>,
    params: TreeParams,
    rng: Option<&mut Rng>,
) -> Tree {
    let mut b = Builder {
        cols,
        y,
        n_classes,
        params,
        rng,
        nodes: Vec::new(),
        importance: vec![0.0; cols.len()],
        order: Vec::with_capacity(cols.len()),
        pairs: Vec::with_capacity(rows.len()),
    };
    b.grow(rows, 0);
    Tree { nodes: b.nodes, importance: b.importance }
}

/// The split a tree would choose at its root, examining every feature.
pub fn best_split(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Option<Split> {
    let cols = to_columns(x);
    let mut b = Builder {
        cols: &cols,
        y,
        n_classes,
        params: TreeParams::default(),
        rng: None,
        nodes: Vec::new(),
        importance: Vec::new(),
        order: Vec::new(),
        pairs: Vec::new(),
    };
    let rows: Vec<usize> = (0..x.len()).collect();
    let counts = b.counts(&rows);
    if rows.len() < 2 {
        return None;
    }
    b.best_split(&rows, &counts)
}

pub fn to_columns(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = x.first().map_or(0, Vec::len);
    (0..p).map(|j| x.iter().map(|r| r[j]).collect()).collect()
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_is_learned_to_purity() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = vec![0, 1, 1, 0];
        let t = fit_tree(&to_columns(&x), &y, 2, (0..4).collect(), TreeParams::default(), None);
        for (r, &c) in x.iter().zip(&y) {
            assert_eq!(t.predict(r), c);
        }
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn constant_features_give_a_single_leaf() {
        let x = vec![vec![1.0]; 5];
        let y = vec![2, 1, 2, 1, 1];
        assert!(best_split(&x, &y, 3).is_none());
        let t = fit_tree(&to_columns(&x), &y, 3, (0..5).collect(), TreeParams::default(), None);
        assert_eq!(t.nodes, vec![Node::Leaf { class: 1 }]);
        assert!(t.importance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn threshold_sits_between_neighbours() {
        let x = vec![vec![1.0], vec![2.0], vec![4.0], vec![8.0]];
        let s = best_split(&x, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(s.threshold, 3.0);
        assert_eq!(s.impurity, 0.0);
        assert_eq!(majority(&[2, 2, 1]), 0);
        assert!((gini(&[1, 1]) - 0.5).abs() < 1e-15);
    }
}
