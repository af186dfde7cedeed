//! Real-versus-synthetic feature importance from a bagged tree ensemble.
//!
//! Each tree is a depth-limited CART classifier (Gini impurity, all features
//! considered at every split) grown on a bootstrap sample. A feature's
//! importance is the mean drop in out-of-bag accuracy when its column is
//! shuffled among the out-of-bag rows, averaged over trees and shuffles,
//! floored at zero and normalized to percentages.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature_name: String,
    pub importance_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceResult {
    /// Sorted by importance, descending; ties keep feature order.
    pub entries: Vec<ImportanceEntry>,
    /// Every permutation importance was zero, so attribution is uniform.
    pub degenerate: bool,
    /// Features removed because no session defines them; they score 0.
    pub dropped_features: Vec<String>,
    /// Sessions per class left after dropping rows with undefined values.
    pub n_real: usize,
    pub n_synth: usize,
    /// Mean per-tree out-of-bag accuracy before any shuffling.
    pub oob_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub n_shuffles: usize,
    pub min_per_class: usize,
}

impl Default for ImportanceParams {
    fn default() -> Self {
        ImportanceParams { n_trees: 100, max_depth: 3, n_shuffles: 10, min_per_class: 10 }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { synth: bool },
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

impl Node {
    fn predict(&self, row: impl Fn(usize) -> f64 + Copy) -> bool {
        match self {
            Node::Leaf { synth } => *synth,
            Node::Split { feature, threshold, left, right } => {
                if row(*feature) <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Column-major feature matrix with boolean labels (true = synthetic).
struct Data<'a> {
    columns: &'a [Vec<f64>],
    labels: &'a [bool],
}

fn grow(data: &Data<'_>, rows: &[usize], depth: usize) -> Node {
    let n = rows.len();
    let pos = rows.iter().filter(|&&r| data.labels[r]).count();
    // Ties go to the real class.
    let leaf = Node::Leaf { synth: 2 * pos > n };
    if depth == 0 || pos == 0 || pos == n {
        return leaf;
    }
    let parent = gini(pos, n);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted = rows.to_vec();
    for (f, col) in data.columns.iter().enumerate() {
        sorted.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let mut left_pos = 0;
        for i in 0..n - 1 {
            if data.labels[sorted[i]] {
                left_pos += 1;
            }
            let (lo, hi) = (col[sorted[i]], col[sorted[i + 1]]);
            if lo == hi {
                continue;
            }
            let nl = i + 1;
            let impurity = (nl as f64 * gini(left_pos, nl)
                + (n - nl) as f64 * gini(pos - left_pos, n - nl))
                / n as f64;
            if best.is_none_or(|(b, _, _)| impurity < b) {
                best = Some((impurity, f, lo + (hi - lo) / 2.0));
            }
        }
    }
    match best {
        Some((impurity, feature, threshold)) if impurity < parent => {
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| data.columns[feature][r] <= threshold);
            Node::Split {
                feature,
                threshold,
                left: Box::new(grow(data, &l, depth - 1)),
                right: Box::new(grow(data, &r, depth - 1)),
            }
        }
        _ => leaf,
    }
}

/// Per-tree out-of-bag accuracy and per-feature summed accuracy drops.
fn tree_importance(data: &Data<'_>, params: &ImportanceParams, seed: u64) -> Option<(f64, Vec<f64>)> {
    let n = data.labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_bag = vec![false; n];
    let sample: Vec<usize> = (0..n)
        .map(|_| {
            let i = rng.random_range(0..n);
            in_bag[i] = true;
            i
        })
        .collect();
    let oob: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
    if oob.is_empty() {
        return None;
    }
    let tree = grow(data, &sample, params.max_depth);
    let accuracy = |col_override: Option<(usize, &[f64])>| {
        let correct = oob
            .iter()
            .enumerate()
            .filter(|&(k, &r)| {
                let row = |f: usize| match col_override {
                    Some((g, vals)) if g == f => vals[k],
                    _ => data.columns[f][r],
                };
                tree.predict(row) == data.labels[r]
            })
            .count();
        correct as f64 / oob.len() as f64
    };
    let base = accuracy(None);
    let mut drops = vec![0.0; data.columns.len()];
    for (f, drop) in drops.iter_mut().enumerate() {
        let mut vals: Vec<f64> = oob.iter().map(|&r| data.columns[f][r]).collect();
        for _ in 0..params.n_shuffles {
            vals.shuffle(&mut rng);
            *drop += base - accuracy(Some((f, &vals)));
        }
        *drop /= params.n_shuffles as f64;
    }
    Some((base, drops))
}

pub fn feature_importance(
    names: &[&str],
    real: &[Vec<f64>],
    synth: &[Vec<f64>],
    seed: u64,
) -> Result<ImportanceResult> {
    feature_importance_with(names, real, synth, seed, &ImportanceParams::default())
}

/// Rows are per-session feature vectors in `names` order; NaN marks an
/// undefined value. Features undefined for every session are dropped, then
/// sessions with any remaining undefined value are dropped.
pub fn feature_importance_with(
    names: &[&str],
    real: &[Vec<f64>],
    synth: &[Vec<f64>],
    seed: u64,
    params: &ImportanceParams,
) -> Result<ImportanceResult> {
    if params.n_trees == 0 || params.n_shuffles == 0 {
        return Err(Error::InvalidParameter("importance needs at least one tree and one shuffle".into()));
    }
    if real.iter().chain(synth).any(|r| r.len() != names.len()) {
        return Err(Error::InvalidParameter("feature row length does not match feature names".into()));
    }
    let all = || real.iter().chain(synth);
    let kept: Vec<usize> = (0..names.len())
        .filter(|&f| all().any(|r| r[f].is_finite()))
        .collect();
    let complete = |r: &&Vec<f64>| kept.iter().all(|&f| r[f].is_finite());
    let real_rows: Vec<&Vec<f64>> = real.iter().filter(complete).collect();
    let synth_rows: Vec<&Vec<f64>> = synth.iter().filter(complete).collect();
    if real_rows.len() < params.min_per_class || synth_rows.len() < params.min_per_class {
        return Err(Error::CorpusTooSmall(format!(
            "feature importance needs at least {} complete sessions per class (got {} real, {} synthetic)",
            params.min_per_class,
            real_rows.len(),
            synth_rows.len()
        )));
    }

    let rows: Vec<&Vec<f64>> = real_rows.iter().chain(&synth_rows).copied().collect();
    let columns: Vec<Vec<f64>> = kept.iter().map(|&f| rows.iter().map(|r| r[f]).collect()).collect();
    let labels: Vec<bool> = (0..rows.len()).map(|i| i >= real_rows.len()).collect();
    let data = Data { columns: &columns, labels: &labels };

    let per_tree: Vec<(f64, Vec<f64>)> = (0..params.n_trees)
        .into_par_iter()
        .filter_map(|t| tree_importance(&data, params, seed.wrapping_add(t as u64)))
        .collect();
    if per_tree.is_empty() {
        return Err(Error::Invariant("no tree had out-of-bag rows".into()));
    }
    let trees = per_tree.len() as f64;
    let oob_accuracy = per_tree.iter().map(|(a, _)| a).sum::<f64>() / trees;
    let mut raw = vec![0.0; kept.len()];
    for (_, drops) in &per_tree {
        for (acc, d) in raw.iter_mut().zip(drops) {
            *acc += d;
        }
    }
    let raw: Vec<f64> = raw.into_iter().map(|x| (x / trees).max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    let degenerate = total <= 0.0;
    let mut pct = vec![0.0; names.len()];
    for (k, &f) in kept.iter().enumerate() {
        pct[f] = if degenerate { 100.0 / kept.len() as f64 } else { 100.0 * raw[k] / total };
    }

    let mut entries: Vec<ImportanceEntry> = names
        .iter()
        .zip(&pct)
        .map(|(n, &p)| ImportanceEntry { feature_name: n.to_string(), importance_pct: p })
        .collect();
    entries.sort_by(|a, b| b.importance_pct.total_cmp(&a.importance_pct));
    Ok(ImportanceResult {
        entries,
        degenerate,
        dropped_features: (0..names.len())
            .filter(|f| !kept.contains(f))
            .map(|f| names[f].to_string())
            .collect(),
        n_real: real_rows.len(),
        n_synth: synth_rows.len(),
        oob_accuracy,
    })
}
