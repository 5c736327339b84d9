//! Gradient-boosted decision trees over the four interaction features.
//!
//! Exact greedy splits (no histograms), logistic loss with second-order
//! gains, shrinkage, and clamped leaf values. Only four features exist, so
//! the trainer presorts each feature once and scans sorted orders level by
//! level. Feature importance is the normalized total split gain per feature.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::epidemic::StateAssignment;
use crate::error::{Error, Result};
use crate::graph::EpochGraph;
use crate::ingest::PersonId;

pub const FEATURE_COUNT: usize = 4;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "delta_time",
    "delta_distance",
    "infected_around",
    "exposed_around",
];

/// Raw scores are clamped here before the sigmoid so probabilities stay
/// strictly inside (0, 1) in f64.
const RAW_SCORE_CLAMP: f64 = 30.0;

/// One labeled training example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRow {
    pub features: [f64; FEATURE_COUNT],
    pub label: bool,
}

/// GBDT hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GbdtParams {
    pub rounds: u32,
    pub max_depth: u32,
    pub learning_rate: f64,
    /// Leaf values are clamped into `[-leaf_clamp, leaf_clamp]`.
    pub leaf_clamp: f64,
    /// L2 regularization on leaf weights.
    pub lambda: f64,
    pub min_leaf: usize,
    pub min_gain: f64,
}

impl Default for GbdtParams {
    fn default() -> GbdtParams {
        GbdtParams {
            rounds: 100,
            max_depth: 4,
            learning_rate: 0.1,
            leaf_clamp: 4.0,
            lambda: 1.0,
            min_leaf: 5,
            min_gain: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

/// One regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn value(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[*feature] < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

/// A trained boosted ensemble. Serialized as versioned JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub version: u32,
    pub learning_rate: f64,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    /// Accumulated raw split gain per feature.
    pub gain_totals: [f64; FEATURE_COUNT],
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

impl TreeEnsemble {
    /// An ensemble with no trees; predicts 0.5 everywhere.
    pub fn empty(learning_rate: f64) -> TreeEnsemble {
        TreeEnsemble {
            version: MODEL_FORMAT_VERSION,
            learning_rate,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            trees: Vec::new(),
            gain_totals: [0.0; FEATURE_COUNT],
        }
    }

    pub fn raw_score(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        self.trees
            .iter()
            .map(|t| self.learning_rate * t.value(features))
            .sum()
    }

    /// Probability of the positive class, strictly inside (0, 1).
    pub fn predict(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        sigmoid(self.raw_score(features).clamp(-RAW_SCORE_CLAMP, RAW_SCORE_CLAMP))
    }

    /// Normalized split-gain shares; all zero while no split exists.
    pub fn importance(&self) -> [f64; FEATURE_COUNT] {
        let total: f64 = self.gain_totals.iter().sum();
        if total <= 0.0 {
            return [0.0; FEATURE_COUNT];
        }
        let mut shares = self.gain_totals;
        for s in &mut shares {
            *s /= total;
        }
        shares
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub auc: f64,
    pub feature_importance: [f64; FEATURE_COUNT],
    pub train_size: usize,
    pub test_size: usize,
    /// Total boosting rounds in the resulting model.
    pub iterations: u32,
}

/// Stratified shuffle split; `split_ratio` is the test fraction. Keeps at
/// least one example of each class on both sides.
fn stratified_split<R: Rng>(
    data: &[TrainRow],
    split_ratio: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let mut pos: Vec<usize> = (0..data.len()).filter(|&i| data[i].label).collect();
    let mut neg: Vec<usize> = (0..data.len()).filter(|&i| !data[i].label).collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let take = |v: &[usize]| -> usize {
        (((v.len() as f64) * split_ratio).round() as usize).clamp(1, v.len() - 1)
    };
    let (tp, tn) = (take(&pos), take(&neg));
    let mut test: Vec<usize> = pos[..tp].iter().chain(neg[..tn].iter()).copied().collect();
    let mut train: Vec<usize> = pos[tp..].iter().chain(neg[tn..].iter()).copied().collect();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

struct BuildNode {
    grad_sum: f64,
    hess_sum: f64,
    count: usize,
    scanning: bool,
    // Per-feature scan state.
    run_grad: f64,
    run_hess: f64,
    run_count: usize,
    prev_value: f64,
    // Best candidate so far.
    best_gain: f64,
    best_feature: usize,
    best_threshold: f64,
    node: TreeNode,
}

impl BuildNode {
    fn new() -> BuildNode {
        BuildNode {
            grad_sum: 0.0,
            hess_sum: 0.0,
            count: 0,
            scanning: false,
            run_grad: 0.0,
            run_hess: 0.0,
            run_count: 0,
            prev_value: 0.0,
            best_gain: 0.0,
            best_feature: 0,
            best_threshold: 0.0,
            node: TreeNode::Leaf { value: 0.0 },
        }
    }

    fn leaf_value(&self, params: &GbdtParams) -> f64 {
        let v = -self.grad_sum / (self.hess_sum + params.lambda);
        v.clamp(-params.leaf_clamp, params.leaf_clamp)
    }
}

fn objective(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Fit one regression tree to gradients/hessians; returns the tree and adds
/// each accepted split's gain into `gains`.
fn fit_tree(
    columns: &[Vec<f64>; FEATURE_COUNT],
    sorted: &[Vec<u32>; FEATURE_COUNT],
    grad: &[f64],
    hess: &[f64],
    params: &GbdtParams,
    node_of: &mut [u32],
    gains: &mut [f64; FEATURE_COUNT],
) -> Tree {
    let n = grad.len();
    let mut nodes = vec![BuildNode::new()];
    nodes[0].grad_sum = grad.iter().sum();
    nodes[0].hess_sum = hess.iter().sum();
    nodes[0].count = n;
    node_of.fill(0);
    let mut level = vec![0usize];

    for _depth in 0..params.max_depth {
        if level.is_empty() {
            break;
        }
        for &nid in &level {
            nodes[nid].scanning = true;
            nodes[nid].best_gain = 0.0;
        }
        for feature in 0..FEATURE_COUNT {
            for &nid in &level {
                let bn = &mut nodes[nid];
                bn.run_grad = 0.0;
                bn.run_hess = 0.0;
                bn.run_count = 0;
            }
            for &r in &sorted[feature] {
                let r = r as usize;
                let nid = node_of[r] as usize;
                let bn = &mut nodes[nid];
                if !bn.scanning {
                    continue;
                }
                let value = columns[feature][r];
                if bn.run_count > 0 && value > bn.prev_value {
                    let left_count = bn.run_count;
                    let right_count = bn.count - left_count;
                    if left_count >= params.min_leaf && right_count >= params.min_leaf {
                        let gl = bn.run_grad;
                        let hl = bn.run_hess;
                        let gr = bn.grad_sum - gl;
                        let hr = bn.hess_sum - hl;
                        let gain = 0.5
                            * (objective(gl, hl, params.lambda) + objective(gr, hr, params.lambda)
                                - objective(bn.grad_sum, bn.hess_sum, params.lambda));
                        if gain > bn.best_gain {
                            bn.best_gain = gain;
                            bn.best_feature = feature;
                            bn.best_threshold = bn.prev_value + (value - bn.prev_value) / 2.0;
                        }
                    }
                }
                bn.run_grad += grad[r];
                bn.run_hess += hess[r];
                bn.run_count += 1;
                bn.prev_value = value;
            }
        }

        let mut next_level = Vec::new();
        for &nid in &level {
            nodes[nid].scanning = false;
            if nodes[nid].best_gain > params.min_gain {
                let left = nodes.len() as u32;
                let right = left + 1;
                gains[nodes[nid].best_feature] += nodes[nid].best_gain;
                nodes[nid].node = TreeNode::Split {
                    feature: nodes[nid].best_feature,
                    threshold: nodes[nid].best_threshold,
                    left,
                    right,
                };
                nodes.push(BuildNode::new());
                nodes.push(BuildNode::new());
                next_level.push(left as usize);
                next_level.push(right as usize);
            } else {
                nodes[nid].node = TreeNode::Leaf {
                    value: nodes[nid].leaf_value(params),
                };
            }
        }

        for r in 0..n {
            let nid = node_of[r] as usize;
            if let TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } = nodes[nid].node
            {
                let child = if columns[feature][r] < threshold {
                    left
                } else {
                    right
                };
                node_of[r] = child;
                let bn = &mut nodes[child as usize];
                bn.grad_sum += grad[r];
                bn.hess_sum += hess[r];
                bn.count += 1;
            }
        }
        level = next_level;
    }

    for &nid in &level {
        nodes[nid].node = TreeNode::Leaf {
            value: nodes[nid].leaf_value(params),
        };
    }

    Tree {
        nodes: nodes.into_iter().map(|b| b.node).collect(),
    }
}

fn boost_rounds(
    model: &mut TreeEnsemble,
    rows: &[TrainRow],
    pos_weight: f64,
    rounds: u32,
    params: &GbdtParams,
) {
    let n = rows.len();
    let mut columns: [Vec<f64>; FEATURE_COUNT] = Default::default();
    for (f, column) in columns.iter_mut().enumerate() {
        *column = rows.iter().map(|r| r.features[f]).collect();
    }
    let mut sorted: [Vec<u32>; FEATURE_COUNT] = Default::default();
    for (f, order) in sorted.iter_mut().enumerate() {
        let mut idx: Vec<u32> = (0..n as u32).collect();
        idx.sort_by(|&a, &b| columns[f][a as usize].total_cmp(&columns[f][b as usize]));
        *order = idx;
    }

    let mut raw: Vec<f64> = rows.iter().map(|r| model.raw_score(&r.features)).collect();
    let mut grad = vec![0.0f64; n];
    let mut hess = vec![0.0f64; n];
    let mut node_of = vec![0u32; n];

    for _ in 0..rounds {
        for i in 0..n {
            let p = sigmoid(raw[i]);
            let (y, w) = if rows[i].label {
                (1.0, pos_weight)
            } else {
                (0.0, 1.0)
            };
            grad[i] = w * (p - y);
            hess[i] = w * p * (1.0 - p);
        }
        let tree = fit_tree(
            &columns,
            &sorted,
            &grad,
            &hess,
            params,
            &mut node_of,
            &mut model.gain_totals,
        );
        for i in 0..n {
            if let TreeNode::Leaf { value } = tree.nodes[node_of[i] as usize] {
                raw[i] += model.learning_rate * value;
            }
        }
        model.trees.push(tree);
    }
}

fn class_sizes(data: &[TrainRow]) -> (usize, usize) {
    let pos = data.iter().filter(|r| r.label).count();
    (pos, data.len() - pos)
}

fn train_impl<R: Rng>(
    data: &[TrainRow],
    split_ratio: f64,
    params: &GbdtParams,
    rounds: u32,
    base: Option<&TreeEnsemble>,
    rng: &mut R,
) -> Result<(TreeEnsemble, TrainReport)> {
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(Error::Config(format!("split_ratio {split_ratio} outside (0, 1)")));
    }
    let (pos, neg) = class_sizes(data);
    if pos < 2 || neg < 2 {
        return Err(Error::Train(format!(
            "need at least 2 examples of each class to train and evaluate, got {pos} positive / {neg} negative"
        )));
    }

    let (train_idx, test_idx) = stratified_split(data, split_ratio, rng);
    let train_rows: Vec<TrainRow> = train_idx.iter().map(|&i| data[i]).collect();
    let (train_pos, train_neg) = class_sizes(&train_rows);
    let pos_weight = train_neg as f64 / train_pos as f64;

    let mut model = match base {
        Some(existing) => existing.clone(),
        None => TreeEnsemble::empty(params.learning_rate),
    };
    boost_rounds(&mut model, &train_rows, pos_weight, rounds, params);

    let scores: Vec<f64> = test_idx.iter().map(|&i| model.predict(&data[i].features)).collect();
    let labels: Vec<bool> = test_idx.iter().map(|&i| data[i].label).collect();
    let auc = auc(&scores, &labels)?;

    let report = TrainReport {
        auc,
        feature_importance: model.importance(),
        train_size: train_idx.len(),
        test_size: test_idx.len(),
        iterations: model.trees.len() as u32,
    };
    Ok((model, report))
}

/// Train a fresh ensemble. `split_ratio` is the held-out test fraction
/// (0.3 splits test:train 3:7); the positive-class weight is set to the
/// train-split negative/positive ratio automatically.
pub fn train<R: Rng>(
    data: &[TrainRow],
    split_ratio: f64,
    params: &GbdtParams,
    rng: &mut R,
) -> Result<(TreeEnsemble, TrainReport)> {
    train_impl(data, split_ratio, params, params.rounds, None, rng)
}

/// How [`ContinuousLearner::update`] incorporates new data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePolicy {
    /// Retrain from scratch on the whole accumulated store (default).
    FullRetrain,
    /// Keep existing trees and append `rounds` new ones fitted to residuals
    /// on the accumulated store.
    WarmStart { rounds: u32 },
}

/// Accumulates labeled examples and keeps the model current as confirmation
/// batches arrive.
#[derive(Debug, Clone)]
pub struct ContinuousLearner {
    params: GbdtParams,
    policy: UpdatePolicy,
    split_ratio: f64,
    seed: u64,
    store: Vec<TrainRow>,
    model: TreeEnsemble,
    report: Option<TrainReport>,
}

impl ContinuousLearner {
    pub fn new(params: GbdtParams, policy: UpdatePolicy, split_ratio: f64, seed: u64) -> ContinuousLearner {
        ContinuousLearner {
            model: TreeEnsemble::empty(params.learning_rate),
            params,
            policy,
            split_ratio,
            seed,
            store: Vec::new(),
            report: None,
        }
    }

    pub fn model(&self) -> &TreeEnsemble {
        &self.model
    }

    pub fn report(&self) -> Option<&TrainReport> {
        self.report.as_ref()
    }

    pub fn store_len(&self) -> usize {
        self.store.len()
    }

    pub fn is_trained(&self) -> bool {
        self.report.is_some()
    }

    /// Fold new labeled examples into the store and refresh the model.
    /// Returns `Ok(false)` when training is deferred because the store does
    /// not yet hold both classes.
    pub fn update(&mut self, new_data: &[TrainRow]) -> Result<bool> {
        self.store.extend_from_slice(new_data);
        let (pos, neg) = class_sizes(&self.store);
        if pos < 2 || neg < 2 {
            log::info!(
                "training deferred: store has {pos} positive / {neg} negative examples"
            );
            return Ok(false);
        }
        let mut rng = crate::rng::stream_rng(self.seed, "learner");
        let (model, report) = match self.policy {
            UpdatePolicy::FullRetrain => train(&self.store, self.split_ratio, &self.params, &mut rng)?,
            UpdatePolicy::WarmStart { rounds } => {
                if self.model.trees.is_empty() {
                    train(&self.store, self.split_ratio, &self.params, &mut rng)?
                } else {
                    train_impl(
                        &self.store,
                        self.split_ratio,
                        &self.params,
                        rounds,
                        Some(&self.model),
                        &mut rng,
                    )?
                }
            }
        };
        self.model = model;
        self.report = Some(report);
        Ok(true)
    }
}

/// Weighted sum of per-layer infected counts around a node; `weights[k]`
/// applies to layer `k + 1`.
pub fn superspreader_score(
    graph: &EpochGraph,
    node: PersonId,
    states: &StateAssignment,
    weights: &[f64],
) -> f64 {
    graph
        .neighborhood_counts(node, states, weights.len() as u32)
        .iter()
        .zip(weights)
        .map(|(c, w)| f64::from(c.infected) * w)
        .sum()
}

/// Rank-based AUC: the probability that a random positive outscores a
/// random negative, ties counted half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!(
            "scores ({}) and labels ({}) length mismatch",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(format!(
            "AUC needs both classes; got {pos} positive / {neg} negative"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Midranks across tie groups.
    let mut rank = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            rank[idx] = mid;
        }
        i = j + 1;
    }

    let pos_rank_sum: f64 = (0..scores.len()).filter(|&i| labels[i]).map(|i| rank[i]).sum();
    let pos_f = pos as f64;
    Ok((pos_rank_sum - pos_f * (pos_f + 1.0) / 2.0) / (pos_f * neg as f64))
}
