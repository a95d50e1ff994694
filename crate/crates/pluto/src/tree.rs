//! Tree growth, cost-complexity pruning with cross-validation, the θ-SE
//! rule, prediction, and serialization.
//!
//! Growth alternates split-variable selection (optionally bias-calibrated)
//! with split point/subset search, recursing until a node is pure, too
//! small, too deep, or has no valid split. Every node keeps its fitted
//! logistic model so that pruning can collapse any internal node into a
//! working leaf. Pruning follows the minimal cost-complexity scheme:
//! weakest-link collapses trace a nested sequence of subtrees indexed by a
//! penalty κ, cross-validation estimates each subtree's predictive
//! deviance, and the θ-SE rule picks the smallest subtree within θ standard
//! errors of the best.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{
    calibrate_gamma, select_split_variable_calibrated, NodeModel, SelectionOption,
};
use crate::data::{ColumnValues, Dataset, NodeView};
use crate::glm::{self, FittedGlm, GlmOptions};
use crate::metrics;
use crate::partition::{self, PurePolicy, SplitCriterion};
use crate::rng::{derive_rng, derive_seed};
use crate::split::{best_simple_regressor, BestSimpleOutcome, SelectionFailure};

/// Serialized tree format version.
pub const FORMAT_VERSION: u32 = 1;

/// Probability reported by a pure leaf, clipped so deviance stays finite.
const PURE_LEAF_CLIP: f64 = 1e-6;

/// RNG stream offset separating calibration from growth streams.
const CALIBRATION_STREAM: u64 = 1 << 40;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("node model failed to converge at the root; no tree can be grown")]
    RootModelFailed,
    #[error("tree format version {found} is not supported (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("malformed tree document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("prediction data is missing column {0:?} used by the tree")]
    MissingColumn(String),
    #[error("column {0:?} has a different type than at training time")]
    ColumnTypeMismatch(String),
}

/// Everything that controls growth and pruning.
#[derive(Debug, Clone)]
pub struct GrowConfig {
    pub option: SelectionOption,
    /// Maximum number of quantile groups / split point candidates (M).
    pub m_groups: usize,
    pub pure_policy: PurePolicy,
    pub max_depth: usize,
    /// Overrides the `max(30, 5·(regressors+1))` default when set.
    pub min_node_size: Option<usize>,
    /// Apply bootstrap bias calibration to split-variable selection.
    pub bias_correct: bool,
    pub calib_reps: usize,
    pub calib_grid: (f64, f64, usize),
    /// Recalibrate γ* at every node instead of once at the root.
    pub calibrate_per_node: bool,
    pub seed: u64,
    pub glm: GlmOptions,
}

impl Default for GrowConfig {
    fn default() -> Self {
        GrowConfig {
            option: SelectionOption::Simple,
            m_groups: 5,
            pure_policy: PurePolicy::Keep,
            max_depth: 10,
            min_node_size: None,
            bias_correct: false,
            calib_reps: 100,
            calib_grid: (1.0, 2.0, 1000),
            calibrate_per_node: false,
            seed: 0,
            glm: GlmOptions::default(),
        }
    }
}

/// The model a node falls back to when it acts as a leaf.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeafModel {
    /// Best simple linear logistic model; `regressor` is `None` for the
    /// intercept-only fallback.
    Simple { regressor: Option<usize>, model: FittedGlm },
    /// Penalized multiple model over the listed regressor columns.
    Multiple { regressors: Vec<usize>, model: FittedGlm },
    /// Constant-response node.
    PureClass { label: u8 },
}

/// One tree node; ids are heap-style (root = 1, children 2k and 2k+1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: u64,
    pub split: Option<SplitCriterion>,
    pub children: Option<(u64, u64)>,
    pub model: LeafModel,
    pub n_rows: usize,
    pub n_pos: usize,
    /// Deviance of this node's own model on its training rows (0 for pure).
    pub node_deviance: f64,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// Column identity recorded at training time, enough to re-resolve columns
/// and re-map category codes in new data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    /// Training label table for categorical columns, `None` for numeric.
    pub categorical_labels: Option<Vec<String>>,
}

/// A fitted tree: structure, node models, and training-time column identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    pub version: u32,
    pub response_name: String,
    pub columns: Vec<ColumnMeta>,
    pub root: u64,
    pub nodes: BTreeMap<u64, TreeNode>,
}

fn column_meta(data: &Dataset) -> Vec<ColumnMeta> {
    data.columns
        .iter()
        .map(|c| ColumnMeta {
            name: c.name.clone(),
            categorical_labels: match &c.values {
                ColumnValues::Numeric(_) => None,
                ColumnValues::Categorical { labels, .. } => Some(labels.clone()),
            },
        })
        .collect()
}

fn pure_leaf(id: u64, n_rows: usize, n_pos: usize) -> TreeNode {
    TreeNode {
        id,
        split: None,
        children: None,
        model: LeafModel::PureClass { label: u8::from(n_pos > 0) },
        n_rows,
        n_pos,
        node_deviance: 0.0,
    }
}

/// Fit the node-model option on a node that will be a leaf (no split
/// machinery needed). `None` means the fit failed.
fn fit_node_model<R: Rng>(
    node: &NodeView,
    option: SelectionOption,
    rng: &mut R,
    opts: &GlmOptions,
) -> Option<(LeafModel, f64)> {
    match option {
        SelectionOption::Simple => match best_simple_regressor(node, opts) {
            BestSimpleOutcome::Found(b) => {
                let dev = b.deviance;
                let regressor = (b.regressor != usize::MAX).then_some(b.regressor);
                Some((LeafModel::Simple { regressor, model: b.model }, dev))
            }
            _ => None,
        },
        SelectionOption::Multiple { alpha, cv_folds } => {
            let regressors = node.data.regressor_candidates();
            let y = node.response();
            if regressors.is_empty() {
                let fit = glm::fit_irls(&[], &y, opts).ok()?;
                let dev = fit.deviance;
                return Some((LeafModel::Multiple { regressors, model: fit }, dev));
            }
            let x_cols = node.design_matrix(&regressors);
            let (_, fit) = glm::cv_select_lambda(&x_cols, &y, alpha, cv_folds, rng, opts).ok()?;
            let dev = fit.deviance;
            Some((LeafModel::Multiple { regressors, model: fit }, dev))
        }
    }
}

fn leaf_model_from(model: NodeModel, regressors: &[usize]) -> (LeafModel, f64) {
    match model {
        NodeModel::Simple(b) => {
            let dev = b.deviance;
            let regressor = (b.regressor != usize::MAX).then_some(b.regressor);
            (LeafModel::Simple { regressor, model: b.model }, dev)
        }
        NodeModel::Multiple(fit) => {
            let dev = fit.deviance;
            (LeafModel::Multiple { regressors: regressors.to_vec(), model: fit }, dev)
        }
    }
}

/// Recursive growth of the subtree rooted at `id`. Returns the nodes of
/// the finished subtree, or `None` when this node's model failed (the
/// caller then turns the parent into a terminal node).
fn build_node(
    data: &Dataset,
    rows: Vec<usize>,
    id: u64,
    depth: usize,
    gamma: f64,
    min_size: usize,
    cfg: &GrowConfig,
) -> Option<Vec<(u64, TreeNode)>> {
    let node = NodeView::new(data, rows);
    let n_rows = node.n();
    let n_pos = node.n_pos();
    if node.is_pure() {
        return Some(vec![(id, pure_leaf(id, n_rows, n_pos))]);
    }
    let mut rng: ChaCha8Rng = derive_rng(cfg.seed, id);

    let can_split = depth < cfg.max_depth && n_rows >= 2 * min_size;
    if !can_split {
        let (model, dev) = fit_node_model(&node, cfg.option, &mut rng, &cfg.glm)?;
        return Some(vec![(
            id,
            TreeNode {
                id,
                split: None,
                children: None,
                model,
                n_rows,
                n_pos,
                node_deviance: dev,
            },
        )]);
    }

    let gamma = if cfg.bias_correct && cfg.calibrate_per_node && id != 1 {
        let sub = node.to_dataset();
        calibrate_gamma(
            &sub,
            cfg.option,
            cfg.calib_reps,
            cfg.calib_grid,
            cfg.m_groups,
            derive_seed(cfg.seed, id ^ CALIBRATION_STREAM),
            &cfg.glm,
        )
        .gamma_star
    } else {
        gamma
    };

    let selection = match select_split_variable_calibrated(
        &node,
        cfg.option,
        gamma,
        cfg.m_groups,
        &mut rng,
        &cfg.glm,
    ) {
        Ok(s) => s,
        Err(SelectionFailure::PureNode) => return Some(vec![(id, pure_leaf(id, n_rows, n_pos))]),
        Err(SelectionFailure::NodeFailed) => return None,
    };
    let regressors = data.regressor_candidates();
    let (model, node_deviance) = leaf_model_from(selection.model, &regressors);
    let as_leaf = |model: LeafModel| {
        vec![(
            id,
            TreeNode {
                id,
                split: None,
                children: None,
                model,
                n_rows,
                n_pos,
                node_deviance,
            },
        )]
    };

    let best = partition::best_split(
        &node,
        selection.variable,
        cfg.option,
        cfg.m_groups,
        cfg.pure_policy,
        min_size,
        &mut rng,
        &cfg.glm,
    );
    let Some(eval) = best else {
        return Some(as_leaf(model));
    };

    let criterion = eval.criterion;
    let variable = criterion.variable();
    let is_cat = data.columns[variable].role.is_categorical();
    let mut left_rows = Vec::new();
    let mut right_rows = Vec::new();
    for &row in &node.rows {
        let goes_left = if is_cat {
            let (codes, _) = data.columns[variable].categorical().unwrap();
            criterion.routes_left(None, Some(codes[row]))
        } else {
            criterion.routes_left(Some(data.columns[variable].numeric().unwrap()[row]), None)
        };
        if goes_left {
            left_rows.push(row);
        } else {
            right_rows.push(row);
        }
    }

    let (left, right) = rayon::join(
        || build_node(data, left_rows, 2 * id, depth + 1, gamma, min_size, cfg),
        || build_node(data, right_rows, 2 * id + 1, depth + 1, gamma, min_size, cfg),
    );
    match (left, right) {
        (Some(l), Some(r)) => {
            let mut nodes = vec![(
                id,
                TreeNode {
                    id,
                    split: Some(criterion),
                    children: Some((2 * id, 2 * id + 1)),
                    model,
                    n_rows,
                    n_pos,
                    node_deviance,
                },
            )];
            nodes.extend(l);
            nodes.extend(r);
            Some(nodes)
        }
        // A failed child deletes both children; this node becomes terminal.
        _ => Some(as_leaf(model)),
    }
}

/// Grow a tree on a subset of rows (the full dataset for normal training,
/// a fold complement during cross-validation).
pub fn grow_on(data: &Dataset, rows: Vec<usize>, cfg: &GrowConfig) -> Result<Tree, TreeError> {
    let gamma = if cfg.bias_correct && !cfg.calibrate_per_node {
        let root = NodeView::new(data, rows.clone());
        let base = if rows.len() == data.n_rows { data.clone() } else { root.to_dataset() };
        calibrate_gamma(
            &base,
            cfg.option,
            cfg.calib_reps,
            cfg.calib_grid,
            cfg.m_groups,
            derive_seed(cfg.seed, CALIBRATION_STREAM),
            &cfg.glm,
        )
        .gamma_star
    } else if cfg.bias_correct {
        // Per-node mode still needs the root value.
        let root = NodeView::new(data, rows.clone());
        calibrate_gamma(
            &root.to_dataset(),
            cfg.option,
            cfg.calib_reps,
            cfg.calib_grid,
            cfg.m_groups,
            derive_seed(cfg.seed, 1 ^ CALIBRATION_STREAM),
            &cfg.glm,
        )
        .gamma_star
    } else {
        1.0
    };
    let min_size = cfg
        .min_node_size
        .unwrap_or_else(|| partition::min_node_size(data.regressor_candidates().len()));
    let nodes = build_node(data, rows, 1, 0, gamma, min_size, cfg)
        .ok_or(TreeError::RootModelFailed)?;
    Ok(Tree {
        version: FORMAT_VERSION,
        response_name: data.response_name.clone(),
        columns: column_meta(data),
        root: 1,
        nodes: nodes.into_iter().collect(),
    })
}

/// Grow a tree on the full dataset.
pub fn grow(data: &Dataset, cfg: &GrowConfig) -> Result<Tree, TreeError> {
    grow_on(data, (0..data.n_rows).collect(), cfg)
}

/// Per-tree-column resolution against a prediction dataset.
struct ColumnResolution {
    /// Index of the matching column in the prediction dataset.
    col: usize,
    /// Prediction-code → training-code map; `u32::MAX` marks an unseen
    /// category (routes right, never in a subset).
    code_map: Option<Vec<u32>>,
}

impl Tree {
    pub fn n_leaves(&self) -> usize {
        self.nodes.values().filter(|n| n.is_leaf()).count()
    }

    /// Training deviance D(T): sum of leaf node deviances.
    pub fn training_deviance(&self) -> f64 {
        self.nodes.values().filter(|n| n.is_leaf()).map(|n| n.node_deviance).sum()
    }

    fn resolve_columns(&self, data: &Dataset) -> Result<Vec<ColumnResolution>, TreeError> {
        self.columns
            .iter()
            .map(|meta| {
                let col = data
                    .columns
                    .iter()
                    .position(|c| c.name == meta.name)
                    .ok_or_else(|| TreeError::MissingColumn(meta.name.clone()))?;
                let code_map = match (&meta.categorical_labels, &data.columns[col].values) {
                    (None, ColumnValues::Numeric(_)) => None,
                    (Some(train_labels), ColumnValues::Categorical { labels, .. }) => {
                        Some(
                            labels
                                .iter()
                                .map(|l| {
                                    train_labels
                                        .iter()
                                        .position(|t| t == l)
                                        .map_or(u32::MAX, |p| p as u32)
                                })
                                .collect(),
                        )
                    }
                    _ => return Err(TreeError::ColumnTypeMismatch(meta.name.clone())),
                };
                Ok(ColumnResolution { col, code_map })
            })
            .collect()
    }

    fn predict_resolved(&self, data: &Dataset, row: usize, res: &[ColumnResolution]) -> f64 {
        let numeric = |tree_col: usize| -> f64 {
            data.columns[res[tree_col].col].numeric().unwrap()[row]
        };
        let train_code = |tree_col: usize| -> u32 {
            let r = &res[tree_col];
            let (codes, _) = data.columns[r.col].categorical().unwrap();
            r.code_map.as_ref().unwrap()[codes[row] as usize]
        };
        let mut id = self.root;
        loop {
            let node = &self.nodes[&id];
            let Some(split) = &node.split else { break };
            let goes_left = match split {
                SplitCriterion::NumericThreshold { variable, delta } => {
                    numeric(*variable) <= *delta
                }
                SplitCriterion::CategorySubset { variable, subset } => {
                    subset.contains(&train_code(*variable))
                }
            };
            let (l, r) = node.children.unwrap();
            id = if goes_left { l } else { r };
        }
        match &self.nodes[&id].model {
            LeafModel::PureClass { label } => {
                if *label == 1 {
                    1.0 - PURE_LEAF_CLIP
                } else {
                    PURE_LEAF_CLIP
                }
            }
            LeafModel::Simple { regressor, model } => {
                let x: Vec<f64> = regressor.map(numeric).into_iter().collect();
                glm::predict_prob(model, &x)
            }
            LeafModel::Multiple { regressors, model } => {
                let x: Vec<f64> = regressors.iter().map(|&c| numeric(c)).collect();
                glm::predict_prob(model, &x)
            }
        }
    }

    /// Predict probabilities for specific rows of a dataset.
    pub fn predict_rows(&self, data: &Dataset, rows: &[usize]) -> Result<Vec<f64>, TreeError> {
        let res = self.resolve_columns(data)?;
        Ok(rows.iter().map(|&r| self.predict_resolved(data, r, &res)).collect())
    }

    /// Predict probabilities for every row of a dataset.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>, TreeError> {
        self.predict_rows(data, &(0..data.n_rows).collect::<Vec<_>>())
    }

    /// Leaf id each row lands in (diagnostics, importance bookkeeping).
    pub fn leaf_assignments(&self, data: &Dataset) -> Result<Vec<u64>, TreeError> {
        let res = self.resolve_columns(data)?;
        Ok((0..data.n_rows)
            .map(|row| {
                let mut id = self.root;
                loop {
                    let node = &self.nodes[&id];
                    let Some(split) = &node.split else { return id };
                    let goes_left = match split {
                        SplitCriterion::NumericThreshold { variable, delta } => {
                            data.columns[res[*variable].col].numeric().unwrap()[row] <= *delta
                        }
                        SplitCriterion::CategorySubset { variable, subset } => {
                            let r = &res[*variable];
                            let (codes, _) = data.columns[r.col].categorical().unwrap();
                            subset.contains(&r.code_map.as_ref().unwrap()[codes[row] as usize])
                        }
                    };
                    let (l, rgt) = node.children.unwrap();
                    id = if goes_left { l } else { rgt };
                }
            })
            .collect())
    }

    /// Deterministic JSON serialization (BTreeMap node order, fixed field
    /// order): identical trees produce identical bytes.
    pub fn serialize(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn deserialize(text: &str) -> Result<Tree, TreeError> {
        let tree: Tree = serde_json::from_str(text)?;
        if tree.version != FORMAT_VERSION {
            return Err(TreeError::VersionMismatch { found: tree.version });
        }
        Ok(tree)
    }

    /// The subtree obtained by turning each id in `collapsed` into a leaf.
    fn collapse(&self, collapsed: &BTreeSet<u64>) -> Tree {
        let mut nodes = BTreeMap::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let mut node = self.nodes[&id].clone();
            if collapsed.contains(&id) {
                node.split = None;
                node.children = None;
            } else if let Some((l, r)) = node.children {
                stack.push(l);
                stack.push(r);
            }
            nodes.insert(id, node);
        }
        Tree { version: self.version, response_name: self.response_name.clone(), columns: self.columns.clone(), root: self.root, nodes }
    }

    /// Branch deviance and leaf count below `id`, treating collapsed ids
    /// as leaves.
    fn branch_stats(&self, id: u64, collapsed: &BTreeSet<u64>) -> (f64, usize) {
        let node = &self.nodes[&id];
        match node.children {
            Some((l, r)) if !collapsed.contains(&id) => {
                let (dl, nl) = self.branch_stats(l, collapsed);
                let (dr, nr) = self.branch_stats(r, collapsed);
                (dl + dr, nl + nr)
            }
            _ => (node.node_deviance, 1),
        }
    }

    /// Minimal cost-complexity pruning: the nested sequence of subtrees and
    /// the strictly increasing κ value at which each becomes optimal.
    pub fn prune_sequence(&self) -> Vec<(f64, Tree)> {
        let mut collapsed: BTreeSet<u64> = BTreeSet::new();
        let mut records = Vec::new();
        let mut kappa = 0.0f64;
        loop {
            // Collapse every weakest link whose gain-per-leaf is within the
            // current κ (iteratively: collapsing changes ancestors' stats).
            loop {
                let weakest = self.weakest_link(&collapsed);
                match weakest {
                    Some((id, g)) if g <= kappa * (1.0 + 1e-9) + 1e-12 => {
                        collapsed.insert(id);
                    }
                    _ => break,
                }
            }
            records.push((kappa, self.collapse(&collapsed)));
            match self.weakest_link(&collapsed) {
                Some((_, g)) => kappa = g,
                None => break,
            }
        }
        records
    }

    /// Internal node (not collapsed, not under a collapse) minimizing
    /// g = (D(node as leaf) − D(branch)) / (leaves(branch) − 1); ties break
    /// to the smallest id.
    fn weakest_link(&self, collapsed: &BTreeSet<u64>) -> Option<(u64, f64)> {
        let mut best: Option<(u64, f64)> = None;
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if collapsed.contains(&id) {
                continue;
            }
            let node = &self.nodes[&id];
            if let Some((l, r)) = node.children {
                stack.push(l);
                stack.push(r);
                let (d_branch, n_leaves) = self.branch_stats(id, collapsed);
                let g = (node.node_deviance - d_branch) / (n_leaves as f64 - 1.0);
                let better = match best {
                    None => true,
                    Some((bid, bg)) => g < bg || (g == bg && id < bid),
                };
                if better {
                    best = Some((id, g));
                }
            }
        }
        best
    }
}

/// One pruning step with its cross-validated deviance estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneRecord {
    pub kappa: f64,
    pub subtree_leaves: usize,
    pub cv_dev_mean: f64,
    pub cv_dev_se: f64,
    /// Per-fold held-out deviances, rescaled to full-data size.
    pub fold_devs: Vec<f64>,
}

/// The full tree, its (κ, subtree) pruning sequence, and the CV records.
pub type CvPruneResult = (Tree, Vec<(f64, Tree)>, Vec<PruneRecord>);

/// Grow the main tree, compute its pruning sequence, and estimate each
/// subtree's predictive deviance by k-fold cross-validation. Fold subtrees
/// are matched to the main sequence at the geometric midpoints
/// κ′ = √(κ_i κ_{i+1}). Folds whose tree fails to grow are skipped.
pub fn cv_prune(data: &Dataset, cfg: &GrowConfig, k_folds: usize) -> Result<CvPruneResult, TreeError> {
    let tree = grow(data, cfg)?;
    let sequence = tree.prune_sequence();
    let kappas: Vec<f64> = sequence.iter().map(|&(k, _)| k).collect();
    // Evaluation points: geometric midpoints; the last interval is open.
    let eval_kappas: Vec<f64> = (0..kappas.len())
        .map(|i| {
            if i + 1 < kappas.len() {
                (kappas[i] * kappas[i + 1]).sqrt()
            } else {
                f64::INFINITY
            }
        })
        .collect();

    let mut fold_rng = derive_rng(cfg.seed, 9_000_000);
    let assignment = glm::stratified_folds(&data.response, k_folds, &mut fold_rng);

    let fold_results: Vec<Option<Vec<f64>>> = (0..k_folds)
        .into_par_iter()
        .map(|fold| {
            let train: Vec<usize> =
                (0..data.n_rows).filter(|&i| assignment[i] != fold).collect();
            let held: Vec<usize> =
                (0..data.n_rows).filter(|&i| assignment[i] == fold).collect();
            if held.is_empty() {
                return None;
            }
            let mut fold_cfg = cfg.clone();
            fold_cfg.seed = derive_seed(cfg.seed, 10_000 + fold as u64);
            let fold_tree = grow_on(data, train, &fold_cfg).ok()?;
            let fold_seq = fold_tree.prune_sequence();
            let y: Vec<u8> = held.iter().map(|&i| data.response[i]).collect();
            let scale = data.n_rows as f64 / held.len() as f64;
            Some(
                eval_kappas
                    .iter()
                    .map(|&kp| {
                        // Largest fold κ ≤ κ′ picks the subtree optimal there.
                        let idx = fold_seq
                            .iter()
                            .rposition(|&(k, _)| k <= kp)
                            .unwrap_or(0);
                        let p = fold_seq[idx].1.predict_rows(data, &held).unwrap();
                        metrics::dev(&y, &p) * scale
                    })
                    .collect(),
            )
        })
        .collect();

    let realized: Vec<&Vec<f64>> = fold_results.iter().flatten().collect();
    let records = sequence
        .iter()
        .enumerate()
        .map(|(i, (kappa, sub))| {
            let devs: Vec<f64> = realized.iter().map(|f| f[i]).collect();
            let k = devs.len() as f64;
            let mean = devs.iter().sum::<f64>() / k;
            let var = devs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
                / (k - 1.0).max(1.0);
            PruneRecord {
                kappa: *kappa,
                subtree_leaves: sub.n_leaves(),
                cv_dev_mean: mean,
                cv_dev_se: (var / k).sqrt(),
                fold_devs: devs,
            }
        })
        .collect();
    Ok((tree, sequence, records))
}

/// θ-SE rule: among subtrees whose estimated deviance is within θ standard
/// errors of the minimum, pick the one with the fewest leaves. Returns the
/// index of the chosen record.
pub fn apply_se_rule(records: &[PruneRecord], theta: f64) -> usize {
    assert!(!records.is_empty() && theta >= 0.0);
    let best = records
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.cv_dev_mean.partial_cmp(&b.cv_dev_mean).unwrap())
        .unwrap();
    let threshold = best.1.cv_dev_mean + theta * best.1.cv_dev_se;
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.cv_dev_mean <= threshold)
        .min_by_key(|(_, r)| r.subtree_leaves)
        .unwrap()
        .0
}

/// Render the tree in Graphviz DOT form: internal nodes show their split
/// criterion (an observation goes left iff the criterion holds), leaves
/// show counts and the leaf model kind.
pub fn to_dot(tree: &Tree) -> String {
    let mut out = String::from("digraph pluto {\n  node [shape=box, fontname=\"Helvetica\"];\n");
    for node in tree.nodes.values() {
        let label = match &node.split {
            Some(SplitCriterion::NumericThreshold { variable, delta }) => {
                format!("N{}\\n{} <= {:.6}", node.id, tree.columns[*variable].name, delta)
            }
            Some(SplitCriterion::CategorySubset { variable, subset }) => {
                let labels = tree.columns[*variable].categorical_labels.as_ref().unwrap();
                let members: Vec<&str> =
                    subset.iter().map(|&c| labels[c as usize].as_str()).collect();
                format!(
                    "N{}\\n{} in {{{}}}",
                    node.id,
                    tree.columns[*variable].name,
                    members.join(", ")
                )
            }
            None => {
                let kind = match &node.model {
                    LeafModel::PureClass { label } => format!("pure y={label}"),
                    LeafModel::Simple { regressor, .. } => match regressor {
                        Some(r) => format!("simple({})", tree.columns[*r].name),
                        None => "intercept".to_string(),
                    },
                    LeafModel::Multiple { .. } => "multiple".to_string(),
                };
                format!("N{}\\nn={} pos={}\\n{}", node.id, node.n_rows, node.n_pos, kind)
            }
        };
        out.push_str(&format!("  n{} [label=\"{}\"];\n", node.id, label));
        if let Some((l, r)) = node.children {
            out.push_str(&format!("  n{} -> n{} [label=\"yes\"];\n", node.id, l));
            out.push_str(&format!("  n{} -> n{} [label=\"no\"];\n", node.id, r));
        }
    }
    out.push_str("}\n");
    out
}
