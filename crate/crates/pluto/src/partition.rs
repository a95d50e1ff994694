//! Split point and subset search for the chosen split variable.
//!
//! Once a node's split variable is fixed, the candidate set is small:
//! quantile thresholds for numeric variables, prefix subsets in the natural
//! order for ordinals, and prefix subsets in order of per-category success
//! proportion for nominals (the classic shortcut that avoids scanning all
//! 2^(C-1) - 1 subsets). Each candidate is scored by the summed deviance of
//! the node-model option refitted in both children; the argmin wins.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calibrate::SelectionOption;
use crate::data::{quantile, NodeView};
use crate::glm::{self, GlmOptions};
use crate::split::{best_simple_regressor, BestSimpleOutcome};

/// A binary split rule attached to an internal node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitCriterion {
    /// Route left iff value ≤ delta.
    NumericThreshold { variable: usize, delta: f64 },
    /// Route left iff the category code is in the subset; a nonempty proper
    /// subset of the categories observed in the node.
    CategorySubset { variable: usize, subset: BTreeSet<u32> },
}

impl SplitCriterion {
    pub fn variable(&self) -> usize {
        match self {
            SplitCriterion::NumericThreshold { variable, .. } => *variable,
            SplitCriterion::CategorySubset { variable, .. } => *variable,
        }
    }

    /// Whether a single row routes left. `None` numeric values cannot occur
    /// (missing data is rejected at load); unseen categories route right.
    pub fn routes_left(&self, numeric: Option<f64>, code: Option<u32>) -> bool {
        match self {
            SplitCriterion::NumericThreshold { delta, .. } => numeric.unwrap() <= *delta,
            SplitCriterion::CategorySubset { subset, .. } => subset.contains(&code.unwrap()),
        }
    }
}

/// How a child fit ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChildStatus {
    Fitted,
    Pure,
    Failed,
}

/// What to do with a candidate split that produces a pure child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurePolicy {
    /// Pure child contributes deviance 0; the split stays eligible.
    Keep,
    /// The candidate is discarded.
    Skip,
}

/// One scored candidate split.
#[derive(Debug, Clone)]
pub struct SplitEvaluation {
    pub criterion: SplitCriterion,
    /// Sum of child deviances; infinite when either side failed.
    pub total_deviance: f64,
    pub left_status: ChildStatus,
    pub right_status: ChildStatus,
}

impl SplitEvaluation {
    pub fn is_valid(&self) -> bool {
        self.left_status != ChildStatus::Failed && self.right_status != ChildStatus::Failed
    }
}

/// Minimum rows per child: enough to fit the node models stably.
pub fn min_node_size(n_regressors: usize) -> usize {
    30.max(5 * (n_regressors + 1))
}

/// Enumerate candidate split criteria for the chosen variable.
///
/// Numeric: deduplicated i/M quantile thresholds, excluding the node minimum
/// and anything ≥ the node maximum (either would leave a child empty).
/// Ordinal: prefixes of the natural category order. Nominal: prefixes after
/// sorting categories by success proportion Q_j (ties by category id).
/// A constant variable yields an empty list.
pub fn candidate_splits(node: &NodeView, variable: usize, m: usize) -> Vec<SplitCriterion> {
    let col = &node.data.columns[variable];
    if col.role.is_categorical() {
        let codes = node.categorical_codes(variable);
        let y = node.response();
        // Per observed category: count and successes, in code order.
        let mut stats: Vec<(u32, f64, f64)> = Vec::new();
        for (&c, &yi) in codes.iter().zip(&y) {
            match stats.binary_search_by_key(&c, |s| s.0) {
                Ok(i) => {
                    stats[i].1 += 1.0;
                    stats[i].2 += f64::from(yi);
                }
                Err(i) => stats.insert(i, (c, 1.0, f64::from(yi))),
            }
        }
        if stats.len() < 2 {
            return Vec::new();
        }
        let order: Vec<u32> = if col.role.ordered {
            stats.iter().map(|s| s.0).collect()
        } else {
            let mut by_q = stats.clone();
            // Stable sort: Q_j ties keep category-id order.
            by_q.sort_by(|a, b| (a.2 / a.1).partial_cmp(&(b.2 / b.1)).unwrap());
            by_q.iter().map(|s| s.0).collect()
        };
        let mut subset = BTreeSet::new();
        order[..order.len() - 1]
            .iter()
            .map(|&c| {
                subset.insert(c);
                SplitCriterion::CategorySubset { variable, subset: subset.clone() }
            })
            .collect()
    } else {
        let mut sorted = node.numeric_column(variable);
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
        let mut deltas: Vec<f64> = (1..m)
            .map(|i| quantile(&sorted, i as f64 / m as f64))
            .filter(|&d| d > min && d < max)
            .collect();
        deltas.dedup();
        deltas
            .into_iter()
            .map(|delta| SplitCriterion::NumericThreshold { variable, delta })
            .collect()
    }
}

/// Deviance of the node-model option fitted on one child, or `None` when
/// the fit does not converge.
fn child_deviance<R: Rng>(
    child: &NodeView,
    option: SelectionOption,
    rng: &mut R,
    opts: &GlmOptions,
) -> Option<f64> {
    match option {
        SelectionOption::Simple => match best_simple_regressor(child, opts) {
            BestSimpleOutcome::Found(best) => Some(best.deviance),
            _ => None,
        },
        SelectionOption::Multiple { alpha, cv_folds } => {
            let regressors = child.data.regressor_candidates();
            let y = child.response();
            if regressors.is_empty() {
                return glm::fit_irls(&[], &y, opts).ok().map(|f| f.deviance);
            }
            let x_cols = child.design_matrix(&regressors);
            glm::cv_select_lambda(&x_cols, &y, alpha, cv_folds, rng, opts)
                .ok()
                .map(|(_, f)| f.deviance)
        }
    }
}

/// Score one candidate: partition the node, enforce the size floor, fit the
/// option in both children, and sum the deviances.
pub fn evaluate_split<R: Rng>(
    node: &NodeView,
    criterion: SplitCriterion,
    option: SelectionOption,
    pure_policy: PurePolicy,
    min_size: usize,
    rng: &mut R,
    opts: &GlmOptions,
) -> SplitEvaluation {
    let variable = criterion.variable();
    let is_cat = node.data.columns[variable].role.is_categorical();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &row in &node.rows {
        let goes_left = if is_cat {
            let (codes, _) = node.data.columns[variable].categorical().unwrap();
            criterion.routes_left(None, Some(codes[row]))
        } else {
            let v = node.data.columns[variable].numeric().unwrap()[row];
            criterion.routes_left(Some(v), None)
        };
        if goes_left {
            left.push(row);
        } else {
            right.push(row);
        }
    }
    debug_assert_eq!(left.len() + right.len(), node.n());

    let failed = |criterion| SplitEvaluation {
        criterion,
        total_deviance: f64::INFINITY,
        left_status: ChildStatus::Failed,
        right_status: ChildStatus::Failed,
    };
    if left.len() < min_size || right.len() < min_size {
        return failed(criterion);
    }

    let mut total = 0.0;
    let mut statuses = [ChildStatus::Fitted; 2];
    for (slot, rows) in [left, right].into_iter().enumerate() {
        let child = node.subset(rows);
        if child.is_pure() {
            match pure_policy {
                PurePolicy::Keep => statuses[slot] = ChildStatus::Pure, // deviance 0
                PurePolicy::Skip => return failed(criterion),
            }
        } else {
            match child_deviance(&child, option, rng, opts) {
                Some(d) => total += d,
                None => return failed(criterion),
            }
        }
    }
    SplitEvaluation {
        criterion,
        total_deviance: total,
        left_status: statuses[0],
        right_status: statuses[1],
    }
}

/// Evaluate every candidate for the variable and return the valid one with
/// the smallest total deviance (ties to the earliest candidate), or `None`
/// when no candidate survives.
#[allow(clippy::too_many_arguments)]
pub fn best_split<R: Rng>(
    node: &NodeView,
    variable: usize,
    option: SelectionOption,
    m: usize,
    pure_policy: PurePolicy,
    min_size: usize,
    rng: &mut R,
    opts: &GlmOptions,
) -> Option<SplitEvaluation> {
    let mut best: Option<SplitEvaluation> = None;
    for criterion in candidate_splits(node, variable, m) {
        let eval = evaluate_split(node, criterion, option, pure_policy, min_size, rng, opts);
        if eval.is_valid()
            && best.as_ref().is_none_or(|b| eval.total_deviance < b.total_deviance)
        {
            best = Some(eval);
        }
    }
    best
}
