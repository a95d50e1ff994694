//! Permutation-based variable importance over a fitted tree.
//!
//! Each predictor column of the testing dataset is resampled with
//! replacement (breaking its link with the response while preserving its
//! marginal), the tree is rescored, and the degradation of each accuracy
//! measure is recorded. Variables are ranked per measure by degradation
//! magnitude; the final ranking averages the per-measure ranks. Several
//! resampling repetitions are averaged to tame the noise of a single pass.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnValues, Dataset};
use crate::metrics::{self, ScoreReport};
use crate::rng::derive_rng;
use crate::tree::{Tree, TreeError};

/// Importance figures for one variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableImportance {
    pub name: String,
    /// Signed mean change (updated − original) per measure; positive DEV′
    /// and MER changes and negative AUROC changes mean degradation.
    pub delta_dev_trimmed: f64,
    pub delta_mer: f64,
    pub delta_auroc: Option<f64>,
    /// Per-measure fractional ranks (1 = most important).
    pub rank_dev_trimmed: f64,
    pub rank_mer: f64,
    pub rank_auroc: Option<f64>,
    pub mean_rank: f64,
    /// Fractional rank of the mean ranks; ties share the mean rank.
    pub final_rank: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub baseline: ScoreReport,
    pub reps: usize,
    /// With-replacement resampling (the default) vs pure permutation.
    pub with_replacement: bool,
    pub variables: Vec<VariableImportance>,
}

/// Fractional ranks of `scores`, rank 1 for the largest; exact ties share
/// the mean of the ranks they span.
fn fractional_ranks(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        let mean_rank = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = mean_rank;
        }
        i = j;
    }
    ranks
}

fn resample_column<R: Rng>(col: &mut ColumnValues, original: &ColumnValues, with_replacement: bool, rng: &mut R) {
    match (col, original) {
        (ColumnValues::Numeric(v), ColumnValues::Numeric(orig)) => {
            if with_replacement {
                for slot in v.iter_mut() {
                    *slot = orig[rng.random_range(0..orig.len())];
                }
            } else {
                v.copy_from_slice(orig);
                v.shuffle(rng);
            }
        }
        (
            ColumnValues::Categorical { codes, .. },
            ColumnValues::Categorical { codes: orig, .. },
        ) => {
            if with_replacement {
                for slot in codes.iter_mut() {
                    *slot = orig[rng.random_range(0..orig.len())];
                }
            } else {
                codes.copy_from_slice(orig);
                codes.shuffle(rng);
            }
        }
        _ => unreachable!("column type cannot change"),
    }
}

/// Rank every predictor column of `data` by how much resampling it degrades
/// the tree's accuracy on that data. AUROC is dropped from the ranking when
/// the test response is single-class.
pub fn rank_importance(
    tree: &Tree,
    data: &Dataset,
    reps: usize,
    with_replacement: bool,
    trim_frac: f64,
    seed: u64,
) -> Result<ImportanceReport, TreeError> {
    assert!(reps >= 1);
    let baseline_preds = tree.predict(data)?;
    let baseline = metrics::score(&data.response, &baseline_preds, trim_frac, 0.5);
    let use_auroc = baseline.auroc.is_some();

    let variables: Vec<usize> = (0..data.columns.len()).collect();
    let mut deltas: Vec<(f64, f64, f64)> = Vec::with_capacity(variables.len());
    for (vi, &col) in variables.iter().enumerate() {
        let mut working = data.clone();
        let mut sum = (0.0, 0.0, 0.0);
        for rep in 0..reps {
            let mut rng = derive_rng(seed, (vi as u64) << 20 | rep as u64);
            resample_column(
                &mut working.columns[col].values,
                &data.columns[col].values,
                with_replacement,
                &mut rng,
            );
            let preds = tree.predict(&working)?;
            let s = metrics::score(&data.response, &preds, trim_frac, 0.5);
            sum.0 += s.dev_trimmed - baseline.dev_trimmed;
            sum.1 += s.mer - baseline.mer;
            if use_auroc {
                sum.2 += s.auroc.unwrap() - baseline.auroc.unwrap();
            }
        }
        let r = reps as f64;
        deltas.push((sum.0 / r, sum.1 / r, sum.2 / r));
    }

    let rank_dev = fractional_ranks(&deltas.iter().map(|d| d.0.abs()).collect::<Vec<_>>());
    let rank_mer = fractional_ranks(&deltas.iter().map(|d| d.1.abs()).collect::<Vec<_>>());
    let rank_auroc =
        use_auroc.then(|| fractional_ranks(&deltas.iter().map(|d| d.2.abs()).collect::<Vec<_>>()));
    let mean_ranks: Vec<f64> = (0..variables.len())
        .map(|i| {
            let mut total = rank_dev[i] + rank_mer[i];
            let mut count = 2.0;
            if let Some(ra) = &rank_auroc {
                total += ra[i];
                count += 1.0;
            }
            total / count
        })
        .collect();
    // Final rank: smallest mean rank is most important (rank 1).
    let final_ranks = fractional_ranks(&mean_ranks.iter().map(|&m| -m).collect::<Vec<_>>());

    let vars = variables
        .iter()
        .enumerate()
        .map(|(i, &col)| VariableImportance {
            name: data.columns[col].name.clone(),
            delta_dev_trimmed: deltas[i].0,
            delta_mer: deltas[i].1,
            delta_auroc: use_auroc.then_some(deltas[i].2),
            rank_dev_trimmed: rank_dev[i],
            rank_mer: rank_mer[i],
            rank_auroc: rank_auroc.as_ref().map(|r| r[i]),
            mean_rank: mean_ranks[i],
            final_rank: final_ranks[i],
        })
        .collect();
    Ok(ImportanceReport { baseline, reps, with_replacement, variables: vars })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, RoleKind, VariableRole};
    use crate::tree::{grow, GrowConfig};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    /// y driven by x1 through a jump; x2 is pure noise and never used.
    fn two_var_dataset(seed: u64, n: usize) -> Dataset {
        let mut rng = derive_rng(seed, 50);
        let x1: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<u8> = x1
            .iter()
            .map(|&v| {
                let eta = if v > 0.0 { 2.0 } else { -2.0 };
                u8::from(rng.random::<f64>() < crate::glm::sigmoid(eta))
            })
            .collect();
        Dataset {
            columns: vec![
                Column {
                    name: "x1".into(),
                    role: VariableRole::new(RoleKind::NumericSplitOnly),
                    values: ColumnValues::Numeric(x1),
                },
                Column {
                    name: "x2".into(),
                    role: VariableRole::new(RoleKind::NumericSplitOnly),
                    values: ColumnValues::Numeric(x2),
                },
            ],
            n_rows: n,
            response: y,
            response_name: "y".into(),
        }
    }

    #[test]
    fn unused_variable_has_zero_degradation() {
        let ds = two_var_dataset(41, 500);
        let tree = grow(&ds, &GrowConfig { max_depth: 2, ..Default::default() }).unwrap();
        // Confirm x2 is unused by any split.
        assert!(tree.nodes.values().all(|n| n
            .split
            .as_ref()
            .is_none_or(|s| s.variable() == 0)));
        let report = rank_importance(&tree, &ds, 5, true, 0.01, 42).unwrap();
        let x2 = report.variables.iter().find(|v| v.name == "x2").unwrap();
        assert_eq!(x2.delta_dev_trimmed, 0.0);
        assert_eq!(x2.delta_mer, 0.0);
        let x1 = report.variables.iter().find(|v| v.name == "x1").unwrap();
        assert!(x1.delta_dev_trimmed.abs() > x2.delta_dev_trimmed.abs());
        assert!(x1.final_rank < x2.final_rank);
    }

    #[test]
    fn final_ranks_are_a_permutation_up_to_ties() {
        let ds = two_var_dataset(43, 400);
        let tree = grow(&ds, &GrowConfig { max_depth: 2, ..Default::default() }).unwrap();
        let report = rank_importance(&tree, &ds, 3, true, 0.01, 7).unwrap();
        let k = report.variables.len() as f64;
        let sum: f64 = report.variables.iter().map(|v| v.final_rank).sum();
        assert_abs_diff_eq!(sum, k * (k + 1.0) / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn report_is_seed_deterministic() {
        let ds = two_var_dataset(44, 300);
        let tree = grow(&ds, &GrowConfig { max_depth: 2, ..Default::default() }).unwrap();
        let r1 = rank_importance(&tree, &ds, 4, true, 0.01, 9).unwrap();
        let r2 = rank_importance(&tree, &ds, 4, true, 0.01, 9).unwrap();
        for (a, b) in r1.variables.iter().zip(&r2.variables) {
            assert_eq!(a.delta_dev_trimmed, b.delta_dev_trimmed);
            assert_eq!(a.final_rank, b.final_rank);
        }
    }

    #[test]
    fn baseline_matches_direct_scoring() {
        let ds = two_var_dataset(45, 300);
        let tree = grow(&ds, &GrowConfig { max_depth: 2, ..Default::default() }).unwrap();
        let report = rank_importance(&tree, &ds, 2, true, 0.01, 11).unwrap();
        let preds = tree.predict(&ds).unwrap();
        let direct = metrics::score(&ds.response, &preds, 0.01, 0.5);
        assert_eq!(report.baseline.dev, direct.dev);
        assert_eq!(report.baseline.mer, direct.mer);
        assert_eq!(report.baseline.auroc, direct.auroc);
    }

    #[test]
    fn single_class_test_set_drops_auroc() {
        let ds = two_var_dataset(46, 300);
        let tree = grow(&ds, &GrowConfig { max_depth: 2, ..Default::default() }).unwrap();
        let mut test = ds.clone();
        test.response = vec![1; test.n_rows];
        let report = rank_importance(&tree, &test, 2, true, 0.01, 13).unwrap();
        assert!(report.baseline.auroc.is_none());
        assert!(report.variables.iter().all(|v| v.delta_auroc.is_none()));
        // Ranks still form a valid permutation from the remaining measures.
        let k = report.variables.len() as f64;
        let sum: f64 = report.variables.iter().map(|v| v.final_rank).sum();
        assert_abs_diff_eq!(sum, k * (k + 1.0) / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn fractional_ranks_share_mean_on_ties() {
        let r = fractional_ranks(&[5.0, 1.0, 5.0, 0.0]);
        assert_eq!(r, vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn without_replacement_preserves_marginal() {
        let ds = two_var_dataset(47, 200);
        let mut working = ds.clone();
        let mut rng = derive_rng(47, 99);
        resample_column(
            &mut working.columns[0].values,
            &ds.columns[0].values,
            false,
            &mut rng,
        );
        let mut a = working.columns[0].numeric().unwrap().to_vec();
        let mut b = ds.columns[0].numeric().unwrap().to_vec();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);
        assert_ne!(working.columns[0].numeric().unwrap(), ds.columns[0].numeric().unwrap());
    }
}
