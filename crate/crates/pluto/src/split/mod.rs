//! Split-variable selection.
//!
//! At each node a logistic model is fitted first (best simple regressor, or
//! an elastic-net multiple model tuned by cross-validation), then every
//! split candidate is scored by an adjusted chi-squared lack-of-fit test:
//! observed class counts per candidate group are compared against expected
//! counts obtained by summing the node model's fitted probabilities. The
//! candidate with the smallest p-value becomes the split variable. This
//! avoids the selection bias of exhaustive impurity search toward variables
//! that allow more splits.

pub mod special;

use rand::Rng;

use crate::data::{discretize, quantile_cutpoints, NodeView};
use crate::glm::{self, FittedGlm, GlmError, GlmOptions};
use special::{chi2_sf, ln_chi2_sf};

/// Denominator floor for near-empty expected cells.
const EXPECTED_FLOOR: f64 = 1e-8;

/// Result of one adjusted chi-squared lack-of-fit test.
#[derive(Debug, Clone)]
pub struct SplitTestResult {
    /// Column index of the tested split candidate.
    pub variable: usize,
    pub chi2: f64,
    pub df: usize,
    /// Upper-tail p-value; may underflow to 0 for extreme statistics.
    pub p_value: f64,
    /// Natural log of the p-value; always finite, used for comparisons.
    pub ln_p: f64,
    /// Number of non-empty table columns actually realized.
    pub realized_columns: usize,
}

/// Best simple linear logistic regression model over the regressor candidates.
#[derive(Debug, Clone)]
pub struct BestSimple {
    /// Column index of the winning regressor.
    pub regressor: usize,
    pub model: FittedGlm,
    pub deviance: f64,
}

/// Outcome of the best-simple-regressor search.
#[derive(Debug, Clone)]
pub enum BestSimpleOutcome {
    Found(BestSimple),
    /// The node response is constant; keep it as a pure classification node.
    PureNode,
    /// Every candidate fit failed to converge; the caller deletes the node
    /// and its sibling and turns the parent into a terminal node.
    AllFailed,
}

/// Why a node-level selection could not produce a split variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionFailure {
    PureNode,
    /// Node model failed (all simple fits diverged, or the penalized
    /// multiple fit did not converge).
    NodeFailed,
}

/// Search all regressor candidates for the simple model with the smallest
/// deviance. Non-convergent fits count as infinite deviance.
pub fn best_simple_regressor(node: &NodeView, opts: &GlmOptions) -> BestSimpleOutcome {
    if node.is_pure() {
        return BestSimpleOutcome::PureNode;
    }
    let y = node.response();
    let candidates = node.data.regressor_candidates();
    let mut best: Option<BestSimple> = None;
    // Intercept-only fallback when no regressor candidates exist.
    if candidates.is_empty() {
        return match glm::fit_irls(&[], &y, opts) {
            Ok(model) => {
                let deviance = model.deviance;
                BestSimpleOutcome::Found(BestSimple { regressor: usize::MAX, model, deviance })
            }
            Err(_) => BestSimpleOutcome::AllFailed,
        };
    }
    for &col in &candidates {
        let x = node.numeric_column(col);
        // A non-convergent fit has deviance infinity and is never the argmin.
        if let Ok(model) = glm::fit_irls(&[x], &y, opts) {
            let deviance = model.deviance;
            if best.as_ref().is_none_or(|b| deviance < b.deviance) {
                best = Some(BestSimple { regressor: col, model, deviance });
            }
        }
    }
    match best {
        Some(b) => BestSimpleOutcome::Found(b),
        None => BestSimpleOutcome::AllFailed,
    }
}

/// Adjusted chi-squared lack-of-fit test of one split candidate against the
/// node model's fitted probabilities.
///
/// Categorical candidates give a 2 x C table (df = C - 1); numeric candidates
/// are quantile-grouped into at most M intervals (df = G - 1, or G - 2 when
/// the candidate is the fitted regressor of a simple node model). Degrees of
/// freedom use realized group counts, not nominal M.
pub fn adjusted_chi2(
    node: &NodeView,
    variable: usize,
    fitted_probs: &[f64],
    is_fitted_regressor: bool,
    m: usize,
) -> SplitTestResult {
    debug_assert_eq!(fitted_probs.len(), node.n());
    let y = node.response();
    let is_categorical = node.data.columns[variable].role.is_categorical();

    let groups: Vec<usize> = if is_categorical {
        node.categorical_codes(variable).iter().map(|&c| c as usize).collect()
    } else {
        let values = node.numeric_column(variable);
        let cuts = quantile_cutpoints(&values, m, variable);
        discretize(&values, &cuts)
    };
    let n_groups = groups.iter().copied().max().map_or(0, |g| g + 1);

    // Aggregate per non-empty column: observed successes and expected successes.
    let mut n_c = vec![0.0f64; n_groups];
    let mut obs1 = vec![0.0f64; n_groups];
    let mut exp1 = vec![0.0f64; n_groups];
    for i in 0..node.n() {
        let g = groups[i];
        n_c[g] += 1.0;
        obs1[g] += f64::from(y[i]);
        exp1[g] += fitted_probs[i];
    }
    let realized: Vec<usize> = (0..n_groups).filter(|&g| n_c[g] > 0.0).collect();
    let realized_columns = realized.len();

    if realized_columns < 2 {
        // Constant variable in the node: never selected.
        return SplitTestResult {
            variable,
            chi2: 0.0,
            df: 1,
            p_value: 1.0,
            ln_p: 0.0,
            realized_columns,
        };
    }

    let mut chi2 = 0.0;
    for &g in &realized {
        let e1 = exp1[g];
        let e0 = n_c[g] - exp1[g];
        let o1 = obs1[g];
        let o0 = n_c[g] - obs1[g];
        chi2 += (o1 - e1) * (o1 - e1) / e1.max(EXPECTED_FLOOR);
        chi2 += (o0 - e0) * (o0 - e0) / e0.max(EXPECTED_FLOOR);
    }

    let mut df = realized_columns - 1;
    if !is_categorical && is_fitted_regressor {
        df = df.saturating_sub(1);
    }
    let df = df.max(1);

    SplitTestResult {
        variable,
        chi2,
        df,
        p_value: chi2_sf(chi2, df),
        ln_p: ln_chi2_sf(chi2, df),
        realized_columns,
    }
}

/// Argmin p-value in log space; ties break to the lowest column index
/// (tests are produced in schema order).
fn argmin_p(tests: &[SplitTestResult]) -> Option<usize> {
    tests
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.ln_p.partial_cmp(&b.ln_p).unwrap())
        .map(|(i, _)| i)
}

/// Split-variable selection with the simple linear logistic option.
#[derive(Debug, Clone)]
pub struct SimpleSelection {
    pub variable: usize,
    pub best: BestSimple,
    pub tests: Vec<SplitTestResult>,
}

/// Run the best-simple search, then the adjusted chi-squared test for every
/// split candidate using the fitted probabilities of the winning simple model.
pub fn split_tests_simple(
    node: &NodeView,
    m: usize,
    opts: &GlmOptions,
) -> Result<(BestSimple, Vec<SplitTestResult>), SelectionFailure> {
    let best = match best_simple_regressor(node, opts) {
        BestSimpleOutcome::Found(b) => b,
        BestSimpleOutcome::PureNode => return Err(SelectionFailure::PureNode),
        BestSimpleOutcome::AllFailed => return Err(SelectionFailure::NodeFailed),
    };
    let probs: Vec<f64> = if best.regressor == usize::MAX {
        (0..node.n()).map(|_| glm::predict_prob(&best.model, &[])).collect()
    } else {
        let x = node.numeric_column(best.regressor);
        x.iter().map(|&v| glm::predict_prob(&best.model, &[v])).collect()
    };
    let tests = node
        .data
        .split_candidates()
        .into_iter()
        .map(|col| adjusted_chi2(node, col, &probs, col == best.regressor, m))
        .collect();
    Ok((best, tests))
}

pub fn select_split_variable_simple(
    node: &NodeView,
    m: usize,
    opts: &GlmOptions,
) -> Result<SimpleSelection, SelectionFailure> {
    let (best, tests) = split_tests_simple(node, m, opts)?;
    let idx = argmin_p(&tests).ok_or(SelectionFailure::NodeFailed)?;
    Ok(SimpleSelection { variable: tests[idx].variable, best, tests })
}

/// Split-variable selection with the penalized multiple option.
#[derive(Debug, Clone)]
pub struct MultipleSelection {
    pub variable: usize,
    pub model: FittedGlm,
    pub tests: Vec<SplitTestResult>,
}

/// Fit the cross-validated elastic-net model on all regressor candidates,
/// then test every split candidate. df is C - 1 / M - 1 regardless of which
/// regressors the penalized model kept.
pub fn split_tests_multiple<R: Rng>(
    node: &NodeView,
    alpha: f64,
    cv_folds: usize,
    m: usize,
    rng: &mut R,
    opts: &GlmOptions,
) -> Result<(FittedGlm, Vec<SplitTestResult>), SelectionFailure> {
    if node.is_pure() {
        return Err(SelectionFailure::PureNode);
    }
    let y = node.response();
    let regressors = node.data.regressor_candidates();
    let x_cols = node.design_matrix(&regressors);
    let model = if regressors.is_empty() {
        glm::fit_irls(&[], &y, opts).map_err(|_| SelectionFailure::NodeFailed)?
    } else {
        match glm::cv_select_lambda(&x_cols, &y, alpha, cv_folds, rng, opts) {
            Ok((_, fit)) => fit,
            Err(GlmError::NonConvergence { .. })
            | Err(GlmError::SingleClass)
            | Err(GlmError::InfeasibleFolds { .. }) => return Err(SelectionFailure::NodeFailed),
        }
    };
    let probs: Vec<f64> = (0..node.n())
        .map(|i| {
            let row: Vec<f64> = x_cols.iter().map(|c| c[i]).collect();
            glm::predict_prob(&model, &row)
        })
        .collect();
    let tests = node
        .data
        .split_candidates()
        .into_iter()
        .map(|col| adjusted_chi2(node, col, &probs, false, m))
        .collect();
    Ok((model, tests))
}

pub fn select_split_variable_multiple<R: Rng>(
    node: &NodeView,
    alpha: f64,
    cv_folds: usize,
    m: usize,
    rng: &mut R,
    opts: &GlmOptions,
) -> Result<MultipleSelection, SelectionFailure> {
    let (model, tests) = split_tests_multiple(node, alpha, cv_folds, m, rng, opts)?;
    let idx = argmin_p(&tests).ok_or(SelectionFailure::NodeFailed)?;
    Ok(MultipleSelection { variable: tests[idx].variable, model, tests })
}

/// Classical Pearson chi-squared test of independence on a 2 x C table of
/// counts. Expected counts come from the margins; zero-total columns are
/// dropped. Used for validation and pedagogy, not in the splitting path.
pub fn pearson_chi2_independence(successes: &[f64], failures: &[f64]) -> (f64, usize, f64) {
    assert_eq!(successes.len(), failures.len());
    let cols: Vec<(f64, f64)> = successes
        .iter()
        .zip(failures)
        .map(|(&s, &f)| (s, f))
        .filter(|&(s, f)| s + f > 0.0)
        .collect();
    assert!(cols.len() >= 2, "need at least two non-empty columns");
    let total: f64 = cols.iter().map(|&(s, f)| s + f).sum();
    let row1: f64 = cols.iter().map(|&(s, _)| s).sum();
    let p1 = row1 / total;
    let mut chi2 = 0.0;
    for &(s, f) in &cols {
        let n_c = s + f;
        let e1 = n_c * p1;
        let e0 = n_c * (1.0 - p1);
        chi2 += (s - e1) * (s - e1) / e1 + (f - e0) * (f - e0) / e0;
    }
    let df = cols.len() - 1;
    (chi2, df, chi2_sf(chi2, df))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, ColumnValues, Dataset, RoleKind, VariableRole};
    use crate::rng::derive_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn dataset(
        numeric: Vec<(&str, RoleKind, Vec<f64>)>,
        categorical: Vec<(&str, Vec<u32>, Vec<&str>)>,
        y: Vec<u8>,
    ) -> Dataset {
        let n = y.len();
        let mut columns = Vec::new();
        for (name, kind, values) in numeric {
            assert_eq!(values.len(), n);
            columns.push(Column {
                name: name.to_string(),
                role: VariableRole::new(kind),
                values: ColumnValues::Numeric(values),
            });
        }
        for (name, codes, labels) in categorical {
            assert_eq!(codes.len(), n);
            columns.push(Column {
                name: name.to_string(),
                role: VariableRole::new(RoleKind::CategoricalSplit),
                values: ColumnValues::Categorical {
                    codes,
                    labels: labels.into_iter().map(String::from).collect(),
                },
            });
        }
        Dataset { columns, n_rows: n, response: y, response_name: "y".into() }
    }

    #[test]
    fn pure_node_detected() {
        let ds = dataset(
            vec![("x", RoleKind::NumericBoth, vec![1.0, 2.0, 3.0])],
            vec![],
            vec![1, 1, 1],
        );
        assert!(matches!(
            best_simple_regressor(&ds.all_rows(), &GlmOptions::default()),
            BestSimpleOutcome::PureNode
        ));
    }

    #[test]
    fn separating_candidate_loses_to_informative_one() {
        // x_sep perfectly separates (non-convergent fit, deviance = inf);
        // x_inf is informative but imperfect, so it must win.
        let mut rng = derive_rng(101, 0);
        let n = 60;
        let x_inf: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<u8> = x_inf
            .iter()
            .map(|&v| u8::from(rng.random::<f64>() < glm::sigmoid(1.5 * v)))
            .collect();
        let x_sep: Vec<f64> = y.iter().map(|&yi| f64::from(yi) * 2.0 - 1.0).collect();
        let ds = dataset(
            vec![
                ("x_sep", RoleKind::NumericBoth, x_sep),
                ("x_inf", RoleKind::NumericBoth, x_inf),
            ],
            vec![],
            y,
        );
        match best_simple_regressor(&ds.all_rows(), &GlmOptions::default()) {
            BestSimpleOutcome::Found(best) => assert_eq!(best.regressor, 1),
            other => panic!("expected Found, got {other:?}"),
        }
    }

    #[test]
    fn informative_regressor_beats_decoy() {
        let mut rng = derive_rng(102, 0);
        let n = 500;
        let x_a: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let x_b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let y: Vec<u8> = x_a
            .iter()
            .map(|&v| u8::from(rng.random::<f64>() < glm::sigmoid(1.5 * v)))
            .collect();
        let ds = dataset(
            vec![
                ("x_a", RoleKind::NumericBoth, x_a.clone()),
                ("x_b", RoleKind::NumericBoth, x_b.clone()),
            ],
            vec![],
            y.clone(),
        );
        let best = match best_simple_regressor(&ds.all_rows(), &GlmOptions::default()) {
            BestSimpleOutcome::Found(b) => b,
            other => panic!("{other:?}"),
        };
        assert_eq!(best.regressor, 0);
        // Independent check: deviances match direct IRLS refits.
        let da = glm::fit_irls(&[x_a], &y, &GlmOptions::default()).unwrap().deviance;
        let db = glm::fit_irls(&[x_b], &y, &GlmOptions::default()).unwrap().deviance;
        assert!(da < db);
        assert_abs_diff_eq!(best.deviance, da, epsilon = 1e-9);
    }

    #[test]
    fn perfect_fit_gives_p_one() {
        // Fitted probs exactly reproduce per-column success rates.
        let ds = dataset(
            vec![],
            vec![("c", vec![0, 0, 0, 0, 1, 1, 1, 1], vec!["a", "b"])],
            vec![1, 1, 0, 0, 1, 0, 0, 0],
        );
        let probs = vec![0.5, 0.5, 0.5, 0.5, 0.25, 0.25, 0.25, 0.25];
        let t = adjusted_chi2(&ds.all_rows(), 0, &probs, false, 5);
        assert_abs_diff_eq!(t.chi2, 0.0, epsilon = 1e-12);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn categorical_df_is_c_minus_one() {
        let codes = vec![0u32, 1, 2, 3, 0, 1, 2, 3];
        let ds = dataset(
            vec![],
            vec![("c", codes, vec!["a", "b", "c", "d"])],
            vec![1, 0, 1, 0, 0, 1, 0, 1],
        );
        let probs = vec![0.5; 8];
        let t = adjusted_chi2(&ds.all_rows(), 0, &probs, false, 5);
        assert_eq!(t.df, 3);
    }

    #[test]
    fn hand_computed_two_by_two() {
        // Columns: (3 successes, 1 failure) and (1 success, 3 failures),
        // constant fitted probability 0.5 -> expected 2 in every cell,
        // chi2 = 4 * (1)^2 / 2 = 2.
        let ds = dataset(
            vec![],
            vec![("c", vec![0, 0, 0, 0, 1, 1, 1, 1], vec!["a", "b"])],
            vec![1, 1, 1, 0, 1, 0, 0, 0],
        );
        let probs = vec![0.5; 8];
        let t = adjusted_chi2(&ds.all_rows(), 0, &probs, false, 5);
        assert_abs_diff_eq!(t.chi2, 2.0, epsilon = 1e-12);
        assert_eq!(t.df, 1);
    }

    #[test]
    fn constant_variable_never_selected() {
        let ds = dataset(
            vec![("x", RoleKind::NumericSplitOnly, vec![3.0; 6])],
            vec![],
            vec![1, 0, 1, 0, 1, 0],
        );
        let t = adjusted_chi2(&ds.all_rows(), 0, &[0.5; 6], false, 5);
        assert_eq!(t.p_value, 1.0);
        assert!(t.realized_columns < 2);
    }

    #[test]
    fn expected_counts_sum_to_column_totals() {
        let mut rng = derive_rng(103, 0);
        let n = 200;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        let probs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ds = dataset(vec![("x", RoleKind::NumericBoth, x)], vec![], y);
        // chi2 finite and df in range; the per-column identity
        // e1 + e0 = n_c holds by construction (e0 computed as n_c - e1).
        let t = adjusted_chi2(&ds.all_rows(), 0, &probs, false, 5);
        assert!(t.chi2.is_finite());
        assert!(t.df <= 4);
    }

    #[test]
    fn single_candidate_always_selected() {
        let mut rng = derive_rng(104, 0);
        let n = 80;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let ds = dataset(vec![("x", RoleKind::NumericBoth, x)], vec![], y);
        let sel =
            select_split_variable_simple(&ds.all_rows(), 5, &GlmOptions::default()).unwrap();
        assert_eq!(sel.variable, 0);
        assert_eq!(sel.tests.len(), 1);
    }

    #[test]
    fn multiple_option_pure_node() {
        let ds = dataset(
            vec![("x", RoleKind::NumericBoth, vec![1.0, 2.0])],
            vec![],
            vec![0, 0],
        );
        let mut rng = derive_rng(105, 0);
        let r = select_split_variable_multiple(
            &ds.all_rows(),
            1.0,
            10,
            5,
            &mut rng,
            &GlmOptions::default(),
        );
        assert_eq!(r.unwrap_err(), SelectionFailure::PureNode);
    }

    #[test]
    fn pearson_left_table_of_reference_example() {
        let (chi2, df, p) =
            pearson_chi2_independence(&[42.0, 28.0, 24.0, 32.0], &[28.0, 53.0, 57.0, 36.0]);
        assert_eq!(df, 3);
        assert!((chi2 - 16.950).abs() < 0.01, "chi2 = {chi2}");
        assert!((p - 0.0007).abs() < 5e-5, "p = {p}");
    }

    #[test]
    fn pearson_right_table_of_reference_example() {
        let (chi2, _, p) =
            pearson_chi2_independence(&[27.0, 39.0, 46.0, 54.0], &[43.0, 42.0, 35.0, 14.0]);
        assert!((chi2 - 25.670).abs() < 0.01, "chi2 = {chi2}");
        assert!(p < 1e-4);
    }

    #[test]
    fn pearson_proportional_columns_give_zero() {
        let (chi2, _, p) = pearson_chi2_independence(&[10.0, 20.0, 30.0], &[5.0, 10.0, 15.0]);
        assert_abs_diff_eq!(chi2, 0.0, epsilon = 1e-12);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn chi2_invariant_under_column_permutation() {
        let ds1 = dataset(
            vec![],
            vec![("c", vec![0, 0, 1, 1, 2, 2], vec!["a", "b", "c"])],
            vec![1, 0, 1, 1, 0, 0],
        );
        let ds2 = dataset(
            vec![],
            vec![("c", vec![2, 2, 0, 0, 1, 1], vec!["c", "a", "b"])],
            vec![1, 0, 1, 1, 0, 0],
        );
        let probs = vec![0.4, 0.6, 0.5, 0.5, 0.3, 0.7];
        let t1 = adjusted_chi2(&ds1.all_rows(), 0, &probs, false, 5);
        let t2 = adjusted_chi2(&ds2.all_rows(), 0, &probs, false, 5);
        assert_abs_diff_eq!(t1.chi2, t2.chi2, epsilon = 1e-12);
        assert_eq!(t1.df, t2.df);
    }
}
