//! Bootstrap calibration of split-variable selection.
//!
//! Even with lack-of-fit tests instead of exhaustive search, selection is
//! biased toward categorical variables: numeric variables double as node
//! regressors, so their expected frequencies correlate with the observed
//! ones. The fix estimates a multiplier γ* on a null dataset obtained by
//! bootstrap-resampling the response alone, choosing γ* so that the
//! frequency of picking a numeric variable equals its share of the
//! candidate pool. At selection time, p-values become z-values via
//! z = Φ⁻¹(1 − p/2) and the numeric z-values are inflated by γ*.

use rand::Rng;
use rayon::prelude::*;

use crate::data::{Dataset, NodeView};
use crate::glm::{FittedGlm, GlmOptions};
use crate::rng::derive_rng;
use crate::split::special::inv_norm_cdf;
use crate::split::{
    split_tests_multiple, split_tests_simple, BestSimple, SelectionFailure, SplitTestResult,
};

/// Smallest p-value distinguished by the z transform; smaller values saturate.
const P_FLOOR: f64 = 1e-300;

/// Which node-model option drives selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionOption {
    /// Best simple linear logistic regressor.
    Simple,
    /// Cross-validated elastic-net multiple regression.
    Multiple { alpha: f64, cv_folds: usize },
}

/// Node model produced as a by-product of split-variable selection.
#[derive(Debug, Clone)]
pub enum NodeModel {
    Simple(BestSimple),
    Multiple(FittedGlm),
}

/// A selected split variable together with the fitted node model and the
/// per-candidate test results that drove the choice.
#[derive(Debug, Clone)]
pub struct Selection {
    pub variable: usize,
    pub model: NodeModel,
    pub tests: Vec<SplitTestResult>,
}

/// Outcome of one calibration run.
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    /// Multiplier applied to numeric z-values; ≥ 1.
    pub gamma_star: f64,
    /// Empirical numeric-selection frequency at each grid value of γ.
    pub pi_curve: Vec<(f64, f64)>,
    /// Bootstrap replications actually used.
    pub reps: usize,
    /// (lo, hi, steps) of the γ grid searched.
    pub grid: (f64, f64, usize),
}

/// z = Φ⁻¹(1 − p/2). Strictly decreasing in p, zero at p = 1; p below
/// 1e-300 saturates at that floor (z ≈ 37.1).
pub fn p_to_z(p: f64) -> f64 {
    assert!(p >= 0.0, "p must be non-negative, got {p}");
    let p = p.clamp(P_FLOOR, 1.0);
    // Φ⁻¹(1 − p/2) = −Φ⁻¹(p/2); the right-hand form stays accurate for tiny p.
    -inv_norm_cdf(p / 2.0)
}

fn z_from_test(t: &SplitTestResult) -> f64 {
    p_to_z(t.ln_p.exp())
}

/// Run the uncalibrated selection machinery for the given option, returning
/// the node model and the per-candidate tests.
pub fn node_tests<R: Rng>(
    node: &NodeView,
    option: SelectionOption,
    m: usize,
    rng: &mut R,
    opts: &GlmOptions,
) -> Result<(NodeModel, Vec<SplitTestResult>), SelectionFailure> {
    match option {
        SelectionOption::Simple => {
            let (best, tests) = split_tests_simple(node, m, opts)?;
            Ok((NodeModel::Simple(best), tests))
        }
        SelectionOption::Multiple { alpha, cv_folds } => {
            let (model, tests) = split_tests_multiple(node, alpha, cv_folds, m, rng, opts)?;
            Ok((NodeModel::Multiple(model), tests))
        }
    }
}

/// Estimate the bias-correction multiplier γ* from `reps` bootstrap
/// replicates in which the response is resampled with replacement,
/// severing any predictor-response association. Replicates whose resampled
/// response is pure (or whose node model fails) are redrawn.
pub fn calibrate_gamma(
    data: &Dataset,
    option: SelectionOption,
    reps: usize,
    grid: (f64, f64, usize),
    m: usize,
    seed: u64,
    opts: &GlmOptions,
) -> CalibrationResult {
    let (lo, hi, steps) = grid;
    assert!(reps >= 1 && steps >= 2 && lo >= 1.0 && hi > lo);
    let candidates = data.split_candidates();
    let a = candidates
        .iter()
        .filter(|&&c| data.columns[c].role.is_categorical())
        .count();
    let b = candidates.len() - a;

    let grid_values: Vec<f64> = (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect();

    if a == 0 || b == 0 {
        // Single variable class: nothing to calibrate.
        let target = if a == 0 { 1.0 } else { 0.0 };
        return CalibrationResult {
            gamma_star: 1.0,
            pi_curve: grid_values.into_iter().map(|g| (g, target)).collect(),
            reps,
            grid,
        };
    }

    // Per replicate, the numeric option wins iff γ·z_n ≥ z_c, i.e. iff
    // γ ≥ z_c/z_n; one threshold per replicate summarizes the whole grid.
    let thresholds: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = derive_rng(seed, j);
            loop {
                let y_star: Vec<u8> = (0..data.n_rows)
                    .map(|_| data.response[rng.random_range(0..data.n_rows)])
                    .collect();
                if y_star.iter().all(|&v| v == y_star[0]) {
                    continue;
                }
                let resampled = data.with_response(y_star);
                let node = resampled.all_rows();
                match node_tests(&node, option, m, &mut rng, opts) {
                    Ok((_, tests)) => {
                        let mut z_n = 0.0f64;
                        let mut z_c = 0.0f64;
                        for t in &tests {
                            let z = z_from_test(t);
                            if resampled.columns[t.variable].role.is_categorical() {
                                z_c = z_c.max(z);
                            } else {
                                z_n = z_n.max(z);
                            }
                        }
                        // z_n = 0 with z_c > 0 never picks numeric: +inf threshold.
                        return if z_n > 0.0 { z_c / z_n } else if z_c == 0.0 { 0.0 } else { f64::INFINITY };
                    }
                    Err(_) => continue,
                }
            }
        })
        .collect();

    let pi_curve: Vec<(f64, f64)> = grid_values
        .iter()
        .map(|&g| {
            let wins = thresholds.iter().filter(|&&t| g >= t).count();
            (g, wins as f64 / reps as f64)
        })
        .collect();
    debug_assert!(pi_curve.windows(2).all(|w| w[0].1 <= w[1].1));

    let target = b as f64 / (a + b) as f64;
    let gamma_star = interpolate_gamma(&pi_curve, target);

    CalibrationResult { gamma_star, pi_curve, reps, grid }
}

/// Smallest γ with π(γ) = target by linear interpolation on the grid;
/// clamped to the grid ends when the target is already met (or never met).
fn interpolate_gamma(pi_curve: &[(f64, f64)], target: f64) -> f64 {
    let (g0, p0) = pi_curve[0];
    if p0 >= target {
        return g0;
    }
    for w in pi_curve.windows(2) {
        let (ga, pa) = w[0];
        let (gb, pb) = w[1];
        if pb >= target {
            if pb > pa {
                return ga + (target - pa) * (gb - ga) / (pb - pa);
            }
            return gb;
        }
    }
    pi_curve.last().unwrap().0
}

/// Split-variable selection with calibrated z-values: run the uncalibrated
/// machinery, convert p-values to z, inflate numeric z by γ*, and take the
/// argmax (ties break to the lowest schema index). γ* = 1 reproduces the
/// uncalibrated choice exactly.
pub fn select_split_variable_calibrated<R: Rng>(
    node: &NodeView,
    option: SelectionOption,
    gamma_star: f64,
    m: usize,
    rng: &mut R,
    opts: &GlmOptions,
) -> Result<Selection, SelectionFailure> {
    assert!(gamma_star >= 1.0);
    let (model, tests) = node_tests(node, option, m, rng, opts)?;
    let best = tests
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut z = z_from_test(t);
            if !node.data.columns[t.variable].role.is_categorical() {
                z *= gamma_star;
            }
            (i, z)
        })
        .max_by(|(ia, za), (ib, zb)| {
            za.partial_cmp(zb).unwrap().then(ib.cmp(ia)) // prefer lower index on ties
        })
        .map(|(i, _)| i)
        .ok_or(SelectionFailure::NodeFailed)?;
    Ok(Selection { variable: tests[best].variable, model, tests })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, ColumnValues, RoleKind, VariableRole};
    use crate::rng::derive_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn p_to_z_known_values() {
        assert_abs_diff_eq!(p_to_z(1.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p_to_z(0.05), 1.9600, epsilon = 5e-4);
        assert_abs_diff_eq!(p_to_z(0.3173), 1.0000, epsilon = 5e-4);
        // Saturation below the floor.
        assert_eq!(p_to_z(0.0), p_to_z(1e-300));
        assert!(p_to_z(1e-300) > 37.0);
        // Strictly decreasing.
        assert!(p_to_z(0.01) > p_to_z(0.02));
    }

    fn mixed_dataset(seed: u64, n: usize) -> Dataset {
        let mut rng = derive_rng(seed, 1000);
        let x1: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let codes: Vec<u32> = (0..n).map(|_| rng.random_range(0..4u32)).collect();
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        Dataset {
            columns: vec![
                Column {
                    name: "x1".into(),
                    role: VariableRole::new(RoleKind::NumericBoth),
                    values: ColumnValues::Numeric(x1),
                },
                Column {
                    name: "x2".into(),
                    role: VariableRole::new(RoleKind::NumericBoth),
                    values: ColumnValues::Numeric(x2),
                },
                Column {
                    name: "c".into(),
                    role: VariableRole::new(RoleKind::CategoricalSplit),
                    values: ColumnValues::Categorical {
                        codes,
                        labels: vec!["a".into(), "b".into(), "c".into(), "d".into()],
                    },
                },
            ],
            n_rows: n,
            response: y,
            response_name: "y".into(),
        }
    }

    #[test]
    fn pi_curve_is_non_decreasing_and_gamma_in_grid() {
        let ds = mixed_dataset(7, 150);
        let res = calibrate_gamma(
            &ds,
            SelectionOption::Simple,
            30,
            (1.0, 2.0, 101),
            5,
            7,
            &GlmOptions::default(),
        );
        assert!(res.pi_curve.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!((1.0..=2.0).contains(&res.gamma_star));
    }

    #[test]
    fn calibration_is_seed_deterministic() {
        let ds = mixed_dataset(8, 120);
        let opts = GlmOptions::default();
        let r1 = calibrate_gamma(&ds, SelectionOption::Simple, 20, (1.0, 2.0, 51), 5, 9, &opts);
        let r2 = calibrate_gamma(&ds, SelectionOption::Simple, 20, (1.0, 2.0, 51), 5, 9, &opts);
        assert_eq!(r1.gamma_star, r2.gamma_star);
        assert_eq!(r1.pi_curve, r2.pi_curve);
    }

    #[test]
    fn all_numeric_candidates_give_gamma_one() {
        let mut ds = mixed_dataset(9, 80);
        ds.columns.retain(|c| !c.role.is_categorical());
        let res = calibrate_gamma(
            &ds,
            SelectionOption::Simple,
            10,
            (1.0, 2.0, 11),
            5,
            9,
            &GlmOptions::default(),
        );
        assert_eq!(res.gamma_star, 1.0);
    }

    #[test]
    fn gamma_one_matches_uncalibrated_argmin() {
        let ds = mixed_dataset(10, 200);
        let opts = GlmOptions::default();
        let node = ds.all_rows();
        let mut rng = derive_rng(10, 0);
        let cal = select_split_variable_calibrated(
            &node,
            SelectionOption::Simple,
            1.0,
            5,
            &mut rng,
            &opts,
        )
        .unwrap();
        let unc = crate::split::select_split_variable_simple(&node, 5, &opts).unwrap();
        assert_eq!(cal.variable, unc.variable);
    }

    #[test]
    fn large_gamma_flips_choice_to_numeric() {
        // Build a node where the categorical candidate has the smallest
        // p-value but a γ* near the grid top overturns it.
        let ds = mixed_dataset(11, 200);
        let opts = GlmOptions::default();
        let node = ds.all_rows();
        let mut rng = derive_rng(11, 0);
        let (_, tests) =
            node_tests(&node, SelectionOption::Simple, 5, &mut rng, &opts).unwrap();
        let z: Vec<(usize, f64)> =
            tests.iter().map(|t| (t.variable, z_from_test(t))).collect();
        let z_cat = z.iter().find(|(v, _)| ds.columns[*v].role.is_categorical()).unwrap().1;
        let z_num = z
            .iter()
            .filter(|(v, _)| !ds.columns[*v].role.is_categorical())
            .map(|&(_, z)| z)
            .fold(0.0f64, f64::max);
        if z_cat > z_num && z_num > 0.0 {
            let gamma = (z_cat / z_num) * 1.01;
            let mut rng = derive_rng(11, 1);
            let sel = select_split_variable_calibrated(
                &node,
                SelectionOption::Simple,
                gamma,
                5,
                &mut rng,
                &opts,
            )
            .unwrap();
            assert!(!ds.columns[sel.variable].role.is_categorical());
        }
    }

    #[test]
    fn interpolation_hits_target_between_grid_points() {
        let curve = vec![(1.0, 0.0), (1.5, 0.4), (2.0, 0.8)];
        // target 0.6 lies halfway between π(1.5) = 0.4 and π(2.0) = 0.8.
        assert_abs_diff_eq!(interpolate_gamma(&curve, 0.6), 1.75, epsilon = 1e-12);
        // Already met at the left end.
        assert_eq!(interpolate_gamma(&curve, 0.0), 1.0);
        // Never met: clamp to grid top.
        assert_eq!(interpolate_gamma(&curve, 0.95), 2.0);
    }
}
