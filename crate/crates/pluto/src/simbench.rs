//! Simulation bench: the nine benchmark models and the split-variable
//! selection experiment.
//!
//! Five independent predictors (four numeric, one categorical) are drawn
//! from fixed laws and the response is Bernoulli with a model-specific
//! logit. Running root-level split-variable selection over many generated
//! datasets estimates the probability that each variable is chosen, which
//! is the yardstick for selection bias: under the Null model every variable
//! should be picked about one time in five.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{
    calibrate_gamma, select_split_variable_calibrated, NodeModel, SelectionOption,
};
use crate::data::{Column, ColumnValues, Dataset, RoleKind, VariableRole};
use crate::glm::{sigmoid, GlmOptions};
use crate::rng::{derive_rng, derive_seed};

/// The nine benchmark logit models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    Null,
    Jump,
    Int,
    Quadratic,
    Cubic,
    Linear,
    LinQuad,
    LinLin,
    LinLinQuad,
}

impl SimModel {
    pub const ALL: [SimModel; 9] = [
        SimModel::Null,
        SimModel::Jump,
        SimModel::Int,
        SimModel::Quadratic,
        SimModel::Cubic,
        SimModel::Linear,
        SimModel::LinQuad,
        SimModel::LinLin,
        SimModel::LinLinQuad,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SimModel::Null => "null",
            SimModel::Jump => "jump",
            SimModel::Int => "int",
            SimModel::Quadratic => "quadratic",
            SimModel::Cubic => "cubic",
            SimModel::Linear => "linear",
            SimModel::LinQuad => "linquad",
            SimModel::LinLin => "linlin",
            SimModel::LinLinQuad => "linlinquad",
        }
    }

    /// logit(p) as a function of (x₁, …, x₅); x₅ enters no model.
    pub fn logit(&self, x: &[f64; 5]) -> f64 {
        let (x1, x2, x3) = (x[0], x[1], x[2]);
        match self {
            SimModel::Null => 0.0,
            SimModel::Jump => 1.0 + 0.7 * f64::from(x1 > 0.0),
            SimModel::Int => {
                (0.5 - 0.5 * x3) * f64::from(x1 > 0.0)
                    + (-0.5 + 0.5 * x3) * f64::from(x1 < 0.0)
            }
            SimModel::Quadratic => 1.0 + 0.08 * x1 * x1,
            SimModel::Cubic => 1.0 + 0.02 * x1 * x1 * x1,
            SimModel::Linear => 1.0 + 0.8 * x2,
            SimModel::LinQuad => -1.5 + x2 + x3 * x3,
            SimModel::LinLin => -1.0 + x2 + x3,
            SimModel::LinLinQuad => 1.0 - 0.1 * x1 * x1 + x2 + x3,
        }
    }
}

impl std::str::FromStr for SimModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SimModel::ALL
            .into_iter()
            .find(|m| m.name() == s.to_lowercase())
            .ok_or_else(|| format!("unknown simulation model {s:?}"))
    }
}

/// Values of the two discrete predictors.
const X1_LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];
const X5_LABELS: [&str; 4] = ["-2", "-1", "1", "2"];

/// Generate one dataset of the given model: X₁ Uniform{−3,−1,1,3},
/// X₂ Exp(1), X₃ N(0,1), X₄ an equal mixture of N(0,1) and N(1,1),
/// X₅ categorical Uniform{−2,−1,1,2}, y ~ Bernoulli(σ(logit)).
pub fn gen_dataset<R: Rng>(model: SimModel, n: usize, rng: &mut R) -> Dataset {
    let exp1 = Exp::new(1.0).unwrap();
    let mut cols: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
    let mut x5_codes = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = X1_LEVELS[rng.random_range(0..4)];
        let x2: f64 = exp1.sample(rng);
        let x3: f64 = StandardNormal.sample(rng);
        let z: f64 = StandardNormal.sample(rng);
        let x4 = if rng.random::<bool>() { z } else { z + 1.0 };
        let x5 = rng.random_range(0..4u32);
        let p = sigmoid(model.logit(&[x1, x2, x3, x4, 0.0]));
        y.push(u8::from(rng.random::<f64>() < p));
        cols[0].push(x1);
        cols[1].push(x2);
        cols[2].push(x3);
        cols[3].push(x4);
        x5_codes.push(x5);
    }
    let mut columns: Vec<Column> = cols
        .into_iter()
        .enumerate()
        .map(|(i, values)| Column {
            name: format!("x{}", i + 1),
            role: VariableRole::new(RoleKind::NumericBoth),
            values: ColumnValues::Numeric(values),
        })
        .collect();
    columns.push(Column {
        name: "x5".into(),
        role: VariableRole::new(RoleKind::CategoricalSplit),
        values: ColumnValues::Categorical {
            codes: x5_codes,
            labels: X5_LABELS.iter().map(|s| s.to_string()).collect(),
        },
    });
    Dataset { columns, n_rows: n, response: y, response_name: "y".into() }
}

/// Empirical split-variable selection frequencies over many iterations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionTable {
    pub model: String,
    pub option: String,
    pub bias_corrected: bool,
    pub iterations: usize,
    pub n_per_iter: usize,
    /// (variable, frequency, binomial SE), one row per predictor.
    pub frequencies: Vec<(String, f64, f64)>,
    /// Fraction of iterations whose node model failed outright.
    pub failure_rate: f64,
    /// Simple option only: how often each numeric variable was the best
    /// simple regressor.
    pub regressor_frequencies: Option<Vec<(String, f64)>>,
    /// Bias-corrected runs only: the γ* drawn in each iteration.
    pub gamma_stars: Vec<f64>,
}

/// Knobs for [`selection_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub iterations: usize,
    pub n_per_iter: usize,
    pub m_groups: usize,
    pub bias_correct: bool,
    pub calib_reps: usize,
    pub calib_grid: (f64, f64, usize),
    pub seed: u64,
    pub glm: GlmOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            iterations: 1000,
            n_per_iter: 500,
            m_groups: 5,
            bias_correct: false,
            calib_reps: 100,
            calib_grid: (1.0, 2.0, 1000),
            seed: 0,
            glm: GlmOptions::default(),
        }
    }
}

/// Run root-level split-variable selection on freshly generated datasets
/// and tally which variable wins. Iterations whose node model fails land in
/// a failure bucket instead of aborting the experiment.
pub fn selection_experiment(
    model: SimModel,
    option: SelectionOption,
    cfg: &ExperimentConfig,
) -> SelectionTable {
    #[derive(Clone)]
    enum Outcome {
        Selected { variable: usize, regressor: Option<usize>, gamma: Option<f64> },
        Failed,
    }

    let outcomes: Vec<Outcome> = (0..cfg.iterations as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(cfg.seed, i);
            let data = gen_dataset(model, cfg.n_per_iter, &mut rng);
            let gamma = if cfg.bias_correct {
                Some(
                    calibrate_gamma(
                        &data,
                        option,
                        cfg.calib_reps,
                        cfg.calib_grid,
                        cfg.m_groups,
                        derive_seed(cfg.seed, i | (1 << 41)),
                        &cfg.glm,
                    )
                    .gamma_star,
                )
            } else {
                None
            };
            let node = data.all_rows();
            match select_split_variable_calibrated(
                &node,
                option,
                gamma.unwrap_or(1.0),
                cfg.m_groups,
                &mut rng,
                &cfg.glm,
            ) {
                Ok(sel) => {
                    let regressor = match &sel.model {
                        NodeModel::Simple(b) => {
                            (b.regressor != usize::MAX).then_some(b.regressor)
                        }
                        NodeModel::Multiple(_) => None,
                    };
                    Outcome::Selected { variable: sel.variable, regressor, gamma }
                }
                Err(_) => Outcome::Failed,
            }
        })
        .collect();

    let iters = cfg.iterations as f64;
    let names = ["x1", "x2", "x3", "x4", "x5"];
    let mut counts = [0usize; 5];
    let mut reg_counts = [0usize; 4];
    let mut failures = 0usize;
    let mut gamma_stars = Vec::new();
    for o in &outcomes {
        match o {
            Outcome::Selected { variable, regressor, gamma } => {
                counts[*variable] += 1;
                if let Some(r) = regressor {
                    reg_counts[*r] += 1;
                }
                if let Some(g) = gamma {
                    gamma_stars.push(*g);
                }
            }
            Outcome::Failed => failures += 1,
        }
    }
    let frequencies = names
        .iter()
        .zip(counts)
        .map(|(name, c)| {
            let p = c as f64 / iters;
            (name.to_string(), p, (p * (1.0 - p) / iters).sqrt())
        })
        .collect();
    let regressor_frequencies = matches!(option, SelectionOption::Simple).then(|| {
        names[..4]
            .iter()
            .zip(reg_counts)
            .map(|(name, c)| (name.to_string(), c as f64 / iters))
            .collect()
    });
    SelectionTable {
        model: model.name().to_string(),
        option: match option {
            SelectionOption::Simple => "simple".to_string(),
            SelectionOption::Multiple { .. } => "multiple".to_string(),
        },
        bias_corrected: cfg.bias_correct,
        iterations: cfg.iterations,
        n_per_iter: cfg.n_per_iter,
        frequencies,
        failure_rate: failures as f64 / iters,
        regressor_frequencies,
        gamma_stars,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn null_model_mean_response_is_half() {
        let mut rng = derive_rng(61, 0);
        let ds = gen_dataset(SimModel::Null, 100_000, &mut rng);
        let mean = ds.response.iter().map(|&v| f64::from(v)).sum::<f64>() / 100_000.0;
        assert_abs_diff_eq!(mean, 0.5, epsilon = 0.005);
    }

    #[test]
    fn jump_model_conditional_means() {
        let mut rng = derive_rng(62, 0);
        let ds = gen_dataset(SimModel::Jump, 100_000, &mut rng);
        let x1 = ds.columns[0].numeric().unwrap();
        let mut pos = (0.0, 0.0);
        let mut neg = (0.0, 0.0);
        for (i, &v) in x1.iter().enumerate() {
            let t = if v > 0.0 { &mut pos } else { &mut neg };
            t.0 += f64::from(ds.response[i]);
            t.1 += 1.0;
        }
        assert_abs_diff_eq!(pos.0 / pos.1, sigmoid(1.7), epsilon = 0.01);
        assert_abs_diff_eq!(neg.0 / neg.1, sigmoid(1.0), epsilon = 0.01);
    }

    #[test]
    fn predictor_supports_match_their_laws() {
        let mut rng = derive_rng(63, 0);
        let ds = gen_dataset(SimModel::Null, 5000, &mut rng);
        for &v in ds.columns[0].numeric().unwrap() {
            assert!(X1_LEVELS.contains(&v));
        }
        assert!(ds.columns[1].numeric().unwrap().iter().all(|&v| v >= 0.0));
        let (codes, labels) = ds.columns[4].categorical().unwrap();
        assert_eq!(labels, X5_LABELS);
        assert!(codes.iter().all(|&c| c < 4));
        // All four x1 levels and x5 codes occur.
        for level in X1_LEVELS {
            assert!(ds.columns[0].numeric().unwrap().contains(&level));
        }
    }

    #[test]
    fn logit_formulas_match_by_direct_evaluation() {
        let x = [2.0, 1.5, -0.5, 0.3, 0.0];
        assert_eq!(SimModel::Null.logit(&x), 0.0);
        assert_abs_diff_eq!(SimModel::Jump.logit(&x), 1.7);
        assert_abs_diff_eq!(SimModel::Int.logit(&x), 0.5 - 0.5 * -0.5);
        assert_abs_diff_eq!(SimModel::Quadratic.logit(&x), 1.0 + 0.08 * 4.0);
        assert_abs_diff_eq!(SimModel::Cubic.logit(&x), 1.0 + 0.02 * 8.0);
        assert_abs_diff_eq!(SimModel::Linear.logit(&x), 1.0 + 0.8 * 1.5);
        assert_abs_diff_eq!(SimModel::LinQuad.logit(&x), -1.5 + 1.5 + 0.25);
        assert_abs_diff_eq!(SimModel::LinLin.logit(&x), -1.0 + 1.5 - 0.5);
        assert_abs_diff_eq!(SimModel::LinLinQuad.logit(&x), 1.0 - 0.4 + 1.5 - 0.5);
        let neg = [-1.0, 0.0, 1.0, 0.0, 0.0];
        assert_abs_diff_eq!(SimModel::Int.logit(&neg), -0.5 + 0.5);
    }

    #[test]
    fn frequencies_and_failures_sum_to_one() {
        let cfg = ExperimentConfig {
            iterations: 40,
            n_per_iter: 200,
            seed: 64,
            ..Default::default()
        };
        let table = selection_experiment(SimModel::Null, SelectionOption::Simple, &cfg);
        let total: f64 =
            table.frequencies.iter().map(|&(_, p, _)| p).sum::<f64>() + table.failure_rate;
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        // Binomial SE formula.
        for &(_, p, se) in &table.frequencies {
            assert_abs_diff_eq!(se, (p * (1.0 - p) / 40.0).sqrt(), epsilon = 1e-12);
        }
        assert!(table.regressor_frequencies.is_some());
    }

    #[test]
    fn experiment_is_seed_deterministic() {
        let cfg = ExperimentConfig {
            iterations: 25,
            n_per_iter: 150,
            seed: 65,
            ..Default::default()
        };
        let t1 = selection_experiment(SimModel::Linear, SelectionOption::Simple, &cfg);
        let t2 = selection_experiment(SimModel::Linear, SelectionOption::Simple, &cfg);
        assert_eq!(t1.frequencies, t2.frequencies);
        assert_eq!(t1.failure_rate, t2.failure_rate);
    }

    #[test]
    fn quadratic_model_prefers_x1() {
        let cfg = ExperimentConfig {
            iterations: 60,
            n_per_iter: 300,
            seed: 66,
            ..Default::default()
        };
        let table = selection_experiment(SimModel::Quadratic, SelectionOption::Simple, &cfg);
        let x1_freq = table.frequencies[0].1;
        assert!(x1_freq > 0.5, "x1 frequency {x1_freq}");
    }

    #[test]
    fn se_block_reference_value() {
        // At p̂ = 0.20 with 1000 iterations the binomial SE is ≈ 0.013.
        assert_abs_diff_eq!((0.2f64 * 0.8 / 1000.0).sqrt(), 0.0126, epsilon = 5e-4);
    }
}
