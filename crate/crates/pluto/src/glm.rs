//! Logistic regression solvers.
//!
//! Two fitting routes share the same IRLS quadratic approximation of the
//! Bernoulli log-likelihood:
//!
//! - [`fit_irls`]: unpenalized maximum likelihood by Newton/IRLS with step
//!   halving on deviance increase.
//! - [`fit_elastic_net`]: elastic-net penalized fitting by cyclical
//!   coordinate descent on the weighted least-squares subproblem, run inside
//!   an outer IRLS loop, with internal standardization of the regressors.
//!
//! The penalized objective minimized here is
//!
//! ```text
//! f(b0, b) = -(1/N) * loglik(b0, b) + lambda * [ (1-alpha)/2 ||b||_2^2 + alpha ||b||_1 ]
//! ```
//!
//! on standardized regressors, with the intercept never penalized.
//! Coefficients are reported back on the original scale.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Elastic-net mixing weight and penalty strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    /// Mixing weight in [0, 1]; 1 = lasso, 0 = ridge.
    pub alpha: f64,
    /// Non-negative penalty strength.
    pub lambda: f64,
}

impl PenaltySpec {
    pub fn new(alpha: f64, lambda: f64) -> Self {
        assert!((0.0..=1.0).contains(&alpha), "alpha must be in [0,1]");
        assert!(lambda >= 0.0, "lambda must be non-negative");
        PenaltySpec { alpha, lambda }
    }
}

/// Per-column centering and scaling used internally by the penalized solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// A fitted logistic regression node model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedGlm {
    pub intercept: f64,
    /// Slopes on the original (unstandardized) scale, one per regressor column.
    pub coefficients: Vec<f64>,
    pub penalty: Option<PenaltySpec>,
    /// -2 * (loglik - saturated loglik); the saturated loglik is 0 for binary y.
    pub deviance: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub standardization: Option<Standardization>,
}

impl FittedGlm {
    /// Linear predictor for one row of regressor values.
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coefficients.len());
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

#[derive(Debug, Error)]
pub enum GlmError {
    /// The fit did not converge (e.g. complete separation); carries the best
    /// iterate so callers can still inspect or score it.
    #[error("model did not converge after {n_iter} iterations")]
    NonConvergence { best: Box<FittedGlm>, n_iter: usize },
    /// The response is constant; no logistic MLE exists.
    #[error("response is single-class; cannot fit a logistic model")]
    SingleClass,
    /// Cross-validation cannot produce two-class folds.
    #[error("too few observations of the minority class for {k}-fold cross-validation")]
    InfeasibleFolds { k: usize },
}

/// Solver tolerances and iteration caps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlmOptions {
    pub max_irls_iter: usize,
    /// Convergence: max-norm of the log-likelihood gradient.
    pub tol_grad: f64,
    /// Outer-loop convergence for the penalized solver: max coefficient change.
    pub tol_coef: f64,
    /// Inner coordinate-descent convergence: max weighted update.
    pub tol_cd: f64,
    /// IRLS weights are clamped below at this floor.
    pub weight_floor: f64,
    pub max_halvings: usize,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    /// Linear predictors beyond this magnitude signal a degenerate
    /// (separated) fit and are reported as non-convergence.
    pub eta_guard: f64,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions {
            max_irls_iter: 100,
            tol_grad: 1e-8,
            tol_coef: 1e-8,
            tol_cd: 1e-9,
            weight_floor: 1e-5,
            max_halvings: 10,
            n_lambda: 100,
            lambda_min_ratio: 1e-4,
            eta_guard: 30.0,
        }
    }
}

/// Numerically stable sigmoid.
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(eta)) without overflow.
fn log1p_exp(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Bernoulli log-likelihood at linear predictors `eta`.
pub fn log_likelihood(eta: &[f64], y: &[u8]) -> f64 {
    eta.iter().zip(y).map(|(&e, &yi)| f64::from(yi) * e - log1p_exp(e)).sum()
}

/// Deviance = -2 * loglik for binary y.
pub fn deviance_from_eta(eta: &[f64], y: &[u8]) -> f64 {
    -2.0 * log_likelihood(eta, y)
}

/// sign(z) * max(|z| - t, 0).
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Overflow-safe fitted probability for one row, strictly inside (0, 1).
pub fn predict_prob(model: &FittedGlm, x: &[f64]) -> f64 {
    sigmoid(model.linear_predictor(x)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn mean(y: &[u8]) -> f64 {
    y.iter().map(|&v| f64::from(v)).sum::<f64>() / y.len() as f64
}

fn compute_eta(x_cols: &[Vec<f64>], intercept: f64, coefs: &[f64], out: &mut [f64]) {
    out.fill(intercept);
    for (col, &b) in x_cols.iter().zip(coefs) {
        if b != 0.0 {
            for (e, &v) in out.iter_mut().zip(col) {
                *e += b * v;
            }
        }
    }
}

/// Gradient of the log-likelihood w.r.t. (intercept, slopes).
fn gradient(x_cols: &[Vec<f64>], y: &[u8], eta: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut resid = vec![0.0; n];
    for i in 0..n {
        resid[i] = f64::from(y[i]) - sigmoid(eta[i]);
    }
    let mut g = Vec::with_capacity(x_cols.len() + 1);
    g.push(resid.iter().sum());
    for col in x_cols {
        g.push(col.iter().zip(&resid).map(|(x, r)| x * r).sum());
    }
    g
}

/// Unpenalized logistic regression by IRLS (Newton-Raphson on the quadratic
/// approximation), with step halving to enforce monotone deviance decrease.
///
/// `x_cols` is column-major: one `Vec<f64>` of length N per regressor. Pass
/// an empty slice for an intercept-only model.
pub fn fit_irls(x_cols: &[Vec<f64>], y: &[u8], opts: &GlmOptions) -> Result<FittedGlm, GlmError> {
    let n = y.len();
    assert!(n > 0);
    for col in x_cols {
        assert_eq!(col.len(), n, "regressor column length mismatch");
    }
    let ybar = mean(y);
    if ybar == 0.0 || ybar == 1.0 {
        return Err(GlmError::SingleClass);
    }
    let k = x_cols.len();
    let p = k + 1;

    let mut beta = vec![0.0; p];
    beta[0] = (ybar / (1.0 - ybar)).ln();
    let mut eta = vec![0.0; n];
    compute_eta(x_cols, beta[0], &beta[1..], &mut eta);
    let mut dev = deviance_from_eta(&eta, y);

    let mut n_iter = 0;
    let mut converged = false;
    while n_iter < opts.max_irls_iter {
        n_iter += 1;

        // Weighted least-squares Newton step on the working response.
        let mut a = DMatrix::<f64>::zeros(p, p);
        let mut b = DVector::<f64>::zeros(p);
        for i in 0..n {
            let pi = sigmoid(eta[i]);
            let w = (pi * (1.0 - pi)).max(opts.weight_floor);
            let v = eta[i] + (f64::from(y[i]) - pi) / w;
            let mut xi = vec![1.0; 1];
            xi.extend(x_cols.iter().map(|c| c[i]));
            for r in 0..p {
                b[r] += w * xi[r] * v;
                for c in r..p {
                    a[(r, c)] += w * xi[r] * xi[c];
                }
            }
        }
        for r in 0..p {
            for c in 0..r {
                a[(r, c)] = a[(c, r)];
            }
        }
        let solution = a
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&b))
            .or_else(|| a.lu().solve(&b));
        let new_beta = match solution {
            Some(s) => s.iter().copied().collect::<Vec<f64>>(),
            None => {
                return Err(GlmError::NonConvergence {
                    best: Box::new(finish(x_cols, y, &beta, dev, false, n_iter, None, None)),
                    n_iter,
                })
            }
        };

        // Step halving: back off toward the previous iterate until the
        // deviance stops increasing.
        let mut t = 1.0;
        let mut halvings = 0;
        let (cand, cand_dev) = loop {
            let cand: Vec<f64> =
                beta.iter().zip(&new_beta).map(|(o, nw)| o + t * (nw - o)).collect();
            compute_eta(x_cols, cand[0], &cand[1..], &mut eta);
            let cand_dev = deviance_from_eta(&eta, y);
            if cand_dev <= dev + 1e-12 || halvings >= opts.max_halvings {
                break (cand, cand_dev);
            }
            t *= 0.5;
            halvings += 1;
        };
        if cand_dev > dev + 1e-12 {
            compute_eta(x_cols, beta[0], &beta[1..], &mut eta);
            return Err(GlmError::NonConvergence {
                best: Box::new(finish(x_cols, y, &beta, dev, false, n_iter, None, None)),
                n_iter,
            });
        }
        let max_change = beta
            .iter()
            .zip(&cand)
            .map(|(o, nw)| (o - nw).abs())
            .fold(0.0f64, f64::max);
        beta = cand;
        dev = cand_dev;

        let grad_inf = gradient(x_cols, y, &eta).iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_inf <= opts.tol_grad {
            converged = true;
            break;
        }
        if max_change < 1e-14 {
            break; // stagnated short of the gradient tolerance
        }
    }

    let eta_max = eta.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if !converged || eta_max > opts.eta_guard {
        let best = finish(x_cols, y, &beta, dev, false, n_iter, None, None);
        return Err(GlmError::NonConvergence { best: Box::new(best), n_iter });
    }
    Ok(finish(x_cols, y, &beta, dev, true, n_iter, None, None))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    _x_cols: &[Vec<f64>],
    _y: &[u8],
    beta: &[f64],
    dev: f64,
    converged: bool,
    n_iter: usize,
    penalty: Option<PenaltySpec>,
    standardization: Option<Standardization>,
) -> FittedGlm {
    FittedGlm {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        penalty,
        deviance: dev,
        converged,
        n_iter,
        standardization,
    }
}

/// Center and scale columns to zero mean, unit (population) variance.
/// Constant columns get scale 1 and always keep a zero slope.
pub fn standardize(x_cols: &[Vec<f64>]) -> (Vec<Vec<f64>>, Standardization) {
    let n = x_cols.first().map_or(0, |c| c.len());
    let mut means = Vec::with_capacity(x_cols.len());
    let mut scales = Vec::with_capacity(x_cols.len());
    let mut out = Vec::with_capacity(x_cols.len());
    for col in x_cols {
        let m = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        let s = if var > 0.0 { var.sqrt() } else { 1.0 };
        means.push(m);
        scales.push(s);
        out.push(col.iter().map(|x| (x - m) / s).collect());
    }
    (out, Standardization { mean: means, scale: scales })
}

/// Penalized objective -(1/N) loglik + lambda * P_alpha on standardized slopes.
fn penalized_objective(
    xs: &[Vec<f64>],
    y: &[u8],
    beta0: f64,
    betas: &[f64],
    penalty: PenaltySpec,
) -> f64 {
    let n = y.len();
    let mut eta = vec![0.0; n];
    compute_eta(xs, beta0, betas, &mut eta);
    let l1: f64 = betas.iter().map(|b| b.abs()).sum();
    let l2: f64 = betas.iter().map(|b| b * b).sum();
    -log_likelihood(&eta, y) / n as f64
        + penalty.lambda * ((1.0 - penalty.alpha) * 0.5 * l2 + penalty.alpha * l1)
}

/// Elastic-net penalized logistic regression: outer IRLS loops around inner
/// cyclical coordinate descent on the penalized weighted least-squares
/// problem. Optionally warm-started from `(beta0, betas)` on the
/// standardized scale.
fn fit_elastic_net_std(
    xs: &[Vec<f64>],
    y: &[u8],
    penalty: PenaltySpec,
    warm: Option<(f64, Vec<f64>)>,
    constant_col: &[bool],
    opts: &GlmOptions,
) -> (f64, Vec<f64>, bool, usize) {
    let n = y.len();
    let k = xs.len();
    let nf = n as f64;
    let ybar = mean(y);

    let (mut beta0, mut betas) = warm.unwrap_or_else(|| {
        ((ybar / (1.0 - ybar)).ln(), vec![0.0; k])
    });
    let mut eta = vec![0.0; n];
    compute_eta(xs, beta0, &betas, &mut eta);
    let mut obj = penalized_objective(xs, y, beta0, &betas, penalty);

    let lam_l1 = penalty.lambda * penalty.alpha;
    let lam_l2 = penalty.lambda * (1.0 - penalty.alpha);

    let mut converged = false;
    let mut n_iter = 0;
    let mut w = vec![0.0; n];
    let mut r = vec![0.0; n];
    while n_iter < opts.max_irls_iter {
        n_iter += 1;
        // Working weights and residuals at the current iterate.
        let mut sum_w = 0.0;
        for i in 0..n {
            let p = sigmoid(eta[i]);
            w[i] = (p * (1.0 - p)).max(opts.weight_floor);
            // residual of the working response v_i against the current fit
            r[i] = (f64::from(y[i]) - p) / w[i];
            sum_w += w[i];
        }
        // Per-coordinate denominators for this quadratic approximation.
        let denom: Vec<f64> = xs
            .iter()
            .map(|col| col.iter().zip(&w).map(|(x, wi)| wi * x * x).sum::<f64>() / nf + lam_l2)
            .collect();

        let start0 = beta0;
        let start = betas.clone();

        // Cyclical coordinate descent on the penalized WLS problem.
        for _sweep in 0..1000 {
            let mut max_update = 0.0f64;
            for j in 0..k {
                if constant_col[j] {
                    continue;
                }
                let col = &xs[j];
                let old = betas[j];
                let z = col
                    .iter()
                    .zip(&w)
                    .zip(&r)
                    .map(|((x, wi), ri)| wi * x * ri)
                    .sum::<f64>()
                    / nf
                    + (denom[j] - lam_l2) * old;
                let new = soft_threshold(z, lam_l1) / denom[j];
                if new != old {
                    let d = new - old;
                    for (ri, x) in r.iter_mut().zip(col) {
                        *ri -= d * x;
                    }
                    betas[j] = new;
                    max_update = max_update.max((denom[j] * d * d).abs());
                }
            }
            // Unpenalized intercept update.
            let d0 = w.iter().zip(&r).map(|(wi, ri)| wi * ri).sum::<f64>() / sum_w;
            if d0 != 0.0 {
                beta0 += d0;
                for ri in r.iter_mut() {
                    *ri -= d0;
                }
                max_update = max_update.max((sum_w / nf) * d0 * d0);
            }
            if max_update < opts.tol_cd {
                break;
            }
        }

        // Step halving on the true penalized objective.
        let mut t = 1.0;
        let mut halvings = 0;
        let (b0_new, b_new, obj_new) = loop {
            let b0 = start0 + t * (beta0 - start0);
            let b: Vec<f64> =
                start.iter().zip(&betas).map(|(s, c)| s + t * (c - s)).collect();
            let o = penalized_objective(xs, y, b0, &b, penalty);
            if o <= obj + 1e-14 || halvings >= opts.max_halvings {
                break (b0, b, o);
            }
            t *= 0.5;
            halvings += 1;
        };
        if obj_new > obj + 1e-14 {
            beta0 = start0;
            betas = start;
            compute_eta(xs, beta0, &betas, &mut eta);
            return (beta0, betas, false, n_iter);
        }
        let max_change = b_new
            .iter()
            .zip(&start)
            .map(|(a, b)| (a - b).abs())
            .fold((b0_new - start0).abs(), f64::max);
        beta0 = b0_new;
        betas = b_new;
        obj = obj_new;
        compute_eta(xs, beta0, &betas, &mut eta);
        if max_change < opts.tol_coef {
            converged = true;
            break;
        }
    }
    (beta0, betas, converged, n_iter)
}

fn destandardize(
    beta0: f64,
    betas: &[f64],
    std: &Standardization,
) -> (f64, Vec<f64>) {
    let coefs: Vec<f64> = betas.iter().zip(&std.scale).map(|(b, s)| b / s).collect();
    let intercept =
        beta0 - coefs.iter().zip(&std.mean).map(|(b, m)| b * m).sum::<f64>();
    (intercept, coefs)
}

/// Fit an elastic-net penalized logistic regression. Coefficients are
/// reported on the original scale; the intercept is never penalized.
pub fn fit_elastic_net(
    x_cols: &[Vec<f64>],
    y: &[u8],
    penalty: PenaltySpec,
    opts: &GlmOptions,
) -> Result<FittedGlm, GlmError> {
    let ybar = mean(y);
    if ybar == 0.0 || ybar == 1.0 {
        return Err(GlmError::SingleClass);
    }
    let (xs, std) = standardize(x_cols);
    let constant_col: Vec<bool> = x_cols
        .iter()
        .zip(&std.scale)
        .map(|(col, _)| col.iter().all(|&v| v == col[0]))
        .collect();
    let (b0, bs, converged, n_iter) =
        fit_elastic_net_std(&xs, y, penalty, None, &constant_col, opts);
    let (intercept, coefficients) = destandardize(b0, &bs, &std);
    let n = y.len();
    let mut eta = vec![0.0; n];
    compute_eta(x_cols, intercept, &coefficients, &mut eta);
    let dev = deviance_from_eta(&eta, y);
    let fit = FittedGlm {
        intercept,
        coefficients,
        penalty: Some(penalty),
        deviance: dev,
        converged,
        n_iter,
        standardization: Some(std),
    };
    if converged {
        Ok(fit)
    } else {
        Err(GlmError::NonConvergence { best: Box::new(fit), n_iter })
    }
}

/// Smallest lambda at which all slopes are zero, from the null-model
/// gradient on standardized columns. With `alpha = 0` the true value is
/// infinite; the conventional surrogate computes it as if alpha were 0.001.
pub fn lambda_max(x_cols: &[Vec<f64>], y: &[u8], alpha: f64) -> f64 {
    let (xs, _) = standardize(x_cols);
    let ybar = mean(y);
    let n = y.len() as f64;
    let g_max = xs
        .iter()
        .map(|col| {
            col.iter()
                .zip(y)
                .map(|(x, &yi)| x * (f64::from(yi) - ybar))
                .sum::<f64>()
                .abs()
        })
        .fold(0.0f64, f64::max);
    g_max / (n * alpha.max(0.001))
}

/// Geometric grid of `n_lambda` values from lambda_max down to
/// `lambda_min_ratio * lambda_max`.
pub fn lambda_path(x_cols: &[Vec<f64>], y: &[u8], alpha: f64, opts: &GlmOptions) -> Vec<f64> {
    let lmax = lambda_max(x_cols, y, alpha);
    let n = opts.n_lambda.max(2);
    let log_max = lmax.ln();
    let log_min = (lmax * opts.lambda_min_ratio).ln();
    (0..n)
        .map(|i| (log_max + (log_min - log_max) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Warm-started fits along a decreasing lambda path, on the standardized
/// scale. Returns (beta0, betas, converged) per lambda.
fn fit_path_std(
    xs: &[Vec<f64>],
    y: &[u8],
    alpha: f64,
    lambdas: &[f64],
    constant_col: &[bool],
    opts: &GlmOptions,
) -> Vec<(f64, Vec<f64>, bool)> {
    let mut fits = Vec::with_capacity(lambdas.len());
    let mut warm: Option<(f64, Vec<f64>)> = None;
    for &lam in lambdas {
        let (b0, bs, conv, _) = fit_elastic_net_std(
            xs,
            y,
            PenaltySpec::new(alpha, lam),
            warm.clone(),
            constant_col,
            opts,
        );
        warm = Some((b0, bs.clone()));
        fits.push((b0, bs, conv));
    }
    fits
}

/// Stratified fold assignment: within each response class, rows are
/// shuffled and dealt round-robin, so class balance holds in every fold.
pub fn stratified_folds<R: Rng>(y: &[u8], k: usize, rng: &mut R) -> Vec<usize> {
    let mut assignment = vec![0usize; y.len()];
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> =
            (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(rng);
        for (pos, &i) in idx.iter().enumerate() {
            assignment[i] = pos % k;
        }
    }
    assignment
}

/// Select lambda by k-fold cross-validation, minimizing the total
/// out-of-fold deviance, then refit on all rows at the winner.
pub fn cv_select_lambda<R: Rng>(
    x_cols: &[Vec<f64>],
    y: &[u8],
    alpha: f64,
    k_folds: usize,
    rng: &mut R,
    opts: &GlmOptions,
) -> Result<(f64, FittedGlm), GlmError> {
    assert!(k_folds >= 2);
    let n = y.len();
    assert!(n >= k_folds);
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_min = n_pos.min(n - n_pos);
    if n_min < 2 {
        return Err(if n_min == 0 {
            GlmError::SingleClass
        } else {
            GlmError::InfeasibleFolds { k: k_folds }
        });
    }
    // With stratification, every training part keeps both classes as long
    // as the minority class has at least two members.
    let k_folds = k_folds.min(n_min);
    let folds = stratified_folds(y, k_folds, rng);

    let lambdas = lambda_path(x_cols, y, alpha, opts);
    let (xs_full, std_full) = standardize(x_cols);
    let constant_col: Vec<bool> =
        x_cols.iter().map(|col| col.iter().all(|&v| v == col[0])).collect();

    let mut oof_dev = vec![0.0f64; lambdas.len()];
    for fold in 0..k_folds {
        let train_rows: Vec<usize> = (0..n).filter(|&i| folds[i] != fold).collect();
        let test_rows: Vec<usize> = (0..n).filter(|&i| folds[i] == fold).collect();
        if test_rows.is_empty() {
            continue;
        }
        let xs_train: Vec<Vec<f64>> =
            x_cols.iter().map(|c| train_rows.iter().map(|&i| c[i]).collect()).collect();
        let y_train: Vec<u8> = train_rows.iter().map(|&i| y[i]).collect();
        let (xs_train_std, std_train) = standardize(&xs_train);
        let const_train: Vec<bool> =
            xs_train.iter().map(|col| col.iter().all(|&v| v == col[0])).collect();
        let fits = fit_path_std(&xs_train_std, &y_train, alpha, &lambdas, &const_train, opts);
        for (li, (b0, bs, _)) in fits.iter().enumerate() {
            let (intercept, coefs) = destandardize(*b0, bs, &std_train);
            let mut dev = 0.0;
            for &i in &test_rows {
                let eta = intercept
                    + coefs.iter().enumerate().map(|(j, b)| b * x_cols[j][i]).sum::<f64>();
                let p = sigmoid(eta).clamp(1e-12, 1.0 - 1e-12);
                dev += -2.0
                    * (f64::from(y[i]) * p.ln() + (1.0 - f64::from(y[i])) * (1.0 - p).ln());
            }
            oof_dev[li] += dev;
        }
    }

    // Argmin; ties resolve to the largest lambda (sparser model).
    let mut best = 0;
    for li in 1..lambdas.len() {
        if oof_dev[li] < oof_dev[best] {
            best = li;
        }
    }
    let lambda_star = lambdas[best];

    // Refit on all data, warm-starting along the path down to lambda_star.
    let fits = fit_path_std(&xs_full, y, alpha, &lambdas[..=best], &constant_col, opts);
    let (b0, bs, converged) = fits.last().cloned().unwrap();
    let (intercept, coefficients) = destandardize(b0, &bs, &std_full);
    let mut eta = vec![0.0; n];
    compute_eta(x_cols, intercept, &coefficients, &mut eta);
    let fit = FittedGlm {
        intercept,
        coefficients,
        penalty: Some(PenaltySpec::new(alpha, lambda_star)),
        deviance: deviance_from_eta(&eta, y),
        converged,
        n_iter: 0,
        standardization: Some(std_full),
    };
    if converged {
        Ok((lambda_star, fit))
    } else {
        Err(GlmError::NonConvergence { best: Box::new(fit), n_iter: opts.max_irls_iter })
    }
}
