//! Scoring of probability predictions.
//!
//! Deviance (DEV), a trimmed variant (DEV′) that discards the worst 1% of
//! per-observation losses so a handful of confident mistakes cannot blow up
//! the comparison, misclassification error rate (MER), AUROC, and the
//! ratio-of-deviance normalization used to compare models across datasets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probability clip applied before taking logs in deviance.
const P_CLIP: f64 = 1e-12;

/// Default fraction of worst losses excluded by [`dev_trimmed`].
pub const DEFAULT_TRIM_FRAC: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("AUROC is undefined when only one class is present")]
    SingleClass,
    #[error("prediction and truth vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// All scalar scores for one prediction set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreReport {
    pub dev: f64,
    pub dev_trimmed: f64,
    pub mer: f64,
    /// `None` when the truth vector is single-class.
    pub auroc: Option<f64>,
    pub n: usize,
}

/// Per-observation loss: −2[y ln p̂ + (1−y) ln(1−p̂)] with p̂ clipped.
fn loss(y: u8, p: f64) -> f64 {
    let p = p.clamp(P_CLIP, 1.0 - P_CLIP);
    -2.0 * if y == 1 { p.ln() } else { (1.0 - p).ln() }
}

/// Predicted deviance DEV = −2 Σ [y ln p̂ + (1−y) ln(1−p̂)].
pub fn dev(y: &[u8], p: &[f64]) -> f64 {
    assert_eq!(y.len(), p.len());
    y.iter().zip(p).map(|(&yi, &pi)| loss(yi, pi)).sum()
}

/// Trimmed deviance DEV′ with a configurable trim fraction: the worst
/// ⌈frac·n⌉ per-observation losses are excluded, except that sets smaller
/// than 1/frac rows are not trimmed at all (⌈frac·n⌉ would already be a
/// full row, over-trimming tiny sets).
pub fn dev_trimmed_frac(y: &[u8], p: &[f64], frac: f64) -> f64 {
    assert_eq!(y.len(), p.len());
    assert!((0.0..1.0).contains(&frac));
    let n = y.len();
    let mut losses: Vec<f64> = y.iter().zip(p).map(|(&yi, &pi)| loss(yi, pi)).collect();
    let mut drop = (frac * n as f64).ceil() as usize;
    if frac > 0.0 && (n as f64) < 1.0 / frac {
        drop = drop.saturating_sub(1);
    }
    if drop == 0 {
        return losses.iter().sum();
    }
    losses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    losses[..n - drop].iter().sum()
}

/// DEV′ at the default 1% trim.
pub fn dev_trimmed(y: &[u8], p: &[f64]) -> f64 {
    dev_trimmed_frac(y, p, DEFAULT_TRIM_FRAC)
}

/// Misclassification error rate at the given threshold; p̂ exactly at the
/// threshold classifies as 0 (strict >).
pub fn mer(y: &[u8], p: &[f64], threshold: f64) -> f64 {
    assert_eq!(y.len(), p.len());
    let wrong = y
        .iter()
        .zip(p)
        .filter(|&(&yi, &pi)| u8::from(pi > threshold) != yi)
        .count();
    wrong as f64 / y.len() as f64
}

/// AUROC by the Mann–Whitney rank formulation; tied predictions count 0.5.
pub fn auroc(y: &[u8], p: &[f64]) -> Result<f64, MetricsError> {
    if y.len() != p.len() {
        return Err(MetricsError::LengthMismatch(p.len(), y.len()));
    }
    let n1 = y.iter().filter(|&&v| v == 1).count();
    let n0 = y.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(MetricsError::SingleClass);
    }
    // Average ranks of the positives: sort by p̂, assign mid-ranks to ties.
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && p[idx[j]] == p[idx[i]] {
            j += 1;
        }
        // 1-based mid-rank of the tie group [i, j).
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            if y[k] == 1 {
                rank_sum_pos += mid_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - n1 as f64 * (n1 as f64 + 1.0) / 2.0;
    Ok(u / (n1 as f64 * n0 as f64))
}

/// Divide every deviance by the largest; the worst model maps to 1.
pub fn ratio_of_deviance(devs: &[(String, f64)]) -> Vec<(String, f64)> {
    assert!(!devs.is_empty());
    let max = devs.iter().map(|&(_, d)| d).fold(f64::NEG_INFINITY, f64::max);
    assert!(max.is_finite());
    devs.iter().map(|(name, d)| (name.clone(), d / max)).collect()
}

/// Compute every score at once.
pub fn score(y: &[u8], p: &[f64], trim_frac: f64, threshold: f64) -> ScoreReport {
    ScoreReport {
        dev: dev(y, p),
        dev_trimmed: dev_trimmed_frac(y, p, trim_frac),
        mer: mer(y, p, threshold),
        auroc: auroc(y, p).ok(),
        n: y.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn dev_analytic_values() {
        assert!(dev(&[1, 0, 1], &[1.0, 0.0, 1.0]) < 1e-9);
        assert_abs_diff_eq!(
            dev(&[0, 1, 0, 1], &[0.5; 4]),
            8.0 * std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(dev(&[1], &[0.25]), -2.0 * 0.25f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn dev_minimized_at_mean_over_constant_predictors() {
        let y = [1u8, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let at_mean = dev(&y, &[0.3; 10]);
        for k in 1..100 {
            let p = k as f64 / 100.0;
            assert!(dev(&y, &[p; 10]) >= at_mean - 1e-9);
        }
    }

    #[test]
    fn trimmed_uniform_losses_scale_by_kept_fraction() {
        let n = 200;
        let y = vec![1u8; n];
        let p = vec![0.7; n];
        let full = dev(&y, &p);
        // drop = ceil(2) = 2 rows of identical loss.
        assert_abs_diff_eq!(dev_trimmed(&y, &p), full * 198.0 / 200.0, epsilon = 1e-9);
    }

    #[test]
    fn trimmed_excludes_single_outlier() {
        let mut y = vec![0u8; 200];
        let mut p = vec![0.2; 200];
        y[17] = 1;
        p[17] = 1e-9; // catastrophic loss on one row
        let trimmed = dev_trimmed(&y, &p);
        assert!(trimmed < dev(&y, &p) - 30.0);
        assert!(trimmed.is_finite());
    }

    #[test]
    fn no_trim_below_one_hundred_rows() {
        let y = vec![1u8; 50];
        let p = vec![0.9; 50];
        assert_abs_diff_eq!(dev_trimmed(&y, &p), dev(&y, &p), epsilon = 1e-12);
    }

    #[test]
    fn trimmed_matches_sort_and_sum_oracle() {
        let mut rng = derive_rng(21, 0);
        for _ in 0..50 {
            let n = rng.random_range(2..1000usize);
            let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
            let p: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            // Oracle: recompute losses, sort descending, skip the first k.
            let mut losses: Vec<f64> = y
                .iter()
                .zip(&p)
                .map(|(&yi, &pi)| {
                    let pc = pi.clamp(1e-12, 1.0 - 1e-12);
                    -2.0 * if yi == 1 { pc.ln() } else { (1.0 - pc).ln() }
                })
                .collect();
            losses.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let mut k = (0.01 * n as f64).ceil() as usize;
            if n < 100 {
                k = k.saturating_sub(1);
            }
            let oracle: f64 = losses[k..].iter().sum();
            assert_abs_diff_eq!(dev_trimmed(&y, &p), oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn mer_boundary_and_extremes() {
        assert_eq!(mer(&[1, 0], &[0.9, 0.1], 0.5), 0.0);
        assert_eq!(mer(&[1, 0], &[0.1, 0.9], 0.5), 1.0);
        // Exactly 0.5 classifies as 0.
        assert_eq!(mer(&[0], &[0.5], 0.5), 0.0);
        assert_eq!(mer(&[1], &[0.5], 0.5), 1.0);
    }

    #[test]
    fn auroc_extremes_and_ties() {
        assert_eq!(auroc(&[0, 1], &[0.1, 0.9]).unwrap(), 1.0);
        assert_eq!(auroc(&[1, 0], &[0.1, 0.9]).unwrap(), 0.0);
        assert_eq!(auroc(&[0, 1, 0, 1], &[0.4; 4]).unwrap(), 0.5);
        assert_eq!(auroc(&[1, 1], &[0.2, 0.9]).unwrap_err(), MetricsError::SingleClass);
    }

    #[test]
    fn auroc_matches_pairwise_oracle() {
        let mut rng = derive_rng(22, 0);
        let n = 200;
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        // Coarse grid to force plenty of ties.
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0..10) as f64 / 10.0).collect();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            for j in 0..n {
                if y[i] == 1 && y[j] == 0 {
                    den += 1.0;
                    if p[i] > p[j] {
                        num += 1.0;
                    } else if p[i] == p[j] {
                        num += 0.5;
                    }
                }
            }
        }
        assert_abs_diff_eq!(auroc(&y, &p).unwrap(), num / den, epsilon = 1e-12);
    }

    #[test]
    fn auroc_invariant_under_monotone_transform() {
        let mut rng = derive_rng(23, 0);
        let n = 150;
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let q: Vec<f64> = p.iter().map(|&v| (5.0 * v).exp() / 200.0).collect();
        assert_abs_diff_eq!(
            auroc(&y, &p).unwrap(),
            auroc(&y, &q).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn ratio_of_deviance_normalizes_to_max() {
        let r = ratio_of_deviance(&[("a".into(), 5.0), ("b".into(), 10.0)]);
        assert_eq!(r[0], ("a".into(), 0.5));
        assert_eq!(r[1], ("b".into(), 1.0));
        let single = ratio_of_deviance(&[("only".into(), 3.0)]);
        assert_eq!(single[0].1, 1.0);
    }
}
