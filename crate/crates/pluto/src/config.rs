//! Run configuration shared by the CLI subcommands.
//!
//! A [`RunConfig`] can be loaded from a JSON file and overridden field by
//! field with command-line flags; validation happens once, before any
//! compute. The derived model name follows the PLUTO_{S|M}[_BC]_{θ}SE
//! convention so runs can be cross-referenced between reports.

use serde::{Deserialize, Serialize};

use crate::calibrate::SelectionOption;
use crate::glm::GlmOptions;
use crate::partition::PurePolicy;
use crate::tree::GrowConfig;

/// Node-model option as configured (alpha and folds live alongside).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelOption {
    Simple,
    Multiple,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub option: ModelOption,
    /// Elastic-net mixing weight for the multiple option.
    pub alpha: f64,
    /// Maximum quantile groups / split point candidates (M).
    pub m_groups: usize,
    /// Folds for both λ selection and pruning cross-validation.
    pub cv_folds: usize,
    /// θ of the θ-SE pruning rule.
    pub se_theta: f64,
    pub bias_correct: bool,
    pub calib_reps: usize,
    pub calib_grid: (f64, f64, usize),
    pub calibrate_per_node: bool,
    pub pure_policy: PurePolicy,
    pub min_node_size: Option<usize>,
    pub max_depth: usize,
    /// Master seed; drawn at random and logged when absent.
    pub seed: Option<u64>,
    /// Fraction of worst losses excluded from DEV′.
    pub trim_frac: f64,
    /// Worker thread cap; library default when absent.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            option: ModelOption::Simple,
            alpha: 1.0,
            m_groups: 5,
            cv_folds: 10,
            se_theta: 0.0,
            bias_correct: false,
            calib_reps: 100,
            calib_grid: (1.0, 2.0, 1000),
            calibrate_per_node: false,
            pure_policy: PurePolicy::Keep,
            min_node_size: None,
            max_depth: 10,
            seed: None,
            trim_frac: 0.01,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.se_theta < 0.0 {
            return Err(format!("se_theta must be non-negative, got {}", self.se_theta));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if self.m_groups < 2 {
            return Err("m_groups must be at least 2".into());
        }
        if self.cv_folds < 2 {
            return Err("cv_folds must be at least 2".into());
        }
        if self.calib_reps == 0 {
            return Err("calib_reps must be positive".into());
        }
        let (lo, hi, steps) = self.calib_grid;
        if !(lo >= 1.0 && hi > lo && steps >= 2) {
            return Err(format!("calib_grid ({lo}, {hi}, {steps}) must satisfy 1 <= lo < hi, steps >= 2"));
        }
        if !(0.0..1.0).contains(&self.trim_frac) {
            return Err(format!("trim_frac must be in [0, 1), got {}", self.trim_frac));
        }
        if self.max_depth == 0 && self.se_theta > 0.0 {
            // Allowed, just pointless; no error.
        }
        Ok(())
    }

    pub fn selection_option(&self) -> SelectionOption {
        match self.option {
            ModelOption::Simple => SelectionOption::Simple,
            ModelOption::Multiple => {
                SelectionOption::Multiple { alpha: self.alpha, cv_folds: self.cv_folds }
            }
        }
    }

    pub fn grow_config(&self, seed: u64) -> GrowConfig {
        GrowConfig {
            option: self.selection_option(),
            m_groups: self.m_groups,
            pure_policy: self.pure_policy,
            max_depth: self.max_depth,
            min_node_size: self.min_node_size,
            bias_correct: self.bias_correct,
            calib_reps: self.calib_reps,
            calib_grid: self.calib_grid,
            calibrate_per_node: self.calibrate_per_node,
            seed,
            glm: GlmOptions::default(),
        }
    }

    /// PLUTO_{S|M}[_BC]_{θ}SE per the naming convention.
    pub fn model_name(&self) -> String {
        let opt = match self.option {
            ModelOption::Simple => "S",
            ModelOption::Multiple => "M",
        };
        let bc = if self.bias_correct { "_BC" } else { "" };
        format!("PLUTO_{opt}{bc}_{}SE", format_theta(self.se_theta))
    }
}

/// θ rendered without a trailing ".0" (0 → "0", 0.5 → "0.5").
fn format_theta(theta: f64) -> String {
    if theta.fract() == 0.0 {
        format!("{}", theta as u64)
    } else {
        format!("{theta}")
    }
}
