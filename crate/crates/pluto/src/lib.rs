//! PLUTO: penalized logistic regression trees with unbiased split selection.
//!
//! The library grows binary classification trees whose nodes carry logistic
//! regression models (a best simple regressor, or an elastic-net penalized
//! multiple model tuned by cross-validation). Split variables are chosen by
//! adjusted chi-squared lack-of-fit tests rather than exhaustive impurity
//! search, which keeps the selection unbiased across variables with different
//! numbers of candidate splits. Trees are sized by minimal cost-complexity
//! pruning with a cross-validated theta-SE rule.
//!
//! Module map:
//! - [`data`]: dataset ingestion, variable roles, quantile discretization
//! - [`glm`]: IRLS and elastic-net coordinate-descent logistic solvers
//! - [`split`]: split-variable selection via adjusted chi-squared tests
//! - [`calibrate`]: bootstrap bias calibration of the variable selection
//! - [`partition`]: split point / category subset search
//! - [`tree`]: growth, pruning, prediction, serialization
//! - [`metrics`]: deviance, trimmed deviance, MER, AUROC
//! - [`importance`]: permutation importance ranking
//! - [`simbench`]: simulation models and selection-probability experiments
//! - [`cli`]: command-line front end

pub mod calibrate;
pub mod cli;
pub mod config;
pub mod data;
pub mod glm;
pub mod importance;
pub mod metrics;
pub mod partition;
pub mod rng;
pub mod simbench;
pub mod split;
pub mod tree;
