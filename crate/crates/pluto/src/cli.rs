//! Command-line surface: train, predict, score, importance, simulate,
//! export-dot.
//!
//! Every run is reproducible from its manifest (configuration, materialized
//! seed, input digests). Logs go to stderr, artifacts to the paths given by
//! `--out` and friends. Exit codes: 0 success, 2 configuration error,
//! 3 data error, 4 convergence failure at the root.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::RngCore;
use serde::Serialize;

use crate::config::{ModelOption, RunConfig};
use crate::data::{self, DataError, Dataset};
use crate::importance::rank_importance;
use crate::metrics;
use crate::partition::PurePolicy;
use crate::simbench::{selection_experiment, ExperimentConfig, SimModel};
use crate::tree::{apply_se_rule, cv_prune, to_dot, Tree, TreeError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "pluto", about = "Logistic regression trees with unbiased split selection", version)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a tree: grow, prune with cross-validation, apply the θ-SE rule.
    Train(TrainArgs),
    /// Predict probabilities for a dataset with a saved tree.
    Predict(PredictArgs),
    /// Score a prediction file against true labels.
    Score(ScoreArgs),
    /// Permutation variable importance of a saved tree on test data.
    Importance(ImportanceArgs),
    /// Split-variable selection frequency experiment on simulated data.
    Simulate(SimulateArgs),
    /// Render a saved tree as a Graphviz DOT document.
    ExportDot(ExportDotArgs),
}

#[derive(Debug, Args)]
struct ConfigFlags {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Node-model option: simple or multiple.
    #[arg(long, value_parser = ["simple", "multiple"])]
    option: Option<String>,
    /// Elastic-net mixing weight (multiple option).
    #[arg(long)]
    alpha: Option<f64>,
    /// Maximum quantile groups / split point candidates (M).
    #[arg(long = "m-groups")]
    m_groups: Option<usize>,
    /// Cross-validation folds (λ selection and pruning).
    #[arg(long = "cv-folds")]
    cv_folds: Option<usize>,
    /// θ of the θ-SE pruning rule.
    #[arg(long = "se-rule")]
    se_theta: Option<f64>,
    /// Calibrate split-variable selection for bias correction.
    #[arg(long = "bias-correct")]
    bias_correct: bool,
    /// Bootstrap replications for calibration.
    #[arg(long = "calib-reps")]
    calib_reps: Option<usize>,
    /// Calibration grid as "lo,hi,steps".
    #[arg(long = "calib-grid")]
    calib_grid: Option<String>,
    /// Recalibrate γ* at every node (expensive).
    #[arg(long = "calibrate-per-node")]
    calibrate_per_node: bool,
    /// Pure-child policy during split search: keep or skip.
    #[arg(long = "pure-policy", value_parser = ["keep", "skip"])]
    pure_policy: Option<String>,
    /// Minimum rows per node.
    #[arg(long = "min-node-size")]
    min_node_size: Option<usize>,
    #[arg(long = "max-depth")]
    max_depth: Option<usize>,
    /// Master seed (drawn at random and logged when absent).
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of worst losses excluded from trimmed deviance.
    #[arg(long = "trim-frac")]
    trim_frac: Option<f64>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
}

impl ConfigFlags {
    fn resolve(&self) -> Result<RunConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("invalid config: {e}"))?
            }
            None => RunConfig::default(),
        };
        if let Some(o) = &self.option {
            cfg.option = if o == "simple" { ModelOption::Simple } else { ModelOption::Multiple };
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.m_groups {
            cfg.m_groups = v;
        }
        if let Some(v) = self.cv_folds {
            cfg.cv_folds = v;
        }
        if let Some(v) = self.se_theta {
            cfg.se_theta = v;
        }
        if self.bias_correct {
            cfg.bias_correct = true;
        }
        if let Some(v) = self.calib_reps {
            cfg.calib_reps = v;
        }
        if let Some(g) = &self.calib_grid {
            cfg.calib_grid = parse_grid(g)?;
        }
        if self.calibrate_per_node {
            cfg.calibrate_per_node = true;
        }
        if let Some(p) = &self.pure_policy {
            cfg.pure_policy = if p == "keep" { PurePolicy::Keep } else { PurePolicy::Skip };
        }
        if let Some(v) = self.min_node_size {
            cfg.min_node_size = Some(v);
        }
        if let Some(v) = self.max_depth {
            cfg.max_depth = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = Some(v);
        }
        if let Some(v) = self.trim_frac {
            cfg.trim_frac = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = Some(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_grid(text: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("calib grid {text:?} must be lo,hi,steps"));
    }
    let lo = parts[0].trim().parse().map_err(|e| format!("bad grid lo: {e}"))?;
    let hi = parts[1].trim().parse().map_err(|e| format!("bad grid hi: {e}"))?;
    let steps = parts[2].trim().parse().map_err(|e| format!("bad grid steps: {e}"))?;
    Ok((lo, hi, steps))
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training data CSV.
    #[arg(long)]
    data: PathBuf,
    /// Variable-role schema JSON.
    #[arg(long)]
    schema: PathBuf,
    /// Output path for the tree JSON.
    #[arg(long)]
    out: PathBuf,
    /// Optional DOT diagram output path.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Log every split of the final tree to stderr.
    #[arg(long = "trace-splits")]
    trace_splits: bool,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Output CSV of probabilities (one per input row, order preserved).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// CSV of predicted probabilities (column "prediction" or single column).
    #[arg(long)]
    preds: PathBuf,
    /// CSV of true 0/1 labels (single column).
    #[arg(long)]
    truth: PathBuf,
    #[arg(long = "trim-frac", default_value_t = 0.01)]
    trim_frac: f64,
    /// Output path for the JSON report (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ImportanceArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shuffle columns instead of bootstrap-resampling them.
    #[arg(long = "permute-without-replacement")]
    without_replacement: bool,
    #[arg(long = "trim-frac", default_value_t = 0.01)]
    trim_frac: f64,
    /// Output path for the JSON report (stdout table always printed).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation model (null, jump, int, quadratic, cubic, linear,
    /// linquad, linlin, linlinquad).
    #[arg(long)]
    model: String,
    #[arg(long, value_parser = ["simple", "multiple"], default_value = "simple")]
    option: String,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long = "m-groups", default_value_t = 5)]
    m_groups: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long = "cv-folds", default_value_t = 10)]
    cv_folds: usize,
    #[arg(long = "bias-correct")]
    bias_correct: bool,
    #[arg(long = "calib-reps", default_value_t = 100)]
    calib_reps: usize,
    #[arg(long = "calib-grid", default_value = "1,2,1000")]
    calib_grid: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Output path for the JSON table (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportDotArgs {
    #[arg(long)]
    tree: PathBuf,
    /// Output DOT path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point used by `main`; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => run_train(args),
        Command::Predict(args) => run_predict(args),
        Command::Score(args) => run_score(args),
        Command::Importance(args) => run_importance(args),
        Command::Simulate(args) => run_simulate(args),
        Command::ExportDot(args) => run_export_dot(args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

struct CliError {
    code: i32,
    message: String,
}

fn config_err(message: impl Into<String>) -> CliError {
    CliError { code: EXIT_CONFIG, message: message.into() }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError { code: EXIT_DATA, message: e.to_string() }
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        let code = match e {
            TreeError::RootModelFailed => EXIT_CONVERGENCE,
            _ => EXIT_DATA,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { code: EXIT_DATA, message: e.to_string() }
    }
}

fn init_threads(threads: Option<usize>) {
    if let Some(t) = threads {
        // Ignore the error when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

fn materialize_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::rng().next_u64();
        eprintln!("seed not given; drew {s}");
        s
    })
}

/// FNV-1a digest of a file, recorded in manifests for reproducibility.
fn file_digest(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    Ok(format!("{h:016x}"))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'a str,
    model_name: String,
    config: &'a RunConfig,
    seed: u64,
    inputs: Vec<(String, String)>,
}

fn write_manifest(
    out: &Path,
    cfg: &RunConfig,
    seed: u64,
    inputs: &[&Path],
) -> Result<(), CliError> {
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        model_name: cfg.model_name(),
        config: cfg,
        seed,
        inputs: inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), file_digest(p)?)))
            .collect::<std::io::Result<_>>()?,
    };
    let path = manifest_path(out);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap() + "\n")?;
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn load_dataset(data: &Path, schema: &Path) -> Result<Dataset, CliError> {
    let schema = data::load_schema(schema)?;
    Ok(data::load_csv(data, &schema)?)
}

fn run_train(args: TrainArgs) -> Result<(), CliError> {
    let cfg = args.flags.resolve().map_err(config_err)?;
    init_threads(cfg.threads);
    let seed = materialize_seed(cfg.seed);
    let dataset = load_dataset(&args.data, &args.schema)?;
    eprintln!(
        "training {} on {} rows, {} columns (seed {seed})",
        cfg.model_name(),
        dataset.n_rows,
        dataset.columns.len()
    );

    let grow_cfg = cfg.grow_config(seed);
    let (_, sequence, records) = cv_prune(&dataset, &grow_cfg, cfg.cv_folds)?;
    let chosen = apply_se_rule(&records, cfg.se_theta);
    let final_tree = &sequence[chosen].1;

    eprintln!("pruning table (tree, leaves, cv deviance, se):");
    for (i, r) in records.iter().enumerate() {
        let marker = if i == chosen { " <- selected" } else { "" };
        eprintln!(
            "  {:>3}  {:>5}  {:>10.2} +- {:.2}{marker}",
            i + 1,
            r.subtree_leaves,
            r.cv_dev_mean,
            r.cv_dev_se
        );
    }
    if args.trace_splits {
        for node in final_tree.nodes.values() {
            if let Some(split) = &node.split {
                eprintln!("  node {}: {:?}", node.id, split);
            }
        }
    }

    std::fs::write(&args.out, final_tree.serialize())?;
    let prune_path = {
        let mut s = args.out.as_os_str().to_os_string();
        s.push(".prune.json");
        PathBuf::from(s)
    };
    std::fs::write(&prune_path, serde_json::to_string_pretty(&records).unwrap() + "\n")?;
    write_manifest(&args.out, &cfg, seed, &[&args.data, &args.schema])?;
    if let Some(dot_path) = &args.dot {
        std::fs::write(dot_path, to_dot(final_tree))?;
    }

    let preds = final_tree.predict(&dataset)?;
    let report = metrics::score(&dataset.response, &preds, cfg.trim_frac, 0.5);
    eprintln!(
        "resubstitution: dev {:.3}, dev' {:.3}, mer {:.4}, auroc {}, leaves {}",
        report.dev,
        report.dev_trimmed,
        report.mer,
        report.auroc.map_or("n/a".to_string(), |a| format!("{a:.4}")),
        final_tree.n_leaves()
    );
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.tree)?;
    let tree = Tree::deserialize(&text)?;
    let dataset = match load_dataset(&args.data, &args.schema) {
        Ok(d) => d,
        Err(CliError { message, .. }) if message.contains("no rows") => {
            std::fs::write(&args.out, "prediction\n")?;
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let preds = tree.predict(&dataset)?;
    let mut out = String::from("prediction\n");
    for p in preds {
        out.push_str(&format!("{p}\n"));
    }
    std::fs::write(&args.out, out)?;
    Ok(())
}

/// Read a single numeric column from a CSV, skipping a non-numeric header.
fn read_column(path: &Path, preferred: &str) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.is_empty() || line.trim().is_empty() {
            continue;
        }
        // Prefer a column named `preferred`, else the first column.
        let col = if i == 0 {
            fields.iter().position(|f| f.eq_ignore_ascii_case(preferred)).unwrap_or(0)
        } else {
            0
        };
        let _ = col;
        let field = fields[0];
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => {} // header
            Err(_) => {
                return Err(CliError {
                    code: EXIT_DATA,
                    message: format!("{}: row {}: cannot parse {field:?}", path.display(), i + 1),
                })
            }
        }
    }
    Ok(values)
}

fn run_score(args: ScoreArgs) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&args.trim_frac) {
        return Err(config_err(format!("trim_frac must be in [0, 1), got {}", args.trim_frac)));
    }
    let preds = read_column(&args.preds, "prediction")?;
    let truth_raw = read_column(&args.truth, "y")?;
    if preds.len() != truth_raw.len() {
        return Err(CliError {
            code: EXIT_DATA,
            message: format!(
                "prediction count {} does not match truth count {}",
                preds.len(),
                truth_raw.len()
            ),
        });
    }
    let truth: Vec<u8> = truth_raw
        .iter()
        .map(|&v| {
            if v == 0.0 || v == 1.0 {
                Ok(v as u8)
            } else {
                Err(CliError {
                    code: EXIT_DATA,
                    message: format!("truth value {v} is not 0 or 1"),
                })
            }
        })
        .collect::<Result<_, _>>()?;
    let report = metrics::score(&truth, &preds, args.trim_frac, 0.5);
    emit_json(&report, args.out.as_deref())
}

fn run_importance(args: ImportanceArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.tree)?;
    let tree = Tree::deserialize(&text)?;
    let dataset = load_dataset(&args.data, &args.schema)?;
    if args.reps == 0 {
        return Err(config_err("reps must be positive"));
    }
    let report = rank_importance(
        &tree,
        &dataset,
        args.reps,
        !args.without_replacement,
        args.trim_frac,
        args.seed,
    )?;
    let mut rows: Vec<_> = report.variables.iter().collect();
    rows.sort_by(|a, b| a.final_rank.partial_cmp(&b.final_rank).unwrap());
    println!("{:<20} {:>6} {:>12} {:>10} {:>10}", "variable", "rank", "d_dev'", "d_mer", "d_auroc");
    for v in rows {
        println!(
            "{:<20} {:>6.1} {:>12.4} {:>10.4} {:>10}",
            v.name,
            v.final_rank,
            v.delta_dev_trimmed,
            v.delta_mer,
            v.delta_auroc.map_or("n/a".to_string(), |d| format!("{d:.4}"))
        );
    }
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report).unwrap() + "\n")?;
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    init_threads(args.threads);
    let model: SimModel = args.model.parse().map_err(config_err)?;
    let option = if args.option == "simple" {
        crate::calibrate::SelectionOption::Simple
    } else {
        crate::calibrate::SelectionOption::Multiple {
            alpha: args.alpha,
            cv_folds: args.cv_folds,
        }
    };
    if args.iters == 0 || args.n == 0 {
        return Err(config_err("iters and n must be positive"));
    }
    let cfg = ExperimentConfig {
        iterations: args.iters,
        n_per_iter: args.n,
        m_groups: args.m_groups,
        bias_correct: args.bias_correct,
        calib_reps: args.calib_reps,
        calib_grid: parse_grid(&args.calib_grid).map_err(config_err)?,
        seed: args.seed,
        glm: Default::default(),
    };
    let table = selection_experiment(model, option, &cfg);
    eprintln!(
        "model {} / option {}{}: {} iterations of n = {}",
        table.model,
        table.option,
        if table.bias_corrected { " + bias correction" } else { "" },
        table.iterations,
        table.n_per_iter
    );
    for (name, p, se) in &table.frequencies {
        eprintln!("  {name}: {p:.3} (se {se:.3})");
    }
    if table.failure_rate > 0.0 {
        eprintln!("  failures: {:.3}", table.failure_rate);
    }
    emit_json(&table, args.out.as_deref())
}

fn run_export_dot(args: ExportDotArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.tree)?;
    let tree = Tree::deserialize(&text)?;
    let dot = to_dot(&tree);
    match &args.out {
        Some(path) => std::fs::write(path, dot)?,
        None => print!("{dot}"),
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).unwrap() + "\n";
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
