//! Dataset ingestion, variable-role schema, and quantile discretization.
//!
//! A [`Dataset`] is a columnar table of numeric and categorical predictors
//! plus a binary response. Each predictor column carries a [`VariableRole`]
//! that decides whether it may be used for splitting, for fitting node
//! models, both, or neither. Missing values are rejected at load time.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What a column is allowed to do during tree construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleKind {
    /// Numeric predictor usable both as split candidate and regressor.
    NumericBoth,
    /// Numeric predictor usable only as a split candidate.
    NumericSplitOnly,
    /// Numeric predictor usable only as a regressor in node models.
    NumericFitOnly,
    /// Categorical predictor usable only as a split candidate.
    CategoricalSplit,
    /// Column is ignored entirely.
    Excluded,
    /// The binary response.
    Response,
}

/// Role of one column, including the ordered flag for categorical columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableRole {
    pub kind: RoleKind,
    /// Only meaningful for `CategoricalSplit`: treat categories as ordinal.
    #[serde(default)]
    pub ordered: bool,
}

impl VariableRole {
    pub fn new(kind: RoleKind) -> Self {
        VariableRole { kind, ordered: false }
    }

    pub fn ordered_categorical() -> Self {
        VariableRole { kind: RoleKind::CategoricalSplit, ordered: true }
    }

    pub fn is_split_candidate(&self) -> bool {
        matches!(
            self.kind,
            RoleKind::NumericBoth | RoleKind::NumericSplitOnly | RoleKind::CategoricalSplit
        )
    }

    pub fn is_regressor_candidate(&self) -> bool {
        matches!(self.kind, RoleKind::NumericBoth | RoleKind::NumericFitOnly)
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == RoleKind::CategoricalSplit
    }
}

/// Column name → role map, loaded from a JSON sidecar file.
pub type Schema = BTreeMap<String, VariableRole>;

/// Column storage: numeric values or interned category codes.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Numeric(Vec<f64>),
    /// `codes[i]` indexes into `labels`; labels are sorted (numeric-aware)
    /// so that ordinal prefix subsets follow the natural order.
    Categorical { codes: Vec<u32>, labels: Vec<String> },
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub role: VariableRole,
    pub values: ColumnValues,
}

impl Column {
    pub fn numeric(&self) -> Option<&[f64]> {
        match &self.values {
            ColumnValues::Numeric(v) => Some(v),
            ColumnValues::Categorical { .. } => None,
        }
    }

    pub fn categorical(&self) -> Option<(&[u32], &[String])> {
        match &self.values {
            ColumnValues::Numeric(_) => None,
            ColumnValues::Categorical { codes, labels } => Some((codes, labels)),
        }
    }
}

/// Immutable columnar dataset with a binary response.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub columns: Vec<Column>,
    pub n_rows: usize,
    pub response: Vec<u8>,
    pub response_name: String,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse { row: usize, column: String, value: String },
    #[error("row {row}, column {column}: missing value (missing data is not supported)")]
    MissingCell { row: usize, column: String },
    #[error("row {row}: response value {value:?} is not 0 or 1")]
    NonBinaryResponse { row: usize, value: String },
    #[error("dataset has no rows")]
    Empty,
}

impl Dataset {
    /// Column indexes eligible as split candidates, in schema order.
    pub fn split_candidates(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role.is_split_candidate())
            .map(|(i, _)| i)
            .collect()
    }

    /// Column indexes eligible as regressors, in schema order.
    pub fn regressor_candidates(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role.is_regressor_candidate())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// View over all rows.
    pub fn all_rows(&self) -> NodeView<'_> {
        NodeView { data: self, rows: (0..self.n_rows).collect() }
    }

    /// Replace the response vector (used by bootstrap calibration).
    pub fn with_response(&self, response: Vec<u8>) -> Dataset {
        assert_eq!(response.len(), self.n_rows);
        Dataset {
            columns: self.columns.clone(),
            n_rows: self.n_rows,
            response,
            response_name: self.response_name.clone(),
        }
    }

    /// Write the dataset back out as CSV with round-trip-safe numeric formatting.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<(), DataError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        header.push(&self.response_name);
        w.write_record(&header)?;
        for i in 0..self.n_rows {
            let mut rec: Vec<String> = Vec::with_capacity(self.columns.len() + 1);
            for c in &self.columns {
                match &c.values {
                    ColumnValues::Numeric(v) => rec.push(format!("{}", v[i])),
                    ColumnValues::Categorical { codes, labels } => {
                        rec.push(labels[codes[i] as usize].clone())
                    }
                }
            }
            rec.push(format!("{}", self.response[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A read-only view of a subset of dataset rows (the data routed to a node).
#[derive(Debug, Clone)]
pub struct NodeView<'a> {
    pub data: &'a Dataset,
    pub rows: Vec<usize>,
}

impl<'a> NodeView<'a> {
    pub fn new(data: &'a Dataset, rows: Vec<usize>) -> Self {
        NodeView { data, rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn response(&self) -> Vec<u8> {
        self.rows.iter().map(|&i| self.data.response[i]).collect()
    }

    pub fn n_pos(&self) -> usize {
        self.rows.iter().filter(|&&i| self.data.response[i] == 1).count()
    }

    /// Response constant across the view.
    pub fn is_pure(&self) -> bool {
        let np = self.n_pos();
        np == 0 || np == self.n()
    }

    /// Gather a numeric column restricted to this view's rows.
    pub fn numeric_column(&self, col: usize) -> Vec<f64> {
        let v = self.data.columns[col]
            .numeric()
            .expect("numeric_column called on a categorical column");
        self.rows.iter().map(|&i| v[i]).collect()
    }

    /// Gather categorical codes restricted to this view's rows.
    pub fn categorical_codes(&self, col: usize) -> Vec<u32> {
        let (codes, _) = self.data.columns[col]
            .categorical()
            .expect("categorical_codes called on a numeric column");
        self.rows.iter().map(|&i| codes[i]).collect()
    }

    /// Regressor design matrix (row-major, one row per view row) for the
    /// given regressor columns.
    pub fn design_matrix(&self, cols: &[usize]) -> Vec<Vec<f64>> {
        cols.iter().map(|&c| self.numeric_column(c)).collect()
    }

    pub fn subset(&self, rows: Vec<usize>) -> NodeView<'a> {
        NodeView { data: self.data, rows }
    }

    /// Materialize the view as an owned dataset (used when a sub-node must
    /// be treated as a dataset in its own right, e.g. per-node calibration).
    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            columns: self
                .data
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    role: c.role,
                    values: match &c.values {
                        ColumnValues::Numeric(v) => {
                            ColumnValues::Numeric(self.rows.iter().map(|&i| v[i]).collect())
                        }
                        ColumnValues::Categorical { codes, labels } => {
                            ColumnValues::Categorical {
                                codes: self.rows.iter().map(|&i| codes[i]).collect(),
                                labels: labels.clone(),
                            }
                        }
                    },
                })
                .collect(),
            n_rows: self.rows.len(),
            response: self.rows.iter().map(|&i| self.data.response[i]).collect(),
            response_name: self.data.response_name.clone(),
        }
    }
}

/// Load a schema sidecar: JSON mapping column name → `{role, ordered?}`.
pub fn load_schema<P: AsRef<Path>>(path: P) -> Result<Schema, DataError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| DataError::Schema(format!("invalid schema JSON: {e}")))
}

/// Load a CSV file (RFC 4180, header row, UTF-8) under the given schema.
///
/// Every schema column must exist in the header; header columns absent from
/// the schema are an error, so silent role omissions cannot slip through.
pub fn load_csv<P: AsRef<Path>>(path: P, schema: &Schema) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> =
        reader.headers()?.iter().map(|s| s.trim().to_string()).collect();

    for name in schema.keys() {
        if !header.contains(name) {
            return Err(DataError::Schema(format!("schema column {name:?} not found in CSV header")));
        }
    }
    for name in &header {
        if !schema.contains_key(name) {
            return Err(DataError::Schema(format!("CSV column {name:?} has no role in the schema")));
        }
    }
    let n_response = header.iter().filter(|n| schema[*n].kind == RoleKind::Response).count();
    if n_response != 1 {
        return Err(DataError::Schema(format!(
            "schema must mark exactly one response column, found {n_response}"
        )));
    }

    enum Builder {
        Numeric(Vec<f64>),
        Categorical(Vec<String>),
        Response(Vec<u8>),
        Skip,
    }
    let mut builders: Vec<Builder> = header
        .iter()
        .map(|name| match schema[name].kind {
            RoleKind::NumericBoth | RoleKind::NumericSplitOnly | RoleKind::NumericFitOnly => {
                Builder::Numeric(Vec::new())
            }
            RoleKind::CategoricalSplit => Builder::Categorical(Vec::new()),
            RoleKind::Response => Builder::Response(Vec::new()),
            RoleKind::Excluded => Builder::Skip,
        })
        .collect();

    let mut n_rows = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 2; // 1-based, after header
        if record.len() != header.len() {
            return Err(DataError::Schema(format!(
                "row {row}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let field = field.trim();
            match &mut builders[j] {
                Builder::Skip => {}
                _ if field.is_empty() => {
                    return Err(DataError::MissingCell { row, column: header[j].clone() });
                }
                Builder::Numeric(v) => match field.parse::<f64>() {
                    Ok(x) if x.is_finite() => v.push(x),
                    _ => {
                        return Err(DataError::Parse {
                            row,
                            column: header[j].clone(),
                            value: field.to_string(),
                        })
                    }
                },
                Builder::Categorical(v) => v.push(field.to_string()),
                Builder::Response(v) => match field {
                    "0" => v.push(0),
                    "1" => v.push(1),
                    other => {
                        return Err(DataError::NonBinaryResponse { row, value: other.to_string() })
                    }
                },
            }
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(DataError::Empty);
    }

    let mut columns = Vec::new();
    let mut response = Vec::new();
    let mut response_name = String::new();
    for (name, builder) in header.into_iter().zip(builders) {
        match builder {
            Builder::Skip => {}
            Builder::Numeric(v) => {
                columns.push(Column { name: name.clone(), role: schema[&name], values: ColumnValues::Numeric(v) });
            }
            Builder::Categorical(raw) => {
                let (codes, labels) = intern_categories(&raw);
                columns.push(Column {
                    name: name.clone(),
                    role: schema[&name],
                    values: ColumnValues::Categorical { codes, labels },
                });
            }
            Builder::Response(v) => {
                response = v;
                response_name = name;
            }
        }
    }

    Ok(Dataset { columns, n_rows, response, response_name })
}

/// Intern category labels into codes. Labels are sorted numeric-aware
/// (numbers before strings, numbers by value) so category ids are stable
/// across files and ordinal prefixes follow the natural order.
pub fn intern_categories(raw: &[String]) -> (Vec<u32>, Vec<String>) {
    let mut labels: Vec<String> = raw.to_vec();
    labels.sort_by(|a, b| label_order(a, b));
    labels.dedup();
    let index: BTreeMap<&str, u32> =
        labels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
    let codes = raw.iter().map(|l| index[l.as_str()]).collect();
    (codes, labels)
}

fn label_order(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Quantile split points for one numeric variable.
#[derive(Debug, Clone, PartialEq)]
pub struct CutpointSet {
    pub variable: usize,
    /// Strictly increasing; at most `m - 1` entries after deduplication.
    pub cutpoints: Vec<f64>,
    pub m: usize,
}

impl CutpointSet {
    /// Number of groups actually realized by these cutpoints.
    pub fn n_groups(&self) -> usize {
        self.cutpoints.len() + 1
    }
}

impl fmt::Display for CutpointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cutpoints{:?} (M={})", self.cutpoints, self.m)
    }
}

/// Order-statistic quantile with linear interpolation between closest ranks
/// (h = (n-1)p + 1 on the sorted sample, 1-based).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Cutpoints at the 100/M, ..., 100(M-1)/M sample percentiles, deduplicated.
///
/// Returns an empty cutpoint set when all values are identical; the caller
/// treats such a variable as unsplittable.
pub fn quantile_cutpoints(values: &[f64], m: usize, variable: usize) -> CutpointSet {
    assert!(m >= 2, "M must be at least 2");
    assert!(!values.is_empty(), "values must be non-empty");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut cuts = Vec::with_capacity(m - 1);
    for i in 1..m {
        let q = quantile(&sorted, i as f64 / m as f64);
        if cuts.last().is_none_or(|&last| q > last) {
            cuts.push(q);
        }
    }
    // A single cutpoint equal to the global minimum separates nothing.
    if cuts.len() == 1 && cuts[0] <= sorted[0] {
        cuts.clear();
    }
    CutpointSet { variable, cutpoints: cuts, m }
}

/// Map each value to its group: g(v) = #{cutpoints < v}, so intervals are
/// (-inf, c1], (c1, c2], ... and a value equal to a cutpoint falls in the
/// lower group.
pub fn discretize(values: &[f64], cuts: &CutpointSet) -> Vec<usize> {
    values
        .iter()
        .map(|&v| cuts.cutpoints.partition_point(|&c| c < v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn schema_nb(cols: &[(&str, RoleKind)]) -> Schema {
        cols.iter().map(|&(n, k)| (n.to_string(), VariableRole::new(k))).collect()
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_basic_csv() {
        let f = write_temp("x,cat,y\n1.5,a,0\n2.0,b,1\n3.5,a,1\n-1.0,c,0\n");
        let schema = schema_nb(&[
            ("x", RoleKind::NumericBoth),
            ("cat", RoleKind::CategoricalSplit),
            ("y", RoleKind::Response),
        ]);
        let ds = load_csv(f.path(), &schema).unwrap();
        assert_eq!(ds.n_rows, 4);
        assert_eq!(ds.response, vec![0, 1, 1, 0]);
        assert_eq!(ds.split_candidates().len(), 2);
        assert_eq!(ds.regressor_candidates(), vec![0]);
        let (codes, labels) = ds.columns[1].categorical().unwrap();
        assert_eq!(labels, &["a".to_string(), "b".to_string(), "c".to_string()]);
        assert_eq!(codes, &[0, 1, 0, 2]);
    }

    #[test]
    fn non_binary_response_rejected() {
        let f = write_temp("x,y\n1.0,0\n2.0,2\n");
        let schema = schema_nb(&[("x", RoleKind::NumericBoth), ("y", RoleKind::Response)]);
        let err = load_csv(f.path(), &schema).unwrap_err();
        assert!(matches!(err, DataError::NonBinaryResponse { row: 3, .. }), "{err}");
    }

    #[test]
    fn text_in_numeric_column_names_row_and_column() {
        let f = write_temp("x,y\n1.0,0\nfoo,1\n");
        let schema = schema_nb(&[("x", RoleKind::NumericBoth), ("y", RoleKind::Response)]);
        let err = load_csv(f.path(), &schema).unwrap_err();
        match err {
            DataError::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "x");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn missing_cell_rejected() {
        let f = write_temp("x,y\n1.0,0\n,1\n");
        let schema = schema_nb(&[("x", RoleKind::NumericBoth), ("y", RoleKind::Response)]);
        assert!(matches!(load_csv(f.path(), &schema).unwrap_err(), DataError::MissingCell { .. }));
    }

    #[test]
    fn missing_schema_column_rejected() {
        let f = write_temp("x,y\n1.0,0\n");
        let schema = schema_nb(&[
            ("x", RoleKind::NumericBoth),
            ("z", RoleKind::NumericBoth),
            ("y", RoleKind::Response),
        ]);
        assert!(matches!(load_csv(f.path(), &schema).unwrap_err(), DataError::Schema(_)));
    }

    #[test]
    fn median_of_four() {
        let cuts = quantile_cutpoints(&[1.0, 2.0, 3.0, 4.0], 2, 0);
        assert_eq!(cuts.cutpoints, vec![2.5]);
    }

    #[test]
    fn constant_values_yield_empty_cutpoints() {
        let cuts = quantile_cutpoints(&[7.0; 12], 5, 0);
        assert!(cuts.cutpoints.is_empty());
        let groups = discretize(&[7.0, 7.0], &cuts);
        assert_eq!(groups, vec![0, 0]);
    }

    #[test]
    fn percentiles_of_1_to_100() {
        // Hand application of the interpolated order-statistic rule to 1..100:
        // h = 99p + 1, so p = 0.2 -> 20.8, p = 0.4 -> 40.6, p = 0.6 -> 60.4, p = 0.8 -> 80.2.
        let values: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let cuts = quantile_cutpoints(&values, 5, 0);
        let expect = [20.8, 40.6, 60.4, 80.2];
        assert_eq!(cuts.cutpoints.len(), 4);
        for (c, e) in cuts.cutpoints.iter().zip(expect) {
            assert!((c - e).abs() < 1e-12, "{c} vs {e}");
        }
    }

    #[test]
    fn boundary_value_goes_to_lower_group() {
        let cuts = CutpointSet { variable: 0, cutpoints: vec![4.0, 8.0], m: 3 };
        assert_eq!(discretize(&[4.0], &cuts), vec![0]);
        assert_eq!(discretize(&[1.0, 5.0, 9.0], &cuts), vec![0, 1, 2]);
    }

    #[test]
    fn discretize_is_monotone() {
        let values: Vec<f64> = (0..200).map(|i| ((i * 37) % 113) as f64 * 0.25).collect();
        let cuts = quantile_cutpoints(&values, 5, 0);
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let groups = discretize(&sorted, &cuts);
        assert!(groups.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn csv_roundtrip_bit_exact() {
        let f = write_temp("x,y\n0.1,0\n1e-9,1\n-3.25,1\n123456.789,0\n");
        let schema = schema_nb(&[("x", RoleKind::NumericBoth), ("y", RoleKind::Response)]);
        let ds = load_csv(f.path(), &schema).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        ds.write_csv(out.path()).unwrap();
        let ds2 = load_csv(out.path(), &schema).unwrap();
        assert_eq!(ds.columns[0].numeric().unwrap(), ds2.columns[0].numeric().unwrap());
        assert_eq!(ds.response, ds2.response);
    }
}
