//! Transaction-table ingestion and the split/resample/normalize protocol.
//!
//! All operations are pure given (inputs, seed). Tables are immutable after
//! construction and safe to share across threads.
//!
//! CSV contract: UTF-8, comma-separated, one header row, decimal-point
//! reals; the label column holds exactly "0" (target/normal) or "1"
//! (outlier/fraud).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// Floor applied to per-feature standard deviations so constant features
/// do not blow up normalization.
pub const EPS_STD: f64 = 1e-8;

/// Label value of the target (normal) class.
pub const TARGET: u8 = 0;
/// Label value of the outlier (fraud) class.
pub const OUTLIER: u8 = 1;

/// N×D feature matrix with binary labels and a provenance name.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionTable {
    features: DMatrix<f64>,
    labels: Vec<u8>,
    name: String,
}

impl TransactionTable {
    pub fn new(features: DMatrix<f64>, labels: Vec<u8>, name: impl Into<String>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::InvalidParam(
                "table needs at least one row and one feature".into(),
            ));
        }
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
                context: "label count vs feature rows".into(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l != TARGET && l != OUTLIER) {
            return Err(Error::InvalidParam(format!("label {bad} is not 0 or 1")));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(Self {
            features,
            labels,
            name: name.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.features.row(i).transpose()
    }

    /// Row indices of the given class, in table order.
    pub fn class_indices(&self, label: u8) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn n_targets(&self) -> usize {
        self.labels.iter().filter(|&&l| l == TARGET).count()
    }

    pub fn n_outliers(&self) -> usize {
        self.labels.iter().filter(|&&l| l == OUTLIER).count()
    }

    /// New table from a subset of row indices (kept in the given order).
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParam("empty row subset".into()));
        }
        let rows = DMatrix::from_fn(indices.len(), self.n_features(), |i, j| {
            self.features[(indices[i], j)]
        });
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(rows, labels, name)
    }

    /// The target-class rows only.
    pub fn targets_only(&self) -> Result<Self> {
        let idx = self.class_indices(TARGET);
        self.subset(&idx, format!("{}#targets", self.name))
    }
}

/// Per-feature normalization statistics (mean, sample std with N−1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
}

impl NormStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Per-class resampling counts plus the seed that fixes the draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleSpec {
    pub n_target: usize,
    pub n_outlier: usize,
    pub seed: u64,
}

/// Load a CSV into a table. Every non-label column must be numeric; the
/// label column must hold exactly "0" or "1". Row numbers in diagnostics are
/// file line numbers (header is line 1).
pub fn load_table(path: impl AsRef<Path>, label_column: &str) -> Result<TransactionTable> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path_str.clone(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::Csv {
                path: path_str.clone(),
                source: e,
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path_str.clone(),
            source: e,
        })?
        .clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile { path: path_str });
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn {
            path: path_str.clone(),
            column: label_column.to_string(),
            header: headers.iter().collect::<Vec<_>>().join(","),
        })?;

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::InvalidParam(format!(
            "{path_str}: no feature columns besides label '{label_column}'"
        )));
    }

    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rec_idx + 2);
        if record.len() != headers.len() {
            return Err(Error::DimensionMismatch {
                expected: headers.len(),
                found: record.len(),
                context: format!("{path_str}: row {line} field count"),
            });
        }
        let label_raw = &record[label_idx];
        labels.push(match label_raw {
            "0" => TARGET,
            "1" => OUTLIER,
            other => {
                return Err(Error::BadLabel {
                    path: path_str,
                    row: line,
                    value: other.to_string(),
                })
            }
        });
        let mut name_iter = feature_names.iter();
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                continue;
            }
            let column = name_iter.next().expect("feature name per non-label column");
            let value: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                path: path_str.clone(),
                row: line,
                column: column.clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonNumericCell {
                    path: path_str,
                    row: line,
                    column: column.clone(),
                    value: cell.to_string(),
                });
            }
            rows.push(value);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyFile { path: path_str });
    }
    let n = labels.len();
    let d = feature_names.len();
    let features = DMatrix::from_row_slice(n, d, &rows);
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or(path_str);
    TransactionTable::new(features, labels, stem)
}

/// Stratified train/test split. Per class, round(test_fraction·n) rows go to
/// the test side (half-up rounding); the draw is fixed by the seed. Rounding
/// may leave one side of a tiny class empty; downstream operations report
/// that when they need the rows. A side left with no rows at all is an
/// error.
pub fn split(
    table: &TransactionTable,
    test_fraction: f64,
    seed: u64,
) -> Result<(TransactionTable, TransactionTable)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "test_fraction must be in (0,1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx: Vec<usize> = Vec::new();
    let mut test_idx: Vec<usize> = Vec::new();
    for label in [TARGET, OUTLIER] {
        let mut idx = table.class_indices(label);
        if idx.is_empty() {
            continue;
        }
        let n_test = (test_fraction * idx.len() as f64).round() as usize;
        let n_test = n_test.min(idx.len());
        shuffle(&mut idx, &mut rng);
        test_idx.extend_from_slice(&idx[..n_test]);
        train_idx.extend_from_slice(&idx[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::InvalidParam(format!(
            "test_fraction {test_fraction} leaves an empty side ({} train / {} test rows)",
            train_idx.len(),
            test_idx.len()
        )));
    }
    let train = table.subset(&train_idx, format!("{}#train", table.name()))?;
    let test = table.subset(&test_idx, format!("{}#test", table.name()))?;
    Ok((train, test))
}

/// Uniform per-class sampling without replacement; output keeps source row
/// order and source labels.
pub fn resample(train: &TransactionTable, spec: &ResampleSpec) -> Result<TransactionTable> {
    if spec.n_target == 0 {
        return Err(Error::InvalidParam("n_target must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(spec.n_target + spec.n_outlier);
    for (label, want, class_name) in [
        (TARGET, spec.n_target, "target"),
        (OUTLIER, spec.n_outlier, "outlier"),
    ] {
        let idx = table_class(train, label);
        if want > idx.len() {
            return Err(Error::SampleTooLarge {
                class: class_name.into(),
                requested: want,
                available: idx.len(),
            });
        }
        let mut pool = idx;
        shuffle(&mut pool, &mut rng);
        chosen.extend_from_slice(&pool[..want]);
    }
    chosen.sort_unstable();
    train.subset(&chosen, format!("{}#resampled", train.name()))
}

fn table_class(t: &TransactionTable, label: u8) -> Vec<usize> {
    t.class_indices(label)
}

/// Mean and sample standard deviation (N−1 denominator) over target-class
/// rows only, std floored at [`EPS_STD`].
pub fn fit_norm_stats(table: &TransactionTable) -> Result<NormStats> {
    let idx = table.class_indices(TARGET);
    if idx.len() < 2 {
        return Err(Error::ClassTooSmall(format!(
            "need at least 2 target rows for normalization stats, found {}",
            idx.len()
        )));
    }
    let d = table.n_features();
    let n = idx.len() as f64;
    let mut mean = DVector::zeros(d);
    for &i in &idx {
        mean += table.features().row(i).transpose();
    }
    mean /= n;
    let mut var = DVector::zeros(d);
    for &i in &idx {
        let diff = table.features().row(i).transpose() - &mean;
        var += diff.component_mul(&diff);
    }
    var /= n - 1.0;
    let std = DVector::from_iterator(d, var.iter().map(|v| v.sqrt().max(EPS_STD)));
    Ok(NormStats { mean, std })
}

/// Apply (x − mean)/std per entry; labels unchanged.
pub fn normalize(table: &TransactionTable, stats: &NormStats) -> Result<TransactionTable> {
    if stats.dim() != table.n_features() {
        return Err(Error::DimensionMismatch {
            expected: table.n_features(),
            found: stats.dim(),
            context: "normalization stats vs table width".into(),
        });
    }
    let f = DMatrix::from_fn(table.n_rows(), table.n_features(), |i, j| {
        (table.features()[(i, j)] - stats.mean[j]) / stats.std[j]
    });
    TransactionTable::new(f, table.labels().to_vec(), table.name())
}

/// Fisher-Yates; kept local so the shuffle order is pinned by this crate,
/// not by rand's (occasionally changing) slice implementation.
fn shuffle(idx: &mut [usize], rng: &mut ChaCha8Rng) {
    use rand::RngExt;
    for i in (1..idx.len()).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
}
