//! Audit data model: aligned targets, scores and sensitive labels.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Dense row-major matrix of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(AuditError::LengthMismatch {
                what: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Single-column matrix.
    pub fn column(values: Vec<f64>) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(AuditError::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Column-wise concatenation `[self | other]`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(AuditError::LengthMismatch {
                what: "hstack operand",
                expected: self.rows,
                found: other.rows,
            });
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    pub fn column_values(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }
}

/// Dense class encoding of raw sensitive tokens.
///
/// Tokens that already form the integer alphabet `{0, …, K−1}` keep their
/// values; anything else is numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEncoding {
    /// `names[k]` is the raw token for dense class `k`.
    pub names: Vec<String>,
}

impl LabelEncoding {
    pub fn encode<S: AsRef<str>>(tokens: &[S]) -> (Vec<usize>, LabelEncoding) {
        let mut first_seen: Vec<String> = Vec::new();
        let mut index: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            let t = t.as_ref().trim();
            if !index.contains_key(t) {
                index.insert(t, first_seen.len());
                first_seen.push(t.to_string());
            }
        }

        let k = first_seen.len();
        let as_ints: Option<Vec<usize>> = first_seen.iter().map(|t| t.parse().ok()).collect();
        if let Some(ints) = as_ints {
            let mut sorted = ints.clone();
            sorted.sort_unstable();
            if sorted.iter().copied().eq(0..k) {
                let labels = tokens
                    .iter()
                    .map(|t| t.as_ref().trim().parse::<usize>().unwrap())
                    .collect();
                let names = (0..k).map(|c| c.to_string()).collect();
                return (labels, LabelEncoding { names });
            }
        }

        let labels = tokens.iter().map(|t| index[t.as_ref().trim()]).collect();
        (labels, LabelEncoding { names: first_seen })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            names: (0..k).map(|c| c.to_string()).collect(),
        }
    }

    pub fn decode(&self, label: usize) -> &str {
        &self.names[label]
    }

    pub fn n_classes(&self) -> usize {
        self.names.len()
    }
}

/// Per-class instance counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub counts: Vec<usize>,
    pub total: usize,
}

impl GroupCounts {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    /// Empirical class frequency `N_a / N`.
    pub fn base_rate(&self, class: usize) -> f64 {
        self.counts[class] as f64 / self.total as f64
    }

    pub fn base_rates(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|a| self.base_rate(a)).collect()
    }
}

/// Validated audit input: target `y`, score `s` and sensitive label `a`
/// for each instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditDataset {
    targets: Matrix,
    scores: Matrix,
    sensitive: Vec<usize>,
    encoding: LabelEncoding,
}

impl AuditDataset {
    /// Validates raw arrays and densifies the sensitive labels.
    ///
    /// Every class must have at least `folds` members so stratified
    /// cross-validation can place one in each fold.
    pub fn validate<S: AsRef<str>>(
        targets: Matrix,
        scores: Matrix,
        sensitive: &[S],
        folds: usize,
    ) -> Result<Self> {
        let (labels, encoding) = LabelEncoding::encode(sensitive);
        Self::from_encoded(targets, scores, labels, encoding, folds)
    }

    /// Same as [`AuditDataset::validate`] for labels that are already dense
    /// class indices.
    pub fn from_labels(
        targets: Matrix,
        scores: Matrix,
        sensitive: Vec<usize>,
        folds: usize,
    ) -> Result<Self> {
        let k = sensitive.iter().max().map_or(0, |m| m + 1);
        Self::from_encoded(targets, scores, sensitive, LabelEncoding::identity(k), folds)
    }

    /// One-dimensional convenience constructor.
    pub fn from_columns(y: Vec<f64>, s: Vec<f64>, a: Vec<usize>, folds: usize) -> Result<Self> {
        Self::from_labels(Matrix::column(y), Matrix::column(s), a, folds)
    }

    fn from_encoded(
        targets: Matrix,
        scores: Matrix,
        sensitive: Vec<usize>,
        encoding: LabelEncoding,
        folds: usize,
    ) -> Result<Self> {
        let n = sensitive.len();
        if targets.nrows() != n {
            return Err(AuditError::LengthMismatch {
                what: "targets",
                expected: n,
                found: targets.nrows(),
            });
        }
        if scores.nrows() != n {
            return Err(AuditError::LengthMismatch {
                what: "scores",
                expected: n,
                found: scores.nrows(),
            });
        }
        if targets.ncols() == 0 || scores.ncols() == 0 {
            return Err(AuditError::InvalidParameter(
                "targets and scores need at least one column".into(),
            ));
        }
        check_finite(&targets, "targets")?;
        check_finite(&scores, "scores")?;

        let k = encoding.n_classes();
        let mut counts = vec![0usize; k];
        for &a in &sensitive {
            if a >= k {
                return Err(AuditError::InvalidParameter(format!(
                    "label {a} outside the encoded alphabet of {k} classes"
                )));
            }
            counts[a] += 1;
        }
        let present = counts.iter().filter(|&&c| c > 0).count();
        if present < 2 {
            return Err(AuditError::TooFewClasses(present));
        }
        if present < k {
            return Err(AuditError::InvalidParameter(
                "dense labels must use every class index 0..K-1".into(),
            ));
        }
        if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &c)| c < folds) {
            return Err(AuditError::ClassTooSmall {
                class: encoding.decode(class).to_string(),
                count,
                folds,
            });
        }

        Ok(Self {
            targets,
            scores,
            sensitive,
            encoding,
        })
    }

    pub fn len(&self) -> usize {
        self.sensitive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensitive.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.encoding.n_classes()
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    pub fn sensitive(&self) -> &[usize] {
        &self.sensitive
    }

    pub fn encoding(&self) -> &LabelEncoding {
        &self.encoding
    }

    /// Raw sensitive tokens, in row order.
    pub fn decoded_sensitive(&self) -> Vec<&str> {
        self.sensitive
            .iter()
            .map(|&a| self.encoding.decode(a))
            .collect()
    }

    pub fn group_counts(&self) -> GroupCounts {
        group_counts(&self.sensitive, self.n_classes())
    }
}

/// Counts `N_a` of each class in `labels`.
pub fn group_counts(labels: &[usize], n_classes: usize) -> GroupCounts {
    let mut counts = vec![0usize; n_classes];
    for &a in labels {
        counts[a] += 1;
    }
    GroupCounts {
        counts,
        total: labels.len(),
    }
}

fn check_finite(m: &Matrix, what: &'static str) -> Result<()> {
    for (row, r) in m.rows_iter().enumerate() {
        if r.iter().any(|v| !v.is_finite()) {
            return Err(AuditError::NonFinite { what, row });
        }
    }
    Ok(())
}
