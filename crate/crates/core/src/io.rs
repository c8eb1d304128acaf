//! CSV formats: audit datasets, sweep tables and simulation plot data.
//!
//! Floats are written in Rust's shortest round-trip representation, so
//! reading a written file reproduces every value bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::berk::SweepResult;
use crate::dataset::{AuditDataset, Matrix};
use crate::error::{AuditError, Result};

pub const SWEEP_HEADER: [&str; 8] = [
    "lambda", "rmse", "ratio_ind", "ratio_sep", "ratio_suf", "nmi_ind", "nmi_sep", "nmi_suf",
];

/// Column names of an audit CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetColumns {
    pub target: String,
    pub score: String,
    pub sensitive: String,
}

impl Default for DatasetColumns {
    fn default() -> Self {
        Self {
            target: "y".into(),
            score: "s".into(),
            sensitive: "a".into(),
        }
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Reads `(y, s, a)` from a headed CSV.
///
/// Comma-separated names select several columns for a multidimensional
/// target or score (e.g. `y1,y2`).
pub fn read_dataset<R: Read>(
    reader: R,
    columns: &DatasetColumns,
    folds: usize,
) -> Result<AuditDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AuditError::MissingColumn(name.to_string()))
    };
    let lookup = |spec: &str| -> Result<Vec<usize>> { spec.split(',').map(|c| find(c.trim())).collect() };
    let y_cols = lookup(&columns.target)?;
    let s_cols = lookup(&columns.score)?;
    let a_col = find(&columns.sensitive)?;

    let mut y = Vec::new();
    let mut s = Vec::new();
    let mut a = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let number = |col: usize| -> Result<f64> {
            let field = rec.get(col).unwrap_or("");
            field.parse().map_err(|_| AuditError::Parse {
                row: row + 1,
                column: headers[col].to_string(),
                message: format!("expected a number, found `{field}`"),
            })
        };
        for &c in &y_cols {
            y.push(number(c)?);
        }
        for &c in &s_cols {
            s.push(number(c)?);
        }
        a.push(rec.get(a_col).unwrap_or("").to_string());
    }
    let n = a.len();
    AuditDataset::validate(
        Matrix::new(n, y_cols.len(), y)?,
        Matrix::new(n, s_cols.len(), s)?,
        &a,
        folds,
    )
}

/// Writes a dataset with columns `y, s, a` (or `y1.., s1..` when
/// multidimensional), decoding the sensitive labels to their raw tokens.
pub fn write_dataset<W: Write>(writer: W, dataset: &AuditDataset) -> Result<()> {
    let names = |prefix: &str, d: usize| -> Vec<String> {
        if d == 1 {
            vec![prefix.to_string()]
        } else {
            (1..=d).map(|k| format!("{prefix}{k}")).collect()
        }
    };
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = names("y", dataset.targets().ncols());
    header.extend(names("s", dataset.scores().ncols()));
    header.push("a".into());
    wtr.write_record(&header)?;
    for (i, label) in dataset.decoded_sensitive().into_iter().enumerate() {
        let mut rec: Vec<String> = dataset.targets().row(i).iter().map(|v| fmt_float(*v)).collect();
        rec.extend(dataset.scores().row(i).iter().map(|v| fmt_float(*v)));
        rec.push(label.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(writer: W, result: &SweepResult) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(SWEEP_HEADER)?;
    for ((lambda, rmse), r) in result.lambdas.iter().zip(&result.rmse).zip(&result.reports) {
        wtr.write_record([
            fmt_float(*lambda),
            fmt_float(*rmse),
            fmt_opt(r.ratio_ind),
            fmt_opt(r.ratio_sep),
            fmt_opt(r.ratio_suf),
            fmt_opt(r.nmi_ind),
            fmt_opt(r.nmi_sep),
            fmt_opt(r.nmi_suf),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One parsed sweep row; empty measure cells read as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub rmse: f64,
    pub measures: [Option<f64>; 6],
}

pub fn read_sweep<R: Read>(reader: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(SWEEP_HEADER) {
        return Err(AuditError::InvalidParameter(format!(
            "unexpected sweep header `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |j: usize| -> Result<Option<f64>> {
            let f = rec.get(j).unwrap_or("");
            if f.is_empty() {
                return Ok(None);
            }
            f.parse().map(Some).map_err(|_| AuditError::Parse {
                row: row + 1,
                column: SWEEP_HEADER[j].to_string(),
                message: format!("expected a number, found `{f}`"),
            })
        };
        let required = |j: usize| {
            cell(j)?.ok_or_else(|| AuditError::Parse {
                row: row + 1,
                column: SWEEP_HEADER[j].to_string(),
                message: "empty field".into(),
            })
        };
        out.push(SweepRow {
            lambda: required(0)?,
            rmse: required(1)?,
            measures: [cell(2)?, cell(3)?, cell(4)?, cell(5)?, cell(6)?, cell(7)?],
        });
    }
    Ok(out)
}

/// Equal-width histogram of `values` on `[lo, hi)` (last bin closed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|k| lo + width * k as f64).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            if v < lo || v > hi || !v.is_finite() {
                continue;
            }
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self { edges, counts }
    }

    /// Mean and standard deviation from bin midpoints.
    pub fn moments(&self) -> (f64, f64) {
        let total: usize = self.counts.iter().sum();
        let mids: Vec<f64> = self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mean = mids
            .iter()
            .zip(&self.counts)
            .map(|(m, &c)| m * c as f64)
            .sum::<f64>()
            / total as f64;
        let var = mids
            .iter()
            .zip(&self.counts)
            .map(|(m, &c)| (m - mean).powi(2) * c as f64)
            .sum::<f64>()
            / total as f64;
        (mean, var.sqrt())
    }
}

pub const PLOT_HEADER: [&str; 9] = [
    "section", "a", "y", "s", "variable", "bin_low", "bin_high", "count", "density",
];
pub const PLOT_BINS: usize = 40;

/// Scatter triples `(y, s, a)` and per-group marginal histograms of `y`,
/// `s` and the residual `s − y`, all in one long-format CSV. Point rows
/// have `section = point`; histogram rows have `section = hist`.
pub fn write_plot_data<W: Write>(writer: W, dataset: &AuditDataset) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(PLOT_HEADER)?;
    let y = dataset.targets().column_values(0);
    let s = dataset.scores().column_values(0);
    let labels = dataset.decoded_sensitive();
    for i in 0..dataset.len() {
        wtr.write_record([
            "point",
            labels[i],
            &fmt_float(y[i]),
            &fmt_float(s[i]),
            "",
            "",
            "",
            "",
            "",
        ])?;
    }
    let resid: Vec<f64> = s.iter().zip(&y).map(|(s, y)| s - y).collect();
    for (name, values) in [("y", &y), ("s", &s), ("residual", &resid)] {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let hi = if hi > lo { hi } else { lo + 1.0 };
        for class in 0..dataset.n_classes() {
            let group: Vec<f64> = values
                .iter()
                .zip(dataset.sensitive())
                .filter(|(_, &a)| a == class)
                .map(|(v, _)| *v)
                .collect();
            let h = Histogram::new(&group, lo, hi, PLOT_BINS);
            let width = (hi - lo) / PLOT_BINS as f64;
            for (k, &c) in h.counts.iter().enumerate() {
                let density = c as f64 / (group.len() as f64 * width);
                wtr.write_record([
                    "hist",
                    dataset.encoding().decode(class),
                    "",
                    "",
                    name,
                    &fmt_float(h.edges[k]),
                    &fmt_float(h.edges[k + 1]),
                    &c.to_string(),
                    &fmt_float(density),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
