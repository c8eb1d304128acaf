//! Linear regression with a group fairness regularizer, and the
//! regularizer-weight sweep used to watch the fairness measures move.
//!
//! The fitted objective is
//!
//! ```text
//! (1/N) Σ_i (y_i − w·x_i − b)²
//!   + λ · [ 1/(N_0 N_1) Σ_{i: a_i=1} Σ_{j: a_j=0} g(y_i − y_j) (w·x_i − w·x_j) ]²
//! ```
//!
//! with `g(u) = exp(−u² / (2 h²))`. Signed cross-group differences cancel
//! inside the square, so the penalty only asks that predictions for
//! instances with similar targets agree across groups on average. The
//! bracket is linear in `w` (`w·d` for a fixed vector `d`), which makes the
//! problem a ridge-like quadratic solved in closed form.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{run_audit, AuditConfig};
use crate::dataset::{AuditDataset, Matrix};
use crate::error::{AuditError, Result};
use crate::report::{Diagnostic, FairnessReport};

/// Ridge added to the normal equations so degenerate designs stay solvable.
pub const RIDGE: f64 = 1e-8;

/// Standardized regression inputs with a binary protected label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    features: Matrix,
    target: Vec<f64>,
    sensitive: Vec<usize>,
    feature_names: Vec<String>,
}

impl TrainingSet {
    /// Validates and standardizes each feature column to zero mean and
    /// unit variance (constant columns are only centred).
    pub fn new(
        features: Matrix,
        target: Vec<f64>,
        sensitive: Vec<usize>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = target.len();
        if features.nrows() != n || sensitive.len() != n {
            return Err(AuditError::LengthMismatch {
                what: "training rows",
                expected: n,
                found: if features.nrows() != n {
                    features.nrows()
                } else {
                    sensitive.len()
                },
            });
        }
        if feature_names.len() != features.ncols() {
            return Err(AuditError::LengthMismatch {
                what: "feature names",
                expected: features.ncols(),
                found: feature_names.len(),
            });
        }
        if let Some(row) = features.rows_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(AuditError::NonFinite { what: "features", row });
        }
        if let Some(row) = target.iter().position(|v| !v.is_finite()) {
            return Err(AuditError::NonFinite { what: "target", row });
        }
        if let Some(&a) = sensitive.iter().find(|&&a| a > 1) {
            return Err(AuditError::InvalidParameter(format!(
                "protected label must be 0 or 1, found {a}"
            )));
        }
        let ones = sensitive.iter().filter(|&&a| a == 1).count();
        if ones == 0 || ones == n {
            return Err(AuditError::TooFewClasses(1));
        }

        let p = features.ncols();
        let mut features = features;
        for j in 0..p {
            let col = features.column_values(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for i in 0..n {
                let v = &mut features.row_mut(i)[j];
                *v = (*v - mean) / sd;
            }
        }
        Ok(Self {
            features,
            target,
            sensitive,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn sensitive(&self) -> &[usize] {
        &self.sensitive
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Rows by index, keeping the existing standardization.
    pub fn subset(&self, idx: &[usize]) -> TrainingSet {
        TrainingSet {
            features: self.features.select_rows(idx),
            target: idx.iter().map(|&i| self.target[i]).collect(),
            sensitive: idx.iter().map(|&i| self.sensitive[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Default kernel bandwidth: the (population) standard deviation of `y`.
    pub fn target_sd(&self) -> f64 {
        let n = self.len() as f64;
        let mean = self.target.iter().sum::<f64>() / n;
        (self.target.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl LinearModel {
    pub fn predict(&self, features: &Matrix) -> Vec<f64> {
        features
            .rows_iter()
            .map(|x| self.intercept + dot(x, &self.weights))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The group-fairness objective for one training set and bandwidth.
pub struct BerkObjective<'a> {
    train: &'a TrainingSet,
    /// Kernel-weighted mean cross-group feature difference; the penalty
    /// bracket equals `w · direction`.
    direction: Vec<f64>,
    lambda: f64,
}

impl<'a> BerkObjective<'a> {
    pub fn new(train: &'a TrainingSet, lambda: f64, kernel_bandwidth: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(AuditError::InvalidParameter(format!(
                "lambda must be non-negative, got {lambda}"
            )));
        }
        if !(kernel_bandwidth > 0.0 && kernel_bandwidth.is_finite()) {
            return Err(AuditError::InvalidParameter(format!(
                "kernel bandwidth must be positive, got {kernel_bandwidth}"
            )));
        }
        Ok(Self {
            train,
            direction: cross_group_direction(train, kernel_bandwidth),
            lambda,
        })
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    /// Squared penalty bracket `(w·d)²`, without the `λ` factor.
    pub fn penalty(&self, weights: &[f64]) -> f64 {
        dot(weights, &self.direction).powi(2)
    }

    pub fn value(&self, weights: &[f64], intercept: f64) -> f64 {
        let n = self.train.len() as f64;
        let sse: f64 = self
            .train
            .features
            .rows_iter()
            .zip(&self.train.target)
            .map(|(x, y)| (y - intercept - dot(x, weights)).powi(2))
            .sum();
        sse / n + self.lambda * self.penalty(weights)
    }

    /// Gradient with respect to `(weights, intercept)`.
    pub fn gradient(&self, weights: &[f64], intercept: f64) -> (Vec<f64>, f64) {
        let n = self.train.len() as f64;
        let mut gw = vec![0.0; weights.len()];
        let mut gb = 0.0;
        for (x, y) in self.train.features.rows_iter().zip(&self.train.target) {
            let r = y - intercept - dot(x, weights);
            for (g, xj) in gw.iter_mut().zip(x) {
                *g -= 2.0 * r * xj / n;
            }
            gb -= 2.0 * r / n;
        }
        let bracket = dot(weights, &self.direction);
        for (g, d) in gw.iter_mut().zip(&self.direction) {
            *g += 2.0 * self.lambda * bracket * d;
        }
        (gw, gb)
    }

    /// Exact minimizer via the (ridge-stabilized) normal equations.
    pub fn solve(&self) -> Result<LinearModel> {
        let x = &self.train.features;
        let n = x.nrows();
        let p = x.ncols();
        let nf = n as f64;
        let mean_x: Vec<f64> = (0..p)
            .map(|j| x.rows_iter().map(|r| r[j]).sum::<f64>() / nf)
            .collect();
        let mean_y = self.train.target.iter().sum::<f64>() / nf;

        let mut xc = DMatrix::zeros(n, p);
        for (i, r) in x.rows_iter().enumerate() {
            for j in 0..p {
                xc[(i, j)] = r[j] - mean_x[j];
            }
        }
        let yc = DVector::from_iterator(n, self.train.target.iter().map(|y| y - mean_y));
        let d = DVector::from_column_slice(&self.direction);

        let mut a = xc.transpose() * &xc / nf + self.lambda * &d * d.transpose();
        for j in 0..p {
            a[(j, j)] += RIDGE;
        }
        let rhs = xc.transpose() * yc / nf;
        let w = a
            .cholesky()
            .ok_or_else(|| AuditError::Numerical("normal equations are not positive definite".into()))?
            .solve(&rhs);
        let weights: Vec<f64> = w.iter().copied().collect();
        let intercept = mean_y - dot(&mean_x, &weights);
        Ok(LinearModel {
            weights,
            intercept,
            lambda: self.lambda,
        })
    }
}

/// `d = 1/(N_0 N_1) Σ_{i∈1} Σ_{j∈0} g(y_i − y_j) (x_i − x_j)`.
fn cross_group_direction(train: &TrainingSet, bandwidth: f64) -> Vec<f64> {
    let ones: Vec<usize> = (0..train.len()).filter(|&i| train.sensitive[i] == 1).collect();
    let zeros: Vec<usize> = (0..train.len()).filter(|&i| train.sensitive[i] == 0).collect();
    let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    // row sums of the kernel over the opposite group
    let mut w_one = vec![0.0; ones.len()];
    let mut w_zero = vec![0.0; zeros.len()];
    for (a, &i) in ones.iter().enumerate() {
        for (b, &j) in zeros.iter().enumerate() {
            let u = train.target[i] - train.target[j];
            let g = (-gamma * u * u).exp();
            w_one[a] += g;
            w_zero[b] += g;
        }
    }
    let p = train.n_features();
    let mut d = vec![0.0; p];
    for (&i, &g) in ones.iter().zip(&w_one) {
        for (dj, xj) in d.iter_mut().zip(train.features.row(i)) {
            *dj += g * xj;
        }
    }
    for (&j, &g) in zeros.iter().zip(&w_zero) {
        for (dj, xj) in d.iter_mut().zip(train.features.row(j)) {
            *dj -= g * xj;
        }
    }
    let norm = (ones.len() * zeros.len()) as f64;
    d.iter_mut().for_each(|v| *v /= norm);
    d
}

/// Fits the regularized model; `kernel_bandwidth` defaults to the target's
/// standard deviation.
pub fn fit_berk(
    train: &TrainingSet,
    lambda: f64,
    kernel_bandwidth: Option<f64>,
) -> Result<LinearModel> {
    let h = kernel_bandwidth.unwrap_or_else(|| train.target_sd());
    BerkObjective::new(train, lambda, h)?.solve()
}

/// `0` followed by 16 log-spaced points from `1e-4` to `1e2`.
pub fn default_lambda_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend((0..16).map(|k| 10f64.powf(-4.0 + 6.0 * k as f64 / 15.0)));
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    pub audit: AuditConfig,
    /// Share of each protected group used for fitting; the rest is audited.
    pub train_fraction: f64,
    pub split_seed: u64,
    pub kernel_bandwidth: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: default_lambda_grid(),
            audit: AuditConfig::default(),
            train_fraction: 0.7,
            split_seed: 0,
            kernel_bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub rmse: f64,
    /// `(w·d)²` at the fitted weights.
    pub penalty: f64,
    pub report: FairnessReport,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub lambdas: Vec<f64>,
    pub reports: Vec<FairnessReport>,
    pub rmse: Vec<f64>,
    pub penalties: Vec<f64>,
    pub diagnostics: Vec<Vec<Diagnostic>>,
}

impl SweepResult {
    fn from_points(points: Vec<SweepPoint>) -> Self {
        let mut out = SweepResult {
            lambdas: Vec::new(),
            reports: Vec::new(),
            rmse: Vec::new(),
            penalties: Vec::new(),
            diagnostics: Vec::new(),
        };
        for p in points {
            out.lambdas.push(p.lambda);
            out.reports.push(p.report);
            out.rmse.push(p.rmse);
            out.penalties.push(p.penalty);
            out.diagnostics.push(p.diagnostics);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// Stratified split by protected group: `fraction` of each group trains.
pub fn stratified_split(sensitive: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for g in 0..2 {
        let mut idx: Vec<usize> = (0..sensitive.len()).filter(|&i| sensitive[i] == g).collect();
        idx.shuffle(&mut rng);
        let cut = (fraction * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..cut]);
        test.extend_from_slice(&idx[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Fits one model per `λ` on the training split and audits its held-out
/// predictions.
pub fn sweep(data: &TrainingSet, config: &SweepConfig) -> Result<SweepResult> {
    if config.lambdas.is_empty() {
        return Err(AuditError::InvalidParameter("lambda grid is empty".into()));
    }
    if config.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(AuditError::InvalidParameter("lambdas must be non-negative".into()));
    }
    if config.lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AuditError::InvalidParameter(
            "lambdas must be strictly increasing".into(),
        ));
    }
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(AuditError::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {}",
            config.train_fraction
        )));
    }
    config.audit.validate()?;

    let (train_idx, test_idx) =
        stratified_split(data.sensitive(), config.train_fraction, config.split_seed);
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    let h = config.kernel_bandwidth.unwrap_or_else(|| train.target_sd());
    let objective_direction = cross_group_direction(&train, h);

    let points: Vec<SweepPoint> = config
        .lambdas
        .par_iter()
        .map(|&lambda| {
            let model = BerkObjective {
                train: &train,
                direction: objective_direction.clone(),
                lambda,
            }
            .solve()?;
            let predictions = model.predict(test.features());
            let rmse = (test
                .target()
                .iter()
                .zip(&predictions)
                .map(|(y, p)| (y - p).powi(2))
                .sum::<f64>()
                / test.len() as f64)
                .sqrt();
            let audit_data = AuditDataset::from_columns(
                test.target().to_vec(),
                predictions,
                test.sensitive().to_vec(),
                config.audit.folds_required(),
            )?;
            let audit = run_audit(&audit_data, &config.audit)?;
            Ok(SweepPoint {
                lambda,
                rmse,
                penalty: dot(&model.weights, &objective_direction).powi(2),
                report: audit.report,
                diagnostics: audit.diagnostics,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult::from_points(points))
}

/// Group effect used when no census file is available.
pub const SURROGATE_GROUP_EFFECT: f64 = 5.0;
const SURROGATE_NOISE_SD: f64 = 2.0;

/// Synthetic stand-in for the census data: a continuous group-share
/// feature `u` defines the protected label (`u > 0.5`) and enters the
/// target as `group_effect · u`, next to four neutral features. The noise
/// is large enough that least squares shrinks predictions towards each
/// group's mean, which is what the regularizer then removes.
pub fn surrogate_training_set(n: usize, group_effect: f64, seed: u64) -> Result<TrainingSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    let mut sensitive = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let share = 1.0 / (1.0 + (-(1.5 * z - 1.0)).exp());
        let x: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let noise: f64 = StandardNormal.sample(&mut rng);
        let y = x[0] + 0.5 * x[1] + 0.25 * x[2] + group_effect * share + SURROGATE_NOISE_SD * noise;
        let mut row = vec![share];
        row.extend_from_slice(&x);
        // a jittered copy of the share, as census proxies tend to be
        row.push(share + 0.05 * rng.random::<f64>());
        rows.push(row);
        target.push(y);
        sensitive.push(usize::from(share > 0.5));
    }
    let names = ["share", "x1", "x2", "x3", "x4", "share_proxy"]
        .map(String::from)
        .to_vec();
    TrainingSet::new(Matrix::from_rows(&rows)?, target, sensitive, names)
}
