//! Probabilistic classifiers of the sensitive attribute.
//!
//! A random Gaussian radial-basis expansion of the (standardized) input is
//! followed by L2-penalized multinomial logistic regression. Cross-entropy
//! is a proper loss, so the fitted posteriors are calibrated estimates of
//! `p(a | input)` when the basis is rich enough.
//!
//! Binary problems use a single weight column with `û(0|x) = 1 − û(1|x)`;
//! `K > 2` classes use one column per class.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{AuditError, Result};

/// How the RBF bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum BandwidthRule {
    /// Median pairwise distance of (at most 500) standardized rows,
    /// multiplied by the given factor.
    MedianHeuristic(f64),
    Explicit(f64),
}

/// Half the median distance. The full median gives kernels too wide to
/// resolve group differences in the tails on the simulated scenarios.
impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::MedianHeuristic(0.5)
    }
}

const MEDIAN_SUBSAMPLE: usize = 500;

/// Gaussian bumps `exp(−‖x − c‖² / (2 h²))` on standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfFeatureMap {
    centres: Matrix,
    bandwidth: f64,
    include_bias: bool,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl RbfFeatureMap {
    /// Draws `n_basis` centres uniformly (with replacement) from the
    /// standardized rows of `inputs`.
    pub fn fit(inputs: &Matrix, n_basis: usize, rule: BandwidthRule, seed: u64) -> Result<Self> {
        if n_basis < 1 {
            return Err(AuditError::InvalidParameter("n_basis must be at least 1".into()));
        }
        let n = inputs.nrows();
        let d = inputs.ncols();
        if n == 0 || d == 0 {
            return Err(AuditError::InvalidParameter("empty input matrix".into()));
        }

        let mut mean = vec![0.0; d];
        let mut scale = vec![0.0; d];
        for row in inputs.rows_iter() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for row in inputs.rows_iter() {
            for j in 0..d {
                scale[j] += (row[j] - mean[j]).powi(2);
            }
        }
        for (j, s) in scale.iter_mut().enumerate() {
            *s = (*s / n as f64).sqrt();
            if s.is_nan() || *s <= 1e-12 {
                warn!("input dimension {j} has zero variance; using unit scale");
                *s = 1.0;
            }
        }

        let standardize = |row: &[f64]| -> Vec<f64> {
            row.iter()
                .zip(mean.iter().zip(&scale))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        };

        // Draw from rows in sorted order so the map depends on the set of
        // rows, not on how they happen to be ordered.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            inputs
                .row(i)
                .iter()
                .zip(inputs.row(j))
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centres = Vec::with_capacity(n_basis * d);
        for _ in 0..n_basis {
            let i = order[rng.random_range(0..n)];
            centres.extend(standardize(inputs.row(i)));
        }
        let centres = Matrix::new(n_basis, d, centres)?;

        let bandwidth = match rule {
            BandwidthRule::Explicit(h) => {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(AuditError::InvalidParameter(format!(
                        "bandwidth must be positive, got {h}"
                    )));
                }
                h
            }
            BandwidthRule::MedianHeuristic(factor) => {
                if !(factor > 0.0 && factor.is_finite()) {
                    return Err(AuditError::InvalidParameter(format!(
                        "bandwidth factor must be positive, got {factor}"
                    )));
                }
                let take = n.min(MEDIAN_SUBSAMPLE);
                let rows: Vec<Vec<f64>> = index::sample(&mut rng, n, take)
                    .into_iter()
                    .map(|i| standardize(inputs.row(order[i])))
                    .collect();
                let med = median_pairwise_distance(&rows);
                if med > 1e-12 {
                    factor * med
                } else {
                    warn!("median pairwise distance is zero; falling back to unit bandwidth");
                    1.0
                }
            }
        };

        Ok(Self {
            centres,
            bandwidth,
            include_bias: true,
            mean,
            scale,
        })
    }

    /// Map with explicitly chosen centres (in standardized units).
    pub fn with_centres(
        centres: Matrix,
        bandwidth: f64,
        mean: Vec<f64>,
        scale: Vec<f64>,
    ) -> Result<Self> {
        let d = centres.ncols();
        if centres.nrows() < 1 || mean.len() != d || scale.len() != d {
            return Err(AuditError::InvalidParameter(
                "centres, mean and scale must share one dimension".into(),
            ));
        }
        if bandwidth.is_nan() || bandwidth <= 0.0 || scale.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(AuditError::InvalidParameter(
                "bandwidth and scales must be positive".into(),
            ));
        }
        Ok(Self {
            centres,
            bandwidth,
            include_bias: true,
            mean,
            scale,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_basis(&self) -> usize {
        self.centres.nrows()
    }

    /// Number of output features, including the bias column.
    pub fn n_features(&self) -> usize {
        self.n_basis() + usize::from(self.include_bias)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn centres(&self) -> &Matrix {
        &self.centres
    }

    pub fn has_bias(&self) -> bool {
        self.include_bias
    }

    /// Feature matrix `N × n_features`; the bias column (if any) is last.
    pub fn transform(&self, inputs: &Matrix) -> Result<Matrix> {
        let d = self.input_dim();
        if inputs.ncols() != d {
            return Err(AuditError::DimensionMismatch {
                expected: d,
                found: inputs.ncols(),
            });
        }
        let p = self.n_features();
        let gamma = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        let mut out = Matrix::zeros(inputs.nrows(), p);
        let mut z = vec![0.0; d];
        for (i, row) in inputs.rows_iter().enumerate() {
            for j in 0..d {
                z[j] = (row[j] - self.mean[j]) / self.scale[j];
            }
            let dst = out.row_mut(i);
            for (m, c) in self.centres.rows_iter().enumerate() {
                let sq: f64 = z.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                dst[m] = (-gamma * sq).exp();
            }
            if self.include_bias {
                dst[p - 1] = 1.0;
            }
        }
        Ok(out)
    }
}

/// Median of all pairwise Euclidean distances between `rows`.
fn median_pairwise_distance(rows: &[Vec<f64>]) -> f64 {
    let mut dists = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let sq: f64 = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(sq.sqrt());
        }
    }
    if dists.is_empty() {
        return 0.0;
    }
    let mid = dists.len() / 2;
    let (_, m, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if dists.len() % 2 == 1 {
        upper
    } else {
        let lower = dists[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Per-instance class probabilities, clamped away from 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMatrix {
    probs: Matrix,
    clamp_epsilon: f64,
}

const ROW_SUM_TOLERANCE: f64 = 1e-9;

impl ProbabilityMatrix {
    /// Clamps every entry to `[ε, 1−ε]` and renormalizes each row.
    pub fn new(probs: Matrix, clamp_epsilon: f64) -> Result<Self> {
        if !(clamp_epsilon > 0.0 && clamp_epsilon < 0.5) {
            return Err(AuditError::InvalidParameter(format!(
                "clamp epsilon must lie in (0, 0.5), got {clamp_epsilon}"
            )));
        }
        let mut probs = probs;
        check_rows(&probs)?;
        for i in 0..probs.nrows() {
            let row = probs.row_mut(i);
            let mut sum = 0.0;
            for p in row.iter_mut() {
                *p = p.clamp(clamp_epsilon, 1.0 - clamp_epsilon);
                sum += *p;
            }
            if sum != 1.0 {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(Self {
            probs,
            clamp_epsilon,
        })
    }

    /// Takes rows as given, without clamping. Zero entries are allowed, so
    /// downstream logs and ratios can be infinite.
    pub fn unclamped(probs: Matrix) -> Result<Self> {
        check_rows(&probs)?;
        Ok(Self {
            probs,
            clamp_epsilon: 0.0,
        })
    }

    /// Every row equal to `row` (e.g. the class base rates).
    pub fn constant(row: &[f64], n: usize, clamp_epsilon: f64) -> Result<Self> {
        let data = row.iter().copied().cycle().take(n * row.len()).collect();
        Self::new(Matrix::new(n, row.len(), data)?, clamp_epsilon)
    }

    #[inline]
    pub fn prob(&self, i: usize, class: usize) -> f64 {
        self.probs.get(i, class)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.probs.row(i)
    }

    pub fn len(&self) -> usize {
        self.probs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.nrows() == 0
    }

    pub fn n_classes(&self) -> usize {
        self.probs.ncols()
    }

    pub fn clamp_epsilon(&self) -> f64 {
        self.clamp_epsilon
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.probs
    }

    /// Probability of each instance's own class, `û(a_i | ·_i)`.
    pub fn own_class(&self, labels: &[usize]) -> Vec<f64> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &a)| self.prob(i, a))
            .collect()
    }
}

fn check_rows(probs: &Matrix) -> Result<()> {
    if probs.ncols() < 2 {
        return Err(AuditError::InvalidProbabilities(
            "need at least two class columns".into(),
        ));
    }
    for (i, row) in probs.rows_iter().enumerate() {
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(AuditError::InvalidProbabilities(format!(
                "row {i} has an entry outside [0, 1]"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(AuditError::InvalidProbabilities(format!(
                "row {i} sums to {sum}"
            )));
        }
    }
    Ok(())
}

/// L2-penalized mean cross-entropy over a fixed feature matrix.
///
/// Parameters are stored class-major: block `k` of length `P` holds the
/// weights of column `k`. The bias (last feature, when present) is not
/// penalized.
pub struct LogisticObjective {
    features: DMatrix<f64>,
    onehot: DMatrix<f64>,
    columns: usize,
    l2_strength: f64,
    penalized: DVector<f64>,
}

impl LogisticObjective {
    pub fn new(
        features: &Matrix,
        labels: &[usize],
        n_classes: usize,
        l2_strength: f64,
        bias_last: bool,
    ) -> Result<Self> {
        let n = features.nrows();
        let p = features.ncols();
        if labels.len() != n {
            return Err(AuditError::LengthMismatch {
                what: "labels",
                expected: n,
                found: labels.len(),
            });
        }
        if !(l2_strength >= 0.0 && l2_strength.is_finite()) {
            return Err(AuditError::InvalidParameter(format!(
                "l2 strength must be non-negative, got {l2_strength}"
            )));
        }
        if let Some(row) = features.rows_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(AuditError::NonFinite {
                what: "features",
                row,
            });
        }
        let mut present = vec![false; n_classes];
        for &a in labels {
            if a >= n_classes {
                return Err(AuditError::InvalidParameter(format!(
                    "label {a} outside {n_classes} classes"
                )));
            }
            present[a] = true;
        }
        let n_present = present.iter().filter(|&&b| b).count();
        if n_present < 2 {
            return Err(AuditError::TooFewClasses(n_present));
        }

        let columns = if n_classes == 2 { 1 } else { n_classes };
        let mut onehot = DMatrix::zeros(n, columns);
        for (i, &a) in labels.iter().enumerate() {
            if columns == 1 {
                onehot[(i, 0)] = a as f64;
            } else {
                onehot[(i, a)] = 1.0;
            }
        }
        let mut penalized = DVector::from_element(p * columns, 1.0);
        if bias_last {
            for k in 0..columns {
                penalized[k * p + p - 1] = 0.0;
            }
        }
        Ok(Self {
            features: DMatrix::from_row_slice(n, p, features.as_slice()),
            onehot,
            columns,
            l2_strength,
            penalized,
        })
    }

    pub fn n_params(&self) -> usize {
        self.features.ncols() * self.columns
    }

    fn n(&self) -> f64 {
        self.features.nrows() as f64
    }

    fn weights(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let p = self.features.ncols();
        DMatrix::from_column_slice(p, self.columns, theta.as_slice())
    }

    /// Class probabilities (`N × columns`); for binary, `P(a = 1)`.
    fn probabilities(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let mut z = &self.features * self.weights(theta);
        if self.columns == 1 {
            z.apply(|v| *v = sigmoid(*v));
        } else {
            for mut row in z.row_iter_mut() {
                let max = row.max();
                row.apply(|v| *v = (*v - max).exp());
                let s = row.sum();
                row /= s;
            }
        }
        z
    }

    fn penalty(&self, theta: &DVector<f64>) -> f64 {
        0.5 * self.l2_strength * theta.component_mul(&self.penalized).dot(theta)
    }

    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        let z = &self.features * self.weights(theta);
        let mut loss = 0.0;
        if self.columns == 1 {
            for (zi, yi) in z.iter().zip(self.onehot.iter()) {
                // log(1 + e^z) − y z, computed stably
                loss += softplus(*zi) - yi * zi;
            }
        } else {
            for (zrow, yrow) in z.row_iter().zip(self.onehot.row_iter()) {
                let max = zrow.max();
                let lse = max + zrow.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                loss += lse - zrow.dot(&yrow);
            }
        }
        loss / self.n() + self.penalty(theta)
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let resid = self.probabilities(theta) - &self.onehot;
        let g = self.features.transpose() * resid / self.n();
        DVector::from_column_slice(g.as_slice())
            + self.l2_strength * theta.component_mul(&self.penalized)
    }

    pub fn hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let probs = self.probabilities(theta);
        let p = self.features.ncols();
        let n = self.n();
        let dim = self.n_params();
        let mut h = DMatrix::zeros(dim, dim);
        for k in 0..self.columns {
            for l in k..self.columns {
                let w: DVector<f64> = if self.columns == 1 {
                    probs.column(0).map(|q| q * (1.0 - q))
                } else if k == l {
                    probs.column(k).map(|q| q * (1.0 - q))
                } else {
                    -probs.column(k).component_mul(&probs.column(l))
                };
                let mut weighted = self.features.clone();
                for (mut row, wi) in weighted.row_iter_mut().zip(w.iter()) {
                    row *= *wi;
                }
                let block = self.features.transpose() * weighted / n;
                h.view_mut((k * p, l * p), (p, p)).copy_from(&block);
                if k != l {
                    h.view_mut((l * p, k * p), (p, p)).copy_from(&block.transpose());
                }
            }
        }
        for i in 0..dim {
            h[(i, i)] += self.l2_strength * self.penalized[i];
        }
        h
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Convergence settings for [`LogisticModel::fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-6,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub objective: f64,
    pub converged: bool,
}

/// Damped Newton iteration with Armijo backtracking.
pub fn minimize(
    objective: &LogisticObjective,
    start: DVector<f64>,
    options: SolverOptions,
) -> Result<(DVector<f64>, FitSummary)> {
    let mut theta = start;
    let mut value = objective.value(&theta);
    let mut grad = objective.gradient(&theta);
    let mut iterations = 0;

    while grad.norm() > options.gradient_tolerance && iterations < options.max_iterations {
        iterations += 1;
        let h = objective.hessian(&theta);
        let step = newton_direction(h, &grad)?;
        let slope = grad.dot(&step);

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &theta + t * &step;
            let v = objective.value(&candidate);
            if v.is_finite() && v <= value + 1e-4 * t * slope {
                theta = candidate;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        grad = objective.gradient(&theta);
        if !accepted {
            // No decrease is representable any more; the gradient check
            // below reports whether this point is acceptable.
            break;
        }
    }

    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(AuditError::Numerical(
            "logistic objective diverged".into(),
        ));
    }
    let gradient_norm = grad.norm();
    Ok((
        theta,
        FitSummary {
            iterations,
            gradient_norm,
            objective: value,
            converged: gradient_norm <= options.gradient_tolerance,
        },
    ))
}

fn newton_direction(h: DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = h.diagonal().amax().max(1e-300);
    let mut jitter = 0.0;
    for _ in 0..20 {
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            let mut step = chol.solve(grad);
            step.neg_mut();
            return Ok(step);
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 10.0 };
    }
    Err(AuditError::Numerical(
        "Hessian could not be factorized".into(),
    ))
}

/// A fitted classifier `û(a | input)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// `n_features × columns`, one column for binary problems.
    weights: Matrix,
    l2_strength: f64,
    n_classes: usize,
    feature_map: RbfFeatureMap,
    summary: FitSummary,
}

impl LogisticModel {
    /// Fits the penalized cross-entropy on `feature_map(inputs)`.
    pub fn fit(
        feature_map: RbfFeatureMap,
        inputs: &Matrix,
        labels: &[usize],
        n_classes: usize,
        l2_strength: f64,
        options: SolverOptions,
    ) -> Result<Self> {
        let features = feature_map.transform(inputs)?;
        let objective =
            LogisticObjective::new(&features, labels, n_classes, l2_strength, feature_map.has_bias())?;
        let p = features.ncols();
        let columns = objective.columns;

        let mut start = DVector::zeros(p * columns);
        if feature_map.has_bias() {
            let counts = crate::dataset::group_counts(labels, n_classes);
            let rate = |a: usize| (counts.counts[a].max(1)) as f64 / counts.total as f64;
            if columns == 1 {
                start[p - 1] = (rate(1) / rate(0)).ln();
            } else {
                for k in 0..columns {
                    start[k * p + p - 1] = rate(k).ln();
                }
            }
        }

        let (theta, summary) = minimize(&objective, start, options)?;
        if !summary.converged {
            warn!(
                "logistic fit stopped after {} iterations with gradient norm {:.3e}",
                summary.iterations, summary.gradient_norm
            );
        }
        let mut weights = Matrix::zeros(p, columns);
        for k in 0..columns {
            for j in 0..p {
                weights.row_mut(j)[k] = theta[k * p + j];
            }
        }
        Ok(Self {
            weights,
            l2_strength,
            n_classes,
            feature_map,
            summary,
        })
    }

    /// Model with the given weights (`n_features × columns`).
    pub fn from_weights(
        feature_map: RbfFeatureMap,
        weights: Matrix,
        n_classes: usize,
        l2_strength: f64,
    ) -> Result<Self> {
        let columns = if n_classes == 2 { 1 } else { n_classes };
        if weights.nrows() != feature_map.n_features() || weights.ncols() != columns {
            return Err(AuditError::DimensionMismatch {
                expected: feature_map.n_features() * columns,
                found: weights.nrows() * weights.ncols(),
            });
        }
        Ok(Self {
            weights,
            l2_strength,
            n_classes,
            feature_map,
            summary: FitSummary {
                iterations: 0,
                gradient_norm: f64::NAN,
                objective: f64::NAN,
                converged: false,
            },
        })
    }

    pub fn summary(&self) -> &FitSummary {
        &self.summary
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn feature_map(&self) -> &RbfFeatureMap {
        &self.feature_map
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn l2_strength(&self) -> f64 {
        self.l2_strength
    }

    /// Euclidean norm of the penalized (non-bias) weights.
    pub fn penalized_weight_norm(&self) -> f64 {
        let skip = if self.feature_map.has_bias() {
            Some(self.weights.nrows() - 1)
        } else {
            None
        };
        let mut sq = 0.0;
        for j in 0..self.weights.nrows() {
            if Some(j) == skip {
                continue;
            }
            sq += self.weights.row(j).iter().map(|w| w * w).sum::<f64>();
        }
        sq.sqrt()
    }

    /// Softmax probabilities before clamping; rows sum to one.
    pub fn raw_proba(&self, inputs: &Matrix) -> Result<Matrix> {
        let features = self.feature_map.transform(inputs)?;
        let n = features.nrows();
        let mut out = Matrix::zeros(n, self.n_classes);
        let columns = self.weights.ncols();
        let mut z = vec![0.0; columns];
        for (i, phi) in features.rows_iter().enumerate() {
            z.iter_mut().for_each(|v| *v = 0.0);
            for (f, wrow) in phi.iter().zip(self.weights.rows_iter()) {
                for (zk, w) in z.iter_mut().zip(wrow) {
                    *zk += f * w;
                }
            }
            let dst = out.row_mut(i);
            if columns == 1 {
                let p1 = sigmoid(z[0]);
                dst[1] = p1;
                dst[0] = 1.0 - p1;
            } else {
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for (d, zk) in dst.iter_mut().zip(&z) {
                    *d = (zk - max).exp();
                    sum += *d;
                }
                dst.iter_mut().for_each(|d| *d /= sum);
            }
        }
        Ok(out)
    }

    pub fn predict_proba(&self, inputs: &Matrix, clamp_epsilon: f64) -> Result<ProbabilityMatrix> {
        ProbabilityMatrix::new(self.raw_proba(inputs)?, clamp_epsilon)
    }
}

/// Hyperparameters shared by the audit's classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub n_basis: usize,
    pub l2_strength: f64,
    pub clamp_epsilon: f64,
    pub bandwidth: BandwidthRule,
    pub solver: SolverOptions,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            n_basis: 100,
            l2_strength: 1e-2,
            clamp_epsilon: 1e-6,
            bandwidth: BandwidthRule::default(),
            solver: SolverOptions::default(),
        }
    }
}

impl ClassifierConfig {
    /// Builds the feature map on `inputs` and fits the classifier.
    pub fn train(
        &self,
        inputs: &Matrix,
        labels: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Result<LogisticModel> {
        let map = RbfFeatureMap::fit(inputs, self.n_basis, self.bandwidth, seed)?;
        LogisticModel::fit(map, inputs, labels, n_classes, self.l2_strength, self.solver)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_column(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::column((0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
    }

    #[test]
    fn degenerate_inputs_fall_back_to_unit_bandwidth() {
        let x = Matrix::column(vec![3.0; 50]);
        let map = RbfFeatureMap::fit(&x, 10, BandwidthRule::default(), 1).unwrap();
        assert_eq!(map.bandwidth(), 1.0);
        let first = map.centres().row(0).to_vec();
        assert!(map.centres().rows_iter().all(|c| c == first.as_slice()));
    }

    #[test]
    fn feature_map_is_deterministic() {
        let x = gaussian_column(300, 4);
        let a = RbfFeatureMap::fit(&x, 20, BandwidthRule::default(), 9).unwrap();
        let b = RbfFeatureMap::fit(&x, 20, BandwidthRule::default(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_basis_is_rejected() {
        let x = gaussian_column(10, 0);
        assert!(RbfFeatureMap::fit(&x, 0, BandwidthRule::default(), 0).is_err());
    }

    #[test]
    fn median_heuristic_matches_brute_force_on_gaussian_inputs() {
        let x = gaussian_column(1000, 11);
        let map = RbfFeatureMap::fit(&x, 100, BandwidthRule::MedianHeuristic(1.0), 3).unwrap();
        // brute-force median over all pairs of the standardized sample
        let v = x.column_values(0);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        let z: Vec<f64> = v.iter().map(|t| (t - mean) / sd).collect();
        let mut all = Vec::new();
        for i in 0..z.len() {
            for j in i + 1..z.len() {
                all.push((z[i] - z[j]).abs());
            }
        }
        all.sort_by(f64::total_cmp);
        let full_median = 0.5 * (all[all.len() / 2 - 1] + all[all.len() / 2]);
        assert!((0.8..=1.6).contains(&full_median));
        assert!((0.8..=1.6).contains(&map.bandwidth()), "{}", map.bandwidth());
        assert!((map.bandwidth() - full_median).abs() < 0.1);
    }

    #[test]
    fn median_of_even_and_odd_counts() {
        let rows = vec![vec![0.0], vec![1.0], vec![3.0]];
        // distances 1, 3, 2
        assert_eq!(median_pairwise_distance(&rows), 2.0);
        let rows = vec![vec![0.0], vec![1.0], vec![3.0], vec![7.0]];
        // distances 1 3 7 2 6 4 -> sorted 1 2 3 4 6 7
        assert_eq!(median_pairwise_distance(&rows), 3.5);
    }

    #[test]
    fn zero_weights_give_uniform_rows() {
        let x = gaussian_column(20, 2);
        let map = RbfFeatureMap::fit(&x, 5, BandwidthRule::default(), 0).unwrap();
        let w = Matrix::zeros(map.n_features(), 3);
        let model = LogisticModel::from_weights(map, w, 3, 0.0).unwrap();
        let probs = model.predict_proba(&x, 1e-6).unwrap();
        for i in 0..probs.len() {
            for &p in probs.row(i) {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn independent_labels_with_strong_penalty_give_base_rates() {
        let n = 1000;
        let x = gaussian_column(n, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let labels: Vec<usize> = (0..n).map(|_| usize::from(rng.random::<f64>() < 0.7)).collect();
        let rate = labels.iter().sum::<usize>() as f64 / n as f64;
        let cfg = ClassifierConfig {
            l2_strength: 10.0,
            ..Default::default()
        };
        let model = cfg.train(&x, &labels, 2, 1).unwrap();
        let probs = model.predict_proba(&x, 1e-6).unwrap();
        let dev = (0..n)
            .map(|i| (probs.prob(i, 1) - rate).abs())
            .fold(0.0, f64::max);
        assert!(dev <= 0.02, "max deviation {dev}");
    }

    #[test]
    fn separable_inputs_are_learned() {
        let xs: Vec<f64> = (0..200).map(|i| -5.0 + 10.0 * (i as f64 + 0.5) / 200.0).collect();
        let labels: Vec<usize> = xs.iter().map(|&v| usize::from(v > 0.0)).collect();
        let x = Matrix::column(xs.clone());
        let cfg = ClassifierConfig {
            l2_strength: 1e-4,
            ..Default::default()
        };
        let model = cfg.train(&x, &labels, 2, 2).unwrap();
        let probs = model.predict_proba(&x, 1e-6).unwrap();
        for (i, &v) in xs.iter().enumerate() {
            if v >= 1.0 {
                assert!(probs.prob(i, 1) >= 0.95, "s={v}: {}", probs.prob(i, 1));
            } else if v <= -1.0 {
                assert!(probs.prob(i, 0) >= 0.95, "s={v}: {}", probs.prob(i, 0));
            }
        }
        let at3 = model.predict_proba(&Matrix::column(vec![3.0]), 1e-6).unwrap();
        assert!(at3.prob(0, 1) >= 0.95);
    }

    #[test]
    fn mirror_symmetric_data_puts_boundary_at_zero() {
        // (s, a) and (−s, 1−a) both present; centres symmetric about 0.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut xs = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..150 {
            let s: f64 = StandardNormal.sample(&mut rng);
            let a = usize::from(rng.random::<f64>() < 1.0 / (1.0 + (-2.0 * s).exp()));
            xs.push(s);
            labels.push(a);
            xs.push(-s);
            labels.push(1 - a);
        }
        let x = Matrix::column(xs);
        let centres = Matrix::column(vec![-2.0, -1.0, -0.3, 0.3, 1.0, 2.0]);
        let sd = (x.as_slice().iter().map(|v| v * v).sum::<f64>() / x.nrows() as f64).sqrt();
        let map = RbfFeatureMap::with_centres(centres, 0.8, vec![0.0], vec![sd]).unwrap();
        let model =
            LogisticModel::fit(map, &x, &labels, 2, 1e-3, SolverOptions::default()).unwrap();
        let p = model.raw_proba(&Matrix::column(vec![0.0])).unwrap();
        assert!((p.get(0, 1) - 0.5).abs() < 1e-6, "{}", p.get(0, 1));
    }

    #[test]
    fn binary_rows_use_the_complement_rule() {
        let x = gaussian_column(100, 12);
        let labels: Vec<usize> = x.as_slice().iter().map(|&v| usize::from(v > 0.3)).collect();
        let model = ClassifierConfig::default().train(&x, &labels, 2, 0).unwrap();
        let raw = model.raw_proba(&x).unwrap();
        for row in raw.rows_iter() {
            assert_eq!(row[0], 1.0 - row[1]);
            assert!((row[0] + row[1] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let x = gaussian_column(30, 1);
        let labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let model = ClassifierConfig::default().train(&x, &labels, 2, 0).unwrap();
        let wide = Matrix::zeros(3, 2);
        assert!(matches!(
            model.predict_proba(&wide, 1e-6),
            Err(AuditError::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn single_class_fit_is_rejected() {
        let x = gaussian_column(30, 1);
        let labels = vec![1usize; 30];
        assert!(matches!(
            ClassifierConfig::default().train(&x, &labels, 2, 0),
            Err(AuditError::TooFewClasses(1))
        ));
    }

    #[test]
    fn clamping_bounds_entries() {
        let m = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.25, 0.75]]).unwrap();
        let p = ProbabilityMatrix::new(m, 1e-6).unwrap();
        assert_eq!(p.row(0), &[1.0 - 1e-6, 1e-6]);
        assert_eq!(p.row(1), &[0.25, 0.75]);
        let bad = Matrix::from_rows(&[vec![0.6, 0.6]]).unwrap();
        assert!(ProbabilityMatrix::new(bad, 1e-6).is_err());
    }

    #[test]
    fn multiclass_fit_converges() {
        let n = 300;
        let x = gaussian_column(n, 21);
        let labels: Vec<usize> = x
            .as_slice()
            .iter()
            .map(|&v| if v < -0.5 { 0 } else if v < 0.5 { 1 } else { 2 })
            .collect();
        let model = ClassifierConfig::default().train(&x, &labels, 3, 4).unwrap();
        assert!(model.summary().converged);
        assert!(model.summary().gradient_norm <= 1e-6);
        let p = model.predict_proba(&Matrix::column(vec![-2.0, 0.0, 2.0]), 1e-6).unwrap();
        assert!(p.prob(0, 0) > 0.8 && p.prob(1, 1) > 0.5 && p.prob(2, 2) > 0.8);
    }

    #[test]
    fn stronger_penalty_never_grows_weights() {
        let n = 400;
        let x = gaussian_column(n, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let labels: Vec<usize> = x
            .as_slice()
            .iter()
            .map(|&v| usize::from(rng.random::<f64>() < sigmoid(1.5 * v)))
            .collect();
        let map = RbfFeatureMap::fit(&x, 30, BandwidthRule::default(), 0).unwrap();
        let mut last = f64::INFINITY;
        for l2 in [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0] {
            let m = LogisticModel::fit(map.clone(), &x, &labels, 2, l2, SolverOptions::default())
                .unwrap();
            let norm = m.penalized_weight_norm();
            assert!(norm <= last * (1.0 + 1e-9), "l2={l2}: {norm} > {last}");
            last = norm;
        }
    }
}
