//! Expected density-ratio measures for a binary sensitive attribute.
//!
//! Each measure is the pooled-sample average of a classifier odds ratio:
//!
//! * `a_ind = N_0 / (N_1 N) · Σ_i û(1|s_i) / û(0|s_i)`
//! * `a_sep = 1/N · Σ_i [û(1|y_i,s_i) / û(0|y_i,s_i)] · [û(0|y_i) / û(1|y_i)]`
//! * `a_suf = 1/N · Σ_i [û(1|y_i,s_i) / û(0|y_i,s_i)] · [û(0|s_i) / û(1|s_i)]`
//!
//! A value of 1 means the criterion holds on average. The average can hide
//! opposing violations that cancel, so a value near 1 is not a certificate
//! of fairness. A single instance with a near-zero denominator can also
//! dominate the sum; [`RatioEstimate::max_term_share`] exposes this.

use serde::{Deserialize, Serialize};

use crate::classifier::ProbabilityMatrix;
use crate::dataset::GroupCounts;
use crate::error::{AuditError, Result};

/// Share of the sum above which one term is said to dominate an estimate.
pub const DOMINATION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub value: f64,
    /// Largest single-instance term divided by the sum of all terms.
    pub max_term_share: f64,
    /// Row of that largest term.
    pub max_term_index: usize,
}

impl RatioEstimate {
    pub fn is_dominated(&self) -> bool {
        self.max_term_share > DOMINATION_THRESHOLD
    }

    fn from_terms(prefactor: f64, terms: impl Iterator<Item = f64>) -> Self {
        let mut sum = 0.0;
        let mut max = f64::NEG_INFINITY;
        let mut max_term_index = 0;
        for (i, t) in terms.enumerate() {
            sum += t;
            if t > max {
                max = t;
                max_term_index = i;
            }
        }
        let max_term_share = if sum > 0.0 { max / sum } else { 0.0 };
        Self {
            value: prefactor * sum,
            max_term_share,
            max_term_index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioMeasures {
    pub a_ind: RatioEstimate,
    pub a_sep: RatioEstimate,
    pub a_suf: RatioEstimate,
    /// Largest single-term share across the three estimates.
    pub dominated_fraction: f64,
}

impl RatioMeasures {
    pub fn compute(
        probs_s: &ProbabilityMatrix,
        probs_y: &ProbabilityMatrix,
        probs_ys: &ProbabilityMatrix,
        counts: &GroupCounts,
    ) -> Result<Self> {
        let a_ind = ratio_ind(probs_s, counts)?;
        let a_sep = ratio_sep(probs_ys, probs_y)?;
        let a_suf = ratio_suf(probs_ys, probs_s)?;
        let dominated_fraction = a_ind
            .max_term_share
            .max(a_sep.max_term_share)
            .max(a_suf.max_term_share);
        Ok(Self {
            a_ind,
            a_sep,
            a_suf,
            dominated_fraction,
        })
    }
}

fn require_binary(probs: &ProbabilityMatrix) -> Result<()> {
    match probs.n_classes() {
        2 => Ok(()),
        k => Err(AuditError::UnsupportedClassCount(k)),
    }
}

fn require_aligned(a: &ProbabilityMatrix, b: &ProbabilityMatrix) -> Result<()> {
    if a.len() != b.len() {
        return Err(AuditError::LengthMismatch {
            what: "probability rows",
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

#[inline]
fn odds(p: &ProbabilityMatrix, i: usize) -> f64 {
    p.prob(i, 1) / p.prob(i, 0)
}

/// Independence ratio from the score classifier `û(a|s)`.
pub fn ratio_ind(probs_s: &ProbabilityMatrix, counts: &GroupCounts) -> Result<RatioEstimate> {
    require_binary(probs_s)?;
    if counts.n_classes() != 2 {
        return Err(AuditError::UnsupportedClassCount(counts.n_classes()));
    }
    if counts.total != probs_s.len() {
        return Err(AuditError::LengthMismatch {
            what: "probability rows",
            expected: counts.total,
            found: probs_s.len(),
        });
    }
    let n = counts.total as f64;
    let prefactor = counts.counts[0] as f64 / (counts.counts[1] as f64 * n);
    Ok(RatioEstimate::from_terms(
        prefactor,
        (0..probs_s.len()).map(|i| odds(probs_s, i)),
    ))
}

fn conditional_ratio(
    joint: &ProbabilityMatrix,
    marginal: &ProbabilityMatrix,
) -> Result<RatioEstimate> {
    require_binary(joint)?;
    require_binary(marginal)?;
    require_aligned(joint, marginal)?;
    let n = joint.len() as f64;
    Ok(RatioEstimate::from_terms(
        1.0 / n,
        (0..joint.len()).map(|i| odds(joint, i) / odds(marginal, i)),
    ))
}

/// Separation ratio from `û(a|y,s)` and `û(a|y)`.
pub fn ratio_sep(
    probs_ys: &ProbabilityMatrix,
    probs_y: &ProbabilityMatrix,
) -> Result<RatioEstimate> {
    conditional_ratio(probs_ys, probs_y)
}

/// Sufficiency ratio from `û(a|y,s)` and `û(a|s)`.
pub fn ratio_suf(
    probs_ys: &ProbabilityMatrix,
    probs_s: &ProbabilityMatrix,
) -> Result<RatioEstimate> {
    conditional_ratio(probs_ys, probs_s)
}
