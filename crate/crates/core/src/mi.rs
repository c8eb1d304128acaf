//! Normalized (conditional) mutual-information measures.
//!
//! All quantities are in nats and are empirical averages over instances of
//! log-probabilities of each instance's own class:
//!
//! * `H(A)      = −Σ_a (N_a/N) log(N_a/N)`
//! * `I(S;A)    ≈ 1/N Σ_i log[û(a_i|s_i) / (N_{a_i}/N)]`
//! * `H(A|·)    ≈ −1/N Σ_i log û(a_i|·_i)`
//! * `I(S;A|Y)  ≈ 1/N Σ_i log[û(a_i|y_i,s_i) / û(a_i|y_i)]`
//! * `I(Y;A|S)  ≈ 1/N Σ_i log[û(a_i|y_i,s_i) / û(a_i|s_i)]`
//!
//! Normalizing by `H(A)`, `H(A|Y)` and `H(A|S)` maps each measure to
//! `[0, 1]`, where 1 means the conditioning variables determine `A`.
//! Held-out estimates can dip slightly below zero; those values are kept.

use serde::{Deserialize, Serialize};

use crate::classifier::ProbabilityMatrix;
use crate::dataset::GroupCounts;
use crate::error::{AuditError, Result};

/// Normalizers at or below this are treated as zero.
pub const NORMALIZER_FLOOR: f64 = 1e-9;

pub fn entropy_a(counts: &GroupCounts) -> f64 {
    let n = counts.total as f64;
    -counts
        .counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

fn check_labels(probs: &ProbabilityMatrix, labels: &[usize]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(AuditError::LengthMismatch {
            what: "probability rows",
            expected: labels.len(),
            found: probs.len(),
        });
    }
    if let Some(&a) = labels.iter().find(|&&a| a >= probs.n_classes()) {
        return Err(AuditError::InvalidParameter(format!(
            "label {a} outside {} probability columns",
            probs.n_classes()
        )));
    }
    Ok(())
}

/// Empirical mutual information between the score and the sensitive
/// attribute.
pub fn mi_ind(probs_s: &ProbabilityMatrix, labels: &[usize], counts: &GroupCounts) -> Result<f64> {
    check_labels(probs_s, labels)?;
    let n = labels.len() as f64;
    let sum: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &a)| (probs_s.prob(i, a) / counts.base_rate(a)).ln())
        .sum();
    Ok(sum / n)
}

pub fn cond_entropy(probs: &ProbabilityMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(probs, labels)?;
    let n = labels.len() as f64;
    let sum: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &a)| probs.prob(i, a).ln())
        .sum();
    Ok(-sum / n)
}

fn cmi(joint: &ProbabilityMatrix, marginal: &ProbabilityMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(joint, labels)?;
    check_labels(marginal, labels)?;
    let n = labels.len() as f64;
    let sum: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &a)| (joint.prob(i, a) / marginal.prob(i, a)).ln())
        .sum();
    Ok(sum / n)
}

/// Conditional mutual information `I(S;A|Y)` from `û(a|y,s)` and `û(a|y)`.
pub fn cmi_sep(
    probs_ys: &ProbabilityMatrix,
    probs_y: &ProbabilityMatrix,
    labels: &[usize],
) -> Result<f64> {
    cmi(probs_ys, probs_y, labels)
}

/// Conditional mutual information `I(Y;A|S)` from `û(a|y,s)` and `û(a|s)`.
pub fn cmi_suf(
    probs_ys: &ProbabilityMatrix,
    probs_s: &ProbabilityMatrix,
    labels: &[usize],
) -> Result<f64> {
    cmi(probs_ys, probs_s, labels)
}

/// `value / normalizer`, or `None` when the normalizer is (numerically) zero.
pub fn normalize(value: f64, normalizer: f64) -> Option<f64> {
    (normalizer > NORMALIZER_FLOOR).then(|| value / normalizer)
}

pub fn nmi_ind(mi: f64, entropy: f64) -> Option<f64> {
    normalize(mi, entropy)
}

pub fn nmi_sep(cmi: f64, cond_entropy_a_given_y: f64) -> Option<f64> {
    normalize(cmi, cond_entropy_a_given_y)
}

pub fn nmi_suf(cmi: f64, cond_entropy_a_given_s: f64) -> Option<f64> {
    normalize(cmi, cond_entropy_a_given_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiMeasures {
    pub entropy_a: f64,
    pub cond_entropy_a_given_y: f64,
    pub cond_entropy_a_given_s: f64,
    pub mi_ind: f64,
    pub cmi_sep: f64,
    pub cmi_suf: f64,
    pub nmi_ind: Option<f64>,
    pub nmi_sep: Option<f64>,
    pub nmi_suf: Option<f64>,
}

impl MiMeasures {
    pub fn compute(
        probs_s: &ProbabilityMatrix,
        probs_y: &ProbabilityMatrix,
        probs_ys: &ProbabilityMatrix,
        labels: &[usize],
        counts: &GroupCounts,
    ) -> Result<Self> {
        let entropy_a = entropy_a(counts);
        let cond_entropy_a_given_y = cond_entropy(probs_y, labels)?;
        let cond_entropy_a_given_s = cond_entropy(probs_s, labels)?;
        let mi_ind = mi_ind(probs_s, labels, counts)?;
        let cmi_sep = cmi_sep(probs_ys, probs_y, labels)?;
        let cmi_suf = cmi_suf(probs_ys, probs_s, labels)?;
        Ok(Self {
            entropy_a,
            cond_entropy_a_given_y,
            cond_entropy_a_given_s,
            mi_ind,
            cmi_sep,
            cmi_suf,
            nmi_ind: nmi_ind(mi_ind, entropy_a),
            nmi_sep: nmi_sep(cmi_sep, cond_entropy_a_given_y),
            nmi_suf: nmi_suf(cmi_suf, cond_entropy_a_given_s),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{group_counts, Matrix};

    fn rows(p1: &[f64]) -> ProbabilityMatrix {
        let data: Vec<Vec<f64>> = p1.iter().map(|&p| vec![1.0 - p, p]).collect();
        ProbabilityMatrix::new(Matrix::from_rows(&data).unwrap(), 1e-6).unwrap()
    }

    #[test]
    fn entropy_values() {
        let c = GroupCounts { counts: vec![500, 500], total: 1000 };
        assert!((entropy_a(&c) - 2f64.ln()).abs() < 1e-15);
        let c = GroupCounts { counts: vec![300, 700], total: 1000 };
        // −0.3 ln 0.3 − 0.7 ln 0.7
        assert!((entropy_a(&c) - 0.610_864_302_054_894).abs() < 1e-12);
        let c = GroupCounts { counts: vec![250; 4], total: 1000 };
        assert!((entropy_a(&c) - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn base_rates_carry_no_information() {
        let labels = [0, 1, 1, 1, 0, 1, 1, 1, 1, 1];
        let counts = group_counts(&labels, 2);
        let p = ProbabilityMatrix::constant(&[0.2, 0.8], labels.len(), 1e-6).unwrap();
        assert!(mi_ind(&p, &labels, &counts).unwrap().abs() < 1e-15);
        assert!((cond_entropy(&p, &labels).unwrap() - entropy_a(&counts)).abs() < 1e-15);
        assert_eq!(cmi_sep(&p, &p, &labels).unwrap(), 0.0);
        assert_eq!(cmi_suf(&p, &p, &labels).unwrap(), 0.0);
    }

    #[test]
    fn separable_toy_reaches_the_upper_bound() {
        let labels = [0, 0, 1, 1];
        let counts = group_counts(&labels, 2);
        let p = rows(&[0.0, 0.0, 1.0, 1.0]);
        let mi = mi_ind(&p, &labels, &counts).unwrap();
        assert!((mi - 2f64.ln()).abs() < 2e-6);
        let nmi = nmi_ind(mi, entropy_a(&counts)).unwrap();
        assert!((nmi - 1.0).abs() < 3e-6);
    }

    #[test]
    fn confident_conditioner_has_near_zero_entropy() {
        let labels = [0, 1, 1, 0];
        let p = rows(&[0.0, 1.0, 1.0, 0.0]);
        let h = cond_entropy(&p, &labels).unwrap();
        assert!((0.0..=2e-6).contains(&h));
    }

    #[test]
    fn normalization_edges() {
        assert_eq!(nmi_ind(0.0, 0.6), Some(0.0));
        assert_eq!(nmi_ind(0.6, 0.6), Some(1.0));
        assert_eq!(nmi_sep(0.0, 0.3), Some(0.0));
        assert_eq!(nmi_suf(0.3, 0.3), Some(1.0));
        assert_eq!(nmi_sep(0.1, 1e-12), None);
        assert_eq!(nmi_ind(0.1, 0.0), None);
        // negative estimates pass through unchanged
        assert_eq!(nmi_ind(-0.003, 0.6), Some(-0.005));
    }
}
