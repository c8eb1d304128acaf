//! End-to-end audit: three classifiers, ratio and MI measures, diagnostics.

use serde::{Deserialize, Serialize};

use crate::classifier::{BandwidthRule, ClassifierConfig, ProbabilityMatrix, SolverOptions};
use crate::crossval::{self, balanced_accuracy, InputKind};
use crate::dataset::AuditDataset;
use crate::error::{AuditError, Result};
use crate::mi::MiMeasures;
use crate::ratio::{RatioEstimate, RatioMeasures};
use crate::report::{Diagnostic, DiagnosticCode, FairnessReport, ReportDocument};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub n_folds: usize,
    pub n_basis: usize,
    pub l2_strength: f64,
    /// Multiplier on the median pairwise distance used as RBF bandwidth.
    pub bandwidth_factor: f64,
    pub clamp_epsilon: f64,
    pub seed: u64,
    /// Train and predict on the same instances instead of cross-validating.
    pub held_in: bool,
    /// Report negative normalized MI as zero (the raw value goes to the
    /// diagnostics).
    pub clamp_negative_nmi: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            n_folds: 10,
            n_basis: 100,
            l2_strength: 1e-2,
            bandwidth_factor: 0.5,
            clamp_epsilon: 1e-6,
            seed: 0,
            held_in: false,
            clamp_negative_nmi: false,
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AuditError::InvalidParameter(msg));
        if self.n_folds < 1 || (!self.held_in && self.n_folds < 2) {
            return bad(format!(
                "cross-validation needs at least 2 folds, got {}",
                self.n_folds
            ));
        }
        if self.n_basis < 1 {
            return bad("n_basis must be at least 1".into());
        }
        if !(self.l2_strength >= 0.0 && self.l2_strength.is_finite()) {
            return bad(format!("l2 strength must be non-negative, got {}", self.l2_strength));
        }
        if !(self.bandwidth_factor > 0.0 && self.bandwidth_factor.is_finite()) {
            return bad(format!(
                "bandwidth factor must be positive, got {}",
                self.bandwidth_factor
            ));
        }
        if !(self.clamp_epsilon > 0.0 && self.clamp_epsilon < 0.5) {
            return bad(format!(
                "clamp epsilon must lie in (0, 0.5), got {}",
                self.clamp_epsilon
            ));
        }
        Ok(())
    }

    pub fn classifier(&self) -> ClassifierConfig {
        ClassifierConfig {
            n_basis: self.n_basis,
            l2_strength: self.l2_strength,
            clamp_epsilon: self.clamp_epsilon,
            bandwidth: BandwidthRule::MedianHeuristic(self.bandwidth_factor),
            solver: SolverOptions::default(),
        }
    }

    /// Fold count used when validating datasets for this config.
    pub fn folds_required(&self) -> usize {
        if self.held_in {
            1
        } else {
            self.n_folds
        }
    }
}

/// Class probabilities from the three classifiers.
#[derive(Debug, Clone)]
pub struct ClassifierOutputs {
    pub s: ProbabilityMatrix,
    pub y: ProbabilityMatrix,
    pub ys: ProbabilityMatrix,
    /// Fits per classifier (S, Y, YS) that hit the iteration limit.
    pub unconverged_fits: [usize; 3],
}

impl ClassifierOutputs {
    pub fn train(dataset: &AuditDataset, config: &AuditConfig) -> Result<Self> {
        config.validate()?;
        let clf = config.classifier();
        let folds = if config.held_in {
            None
        } else {
            Some(crossval::stratified_folds(
                dataset.sensitive(),
                config.n_folds,
                config.seed,
            )?)
        };
        let probs = |kind: InputKind| match &folds {
            Some(f) => crossval::held_out_probs(dataset, kind, f, config.seed, &clf),
            None => crossval::held_in_probs(dataset, kind, config.seed, &clf),
        };
        let (s, (y, ys)) = rayon::join(
            || probs(InputKind::S),
            || rayon::join(|| probs(InputKind::Y), || probs(InputKind::YS)),
        );
        let (s, y, ys) = (s?, y?, ys?);
        Ok(Self {
            unconverged_fits: [s.unconverged_fits, y.unconverged_fits, ys.unconverged_fits],
            s: s.probs,
            y: y.probs,
            ys: ys.probs,
        })
    }
}

/// Everything an audit computes.
#[derive(Debug, Clone)]
pub struct Audit {
    pub report: FairnessReport,
    pub diagnostics: Vec<Diagnostic>,
    pub ratios: Option<RatioMeasures>,
    pub mi: MiMeasures,
    pub probs: ClassifierOutputs,
}

impl Audit {
    pub fn document(&self, config: &AuditConfig) -> ReportDocument {
        ReportDocument::new(&self.report, config, &self.diagnostics)
    }
}

pub fn run_audit(dataset: &AuditDataset, config: &AuditConfig) -> Result<Audit> {
    let probs = ClassifierOutputs::train(dataset, config)?;
    measure(dataset, probs, config.clamp_negative_nmi)
}

/// Computes the report from already available classifier outputs.
pub fn measure(
    dataset: &AuditDataset,
    probs: ClassifierOutputs,
    clamp_negative_nmi: bool,
) -> Result<Audit> {
    let labels = dataset.sensitive();
    let counts = dataset.group_counts();
    let k = dataset.n_classes();
    let mut diagnostics = Vec::new();

    for (kind, count) in InputKind::ALL.iter().zip(probs.unconverged_fits) {
        if count > 0 {
            diagnostics.push(Diagnostic::new(
                DiagnosticCode::NotConverged,
                format!("{count} fit(s) of the classifier on {kind:?} stopped at the iteration limit"),
            ));
        }
    }

    let ratios = if k == 2 {
        let r = RatioMeasures::compute(&probs.s, &probs.y, &probs.ys, &counts)?;
        for (name, est) in [("ratio_ind", r.a_ind), ("ratio_sep", r.a_sep), ("ratio_suf", r.a_suf)] {
            if est.is_dominated() {
                diagnostics.push(domination_warning(name, &est));
            }
        }
        Some(r)
    } else {
        diagnostics.push(Diagnostic::new(
            DiagnosticCode::RatioUnsupported,
            format!("ratio measures need a binary sensitive attribute; found {k} classes"),
        ));
        None
    };

    let mi = MiMeasures::compute(&probs.s, &probs.y, &probs.ys, labels, &counts)?;
    let mut nmi = [mi.nmi_ind, mi.nmi_sep, mi.nmi_suf];
    let names = ["nmi_ind", "nmi_sep", "nmi_suf"];
    let normalizers = [
        ("H(A)", mi.entropy_a),
        ("H(A|Y)", mi.cond_entropy_a_given_y),
        ("H(A|S)", mi.cond_entropy_a_given_s),
    ];
    for ((value, name), (norm_name, norm)) in nmi.iter_mut().zip(names).zip(normalizers) {
        match value {
            None => diagnostics.push(Diagnostic::new(
                DiagnosticCode::UndefinedNormalizer,
                format!("{name} is undefined: {norm_name} = {norm:e} is not positive"),
            )),
            Some(v) if *v < 0.0 => {
                diagnostics.push(Diagnostic::new(
                    DiagnosticCode::NegativeNmi,
                    format!(
                        "{name} = {v} is negative; held-out estimates carry this kind of \
                         estimation noise when the criterion is close to satisfied"
                    ),
                ));
                if clamp_negative_nmi {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::NmiClamped,
                        format!("{name} reported as 0 (raw value {v})"),
                    ));
                    *v = 0.0;
                }
            }
            Some(_) => {}
        }
    }

    let report = FairnessReport {
        ratio_ind: ratios.map(|r| r.a_ind.value),
        ratio_sep: ratios.map(|r| r.a_sep.value),
        ratio_suf: ratios.map(|r| r.a_suf.value),
        nmi_ind: nmi[0],
        nmi_sep: nmi[1],
        nmi_suf: nmi[2],
        balanced_accuracy_s: balanced_accuracy(&probs.s, labels),
        balanced_accuracy_y: balanced_accuracy(&probs.y, labels),
        balanced_accuracy_ys: balanced_accuracy(&probs.ys, labels),
        n: dataset.len(),
        k_classes: k,
    };

    Ok(Audit {
        report,
        diagnostics,
        ratios,
        mi,
        probs,
    })
}

fn domination_warning(name: &str, est: &RatioEstimate) -> Diagnostic {
    Diagnostic::new(
        DiagnosticCode::RatioDominated,
        format!(
            "{name} = {} is dominated by row {} ({:.1}% of the sum); a near-zero \
             classifier probability in the denominator drives the estimate",
            est.value,
            est.max_term_index,
            100.0 * est.max_term_share
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Matrix;

    #[test]
    fn config_bounds() {
        assert!(AuditConfig::default().validate().is_ok());
        let c = AuditConfig {
            clamp_epsilon: 0.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = AuditConfig {
            n_folds: 1,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = AuditConfig {
            n_folds: 1,
            held_in: true,
            ..Default::default()
        };
        assert!(c.validate().is_ok());
    }

    #[test]
    fn three_classes_skip_ratios() {
        let n = 90;
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let s: Vec<f64> = (0..n).map(|i| (i as f64 * 0.91).cos()).collect();
        let a: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let ds = AuditDataset::from_columns(y, s, a, 5).unwrap();
        let config = AuditConfig {
            n_folds: 5,
            n_basis: 20,
            ..Default::default()
        };
        let audit = run_audit(&ds, &config).unwrap();
        assert!(audit.ratios.is_none());
        assert!(audit.report.ratio_ind.is_none());
        assert!(audit.report.nmi_ind.is_some());
        assert!(audit
            .diagnostics
            .iter()
            .any(|d| d.code == DiagnosticCode::RatioUnsupported));
    }

    #[test]
    fn negative_nmi_can_be_clamped_for_presentation() {
        let labels = vec![0, 1, 1, 0, 1, 1];
        let ds = AuditDataset::from_columns(vec![0.0; 6], vec![0.0; 6], labels.clone(), 1).unwrap();
        // û(a|s) slightly worse than base rate -> negative MI
        let worse = |n| {
            ProbabilityMatrix::new(
                Matrix::from_rows(&vec![vec![0.4, 0.6]; n]).unwrap(),
                1e-6,
            )
            .unwrap()
        };
        let probs = ClassifierOutputs {
            s: worse(6),
            y: worse(6),
            ys: worse(6),
            unconverged_fits: [0; 3],
        };
        let raw = measure(&ds, probs.clone(), false).unwrap();
        assert!(raw.report.nmi_ind.unwrap() < 0.0);
        assert!(raw
            .diagnostics
            .iter()
            .any(|d| d.code == DiagnosticCode::NegativeNmi));
        let clamped = measure(&ds, probs, true).unwrap();
        assert_eq!(clamped.report.nmi_ind, Some(0.0));
        assert!(clamped
            .diagnostics
            .iter()
            .any(|d| d.code == DiagnosticCode::NmiClamped));
    }
}
