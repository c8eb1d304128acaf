//! Fairness report and its versioned JSON document.

use serde::{Deserialize, Serialize};

use crate::audit::AuditConfig;
use crate::error::Result;

pub const REPORT_VERSION: u32 = 1;

/// The six fairness measures plus classifier diagnostics.
///
/// Ratio measures are only defined for a binary sensitive attribute.
/// A normalized MI is `None` when its entropy normalizer is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub ratio_ind: Option<f64>,
    pub ratio_sep: Option<f64>,
    pub ratio_suf: Option<f64>,
    pub nmi_ind: Option<f64>,
    pub nmi_sep: Option<f64>,
    pub nmi_suf: Option<f64>,
    pub balanced_accuracy_s: f64,
    pub balanced_accuracy_y: f64,
    pub balanced_accuracy_ys: f64,
    pub n: usize,
    pub k_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticCode {
    /// One instance contributes most of a ratio estimate.
    RatioDominated,
    /// Ratio measures skipped because `K > 2`.
    RatioUnsupported,
    /// An entropy normalizer is zero, so the measure is undefined.
    UndefinedNormalizer,
    /// A normalized MI estimate is below zero.
    NegativeNmi,
    /// A negative normalized MI was clamped to zero for presentation.
    NmiClamped,
    /// A classifier stopped before reaching the gradient tolerance.
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: DiagnosticCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measures {
    pub n: usize,
    pub k_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_ind: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_sep: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_suf: Option<f64>,
    pub nmi_ind: Option<f64>,
    pub nmi_sep: Option<f64>,
    pub nmi_suf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalancedAccuracy {
    pub s: f64,
    pub y: f64,
    pub ys: f64,
}

/// On-disk report: `{version, config, measures, balanced_accuracy, diagnostics}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub version: u32,
    pub config: AuditConfig,
    pub measures: Measures,
    pub balanced_accuracy: BalancedAccuracy,
    pub diagnostics: Vec<Diagnostic>,
}

impl ReportDocument {
    pub fn new(report: &FairnessReport, config: &AuditConfig, diagnostics: &[Diagnostic]) -> Self {
        Self {
            version: REPORT_VERSION,
            config: config.clone(),
            measures: Measures {
                n: report.n,
                k_classes: report.k_classes,
                ratio_ind: report.ratio_ind,
                ratio_sep: report.ratio_sep,
                ratio_suf: report.ratio_suf,
                nmi_ind: report.nmi_ind,
                nmi_sep: report.nmi_sep,
                nmi_suf: report.nmi_suf,
            },
            balanced_accuracy: BalancedAccuracy {
                s: report.balanced_accuracy_s,
                y: report.balanced_accuracy_y,
                ys: report.balanced_accuracy_ys,
            },
            diagnostics: diagnostics.to_vec(),
        }
    }

    pub fn report(&self) -> FairnessReport {
        let m = &self.measures;
        FairnessReport {
            ratio_ind: m.ratio_ind,
            ratio_sep: m.ratio_sep,
            ratio_suf: m.ratio_suf,
            nmi_ind: m.nmi_ind,
            nmi_sep: m.nmi_sep,
            nmi_suf: m.nmi_suf,
            balanced_accuracy_s: self.balanced_accuracy.s,
            balanced_accuracy_y: self.balanced_accuracy.y,
            balanced_accuracy_ys: self.balanced_accuracy.ys,
            n: m.n,
            k_classes: m.k_classes,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite() -> impl Strategy<Value = f64> {
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
    }

    proptest! {
        #[test]
        fn json_round_trips_bit_exactly(
            r in prop::option::of(finite()),
            m in prop::array::uniform3(prop::option::of(finite())),
            ba in prop::array::uniform3(finite()),
            n in 0usize..100_000,
            k in 2usize..6,
        ) {
            let report = FairnessReport {
                ratio_ind: r, ratio_sep: r.map(|v| v * 0.5), ratio_suf: r.map(|v| -v),
                nmi_ind: m[0], nmi_sep: m[1], nmi_suf: m[2],
                balanced_accuracy_s: ba[0], balanced_accuracy_y: ba[1], balanced_accuracy_ys: ba[2],
                n, k_classes: k,
            };
            let doc = ReportDocument::new(&report, &AuditConfig::default(), &[]);
            let back = ReportDocument::from_json(&doc.to_json().unwrap()).unwrap();
            let got = back.report();
            let bits = |o: Option<f64>| o.map(f64::to_bits);
            prop_assert_eq!(bits(got.ratio_ind), bits(report.ratio_ind));
            prop_assert_eq!(bits(got.ratio_sep), bits(report.ratio_sep));
            prop_assert_eq!(bits(got.ratio_suf), bits(report.ratio_suf));
            prop_assert_eq!(bits(got.nmi_ind), bits(report.nmi_ind));
            prop_assert_eq!(bits(got.nmi_sep), bits(report.nmi_sep));
            prop_assert_eq!(bits(got.nmi_suf), bits(report.nmi_suf));
            prop_assert_eq!(got.balanced_accuracy_s.to_bits(), report.balanced_accuracy_s.to_bits());
            prop_assert_eq!(got.balanced_accuracy_y.to_bits(), report.balanced_accuracy_y.to_bits());
            prop_assert_eq!(got.balanced_accuracy_ys.to_bits(), report.balanced_accuracy_ys.to_bits());
            prop_assert_eq!(back, doc);
        }
    }

    #[test]
    fn top_level_keys_are_fixed() {
        let report = FairnessReport {
            ratio_ind: None,
            ratio_sep: None,
            ratio_suf: None,
            nmi_ind: Some(0.1),
            nmi_sep: None,
            nmi_suf: Some(0.2),
            balanced_accuracy_s: 0.5,
            balanced_accuracy_y: 0.5,
            balanced_accuracy_ys: 0.5,
            n: 30,
            k_classes: 3,
        };
        let doc = ReportDocument::new(&report, &AuditConfig::default(), &[]);
        let v: serde_json::Value = serde_json::from_str(&doc.to_json().unwrap()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(
            keys,
            ["balanced_accuracy", "config", "diagnostics", "measures", "version"]
        );
        let measures = v["measures"].as_object().unwrap();
        assert!(!measures.contains_key("ratio_ind"));
        assert!(measures["nmi_sep"].is_null());
    }
}
