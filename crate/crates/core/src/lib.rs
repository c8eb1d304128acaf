//! Group-fairness auditing for regression models.
//!
//! Given targets `y`, model scores `s` and a sensitive attribute `a`, the
//! audit trains three probabilistic classifiers of `a` (from `s`, from `y`
//! and from `(y, s)`) with stratified cross-validation, then turns their
//! held-out probabilities into two families of measures for the
//! independence, separation and sufficiency criteria:
//!
//! * expected density ratios ([`ratio`]), binary `a` only, where 1 means
//!   the criterion holds on average;
//! * normalized (conditional) mutual information ([`mi`]), any number of
//!   classes, where 0 means the criterion holds and 1 is maximal violation.
//!
//! Both are only as good as the classifiers: a weak classifier and a fair
//! score look the same, so the balanced accuracies are reported alongside.
//!
//! ```no_run
//! use regfair::{audit::{run_audit, AuditConfig}, synthetic::{generate, ScenarioKind, ScenarioSpec}};
//!
//! let config = AuditConfig::default();
//! let data = generate(&ScenarioSpec::new(ScenarioKind::ScoreMean, 0), config.n_folds)?;
//! let audit = run_audit(&data, &config)?;
//! println!("{:?}", audit.report);
//! # Ok::<(), regfair::AuditError>(())
//! ```

pub mod audit;
pub mod berk;
pub mod classifier;
pub mod communities;
pub mod crossval;
pub mod dataset;
pub mod error;
pub mod io;
pub mod mi;
pub mod ratio;
pub mod report;
pub mod synthetic;

pub use audit::{run_audit, Audit, AuditConfig};
pub use dataset::{AuditDataset, GroupCounts, Matrix};
pub use error::{AuditError, Result};
pub use report::{FairnessReport, ReportDocument};
