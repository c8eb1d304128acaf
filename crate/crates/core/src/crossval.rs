//! Stratified K-fold cross-validation of the sensitive-attribute
//! classifiers, and the balanced-accuracy diagnostic.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierConfig, ProbabilityMatrix};
use crate::dataset::{AuditDataset, Matrix};
use crate::error::{AuditError, Result};

/// Which variables the classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// The score `s`.
    S,
    /// The target `y`.
    Y,
    /// The pair `(y, s)`.
    YS,
}

impl InputKind {
    pub const ALL: [InputKind; 3] = [InputKind::S, InputKind::Y, InputKind::YS];

    pub fn inputs(self, dataset: &AuditDataset) -> Matrix {
        match self {
            InputKind::S => dataset.scores().clone(),
            InputKind::Y => dataset.targets().clone(),
            InputKind::YS => dataset
                .targets()
                .hstack(dataset.scores())
                .expect("validated dataset rows are aligned"),
        }
    }

    fn stream(self) -> u64 {
        match self {
            InputKind::S => 1,
            InputKind::Y => 2,
            InputKind::YS => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    n_folds: usize,
}

impl FoldAssignment {
    /// Wraps an explicit assignment; every fold must receive an instance.
    pub fn new(fold_of: Vec<usize>, n_folds: usize) -> Result<Self> {
        let mut sizes = vec![0usize; n_folds];
        for &f in &fold_of {
            match sizes.get_mut(f) {
                Some(c) => *c += 1,
                None => {
                    return Err(AuditError::InvalidParameter(format!(
                        "fold index {f} out of range for {n_folds} folds"
                    )))
                }
            }
        }
        if let Some(f) = sizes.iter().position(|&c| c == 0) {
            return Err(AuditError::InvalidParameter(format!("fold {f} is empty")));
        }
        Ok(Self { fold_of, n_folds })
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    /// Training and held-out row indices of fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::with_capacity(self.fold_of.len());
        let mut test = Vec::new();
        for (i, &g) in self.fold_of.iter().enumerate() {
            if g == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Shuffles each class with `seed` and deals its members round-robin to
/// the folds. Dealing continues across classes so fold sizes stay balanced.
pub fn stratified_folds(labels: &[usize], n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 1 {
        return Err(AuditError::InvalidParameter("need at least one fold".into()));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &a) in labels.iter().enumerate() {
        members[a].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for (class, idx) in members.iter_mut().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < n_folds {
            return Err(AuditError::ClassTooSmall {
                class: class.to_string(),
                count: idx.len(),
                folds: n_folds,
            });
        }
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            fold_of[i] = next;
            next = (next + 1) % n_folds;
        }
    }
    Ok(FoldAssignment { fold_of, n_folds })
}

fn fold_seed(seed: u64, kind: InputKind, fold: usize) -> u64 {
    // splitmix64 finalizer over the packed (seed, kind, fold) triple
    let mut z = seed
        .wrapping_add(kind.stream().wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((fold as u64).wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Classifier probabilities plus the number of fits that stopped before
/// reaching the solver's gradient tolerance.
#[derive(Debug, Clone)]
pub struct FittedProbs {
    pub probs: ProbabilityMatrix,
    pub unconverged_fits: usize,
}

/// Out-of-fold probabilities: each instance is predicted by the model
/// trained on the other folds.
pub fn held_out_probs(
    dataset: &AuditDataset,
    kind: InputKind,
    folds: &FoldAssignment,
    seed: u64,
    config: &ClassifierConfig,
) -> Result<FittedProbs> {
    if folds.fold_of().len() != dataset.len() {
        return Err(AuditError::LengthMismatch {
            what: "fold assignment",
            expected: dataset.len(),
            found: folds.fold_of().len(),
        });
    }
    if folds.n_folds() < 2 {
        return Err(AuditError::InvalidParameter(
            "held-out estimation needs at least two folds".into(),
        ));
    }
    let inputs = kind.inputs(dataset);
    let labels = dataset.sensitive();
    let k = dataset.n_classes();

    let per_fold: Vec<(Vec<usize>, Matrix, bool)> = (0..folds.n_folds())
        .into_par_iter()
        .map(|f| {
            let (train, test) = folds.split(f);
            let x_train = inputs.select_rows(&train);
            let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let model = config.train(&x_train, &y_train, k, fold_seed(seed, kind, f))?;
            let raw = model.raw_proba(&inputs.select_rows(&test))?;
            Ok((test, raw, model.summary().converged))
        })
        .collect::<Result<_>>()?;

    let mut out = Matrix::zeros(dataset.len(), k);
    let mut unconverged_fits = 0;
    for (test, raw, converged) in per_fold {
        unconverged_fits += usize::from(!converged);
        for (r, &i) in test.iter().enumerate() {
            out.row_mut(i).copy_from_slice(raw.row(r));
        }
    }
    Ok(FittedProbs {
        probs: ProbabilityMatrix::new(out, config.clamp_epsilon)?,
        unconverged_fits,
    })
}

/// In-sample probabilities from one model trained on every instance.
pub fn held_in_probs(
    dataset: &AuditDataset,
    kind: InputKind,
    seed: u64,
    config: &ClassifierConfig,
) -> Result<FittedProbs> {
    let inputs = kind.inputs(dataset);
    let model = config.train(
        &inputs,
        dataset.sensitive(),
        dataset.n_classes(),
        fold_seed(seed, kind, usize::MAX),
    )?;
    Ok(FittedProbs {
        probs: model.predict_proba(&inputs, config.clamp_epsilon)?,
        unconverged_fits: usize::from(!model.summary().converged),
    })
}

/// Mean per-class recall of the argmax decision (ties go to the smaller
/// class index).
pub fn balanced_accuracy(probs: &ProbabilityMatrix, labels: &[usize]) -> f64 {
    let k = probs.n_classes();
    let mut hits = vec![0usize; k];
    let mut totals = vec![0usize; k];
    for (i, &a) in labels.iter().enumerate() {
        let row = probs.row(i);
        let mut best = 0;
        for c in 1..k {
            if row[c] > row[best] {
                best = c;
            }
        }
        totals[a] += 1;
        if best == a {
            hits[a] += 1;
        }
    }
    let present: Vec<f64> = hits
        .iter()
        .zip(&totals)
        .filter(|(_, &t)| t > 0)
        .map(|(&h, &t)| h as f64 / t as f64)
        .collect();
    // classes absent from `labels` have no recall and are skipped
    present.iter().sum::<f64>() / present.len().max(1) as f64
}
