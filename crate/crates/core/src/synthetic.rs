//! Simulated audit scenarios.
//!
//! Targets are `y ~ Uniform(−10, 10)` and labels `a ~ Bernoulli(p_a1)`.
//! Scores add Gaussian noise to `y`, depending on the scenario:
//!
//! | kind             | score                                         |
//! |------------------|-----------------------------------------------|
//! | `fair`           | `N(y, 1.5²)`                                  |
//! | `score_mean`     | `N(y − 4, 1.5²)` if `a = 1`, `N(y + 4, 1.5²)` otherwise |
//! | `target_mean`    | `N(y, 1.5²)`, then the target becomes `y + 4` if `a = 0`, `y − 4` if `a = 1` |
//! | `score_variance` | `N(y, 1.5²)` if `a = 1`, `N(y, 6²)` otherwise |
//!
//! Randomness comes from ChaCha8 seeded with the scenario seed. The target,
//! label and noise draws each use their own ChaCha stream (ids 0, 1 and 2),
//! so the three sequences are independent and reproducible across
//! platforms.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{run_audit, Audit, AuditConfig};
use crate::dataset::AuditDataset;
use crate::error::{AuditError, Result};

pub const STREAM_TARGET: u64 = 0;
pub const STREAM_LABEL: u64 = 1;
pub const STREAM_NOISE: u64 = 2;

const SCORE_SD: f64 = 1.5;
const WIDE_SCORE_SD: f64 = 6.0;
const SHIFT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Fair,
    ScoreMean,
    TargetMean,
    ScoreVariance,
}

impl ScenarioKind {
    /// Row order of the simulation summary table.
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::Fair,
        ScenarioKind::ScoreMean,
        ScenarioKind::TargetMean,
        ScenarioKind::ScoreVariance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Fair => "fair",
            ScenarioKind::ScoreMean => "score_mean",
            ScenarioKind::TargetMean => "target_mean",
            ScenarioKind::ScoreVariance => "score_variance",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                AuditError::InvalidParameter(format!(
                    "unknown scenario `{s}` (expected fair, score_mean, target_mean or score_variance)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n: usize,
    pub p_a1: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        Self {
            kind,
            n: 1000,
            p_a1: 0.7,
            seed,
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Raw simulated columns, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedColumns {
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub a: Vec<usize>,
}

pub fn simulate(spec: &ScenarioSpec) -> Result<SimulatedColumns> {
    if !(spec.p_a1 > 0.0 && spec.p_a1 < 1.0) {
        return Err(AuditError::InvalidParameter(format!(
            "p_a1 must lie in (0, 1), got {}",
            spec.p_a1
        )));
    }
    let mut y_rng = stream(spec.seed, STREAM_TARGET);
    let mut a_rng = stream(spec.seed, STREAM_LABEL);
    let mut noise_rng = stream(spec.seed, STREAM_NOISE);

    let mut cols = SimulatedColumns {
        y: Vec::with_capacity(spec.n),
        s: Vec::with_capacity(spec.n),
        a: Vec::with_capacity(spec.n),
    };
    for _ in 0..spec.n {
        let y: f64 = y_rng.random_range(-10.0..10.0);
        let a = usize::from(a_rng.random::<f64>() < spec.p_a1);
        let z: f64 = StandardNormal.sample(&mut noise_rng);
        let (s, y) = match spec.kind {
            ScenarioKind::Fair => (y + SCORE_SD * z, y),
            ScenarioKind::ScoreMean => {
                let shift = if a == 1 { -SHIFT } else { SHIFT };
                (y + shift + SCORE_SD * z, y)
            }
            ScenarioKind::TargetMean => {
                // score from the unshifted target, then shift the target
                let s = y + SCORE_SD * z;
                let shift = if a == 0 { SHIFT } else { -SHIFT };
                (s, y + shift)
            }
            ScenarioKind::ScoreVariance => {
                let sd = if a == 1 { SCORE_SD } else { WIDE_SCORE_SD };
                (y + sd * z, y)
            }
        };
        cols.y.push(y);
        cols.s.push(s);
        cols.a.push(a);
    }
    Ok(cols)
}

/// Generates and validates a scenario dataset.
pub fn generate(spec: &ScenarioSpec, folds: usize) -> Result<AuditDataset> {
    let cols = simulate(spec)?;
    AuditDataset::from_columns(cols.y, cols.s, cols.a, folds)
}

/// Full audit of all four scenarios, in table order.
pub fn scenario_table(seed: u64, config: &AuditConfig) -> Result<Vec<(ScenarioKind, Audit)>> {
    ScenarioKind::ALL
        .par_iter()
        .map(|&kind| {
            let ds = generate(&ScenarioSpec::new(kind, seed), config.folds_required())?;
            Ok((kind, run_audit(&ds, config)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(v: impl Iterator<Item = f64>) -> f64 {
        let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
        s / n as f64
    }

    #[test]
    fn fair_scores_track_targets() {
        let c = simulate(&ScenarioSpec::new(ScenarioKind::Fair, 3)).unwrap();
        assert!(c.y.iter().all(|y| (-10.0..=10.0).contains(y)));
        let my = mean(c.y.iter().copied());
        let ms = mean(c.s.iter().copied());
        let cov = mean(c.y.iter().zip(&c.s).map(|(y, s)| (y - my) * (s - ms)));
        let vy = mean(c.y.iter().map(|y| (y - my).powi(2)));
        let vs = mean(c.s.iter().map(|s| (s - ms).powi(2)));
        assert!(cov / (vy * vs).sqrt() >= 0.95);
    }

    #[test]
    fn score_mean_shifts_groups_apart() {
        let c = simulate(&ScenarioSpec::new(ScenarioKind::ScoreMean, 5)).unwrap();
        let resid = |g: usize| {
            mean(
                c.s.iter()
                    .zip(&c.y)
                    .zip(&c.a)
                    .filter(|(_, &a)| a == g)
                    .map(|((s, y), _)| s - y),
            )
        };
        let gap = resid(1) - resid(0);
        assert!((gap + 8.0).abs() < 0.5, "{gap}");
    }

    #[test]
    fn target_mean_scores_use_the_unshifted_target() {
        let spec = ScenarioSpec::new(ScenarioKind::TargetMean, 9);
        let shifted = simulate(&spec).unwrap();
        let fair = simulate(&ScenarioSpec {
            kind: ScenarioKind::Fair,
            ..spec
        })
        .unwrap();
        assert_eq!(shifted.s, fair.s);
        for ((ys, yf), a) in shifted.y.iter().zip(&fair.y).zip(&shifted.a) {
            let expected = if *a == 0 { yf + 4.0 } else { yf - 4.0 };
            assert!((ys - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn label_rate_matches_bernoulli_parameter() {
        let c = simulate(&ScenarioSpec::new(ScenarioKind::Fair, 1)).unwrap();
        let rate = c.a.iter().sum::<usize>() as f64 / c.a.len() as f64;
        // 3 sigma binomial band around 0.7
        assert!((0.66..=0.74).contains(&rate), "{rate}");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = ScenarioSpec::new(ScenarioKind::ScoreVariance, 77);
        assert_eq!(simulate(&spec).unwrap(), simulate(&spec).unwrap());
    }

    #[test]
    fn scenario_names_parse() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
        }
        assert_eq!("score-mean".parse::<ScenarioKind>().unwrap(), ScenarioKind::ScoreMean);
        assert!("unfair".parse::<ScenarioKind>().is_err());
    }
}
