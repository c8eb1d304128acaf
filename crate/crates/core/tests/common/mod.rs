//! Helpers shared by the integration tests: plug-in histogram oracles and
//! cached multi-seed scenario audits.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regfair::audit::AuditConfig;
use regfair::classifier::ProbabilityMatrix;
use regfair::dataset::Matrix;
use regfair::report::FairnessReport;
use regfair::synthetic::{scenario_table, ScenarioKind};

/// A dataset with `s` and `y` quantized to a handful of levels.
#[derive(Debug, Clone)]
pub struct Discrete {
    pub s: Vec<usize>,
    pub y: Vec<usize>,
    pub a: Vec<usize>,
    pub k: usize,
}

impl Discrete {
    /// Random rows; with `both_classes` every occupied `(y, s)` cell gets
    /// at least one instance of class 0 and one of class 1, so every
    /// frequency-table odds is finite.
    pub fn random(rng: &mut ChaCha8Rng, n: usize, k: usize, both_classes: bool) -> Self {
        let s_levels = rng.random_range(1..=4);
        let y_levels = rng.random_range(1..=4);
        // skewed label distribution that depends on the cell
        let mut d = Discrete {
            s: Vec::new(),
            y: Vec::new(),
            a: Vec::new(),
            k,
        };
        for _ in 0..n {
            let s = rng.random_range(0..s_levels);
            let y = rng.random_range(0..y_levels);
            let bias = (s + 2 * y) % k;
            let a = if rng.random::<f64>() < 0.5 {
                bias
            } else {
                rng.random_range(0..k)
            };
            d.push(s, y, a);
        }
        if both_classes {
            let cells: Vec<(usize, usize)> = d.cells().into_iter().collect();
            for (y, s) in cells {
                for class in 0..2 {
                    if !(0..d.len()).any(|i| d.y[i] == y && d.s[i] == s && d.a[i] == class) {
                        d.push(s, y, class);
                    }
                }
            }
        }
        d
    }

    pub fn push(&mut self, s: usize, y: usize, a: usize) {
        self.s.push(s);
        self.y.push(y);
        self.a.push(a);
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    fn cells(&self) -> std::collections::BTreeSet<(usize, usize)> {
        self.y.iter().copied().zip(self.s.iter().copied()).collect()
    }

    /// Key of instance `i` for a conditioning variable.
    pub fn key(&self, which: Cond, i: usize) -> (usize, usize) {
        match which {
            Cond::S => (0, self.s[i]),
            Cond::Y => (0, self.y[i]),
            Cond::YS => (self.y[i], self.s[i]),
        }
    }

    /// `û(a|·)` set to the empirical conditional frequencies.
    pub fn freq_probs(&self, which: Cond) -> ProbabilityMatrix {
        let mut table: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for i in 0..self.len() {
            table.entry(self.key(which, i)).or_insert_with(|| vec![0.0; self.k])[self.a[i]] += 1.0;
        }
        let rows: Vec<Vec<f64>> = (0..self.len())
            .map(|i| {
                let c = &table[&self.key(which, i)];
                let tot: f64 = c.iter().sum();
                c.iter().map(|v| v / tot).collect()
            })
            .collect();
        ProbabilityMatrix::unclamped(Matrix::from_rows(&rows).unwrap()).unwrap()
    }

    pub fn counts(&self) -> regfair::GroupCounts {
        regfair::dataset::group_counts(&self.a, self.k)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Cond {
    S,
    Y,
    YS,
}

/// Joint empirical distribution over `(y, s, a)`.
pub struct Joint {
    p: BTreeMap<(usize, usize, usize), f64>,
}

impl Joint {
    pub fn new(d: &Discrete) -> Self {
        let n = d.len() as f64;
        let mut p = BTreeMap::new();
        for i in 0..d.len() {
            *p.entry((d.y[i], d.s[i], d.a[i])).or_insert(0.0) += 1.0 / n;
        }
        Joint { p }
    }

    /// Marginal probability of the cell selected by `keep` (fields not kept
    /// are summed out).
    fn marg(&self, keep: impl Fn(&(usize, usize, usize)) -> bool) -> f64 {
        self.p.iter().filter(|(c, _)| keep(c)).map(|(_, v)| v).sum()
    }

    pub fn entropy_a(&self) -> f64 {
        let mut pa: BTreeMap<usize, f64> = BTreeMap::new();
        for (&(_, _, a), v) in &self.p {
            *pa.entry(a).or_insert(0.0) += v;
        }
        -pa.values().map(|p| p * p.ln()).sum::<f64>()
    }

    /// `I(S;A) = Σ p(s,a) log p(s,a) / (p(s) p(a))`
    pub fn mi_sa(&self) -> f64 {
        let mut total = 0.0;
        let mut seen = std::collections::BTreeSet::new();
        for &(_, s, a) in self.p.keys() {
            if !seen.insert((s, a)) {
                continue;
            }
            let psa = self.marg(|c| c.1 == s && c.2 == a);
            let ps = self.marg(|c| c.1 == s);
            let pa = self.marg(|c| c.2 == a);
            total += psa * (psa / (ps * pa)).ln();
        }
        total
    }

    /// `H(A|Y)` (`on_y`) or `H(A|S)`.
    pub fn cond_entropy(&self, on_y: bool) -> f64 {
        let pick = |c: &(usize, usize, usize)| if on_y { c.0 } else { c.1 };
        let mut total = 0.0;
        let mut seen = std::collections::BTreeSet::new();
        for c in self.p.keys() {
            let (v, a) = (pick(c), c.2);
            if !seen.insert((v, a)) {
                continue;
            }
            let pva = self.marg(|d| pick(d) == v && d.2 == a);
            let pv = self.marg(|d| pick(d) == v);
            total -= pva * (pva / pv).ln();
        }
        total
    }

    /// `I(S;A|Y) = Σ p(y,s,a) log p(y,s,a) p(y) / (p(y,s) p(y,a))`
    pub fn cmi_sep(&self) -> f64 {
        self.p
            .iter()
            .map(|(&(y, s, a), &pysa)| {
                let py = self.marg(|c| c.0 == y);
                let pys = self.marg(|c| c.0 == y && c.1 == s);
                let pya = self.marg(|c| c.0 == y && c.2 == a);
                pysa * (pysa * py / (pys * pya)).ln()
            })
            .sum()
    }

    /// `I(Y;A|S) = Σ p(y,s,a) log p(y,s,a) p(s) / (p(y,s) p(s,a))`
    pub fn cmi_suf(&self) -> f64 {
        self.p
            .iter()
            .map(|(&(y, s, a), &pysa)| {
                let ps = self.marg(|c| c.1 == s);
                let pys = self.marg(|c| c.0 == y && c.1 == s);
                let psa = self.marg(|c| c.1 == s && c.2 == a);
                pysa * (pysa * ps / (pys * psa)).ln()
            })
            .sum()
    }

    /// `Σ_s p(s) · p(s|a=1) / p(s|a=0)`
    pub fn ratio_ind(&self) -> f64 {
        let p1 = self.marg(|c| c.2 == 1);
        let p0 = self.marg(|c| c.2 == 0);
        let levels: std::collections::BTreeSet<usize> = self.p.keys().map(|c| c.1).collect();
        levels
            .into_iter()
            .map(|s| {
                let ps = self.marg(|c| c.1 == s);
                let ps1 = self.marg(|c| c.1 == s && c.2 == 1) / p1;
                let ps0 = self.marg(|c| c.1 == s && c.2 == 0) / p0;
                ps * ps1 / ps0
            })
            .sum()
    }

    /// `Σ_{y,s} p(y,s) · p(s|y,a=1) / p(s|y,a=0)`
    pub fn ratio_sep(&self) -> f64 {
        self.cells()
            .into_iter()
            .map(|(y, s)| {
                let pys = self.marg(|c| c.0 == y && c.1 == s);
                let num = self.marg(|c| c.0 == y && c.1 == s && c.2 == 1)
                    / self.marg(|c| c.0 == y && c.2 == 1);
                let den = self.marg(|c| c.0 == y && c.1 == s && c.2 == 0)
                    / self.marg(|c| c.0 == y && c.2 == 0);
                pys * num / den
            })
            .sum()
    }

    /// `Σ_{y,s} p(y,s) · p(y|s,a=1) / p(y|s,a=0)`
    pub fn ratio_suf(&self) -> f64 {
        self.cells()
            .into_iter()
            .map(|(y, s)| {
                let pys = self.marg(|c| c.0 == y && c.1 == s);
                let num = self.marg(|c| c.0 == y && c.1 == s && c.2 == 1)
                    / self.marg(|c| c.1 == s && c.2 == 1);
                let den = self.marg(|c| c.0 == y && c.1 == s && c.2 == 0)
                    / self.marg(|c| c.1 == s && c.2 == 0);
                pys * num / den
            })
            .sum()
    }

    fn cells(&self) -> std::collections::BTreeSet<(usize, usize)> {
        self.p.keys().map(|c| (c.0, c.1)).collect()
    }
}

pub fn oracle_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const TABLE_SEEDS: u64 = 5;

/// Per-seed reports of every scenario under the default audit config,
/// computed once per test binary.
pub fn scenario_reports() -> &'static Vec<Vec<(ScenarioKind, FairnessReport)>> {
    static CELL: OnceLock<Vec<Vec<(ScenarioKind, FairnessReport)>>> = OnceLock::new();
    CELL.get_or_init(|| {
        (0..TABLE_SEEDS)
            .map(|seed| {
                scenario_table(seed, &AuditConfig::default())
                    .unwrap()
                    .into_iter()
                    .map(|(k, a)| (k, a.report))
                    .collect()
            })
            .collect()
    })
}

/// Seed-averaged report fields for one scenario.
pub struct MeanRow {
    pub ba: [f64; 3],
    pub ratio: [f64; 3],
    pub nmi: [f64; 3],
}

pub fn mean_row(kind: ScenarioKind) -> MeanRow {
    let reports: Vec<&FairnessReport> = scenario_reports()
        .iter()
        .map(|rows| &rows.iter().find(|(k, _)| *k == kind).unwrap().1)
        .collect();
    let n = reports.len() as f64;
    let avg = |f: &dyn Fn(&FairnessReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
    MeanRow {
        ba: [
            avg(&|r| r.balanced_accuracy_s),
            avg(&|r| r.balanced_accuracy_y),
            avg(&|r| r.balanced_accuracy_ys),
        ],
        ratio: [
            avg(&|r| r.ratio_ind.unwrap()),
            avg(&|r| r.ratio_sep.unwrap()),
            avg(&|r| r.ratio_suf.unwrap()),
        ],
        nmi: [
            avg(&|r| r.nmi_ind.unwrap()),
            avg(&|r| r.nmi_sep.unwrap()),
            avg(&|r| r.nmi_suf.unwrap()),
        ],
    }
}
