//! Argument parsing and command implementations for the `regfair` binary.
//!
//! Every command writes its primary artifact to `--out` or, without it, to
//! standard output. Failures map to exit codes through [`exit_code`].

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use regfair::audit::{run_audit, AuditConfig};
use regfair::berk::{self, SweepConfig, SURROGATE_GROUP_EFFECT};
use regfair::communities::{load_communities, CommunitiesOptions};
use regfair::report::{Diagnostic, DiagnosticCode};
use regfair::io::{read_dataset, write_dataset, write_plot_data, write_sweep, DatasetColumns};
use regfair::synthetic::{generate, ScenarioKind, ScenarioSpec};
use regfair::AuditError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "regfair", version, about = "Group-fairness audits for regression models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Audit a CSV of targets, scores and sensitive labels.
    Audit(AuditCmd),
    /// Simulate a scenario, audit it and export the data.
    Simulate(SimulateCmd),
    /// Sweep the group-fairness regularizer of a linear model.
    Sweep(SweepCmd),
}

/// Classifier and cross-validation settings shared by all commands.
#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    /// Cross-validation folds.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Number of RBF basis functions.
    #[arg(long, default_value_t = 100)]
    pub basis: usize,
    /// L2 penalty of the logistic classifiers.
    #[arg(long, default_value_t = 1e-2)]
    pub l2: f64,
    /// RBF bandwidth as a multiple of the median pairwise distance.
    #[arg(long, default_value_t = 0.5)]
    pub bandwidth_factor: f64,
    /// Probabilities are clamped to [epsilon, 1 - epsilon].
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Predict on the training instances instead of cross-validating.
    #[arg(long)]
    pub held_in: bool,
    /// Report negative normalized MI as zero.
    #[arg(long)]
    pub clamp_nmi: bool,
}

impl AuditArgs {
    pub fn config(&self) -> AuditConfig {
        AuditConfig {
            n_folds: self.folds,
            n_basis: self.basis,
            l2_strength: self.l2,
            bandwidth_factor: self.bandwidth_factor,
            clamp_epsilon: self.epsilon,
            seed: self.seed,
            held_in: self.held_in,
            clamp_negative_nmi: self.clamp_nmi,
        }
    }
}

#[derive(Debug, Args)]
pub struct AuditCmd {
    /// Input CSV with a header row.
    pub csv: PathBuf,
    /// Target column; comma-separate names for several columns.
    #[arg(long, default_value = "y")]
    pub target_col: String,
    /// Score column; comma-separate names for several columns.
    #[arg(long, default_value = "s")]
    pub score_col: String,
    #[arg(long, default_value = "a")]
    pub sensitive_col: String,
    /// Report JSON path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub audit: AuditArgs,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    /// fair, score_mean, target_mean or score_variance.
    pub kind: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Probability of sensitive label 1.
    #[arg(long, default_value_t = 0.7)]
    pub p_a1: f64,
    /// Dataset CSV path.
    #[arg(long)]
    pub data_out: Option<PathBuf>,
    /// Report JSON path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plot-data CSV path.
    #[arg(long)]
    pub plot_out: Option<PathBuf>,
    /// `--seed` drives both the simulation and the audit.
    #[command(flatten)]
    pub audit: AuditArgs,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    /// Communities and Crime CSV, or `synthetic` for the built-in surrogate.
    pub source: String,
    /// Regularizer weights, strictly increasing (default: 0 and 16 points
    /// log-spaced from 1e-4 to 1e2).
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Bandwidth of the target-proximity kernel (default: sd of the target).
    #[arg(long)]
    pub kernel_bandwidth: Option<f64>,
    /// Target column of the census file.
    #[arg(long, default_value = "ViolentCrimesPerPop")]
    pub target_col: String,
    /// Group-share column of the census file; share > threshold is protected.
    #[arg(long, default_value = "racepctblack")]
    pub group_col: String,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Rows of the synthetic surrogate.
    #[arg(long, default_value_t = 1994)]
    pub surrogate_n: usize,
    /// Effect of the group share on the surrogate target.
    #[arg(long, default_value_t = SURROGATE_GROUP_EFFECT)]
    pub group_effect: f64,
    /// Sweep CSV path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub audit: AuditArgs,
}

/// Exit code for a failed command: numerical failures get their own code,
/// everything else is a usage or data error.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<AuditError>() {
        Some(e) if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Audit(cmd) => audit(cmd),
        Command::Simulate(cmd) => simulate(cmd),
        Command::Sweep(cmd) => sweep(cmd),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

/// Negative or clamped NMI is routine estimation noise; the other codes
/// deserve a warning.
fn log_diagnostics(prefix: &str, diagnostics: &[Diagnostic]) {
    for d in diagnostics {
        let level = match d.code {
            DiagnosticCode::NegativeNmi | DiagnosticCode::NmiClamped => log::Level::Info,
            _ => log::Level::Warn,
        };
        log::log!(level, "{prefix}{}", d.message);
    }
}

fn audit(cmd: AuditCmd) -> Result<()> {
    let config = cmd.audit.config();
    config.validate()?;
    let columns = DatasetColumns {
        target: cmd.target_col,
        score: cmd.score_col,
        sensitive: cmd.sensitive_col,
    };
    let file = File::open(&cmd.csv).with_context(|| format!("cannot open {}", cmd.csv.display()))?;
    let dataset = read_dataset(file, &columns, config.folds_required())?;
    let result = run_audit(&dataset, &config)?;
    log_diagnostics("", &result.diagnostics);
    let mut out = output(cmd.out.as_deref())?;
    out.write_all(result.document(&config).to_json()?.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn simulate(cmd: SimulateCmd) -> Result<()> {
    let kind: ScenarioKind = cmd.kind.parse()?;
    let config = cmd.audit.config();
    config.validate()?;
    let spec = ScenarioSpec {
        kind,
        n: cmd.n,
        p_a1: cmd.p_a1,
        seed: config.seed,
    };
    let dataset = generate(&spec, config.folds_required())?;
    if let Some(path) = &cmd.data_out {
        write_dataset(create(path)?, &dataset)?;
    }
    if let Some(path) = &cmd.plot_out {
        write_plot_data(create(path)?, &dataset)?;
    }
    let result = run_audit(&dataset, &config)?;
    log_diagnostics("", &result.diagnostics);
    let mut out = output(cmd.out.as_deref())?;
    out.write_all(result.document(&config).to_json()?.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn sweep(cmd: SweepCmd) -> Result<()> {
    let audit = cmd.audit.config();
    let data = if cmd.source == "synthetic" {
        berk::surrogate_training_set(cmd.surrogate_n, cmd.group_effect, audit.seed)?
    } else {
        let options = CommunitiesOptions {
            target_column: cmd.target_col,
            group_share_column: cmd.group_col,
            threshold: cmd.threshold,
        };
        let set = load_communities(&cmd.source, &options)
            .with_context(|| format!("cannot load {}", cmd.source))?;
        log::info!("{} instances, {} features", set.len(), set.n_features());
        set
    };
    let config = SweepConfig {
        lambdas: cmd.lambdas.unwrap_or_else(berk::default_lambda_grid),
        audit,
        train_fraction: cmd.train_fraction,
        split_seed: cmd.split_seed,
        kernel_bandwidth: cmd.kernel_bandwidth,
    };
    let result = berk::sweep(&data, &config)?;
    for (lambda, diags) in result.lambdas.iter().zip(&result.diagnostics) {
        log_diagnostics(&format!("lambda {lambda}: "), diags);
    }
    let mut out = output(cmd.out.as_deref())?;
    write_sweep(&mut out, &result)?;
    out.flush()?;
    Ok(())
}
