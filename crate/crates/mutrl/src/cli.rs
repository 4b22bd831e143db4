//! Command-line front end: a thin shell over the pipeline phases.
//!
//! Every subcommand maps onto a library call with identical behavior, so
//! anything the CLI can do is reproducible programmatically. Progress goes
//! to standard error; machine-readable output goes only to files.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::pipeline::{self, PipelineConfig, RunArtifacts};
use crate::{plots, Result};

#[derive(Debug, Parser)]
#[command(name = "mutrl", version, about = "Mutation testing for RL agents")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Pipeline config file.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,

    /// Override the config's root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the config's worker count (0 means one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Override the config's artifact directory.
    #[arg(long, global = true)]
    artifacts: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Phase 1: train the original agents.
    Train,
    /// Phase 2: sample mutant configurations and train them.
    Mutate,
    /// Phase 3: replay each pair on its training configurations.
    Replay,
    /// Phase 4: build test suites, score generators, and write the report.
    Score,
    /// Re-emit the report in the chosen format, plus charts.
    Report {
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
    },
    /// All four phases in order.
    RunAll,
    /// Check a config file and exit without side effects.
    ValidateConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Parse arguments and run. Returns the process exit code: 0 on success,
/// 1 on validation errors (including argument errors), 2 on execution
/// errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap routes help/version to stdout and usage errors to stderr.
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    if let Some(dir) = &cli.artifacts {
        cfg.artifacts = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Train => {
            eprintln!(
                "[mutrl] training {} original agents ({} / {})",
                cfg.instances,
                cfg.environment,
                cfg.hyperparameters.algorithm()
            );
            pipeline::phase_train_originals(&cfg)?;
            eprintln!("[mutrl] originals ready in {}", cfg.artifacts.display());
        }
        Command::Mutate => {
            eprintln!(
                "[mutrl] training mutants for {} operators x {} configs x {} instances",
                cfg.operators().len(),
                cfg.mutants_per_operator,
                cfg.instances
            );
            pipeline::phase_train_mutants(&cfg)?;
            eprintln!("[mutrl] mutants ready in {}", cfg.artifacts.display());
        }
        Command::Replay => {
            eprintln!("[mutrl] replaying training configurations for every pair");
            let summary = pipeline::phase_replay(&cfg)?;
            for op in &summary.operators {
                eprintln!(
                    "[mutrl] {}: {}/{} configs killable, selection {:?}",
                    op.operator,
                    op.configs.iter().filter(|c| c.killable).count(),
                    op.configs.len(),
                    op.selection
                );
            }
        }
        Command::Score => {
            eprintln!("[mutrl] building test suites and scoring generators");
            let report = pipeline::phase_score(&cfg)?;
            report_progress(&report);
            emit_plots(&cfg.artifacts, &report)?;
        }
        Command::RunAll => {
            eprintln!(
                "[mutrl] run-all: {} instances, {} operators, seed {}",
                cfg.instances,
                cfg.operators().len(),
                cfg.seed
            );
            eprintln!("[mutrl] phase 1/4: training originals");
            pipeline::phase_train_originals(&cfg)?;
            eprintln!("[mutrl] phase 2/4: training mutants");
            pipeline::phase_train_mutants(&cfg)?;
            eprintln!("[mutrl] phase 3/4: replaying training configurations");
            pipeline::phase_replay(&cfg)?;
            eprintln!("[mutrl] phase 4/4: scoring test generators");
            let report = pipeline::phase_score(&cfg)?;
            report_progress(&report);
            emit_plots(&cfg.artifacts, &report)?;
        }
        Command::Report { format } => {
            let artifacts = RunArtifacts::open(&cfg.artifacts)?;
            let report = artifacts.report()?;
            let (name, content) = match format {
                ReportFormat::Json => ("report.json", report.to_json()?),
                ReportFormat::Csv => ("report.csv", report.to_csv()),
            };
            let path = cfg.artifacts.join(name);
            write_file(&path, &content)?;
            eprintln!("[mutrl] wrote {}", path.display());
            emit_plots(&cfg.artifacts, &report)?;
        }
        Command::ValidateConfig => {
            eprintln!(
                "[mutrl] config ok: {} / {}, {} instances, operators [{}]",
                cfg.environment,
                cfg.hyperparameters.algorithm(),
                cfg.instances,
                cfg.operators()
                    .iter()
                    .map(|op| op.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
    }
    Ok(())
}

fn report_progress(report: &pipeline::report::MutationReport) {
    if report.empty_scope {
        eprintln!("[mutrl] no operator produced a representative mutant; scores are undefined");
        return;
    }
    for (generator, score) in &report.mutation_scores {
        eprintln!("[mutrl] mutation score ({generator}): {score:.4}");
    }
    if let Some(sensitivity) = report.sensitivity {
        eprintln!("[mutrl] sensitivity: {sensitivity:.4}");
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| crate::Error::io(parent.display().to_string(), e))?;
    }
    std::fs::write(path, content).map_err(|e| crate::Error::io(path.display().to_string(), e))
}

/// Write the two report charts, or warn and write nothing when the report
/// scope is empty.
pub fn emit_plots(artifacts: &Path, report: &pipeline::report::MutationReport) -> Result<()> {
    let (Some(scores), Some(sensitivity)) =
        (plots::mutation_score_svg(report), plots::sensitivity_svg(report))
    else {
        eprintln!("[mutrl] warning: empty report scope, no charts emitted");
        return Ok(());
    };
    let scores_path = artifacts.join("plots/mutation_scores.svg");
    let sensitivity_path = artifacts.join("plots/sensitivity.svg");
    write_file(&scores_path, &scores)?;
    write_file(&sensitivity_path, &sensitivity)?;
    eprintln!(
        "[mutrl] wrote {} and {}",
        scores_path.display(),
        sensitivity_path.display()
    );
    Ok(())
}
