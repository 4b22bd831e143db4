//! The compiled binary, driven the way a user would drive it: a config file
//! on disk, subcommands, and artifacts under the working directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mutrl::agents::{AlgoParams, Hyperparameters, TargetUpdate};
use mutrl::envs::EnvKind;
use mutrl::mutation::OperatorId;
use mutrl::pipeline::{PipelineConfig, RunArtifacts, StrongSpec, WeakSpec, CONFIG_VERSION};
use mutrl::stats::StatsConfig;

fn mutrl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mutrl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch the mutrl binary")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn tiny_gridbridge(seed: u64) -> PipelineConfig {
    let mut hp = Hyperparameters::default_dqn();
    hp.total_steps = 700;
    hp.hidden_sizes = vec![16];
    if let AlgoParams::Dqn(p) = &mut hp.algo {
        p.learning_starts = 80;
        p.replay_capacity = 700;
        p.batch_size = 16;
        p.target_update = TargetUpdate::Hard { interval: 50 };
        p.epsilon_decay_fraction = 0.5;
    }
    PipelineConfig {
        version: CONFIG_VERSION,
        environment: EnvKind::GridBridge,
        instances: 2,
        hyperparameters: hp,
        operators: Some(vec![OperatorId::Sdf, OperatorId::Nei]),
        mutants_per_operator: 2,
        replay_sample: 20,
        weak: WeakSpec { pool: 15, select: 6 },
        strong: StrongSpec {
            count: 6,
            candidates: 15,
        },
        stats: StatsConfig::default(),
        mutation_spaces: BTreeMap::new(),
        seed,
        artifacts: PathBuf::from("run"),
        workers: 1,
    }
}

fn representative_cartpole() -> PipelineConfig {
    let mut cfg = tiny_gridbridge(4);
    cfg.environment = EnvKind::CartPole;
    cfg.hyperparameters = Hyperparameters::default_dqn();
    cfg.hyperparameters.total_steps = 6000;
    cfg.operators = Some(vec![OperatorId::Smr]);
    cfg.mutation_spaces.insert(OperatorId::Smr, vec![0.7, 0.95]);
    cfg
}

fn write_config(dir: &Path, cfg: &PipelineConfig) {
    let json = serde_json::to_string_pretty(cfg).unwrap();
    fs::write(dir.join("config.json"), json).unwrap();
}

#[test]
fn run_all_emits_report_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), &representative_cartpole());

    let output = mutrl(dir.path(), &["run-all"]);
    let log = stderr_of(&output);
    assert!(output.status.success(), "stderr:\n{log}");
    assert!(log.contains("phase 4/4"));
    assert!(log.contains("mutation score (weak)"));
    assert!(log.contains("sensitivity:"));

    let run = dir.path().join("run");
    assert!(run.join("report.json").exists());
    assert!(run.join("report.csv").exists());
    for chart in ["plots/mutation_scores.svg", "plots/sensitivity.svg"] {
        let svg = fs::read_to_string(run.join(chart)).unwrap();
        assert!(svg.starts_with("<svg"), "{chart} is not an SVG document");
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn empty_scope_runs_warn_without_charts() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), &tiny_gridbridge(1));

    let output = mutrl(dir.path(), &["run-all"]);
    let log = stderr_of(&output);
    assert!(output.status.success(), "stderr:\n{log}");
    assert!(log.contains("warning: empty report scope, no charts emitted"));

    let run = dir.path().join("run");
    assert!(run.join("report.json").exists());
    assert!(!run.join("plots").exists());
}

#[test]
fn report_subcommand_rebuilds_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), &tiny_gridbridge(1));
    assert!(mutrl(dir.path(), &["run-all"]).status.success());

    let csv_path = dir.path().join("run/report.csv");
    let original = fs::read_to_string(&csv_path).unwrap();
    fs::remove_file(&csv_path).unwrap();

    let output = mutrl(dir.path(), &["report", "--format", "csv"]);
    assert!(output.status.success(), "stderr:\n{}", stderr_of(&output));
    let rebuilt = fs::read_to_string(&csv_path).unwrap();
    assert_eq!(rebuilt, original);

    // One row per (operator, config, generator), plus the header.
    let report = RunArtifacts::open(&dir.path().join("run"))
        .unwrap()
        .report()
        .unwrap();
    let rows: usize = report
        .operators
        .iter()
        .flat_map(|op| &op.configs)
        .map(|c| c.killing_rates.len())
        .sum();
    let lines: Vec<&str> = rebuilt.trim_end().lines().collect();
    assert_eq!(lines.len(), 1 + rows);
    assert_eq!(
        lines[0],
        "operator,j,value,generator,pairs,weaker,kills,killing_rate,killed,trivial,triviality_ratio,representative"
    );
}

#[test]
fn malformed_config_fails_naming_the_bad_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("config.json"),
        r#"{"version": 1, "environmnt": "grid_bridge"}"#,
    )
    .unwrap();

    let output = mutrl(dir.path(), &["validate-config"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).contains("environmnt"));
}

#[test]
fn validate_config_accepts_a_good_file_without_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), &tiny_gridbridge(1));

    let output = mutrl(dir.path(), &["validate-config"]);
    assert!(output.status.success());
    assert!(stderr_of(&output).contains("config ok"));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn help_version_and_usage_errors_use_standard_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mutrl(dir.path(), &["--help"]).status.success());
    assert!(mutrl(dir.path(), &["--version"]).status.success());
    assert_eq!(mutrl(dir.path(), &["frobnicate"]).status.code(), Some(1));
}
