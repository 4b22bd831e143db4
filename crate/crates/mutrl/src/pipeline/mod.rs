//! The four-phase mutation-testing pipeline.
//!
//! Phases communicate only through on-disk artifacts registered in a
//! content-addressed manifest, so a run can be interrupted and resumed at
//! any point: valid artifacts are reused, missing or stale ones are rebuilt.
//!
//! 1. `phase_train_originals` trains the n original agents.
//! 2. `phase_train_mutants` samples mutant values per operator and trains
//!    every (operator, config, instance), reusing the per-instance seeds.
//! 3. `phase_replay` evaluates each pair on a subsample of the original's
//!    training configurations, decides killability and triviality, and
//!    selects each operator's representative configuration.
//! 4. `phase_score` builds the weak and per-operator strong suites, computes
//!    killing rates per generator, and emits the report.

pub mod jobs;
pub mod manifest;
pub mod report;
pub mod seed;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{self, Hyperparameters, TrainedAgent, TrainingLog};
use crate::envs::{EnvConfig, EnvKind};
use crate::mutation::{
    self, CandidateOutcome, MutantSpec, OperatorId, SelectionStatus,
};
use crate::stats::{
    self, ContingencyTable, PairOutcome, PairVerdict, StatsConfig, TrivialityInput,
};
use crate::testgen::{self, TestSuite};
use crate::{rng, Error, Result};

use manifest::RunManifest;
use report::{ConfigReport, MutationReport, OperatorReport, RateSummary};

/// The config schema version this build understands.
pub const CONFIG_VERSION: u32 = 1;

/// Weak-generator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakSpec {
    #[serde(default = "default_weak_pool")]
    pub pool: usize,
    #[serde(default = "default_weak_select")]
    pub select: usize,
}

impl Default for WeakSpec {
    fn default() -> Self {
        WeakSpec {
            pool: default_weak_pool(),
            select: default_weak_select(),
        }
    }
}

/// Strong-generator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrongSpec {
    #[serde(default = "default_strong_count")]
    pub count: usize,
    #[serde(default = "default_strong_candidates")]
    pub candidates: usize,
}

impl Default for StrongSpec {
    fn default() -> Self {
        StrongSpec {
            count: default_strong_count(),
            candidates: default_strong_candidates(),
        }
    }
}

fn default_weak_pool() -> usize {
    200
}
fn default_weak_select() -> usize {
    50
}
fn default_strong_count() -> usize {
    100
}
fn default_strong_candidates() -> usize {
    500
}
fn default_instances() -> usize {
    10
}
fn default_mutants_per_operator() -> usize {
    5
}
fn default_replay_sample() -> usize {
    100
}
fn default_artifacts() -> PathBuf {
    PathBuf::from("artifacts")
}

/// Everything a run needs, loaded from a versioned JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub environment: EnvKind,
    /// Number of original/mutant instance pairs (n).
    #[serde(default = "default_instances")]
    pub instances: usize,
    pub hyperparameters: Hyperparameters,
    /// Operators to mutate; defaults to the full catalog for the algorithm.
    #[serde(default)]
    pub operators: Option<Vec<OperatorId>>,
    /// Mutant configurations sampled per operator (j count).
    #[serde(default = "default_mutants_per_operator")]
    pub mutants_per_operator: usize,
    /// Maximum training configurations replayed per pair.
    #[serde(default = "default_replay_sample")]
    pub replay_sample: usize,
    #[serde(default)]
    pub weak: WeakSpec,
    #[serde(default)]
    pub strong: StrongSpec,
    #[serde(default)]
    pub stats: StatsConfig,
    /// Per-operator overrides of the default mutation value grids.
    #[serde(default)]
    pub mutation_spaces: BTreeMap<OperatorId, Vec<f64>>,
    /// Root seed every stream derives from.
    #[serde(default)]
    pub seed: u64,
    /// Artifact directory.
    #[serde(default = "default_artifacts")]
    pub artifacts: PathBuf,
    /// Worker threads; 0 means one per core.
    #[serde(default)]
    pub workers: usize,
}

fn nest(prefix: &str, err: Error) -> Error {
    match err {
        Error::InvalidConfig { field, message } => Error::InvalidConfig {
            field: format!("{prefix}.{field}"),
            message,
        },
        other => other,
    }
}

impl PipelineConfig {
    /// Parse a config file without validating it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::arg(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig {
            field: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported schema version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        if self.instances < 2 {
            return Err(Error::config(
                "instances",
                format!("{} below the minimum of 2", self.instances),
            ));
        }
        self.hyperparameters
            .validate()
            .map_err(|e| nest("hyperparameters", e))?;
        self.stats.validate().map_err(|e| nest("stats", e))?;
        if self.mutants_per_operator == 0 {
            return Err(Error::config("mutants_per_operator", "must be at least 1"));
        }
        if self.replay_sample == 0 {
            return Err(Error::config("replay_sample", "must be at least 1"));
        }
        if self.weak.select == 0 || self.weak.pool < self.weak.select {
            return Err(Error::config(
                "weak",
                format!(
                    "needs 1 <= select <= pool, got select {} pool {}",
                    self.weak.select, self.weak.pool
                ),
            ));
        }
        if self.strong.count == 0 || self.strong.candidates == 0 {
            return Err(Error::config(
                "strong",
                format!(
                    "count and candidates must be at least 1, got {} and {}",
                    self.strong.count, self.strong.candidates
                ),
            ));
        }
        let algorithm = self.hyperparameters.algorithm();
        if let Some(ops) = &self.operators {
            if ops.is_empty() {
                return Err(Error::config("operators", "empty operator list"));
            }
            for (i, op) in ops.iter().enumerate() {
                if !op.applies_to(algorithm) {
                    return Err(Error::config(
                        format!("operators[{i}]"),
                        format!("{op} is not applicable to {algorithm}"),
                    ));
                }
                if ops[..i].contains(op) {
                    return Err(Error::config(
                        format!("operators[{i}]"),
                        format!("duplicate operator {op}"),
                    ));
                }
            }
        }
        for op in self.mutation_spaces.keys() {
            // Validates applicability, finiteness, and non-emptiness.
            self.space_for(*op)?;
        }
        Ok(())
    }

    /// The operators this run mutates, in report order.
    pub fn operators(&self) -> Vec<OperatorId> {
        self.operators
            .clone()
            .unwrap_or_else(|| OperatorId::catalog(self.hyperparameters.algorithm()).to_vec())
    }

    /// The (possibly overridden) mutation space for an operator.
    pub fn space_for(&self, operator: OperatorId) -> Result<Vec<f64>> {
        match self.mutation_spaces.get(&operator) {
            Some(values) => mutation::mutation_space_from(values, operator, &self.hyperparameters),
            None => mutation::mutation_space(operator, &self.hyperparameters),
        }
    }
}

// ── Artifact keys and paths ─────────────────────────────────────────────────

fn original_agent_key(i: usize) -> String {
    format!("original/{i}/agent")
}
fn original_log_key(i: usize) -> String {
    format!("original/{i}/log")
}
fn mutant_set_key(op: OperatorId) -> String {
    format!("mutants/{op}/specs")
}
fn mutant_agent_key(op: OperatorId, j: usize, i: usize) -> String {
    format!("mutants/{op}/{j}/{i}/agent")
}
fn mutant_log_key(op: OperatorId, j: usize, i: usize) -> String {
    format!("mutants/{op}/{j}/{i}/log")
}
fn replay_key(op: OperatorId, j: usize) -> String {
    format!("replay/{op}/{j}")
}
const REPLAY_SUMMARY_KEY: &str = "replay/summary";
const KILL_MATRIX_KEY: &str = "replay/kill-matrix";
const WEAK_SUITE_KEY: &str = "suite/weak";
fn strong_suite_key(op: OperatorId) -> String {
    format!("suite/strong/{op}")
}
const REPORT_JSON_KEY: &str = "report/json";
const REPORT_CSV_KEY: &str = "report/csv";

fn original_agent_path(i: usize) -> String {
    format!("originals/{i}/agent.json")
}
fn original_log_path(i: usize) -> String {
    format!("originals/{i}/log.jsonl")
}
fn mutant_set_path(op: OperatorId) -> String {
    format!("mutants/{op}/mutants.json")
}
fn mutant_agent_path(op: OperatorId, j: usize, i: usize) -> String {
    format!("mutants/{op}/{j}/{i}/agent.json")
}
fn mutant_log_path(op: OperatorId, j: usize, i: usize) -> String {
    format!("mutants/{op}/{j}/{i}/log.jsonl")
}
fn replay_path(op: OperatorId, j: usize) -> String {
    format!("mutants/{op}/{j}/replay.json")
}
fn strong_suite_path(op: OperatorId) -> String {
    format!("suites/strong_{op}.json")
}

fn to_pretty_json<T: Serialize>(value: &T, what: &str) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(what, e))?;
    text.push('\n');
    Ok(text)
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::json(what, e))
}

// ── Persisted artifact shapes ───────────────────────────────────────────────

/// The sampled mutant configurations of one operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutantSet {
    pub operator: OperatorId,
    /// The space had fewer values than requested, so all of them were taken.
    pub exhausted: bool,
    pub mutants: Vec<MutantSpec>,
}

/// One pair's replay: the shared configurations, both agents' outcomes, and
/// the statistical verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub instance: usize,
    pub configs: Vec<EnvConfig>,
    pub original_success: Vec<bool>,
    pub mutant_success: Vec<bool>,
    pub table: ContingencyTable,
    pub p_value: f64,
    pub verdict: PairVerdict,
}

/// Replay results of one mutant configuration across all instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub spec: MutantSpec,
    pub killing_rate: f64,
    pub killable: bool,
    pub weaker_count: usize,
    pub kill_degenerate: bool,
    pub triviality_ratio: Option<f64>,
    pub trivial: bool,
    pub triviality_degenerate: bool,
    pub pairs: Vec<PairRecord>,
}

/// Per-config roll-up stored in the replay summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigReplaySummary {
    pub spec: MutantSpec,
    pub pairs: usize,
    pub weaker: usize,
    pub kills: usize,
    pub killing_rate: f64,
    pub killable: bool,
    pub kill_degenerate: bool,
    pub triviality_ratio: Option<f64>,
    pub trivial: bool,
    pub triviality_degenerate: bool,
}

/// One operator's replay roll-up, including representative selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorReplaySummary {
    pub operator: OperatorId,
    pub exhausted: bool,
    /// The base value mutants are ranked against for representativeness.
    pub reference: f64,
    pub selection: SelectionStatus,
    pub configs: Vec<ConfigReplaySummary>,
}

/// The replay phase's final artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub operators: Vec<OperatorReplaySummary>,
}

// ── Read-side access to a run's artifacts ───────────────────────────────────

/// Read access to a (possibly partial) run directory.
pub struct RunArtifacts {
    root: PathBuf,
    manifest: RunManifest,
}

impl RunArtifacts {
    pub fn open(root: &Path) -> Result<Self> {
        Ok(RunArtifacts {
            root: root.to_path_buf(),
            manifest: RunManifest::load(root)?,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    fn read<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<T> {
        from_json(&self.manifest.read_text(&self.root, key)?, key)
    }

    pub fn original_agent(&self, i: usize) -> Result<TrainedAgent> {
        self.read(&original_agent_key(i))
    }

    pub fn original_log(&self, i: usize) -> Result<TrainingLog> {
        TrainingLog::from_jsonl(&self.manifest.read_text(&self.root, &original_log_key(i))?)
    }

    pub fn mutant_set(&self, op: OperatorId) -> Result<MutantSet> {
        self.read(&mutant_set_key(op))
    }

    pub fn mutant_agent(&self, op: OperatorId, j: usize, i: usize) -> Result<TrainedAgent> {
        self.read(&mutant_agent_key(op, j, i))
    }

    pub fn mutant_log(&self, op: OperatorId, j: usize, i: usize) -> Result<TrainingLog> {
        TrainingLog::from_jsonl(&self.manifest.read_text(&self.root, &mutant_log_key(op, j, i))?)
    }

    pub fn replay_record(&self, op: OperatorId, j: usize) -> Result<ReplayRecord> {
        self.read(&replay_key(op, j))
    }

    pub fn replay_summary(&self) -> Result<ReplaySummary> {
        self.read(REPLAY_SUMMARY_KEY)
    }

    pub fn weak_suite(&self) -> Result<TestSuite> {
        self.read(WEAK_SUITE_KEY)
    }

    pub fn strong_suite(&self, op: OperatorId) -> Result<TestSuite> {
        self.read(&strong_suite_key(op))
    }

    pub fn report(&self) -> Result<MutationReport> {
        self.read(REPORT_JSON_KEY)
    }

    pub fn report_json_path(&self) -> Option<PathBuf> {
        self.manifest.path_of(&self.root, REPORT_JSON_KEY)
    }
}

// ── Phase 1: train originals ────────────────────────────────────────────────

/// An existing agent artifact only counts if it was produced with the seed
/// and hyperparameters this config expects.
fn agent_is_current(
    manifest: &RunManifest,
    root: &Path,
    agent_key: &str,
    log_key: &str,
    expected_hp: &Hyperparameters,
    expected_seed: u64,
) -> bool {
    if !manifest.is_current(root, agent_key) || !manifest.is_current(root, log_key) {
        return false;
    }
    let Ok(text) = manifest.read_text(root, agent_key) else {
        return false;
    };
    let Ok(agent) = from_json::<TrainedAgent>(&text, agent_key) else {
        return false;
    };
    agent.seed == expected_seed && &agent.hyperparameters == expected_hp
}

pub fn phase_train_originals(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let root = cfg.artifacts.as_path();
    let mut manifest = RunManifest::load(root)?;

    let pending: Vec<usize> = (0..cfg.instances)
        .filter(|&i| {
            !agent_is_current(
                &manifest,
                root,
                &original_agent_key(i),
                &original_log_key(i),
                &cfg.hyperparameters,
                seed::train_seed(cfg.seed, i),
            )
        })
        .collect();

    let trained = jobs::try_par_map(pending, cfg.workers, |i| {
        let (agent, log) = agents::train(
            cfg.environment,
            &cfg.hyperparameters,
            seed::train_seed(cfg.seed, i),
        )?;
        Ok((i, agent, log))
    })?;

    for (i, agent, log) in &trained {
        manifest.write_text(
            root,
            &original_agent_key(*i),
            &original_agent_path(*i),
            &to_pretty_json(agent, "agent")?,
        )?;
        manifest.write_text(root, &original_log_key(*i), &original_log_path(*i), &log.to_jsonl())?;
    }
    manifest.save(root)
}

// ── Phase 2: train mutants ──────────────────────────────────────────────────

/// Load or (re)sample an operator's mutant set, writing it if new.
fn ensure_mutant_set(
    cfg: &PipelineConfig,
    manifest: &mut RunManifest,
    op: OperatorId,
) -> Result<MutantSet> {
    let root = cfg.artifacts.as_path();
    let space = cfg.space_for(op)?;
    let key = mutant_set_key(op);

    if manifest.is_current(root, &key) {
        let set: MutantSet = from_json(&manifest.read_text(root, &key)?, &key)?;
        let expected_len = cfg.mutants_per_operator.min(space.len());
        let consistent = set.operator == op
            && set.mutants.len() == expected_len
            && set.exhausted == (space.len() < cfg.mutants_per_operator)
            && set.mutants.iter().all(|m| space.contains(&m.value));
        if consistent {
            return Ok(set);
        }
    }

    let mut stream = rng::stream(seed::mutation_sample_seed(cfg.seed, op));
    let sampled = mutation::sample_values(&space, cfg.mutants_per_operator, &mut stream);
    let set = MutantSet {
        operator: op,
        exhausted: sampled.exhausted,
        mutants: sampled
            .values
            .iter()
            .enumerate()
            .map(|(index, &value)| MutantSpec {
                operator: op,
                index,
                value,
            })
            .collect(),
    };
    manifest.write_text(root, &key, &mutant_set_path(op), &to_pretty_json(&set, &key)?)?;
    Ok(set)
}

pub fn phase_train_mutants(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let root = cfg.artifacts.as_path();
    let mut manifest = RunManifest::load(root)?;

    let mut pending: Vec<(OperatorId, usize, Hyperparameters, usize)> = Vec::new();
    for op in cfg.operators() {
        let set = ensure_mutant_set(cfg, &mut manifest, op)?;
        for spec in &set.mutants {
            let mutant_hp = mutation::apply(op, spec.value, &cfg.hyperparameters)?;
            for i in 0..cfg.instances {
                let current = agent_is_current(
                    &manifest,
                    root,
                    &mutant_agent_key(op, spec.index, i),
                    &mutant_log_key(op, spec.index, i),
                    &mutant_hp,
                    seed::train_seed(cfg.seed, i),
                );
                if !current {
                    pending.push((op, spec.index, mutant_hp.clone(), i));
                }
            }
        }
    }

    let trained = jobs::try_par_map(pending, cfg.workers, |(op, j, hp, i)| {
        let (agent, log) = agents::train(cfg.environment, &hp, seed::train_seed(cfg.seed, i))?;
        Ok((op, j, i, agent, log))
    })?;

    for (op, j, i, agent, log) in &trained {
        manifest.write_text(
            root,
            &mutant_agent_key(*op, *j, *i),
            &mutant_agent_path(*op, *j, *i),
            &to_pretty_json(agent, "agent")?,
        )?;
        manifest.write_text(
            root,
            &mutant_log_key(*op, *j, *i),
            &mutant_log_path(*op, *j, *i),
            &log.to_jsonl(),
        )?;
    }
    manifest.save(root)
}

// ── Phase 3: replay ─────────────────────────────────────────────────────────

/// Choose `sample` distinct indices from `0..len` (all of them when the
/// range is short), in ascending order.
fn subsample_indices(len: usize, sample: usize, stream: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    if len <= sample {
        return (0..len).collect();
    }
    let mut indices: Vec<usize> = (0..len).collect();
    for i in 0..sample {
        let j = stream.gen_range(i..len);
        indices.swap(i, j);
    }
    let mut chosen = indices[..sample].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Replay one original/mutant pair on a seeded subsample of the original's
/// training configurations and run the statistical test.
pub fn replay_pair(
    kind: EnvKind,
    original: &TrainedAgent,
    original_log: &TrainingLog,
    mutant: &TrainedAgent,
    sample: usize,
    seed: u64,
    stats_cfg: &StatsConfig,
) -> Result<PairRecord> {
    let trs = original_log.trs();
    if trs.is_empty() {
        return Err(Error::EmptyInput("original TRS".into()));
    }
    let mut stream = rng::stream(seed);
    let indices = subsample_indices(trs.len(), sample, &mut stream);
    let configs: Vec<EnvConfig> = indices.into_iter().map(|i| trs[i].clone()).collect();

    let original_success: Vec<bool> = agents::evaluate(original, kind, &configs)?
        .iter()
        .map(|o| o.success)
        .collect();
    let mutant_success: Vec<bool> = agents::evaluate(mutant, kind, &configs)?
        .iter()
        .map(|o| o.success)
        .collect();
    let table = ContingencyTable::from_flags(&original_success, &mutant_success)?;
    let outcome = PairOutcome::evaluate(table, stats_cfg);
    Ok(PairRecord {
        instance: 0,
        configs,
        original_success,
        mutant_success,
        table,
        p_value: outcome.p_value,
        verdict: outcome.verdict,
    })
}

/// Triviality counts of one replayed pair: configs the original succeeded
/// on, and how many of those the mutant failed.
fn triviality_input(pair: &PairRecord) -> TrivialityInput {
    let original_successes = pair.original_success.iter().filter(|&&s| s).count() as u64;
    let mutant_failures = pair
        .original_success
        .iter()
        .zip(&pair.mutant_success)
        .filter(|&(&o, &m)| o && !m)
        .count() as u64;
    TrivialityInput {
        original_successes,
        mutant_failures,
    }
}

fn build_replay_record(
    cfg: &PipelineConfig,
    artifacts: &RunArtifacts,
    spec: &MutantSpec,
) -> Result<ReplayRecord> {
    let op = spec.operator;
    let mut pairs = Vec::with_capacity(cfg.instances);
    for i in 0..cfg.instances {
        let original = artifacts.original_agent(i)?;
        let original_log = artifacts.original_log(i)?;
        let mutant = artifacts.mutant_agent(op, spec.index, i)?;
        let mut pair = replay_pair(
            cfg.environment,
            &original,
            &original_log,
            &mutant,
            cfg.replay_sample,
            seed::replay_seed(cfg.seed, op, spec.index, i),
            &cfg.stats,
        )?;
        pair.instance = i;
        pairs.push(pair);
    }

    let outcomes: Vec<PairOutcome> = pairs
        .iter()
        .map(|p| PairOutcome {
            table: p.table,
            p_value: p.p_value,
            verdict: p.verdict,
        })
        .collect();
    let kill = stats::killing_rate(outcomes, &cfg.stats)?;

    let triviality_inputs: Vec<TrivialityInput> = pairs.iter().map(triviality_input).collect();
    let (triviality_ratio, trivial, triviality_degenerate) =
        match stats::triviality(&triviality_inputs, &cfg.stats) {
            Ok(outcome) => (Some(outcome.ratio), outcome.trivial, false),
            Err(Error::DegenerateTriviality) => (None, false, true),
            Err(e) => return Err(e),
        };

    Ok(ReplayRecord {
        spec: spec.clone(),
        killing_rate: kill.killing_rate,
        killable: kill.killed,
        weaker_count: kill.weaker_count,
        kill_degenerate: kill.degenerate,
        triviality_ratio,
        trivial,
        triviality_degenerate,
        pairs,
    })
}

fn config_summary(record: &ReplayRecord) -> ConfigReplaySummary {
    ConfigReplaySummary {
        spec: record.spec.clone(),
        pairs: record.pairs.len(),
        weaker: record.weaker_count,
        kills: record
            .pairs
            .iter()
            .filter(|p| p.verdict == PairVerdict::Killed)
            .count(),
        killing_rate: record.killing_rate,
        killable: record.killable,
        kill_degenerate: record.kill_degenerate,
        triviality_ratio: record.triviality_ratio,
        trivial: record.trivial,
        triviality_degenerate: record.triviality_degenerate,
    }
}

fn kill_matrix_csv(records: &[(OperatorId, Vec<ReplayRecord>)]) -> String {
    let mut out = String::from("operator,j,instance,s_o,f_o,s_m,f_m,p_value,verdict\n");
    for (op, op_records) in records {
        for record in op_records {
            for pair in &record.pairs {
                let verdict = match pair.verdict {
                    PairVerdict::Killed => "killed",
                    PairVerdict::NotKilled => "not_killed",
                    PairVerdict::WeakerOriginal => "weaker_original",
                };
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    op,
                    record.spec.index,
                    pair.instance,
                    pair.table.successes_original(),
                    pair.table.failures_original(),
                    pair.table.successes_mutant(),
                    pair.table.failures_mutant(),
                    pair.p_value,
                    verdict,
                ));
            }
        }
    }
    out
}

pub fn phase_replay(cfg: &PipelineConfig) -> Result<ReplaySummary> {
    cfg.validate()?;
    let root = cfg.artifacts.as_path();
    let mut manifest = RunManifest::load(root)?;
    let artifacts = RunArtifacts::open(root)?;

    let mut sets = Vec::new();
    for op in cfg.operators() {
        sets.push(artifacts.mutant_set(op)?);
    }

    // One job per (operator, config); reuse any record that is both current
    // and consistent with the sampled spec.
    let mut job_specs: Vec<MutantSpec> = Vec::new();
    for set in &sets {
        for spec in &set.mutants {
            let key = replay_key(set.operator, spec.index);
            if manifest.is_current(root, &key) {
                if let Ok(record) = artifacts.replay_record(set.operator, spec.index) {
                    if &record.spec == spec && record.pairs.len() == cfg.instances {
                        continue;
                    }
                }
            }
            job_specs.push(spec.clone());
        }
    }

    let computed = jobs::try_par_map(job_specs, cfg.workers, |spec| {
        let record = build_replay_record(cfg, &artifacts, &spec)?;
        Ok(record)
    })?;
    for record in &computed {
        manifest.write_text(
            root,
            &replay_key(record.spec.operator, record.spec.index),
            &replay_path(record.spec.operator, record.spec.index),
            &to_pretty_json(record, "replay record")?,
        )?;
    }
    manifest.save(root)?;

    // Roll up (re-reading so reused and fresh records are treated alike).
    let reopened = RunArtifacts::open(root)?;
    let mut all_records: Vec<(OperatorId, Vec<ReplayRecord>)> = Vec::new();
    let mut summary = ReplaySummary {
        operators: Vec::new(),
    };
    for set in &sets {
        let mut records = Vec::new();
        for spec in &set.mutants {
            records.push(reopened.replay_record(set.operator, spec.index)?);
        }
        let reference = mutation::reference_value(set.operator, &cfg.hyperparameters)?;
        let candidates: Vec<CandidateOutcome> = records
            .iter()
            .map(|r| CandidateOutcome {
                index: r.spec.index,
                value: r.spec.value,
                killed: r.killable,
                trivial: r.trivial,
            })
            .collect();
        summary.operators.push(OperatorReplaySummary {
            operator: set.operator,
            exhausted: set.exhausted,
            reference,
            selection: mutation::select_representative(reference, &candidates),
            configs: records.iter().map(config_summary).collect(),
        });
        all_records.push((set.operator, records));
    }

    manifest.write_text(
        root,
        REPLAY_SUMMARY_KEY,
        "replay_summary.json",
        &to_pretty_json(&summary, REPLAY_SUMMARY_KEY)?,
    )?;
    manifest.write_text(root, KILL_MATRIX_KEY, "kill_matrix.csv", &kill_matrix_csv(&all_records))?;
    manifest.save(root)?;
    Ok(summary)
}

// ── Phase 4: score ──────────────────────────────────────────────────────────

/// Killing rates of all pairs of one mutant configuration on a fixed suite.
fn suite_kill_record(
    cfg: &PipelineConfig,
    originals: &[TrainedAgent],
    mutants: &[TrainedAgent],
    suite: &[EnvConfig],
) -> Result<stats::KillRecord> {
    let mut outcomes = Vec::with_capacity(originals.len());
    for (original, mutant) in originals.iter().zip(mutants) {
        let original_success: Vec<bool> = agents::evaluate(original, cfg.environment, suite)?
            .iter()
            .map(|o| o.success)
            .collect();
        let mutant_success: Vec<bool> = agents::evaluate(mutant, cfg.environment, suite)?
            .iter()
            .map(|o| o.success)
            .collect();
        let table = ContingencyTable::from_flags(&original_success, &mutant_success)?;
        outcomes.push(PairOutcome::evaluate(table, &cfg.stats));
    }
    stats::killing_rate(outcomes, &cfg.stats)
}

/// Per-operator products of the scoring phase.
struct OperatorScore {
    operator: OperatorId,
    strong_suite: Option<TestSuite>,
    weak_rate: Option<RateSummary>,
    strong_rate: Option<RateSummary>,
}

pub fn phase_score(cfg: &PipelineConfig) -> Result<MutationReport> {
    cfg.validate()?;
    let root = cfg.artifacts.as_path();
    let mut manifest = RunManifest::load(root)?;
    let artifacts = RunArtifacts::open(root)?;

    let summary = artifacts.replay_summary()?;
    let originals: Vec<TrainedAgent> = (0..cfg.instances)
        .map(|i| artifacts.original_agent(i))
        .collect::<Result<_>>()?;

    // The weak suite is built once per run from the original agents.
    let weak = if manifest.is_current(root, WEAK_SUITE_KEY) {
        artifacts.weak_suite()?
    } else {
        let suite = testgen::weak_suite(
            cfg.environment,
            &originals,
            cfg.weak.pool,
            cfg.weak.select,
            seed::weak_seed(cfg.seed),
        )?;
        manifest.write_text(
            root,
            WEAK_SUITE_KEY,
            "suites/weak.json",
            &to_pretty_json(&suite, WEAK_SUITE_KEY)?,
        )?;
        suite
    };

    // Strong suites and per-generator rates, one job per operator.
    let op_jobs: Vec<&OperatorReplaySummary> = summary.operators.iter().collect();
    let scores = jobs::try_par_map(op_jobs, cfg.workers, |op_summary| {
        let op = op_summary.operator;
        let SelectionStatus::Selected(j) = op_summary.selection else {
            return Ok(OperatorScore {
                operator: op,
                strong_suite: None,
                weak_rate: None,
                strong_rate: None,
            });
        };

        let record = artifacts.replay_record(op, j)?;
        let mutants: Vec<TrainedAgent> = (0..cfg.instances)
            .map(|i| artifacts.mutant_agent(op, j, i))
            .collect::<Result<_>>()?;

        // The failure predictor learns from the representative mutant's
        // replay outcomes, pooled across instances.
        let examples: Vec<(EnvConfig, bool)> = record
            .pairs
            .iter()
            .flat_map(|pair| {
                pair.configs
                    .iter()
                    .cloned()
                    .zip(pair.mutant_success.iter().map(|&s| !s))
            })
            .collect();
        let predictor = testgen::train_failure_predictor(
            cfg.environment,
            &examples,
            seed::predictor_seed(cfg.seed, op, j),
        )?;
        let strong = testgen::strong_suite(
            cfg.environment,
            &predictor,
            cfg.strong.count,
            cfg.strong.candidates,
            seed::strong_seed(cfg.seed, op, j),
        )?;

        let weak_record = suite_kill_record(cfg, &originals, &mutants, &weak.configs)?;
        let strong_record = suite_kill_record(cfg, &originals, &mutants, &strong.configs)?;
        Ok(OperatorScore {
            operator: op,
            strong_suite: Some(strong),
            weak_rate: Some(RateSummary::from_record(&weak_record)),
            strong_rate: Some(RateSummary::from_record(&strong_record)),
        })
    })?;

    for score in &scores {
        if let Some(suite) = &score.strong_suite {
            let key = strong_suite_key(score.operator);
            manifest.write_text(
                root,
                &key,
                &strong_suite_path(score.operator),
                &to_pretty_json(suite, &key)?,
            )?;
        }
    }

    // Assemble the report.
    let mut operators = Vec::with_capacity(summary.operators.len());
    for (op_summary, score) in summary.operators.iter().zip(&scores) {
        let representative_j = match op_summary.selection {
            SelectionStatus::Selected(j) => Some(j),
            _ => None,
        };
        let mut configs = Vec::with_capacity(op_summary.configs.len());
        for config in &op_summary.configs {
            let representative = representative_j == Some(config.spec.index);
            let mut killing_rates = BTreeMap::new();
            killing_rates.insert(
                "replay".to_string(),
                RateSummary {
                    pairs: config.pairs,
                    weaker: config.weaker,
                    kills: config.kills,
                    killing_rate: config.killing_rate,
                    killed: config.killable,
                    degenerate: config.kill_degenerate,
                },
            );
            if representative {
                if let (Some(weak_rate), Some(strong_rate)) = (score.weak_rate, score.strong_rate) {
                    killing_rates.insert("weak".to_string(), weak_rate);
                    killing_rates.insert("strong".to_string(), strong_rate);
                }
            }
            configs.push(ConfigReport {
                spec: config.spec.clone(),
                killable: config.killable,
                triviality_ratio: config.triviality_ratio,
                trivial: config.trivial,
                triviality_degenerate: config.triviality_degenerate,
                representative,
                killing_rates,
            });
        }
        let total = op_summary.configs.len().max(1) as f64;
        let killable_fraction =
            op_summary.configs.iter().filter(|c| c.killable).count() as f64 / total;
        let trivial_fraction =
            op_summary.configs.iter().filter(|c| c.trivial).count() as f64 / total;
        let sensitivity = match (score.weak_rate, score.strong_rate) {
            (Some(w), Some(s)) => Some(stats::sensitivity(w.killing_rate, s.killing_rate)),
            _ => None,
        };
        let representative = representative_j.map(|j| {
            op_summary
                .configs
                .iter()
                .find(|c| c.spec.index == j)
                .expect("selected index exists")
                .spec
                .clone()
        });
        operators.push(OperatorReport {
            operator: op_summary.operator,
            space_exhausted: op_summary.exhausted,
            selection: op_summary.selection,
            representative,
            killable_fraction,
            trivial_fraction,
            sensitivity,
            configs,
        });
    }

    let mut report = MutationReport {
        version: CONFIG_VERSION,
        environment: cfg.environment,
        algorithm: cfg.hyperparameters.algorithm(),
        instances: cfg.instances,
        stats: cfg.stats,
        empty_scope: false,
        mutation_scores: BTreeMap::new(),
        sensitivity: None,
        operators,
    };
    report.mutation_scores = report.recompute_scores()?;
    report.empty_scope = report.mutation_scores.is_empty();
    report.sensitivity = match (
        report.mutation_scores.get("weak"),
        report.mutation_scores.get("strong"),
    ) {
        (Some(&w), Some(&s)) => Some(stats::sensitivity(w, s)),
        _ => None,
    };

    manifest.write_text(root, REPORT_JSON_KEY, "report.json", &report.to_json()?)?;
    manifest.write_text(root, REPORT_CSV_KEY, "report.csv", &report.to_csv())?;
    manifest.save(root)?;
    Ok(report)
}

/// All four phases in order.
pub fn run_all(cfg: &PipelineConfig) -> Result<MutationReport> {
    phase_train_originals(cfg)?;
    phase_train_mutants(cfg)?;
    phase_replay(cfg)?;
    phase_score(cfg)
}
