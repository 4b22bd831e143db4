//! RL agents: hyperparameters, training entry points, and evaluation.
//!
//! Training is a pure function of `(env kind, hyperparameters, seed)`. All
//! randomness flows through labelled ChaCha8 streams derived from the seed;
//! in particular the stream producing episode-initial configurations depends
//! only on the seed, so two trainings with the same seed (for example an
//! original and its mutant) consume prefixes of the same configuration
//! sequence no matter how their hyperparameters differ.

mod a2c;
mod dqn;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{self, EnvConfig, EnvKind, EpisodeOutcome, State, TerminalReason};
use crate::nn::Network;
use crate::{rng, Error, Result};

/// Supported training algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dqn,
    A2c,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algorithm::Dqn => write!(f, "dqn"),
            Algorithm::A2c => write!(f, "a2c"),
        }
    }
}

/// How the DQN target network follows the online network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetUpdate {
    /// Copy the online network every `interval` environment steps.
    Hard { interval: u64 },
    /// Blend `tau` of the online network into the target every step.
    Polyak { tau: f64 },
}

/// DQN-specific hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnParams {
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Environment steps of random-action data collection before gradient
    /// updates begin.
    pub learning_starts: u64,
    pub target_update: TargetUpdate,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    /// Fraction of the step budget over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
}

/// A2C-specific hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2cParams {
    /// Transitions collected per update (rollouts cross episode boundaries).
    pub rollout_steps: u64,
    pub entropy_coef: f64,
    pub value_coef: f64,
}

/// Algorithm tag plus the matching parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum AlgoParams {
    Dqn(DqnParams),
    A2c(A2cParams),
}

/// Full training configuration for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub gamma: f64,
    pub total_steps: u64,
    pub learning_rate: f64,
    pub hidden_sizes: Vec<usize>,
    #[serde(flatten)]
    pub algo: AlgoParams,
}

impl Hyperparameters {
    /// Defaults that solve CartPole-class tasks with DQN.
    pub fn default_dqn() -> Self {
        Hyperparameters {
            gamma: 0.99,
            total_steps: 60_000,
            learning_rate: 1e-3,
            hidden_sizes: vec![64, 64],
            algo: AlgoParams::Dqn(DqnParams {
                replay_capacity: 10_000,
                batch_size: 64,
                learning_starts: 1_000,
                target_update: TargetUpdate::Hard { interval: 500 },
                epsilon_initial: 1.0,
                epsilon_final: 0.05,
                epsilon_decay_fraction: 0.1,
            }),
        }
    }

    /// Defaults that solve CartPole-class tasks with A2C.
    pub fn default_a2c() -> Self {
        Hyperparameters {
            gamma: 0.99,
            total_steps: 120_000,
            learning_rate: 7e-4,
            hidden_sizes: vec![64, 64],
            algo: AlgoParams::A2c(A2cParams {
                rollout_steps: 32,
                entropy_coef: 0.01,
                value_coef: 0.5,
            }),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self.algo {
            AlgoParams::Dqn(_) => Algorithm::Dqn,
            AlgoParams::A2c(_) => Algorithm::A2c,
        }
    }

    pub fn dqn(&self) -> Option<&DqnParams> {
        match &self.algo {
            AlgoParams::Dqn(p) => Some(p),
            AlgoParams::A2c(_) => None,
        }
    }

    pub fn a2c(&self) -> Option<&A2cParams> {
        match &self.algo {
            AlgoParams::A2c(p) => Some(p),
            AlgoParams::Dqn(_) => None,
        }
    }

    pub fn dqn_mut(&mut self) -> Option<&mut DqnParams> {
        match &mut self.algo {
            AlgoParams::Dqn(p) => Some(p),
            AlgoParams::A2c(_) => None,
        }
    }

    pub fn a2c_mut(&mut self) -> Option<&mut A2cParams> {
        match &mut self.algo {
            AlgoParams::A2c(p) => Some(p),
            AlgoParams::Dqn(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("gamma", format!("{} outside (0, 1]", self.gamma)));
        }
        if self.total_steps == 0 {
            return Err(Error::config("total_steps", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(
                "learning_rate",
                format!("{} not positive", self.learning_rate),
            ));
        }
        if self.hidden_sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("hidden_sizes", "zero-width hidden layer"));
        }
        match &self.algo {
            AlgoParams::Dqn(p) => {
                if p.batch_size == 0 {
                    return Err(Error::config("batch_size", "must be at least 1"));
                }
                if p.replay_capacity < p.batch_size {
                    return Err(Error::config(
                        "replay_capacity",
                        format!("{} smaller than batch_size {}", p.replay_capacity, p.batch_size),
                    ));
                }
                if p.learning_starts >= self.total_steps {
                    return Err(Error::config(
                        "learning_starts",
                        format!(
                            "{} not below total_steps {}",
                            p.learning_starts, self.total_steps
                        ),
                    ));
                }
                for (name, v) in [
                    ("epsilon_initial", p.epsilon_initial),
                    ("epsilon_final", p.epsilon_final),
                ] {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::config(name, format!("{v} outside [0, 1]")));
                    }
                }
                if p.epsilon_final > p.epsilon_initial {
                    return Err(Error::config(
                        "epsilon_final",
                        format!("{} above epsilon_initial {}", p.epsilon_final, p.epsilon_initial),
                    ));
                }
                if !(p.epsilon_decay_fraction > 0.0 && p.epsilon_decay_fraction <= 1.0) {
                    return Err(Error::config(
                        "epsilon_decay_fraction",
                        format!("{} outside (0, 1]", p.epsilon_decay_fraction),
                    ));
                }
                match p.target_update {
                    TargetUpdate::Hard { interval } => {
                        if interval == 0 {
                            return Err(Error::config("target_update.interval", "must be at least 1"));
                        }
                    }
                    TargetUpdate::Polyak { tau } => {
                        if !(tau > 0.0 && tau <= 1.0) {
                            return Err(Error::config(
                                "target_update.tau",
                                format!("{tau} outside (0, 1]"),
                            ));
                        }
                    }
                }
            }
            AlgoParams::A2c(p) => {
                if p.rollout_steps == 0 {
                    return Err(Error::config("rollout_steps", "must be at least 1"));
                }
                if !(p.entropy_coef >= 0.0 && p.entropy_coef.is_finite()) {
                    return Err(Error::config(
                        "entropy_coef",
                        format!("{} negative or non-finite", p.entropy_coef),
                    ));
                }
                if !(p.value_coef >= 0.0 && p.value_coef.is_finite()) {
                    return Err(Error::config(
                        "value_coef",
                        format!("{} negative or non-finite", p.value_coef),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A trained, evaluable agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedAgent {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub steps_consumed: u64,
    pub hyperparameters: Hyperparameters,
    pub network: Network,
}

/// Why a logged episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeEnd {
    Success,
    Failure,
    /// Cut short because the training step budget ran out.
    Truncated,
}

/// One training episode: its initial configuration and how it went.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub config: EnvConfig,
    pub length: u32,
    pub return_sum: f64,
    pub min_qoc: f64,
    pub end: EpisodeEnd,
}

/// Ordered record of every episode encountered during one training run.
/// The configs in order form the training reproduction sequence (TRS).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
}

#[derive(Serialize, Deserialize)]
struct LogHeader {
    seed: u64,
}

impl TrainingLog {
    /// The training reproduction sequence: every episode-initial
    /// configuration in the order it was consumed.
    pub fn trs(&self) -> Vec<EnvConfig> {
        self.episodes.iter().map(|e| e.config.clone()).collect()
    }

    /// JSON lines: a header line with the seed, then one episode per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&LogHeader { seed: self.seed }).unwrap();
        out.push('\n');
        for episode in &self.episodes {
            out.push_str(&serde_json::to_string(episode).unwrap());
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::arg("empty training log".to_string()))?;
        let header: LogHeader =
            serde_json::from_str(header).map_err(|e| Error::json("training log header", e))?;
        let episodes = lines
            .map(|line| serde_json::from_str(line).map_err(|e| Error::json("training log line", e)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingLog {
            seed: header.seed,
            episodes,
        })
    }
}

/// Deterministic vs stochastic action selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Deterministic,
    Stochastic,
}

/// Network layout for an algorithm on an environment.
fn network_sizes(kind: EnvKind, hp: &Hyperparameters) -> Vec<usize> {
    let mut sizes = vec![kind.observation_dim()];
    sizes.extend(&hp.hidden_sizes);
    sizes.push(match hp.algorithm() {
        Algorithm::Dqn => kind.action_count(),
        // Policy logits plus one value head.
        Algorithm::A2c => kind.action_count() + 1,
    });
    sizes
}

/// Lowest-index argmax.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// True when a terminal state is a step-cap truncation rather than a real
/// environment outcome (used to decide whether TD targets bootstrap).
fn is_time_truncation(kind: EnvKind, state: &State) -> bool {
    if !state.terminal || state.step_count < kind.episode_cap() {
        return false;
    }
    match kind {
        EnvKind::CartPole => state.terminal_reason == TerminalReason::Success,
        EnvKind::GridBridge => {
            state.terminal_reason == TerminalReason::Failure
                && !envs::gridbridge::is_hazard(
                    state.observation[0] as usize,
                    state.observation[1] as usize,
                )
        }
    }
}

/// Select an action for an observation.
///
/// DQN supports only deterministic (greedy) selection; A2C additionally
/// supports sampling from the policy, which consumes `stream`.
pub fn act(
    agent: &TrainedAgent,
    observation: &[f64],
    mode: ActionMode,
    stream: Option<&mut ChaCha8Rng>,
) -> Result<usize> {
    let output = agent.network.forward(observation)?;
    match (agent.algorithm, mode) {
        (Algorithm::Dqn, ActionMode::Deterministic) => Ok(argmax(&output)),
        (Algorithm::Dqn, ActionMode::Stochastic) => Err(Error::UnsupportedMode(
            "dqn defines no stochastic test-time policy".into(),
        )),
        (Algorithm::A2c, ActionMode::Deterministic) => Ok(argmax(&output[..output.len() - 1])),
        (Algorithm::A2c, ActionMode::Stochastic) => {
            use rand::Rng;
            let stream = stream.ok_or_else(|| {
                Error::arg("stochastic action selection needs an rng stream".to_string())
            })?;
            let probs = crate::nn::softmax(&output[..output.len() - 1]);
            let draw: f64 = stream.gen();
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if draw < acc {
                    return Ok(i);
                }
            }
            Ok(probs.len() - 1)
        }
    }
}

/// Greedy action for a validated agent; infallible by construction.
pub(crate) fn deterministic_action(agent: &TrainedAgent, observation: &[f64]) -> usize {
    act(agent, observation, ActionMode::Deterministic, None)
        .expect("deterministic action on validated agent")
}

/// Evaluate an agent on a suite of configurations in deterministic mode.
/// Outcomes preserve suite order.
pub fn evaluate(
    agent: &TrainedAgent,
    kind: EnvKind,
    configs: &[EnvConfig],
) -> Result<Vec<EpisodeOutcome>> {
    if configs.is_empty() {
        return Err(Error::EmptyInput("evaluation suite".into()));
    }
    let expected = network_sizes(kind, &agent.hyperparameters);
    if agent.network.layer_sizes() != expected.as_slice() {
        return Err(Error::ShapeMismatch {
            expected: format!("{expected:?}"),
            got: format!("{:?}", agent.network.layer_sizes()),
        });
    }
    configs
        .iter()
        .map(|config| envs::run_episode(kind, config, &mut |obs| deterministic_action(agent, obs)))
        .collect()
}

/// Train an agent. Equal inputs produce bitwise-equal agents and logs.
pub fn train(kind: EnvKind, hp: &Hyperparameters, seed: u64) -> Result<(TrainedAgent, TrainingLog)> {
    hp.validate()?;
    match hp.algorithm() {
        Algorithm::Dqn => dqn::train(kind, hp, seed),
        Algorithm::A2c => a2c::train(kind, hp, seed),
    }
}

/// Regenerate the episode-initial configuration sequence a training run with
/// this seed consumes. Any agent's TRS is a prefix of this sequence.
pub fn training_config_sequence(kind: EnvKind, seed: u64, count: usize) -> Vec<EnvConfig> {
    let mut stream = rng::substream(seed, "env-configs");
    (0..count)
        .map(|_| envs::sample_config(kind, &mut stream))
        .collect()
}

/// Shared bookkeeping for the trainers: episode accumulation, TRS recording,
/// and budget-exact termination.
struct EpisodeTracker {
    kind: EnvKind,
    config_stream: ChaCha8Rng,
    episodes: Vec<EpisodeRecord>,
    current_config: EnvConfig,
    return_sum: f64,
    min_qoc: f64,
}

impl EpisodeTracker {
    fn start(kind: EnvKind, seed: u64) -> Result<(Self, State)> {
        let mut config_stream = rng::substream(seed, "env-configs");
        let config = envs::sample_config(kind, &mut config_stream);
        let state = envs::reset(kind, &config)?;
        let min_qoc = envs::qoc_step(kind, &state);
        Ok((
            EpisodeTracker {
                kind,
                config_stream,
                episodes: Vec::new(),
                current_config: config,
                return_sum: 0.0,
                min_qoc,
            },
            state,
        ))
    }

    /// Record a step's reward and the QOC of the state it produced.
    fn observe(&mut self, next: &State, reward: f64) {
        self.return_sum += reward;
        self.min_qoc = self.min_qoc.min(envs::qoc_step(self.kind, next));
    }

    /// Close the current episode as terminal and reset, unless the budget is
    /// exhausted, in which case the state stays terminal.
    fn finish_episode(&mut self, state: &State, budget_left: bool) -> Result<Option<State>> {
        self.episodes.push(EpisodeRecord {
            config: self.current_config.clone(),
            length: state.step_count,
            return_sum: self.return_sum,
            min_qoc: self.min_qoc,
            end: if state.terminal_reason == TerminalReason::Success {
                EpisodeEnd::Success
            } else {
                EpisodeEnd::Failure
            },
        });
        if !budget_left {
            return Ok(None);
        }
        self.current_config = envs::sample_config(self.kind, &mut self.config_stream);
        let state = envs::reset(self.kind, &self.current_config)?;
        self.return_sum = 0.0;
        self.min_qoc = envs::qoc_step(self.kind, &state);
        Ok(Some(state))
    }

    /// Record the in-progress episode as truncated by the budget.
    fn finish_truncated(&mut self, state: &State) {
        if !state.terminal {
            self.episodes.push(EpisodeRecord {
                config: self.current_config.clone(),
                length: state.step_count,
                return_sum: self.return_sum,
                min_qoc: self.min_qoc,
                end: EpisodeEnd::Truncated,
            });
        }
    }

    fn into_log(self, seed: u64) -> TrainingLog {
        TrainingLog {
            seed,
            episodes: self.episodes,
        }
    }
}
