//! Episodic environments with explicit initial configurations.
//!
//! An episode is fully determined by `(EnvKind, EnvConfig, policy)`: the
//! dynamics contain no hidden randomness, so replaying a recorded
//! configuration against the same policy reproduces the trajectory bit for
//! bit. Besides success/failure, every state exposes a quality-of-control
//! (QOC) score in [0, 1] measuring how close the episode came to a failure
//! threshold.

pub mod cartpole;
pub mod gridbridge;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The supported environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    CartPole,
    GridBridge,
}

impl EnvKind {
    pub fn observation_dim(self) -> usize {
        match self {
            EnvKind::CartPole => cartpole::OBSERVATION_DIM,
            EnvKind::GridBridge => gridbridge::OBSERVATION_DIM,
        }
    }

    pub fn action_count(self) -> usize {
        match self {
            EnvKind::CartPole => cartpole::ACTION_COUNT,
            EnvKind::GridBridge => gridbridge::ACTION_COUNT,
        }
    }

    pub fn episode_cap(self) -> u32 {
        match self {
            EnvKind::CartPole => cartpole::EPISODE_CAP,
            EnvKind::GridBridge => gridbridge::EPISODE_CAP,
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnvKind::CartPole => write!(f, "cart_pole"),
            EnvKind::GridBridge => write!(f, "grid_bridge"),
        }
    }
}

/// An episode-initial configuration: the numbers that fully determine the
/// starting state. CartPole uses `[x, x_dot, theta, theta_dot]`; GridBridge
/// uses `[row, col]` of the start cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnvConfig(pub Vec<f64>);

impl EnvConfig {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Why a state is terminal (or `None` while the episode is live).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    None,
    Success,
    Failure,
}

/// A full environment state.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub observation: Vec<f64>,
    pub step_count: u32,
    pub terminal: bool,
    pub terminal_reason: TerminalReason,
}

/// Aggregate result of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub success: bool,
    /// Steps taken; at least 1 because initial states are never terminal.
    pub length: u32,
    pub return_sum: f64,
    /// Minimum QOC over every visited state, initial state included.
    pub min_qoc: f64,
}

/// Check that a configuration is valid for the environment.
pub fn validate_config(kind: EnvKind, config: &EnvConfig) -> Result<()> {
    let values = config.values();
    match kind {
        EnvKind::CartPole => {
            if values.len() != 4 {
                return Err(Error::arg(format!(
                    "cart_pole config needs 4 values, got {}",
                    values.len()
                )));
            }
            for (i, v) in values.iter().enumerate() {
                if !v.is_finite() || v.abs() > cartpole::INIT_RANGE {
                    return Err(Error::arg(format!(
                        "cart_pole config[{i}] = {v} outside [-{r}, {r}]",
                        r = cartpole::INIT_RANGE
                    )));
                }
            }
        }
        EnvKind::GridBridge => {
            if values.len() != 2 {
                return Err(Error::arg(format!(
                    "grid_bridge config needs 2 values, got {}",
                    values.len()
                )));
            }
            let ok_cell = values.iter().all(|v| v.fract() == 0.0 && v.is_finite())
                && gridbridge::on_grid(values[0] as i64, values[1] as i64);
            if !ok_cell {
                return Err(Error::arg(format!(
                    "grid_bridge config {values:?} is not a grid cell"
                )));
            }
            let (row, col) = (values[0] as usize, values[1] as usize);
            if gridbridge::is_hazard(row, col) {
                return Err(Error::arg(format!("start cell ({row}, {col}) is a hazard")));
            }
            if (row, col) == gridbridge::GOAL {
                return Err(Error::arg("start cell is the goal".to_string()));
            }
        }
    }
    Ok(())
}

/// Draw a fresh configuration from the environment's initial distribution.
/// Equal stream states yield equal configurations.
pub fn sample_config(kind: EnvKind, stream: &mut ChaCha8Rng) -> EnvConfig {
    match kind {
        EnvKind::CartPole => {
            let r = cartpole::INIT_RANGE;
            EnvConfig((0..4).map(|_| stream.gen_range(-r..=r)).collect())
        }
        EnvKind::GridBridge => {
            let (row, col) = gridbridge::START_CELLS[stream.gen_range(0..gridbridge::START_CELLS.len())];
            EnvConfig(vec![row as f64, col as f64])
        }
    }
}

/// Build the initial state for a configuration.
pub fn reset(kind: EnvKind, config: &EnvConfig) -> Result<State> {
    validate_config(kind, config)?;
    Ok(State {
        observation: config.values().to_vec(),
        step_count: 0,
        terminal: false,
        terminal_reason: TerminalReason::None,
    })
}

/// Advance one step. Pure: the input state is untouched.
pub fn step(kind: EnvKind, state: &State, action: usize) -> Result<(State, f64)> {
    if state.terminal {
        return Err(Error::TerminalStep);
    }
    if action >= kind.action_count() {
        return Err(Error::InvalidAction {
            action,
            actions: kind.action_count(),
            step: state.step_count,
        });
    }
    Ok(match kind {
        EnvKind::CartPole => cartpole::step(state, action),
        EnvKind::GridBridge => gridbridge::step(state, action),
    })
}

/// Per-state quality of control in [0, 1]; 0 exactly at a failure threshold.
pub fn qoc_step(kind: EnvKind, state: &State) -> f64 {
    match kind {
        EnvKind::CartPole => cartpole::qoc(&state.observation),
        EnvKind::GridBridge => gridbridge::qoc(&state.observation),
    }
}

/// Run one full episode under `policy`.
///
/// The policy sees each observation and returns an action index; an
/// out-of-range action aborts with an error naming the step.
pub fn run_episode(
    kind: EnvKind,
    config: &EnvConfig,
    policy: &mut dyn FnMut(&[f64]) -> usize,
) -> Result<EpisodeOutcome> {
    let mut state = reset(kind, config)?;
    let mut min_qoc = qoc_step(kind, &state);
    let mut return_sum = 0.0;
    loop {
        let action = policy(&state.observation);
        let (next, reward) = step(kind, &state, action)?;
        return_sum += reward;
        min_qoc = min_qoc.min(qoc_step(kind, &next));
        state = next;
        if state.terminal {
            return Ok(EpisodeOutcome {
                success: state.terminal_reason == TerminalReason::Success,
                length: state.step_count,
                return_sum,
                min_qoc,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn reset_embeds_config() {
        let config = EnvConfig(vec![0.01, -0.02, 0.03, 0.0]);
        let state = reset(EnvKind::CartPole, &config).unwrap();
        assert_eq!(state.observation, config.0);
        assert_eq!(state.step_count, 0);
        assert!(!state.terminal);

        let config = EnvConfig(vec![2.0, 0.0]);
        let state = reset(EnvKind::GridBridge, &config).unwrap();
        assert_eq!(state.observation, vec![2.0, 0.0]);
    }

    #[test]
    fn reset_rejects_invalid_configs() {
        assert!(reset(EnvKind::CartPole, &EnvConfig(vec![0.2, 0.0, 0.0, 0.0])).is_err());
        assert!(reset(EnvKind::CartPole, &EnvConfig(vec![0.0, 0.0])).is_err());
        // hazard cell
        assert!(reset(EnvKind::GridBridge, &EnvConfig(vec![1.0, 3.0])).is_err());
        // goal cell
        assert!(reset(EnvKind::GridBridge, &EnvConfig(vec![2.0, 7.0])).is_err());
        // off grid
        assert!(reset(EnvKind::GridBridge, &EnvConfig(vec![6.0, 0.0])).is_err());
    }

    #[test]
    fn cartpole_steps_are_deterministic() {
        let config = EnvConfig(vec![0.01, 0.02, -0.03, 0.04]);
        let mut a = reset(EnvKind::CartPole, &config).unwrap();
        let mut b = reset(EnvKind::CartPole, &config).unwrap();
        for i in 0..50 {
            let action = i % 2;
            let (na, ra) = step(EnvKind::CartPole, &a, action).unwrap();
            let (nb, rb) = step(EnvKind::CartPole, &b, action).unwrap();
            assert_eq!(na, nb);
            assert_eq!(ra, rb);
            a = na;
            b = nb;
            if a.terminal {
                break;
            }
        }
    }

    #[test]
    fn cartpole_fails_past_theta_limit() {
        // Drive the pole over by always pushing the same way.
        let config = EnvConfig(vec![0.0, 0.0, 0.04, 0.05]);
        let outcome = run_episode(EnvKind::CartPole, &config, &mut |_| 1).unwrap();
        assert!(!outcome.success);
        assert!(outcome.length < cartpole::EPISODE_CAP);
        assert_eq!(outcome.return_sum, f64::from(outcome.length));
    }

    #[test]
    fn cartpole_constant_action_fails_before_cap() {
        // A constant-action policy cannot balance from any sampled start.
        let mut stream = rng::stream(11);
        for _ in 0..10 {
            let config = sample_config(EnvKind::CartPole, &mut stream);
            let outcome = run_episode(EnvKind::CartPole, &config, &mut |_| 0).unwrap();
            assert!(!outcome.success);
            assert!(outcome.length < cartpole::EPISODE_CAP);
        }
    }

    #[test]
    fn cartpole_success_exactly_at_cap() {
        // A plausible balancing controller: push toward the pole's lean.
        let config = EnvConfig(vec![0.0, 0.0, 0.01, 0.0]);
        let mut policy = |obs: &[f64]| usize::from(obs[2] + obs[3] > 0.0);
        let outcome = run_episode(EnvKind::CartPole, &config, &mut policy).unwrap();
        assert!(outcome.success);
        assert_eq!(outcome.length, cartpole::EPISODE_CAP);
        assert_eq!(outcome.return_sum, f64::from(cartpole::EPISODE_CAP));
    }

    #[test]
    fn cartpole_qoc_examples() {
        let state = State {
            observation: vec![1.2, 0.0, 3.0_f64.to_radians(), 0.0],
            step_count: 0,
            terminal: false,
            terminal_reason: TerminalReason::None,
        };
        let q = qoc_step(EnvKind::CartPole, &state);
        assert!((q - 0.5).abs() < 1e-12);

        let at_limit = State {
            observation: vec![2.4, 0.0, 0.0, 0.0],
            step_count: 0,
            terminal: false,
            terminal_reason: TerminalReason::None,
        };
        assert_eq!(qoc_step(EnvKind::CartPole, &at_limit), 0.0);
    }

    #[test]
    fn gridbridge_hazard_step_fails_with_step_reward() {
        let config = EnvConfig(vec![2.0, 0.0]);
        let state = reset(EnvKind::GridBridge, &config).unwrap();
        // east twice reaches (2, 2) on the bridge; north falls off.
        let (state, _) = step(EnvKind::GridBridge, &state, 2).unwrap();
        let (state, _) = step(EnvKind::GridBridge, &state, 2).unwrap();
        let (state, reward) = step(EnvKind::GridBridge, &state, 0).unwrap();
        assert!(state.terminal);
        assert_eq!(state.terminal_reason, TerminalReason::Failure);
        assert_eq!(reward, gridbridge::STEP_REWARD);
        assert_eq!(qoc_step(EnvKind::GridBridge, &state), 0.0);
    }

    #[test]
    fn gridbridge_goal_succeeds() {
        let config = EnvConfig(vec![2.0, 0.0]);
        let mut policy = |_: &[f64]| 2; // march east along the bridge
        let outcome = run_episode(EnvKind::GridBridge, &config, &mut policy).unwrap();
        assert!(outcome.success);
        assert_eq!(outcome.length, 7);
        let expected = 7.0 * gridbridge::STEP_REWARD + gridbridge::GOAL_REWARD;
        assert!((outcome.return_sum - expected).abs() < 1e-12);
    }

    #[test]
    fn gridbridge_cap_exhaustion_fails() {
        let config = EnvConfig(vec![0.0, 0.0]);
        // Bounce against the wall forever.
        let outcome = run_episode(EnvKind::GridBridge, &config, &mut |_| 3).unwrap();
        assert!(!outcome.success);
        assert_eq!(outcome.length, gridbridge::EPISODE_CAP);
    }

    #[test]
    fn step_on_terminal_state_errors() {
        let config = EnvConfig(vec![2.0, 0.0]);
        let mut state = reset(EnvKind::GridBridge, &config).unwrap();
        for _ in 0..gridbridge::EPISODE_CAP {
            let (next, _) = step(EnvKind::GridBridge, &state, 3).unwrap();
            state = next;
        }
        assert!(state.terminal);
        assert!(matches!(
            step(EnvKind::GridBridge, &state, 3),
            Err(Error::TerminalStep)
        ));
    }

    #[test]
    fn out_of_range_action_errors_with_step_index() {
        let config = EnvConfig(vec![2.0, 0.0]);
        let err = run_episode(EnvKind::GridBridge, &config, &mut |_| 9).unwrap_err();
        match err {
            Error::InvalidAction { action, step, .. } => {
                assert_eq!(action, 9);
                assert_eq!(step, 0);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn sample_config_is_deterministic_and_valid() {
        for kind in [EnvKind::CartPole, EnvKind::GridBridge] {
            let mut a = rng::stream(5);
            let mut b = rng::stream(5);
            for _ in 0..32 {
                let ca = sample_config(kind, &mut a);
                let cb = sample_config(kind, &mut b);
                assert_eq!(ca, cb);
                validate_config(kind, &ca).unwrap();
            }
        }
    }

    #[test]
    fn min_qoc_bounded_by_terminal_qoc() {
        let config = EnvConfig(vec![0.0, 0.0, 0.04, 0.05]);
        let mut states = Vec::new();
        let mut state = reset(EnvKind::CartPole, &config).unwrap();
        states.push(state.clone());
        while !state.terminal {
            let (next, _) = step(EnvKind::CartPole, &state, 1).unwrap();
            state = next;
            states.push(state.clone());
        }
        let outcome = run_episode(EnvKind::CartPole, &config, &mut |_| 1).unwrap();
        let terminal_qoc = qoc_step(EnvKind::CartPole, states.last().unwrap());
        assert!(outcome.min_qoc <= terminal_qoc);
        let min_direct = states
            .iter()
            .map(|s| qoc_step(EnvKind::CartPole, s))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(outcome.min_qoc, min_direct);
    }

    #[test]
    fn episode_config_roundtrips_as_json_array() {
        let config = EnvConfig(vec![0.01, -0.02, 0.03, 0.0]);
        let text = serde_json::to_string(&config).unwrap();
        assert!(text.starts_with('['));
        let back: EnvConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
    }
}
