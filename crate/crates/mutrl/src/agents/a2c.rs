//! A2C: n-step advantage actor-critic with a shared policy/value network.
//!
//! Rollouts have a fixed length and cross episode boundaries; the n-step
//! return resets at real terminals, bootstraps from the value head at
//! step-cap truncations, and bootstraps at the rollout cut.

use rand::Rng;

use super::{is_time_truncation, network_sizes, EpisodeTracker, TrainedAgent, TrainingLog};
use crate::envs::{self, EnvKind};
use crate::nn::{backprop_step, softmax, Loss, Network, OptimizerState, Target};
use crate::{rng, Error, Result};

struct RolloutStep {
    observation: Vec<f64>,
    action: usize,
    reward: f64,
    /// Value prediction for `observation` at collection time (the network
    /// does not change within a rollout).
    value: f64,
    /// Episode ended after this step, for any reason.
    boundary: bool,
    /// The boundary was a step-cap truncation, so the return bootstraps.
    truncation: bool,
    next_observation: Vec<f64>,
}

/// Sample an action index from policy logits.
fn sample_action(probs: &[f64], stream: &mut rand_chacha::ChaCha8Rng) -> usize {
    let draw: f64 = stream.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub(super) fn train(
    kind: EnvKind,
    hp: &super::Hyperparameters,
    seed: u64,
) -> Result<(TrainedAgent, TrainingLog)> {
    let params = hp.a2c().expect("a2c dispatch").clone();
    let sizes = network_sizes(kind, hp);
    let n_actions = kind.action_count();

    let mut network = Network::init(&sizes, rng::subseed(seed, "init"))?;
    let mut optimizer = OptimizerState::adam(hp.learning_rate);
    let mut sample_stream = rng::substream(seed, "sample");

    let (mut tracker, mut state) = EpisodeTracker::start(kind, seed)?;

    let loss_kind = Loss::ActorCritic {
        value_coef: params.value_coef,
        entropy_coef: params.entropy_coef,
    };
    let mut rollout: Vec<RolloutStep> = Vec::with_capacity(params.rollout_steps as usize);
    let mut steps_done: u64 = 0;

    while steps_done < hp.total_steps {
        let rollout_len = params.rollout_steps.min(hp.total_steps - steps_done);
        rollout.clear();
        for _ in 0..rollout_len {
            let output = network.forward(&state.observation)?;
            let value = output[n_actions];
            let probs = softmax(&output[..n_actions]);
            let action = sample_action(&probs, &mut sample_stream);

            let (next, reward) = envs::step(kind, &state, action)?;
            tracker.observe(&next, reward);
            rollout.push(RolloutStep {
                observation: state.observation.clone(),
                action,
                reward,
                value,
                boundary: next.terminal,
                truncation: is_time_truncation(kind, &next),
                next_observation: next.observation.clone(),
            });
            state = next;
            steps_done += 1;

            if state.terminal {
                let budget_left = steps_done < hp.total_steps;
                if let Some(fresh) = tracker.finish_episode(&state, budget_left)? {
                    state = fresh;
                }
            }
        }

        let value_of = |net: &Network, obs: &[f64]| -> Result<f64> {
            Ok(net.forward(obs)?[n_actions])
        };

        // n-step returns, backwards through the rollout.
        let last = rollout.last().expect("rollout_len >= 1");
        let mut running = if last.boundary {
            0.0 // overwritten below by the boundary branch
        } else {
            value_of(&network, &last.next_observation)?
        };
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(rollout.len());
        let mut targets: Vec<Target> = Vec::with_capacity(rollout.len());
        for step in rollout.iter().rev() {
            running = if step.boundary {
                let tail = if step.truncation {
                    value_of(&network, &step.next_observation)?
                } else {
                    0.0
                };
                step.reward + hp.gamma * tail
            } else {
                step.reward + hp.gamma * running
            };
            inputs.push(step.observation.clone());
            targets.push(Target::ActorCritic {
                action: step.action,
                advantage: running - step.value,
                return_value: running,
            });
        }
        inputs.reverse();
        targets.reverse();

        let loss = backprop_step(&mut network, &mut optimizer, &inputs, loss_kind, &targets)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { step: steps_done });
        }
    }
    tracker.finish_truncated(&state);

    Ok((
        TrainedAgent {
            algorithm: super::Algorithm::A2c,
            seed,
            steps_consumed: hp.total_steps,
            hyperparameters: hp.clone(),
            network,
        },
        tracker.into_log(seed),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_action_follows_cumulative_probabilities() {
        let mut stream = rng::stream(99);
        let probs = [0.25, 0.25, 0.5];
        let mut counts = [0usize; 3];
        for _ in 0..20_000 {
            counts[sample_action(&probs, &mut stream)] += 1;
        }
        let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / 20_000.0).collect();
        for (freq, p) in freqs.iter().zip(probs.iter()) {
            assert!((freq - p).abs() < 0.02, "freq {freq} vs p {p}");
        }
    }

    #[test]
    fn degenerate_distribution_always_picks_the_mass() {
        let mut stream = rng::stream(1);
        for _ in 0..100 {
            assert_eq!(sample_action(&[0.0, 1.0, 0.0], &mut stream), 1);
        }
    }
}
