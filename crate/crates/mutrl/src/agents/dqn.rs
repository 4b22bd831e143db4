//! DQN: epsilon-greedy exploration, uniform replay, and a target network.

use rand::Rng;

use super::{argmax, is_time_truncation, network_sizes, EpisodeTracker, TrainedAgent, TrainingLog};
use crate::envs::{self, EnvKind};
use crate::nn::{backprop_step, Loss, Network, OptimizerState, Target};
use crate::{rng, Error, Result};

/// One stored transition. `done` is true only for real environment outcomes;
/// step-cap truncations keep bootstrapping through the cut.
struct Transition {
    observation: Vec<f64>,
    action: usize,
    reward: f64,
    next_observation: Vec<f64>,
    done: bool,
}

/// Fixed-capacity ring buffer with overwrite-oldest eviction.
struct ReplayBuffer {
    slots: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    fn new(capacity: usize) -> Self {
        ReplayBuffer {
            slots: Vec::with_capacity(capacity),
            capacity,
            next: 0,
        }
    }

    fn push(&mut self, transition: Transition) {
        if self.slots.len() < self.capacity {
            self.slots.push(transition);
        } else {
            self.slots[self.next] = transition;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    fn len(&self) -> usize {
        self.slots.len()
    }

    fn get(&self, index: usize) -> &Transition {
        &self.slots[index]
    }
}

/// Linear epsilon schedule over the first `decay_fraction` of the budget.
fn epsilon_at(step: u64, total_steps: u64, initial: f64, final_: f64, decay_fraction: f64) -> f64 {
    let horizon = decay_fraction * total_steps as f64;
    let progress = if horizon > 0.0 {
        (step as f64 / horizon).min(1.0)
    } else {
        1.0
    };
    initial + (final_ - initial) * progress
}

/// Environment steps per gradient update. Updating on every step overfits
/// the network to the most recent (and most homogeneous) buffer contents;
/// spacing the updates out keeps the policy stable late in training.
const UPDATE_EVERY: u64 = 8;

pub(super) fn train(
    kind: EnvKind,
    hp: &super::Hyperparameters,
    seed: u64,
) -> Result<(TrainedAgent, TrainingLog)> {
    let params = hp.dqn().expect("dqn dispatch").clone();
    let sizes = network_sizes(kind, hp);
    let n_actions = kind.action_count();

    let mut online = Network::init(&sizes, rng::subseed(seed, "init"))?;
    let mut target = online.clone();
    let mut optimizer = OptimizerState::adam(hp.learning_rate);
    let mut explore = rng::substream(seed, "explore");
    let mut replay_stream = rng::substream(seed, "replay");
    let mut buffer = ReplayBuffer::new(params.replay_capacity);

    let (mut tracker, mut state) = EpisodeTracker::start(kind, seed)?;

    let mut batch_inputs: Vec<Vec<f64>> = Vec::with_capacity(params.batch_size);
    let mut batch_targets: Vec<Target> = Vec::with_capacity(params.batch_size);

    for step in 0..hp.total_steps {
        let action = if step < params.learning_starts {
            explore.gen_range(0..n_actions)
        } else {
            let epsilon = epsilon_at(
                step,
                hp.total_steps,
                params.epsilon_initial,
                params.epsilon_final,
                params.epsilon_decay_fraction,
            );
            if explore.gen::<f64>() < epsilon {
                explore.gen_range(0..n_actions)
            } else {
                argmax(&online.forward(&state.observation)?)
            }
        };

        let (next, reward) = envs::step(kind, &state, action)?;
        tracker.observe(&next, reward);
        buffer.push(Transition {
            observation: state.observation.clone(),
            action,
            reward,
            next_observation: next.observation.clone(),
            done: next.terminal && !is_time_truncation(kind, &next),
        });
        state = next;

        if step + 1 > params.learning_starts && (step + 1) % UPDATE_EVERY == 0 {
            batch_inputs.clear();
            batch_targets.clear();
            for _ in 0..params.batch_size {
                let t = buffer.get(replay_stream.gen_range(0..buffer.len()));
                let bootstrap = if t.done {
                    0.0
                } else {
                    // Double-DQN target: the online network chooses the
                    // action, the target network prices it. Plain max over
                    // the target's outputs overestimates systematically and
                    // destabilises the late-training policy.
                    let chosen = argmax(&online.forward(&t.next_observation)?);
                    target.forward(&t.next_observation)?[chosen]
                };
                batch_inputs.push(t.observation.clone());
                batch_targets.push(Target::Selected {
                    index: t.action,
                    value: t.reward + hp.gamma * bootstrap,
                });
            }
            let loss = backprop_step(
                &mut online,
                &mut optimizer,
                &batch_inputs,
                Loss::MseSelected,
                &batch_targets,
            )?;
            if !loss.is_finite() {
                return Err(Error::Divergence { step });
            }
        }

        match params.target_update {
            super::TargetUpdate::Hard { interval } => {
                if (step + 1) % interval == 0 {
                    target = online.clone();
                }
            }
            super::TargetUpdate::Polyak { tau } => target.polyak_from(&online, tau)?,
        }

        if state.terminal {
            let budget_left = step + 1 < hp.total_steps;
            if let Some(fresh) = tracker.finish_episode(&state, budget_left)? {
                state = fresh;
            }
        }
    }
    tracker.finish_truncated(&state);

    Ok((
        TrainedAgent {
            algorithm: super::Algorithm::Dqn,
            seed,
            steps_consumed: hp.total_steps,
            hyperparameters: hp.clone(),
            network: online,
        },
        tracker.into_log(seed),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_schedule_endpoints_and_midpoint() {
        // 1.0 -> 0.05 over the first 10% of 1000 steps.
        assert!((epsilon_at(0, 1000, 1.0, 0.05, 0.1) - 1.0).abs() < 1e-12);
        assert!((epsilon_at(50, 1000, 1.0, 0.05, 0.1) - 0.525).abs() < 1e-12);
        assert!((epsilon_at(100, 1000, 1.0, 0.05, 0.1) - 0.05).abs() < 1e-12);
        assert!((epsilon_at(999, 1000, 1.0, 0.05, 0.1) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn replay_buffer_overwrites_oldest() {
        let mut buffer = ReplayBuffer::new(3);
        for i in 0..5 {
            buffer.push(Transition {
                observation: vec![f64::from(i)],
                action: 0,
                reward: 0.0,
                next_observation: vec![0.0],
                done: false,
            });
        }
        assert_eq!(buffer.len(), 3);
        let stored: Vec<f64> = (0..3).map(|i| buffer.get(i).observation[0]).collect();
        // Slots 0 and 1 were overwritten by items 3 and 4.
        assert_eq!(stored, vec![3.0, 4.0, 2.0]);
    }
}
