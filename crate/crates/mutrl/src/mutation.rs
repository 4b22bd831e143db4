//! Mutation operators: single-hyperparameter perturbations of a training
//! configuration, plus the machinery to enumerate candidate values, sample
//! mutants, and pick a representative mutant per operator.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Algorithm, Hyperparameters, TargetUpdate};
use crate::{Error, Result};

/// The eight mutation operators.
///
/// Each targets exactly one hyperparameter (SNU and SPV may also switch the
/// target-update mode). Catalog order below is the canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OperatorId {
    /// Shrink the discount factor gamma.
    #[serde(rename = "SDF")]
    Sdf,
    /// Shift when gradient updates start (DQN `learning_starts`).
    #[serde(rename = "SLS")]
    Sls,
    /// Cut the training step budget.
    #[serde(rename = "NEI")]
    Nei,
    /// Stretch the hard target-network update interval (DQN).
    #[serde(rename = "SNU")]
    Snu,
    /// Replace the target update with a Polyak blend of rate tau (DQN).
    #[serde(rename = "SPV")]
    Spv,
    /// Raise the final exploration rate (DQN `epsilon_final`).
    #[serde(rename = "SMR")]
    Smr,
    /// Rescale the entropy bonus (A2C `entropy_coef`).
    #[serde(rename = "SEC")]
    Sec,
    /// Change the rollout length (A2C `rollout_steps`).
    #[serde(rename = "SNR")]
    Snr,
}

impl OperatorId {
    pub fn name(self) -> &'static str {
        match self {
            OperatorId::Sdf => "SDF",
            OperatorId::Sls => "SLS",
            OperatorId::Nei => "NEI",
            OperatorId::Snu => "SNU",
            OperatorId::Spv => "SPV",
            OperatorId::Smr => "SMR",
            OperatorId::Sec => "SEC",
            OperatorId::Snr => "SNR",
        }
    }

    /// Operators applicable to an algorithm, in canonical order.
    pub fn catalog(algorithm: Algorithm) -> &'static [OperatorId] {
        match algorithm {
            Algorithm::Dqn => &[
                OperatorId::Sdf,
                OperatorId::Sls,
                OperatorId::Nei,
                OperatorId::Snu,
                OperatorId::Spv,
                OperatorId::Smr,
            ],
            Algorithm::A2c => &[
                OperatorId::Sdf,
                OperatorId::Nei,
                OperatorId::Sec,
                OperatorId::Snr,
            ],
        }
    }

    pub fn applies_to(self, algorithm: Algorithm) -> bool {
        OperatorId::catalog(algorithm).contains(&self)
    }
}

impl std::fmt::Display for OperatorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One sampled mutant: the operator, its index within the operator's sample
/// (serialized as `j`), and the mutated value (integer-valued fields store
/// the integer as f64).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutantSpec {
    pub operator: OperatorId,
    #[serde(rename = "j")]
    pub index: usize,
    pub value: f64,
}

fn not_applicable(operator: OperatorId, algorithm: Algorithm) -> Error {
    Error::NotApplicable {
        operator: operator.name().to_string(),
        algorithm: algorithm.to_string(),
    }
}

/// Round a fraction of a step budget to a whole step count, at least 1.
fn fraction_of(total: u64, percent: f64) -> f64 {
    ((percent / 100.0) * total as f64).round().max(1.0)
}

fn approx_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Candidate values for an operator against a base configuration: the fixed
/// grid (relative entries resolved against the base), deduplicated, with the
/// base value removed.
pub fn mutation_space(operator: OperatorId, hp: &Hyperparameters) -> Result<Vec<f64>> {
    let algorithm = hp.algorithm();
    if !operator.applies_to(algorithm) {
        return Err(not_applicable(operator, algorithm));
    }
    let raw: Vec<f64> = match operator {
        OperatorId::Sdf => vec![0.20, 0.35, 0.50, 0.65, 0.80],
        OperatorId::Sls => [5.0, 10.0, 25.0, 50.0, 75.0]
            .iter()
            .map(|&p| fraction_of(hp.total_steps, p))
            .collect(),
        OperatorId::Nei => [5.0, 10.0, 20.0, 35.0, 50.0]
            .iter()
            .map(|&p| fraction_of(hp.total_steps, p))
            .collect(),
        OperatorId::Snu => {
            let mut values = vec![1.0];
            values.extend(
                [5.0, 10.0, 25.0, 50.0]
                    .iter()
                    .map(|&p| fraction_of(hp.total_steps, p)),
            );
            values
        }
        OperatorId::Spv => vec![0.9, 0.99, 0.999, 1e-4, 1e-5],
        OperatorId::Smr => vec![0.3, 0.5, 0.7, 0.9, 0.95],
        OperatorId::Sec => vec![0.0, 0.2, 0.5, 1.0, 2.0],
        OperatorId::Snr => vec![1.0, 2.0, 256.0, 512.0, 1024.0],
    };
    mutation_space_from(&raw, operator, hp)
}

/// Normalize an explicit candidate list (for example a config-file override)
/// into a valid mutation space: deduplicate, drop the base value, drop values
/// the base configuration cannot absorb (for example an NEI budget below
/// `learning_starts`), and reject an empty result.
pub fn mutation_space_from(
    values: &[f64],
    operator: OperatorId,
    hp: &Hyperparameters,
) -> Result<Vec<f64>> {
    let algorithm = hp.algorithm();
    if !operator.applies_to(algorithm) {
        return Err(not_applicable(operator, algorithm));
    }
    let original = original_value(operator, hp);
    let mut space = Vec::with_capacity(values.len());
    for &value in values {
        if !value.is_finite() {
            return Err(Error::config(
                format!("mutation_spaces.{operator}"),
                format!("non-finite candidate {value}"),
            ));
        }
        let duplicate = space.iter().any(|&v| approx_equal(v, value));
        let matches_original = original.is_some_and(|orig| approx_equal(orig, value));
        if !duplicate && !matches_original && apply(operator, value, hp).is_ok() {
            space.push(value);
        }
    }
    if space.is_empty() {
        return Err(Error::config(
            format!("mutation_spaces.{operator}"),
            "no applicable candidate values remain after removing the base value".to_string(),
        ));
    }
    Ok(space)
}

/// The base configuration's value for the hyperparameter an operator
/// targets, or `None` when the base uses the other target-update mode.
fn original_value(operator: OperatorId, hp: &Hyperparameters) -> Option<f64> {
    match operator {
        OperatorId::Sdf => Some(hp.gamma),
        OperatorId::Nei => Some(hp.total_steps as f64),
        OperatorId::Sls => Some(hp.dqn()?.learning_starts as f64),
        OperatorId::Snu => match hp.dqn()?.target_update {
            TargetUpdate::Hard { interval } => Some(interval as f64),
            TargetUpdate::Polyak { .. } => None,
        },
        OperatorId::Spv => match hp.dqn()?.target_update {
            TargetUpdate::Polyak { tau } => Some(tau),
            TargetUpdate::Hard { .. } => None,
        },
        OperatorId::Smr => Some(hp.dqn()?.epsilon_final),
        OperatorId::Sec => Some(hp.a2c()?.entropy_coef),
        OperatorId::Snr => Some(hp.a2c()?.rollout_steps as f64),
    }
}

/// The base value used for representative-mutant distance ranking.
///
/// When SNU or SPV switches the target-update mode there is no base value of
/// the same kind; the references are the degenerate equivalents (a Polyak
/// base behaves like interval 1 for SNU, a hard base like tau 1.0 for SPV).
pub fn reference_value(operator: OperatorId, hp: &Hyperparameters) -> Result<f64> {
    let algorithm = hp.algorithm();
    if !operator.applies_to(algorithm) {
        return Err(not_applicable(operator, algorithm));
    }
    Ok(original_value(operator, hp).unwrap_or_else(|| match operator {
        OperatorId::Snu => 1.0,
        OperatorId::Spv => 1.0,
        _ => unreachable!("only mode-switch operators lack an original value"),
    }))
}

/// Sample `count` distinct values from a mutation space without replacement.
///
/// When the space has at most `count` values the whole space is returned in
/// grid order and the `exhausted` flag is set.
pub struct SampledValues {
    pub values: Vec<f64>,
    pub exhausted: bool,
}

pub fn sample_values(space: &[f64], count: usize, stream: &mut ChaCha8Rng) -> SampledValues {
    if space.len() <= count {
        return SampledValues {
            values: space.to_vec(),
            exhausted: space.len() < count,
        };
    }
    let mut indices: Vec<usize> = (0..space.len()).collect();
    for i in 0..count {
        let j = stream.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    SampledValues {
        values: indices[..count].iter().map(|&i| space[i]).collect(),
        exhausted: false,
    }
}

/// Sample the mutants for one operator as ready-to-apply specs.
pub fn sample_mutants(
    operator: OperatorId,
    hp: &Hyperparameters,
    count: usize,
    stream: &mut ChaCha8Rng,
) -> Result<SampledMutants> {
    let space = mutation_space(operator, hp)?;
    let sampled = sample_values(&space, count, stream);
    Ok(SampledMutants {
        mutants: sampled
            .values
            .iter()
            .enumerate()
            .map(|(index, &value)| MutantSpec {
                operator,
                index,
                value,
            })
            .collect(),
        exhausted: sampled.exhausted,
    })
}

pub struct SampledMutants {
    pub mutants: Vec<MutantSpec>,
    pub exhausted: bool,
}

/// Apply an operator to a base configuration, producing the mutant's
/// hyperparameters. The result is re-validated, so a value that breaks a
/// cross-field invariant (for example `epsilon_final` above
/// `epsilon_initial`) is rejected here.
pub fn apply(operator: OperatorId, value: f64, base: &Hyperparameters) -> Result<Hyperparameters> {
    let algorithm = base.algorithm();
    if !operator.applies_to(algorithm) {
        return Err(not_applicable(operator, algorithm));
    }
    if !value.is_finite() {
        return Err(Error::arg(format!(
            "mutation value for {operator} must be finite, got {value}"
        )));
    }
    let as_count = |field: &str| -> Result<u64> {
        let rounded = value.round();
        if rounded < 1.0 || rounded > u64::MAX as f64 {
            return Err(Error::config(field, format!("{value} out of range")));
        }
        Ok(rounded as u64)
    };
    let mut hp = base.clone();
    match operator {
        OperatorId::Sdf => hp.gamma = value,
        OperatorId::Nei => hp.total_steps = as_count("total_steps")?,
        OperatorId::Sls => hp.dqn_mut().unwrap().learning_starts = as_count("learning_starts")?,
        OperatorId::Snu => {
            hp.dqn_mut().unwrap().target_update = TargetUpdate::Hard {
                interval: as_count("target_update.interval")?,
            }
        }
        OperatorId::Spv => hp.dqn_mut().unwrap().target_update = TargetUpdate::Polyak { tau: value },
        OperatorId::Smr => hp.dqn_mut().unwrap().epsilon_final = value,
        OperatorId::Sec => hp.a2c_mut().unwrap().entropy_coef = value,
        OperatorId::Snr => hp.a2c_mut().unwrap().rollout_steps = as_count("rollout_steps")?,
    }
    hp.validate()?;
    Ok(hp)
}

/// Kill and triviality outcome for one mutant, as input to representative
/// selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateOutcome {
    pub index: usize,
    pub value: f64,
    pub killed: bool,
    pub trivial: bool,
}

/// Result of representative selection for one operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "index")]
pub enum SelectionStatus {
    /// The representative mutant's index within the operator's sample.
    Selected(usize),
    /// No mutant was killed; the operator looks equivalent on this base.
    LikelyEquivalent,
    /// Every killed mutant was trivial.
    AllTrivial,
}

/// Pick the representative mutant: killed, non-trivial, and closest to the
/// reference value by relative distance. Ties go to the lowest index.
pub fn select_representative(reference: f64, candidates: &[CandidateOutcome]) -> SelectionStatus {
    let mut any_killed = false;
    let mut best: Option<(f64, usize)> = None;
    for candidate in candidates {
        if !candidate.killed {
            continue;
        }
        any_killed = true;
        if candidate.trivial {
            continue;
        }
        let distance = (candidate.value - reference).abs() / reference.abs().max(1e-9);
        let better = match best {
            None => true,
            Some((best_distance, best_index)) => {
                distance < best_distance
                    || (distance == best_distance && candidate.index < best_index)
            }
        };
        if better {
            best = Some((distance, candidate.index));
        }
    }
    match (best, any_killed) {
        (Some((_, index)), _) => SelectionStatus::Selected(index),
        (None, true) => SelectionStatus::AllTrivial,
        (None, false) => SelectionStatus::LikelyEquivalent,
    }
}
