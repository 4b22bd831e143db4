//! Deterministic seed derivation for every randomized pipeline stage.
//!
//! All seeds hash down from one root seed through labelled domains. The
//! training seed depends only on the instance index, never on the operator
//! or configuration index, so mutant instance i trains with exactly the
//! same seed as original instance i and the two consume prefixes of the
//! same episode-configuration sequence.

use crate::mutation::OperatorId;
use crate::rng;

/// The randomized pipeline stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPhase {
    /// Training an instance. Ignores operator and configuration index.
    Train,
    /// Sampling an operator's mutant values. Ignores j and instance.
    MutationSample,
    /// Subsampling a pair's TRS for replay.
    ReplaySubsample,
    /// Building the weak suite. Run-global.
    WeakGen,
    /// Building an operator's strong suite (per representative config).
    StrongGen,
    /// Training an operator's failure predictor (per representative config).
    Predictor,
    /// Bootstrap resampling streams.
    Bootstrap,
}

/// Derive the seed for a stage. Components a stage does not depend on are
/// excluded from the hash, which is what makes the pairing contract hold.
pub fn derive_seed(
    root: u64,
    phase: SeedPhase,
    operator: Option<OperatorId>,
    j: usize,
    instance: usize,
) -> u64 {
    let op = operator.map_or("-", OperatorId::name);
    let label = match phase {
        SeedPhase::Train => format!("train/{instance}"),
        SeedPhase::MutationSample => format!("mutation-sample/{op}"),
        SeedPhase::ReplaySubsample => format!("replay-subsample/{op}/{j}/{instance}"),
        SeedPhase::WeakGen => "weak-gen".to_string(),
        SeedPhase::StrongGen => format!("strong-gen/{op}/{j}"),
        SeedPhase::Predictor => format!("predictor/{op}/{j}"),
        SeedPhase::Bootstrap => format!("bootstrap/{op}/{j}/{instance}"),
    };
    rng::subseed(root, &label)
}

pub fn train_seed(root: u64, instance: usize) -> u64 {
    derive_seed(root, SeedPhase::Train, None, 0, instance)
}

pub fn mutation_sample_seed(root: u64, operator: OperatorId) -> u64 {
    derive_seed(root, SeedPhase::MutationSample, Some(operator), 0, 0)
}

pub fn replay_seed(root: u64, operator: OperatorId, j: usize, instance: usize) -> u64 {
    derive_seed(root, SeedPhase::ReplaySubsample, Some(operator), j, instance)
}

pub fn weak_seed(root: u64) -> u64 {
    derive_seed(root, SeedPhase::WeakGen, None, 0, 0)
}

pub fn strong_seed(root: u64, operator: OperatorId, j: usize) -> u64 {
    derive_seed(root, SeedPhase::StrongGen, Some(operator), j, 0)
}

pub fn predictor_seed(root: u64, operator: OperatorId, j: usize) -> u64 {
    derive_seed(root, SeedPhase::Predictor, Some(operator), j, 0)
}
