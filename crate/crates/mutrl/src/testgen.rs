//! Test-suite generators.
//!
//! A test is an episode-initial configuration. Three generators produce
//! suites of increasing adversity:
//!
//! * random: configurations drawn from the environment's start distribution;
//! * weak: the configurations the original agents handle with the largest
//!   safety margin, selected from a random pool by mean minimum QOC;
//! * strong: configurations a learned failure predictor scores as most
//!   likely to make the mutant fail, selected per batch from fresh
//!   candidates.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{self, TrainedAgent};
use crate::envs::{self, EnvConfig, EnvKind};
use crate::nn::{backprop_step, batch_loss, Loss, Network, OptimizerState, Target};
use crate::{rng, Error, Result};

/// Which generator produced a suite, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    Random { count: usize },
    Weak { pool: usize, select: usize },
    Strong { count: usize, candidates: usize },
}

/// Summary of the failure predictor behind a strong suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorSummary {
    pub training_accuracy: f64,
    /// The training data contained a single class, so the predictor is a
    /// constant and the suite degrades to random candidates' first picks.
    pub degenerate: bool,
}

/// An ordered set of test configurations plus provenance: the generator
/// spec, the seed it ran with, and (for strong suites) the predictor stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub generator: GeneratorKind,
    pub seed: u64,
    pub configs: Vec<EnvConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor: Option<PredictorSummary>,
}

/// Draw `count` configurations from the start distribution.
pub fn random_suite(kind: EnvKind, count: usize, seed: u64) -> Result<TestSuite> {
    if count == 0 {
        return Err(Error::arg("random suite count must be at least 1".to_string()));
    }
    let mut stream = rng::substream(seed, "random-suite");
    let configs = (0..count)
        .map(|_| envs::sample_config(kind, &mut stream))
        .collect();
    Ok(TestSuite {
        generator: GeneratorKind::Random { count },
        seed,
        configs,
        predictor: None,
    })
}

/// Indices of the `select` largest scores, descending, ties by index.
fn rank_descending(scores: &[f64], select: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..scores.len()).collect();
    indices.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    indices.truncate(select);
    indices
}

/// Build the weak suite: sample a pool, score each configuration by the mean
/// (over the original agents) of the episode's minimum QOC, and keep the
/// `select` highest-scoring ones. High minimum QOC means the agents stay far
/// from failure, so these are the least demanding tests.
pub fn weak_suite(
    kind: EnvKind,
    originals: &[TrainedAgent],
    pool: usize,
    select: usize,
    seed: u64,
) -> Result<TestSuite> {
    if originals.is_empty() {
        return Err(Error::EmptyInput("weak suite needs original agents".into()));
    }
    if select == 0 || pool < select {
        return Err(Error::arg(format!(
            "weak suite needs 1 <= select <= pool, got select {select}, pool {pool}"
        )));
    }
    let mut stream = rng::substream(seed, "weak-pool");
    let configs: Vec<EnvConfig> = (0..pool)
        .map(|_| envs::sample_config(kind, &mut stream))
        .collect();

    let mut scores = vec![0.0; pool];
    for agent in originals {
        for (score, outcome) in scores.iter_mut().zip(agents::evaluate(agent, kind, &configs)?) {
            *score += outcome.min_qoc;
        }
    }
    for score in &mut scores {
        *score /= originals.len() as f64;
    }

    let selected = rank_descending(&scores, select)
        .into_iter()
        .map(|i| configs[i].clone())
        .collect();
    Ok(TestSuite {
        generator: GeneratorKind::Weak { pool, select },
        seed,
        configs: selected,
        predictor: None,
    })
}

/// A learned map from configuration to failure probability.
#[derive(Debug, Clone)]
pub struct FailurePredictor {
    network: Network,
    input_low: Vec<f64>,
    input_high: Vec<f64>,
    /// Constant output when training data had a single class.
    constant: Option<f64>,
    pub training_set_size: usize,
    pub training_accuracy: f64,
}

impl FailurePredictor {
    pub fn degenerate(&self) -> bool {
        self.constant.is_some()
    }

    pub fn summary(&self) -> PredictorSummary {
        PredictorSummary {
            training_accuracy: self.training_accuracy,
            degenerate: self.degenerate(),
        }
    }

    fn scale(&self, config: &EnvConfig) -> Vec<f64> {
        config
            .values()
            .iter()
            .zip(self.input_low.iter().zip(&self.input_high))
            .map(|(&x, (&low, &high))| {
                if high > low {
                    (x - low) / (high - low)
                } else {
                    0.5
                }
            })
            .collect()
    }

    /// Predicted probability that the mutant fails on this configuration.
    pub fn predict(&self, config: &EnvConfig) -> f64 {
        if let Some(constant) = self.constant {
            return constant;
        }
        let logit = self.network.forward(&self.scale(config)).expect("scaled input")[0];
        1.0 / (1.0 + (-logit).exp())
    }
}

const PREDICTOR_HIDDEN: [usize; 2] = [32, 32];
const PREDICTOR_EPOCHS: usize = 200;
const PREDICTOR_LOSS_FLOOR: f64 = 1e-3;
const PREDICTOR_LEARNING_RATE: f64 = 1e-3;

/// Fit a failure predictor to labelled configurations (`true` = the agent
/// failed there). Inputs are min-max scaled and classes are reweighted to
/// balance, so a rare failure mode still shapes the decision boundary.
pub fn train_failure_predictor(
    kind: EnvKind,
    examples: &[(EnvConfig, bool)],
    seed: u64,
) -> Result<FailurePredictor> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("failure predictor training set".into()));
    }
    let dim = kind.observation_dim();
    for (config, _) in examples {
        envs::validate_config(kind, config)?;
    }

    let mut input_low = vec![f64::INFINITY; dim];
    let mut input_high = vec![f64::NEG_INFINITY; dim];
    for (config, _) in examples {
        for (d, &x) in config.values().iter().enumerate() {
            input_low[d] = input_low[d].min(x);
            input_high[d] = input_high[d].max(x);
        }
    }

    let failures = examples.iter().filter(|(_, failed)| *failed).count();
    let total = examples.len();
    let sizes: Vec<usize> = std::iter::once(dim)
        .chain(PREDICTOR_HIDDEN)
        .chain(std::iter::once(1))
        .collect();
    let mut network = Network::init(&sizes, rng::subseed(seed, "predictor-init"))?;

    if failures == 0 || failures == total {
        let constant = if failures == total { 1.0 } else { 0.0 };
        return Ok(FailurePredictor {
            network,
            input_low,
            input_high,
            constant: Some(constant),
            training_set_size: total,
            training_accuracy: 1.0,
        });
    }

    let weight_fail = total as f64 / (2.0 * failures as f64);
    let weight_ok = total as f64 / (2.0 * (total - failures) as f64);
    let scaler = FailurePredictor {
        network: network.clone(),
        input_low: input_low.clone(),
        input_high: input_high.clone(),
        constant: None,
        training_set_size: total,
        training_accuracy: 0.0,
    };
    let inputs: Vec<Vec<f64>> = examples.iter().map(|(c, _)| scaler.scale(c)).collect();
    let targets: Vec<Target> = examples
        .iter()
        .map(|(_, failed)| Target::Label {
            value: if *failed { 1.0 } else { 0.0 },
            weight: if *failed { weight_fail } else { weight_ok },
        })
        .collect();

    let mut optimizer = OptimizerState::adam(PREDICTOR_LEARNING_RATE);
    for _ in 0..PREDICTOR_EPOCHS {
        backprop_step(&mut network, &mut optimizer, &inputs, Loss::Logistic, &targets)?;
        if batch_loss(&network, &inputs, Loss::Logistic, &targets)? < PREDICTOR_LOSS_FLOOR {
            break;
        }
    }

    let correct = inputs
        .iter()
        .zip(examples)
        .filter(|(input, (_, failed))| {
            let logit = network.forward(input).expect("scaled input")[0];
            (logit >= 0.0) == *failed
        })
        .count();
    Ok(FailurePredictor {
        network,
        input_low,
        input_high,
        constant: None,
        training_set_size: total,
        training_accuracy: correct as f64 / total as f64,
    })
}

/// Strong suite selection with an arbitrary scoring function: each of
/// `count` batches draws `candidates` fresh configurations from its own
/// stream and keeps the highest-scoring one (ties to the earliest).
pub fn strong_suite_with<F>(
    kind: EnvKind,
    count: usize,
    candidates: usize,
    seed: u64,
    mut score: F,
) -> Result<Vec<EnvConfig>>
where
    F: FnMut(&EnvConfig) -> f64,
{
    if count == 0 || candidates == 0 {
        return Err(Error::arg(format!(
            "strong suite needs count >= 1 and candidates >= 1, got {count} and {candidates}"
        )));
    }
    let mut configs = Vec::with_capacity(count);
    for batch in 0..count {
        let mut stream = rng::substream(seed, &format!("strong-batch-{batch}"));
        let mut best: Option<(f64, EnvConfig)> = None;
        for _ in 0..candidates {
            let config = envs::sample_config(kind, &mut stream);
            let s = score(&config);
            if best.as_ref().is_none_or(|(best_score, _)| s > *best_score) {
                best = Some((s, config));
            }
        }
        configs.push(best.expect("candidates >= 1").1);
    }
    Ok(configs)
}

/// Build the strong suite for a mutant from its failure predictor.
pub fn strong_suite(
    kind: EnvKind,
    predictor: &FailurePredictor,
    count: usize,
    candidates: usize,
    seed: u64,
) -> Result<TestSuite> {
    let configs = strong_suite_with(kind, count, candidates, seed, |config| {
        predictor.predict(config)
    })?;
    Ok(TestSuite {
        generator: GeneratorKind::Strong { count, candidates },
        seed,
        configs,
        predictor: Some(predictor.summary()),
    })
}

/// Regenerate the candidate stream of one strong-suite batch (mirrors
/// [`strong_suite_with`]; used by verification code and tests).
pub fn strong_batch_candidates(
    kind: EnvKind,
    batch: usize,
    candidates: usize,
    seed: u64,
) -> Vec<EnvConfig> {
    let mut stream: ChaCha8Rng = rng::substream(seed, &format!("strong-batch-{batch}"));
    (0..candidates)
        .map(|_| envs::sample_config(kind, &mut stream))
        .collect()
}
