//! The final mutation report: per-config and per-operator results, the
//! per-generator mutation scores, and the sensitivity of the generator
//! comparison. Serializes to JSON (stable key order) and to a flat CSV with
//! one row per (operator, config, generator).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::Algorithm;
use crate::envs::EnvKind;
use crate::mutation::{MutantSpec, OperatorId, SelectionStatus};
use crate::stats::{self, KillRecord, StatsConfig};
use crate::{Error, Result};

/// Killing-rate aggregate of one (configuration, generator) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub pairs: usize,
    /// Pairs excluded because the original failed more than the mutant.
    pub weaker: usize,
    pub kills: usize,
    pub killing_rate: f64,
    pub killed: bool,
    /// Every pair was excluded; the rate is the 0 convention.
    pub degenerate: bool,
}

impl RateSummary {
    pub fn from_record(record: &KillRecord) -> Self {
        RateSummary {
            pairs: record.pairs.len(),
            weaker: record.weaker_count,
            kills: record
                .pairs
                .iter()
                .filter(|p| p.verdict == stats::PairVerdict::Killed)
                .count(),
            killing_rate: record.killing_rate,
            killed: record.killed,
            degenerate: record.degenerate,
        }
    }
}

/// One mutant configuration's results across generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub spec: MutantSpec,
    /// Killed by the training-configuration replay.
    pub killable: bool,
    /// Mean mutant-failure ratio on original-success configs; absent when
    /// undefined (the original never succeeded in any pair).
    pub triviality_ratio: Option<f64>,
    pub trivial: bool,
    pub triviality_degenerate: bool,
    pub representative: bool,
    /// Keyed by generator name: `replay` always, `weak` and `strong` for
    /// the representative configuration.
    pub killing_rates: BTreeMap<String, RateSummary>,
}

/// One operator's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorReport {
    pub operator: OperatorId,
    /// The mutation space had fewer values than requested.
    pub space_exhausted: bool,
    pub selection: SelectionStatus,
    pub representative: Option<MutantSpec>,
    /// Fraction of sampled configs the replay killed.
    pub killable_fraction: f64,
    /// Fraction of sampled configs flagged trivial.
    pub trivial_fraction: f64,
    /// Relative strong-over-weak gap in this operator's killing rates
    /// (representative config); absent without a representative.
    pub sensitivity: Option<f64>,
    pub configs: Vec<ConfigReport>,
}

/// The pipeline's final output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationReport {
    pub version: u32,
    pub environment: EnvKind,
    pub algorithm: Algorithm,
    pub instances: usize,
    pub stats: StatsConfig,
    /// No operator produced a representative mutant, so mutation scores are
    /// undefined and `mutation_scores` is empty.
    pub empty_scope: bool,
    /// Per-generator mutation score over the representative configs.
    pub mutation_scores: BTreeMap<String, f64>,
    /// Relative strong-over-weak gap between the mutation scores.
    pub sensitivity: Option<f64>,
    pub operators: Vec<OperatorReport>,
}

impl MutationReport {
    /// Recompute the per-generator mutation scores from the stored killing
    /// rates (mean over operators of the mean over that operator's
    /// representative configs). Returns an empty map when no operator has a
    /// representative. This is the invariant `mutation_scores` must satisfy.
    pub fn recompute_scores(&self) -> Result<BTreeMap<String, f64>> {
        let mut per_generator: BTreeMap<String, BTreeMap<OperatorId, Vec<f64>>> = BTreeMap::new();
        for op in &self.operators {
            for config in &op.configs {
                if !config.representative {
                    continue;
                }
                for (generator, rate) in &config.killing_rates {
                    if generator == "replay" {
                        continue;
                    }
                    per_generator
                        .entry(generator.clone())
                        .or_default()
                        .entry(op.operator)
                        .or_default()
                        .push(rate.killing_rate);
                }
            }
        }
        let mut scores = BTreeMap::new();
        for (generator, rates) in &per_generator {
            scores.insert(generator.clone(), stats::mutation_score(rates)?);
        }
        Ok(scores)
    }

    /// Flat CSV: one row per (operator, config, generator).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "operator,j,value,generator,pairs,weaker,kills,killing_rate,killed,\
             trivial,triviality_ratio,representative\n",
        );
        for op in &self.operators {
            for config in &op.configs {
                for (generator, rate) in &config.killing_rates {
                    let ratio = config
                        .triviality_ratio
                        .map_or(String::new(), |r| r.to_string());
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                        op.operator,
                        config.spec.index,
                        config.spec.value,
                        generator,
                        rate.pairs,
                        rate.weaker,
                        rate.kills,
                        rate.killing_rate,
                        rate.killed,
                        config.trivial,
                        ratio,
                        config.representative,
                    ));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::json("report", e))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("report", e))
    }
}
