//! Statistical kernel: exact significance tests and mutation scoring.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Thresholds and sample counts for every statistical decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsConfig {
    /// Significance level for the per-pair exact test.
    pub alpha: f64,
    /// A mutant configuration is killed when its killing rate reaches this.
    pub kill_threshold: f64,
    /// Mean failure ratio above which a configuration is trivial (strict).
    pub trivial_threshold: f64,
    /// Bootstrap replicates for probability-of-improvement estimates.
    pub bootstrap_samples: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            alpha: 0.05,
            kill_threshold: 0.5,
            trivial_threshold: 0.9,
            bootstrap_samples: 2000,
        }
    }
}

impl StatsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("alpha", self.alpha),
            ("kill_threshold", self.kill_threshold),
            ("trivial_threshold", self.trivial_threshold),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::config(
                    format!("stats.{name}"),
                    format!("{value} outside (0, 1)"),
                ));
            }
        }
        if self.bootstrap_samples == 0 {
            return Err(Error::config("stats.bootstrap_samples", "must be at least 1"));
        }
        Ok(())
    }
}

// ── Contingency tables and Fisher's exact test ──────────────────────────────

/// Success/failure counts of an original/mutant pair on a shared test suite.
/// Both rows must sum to the same suite length `L > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct ContingencyTable {
    s_o: u64,
    f_o: u64,
    s_m: u64,
    f_m: u64,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    s_o: u64,
    f_o: u64,
    s_m: u64,
    f_m: u64,
}

impl From<ContingencyTable> for TableRepr {
    fn from(t: ContingencyTable) -> Self {
        TableRepr {
            s_o: t.s_o,
            f_o: t.f_o,
            s_m: t.s_m,
            f_m: t.f_m,
        }
    }
}

impl TryFrom<TableRepr> for ContingencyTable {
    type Error = Error;
    fn try_from(r: TableRepr) -> Result<Self> {
        ContingencyTable::new(r.s_o, r.f_o, r.s_m, r.f_m)
    }
}

impl ContingencyTable {
    pub fn new(s_o: u64, f_o: u64, s_m: u64, f_m: u64) -> Result<Self> {
        let suite_len = s_o + f_o;
        if suite_len == 0 {
            return Err(Error::EmptyInput("contingency table with L = 0".into()));
        }
        if s_m + f_m != suite_len {
            return Err(Error::arg(format!(
                "row sums differ: original {suite_len}, mutant {}",
                s_m + f_m
            )));
        }
        Ok(ContingencyTable { s_o, f_o, s_m, f_m })
    }

    /// Build from success flags of both agents on the same suite.
    pub fn from_flags(original: &[bool], mutant: &[bool]) -> Result<Self> {
        if original.len() != mutant.len() {
            return Err(Error::arg(format!(
                "suite lengths differ: {} vs {}",
                original.len(),
                mutant.len()
            )));
        }
        let s_o = original.iter().filter(|&&s| s).count() as u64;
        let s_m = mutant.iter().filter(|&&s| s).count() as u64;
        let len = original.len() as u64;
        ContingencyTable::new(s_o, len - s_o, s_m, len - s_m)
    }

    pub fn successes_original(&self) -> u64 {
        self.s_o
    }
    pub fn failures_original(&self) -> u64 {
        self.f_o
    }
    pub fn successes_mutant(&self) -> u64 {
        self.s_m
    }
    pub fn failures_mutant(&self) -> u64 {
        self.f_m
    }
    pub fn suite_len(&self) -> u64 {
        self.s_o + self.f_o
    }
}

/// Cumulative log-factorial table: `table[n] = ln(n!)`.
fn ln_factorials(up_to: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(up_to as usize + 1);
    table.push(0.0);
    let mut acc = 0.0;
    for n in 1..=up_to {
        acc += (n as f64).ln();
        table.push(acc);
    }
    table
}

/// Two-sided Fisher's exact test by the point-probability method.
///
/// With margins fixed, sums the hypergeometric probabilities of every table
/// whose point probability does not exceed the observed one (with 1e-12
/// relative slack for floating-point ties). All factorial arithmetic happens
/// in log space, which keeps the test stable for suite lengths in the
/// thousands.
pub fn fisher_exact(table: &ContingencyTable) -> f64 {
    let r1 = table.s_o + table.f_o;
    let r2 = table.s_m + table.f_m;
    let n = r1 + r2;
    let s = table.s_o + table.s_m;
    let lf = ln_factorials(n);
    let ln_choose = |n: u64, k: u64| lf[n as usize] - lf[k as usize] - lf[(n - k) as usize];

    let ln_denom = ln_choose(n, s);
    let ln_point = |k: u64| ln_choose(r1, k) + ln_choose(r2, s - k) - ln_denom;

    let lo = s.saturating_sub(r2);
    let hi = r1.min(s);
    let observed = ln_point(table.s_o);

    let mut p = 0.0;
    for k in lo..=hi {
        let lp = ln_point(k);
        if lp <= observed + 1e-12 {
            p += lp.exp();
        }
    }
    p.clamp(0.0, 1.0)
}

// ── Per-pair verdicts and killing rates ─────────────────────────────────────

/// Outcome of comparing one original/mutant pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairVerdict {
    /// The distributions differ significantly and the original is not weaker.
    Killed,
    NotKilled,
    /// The original failed more than the mutant; excluded from the rate.
    WeakerOriginal,
}

/// A pair's table together with its test results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub table: ContingencyTable,
    pub p_value: f64,
    pub verdict: PairVerdict,
}

impl PairOutcome {
    pub fn evaluate(table: ContingencyTable, cfg: &StatsConfig) -> Self {
        let p_value = fisher_exact(&table);
        let verdict = if table.f_o > table.f_m {
            PairVerdict::WeakerOriginal
        } else if p_value < cfg.alpha {
            PairVerdict::Killed
        } else {
            PairVerdict::NotKilled
        };
        PairOutcome {
            table,
            p_value,
            verdict,
        }
    }
}

/// Verdict for a single pair: `WeakerOriginal` when the original fails more
/// than the mutant, otherwise `Killed` iff the exact test is significant.
pub fn killed_pair(table: &ContingencyTable, cfg: &StatsConfig) -> PairVerdict {
    PairOutcome::evaluate(*table, cfg).verdict
}

/// Killing statistics of one mutant configuration across all pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KillRecord {
    pub pairs: Vec<PairOutcome>,
    /// Number of pairs excluded as weaker originals.
    pub weaker_count: usize,
    /// Killed pairs over non-excluded pairs; 0 when every pair is excluded.
    pub killing_rate: f64,
    pub killed: bool,
    /// True when every pair was excluded (killing rate undefined, set to 0).
    pub degenerate: bool,
}

/// Aggregate per-pair verdicts into a killing rate and kill decision.
pub fn killing_rate(pairs: Vec<PairOutcome>, cfg: &StatsConfig) -> Result<KillRecord> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("killing_rate over zero pairs".into()));
    }
    let weaker = pairs
        .iter()
        .filter(|p| p.verdict == PairVerdict::WeakerOriginal)
        .count();
    let kills = pairs
        .iter()
        .filter(|p| p.verdict == PairVerdict::Killed)
        .count();
    let degenerate = weaker == pairs.len();
    let rate = if degenerate {
        0.0
    } else {
        kills as f64 / (pairs.len() - weaker) as f64
    };
    Ok(KillRecord {
        weaker_count: weaker,
        killing_rate: rate,
        killed: !degenerate && rate >= cfg.kill_threshold,
        degenerate,
        pairs,
    })
}

// ── Triviality ──────────────────────────────────────────────────────────────

/// Per-pair counts for the triviality ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrivialityInput {
    /// Configurations (in the replayed suite) where the original succeeded.
    pub original_successes: u64,
    /// Of those, how many the mutant failed on.
    pub mutant_failures: u64,
}

/// Mean failure ratio and the (strict) triviality decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrivialityOutcome {
    pub ratio: f64,
    pub trivial: bool,
}

/// Mean, over pairs where the original succeeded at least once, of the
/// mutant's failure ratio on those configurations. Pairs without original
/// successes are skipped; if every pair is skipped the ratio is undefined.
pub fn triviality(inputs: &[TrivialityInput], cfg: &StatsConfig) -> Result<TrivialityOutcome> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput("triviality over zero pairs".into()));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for input in inputs {
        if input.mutant_failures > input.original_successes {
            return Err(Error::arg(format!(
                "mutant failures {} exceed original successes {}",
                input.mutant_failures, input.original_successes
            )));
        }
        if input.original_successes == 0 {
            continue;
        }
        sum += input.mutant_failures as f64 / input.original_successes as f64;
        used += 1;
    }
    if used == 0 {
        return Err(Error::DegenerateTriviality);
    }
    let ratio = sum / used as f64;
    Ok(TrivialityOutcome {
        ratio,
        trivial: ratio > cfg.trivial_threshold,
    })
}

// ── Mutation score and sensitivity ──────────────────────────────────────────

/// Unweighted two-level mean: average killing rates within each operator,
/// then average across operators.
pub fn mutation_score<K: Ord + std::fmt::Debug>(kill_rates: &BTreeMap<K, Vec<f64>>) -> Result<f64> {
    if kill_rates.is_empty() {
        return Err(Error::EmptyInput("mutation score over zero operators".into()));
    }
    let mut total = 0.0;
    for (op, rates) in kill_rates {
        if rates.is_empty() {
            return Err(Error::EmptyInput(format!(
                "operator {op:?} has no killing rates"
            )));
        }
        for &r in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::arg(format!(
                    "killing rate {r} for operator {op:?} outside [0, 1]"
                )));
            }
        }
        total += rates.iter().sum::<f64>() / rates.len() as f64;
    }
    Ok(total / kill_rates.len() as f64)
}

/// Relative drop of the weak generator's mutation score against the strong
/// one: `(ms_strong - ms_weak) / ms_strong`, clamped to 0 when the strong
/// score is zero or smaller than the weak one.
pub fn sensitivity(ms_weak: f64, ms_strong: f64) -> f64 {
    if ms_strong <= 0.0 || ms_strong < ms_weak {
        0.0
    } else {
        (ms_strong - ms_weak) / ms_strong
    }
}

// ── Probability of improvement ──────────────────────────────────────────────

/// Bootstrap estimate that the original outperforms the mutant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoiEstimate {
    /// P(original success-rate draw > mutant draw) + half the tie mass.
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Stratified bootstrap over per-episode success flags: each replicate
/// resamples both flag lists independently and compares their success rates;
/// ties count half. The 95% interval comes from the replicate percentiles
/// (widened, if needed, to bracket the point estimate).
pub fn probability_of_improvement(
    original: &[bool],
    mutant: &[bool],
    cfg: &StatsConfig,
    stream: &mut ChaCha8Rng,
) -> Result<PoiEstimate> {
    if original.is_empty() || mutant.is_empty() {
        return Err(Error::EmptyInput("probability_of_improvement flags".into()));
    }
    let resample_rate = |flags: &[bool], stream: &mut ChaCha8Rng| -> f64 {
        let mut successes = 0usize;
        for _ in 0..flags.len() {
            if flags[stream.gen_range(0..flags.len())] {
                successes += 1;
            }
        }
        successes as f64 / flags.len() as f64
    };
    let mut replicates = Vec::with_capacity(cfg.bootstrap_samples);
    for _ in 0..cfg.bootstrap_samples {
        let x = resample_rate(original, stream);
        let y = resample_rate(mutant, stream);
        replicates.push(if x > y {
            1.0
        } else if x < y {
            0.0
        } else {
            0.5
        });
    }
    let estimate = replicates.iter().sum::<f64>() / replicates.len() as f64;
    let mut sorted = replicates;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let percentile = |q: f64| -> f64 {
        let rank = q * (sorted.len() - 1) as f64;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        let frac = rank - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    Ok(PoiEstimate {
        estimate,
        ci_low: percentile(0.025).min(estimate),
        ci_high: percentile(0.975).max(estimate),
    })
}
