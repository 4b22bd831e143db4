//! Generated-input invariants, each checked against an independent naive
//! recomputation rather than against the implementation's own intermediate
//! state.

use proptest::prelude::*;

use mutrl::agents::{self, AlgoParams, Hyperparameters, TargetUpdate};
use mutrl::envs::EnvKind;
use mutrl::mutation::{self, CandidateOutcome, OperatorId, SelectionStatus};
use mutrl::rng;
use mutrl::stats::{
    self, ContingencyTable, PairOutcome, PairVerdict, StatsConfig, TrivialityInput,
};

fn table_strategy(max_len: u64) -> impl Strategy<Value = ContingencyTable> {
    (1..=max_len).prop_flat_map(|len| {
        (0..=len, 0..=len).prop_map(move |(s_o, s_m)| {
            ContingencyTable::new(s_o, len - s_o, s_m, len - s_m).unwrap()
        })
    })
}

/// A DQN configuration that is internally consistent without being one of
/// the canned defaults.
fn dqn_strategy() -> impl Strategy<Value = Hyperparameters> {
    let update = prop_oneof![
        (1u64..2000).prop_map(|interval| TargetUpdate::Hard { interval }),
        (0.001f64..1.0).prop_map(|tau| TargetUpdate::Polyak { tau }),
    ];
    (200u64..200_000, 0.5f64..1.0, update, 0.2f64..1.0).prop_flat_map(
        |(total_steps, gamma, target_update, epsilon_initial)| {
            (0..total_steps, 0.0..epsilon_initial).prop_map(
                move |(learning_starts, epsilon_final)| {
                    let mut hp = Hyperparameters::default_dqn();
                    hp.total_steps = total_steps;
                    hp.gamma = gamma;
                    if let AlgoParams::Dqn(p) = &mut hp.algo {
                        p.learning_starts = learning_starts;
                        p.target_update = target_update;
                        p.epsilon_initial = epsilon_initial;
                        p.epsilon_final = epsilon_final;
                    }
                    hp
                },
            )
        },
    )
}

proptest! {
    #[test]
    fn fisher_p_values_are_probabilities(table in table_strategy(40)) {
        let p = stats::fisher_exact(&table);
        prop_assert!(p > 0.0 && p <= 1.0, "p = {p} for {table:?}");
    }

    #[test]
    fn identical_outcome_rows_are_never_significant(len in 1u64..40, s in 0u64..40) {
        let s = s.min(len);
        let table = ContingencyTable::new(s, len - s, s, len - s).unwrap();
        let p = stats::fisher_exact(&table);
        prop_assert!(p > 0.999, "equal rows gave p = {p}");
    }

    #[test]
    fn killing_rates_match_a_naive_recount(
        flags in prop::collection::vec((1u64..30, 0u64..30, 0u64..30), 1..20),
    ) {
        let cfg = StatsConfig::default();
        let pairs: Vec<PairOutcome> = flags
            .iter()
            .map(|&(len, s_o, s_m)| {
                let (s_o, s_m) = (s_o.min(len), s_m.min(len));
                let table = ContingencyTable::new(s_o, len - s_o, s_m, len - s_m).unwrap();
                PairOutcome::evaluate(table, &cfg)
            })
            .collect();

        let weaker = pairs.iter().filter(|p| p.verdict == PairVerdict::WeakerOriginal).count();
        let kills = pairs.iter().filter(|p| p.verdict == PairVerdict::Killed).count();
        let record = stats::killing_rate(pairs, &cfg).unwrap();

        prop_assert_eq!(record.weaker_count, weaker);
        prop_assert_eq!(record.degenerate, weaker == record.pairs.len());
        if record.degenerate {
            prop_assert_eq!(record.killing_rate, 0.0);
            prop_assert!(!record.killed);
        } else {
            let expected = kills as f64 / (record.pairs.len() - weaker) as f64;
            prop_assert_eq!(record.killing_rate, expected);
            prop_assert_eq!(record.killed, expected >= cfg.kill_threshold);
        }
    }

    #[test]
    fn triviality_matches_a_naive_mean(
        counts in prop::collection::vec((0u64..20, 0u64..20), 1..15),
    ) {
        let cfg = StatsConfig::default();
        let inputs: Vec<TrivialityInput> = counts
            .iter()
            .map(|&(original_successes, failures)| TrivialityInput {
                original_successes,
                mutant_failures: failures.min(original_successes),
            })
            .collect();

        let used: Vec<f64> = inputs
            .iter()
            .filter(|i| i.original_successes > 0)
            .map(|i| i.mutant_failures as f64 / i.original_successes as f64)
            .collect();
        match stats::triviality(&inputs, &cfg) {
            Ok(outcome) => {
                let mean = used.iter().sum::<f64>() / used.len() as f64;
                prop_assert_eq!(outcome.ratio, mean);
                prop_assert_eq!(outcome.trivial, mean > cfg.trivial_threshold);
            }
            Err(mutrl::Error::DegenerateTriviality) => prop_assert!(used.is_empty()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn default_spaces_never_contain_the_base_or_inapplicable_values(
        hp in dqn_strategy(),
    ) {
        for &op in OperatorId::catalog(agents::Algorithm::Dqn) {
            let space = match mutation::mutation_space(op, &hp) {
                Ok(space) => space,
                // A cramped base config can rule out an entire default grid.
                Err(_) => continue,
            };
            prop_assert!(!space.is_empty());
            for (a, &v) in space.iter().enumerate() {
                prop_assert!(mutation::apply(op, v, &hp).is_ok(), "{op} rejects its own {v}");
                prop_assert!(
                    space[..a].iter().all(|&u| u != v),
                    "{op} space repeats {v}"
                );
            }
            let reference = mutation::reference_value(op, &hp).unwrap();
            if !matches!(op, OperatorId::Snu | OperatorId::Spv) {
                prop_assert!(
                    space.iter().all(|&v| v != reference),
                    "{op} space kept the base value {reference}"
                );
            }
        }
        // Operators from the other algorithm's catalog must be rejected.
        for &op in [OperatorId::Sec, OperatorId::Snr].iter() {
            prop_assert!(mutation::mutation_space(op, &hp).is_err());
        }
    }

    #[test]
    fn override_spaces_filter_like_the_default_grids(
        raw in prop::collection::vec(0u32..40, 1..12),
    ) {
        // Coarse grid values make approximate equality coincide with exact
        // equality, so the naive mirror below stays bitwise faithful.
        let hp = Hyperparameters::default_dqn();
        let candidates: Vec<f64> = raw.iter().map(|&v| v as f64 * 0.025).collect();
        let base = 0.99;

        let mut expected: Vec<f64> = Vec::new();
        for &v in &candidates {
            if !expected.contains(&v)
                && v != base
                && mutation::apply(OperatorId::Sdf, v, &hp).is_ok()
            {
                expected.push(v);
            }
        }
        match mutation::mutation_space_from(&candidates, OperatorId::Sdf, &hp) {
            Ok(space) => prop_assert_eq!(space, expected),
            Err(_) => prop_assert!(expected.is_empty()),
        }
    }

    #[test]
    fn sampling_draws_distinct_values_from_the_space(
        len in 1usize..12,
        count in 0usize..15,
        seed in any::<u64>(),
    ) {
        let space: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let mut stream = rng::stream(seed);
        let sampled = mutation::sample_values(&space, count, &mut stream);

        prop_assert_eq!(sampled.values.len(), count.min(len));
        prop_assert_eq!(sampled.exhausted, len < count);
        for (a, v) in sampled.values.iter().enumerate() {
            prop_assert!(space.contains(v));
            prop_assert!(!sampled.values[..a].contains(v));
        }
        if len <= count {
            // Small spaces are passed through whole, in grid order.
            prop_assert_eq!(&sampled.values, &space);
        }

        let mut replay = rng::stream(seed);
        let again = mutation::sample_values(&space, count, &mut replay);
        prop_assert_eq!(sampled.values, again.values);
    }

    #[test]
    fn representative_selection_matches_a_naive_scan(
        outcomes in prop::collection::vec((0u32..40, any::<bool>(), any::<bool>()), 0..12),
        reference in -4i32..4,
    ) {
        let reference = reference as f64 * 0.5;
        let candidates: Vec<CandidateOutcome> = outcomes
            .iter()
            .enumerate()
            .map(|(index, &(v, killed, trivial))| CandidateOutcome {
                index,
                value: v as f64 * 0.25 - 5.0,
                killed,
                trivial,
            })
            .collect();

        let eligible: Vec<&CandidateOutcome> =
            candidates.iter().filter(|c| c.killed && !c.trivial).collect();
        let expected = if let Some(best) = eligible
            .iter()
            .map(|c| {
                let distance = (c.value - reference).abs() / reference.abs().max(1e-9);
                (distance, c.index)
            })
            .min_by(|a, b| a.partial_cmp(b).unwrap())
        {
            SelectionStatus::Selected(best.1)
        } else if candidates.iter().any(|c| c.killed) {
            SelectionStatus::AllTrivial
        } else {
            SelectionStatus::LikelyEquivalent
        };
        prop_assert_eq!(mutation::select_representative(reference, &candidates), expected);
    }

    #[test]
    fn hyperparameters_survive_json_exactly(
        hp in dqn_strategy(),
        gamma_bits in any::<f64>().prop_filter("finite", |g| g.is_finite()),
    ) {
        let mut hp = hp;
        hp.gamma = gamma_bits;
        let json = serde_json::to_string(&hp).unwrap();
        let parsed: Hyperparameters = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(parsed, hp);
    }

    #[test]
    fn training_config_sequences_extend_without_rewriting_the_past(
        kind in prop_oneof![Just(EnvKind::CartPole), Just(EnvKind::GridBridge)],
        seed in any::<u64>(),
        short in 0usize..100,
        extra in 0usize..100,
    ) {
        let long = agents::training_config_sequence(kind, seed, short + extra);
        let prefix = agents::training_config_sequence(kind, seed, short);
        prop_assert_eq!(&long[..short], &prefix[..]);

        let dim = match kind {
            EnvKind::CartPole => 4,
            EnvKind::GridBridge => 2,
        };
        for config in &long {
            prop_assert_eq!(config.values().len(), dim);
            prop_assert!(config.values().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn mutation_scores_are_two_level_means(
        rates in prop::collection::btree_map(
            "[a-z]{3}",
            prop::collection::vec(0.0f64..=1.0, 1..6),
            1..5,
        ),
    ) {
        let score = stats::mutation_score(&rates).unwrap();
        let naive = rates
            .values()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .sum::<f64>()
            / rates.len() as f64;
        prop_assert!((score - naive).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&score));
    }

    #[test]
    fn improvement_intervals_bracket_their_estimate(
        original in prop::collection::vec(any::<bool>(), 1..30),
        mutant in prop::collection::vec(any::<bool>(), 1..30),
        seed in any::<u64>(),
    ) {
        let cfg = StatsConfig { bootstrap_samples: 200, ..StatsConfig::default() };
        let mut stream = rng::stream(seed);
        let poi = stats::probability_of_improvement(&original, &mutant, &cfg, &mut stream).unwrap();

        prop_assert!((0.0..=1.0).contains(&poi.estimate));
        prop_assert!((0.0..=1.0).contains(&poi.ci_low));
        prop_assert!((0.0..=1.0).contains(&poi.ci_high));
        prop_assert!(poi.ci_low <= poi.estimate && poi.estimate <= poi.ci_high);

        let mut replay = rng::stream(seed);
        let again = stats::probability_of_improvement(&original, &mutant, &cfg, &mut replay).unwrap();
        prop_assert_eq!(poi.estimate, again.estimate);
    }
}

#[test]
fn improvement_estimates_saturate_for_disjoint_outcomes() {
    let cfg = StatsConfig::default();
    let all_good = vec![true; 20];
    let all_bad = vec![false; 20];

    let mut stream = rng::stream(7);
    let dominant =
        stats::probability_of_improvement(&all_good, &all_bad, &cfg, &mut stream).unwrap();
    assert_eq!(dominant.estimate, 1.0);
    assert_eq!((dominant.ci_low, dominant.ci_high), (1.0, 1.0));

    let mut stream = rng::stream(7);
    let hopeless =
        stats::probability_of_improvement(&all_bad, &all_good, &cfg, &mut stream).unwrap();
    assert_eq!(hopeless.estimate, 0.0);
    assert_eq!((hopeless.ci_low, hopeless.ci_high), (0.0, 0.0));
}
