//! The default hyperparameters must actually produce competent CartPole
//! agents, and a starved interaction budget must visibly hurt them. Both
//! claims are load-bearing: mutation analysis is meaningless when the
//! original policy is no better than the mutants.

use mutrl::agents::{self, Hyperparameters};
use mutrl::envs::{self, EnvConfig, EnvKind};
use mutrl::mutation::{self, OperatorId};
use mutrl::rng;

fn evaluation_suite(count: usize) -> Vec<EnvConfig> {
    let mut stream = rng::substream(99, "quality-evaluation");
    (0..count)
        .map(|_| envs::sample_config(EnvKind::CartPole, &mut stream))
        .collect()
}

fn successes(agent: &agents::TrainedAgent, suite: &[EnvConfig]) -> usize {
    agents::evaluate(agent, EnvKind::CartPole, suite)
        .unwrap()
        .iter()
        .filter(|o| o.success)
        .count()
}

#[test]
fn default_hyperparameters_solve_cartpole() {
    let hp = Hyperparameters::default_dqn();
    let (agent, log) = agents::train(EnvKind::CartPole, &hp, 1).unwrap();
    assert_eq!(agent.steps_consumed, hp.total_steps);
    assert!(!log.episodes.is_empty());

    let suite = evaluation_suite(50);
    let rate = successes(&agent, &suite) as f64 / suite.len() as f64;
    assert!(rate >= 0.9, "default agent success rate {rate} below 0.9");
}

#[test]
fn starved_interaction_budget_degrades_the_policy() {
    let hp = Hyperparameters::default_dqn();
    let starved = mutation::apply(OperatorId::Nei, 6000.0, &hp).unwrap();
    assert_eq!(starved.total_steps, 6000);
    let suite = evaluation_suite(50);

    for seed in 0..5 {
        let (original, _) = agents::train(EnvKind::CartPole, &hp, seed).unwrap();
        let (mutant, _) = agents::train(EnvKind::CartPole, &starved, seed).unwrap();
        let original_wins = successes(&original, &suite);
        let mutant_wins = successes(&mutant, &suite);
        assert!(
            mutant_wins < original_wins,
            "seed {seed}: starved agent won {mutant_wins}/{} vs original {original_wins}/{}",
            suite.len(),
            suite.len()
        );
    }
}
