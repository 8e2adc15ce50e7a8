//! Property tests over randomized populations: partitions stay partitions,
//! finer thresholds only split groups, probability rules keep their floors,
//! and information measures respect their bounds.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use signet_core::analysis::{interaction_graph, mutual_information, recover_groups};
use signet_core::game::{Game, GameSpec, StrategySpace};
use signet_core::population::{sample_partner, AgentState, LearningParams, Population};
use signet_core::snapshot::PopulationSnapshot;

fn game2() -> Game {
    Game::new(GameSpec::equiprobable(2).unwrap()).unwrap()
}

/// A random population of `n` agents with positive weights everywhere
/// except the self link.
fn population_strategy(n: usize) -> impl Strategy<Value = Population> {
    let agent = (
        prop::collection::vec(0.01f64..10.0, 16),
        prop::collection::vec(0.01f64..10.0, n),
    );
    prop::collection::vec(agent, n).prop_map(move |rows| Population {
        agents: rows
            .into_iter()
            .enumerate()
            .map(|(i, (strategy_weights, mut link_weights))| {
                link_weights[i] = 0.0;
                AgentState {
                    strategy_weights,
                    link_weights,
                }
            })
            .collect(),
    })
}

fn snapshot_of(population: &Population) -> PopulationSnapshot {
    PopulationSnapshot::new(0, String::new(), population)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn groups_partition_the_population(
        population in (3usize..8).prop_flat_map(population_strategy),
        threshold in 0.05f64..0.9,
    ) {
        let game = game2();
        let snapshot = snapshot_of(&population);
        let graph = interaction_graph(&snapshot).unwrap();
        let partition = recover_groups(&graph, &snapshot, &game, threshold, 0.9).unwrap();
        let n = population.len();
        let mut seen = vec![false; n];
        for group in &partition.groups {
            prop_assert!(!group.members.is_empty());
            let mut previous = None;
            for &m in &group.members {
                prop_assert!(m < n);
                prop_assert!(!seen[m]);
                seen[m] = true;
                prop_assert_eq!(partition.group_of[m], group.id);
                if let Some(p) = previous {
                    prop_assert!(p < m, "members must ascend");
                }
                previous = Some(m);
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
        // Groups are ordered by smallest member.
        for pair in partition.groups.windows(2) {
            prop_assert!(pair[0].members[0] < pair[1].members[0]);
        }
    }

    #[test]
    fn raising_the_threshold_only_splits_groups(
        population in (3usize..8).prop_flat_map(population_strategy),
        low in 0.05f64..0.4,
        bump in 0.05f64..0.4,
    ) {
        let game = game2();
        let snapshot = snapshot_of(&population);
        let graph = interaction_graph(&snapshot).unwrap();
        let coarse = recover_groups(&graph, &snapshot, &game, low, 0.9).unwrap();
        let fine = recover_groups(&graph, &snapshot, &game, low + bump, 0.9).unwrap();
        for group in &fine.groups {
            let home = coarse.group_of[group.members[0]];
            for &m in &group.members {
                prop_assert_eq!(
                    coarse.group_of[m], home,
                    "fine group {} straddles coarse groups", group.id
                );
            }
        }
    }

    #[test]
    fn interaction_rows_are_probability_distributions(
        population in (3usize..8).prop_flat_map(population_strategy),
    ) {
        let snapshot = snapshot_of(&population);
        let graph = interaction_graph(&snapshot).unwrap();
        let n = population.len();
        for i in 0..n {
            let row: f64 = (0..n).map(|j| graph.probability(i, j)).sum();
            prop_assert!((row - 1.0).abs() < 1e-9);
            prop_assert_eq!(graph.probability(i, i), 0.0);
        }
    }

    #[test]
    fn mutual_information_respects_channel_bounds(
        population in (3usize..8).prop_flat_map(population_strategy),
    ) {
        let game = game2();
        let snapshot = snapshot_of(&population);
        let members: Vec<usize> = (0..population.len()).collect();
        let mi = mutual_information(&members, &snapshot, &game).unwrap();
        for value in [
            mi.signal_action,
            mi.signal_state,
            mi.signal_action_mixture,
            mi.signal_state_mixture,
        ] {
            prop_assert!(value >= 0.0);
            prop_assert!(value <= 1.0 + 1e-9, "above one bit for n = 2: {value}");
        }
    }

    #[test]
    fn partner_rule_keeps_floor_sum_and_zero_self(
        weights in prop::collection::vec(0.0f64..5.0, 4..9),
        epsilon in 0.0f64..=1.0,
        self_index in 0usize..4,
    ) {
        let mut link_weights = weights;
        link_weights[self_index] = 0.0;
        // Guarantee some mass somewhere.
        let other = (self_index + 1) % link_weights.len();
        link_weights[other] += 1.0;
        let n = link_weights.len();
        let agent = AgentState {
            strategy_weights: vec![1.0; 16],
            link_weights,
        };
        let probs = agent.partner_probabilities(self_index, epsilon).unwrap();
        prop_assert_eq!(probs[self_index], 0.0);
        let sum: f64 = probs.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        let floor = epsilon / (n as f64 - 1.0);
        for (j, &p) in probs.iter().enumerate() {
            if j != self_index {
                prop_assert!(p >= floor - 1e-12);
            }
        }
    }

    #[test]
    fn strategy_rule_keeps_floor_and_sum(
        weights in prop::collection::vec(0.0f64..5.0, 16),
        epsilon in 0.0f64..=1.0,
    ) {
        let mut strategy_weights = weights;
        strategy_weights[3] += 0.5;
        let agent = AgentState {
            strategy_weights,
            link_weights: vec![1.0, 0.0],
        };
        let probs = agent.strategy_probabilities(epsilon).unwrap();
        let sum: f64 = probs.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        let floor = epsilon / 16.0;
        for &p in &probs {
            prop_assert!(p >= floor - 1e-12);
        }
    }

    #[test]
    fn sampled_partners_are_never_self(
        weights in prop::collection::vec(0.0f64..5.0, 5),
        epsilon in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let mut link_weights = weights;
        link_weights[2] = 0.0;
        link_weights[0] += 0.25;
        let agent = AgentState {
            strategy_weights: vec![1.0; 16],
            link_weights,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cum = Vec::new();
        for _ in 0..64 {
            let target = sample_partner(&agent, 2, epsilon, &mut cum, &mut rng).unwrap();
            prop_assert!(target != 2);
            prop_assert!(target < 5);
        }
    }

    #[test]
    fn updates_discount_and_credit_exactly(
        link_weights in prop::collection::vec(0.0f64..5.0, 4),
        delta in 0.0f64..0.5,
        payoffs in prop::collection::vec(0.0f64..2.0, 0..5),
        nls in 0.5f64..10.0,
    ) {
        let mut weights = link_weights;
        weights[1] = 0.0;
        let mut agent = AgentState {
            strategy_weights: vec![1.0; 16],
            link_weights: weights.clone(),
        };
        let params = LearningParams {
            delta,
            nls,
            ..LearningParams::default()
        };
        let credits: Vec<(usize, f64)> =
            payoffs.iter().map(|&p| (0usize, p)).collect();
        agent.update_link_weights(1, &credits, &params).unwrap();
        let credited: f64 = payoffs.iter().map(|&p| nls * p).sum();
        let expected: f64 = weights.iter().sum::<f64>() * (1.0 - delta) + credited;
        let total = agent.total_link_weight();
        prop_assert!((total - expected).abs() < 1e-9 * expected.max(1.0));
        prop_assert!(agent.link_weights.iter().all(|&w| w >= 0.0));
        prop_assert_eq!(agent.link_weights[1], 0.0);
    }

    #[test]
    fn strategy_ids_round_trip(n in 2usize..4, raw in any::<usize>()) {
        let space = StrategySpace::new(n).unwrap();
        let id = raw % space.num_strategies();
        let strategy = space.strategy(id).unwrap();
        let back = space.id_of_maps(&strategy.sender, &strategy.receiver).unwrap();
        prop_assert_eq!(back, id);
    }
}
