//! Contagion over a frozen population.
//!
//! A piece of information starts at one random member of a group and
//! spreads through successful interactions. Weights never change here: the
//! population is a fixed substrate, so partner and strategy choices are
//! drawn from the snapshot's weights for the whole run. Members outside
//! the group can still be visited (the error term roams the whole
//! population) but such encounters transmit nothing.

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::game::Game;
use crate::population::sample_strategy_from_cumsum;
use crate::rng::{build_cumsum, draw_from_cumsum, stream_rng, DOMAIN_TRIAL};
use crate::snapshot::PopulationSnapshot;

pub const DEFAULT_TRIALS: usize = 50;
pub const DEFAULT_MAX_STEPS: usize = 1000;

#[derive(Debug, Clone)]
pub struct DiffusionConfig {
    /// Agent indices forming the group under study.
    pub group: Vec<usize>,
    pub trials: usize,
    /// Steps per trial; one step gives every member one initiation.
    pub max_steps: usize,
    /// Exploration rate applied to both partner and strategy choice.
    pub epsilon: f64,
    pub seed: u64,
}

impl DiffusionConfig {
    pub fn new(group: Vec<usize>) -> Self {
        Self {
            group,
            trials: DEFAULT_TRIALS,
            max_steps: DEFAULT_MAX_STEPS,
            epsilon: 0.01,
            seed: 0,
        }
    }
}

/// One trial's trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    pub initial_adopter: usize,
    /// Informed fraction of the group; index 0 is before any step.
    pub fractions: Vec<f64>,
    /// First step after which the whole group was informed.
    pub coverage_step: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DiffusionCurve {
    pub group_size: usize,
    /// Trial-mean informed fraction per step; trials that finish early hold
    /// their last value.
    pub mean_fractions: Vec<f64>,
    /// Fraction of trials that informed the whole group.
    pub coverage_rate: f64,
    /// Mean coverage step over covered trials.
    pub mean_coverage_step: Option<f64>,
    pub trials: Vec<TrialTrace>,
}

/// Frozen sampling state for one group member.
struct Frozen {
    link_cum: Vec<f64>,
    link_total: f64,
    strat_cum: Vec<f64>,
    strat_total: f64,
}

/// Run the contagion and average over trials. Trials are independent and
/// run in parallel; each draws from its own random stream, so results do
/// not depend on thread count.
pub fn run_diffusion(
    snapshot: &PopulationSnapshot,
    game: &Game,
    config: &DiffusionConfig,
) -> Result<DiffusionCurve> {
    let n = snapshot.n_agents();
    let k = game.num_strategies();
    let g = config.group.len();
    if g == 0 {
        return Err(CoreError::InvalidArgument("empty diffusion group".into()));
    }
    if config.trials == 0 {
        return Err(CoreError::InvalidArgument("trials must be positive".into()));
    }
    if !(0.0..=1.0).contains(&config.epsilon) {
        return Err(CoreError::InvalidArgument(format!(
            "epsilon must lie in [0, 1], got {}",
            config.epsilon
        )));
    }
    let mut in_group = vec![false; n];
    for &m in &config.group {
        if m >= n {
            return Err(CoreError::InvalidArgument(format!(
                "group member {m} out of range for {n} agents"
            )));
        }
        if std::mem::replace(&mut in_group[m], true) {
            return Err(CoreError::InvalidArgument(format!(
                "group member {m} listed twice"
            )));
        }
    }

    // Freeze each member's sampling distributions once.
    let mut frozen: Vec<Option<Frozen>> = (0..n).map(|_| None).collect();
    for &m in &config.group {
        let agent = &snapshot.agents[m];
        if agent.strategy_weights.len() != k {
            return Err(CoreError::InvalidArgument(format!(
                "agent {m} has {} strategy weights but the game has {k}",
                agent.strategy_weights.len()
            )));
        }
        let mut link_cum = Vec::new();
        let link_total = build_cumsum(&agent.link_weights, &mut link_cum);
        let mut strat_cum = Vec::new();
        let strat_total = build_cumsum(&agent.strategy_weights, &mut strat_cum);
        if link_total <= 0.0 || strat_total <= 0.0 {
            return Err(CoreError::DegenerateState(format!(
                "agent {m} has no weight left"
            )));
        }
        frozen[m] = Some(Frozen {
            link_cum,
            link_total,
            strat_cum,
            strat_total,
        });
    }

    let traces: Vec<TrialTrace> = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(game, config, &in_group, &frozen, n, trial as u64))
        .collect::<Result<_>>()?;

    let horizon = traces.iter().map(|t| t.fractions.len()).max().unwrap_or(1);
    let mut mean_fractions = vec![0.0; horizon];
    for trace in &traces {
        let last = *trace.fractions.last().expect("trace has an initial point");
        for (i, slot) in mean_fractions.iter_mut().enumerate() {
            *slot += trace.fractions.get(i).copied().unwrap_or(last);
        }
    }
    for slot in mean_fractions.iter_mut() {
        *slot /= config.trials as f64;
    }
    let covered: Vec<usize> = traces.iter().filter_map(|t| t.coverage_step).collect();
    let coverage_rate = covered.len() as f64 / config.trials as f64;
    let mean_coverage_step = if covered.is_empty() {
        None
    } else {
        Some(covered.iter().sum::<usize>() as f64 / covered.len() as f64)
    };
    Ok(DiffusionCurve {
        group_size: g,
        mean_fractions,
        coverage_rate,
        mean_coverage_step,
        trials: traces,
    })
}

fn run_trial(
    game: &Game,
    config: &DiffusionConfig,
    in_group: &[bool],
    frozen: &[Option<Frozen>],
    n: usize,
    trial: u64,
) -> Result<TrialTrace> {
    use rand::seq::SliceRandom;
    use rand::Rng;

    let g = config.group.len();
    let epsilon = config.epsilon;
    let mut rng = stream_rng(config.seed, DOMAIN_TRIAL, trial);
    let initial_adopter = config.group[rng.gen_range(0..g)];

    let mut informed = vec![false; n];
    informed[initial_adopter] = true;
    let mut count = 1usize;
    let mut fractions = vec![1.0 / g as f64];
    let mut coverage_step = if count == g { Some(0) } else { None };

    let mut order = config.group.clone();
    for step in 1..=config.max_steps {
        if coverage_step.is_some() {
            break;
        }
        order.shuffle(&mut rng);
        for &i in &order {
            let me = frozen[i].as_ref().expect("member state frozen");
            // Partner choice over the whole population, exactly as during
            // learning, just with frozen weights.
            let j = if rng.gen::<f64>() < epsilon {
                let r = rng.gen_range(0..n - 1);
                if r >= i {
                    r + 1
                } else {
                    r
                }
            } else {
                draw_from_cumsum(&me.link_cum, me.link_total, &mut rng)
            };
            if !in_group[j] {
                continue;
            }
            let other = frozen[j].as_ref().expect("member state frozen");
            let si = sample_strategy_from_cumsum(&me.strat_cum, me.strat_total, epsilon, &mut rng)?;
            let sj = sample_strategy_from_cumsum(
                &other.strat_cum,
                other.strat_total,
                epsilon,
                &mut rng,
            )?;
            // Information passes only through fully successful exchanges.
            if game.table.is_success(si, sj) && informed[i] != informed[j] {
                informed[i] = true;
                informed[j] = true;
                count += 1;
            }
        }
        fractions.push(count as f64 / g as f64);
        if count == g {
            coverage_step = Some(step);
        }
    }
    Ok(TrialTrace {
        initial_adopter,
        fractions,
        coverage_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameSpec;
    use crate::population::{Population, SeededGroupKind};
    use crate::snapshot::content_digest;

    fn game2() -> Game {
        Game::new(GameSpec::equiprobable(2).unwrap()).unwrap()
    }

    fn homogeneous_snapshot(total: usize, group: usize) -> (Game, PopulationSnapshot) {
        let game = game2();
        let population = Population::idealized(
            total,
            &[(
                SeededGroupKind::Homogeneous {
                    strategy: "S1R1".into(),
                },
                group,
            )],
            &game,
        )
        .unwrap();
        let snapshot = PopulationSnapshot::new(0, String::new(), &population);
        (game, snapshot)
    }

    #[test]
    fn perfect_group_reaches_everyone() {
        let (game, snapshot) = homogeneous_snapshot(6, 6);
        let mut config = DiffusionConfig::new((0..6).collect());
        config.trials = 8;
        config.epsilon = 0.0;
        config.seed = 7;
        let curve = run_diffusion(&snapshot, &game, &config).unwrap();
        assert_eq!(curve.group_size, 6);
        assert!((curve.coverage_rate - 1.0).abs() < 1e-12);
        assert!(curve.mean_coverage_step.is_some());
        for trace in &curve.trials {
            assert_eq!(trace.fractions[0], 1.0 / 6.0);
            assert!(trace
                .fractions
                .windows(2)
                .all(|w| w[1] >= w[0]));
            assert_eq!(*trace.fractions.last().unwrap(), 1.0);
            assert!(trace.coverage_step.is_some());
        }
        assert_eq!(*curve.mean_fractions.last().unwrap(), 1.0);
        assert_eq!(curve.mean_fractions[0], 1.0 / 6.0);
    }

    #[test]
    fn single_member_group_is_covered_immediately() {
        // A lone member holds the information from the start.
        let (game, snapshot) = homogeneous_snapshot(4, 2);
        let mut config = DiffusionConfig::new(vec![0]);
        config.trials = 3;
        config.seed = 1;
        let curve = run_diffusion(&snapshot, &game, &config).unwrap();
        for trace in &curve.trials {
            assert_eq!(trace.fractions, vec![1.0]);
            assert_eq!(trace.coverage_step, Some(0));
            assert_eq!(trace.initial_adopter, 0);
        }
        assert_eq!(curve.mean_fractions, vec![1.0]);
    }

    #[test]
    fn runs_are_deterministic_for_a_seed() {
        let (game, snapshot) = homogeneous_snapshot(8, 5);
        let mut config = DiffusionConfig::new((0..5).collect());
        config.trials = 6;
        config.epsilon = 0.05;
        config.seed = 42;
        let a = run_diffusion(&snapshot, &game, &config).unwrap();
        let b = run_diffusion(&snapshot, &game, &config).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.mean_fractions, b.mean_fractions);

        config.seed = 43;
        let c = run_diffusion(&snapshot, &game, &config).unwrap();
        assert!(a.trials != c.trials || a.mean_fractions != c.mean_fractions);
    }

    #[test]
    fn snapshot_is_not_mutated() {
        let (game, snapshot) = homogeneous_snapshot(6, 4);
        let before = content_digest(&snapshot);
        let mut config = DiffusionConfig::new((0..4).collect());
        config.trials = 4;
        config.epsilon = 0.02;
        run_diffusion(&snapshot, &game, &config).unwrap();
        assert_eq!(content_digest(&snapshot), before);
    }

    #[test]
    fn stalled_trials_keep_their_horizon() {
        // Members of a pooling pair never exchange a full success, so the
        // curve stays flat and no trial covers.
        let game = game2();
        let id = game
            .space
            .id_of_maps(
                &crate::game::RoleMap::new(vec![0, 0]).unwrap(),
                &crate::game::RoleMap::new(vec![0, 0]).unwrap(),
            )
            .unwrap();
        let mut population = Population::uniform(4, 16).unwrap();
        for agent in &mut population.agents {
            agent.strategy_weights = vec![0.0; 16];
            agent.strategy_weights[id] = 1.0;
        }
        let snapshot = PopulationSnapshot::new(0, String::new(), &population);
        let mut config = DiffusionConfig::new(vec![0, 1, 2, 3]);
        config.trials = 3;
        config.max_steps = 20;
        config.epsilon = 0.0;
        config.seed = 5;
        let curve = run_diffusion(&snapshot, &game, &config).unwrap();
        assert!((curve.coverage_rate - 0.0).abs() < 1e-12);
        assert!(curve.mean_coverage_step.is_none());
        for trace in &curve.trials {
            assert_eq!(trace.fractions.len(), 21);
            assert!(trace.fractions.iter().all(|&f| f == 0.25));
            assert!(trace.coverage_step.is_none());
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (game, snapshot) = homogeneous_snapshot(4, 3);
        let empty = DiffusionConfig::new(vec![]);
        assert!(run_diffusion(&snapshot, &game, &empty).is_err());
        let dup = DiffusionConfig::new(vec![0, 0]);
        assert!(run_diffusion(&snapshot, &game, &dup).is_err());
        let oob = DiffusionConfig::new(vec![0, 9]);
        assert!(run_diffusion(&snapshot, &game, &oob).is_err());
        let mut bad_eps = DiffusionConfig::new(vec![0, 1]);
        bad_eps.epsilon = 1.5;
        assert!(run_diffusion(&snapshot, &game, &bad_eps).is_err());
        let mut no_trials = DiffusionConfig::new(vec![0, 1]);
        no_trials.trials = 0;
        assert!(run_diffusion(&snapshot, &game, &no_trials).is_err());
    }
}
