//! Round-based simulation engine.
//!
//! Each round has three phases. First every agent picks a visit target from
//! its start-of-round link weights. Second, each of the N directed
//! interactions plays one game: both participants draw a strategy fresh for
//! that interaction (still from start-of-round weights) and earn the
//! expected payoff of the pair. Third, all updates apply simultaneously:
//! every weight is discounted, initiators credit their payoff to the link
//! they used (the visited side too when symmetric updates are on), and both
//! participants credit every payoff to the strategy that earned it.
//!
//! Randomness for round r, agent i comes from the ChaCha substream with
//! counter `r * N + i`, so interactions can be evaluated in any order (or
//! in parallel) and the fold in phase three always runs in initiator order.
//! Same master seed, same bytes out, regardless of scheduling.

use std::path::PathBuf;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::game::{Game, GameSpec};
use crate::population::{
    default_initial_link_weight, sample_partner, sample_strategy_from_cumsum, AgentState,
    LearningParams, Population, SeededConfig, INITIAL_STRATEGY_WEIGHT,
};
use crate::rng::{base_rng, substream, DOMAIN_INIT, DOMAIN_ROUND};
use crate::snapshot::{hex, read_snapshot, PopulationSnapshot};

/// Default trajectory sampling stride.
pub const DEFAULT_TRAJECTORY_STRIDE: u64 = 1000;
/// Rounds a continuation runs after a naive agent joins.
pub const DEFAULT_NAIVE_ROUNDS: u64 = 50_000;
/// Link weight existing agents start with toward a newcomer.
pub const NAIVE_LINK_TO_NEWCOMER: f64 = 0.1;

/// How the population comes to exist at round zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    #[default]
    Uniform,
    Seeded { config: SeededConfig },
    Snapshot { path: PathBuf },
}

/// Everything a run needs. Hashable as a whole; the digest tags snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n_agents: usize,
    pub game: GameSpec,
    pub learning: LearningParams,
    pub rounds: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub symmetric_network_updates: bool,
    #[serde(default)]
    pub snapshot_schedule: Vec<u64>,
    #[serde(default = "default_stride")]
    pub trajectory_stride: u64,
    #[serde(default)]
    pub init: InitSpec,
    /// Overrides the default 19/(N-1) starting link weight.
    #[serde(default)]
    pub initial_link_weight: Option<f64>,
}

fn default_stride() -> u64 {
    DEFAULT_TRAJECTORY_STRIDE
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(CoreError::InvalidConfig(format!(
                "need at least 2 agents, got {}",
                self.n_agents
            )));
        }
        self.learning.validate()?;
        if self.trajectory_stride == 0 {
            return Err(CoreError::InvalidConfig(
                "trajectory stride must be positive".into(),
            ));
        }
        if let Some(w) = self.initial_link_weight {
            if !w.is_finite() || w <= 0.0 {
                return Err(CoreError::InvalidConfig(format!(
                    "initial link weight must be positive, got {w}"
                )));
            }
        }
        if let Some(&r) = self.snapshot_schedule.iter().find(|&&r| r > self.rounds) {
            return Err(CoreError::InvalidConfig(format!(
                "snapshot at round {r} beyond the run length {}",
                self.rounds
            )));
        }
        Ok(())
    }
}

/// Hex SHA-256 over the canonical serialization of the parameters.
pub fn params_digest(params: &SimParams) -> String {
    let json = serde_json::to_vec(params).expect("params serialize");
    let mut hasher = Sha256::new();
    hasher.update(&json);
    hex(&hasher.finalize())
}

/// One directed interaction. Stored per initiator, so `initiator` always
/// equals the record's index within the round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interaction {
    pub initiator: usize,
    pub target: usize,
    pub initiator_strategy: usize,
    pub target_strategy: usize,
    pub payoff: f64,
}

/// What happened in one round.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RoundRecord {
    /// Rounds completed once this one finished (1-based).
    pub round: u64,
    /// One entry per agent, indexed by initiator.
    pub interactions: Vec<Interaction>,
    /// Mean payoff per directed interaction.
    pub mean_payoff: f64,
    /// Draw counts per strategy id (two draws per interaction).
    pub strategy_usage: Vec<u64>,
}

impl RoundRecord {
    /// Interactions involving `agent` in initiator order.
    pub fn interactions_involving(&self, agent: usize) -> Vec<&Interaction> {
        self.interactions
            .iter()
            .filter(|itx| itx.initiator == agent || itx.target == agent)
            .collect()
    }
}

/// Trajectory sample: taken every `stride` rounds and at the final round.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryPoint {
    pub round: u64,
    pub mean_payoff: f64,
    /// (strategy id, number of agents whose argmax it is), id ascending,
    /// zero counts omitted.
    pub adopters: Vec<(usize, u32)>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Trajectory {
    pub stride: u64,
    pub points: Vec<TrajectoryPoint>,
}

/// Output of [`run_simulation`].
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub final_snapshot: PopulationSnapshot,
    pub scheduled_snapshots: Vec<PopulationSnapshot>,
    pub trajectory: Trajectory,
}

struct Scratch {
    link_cum: Vec<f64>,
    strat_cum: Vec<f64>,
    strat_totals: Vec<f64>,
    strategy_credits: Vec<Vec<(usize, f64)>>,
    link_credits: Vec<Vec<(usize, f64)>>,
}

impl Scratch {
    fn new(n: usize, k: usize) -> Self {
        Self {
            link_cum: Vec::with_capacity(n),
            strat_cum: vec![0.0; n * k],
            strat_totals: vec![0.0; n],
            strategy_credits: vec![Vec::new(); n],
            link_credits: vec![Vec::new(); n],
        }
    }
}

/// A run in progress. Create it, call [`Simulation::step`] (or
/// [`Simulation::run`]), and take snapshots whenever needed.
pub struct Simulation {
    params: SimParams,
    game: Game,
    population: Population,
    round: u64,
    base: ChaCha8Rng,
    digest: String,
    record: RoundRecord,
    scratch: Scratch,
}

impl Simulation {
    pub fn new(params: SimParams) -> Result<Self> {
        params.validate()?;
        let game = Game::new(params.game.clone())?;
        let base = base_rng(params.master_seed);
        let k = game.num_strategies();
        let link_weight = params
            .initial_link_weight
            .unwrap_or_else(|| default_initial_link_weight(params.n_agents));
        let mut start_round = 0;
        let population = match &params.init {
            InitSpec::Uniform => {
                Population::uniform_with_link_weight(params.n_agents, k, link_weight)?
            }
            InitSpec::Seeded { config } => {
                let mut rng = substream(&base, DOMAIN_INIT, 0);
                Population::seeded(params.n_agents, config, &game, &mut rng)?
            }
            InitSpec::Snapshot { path } => {
                let snap = read_snapshot(path)?;
                if snap.n_agents() != params.n_agents {
                    return Err(CoreError::InvalidArgument(format!(
                        "snapshot has {} agents, params say {}",
                        snap.n_agents(),
                        params.n_agents
                    )));
                }
                if snap.num_strategies() != k {
                    return Err(CoreError::InvalidArgument(format!(
                        "snapshot has {} strategies, the game needs {k}",
                        snap.num_strategies()
                    )));
                }
                // Resume the round counter too: the RNG streams are keyed
                // by round, so with the original master seed the resumed
                // run replays the interrupted one byte for byte.
                start_round = snap.round;
                snap.population()
            }
        };
        let mut sim = Self::with_population(params, game, base, population)?;
        sim.round = start_round;
        Ok(sim)
    }

    /// Start from an explicit population (continuations, injected agents).
    /// `params.init` is ignored.
    pub fn from_population(params: SimParams, population: Population) -> Result<Self> {
        params.validate()?;
        let game = Game::new(params.game.clone())?;
        let base = base_rng(params.master_seed);
        Self::with_population(params, game, base, population)
    }

    fn with_population(
        params: SimParams,
        game: Game,
        base: ChaCha8Rng,
        population: Population,
    ) -> Result<Self> {
        let k = game.num_strategies();
        if population.len() != params.n_agents {
            return Err(CoreError::InvalidArgument(format!(
                "population of {} agents, params say {}",
                population.len(),
                params.n_agents
            )));
        }
        if population.num_strategies() != k {
            return Err(CoreError::InvalidArgument(format!(
                "population carries {} strategies, the game needs {k}",
                population.num_strategies()
            )));
        }
        let digest = params_digest(&params);
        let n = params.n_agents;
        Ok(Self {
            params,
            game,
            population,
            round: 0,
            base,
            digest,
            record: RoundRecord {
                round: 0,
                interactions: Vec::with_capacity(n),
                mean_payoff: 0.0,
                strategy_usage: vec![0; k],
            },
            scratch: Scratch::new(n, k),
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    /// Rounds completed so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn params_digest(&self) -> &str {
        &self.digest
    }

    pub fn snapshot(&self) -> PopulationSnapshot {
        PopulationSnapshot::new(self.round, self.digest.clone(), &self.population)
    }

    /// Advance one round in natural agent order.
    pub fn step(&mut self) -> Result<&RoundRecord> {
        let n = self.params.n_agents;
        self.step_in_order(&mut (0..n))
    }

    /// Advance one round evaluating phases one and two in the given agent
    /// order. Results are identical for every permutation of `0..N`: draws
    /// come from per-agent streams and updates fold in initiator order.
    pub fn step_with_order(&mut self, order: &[usize]) -> Result<&RoundRecord> {
        if order.len() != self.params.n_agents {
            return Err(CoreError::InvalidArgument(format!(
                "order of {} entries for {} agents",
                order.len(),
                self.params.n_agents
            )));
        }
        self.step_in_order(&mut order.iter().copied())
    }

    fn step_in_order(&mut self, order: &mut dyn Iterator<Item = usize>) -> Result<&RoundRecord> {
        let n = self.params.n_agents;
        let k = self.game.num_strategies();
        let eps_net = self.params.learning.network_epsilon();
        let eps_strat = self.params.learning.strategy_epsilon();

        // Start-of-round strategy cumsums, shared by every draw this round.
        for (i, agent) in self.population.agents.iter().enumerate() {
            let slice = &mut self.scratch.strat_cum[i * k..(i + 1) * k];
            let mut total = 0.0;
            for (c, &w) in slice.iter_mut().zip(&agent.strategy_weights) {
                total += w;
                *c = total;
            }
            self.scratch.strat_totals[i] = total;
        }

        // Phases one and two: independent per initiator.
        self.record.interactions.clear();
        self.record.interactions.resize(
            n,
            Interaction {
                initiator: 0,
                target: 0,
                initiator_strategy: 0,
                target_strategy: 0,
                payoff: 0.0,
            },
        );
        for i in order {
            let mut rng = substream(&self.base, DOMAIN_ROUND, self.round * n as u64 + i as u64);
            let target = sample_partner(
                &self.population.agents[i],
                i,
                eps_net,
                &mut self.scratch.link_cum,
                &mut rng,
            )?;
            let own = sample_strategy_from_cumsum(
                &self.scratch.strat_cum[i * k..(i + 1) * k],
                self.scratch.strat_totals[i],
                eps_strat,
                &mut rng,
            )?;
            let theirs = sample_strategy_from_cumsum(
                &self.scratch.strat_cum[target * k..(target + 1) * k],
                self.scratch.strat_totals[target],
                eps_strat,
                &mut rng,
            )?;
            self.record.interactions[i] = Interaction {
                initiator: i,
                target,
                initiator_strategy: own,
                target_strategy: theirs,
                payoff: self.game.table.get(own, theirs),
            };
        }

        // Phase three: simultaneous updates, folded in initiator order.
        for credits in &mut self.scratch.strategy_credits {
            credits.clear();
        }
        for credits in &mut self.scratch.link_credits {
            credits.clear();
        }
        let mut payoff_sum = 0.0;
        self.record.strategy_usage.iter_mut().for_each(|c| *c = 0);
        for itx in &self.record.interactions {
            payoff_sum += itx.payoff;
            self.record.strategy_usage[itx.initiator_strategy] += 1;
            self.record.strategy_usage[itx.target_strategy] += 1;
            self.scratch.strategy_credits[itx.initiator]
                .push((itx.initiator_strategy, itx.payoff));
            self.scratch.strategy_credits[itx.target].push((itx.target_strategy, itx.payoff));
            self.scratch.link_credits[itx.initiator].push((itx.target, itx.payoff));
            if self.params.symmetric_network_updates {
                self.scratch.link_credits[itx.target].push((itx.initiator, itx.payoff));
            }
        }
        for (i, agent) in self.population.agents.iter_mut().enumerate() {
            agent.update_link_weights(i, &self.scratch.link_credits[i], &self.params.learning)?;
            agent.update_strategy_weights(
                &self.scratch.strategy_credits[i],
                &self.params.learning,
            )?;
        }

        self.round += 1;
        self.record.round = self.round;
        self.record.mean_payoff = payoff_sum / n as f64;
        Ok(&self.record)
    }

    fn adopters(&self) -> Vec<(usize, u32)> {
        let k = self.game.num_strategies();
        let mut counts = vec![0u32; k];
        for agent in &self.population.agents {
            counts[agent.argmax_strategy()] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .collect()
    }

    /// Run to completion, collecting scheduled snapshots and the trajectory.
    pub fn run(&mut self) -> Result<SimulationRun> {
        let mut schedule: Vec<u64> = self.params.snapshot_schedule.clone();
        schedule.sort_unstable();
        schedule.dedup();
        let mut scheduled_snapshots = Vec::with_capacity(schedule.len());
        let mut next_snapshot = schedule.iter().copied().peekable();
        let mut trajectory = Trajectory {
            stride: self.params.trajectory_stride,
            points: Vec::new(),
        };
        while next_snapshot.peek() == Some(&self.round) {
            scheduled_snapshots.push(self.snapshot());
            next_snapshot.next();
        }
        let rounds = self.params.rounds;
        let stride = self.params.trajectory_stride;
        while self.round < rounds {
            self.step()?;
            let round = self.round;
            if round.is_multiple_of(stride) || round == rounds {
                trajectory.points.push(TrajectoryPoint {
                    round,
                    mean_payoff: self.record.mean_payoff,
                    adopters: self.adopters(),
                });
            }
            while next_snapshot.peek() == Some(&round) {
                scheduled_snapshots.push(self.snapshot());
                next_snapshot.next();
            }
        }
        Ok(SimulationRun {
            final_snapshot: self.snapshot(),
            scheduled_snapshots,
            trajectory,
        })
    }
}

/// Run a full simulation from parameters.
pub fn run_simulation(params: SimParams) -> Result<SimulationRun> {
    Simulation::new(params)?.run()
}

/// Pure one-round transition: returns the successor population and the
/// round's record without touching the input. `round` addresses the RNG
/// streams, so replaying a round of a longer run reproduces it exactly.
pub fn run_round(
    population: &Population,
    params: &SimParams,
    round: u64,
) -> Result<(Population, RoundRecord)> {
    let mut sim = Simulation::from_population(params.clone(), population.clone())?;
    sim.round = round;
    sim.step()?;
    Ok((sim.population.clone(), sim.record.clone()))
}

/// Append one naive agent to a snapshot: uniform strategy weights, link
/// weight 19/N to every incumbent, while incumbents start a 0.1 link toward
/// the newcomer. Returns parameters for the continuation (same master seed,
/// [`DEFAULT_NAIVE_ROUNDS`] rounds) and the grown population.
pub fn inject_naive_agent(
    snapshot: &PopulationSnapshot,
    params: &SimParams,
) -> Result<(SimParams, Population)> {
    let n = snapshot.n_agents();
    let k = snapshot.num_strategies();
    if n != params.n_agents {
        return Err(CoreError::InvalidArgument(format!(
            "snapshot has {n} agents, params say {}",
            params.n_agents
        )));
    }
    let expected_k = crate::game::StrategySpace::new(params.game.n)?.num_strategies();
    if k != expected_k {
        return Err(CoreError::InvalidArgument(format!(
            "snapshot has {k} strategies, the game needs {expected_k}"
        )));
    }
    let mut agents = snapshot.agents.clone();
    for agent in &mut agents {
        agent.link_weights.push(NAIVE_LINK_TO_NEWCOMER);
    }
    // The newcomer follows the uniform rule for a population of n + 1
    // agents: 19 / ((n + 1) - 1) on every link, zero on itself.
    let mut link_weights = vec![default_initial_link_weight(n + 1); n + 1];
    link_weights[n] = 0.0;
    agents.push(AgentState {
        strategy_weights: vec![INITIAL_STRATEGY_WEIGHT; k],
        link_weights,
    });
    let mut new_params = params.clone();
    new_params.n_agents = n + 1;
    new_params.rounds = DEFAULT_NAIVE_ROUNDS;
    new_params.snapshot_schedule = Vec::new();
    Ok((new_params, Population { agents }))
}
