//! Signaling games on a self-organizing network.
//!
//! Agents repeatedly play a sender-receiver coordination game with
//! partners they choose themselves. Both choices - whom to visit and how
//! to play - are reinforced by realized payoffs, so communication
//! conventions and social structure grow together. This crate holds the
//! deterministic simulation core plus the instruments used to study its
//! output: group recovery from the learned network, channel information
//! measures, and contagion experiments on frozen populations.
//!
//! Modules:
//! - [`game`]: states, role maps, strategy enumeration, payoffs.
//! - [`population`]: agent weight state, choice rules, initial conditions.
//! - [`engine`]: the round loop, trajectories, snapshots, interventions.
//! - [`analysis`]: interaction graph, groups, labels, mutual information.
//! - [`diffusion`]: contagion over a frozen population.
//! - [`rng`]: deterministic stream-splitting random numbers.
//! - [`snapshot`]: population state capture and (de)serialization.

pub mod analysis;
pub mod diffusion;
pub mod engine;
pub mod error;
pub mod game;
pub mod population;
pub mod rng;
pub mod snapshot;

pub use analysis::{
    bipartiteness, concentration_stats, interaction_graph, mutual_information, recover_groups,
    AgentStats, Bipartiteness, Group, GroupLabel, GroupPartition, GroupStatRow, GroupStats,
    InteractionGraph, MutualInformation, TypeShares, DEFAULT_GROUP_THRESHOLD,
    DEFAULT_LABEL_PURITY,
};
pub use diffusion::{run_diffusion, DiffusionConfig, DiffusionCurve, TrialTrace};
pub use engine::{
    inject_naive_agent, params_digest, run_round, run_simulation, InitSpec, Interaction,
    RoundRecord, SimParams, Simulation, SimulationRun, Trajectory, TrajectoryPoint,
};
pub use error::{CoreError, Result};
pub use game::{
    count_signaling_systems, enumerate_strategies, expected_payoff, Game, GameSpec, PairClass,
    PayoffTable, PureStrategy, RoleMap, StrategyClass, StrategySpace,
};
pub use population::{
    default_initial_link_weight, AgentState, LearningParams, Population, SeededConfig,
    SeededGroup, SeededGroupKind,
};
pub use snapshot::{read_snapshot, write_snapshot, PopulationSnapshot};
