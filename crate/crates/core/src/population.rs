//! Agents and their Roth-Erev reinforcement state.
//!
//! Each agent carries two weight vectors: one over the K combined
//! strategies and one over the other N-1 agents (the self entry is pinned
//! to zero). Selection mixes the weight-proportional choice with a uniform
//! error term, and updates discount every weight before crediting payoffs
//! scaled by the per-channel learning speed:
//!
//! * partner choice:  Pr(j) = (1 - eps) * w_ij / sum_k w_ik + eps / (N - 1)
//! * strategy choice: Pr(s) = (1 - eps) * s / sum_k s_k + eps / K
//! * link update:     w' = (1 - delta) * w + NLS * payoff
//! * strategy update: s' = (1 - delta) * s + SLS * payoff
//!
//! The uniform term for partners spreads over the other agents only; the
//! uniform term for strategies spans the full strategy set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::game::Game;
use crate::rng::{build_cumsum, draw_from_cumsum};

/// Initial weight on every strategy.
pub const INITIAL_STRATEGY_WEIGHT: f64 = 5.0;
/// Numerator of the default initial link weight, spread over N - 1 links.
pub const INITIAL_LINK_MASS: f64 = 19.0;
/// Designated-strategy weight for members of a seeded group.
pub const SEEDED_STRATEGY_WEIGHT: f64 = 10.0;
/// Weight on every non-designated strategy for seeded members.
pub const SEEDED_STRATEGY_FLOOR: f64 = 0.1;
/// Link weight from a seeded member to its chosen complementary partner.
pub const SEEDED_PARTNER_LINK: f64 = 90.0;
/// Link weight from a seeded member to everyone else.
pub const SEEDED_LINK_FLOOR: f64 = 0.1;

/// Default link weight so each agent's initial link mass totals 19.
pub fn default_initial_link_weight(n_agents: usize) -> f64 {
    INITIAL_LINK_MASS / (n_agents as f64 - 1.0)
}

/// Learning parameters. `delta` and `epsilon` apply to both channels unless
/// a per-channel override is set; `nls`/`sls` scale credited payoffs on the
/// network and strategy channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    pub delta: f64,
    pub epsilon: f64,
    pub nls: f64,
    pub sls: f64,
    #[serde(default)]
    pub delta_strategy: Option<f64>,
    #[serde(default)]
    pub delta_network: Option<f64>,
    #[serde(default)]
    pub epsilon_strategy: Option<f64>,
    #[serde(default)]
    pub epsilon_network: Option<f64>,
}

impl Default for LearningParams {
    fn default() -> Self {
        Self {
            delta: 0.01,
            epsilon: 0.01,
            nls: 1.0,
            sls: 1.0,
            delta_strategy: None,
            delta_network: None,
            epsilon_strategy: None,
            epsilon_network: None,
        }
    }
}

impl LearningParams {
    pub fn validate(&self) -> Result<()> {
        let check_delta = |name: &str, v: f64| {
            if !(0.0..1.0).contains(&v) {
                Err(CoreError::InvalidConfig(format!(
                    "{name} must lie in [0, 1), got {v}"
                )))
            } else {
                Ok(())
            }
        };
        let check_eps = |name: &str, v: f64| {
            if !(0.0..=1.0).contains(&v) {
                Err(CoreError::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {v}"
                )))
            } else {
                Ok(())
            }
        };
        check_delta("delta", self.delta)?;
        check_eps("epsilon", self.epsilon)?;
        if let Some(v) = self.delta_strategy {
            check_delta("delta_strategy", v)?;
        }
        if let Some(v) = self.delta_network {
            check_delta("delta_network", v)?;
        }
        if let Some(v) = self.epsilon_strategy {
            check_eps("epsilon_strategy", v)?;
        }
        if let Some(v) = self.epsilon_network {
            check_eps("epsilon_network", v)?;
        }
        for (name, v) in [("NLS", self.nls), ("SLS", self.sls)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(CoreError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn strategy_delta(&self) -> f64 {
        self.delta_strategy.unwrap_or(self.delta)
    }

    pub fn network_delta(&self) -> f64 {
        self.delta_network.unwrap_or(self.delta)
    }

    pub fn strategy_epsilon(&self) -> f64 {
        self.epsilon_strategy.unwrap_or(self.epsilon)
    }

    pub fn network_epsilon(&self) -> f64 {
        self.epsilon_network.unwrap_or(self.epsilon)
    }
}

/// One agent's reinforcement state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub strategy_weights: Vec<f64>,
    pub link_weights: Vec<f64>,
}

impl AgentState {
    /// Partner-choice distribution over all agent indices; the self entry is
    /// exactly zero.
    pub fn partner_probabilities(&self, self_index: usize, epsilon: f64) -> Result<Vec<f64>> {
        let n = self.link_weights.len();
        if self_index >= n {
            return Err(CoreError::InvalidArgument(format!(
                "self index {self_index} out of range 0..{n}"
            )));
        }
        let total: f64 = self.link_weights.iter().sum();
        if total <= 0.0 {
            return Err(CoreError::DegenerateState(format!(
                "agent {self_index} has no link weight left"
            )));
        }
        let uniform = epsilon / (n as f64 - 1.0);
        let mut probs = Vec::with_capacity(n);
        for (j, &w) in self.link_weights.iter().enumerate() {
            if j == self_index {
                probs.push(0.0);
            } else {
                probs.push((1.0 - epsilon) * w / total + uniform);
            }
        }
        Ok(probs)
    }

    /// Strategy-choice distribution over all K strategies.
    pub fn strategy_probabilities(&self, epsilon: f64) -> Result<Vec<f64>> {
        let k = self.strategy_weights.len();
        let total: f64 = self.strategy_weights.iter().sum();
        if total <= 0.0 {
            return Err(CoreError::DegenerateState(
                "agent has no strategy weight left".into(),
            ));
        }
        let uniform = epsilon / k as f64;
        Ok(self
            .strategy_weights
            .iter()
            .map(|&w| (1.0 - epsilon) * w / total + uniform)
            .collect())
    }

    /// Discounts every link weight, then credits `NLS * payoff` to each
    /// target in `credits`. The self link must never be credited.
    pub fn update_link_weights(
        &mut self,
        self_index: usize,
        credits: &[(usize, f64)],
        params: &LearningParams,
    ) -> Result<()> {
        let keep = 1.0 - params.network_delta();
        for w in &mut self.link_weights {
            *w *= keep;
        }
        for &(target, payoff) in credits {
            if target == self_index {
                return Err(CoreError::ContractViolation(format!(
                    "agent {self_index} credited a payoff to its own link"
                )));
            }
            if target >= self.link_weights.len() {
                return Err(CoreError::InvalidArgument(format!(
                    "link target {target} out of range"
                )));
            }
            if payoff < 0.0 {
                return Err(CoreError::InvalidArgument(format!(
                    "negative payoff {payoff}"
                )));
            }
            self.link_weights[target] += params.nls * payoff;
        }
        Ok(())
    }

    /// Discounts every strategy weight, then credits `SLS * payoff` to each
    /// strategy in `credits` (one entry per interaction that used it).
    pub fn update_strategy_weights(
        &mut self,
        credits: &[(usize, f64)],
        params: &LearningParams,
    ) -> Result<()> {
        let keep = 1.0 - params.strategy_delta();
        for w in &mut self.strategy_weights {
            *w *= keep;
        }
        for &(strategy, payoff) in credits {
            if strategy >= self.strategy_weights.len() {
                return Err(CoreError::InvalidArgument(format!(
                    "strategy index {strategy} out of range"
                )));
            }
            if payoff < 0.0 {
                return Err(CoreError::InvalidArgument(format!(
                    "negative payoff {payoff}"
                )));
            }
            self.strategy_weights[strategy] += params.sls * payoff;
        }
        Ok(())
    }

    /// Highest-weight strategy; ties break toward the lowest id.
    pub fn argmax_strategy(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.strategy_weights.iter().enumerate() {
            if w > self.strategy_weights[best] {
                best = i;
            }
        }
        best
    }

    pub fn total_link_weight(&self) -> f64 {
        self.link_weights.iter().sum()
    }

    pub fn total_strategy_weight(&self) -> f64 {
        self.strategy_weights.iter().sum()
    }
}

/// Sample a partner index per the partner-choice rule. Decomposes the
/// mixture: with probability epsilon a uniform draw over the other agents,
/// otherwise a weight-proportional draw.
pub fn sample_partner<R: Rng>(
    agent: &AgentState,
    self_index: usize,
    epsilon: f64,
    cum: &mut Vec<f64>,
    rng: &mut R,
) -> Result<usize> {
    let n = agent.link_weights.len();
    let total = build_cumsum(&agent.link_weights, cum);
    if total <= 0.0 {
        return Err(CoreError::DegenerateState(format!(
            "agent {self_index} has no link weight left"
        )));
    }
    if rng.gen::<f64>() < epsilon {
        let r = rng.gen_range(0..n - 1);
        Ok(if r >= self_index { r + 1 } else { r })
    } else {
        Ok(draw_from_cumsum(cum, total, rng))
    }
}

/// Sample a strategy id per the strategy-choice rule, given the agent's
/// precomputed cumulative weights.
pub fn sample_strategy_from_cumsum<R: Rng>(
    cum: &[f64],
    total: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if total <= 0.0 {
        return Err(CoreError::DegenerateState(
            "agent has no strategy weight left".into(),
        ));
    }
    if rng.gen::<f64>() < epsilon {
        Ok(rng.gen_range(0..cum.len()))
    } else {
        Ok(draw_from_cumsum(cum, total, rng))
    }
}

/// Which strategies a seeded group is built around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SeededGroupKind {
    /// Everyone on one self-complementary strategy.
    Homogeneous { strategy: String },
    /// Members split evenly across two mutually complementary strategies.
    Hybrid { strategies: [String; 2] },
}

/// One pre-established group: a kind plus how many agents it covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededGroup {
    #[serde(flatten)]
    pub kind: SeededGroupKind,
    pub size: usize,
}

/// Description of pre-established groups occupying the first agents of a
/// population; everyone else starts uniform.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SeededConfig {
    pub groups: Vec<SeededGroup>,
}

/// A population is just the agents in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub agents: Vec<AgentState>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Strategies per agent.
    pub fn num_strategies(&self) -> usize {
        self.agents.first().map_or(0, |a| a.strategy_weights.len())
    }

    /// Uniform start: every strategy weight 5, every link weight
    /// 19/(N-1), self links zero.
    pub fn uniform(n_agents: usize, num_strategies: usize) -> Result<Self> {
        Self::uniform_with_link_weight(
            n_agents,
            num_strategies,
            default_initial_link_weight(n_agents),
        )
    }

    /// Uniform start with an explicit initial link weight.
    pub fn uniform_with_link_weight(
        n_agents: usize,
        num_strategies: usize,
        link_weight: f64,
    ) -> Result<Self> {
        if n_agents < 2 {
            return Err(CoreError::InvalidConfig(format!(
                "need at least 2 agents, got {n_agents}"
            )));
        }
        if num_strategies == 0 {
            return Err(CoreError::InvalidConfig("no strategies".into()));
        }
        if !link_weight.is_finite() || link_weight <= 0.0 {
            return Err(CoreError::InvalidConfig(format!(
                "initial link weight must be positive, got {link_weight}"
            )));
        }
        let agents = (0..n_agents)
            .map(|i| {
                let mut link_weights = vec![link_weight; n_agents];
                link_weights[i] = 0.0;
                AgentState {
                    strategy_weights: vec![INITIAL_STRATEGY_WEIGHT; num_strategies],
                    link_weights,
                }
            })
            .collect();
        Ok(Self { agents })
    }

    /// Population with pre-established groups. Group members get weight 10
    /// on their designated strategy and 0.1 elsewhere, plus one link of 90
    /// to a uniformly chosen complementary partner inside the group and 0.1
    /// to everyone else. Hybrid groups split members half and half (an odd
    /// member is assigned a side by coin flip). Remaining agents start
    /// uniform.
    pub fn seeded<R: Rng>(
        n_agents: usize,
        config: &SeededConfig,
        game: &Game,
        rng: &mut R,
    ) -> Result<Self> {
        let k = game.num_strategies();
        let seeded_total: usize = config.groups.iter().map(|g| g.size).sum();
        if seeded_total > n_agents {
            return Err(CoreError::InvalidConfig(format!(
                "seeded groups cover {seeded_total} agents but the population has {n_agents}"
            )));
        }
        let mut base = Self::uniform(n_agents, k)?;

        // Designated strategy per seeded agent, resolved group by group.
        let mut designated: Vec<Option<usize>> = vec![None; n_agents];
        let mut next = 0usize;
        let mut group_ranges = Vec::new();
        for group in &config.groups {
            if group.size < 2 {
                return Err(CoreError::InvalidConfig(format!(
                    "seeded group of size {} has no complementary partner to link to",
                    group.size
                )));
            }
            let members: Vec<usize> = (next..next + group.size).collect();
            next += group.size;
            match &group.kind {
                SeededGroupKind::Homogeneous { strategy } => {
                    let id = game.space.parse_label(strategy)?;
                    if !game.table.is_success(id, id) {
                        return Err(CoreError::InvalidConfig(format!(
                            "homogeneous seed strategy {strategy} does not succeed against itself"
                        )));
                    }
                    for &m in &members {
                        designated[m] = Some(id);
                    }
                }
                SeededGroupKind::Hybrid { strategies } => {
                    let a = game.space.parse_label(&strategies[0])?;
                    let b = game.space.parse_label(&strategies[1])?;
                    if a == b || !game.table.is_success(a, b) {
                        return Err(CoreError::InvalidConfig(format!(
                            "hybrid seed strategies {} and {} are not complementary",
                            strategies[0], strategies[1]
                        )));
                    }
                    let half = group.size / 2;
                    for (pos, &m) in members.iter().enumerate() {
                        designated[m] = Some(if pos < half {
                            a
                        } else if pos >= group.size - half {
                            b
                        } else {
                            // Odd member in the middle: coin flip.
                            if rng.gen::<bool>() {
                                a
                            } else {
                                b
                            }
                        });
                    }
                }
            }
            group_ranges.push(members);
        }

        for members in &group_ranges {
            for &m in members {
                let own = designated[m].expect("seeded member has a designated strategy");
                let agent = &mut base.agents[m];
                agent.strategy_weights = vec![SEEDED_STRATEGY_FLOOR; k];
                agent.strategy_weights[own] = SEEDED_STRATEGY_WEIGHT;
                for (j, w) in agent.link_weights.iter_mut().enumerate() {
                    *w = if j == m { 0.0 } else { SEEDED_LINK_FLOOR };
                }
                let partners: Vec<usize> = members
                    .iter()
                    .copied()
                    .filter(|&j| {
                        j != m && game.table.is_success(own, designated[j].unwrap())
                    })
                    .collect();
                // Guaranteed nonempty: homogeneous groups have >= 2 members
                // on a self-complementary strategy, hybrid splits put at
                // least one member on each side.
                let choice = partners[rng.gen_range(0..partners.len())];
                base.agents[m].link_weights[choice] = SEEDED_PARTNER_LINK;
            }
        }
        Ok(base)
    }

    /// Stylized converged population for controlled experiments: each group
    /// member holds all strategy weight on its designated strategy and
    /// spreads link weight uniformly over its complementary partners inside
    /// the group. Agents outside any group start uniform. Unlike
    /// [`Population::seeded`] this is deterministic and fully connected
    /// within each group.
    pub fn idealized(
        n_agents: usize,
        groups: &[(SeededGroupKind, usize)],
        game: &Game,
    ) -> Result<Self> {
        let k = game.num_strategies();
        let seeded_total: usize = groups.iter().map(|(_, size)| size).sum();
        if seeded_total > n_agents {
            return Err(CoreError::InvalidConfig(format!(
                "idealized groups cover {seeded_total} agents but the population has {n_agents}"
            )));
        }
        let mut base = Self::uniform(n_agents, k)?;
        let mut next = 0usize;
        for (kind, size) in groups {
            if *size < 2 {
                return Err(CoreError::InvalidConfig(
                    "idealized groups need at least 2 members".into(),
                ));
            }
            let members: Vec<usize> = (next..next + size).collect();
            next += size;
            let designated: Vec<usize> = match kind {
                SeededGroupKind::Homogeneous { strategy } => {
                    let id = game.space.parse_label(strategy)?;
                    if !game.table.is_success(id, id) {
                        return Err(CoreError::InvalidConfig(format!(
                            "idealized strategy {strategy} does not succeed against itself"
                        )));
                    }
                    vec![id; *size]
                }
                SeededGroupKind::Hybrid { strategies } => {
                    let a = game.space.parse_label(&strategies[0])?;
                    let b = game.space.parse_label(&strategies[1])?;
                    if a == b || !game.table.is_success(a, b) {
                        return Err(CoreError::InvalidConfig(format!(
                            "idealized strategies {} and {} are not complementary",
                            strategies[0], strategies[1]
                        )));
                    }
                    let half = size / 2;
                    (0..*size).map(|p| if p < half { a } else { b }).collect()
                }
            };
            for (pos, &m) in members.iter().enumerate() {
                let own = designated[pos];
                let agent = &mut base.agents[m];
                agent.strategy_weights = vec![0.0; k];
                agent.strategy_weights[own] = 1.0;
                for w in agent.link_weights.iter_mut() {
                    *w = 0.0;
                }
                let partners: Vec<usize> = members
                    .iter()
                    .enumerate()
                    .filter(|&(q, &j)| j != m && game.table.is_success(own, designated[q]))
                    .map(|(_, &j)| j)
                    .collect();
                if partners.is_empty() {
                    return Err(CoreError::InvalidConfig(
                        "idealized group member has no complementary partner".into(),
                    ));
                }
                for &j in &partners {
                    base.agents[m].link_weights[j] = 1.0;
                }
            }
        }
        Ok(base)
    }
}
