//! Reading structure out of a converged population.
//!
//! The interaction graph normalizes each agent's link weights into visit
//! probabilities (the error term is deliberately excluded: it belongs to
//! behavior, not to the learned network). Groups are the weakly connected
//! components after dropping edges below a probability threshold, labeled
//! by what their members' argmax strategies are doing. Bipartiteness and
//! mutual information characterize how a group communicates.

use std::collections::HashMap;

use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::game::{Game, StrategyClass};
use crate::snapshot::PopulationSnapshot;

/// Default probability threshold below which edges are dropped.
pub const DEFAULT_GROUP_THRESHOLD: f64 = 0.1;
/// Default fraction of members whose argmax must fit a label.
pub const DEFAULT_LABEL_PURITY: f64 = 0.9;
/// Slack when comparing `count >= purity * size` so that exact fractions
/// are not lost to rounding.
const PURITY_SLACK: f64 = 1e-9;

/// Row-stochastic visit probabilities `p_ij = w_ij / sum_k w_ik`.
#[derive(Debug, Clone)]
pub struct InteractionGraph {
    n: usize,
    probs: Vec<f64>,
}

impl InteractionGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn probability(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.n + j]
    }
}

/// Normalize a snapshot's link weights into an interaction graph.
pub fn interaction_graph(snapshot: &PopulationSnapshot) -> Result<InteractionGraph> {
    let n = snapshot.n_agents();
    let mut probs = vec![0.0; n * n];
    for (i, agent) in snapshot.agents.iter().enumerate() {
        if agent.link_weights.len() != n {
            return Err(CoreError::InvalidArgument(format!(
                "agent {i} has {} link weights in a population of {n}",
                agent.link_weights.len()
            )));
        }
        let total: f64 = agent.link_weights.iter().sum();
        if total <= 0.0 {
            return Err(CoreError::DegenerateState(format!(
                "agent {i} has no link weight left"
            )));
        }
        for (j, &w) in agent.link_weights.iter().enumerate() {
            probs[i * n + j] = w / total;
        }
    }
    Ok(InteractionGraph { n, probs })
}

/// What a group's members are collectively doing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupLabel {
    /// At least `purity` of members share one self-complementary strategy.
    Homogeneous { strategy: usize },
    /// At least `purity` of members sit on one complementary pair.
    Hybrid { pair: (usize, usize) },
    /// Neither, and the modal strategy has a constant role map.
    Pooling { modal: usize },
    Mixed,
}

impl GroupLabel {
    pub fn kind_str(&self) -> &'static str {
        match self {
            GroupLabel::Homogeneous { .. } => "homogeneous",
            GroupLabel::Hybrid { .. } => "hybrid",
            GroupLabel::Pooling { .. } => "pooling",
            GroupLabel::Mixed => "mixed",
        }
    }

    /// Human-readable form, e.g. `homogeneous(S1R1)` or `hybrid(S1R2+S2R1)`.
    pub fn describe(&self, game: &Game) -> String {
        match self {
            GroupLabel::Homogeneous { strategy } => {
                format!("homogeneous({})", game.space.label(*strategy))
            }
            GroupLabel::Hybrid { pair } => format!(
                "hybrid({}+{})",
                game.space.label(pair.0),
                game.space.label(pair.1)
            ),
            GroupLabel::Pooling { modal } => format!("pooling({})", game.space.label(*modal)),
            GroupLabel::Mixed => "mixed".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Group {
    pub id: usize,
    /// Member agent indices, ascending.
    pub members: Vec<usize>,
    pub label: GroupLabel,
}

/// A partition of all agents into labeled groups.
#[derive(Debug, Clone, Serialize)]
pub struct GroupPartition {
    pub threshold: f64,
    pub purity: f64,
    /// Groups ordered by their smallest member.
    pub groups: Vec<Group>,
    /// Group index per agent.
    pub group_of: Vec<usize>,
}

/// Drop edges below `threshold`, split into weakly connected components,
/// and label each component by its members' argmax strategies.
pub fn recover_groups(
    graph: &InteractionGraph,
    snapshot: &PopulationSnapshot,
    game: &Game,
    threshold: f64,
    purity: f64,
) -> Result<GroupPartition> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "threshold must lie in (0, 1], got {threshold}"
        )));
    }
    if !(purity > 0.5 && purity <= 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "purity must lie in (0.5, 1], got {purity}"
        )));
    }
    let n = graph.n();
    if snapshot.n_agents() != n {
        return Err(CoreError::InvalidArgument(
            "snapshot and graph sizes differ".into(),
        ));
    }
    let mut uf = UnionFind::<usize>::new(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && graph.probability(i, j) >= threshold {
                uf.union(i, j);
            }
        }
    }
    let roots = uf.into_labeling();
    let mut members_by_root: HashMap<usize, Vec<usize>> = HashMap::new();
    for (agent, root) in roots.iter().enumerate() {
        members_by_root.entry(*root).or_default().push(agent);
    }
    let mut member_sets: Vec<Vec<usize>> = members_by_root.into_values().collect();
    member_sets.sort_by_key(|members| members[0]);

    let argmax: Vec<usize> = snapshot.agents.iter().map(|a| a.argmax_strategy()).collect();
    let mut groups = Vec::with_capacity(member_sets.len());
    let mut group_of = vec![0usize; n];
    for (id, members) in member_sets.into_iter().enumerate() {
        for &m in &members {
            group_of[m] = id;
        }
        let label = label_group(&members, &argmax, game, purity)?;
        groups.push(Group { id, members, label });
    }
    Ok(GroupPartition {
        threshold,
        purity,
        groups,
        group_of,
    })
}

fn label_group(
    members: &[usize],
    argmax: &[usize],
    game: &Game,
    purity: f64,
) -> Result<GroupLabel> {
    let size = members.len() as f64;
    let mut counts: Vec<(usize, usize)> = {
        let mut by_strategy: HashMap<usize, usize> = HashMap::new();
        for &m in members {
            *by_strategy.entry(argmax[m]).or_insert(0) += 1;
        }
        by_strategy.into_iter().collect()
    };
    // Modal strategy; ties break toward the lowest id.
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let (modal, modal_count) = counts[0];
    let count_of = |strategy: usize| {
        counts
            .iter()
            .find(|&&(s, _)| s == strategy)
            .map_or(0, |&(_, c)| c)
    };
    let meets = |count: usize| count as f64 + PURITY_SLACK >= purity * size;

    if game.table.is_success(modal, modal) && meets(modal_count) {
        return Ok(GroupLabel::Homogeneous { strategy: modal });
    }
    if let Some(partner) = game.table.perfect_partner(modal) {
        if partner != modal && meets(modal_count + count_of(partner)) {
            return Ok(GroupLabel::Hybrid {
                pair: (modal.min(partner), modal.max(partner)),
            });
        }
    }
    if game.space.strategy_class(modal)? == StrategyClass::Pooling {
        return Ok(GroupLabel::Pooling { modal });
    }
    Ok(GroupLabel::Mixed)
}

/// Bipartiteness of one group's thresholded (undirected) subgraph.
#[derive(Debug, Clone, Serialize)]
pub struct Bipartiteness {
    pub is_bipartite: bool,
    /// When not bipartite: a closed walk of odd length, as member indices
    /// where consecutive nodes (and last back to first) share an edge.
    pub odd_cycle: Option<Vec<usize>>,
}

/// Two-color a group over edges kept by the partition's threshold (an edge
/// exists when either direction's probability clears it).
pub fn bipartiteness(
    graph: &InteractionGraph,
    partition: &GroupPartition,
    group_id: usize,
) -> Result<Bipartiteness> {
    let group = partition
        .groups
        .get(group_id)
        .ok_or_else(|| CoreError::InvalidArgument(format!("no group {group_id}")))?;
    let members = &group.members;
    let t = partition.threshold;
    let g = members.len();
    let mut adj = vec![Vec::new(); g];
    for (a, &i) in members.iter().enumerate() {
        for (b, &j) in members.iter().enumerate() {
            if a < b && (graph.probability(i, j) >= t || graph.probability(j, i) >= t) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }

    let mut color = vec![-1i8; g];
    let mut parent = vec![usize::MAX; g];
    for start in 0..g {
        if color[start] >= 0 {
            continue;
        }
        color[start] = 0;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if color[v] < 0 {
                    color[v] = 1 - color[u];
                    parent[v] = u;
                    queue.push_back(v);
                } else if color[v] == color[u] {
                    // Tree edges always alternate, so u and v sit on two
                    // branches and the conflict edge closes an odd cycle.
                    return Ok(Bipartiteness {
                        is_bipartite: false,
                        odd_cycle: Some(odd_cycle(u, v, &parent, members)),
                    });
                }
            }
        }
    }
    Ok(Bipartiteness {
        is_bipartite: true,
        odd_cycle: None,
    })
}

/// Closed odd walk through the conflict edge (u, v): u's tree path up to
/// the lowest common ancestor, then back down to v.
fn odd_cycle(u: usize, v: usize, parent: &[usize], members: &[usize]) -> Vec<usize> {
    let chain = |mut x: usize| {
        let mut path = vec![x];
        while parent[x] != usize::MAX {
            x = parent[x];
            path.push(x);
        }
        path
    };
    let up = chain(u);
    let vp = chain(v);
    let in_up: HashMap<usize, usize> = up.iter().enumerate().map(|(d, &x)| (x, d)).collect();
    let (mut lca_depth_v, mut lca) = (0, v);
    for (d, &x) in vp.iter().enumerate() {
        if in_up.contains_key(&x) {
            lca_depth_v = d;
            lca = x;
            break;
        }
    }
    let lca_depth_u = in_up[&lca];
    let mut cycle: Vec<usize> = up[..=lca_depth_u].to_vec();
    cycle.extend(vp[..lca_depth_v].iter().rev());
    cycle.into_iter().map(|x| members[x]).collect()
}

/// Mutual information (bits) of one group's communication channel. The
/// primary figures use each member's argmax strategy; the mixture variants
/// weight every strategy by its normalized weight instead.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MutualInformation {
    pub signal_action: f64,
    pub signal_state: f64,
    pub signal_action_mixture: f64,
    pub signal_state_mixture: f64,
}

/// Channel model: a state is drawn from the game's distribution, a sender
/// uniformly from the group, a receiver uniformly and independently from
/// the group; the sender's map produces the signal, the receiver's map the
/// action.
pub fn mutual_information(
    members: &[usize],
    snapshot: &PopulationSnapshot,
    game: &Game,
) -> Result<MutualInformation> {
    if members.is_empty() {
        return Err(CoreError::InvalidArgument("empty group".into()));
    }
    let n = game.spec.n;
    let g = members.len() as f64;

    // p(signal | state) and p(action | signal) under argmax strategies.
    let mut sig_given_state = vec![vec![0.0; n]; n];
    let mut act_given_sig = vec![vec![0.0; n]; n];
    // Same conditionals under weight-mixture strategies.
    let mut sig_given_state_mix = vec![vec![0.0; n]; n];
    let mut act_given_sig_mix = vec![vec![0.0; n]; n];

    for &m in members {
        let agent = &snapshot.agents[m];
        let id = agent.argmax_strategy();
        let sender = game.space.role_map(game.space.sender_rank(id));
        let receiver = game.space.role_map(game.space.receiver_rank(id));
        for s in 0..n {
            sig_given_state[s][sender.apply(s)] += 1.0 / g;
            act_given_sig[s][receiver.apply(s)] += 1.0 / g;
        }

        let total = agent.total_strategy_weight();
        if total <= 0.0 {
            return Err(CoreError::DegenerateState(format!(
                "agent {m} has no strategy weight left"
            )));
        }
        for (strat, &w) in agent.strategy_weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let share = w / total / g;
            let sender = game.space.role_map(game.space.sender_rank(strat));
            let receiver = game.space.role_map(game.space.receiver_rank(strat));
            for s in 0..n {
                sig_given_state_mix[s][sender.apply(s)] += share;
                act_given_sig_mix[s][receiver.apply(s)] += share;
            }
        }
    }

    let probs = &game.spec.state_probs;
    Ok(MutualInformation {
        signal_action: channel_mi(probs, &sig_given_state, &act_given_sig),
        signal_state: signal_state_mi(probs, &sig_given_state),
        signal_action_mixture: channel_mi(probs, &sig_given_state_mix, &act_given_sig_mix),
        signal_state_mixture: signal_state_mi(probs, &sig_given_state_mix),
    })
}

/// I(signal; action). The receiver is drawn independently of state and
/// sender, so p(action | signal, state) = p(action | signal) and the joint
/// factorizes through the signal marginal.
fn channel_mi(state_probs: &[f64], sig_given_state: &[Vec<f64>], act_given_sig: &[Vec<f64>]) -> f64 {
    let n = state_probs.len();
    let mut p_sig = vec![0.0; n];
    for s in 0..n {
        for sig in 0..n {
            p_sig[sig] += state_probs[s] * sig_given_state[s][sig];
        }
    }
    let mut p_act = vec![0.0; n];
    for sig in 0..n {
        for act in 0..n {
            p_act[act] += p_sig[sig] * act_given_sig[sig][act];
        }
    }
    let mut mi = 0.0;
    for sig in 0..n {
        for act in 0..n {
            let joint = p_sig[sig] * act_given_sig[sig][act];
            if joint > 0.0 && p_act[act] > 0.0 {
                mi += joint * (act_given_sig[sig][act] / p_act[act]).log2();
            }
        }
    }
    mi.max(0.0)
}

/// I(signal; state).
fn signal_state_mi(state_probs: &[f64], sig_given_state: &[Vec<f64>]) -> f64 {
    let n = state_probs.len();
    let mut p_sig = vec![0.0; n];
    for s in 0..n {
        for sig in 0..n {
            p_sig[sig] += state_probs[s] * sig_given_state[s][sig];
        }
    }
    let mut mi = 0.0;
    for s in 0..n {
        for sig in 0..n {
            let joint = state_probs[s] * sig_given_state[s][sig];
            if joint > 0.0 && p_sig[sig] > 0.0 {
                mi += joint * (sig_given_state[s][sig] / p_sig[sig]).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Per-agent weight concentration.
#[derive(Debug, Clone, Serialize)]
pub struct AgentStats {
    pub agent: usize,
    pub group: usize,
    pub argmax: usize,
    /// Share of strategy weight on the argmax strategy.
    pub preferred_share: f64,
    /// Share of link weight pointing at agents whose argmax strategy is
    /// complementary to this agent's (full success either way).
    pub complementary_share: f64,
}

/// Per-group aggregate.
#[derive(Debug, Clone, Serialize)]
pub struct GroupStatRow {
    pub group: usize,
    pub label: GroupLabel,
    pub size: usize,
    pub mean_preferred_share: f64,
    pub mean_complementary_share: f64,
    pub bipartite: bool,
    pub mi: MutualInformation,
}

/// Fraction of all agents sitting in groups of each kind.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct TypeShares {
    pub homogeneous: f64,
    pub hybrid: f64,
    pub pooling: f64,
    pub mixed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupStats {
    pub agents: Vec<AgentStats>,
    pub groups: Vec<GroupStatRow>,
    pub type_shares: TypeShares,
}

/// Weight-concentration, bipartiteness, and mutual-information summary for
/// every agent and group in a partition.
pub fn concentration_stats(
    snapshot: &PopulationSnapshot,
    partition: &GroupPartition,
    game: &Game,
) -> Result<GroupStats> {
    let n = snapshot.n_agents();
    let argmax: Vec<usize> = snapshot.agents.iter().map(|a| a.argmax_strategy()).collect();
    let mut agents = Vec::with_capacity(n);
    for (i, agent) in snapshot.agents.iter().enumerate() {
        let total_s = agent.total_strategy_weight();
        let total_l = agent.total_link_weight();
        if total_s <= 0.0 || total_l <= 0.0 {
            return Err(CoreError::DegenerateState(format!(
                "agent {i} has no weight left"
            )));
        }
        let mut comp = 0.0;
        for (j, &w) in agent.link_weights.iter().enumerate() {
            if j != i && game.table.is_success(argmax[i], argmax[j]) {
                comp += w;
            }
        }
        agents.push(AgentStats {
            agent: i,
            group: partition.group_of[i],
            argmax: argmax[i],
            preferred_share: agent.strategy_weights[argmax[i]] / total_s,
            complementary_share: comp / total_l,
        });
    }

    let graph = interaction_graph(snapshot)?;
    let mut groups = Vec::with_capacity(partition.groups.len());
    let mut kind_counts: HashMap<&'static str, usize> = HashMap::new();
    for group in &partition.groups {
        let size = group.members.len();
        let mean = |f: &dyn Fn(&AgentStats) -> f64| {
            group.members.iter().map(|&m| f(&agents[m])).sum::<f64>() / size as f64
        };
        let bip = bipartiteness(&graph, partition, group.id)?;
        let mi = mutual_information(&group.members, snapshot, game)?;
        *kind_counts.entry(group.label.kind_str()).or_insert(0) += size;
        groups.push(GroupStatRow {
            group: group.id,
            label: group.label.clone(),
            size,
            mean_preferred_share: mean(&|a| a.preferred_share),
            mean_complementary_share: mean(&|a| a.complementary_share),
            bipartite: bip.is_bipartite,
            mi,
        });
    }
    let share = |kind: &str| kind_counts.get(kind).copied().unwrap_or(0) as f64 / n as f64;
    Ok(GroupStats {
        agents,
        groups,
        type_shares: TypeShares {
            homogeneous: share("homogeneous"),
            hybrid: share("hybrid"),
            pooling: share("pooling"),
            mixed: share("mixed"),
        },
    })
}
