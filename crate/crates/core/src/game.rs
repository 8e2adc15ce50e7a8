//! The n-state Lewis sender-receiver game.
//!
//! States, signals, and acts share the index set `0..n`. A pure strategy
//! pairs a sender map (state -> signal) with a receiver map (signal -> act);
//! an interaction succeeds in one direction when the receiver's act equals
//! the sender's state, and both role assignments are weighted equally. A
//! pair of strategies therefore earns the full `success_payoff` only when
//! each side decodes the other perfectly in both directions.
//!
//! Role maps are enumerated in a canonical order: all bijections in
//! lexicographic order, then everything else in lexicographic order. For
//! n = 2 this yields the labels S1 = (0,1), S2 = (1,0), S3 = (0,0),
//! S4 = (1,1) for sender maps (R1..R4 analogously), and combined strategies
//! are sender-major: S1R1, S1R2, ..., S4R4. Strategy ids round-trip through
//! this order for every n.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Payoff both participants earn when an interaction fully succeeds.
pub const DEFAULT_SUCCESS_PAYOFF: f64 = 2.0;
/// Enumeration guard: `n^(2n)` combined strategies explode quickly.
pub const DEFAULT_MAX_STATES: usize = 4;
/// Tolerance when comparing expected payoffs against class boundaries.
pub const PAYOFF_TOLERANCE: f64 = 1e-12;
/// Payoff tables are dense `K x K`; refuse anything past this many entries.
const MAX_TABLE_ENTRIES: usize = 1 << 24;

/// Number of states (= signals = acts), their distribution, and the payoff
/// a fully successful interaction pays each participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub n: usize,
    pub state_probs: Vec<f64>,
    pub success_payoff: f64,
}

impl GameSpec {
    pub fn new(n: usize, state_probs: Vec<f64>, success_payoff: f64) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::InvalidGame(format!(
                "need at least 2 states, got {n}"
            )));
        }
        if state_probs.len() != n {
            return Err(CoreError::InvalidGame(format!(
                "{} state probabilities for {} states",
                state_probs.len(),
                n
            )));
        }
        if state_probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(CoreError::InvalidGame(
                "state probabilities must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = state_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(CoreError::InvalidGame(format!(
                "state probabilities sum to {sum}, not 1"
            )));
        }
        if !success_payoff.is_finite() || success_payoff <= 0.0 {
            return Err(CoreError::InvalidGame(format!(
                "success payoff must be positive, got {success_payoff}"
            )));
        }
        Ok(Self {
            n,
            state_probs,
            success_payoff,
        })
    }

    /// Equiprobable states with the default success payoff.
    pub fn equiprobable(n: usize) -> Result<Self> {
        Self::new(n, vec![1.0 / n as f64; n], DEFAULT_SUCCESS_PAYOFF)
    }
}

/// A single role's lookup table: `digits[input] = output`, all in `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoleMap(Vec<u8>);

/// Classification of one role map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoleClass {
    /// A bijection: every output used exactly once.
    Separating,
    /// A constant map: one output for every input.
    Pooling,
    /// Neither; only possible for n >= 3.
    Partial,
}

impl RoleMap {
    pub fn new(digits: Vec<u8>) -> Result<Self> {
        let n = digits.len();
        if n == 0 {
            return Err(CoreError::InvalidArgument("empty role map".into()));
        }
        if digits.iter().any(|&d| d as usize >= n) {
            return Err(CoreError::InvalidArgument(format!(
                "role map digits must lie in 0..{n}: {digits:?}"
            )));
        }
        Ok(Self(digits))
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn apply(&self, input: usize) -> usize {
        self.0[input] as usize
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.0.len()];
        for &d in &self.0 {
            if seen[d as usize] {
                return false;
            }
            seen[d as usize] = true;
        }
        true
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&d| d == self.0[0])
    }

    pub fn role_class(&self) -> RoleClass {
        if self.is_bijection() {
            RoleClass::Separating
        } else if self.is_constant() {
            RoleClass::Pooling
        } else {
            RoleClass::Partial
        }
    }

    /// Inverse map, if this one is a bijection.
    pub fn inverse(&self) -> Option<RoleMap> {
        if !self.is_bijection() {
            return None;
        }
        let mut inv = vec![0u8; self.0.len()];
        for (input, &output) in self.0.iter().enumerate() {
            inv[output as usize] = input as u8;
        }
        Some(RoleMap(inv))
    }

    /// Rank within plain lexicographic (base-n, most significant digit
    /// first) order over all maps.
    fn lex_value(&self) -> usize {
        let n = self.0.len();
        self.0.iter().fold(0usize, |acc, &d| acc * n + d as usize)
    }

    fn from_lex(lex: usize, n: usize) -> RoleMap {
        let mut digits = vec![0u8; n];
        let mut rest = lex;
        for i in (0..n).rev() {
            digits[i] = (rest % n) as u8;
            rest /= n;
        }
        RoleMap(digits)
    }
}

/// A sender map paired with a receiver map. `id` is the strategy's position
/// in the canonical enumeration for its `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PureStrategy {
    pub id: usize,
    pub sender: RoleMap,
    pub receiver: RoleMap,
}

/// Classification of one combined strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyClass {
    /// Both maps are bijections.
    Separating,
    /// At least one map is constant.
    Pooling,
    /// Anything else (requires n >= 3).
    Partial,
}

/// How a pair of strategies relates under the expected payoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairClass {
    /// Same strategy, full success against itself.
    Homogeneous,
    /// Two distinct strategies that fully succeed against each other.
    HybridComplement,
    /// Positive payoff short of full success.
    Partial,
    /// Expected payoff zero.
    Failing,
}

/// The canonical strategy enumeration for one `n`, with lookup tables for
/// encoding and decoding ids.
#[derive(Debug, Clone)]
pub struct StrategySpace {
    n: usize,
    role_maps: Vec<RoleMap>,
    rank_by_lex: Vec<usize>,
}

impl StrategySpace {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_max_states(n, DEFAULT_MAX_STATES)
    }

    /// Like [`StrategySpace::new`] with an explicit enumeration guard.
    pub fn with_max_states(n: usize, max_states: usize) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::InvalidGame(format!(
                "need at least 2 states, got {n}"
            )));
        }
        if n > max_states {
            return Err(CoreError::ResourceLimit(format!(
                "{n} states exceeds the enumeration guard of {max_states} \
                 ({} combined strategies)",
                (n as u128).pow(2 * n as u32)
            )));
        }
        let total = n.pow(n as u32);
        let mut separating = Vec::new();
        let mut rest = Vec::new();
        for lex in 0..total {
            let map = RoleMap::from_lex(lex, n);
            if map.is_bijection() {
                separating.push(map);
            } else {
                rest.push(map);
            }
        }
        separating.extend(rest);
        let role_maps = separating;
        let mut rank_by_lex = vec![0usize; total];
        for (rank, map) in role_maps.iter().enumerate() {
            rank_by_lex[map.lex_value()] = rank;
        }
        Ok(Self {
            n,
            role_maps,
            rank_by_lex,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `n^n` role maps per side.
    pub fn num_role_maps(&self) -> usize {
        self.role_maps.len()
    }

    /// `n^(2n)` combined strategies.
    pub fn num_strategies(&self) -> usize {
        self.role_maps.len() * self.role_maps.len()
    }

    pub fn sender_rank(&self, id: usize) -> usize {
        id / self.role_maps.len()
    }

    pub fn receiver_rank(&self, id: usize) -> usize {
        id % self.role_maps.len()
    }

    pub fn role_map(&self, rank: usize) -> &RoleMap {
        &self.role_maps[rank]
    }

    /// Decode an id into its strategy.
    pub fn strategy(&self, id: usize) -> Result<PureStrategy> {
        if id >= self.num_strategies() {
            return Err(CoreError::InvalidArgument(format!(
                "strategy id {id} out of range 0..{}",
                self.num_strategies()
            )));
        }
        Ok(PureStrategy {
            id,
            sender: self.role_maps[self.sender_rank(id)].clone(),
            receiver: self.role_maps[self.receiver_rank(id)].clone(),
        })
    }

    /// Encode a (sender, receiver) pair back into its id.
    pub fn id_of_maps(&self, sender: &RoleMap, receiver: &RoleMap) -> Result<usize> {
        if sender.n() != self.n || receiver.n() != self.n {
            return Err(CoreError::InvalidArgument(format!(
                "role maps for n={} in a space with n={}",
                sender.n(),
                self.n
            )));
        }
        let s = self.rank_by_lex[sender.lex_value()];
        let r = self.rank_by_lex[receiver.lex_value()];
        Ok(s * self.role_maps.len() + r)
    }

    /// All strategies in canonical id order.
    pub fn enumerate(&self) -> Vec<PureStrategy> {
        (0..self.num_strategies())
            .map(|id| self.strategy(id).expect("id in range"))
            .collect()
    }

    pub fn strategy_class(&self, id: usize) -> Result<StrategyClass> {
        if id >= self.num_strategies() {
            return Err(CoreError::InvalidArgument(format!(
                "strategy id {id} out of range"
            )));
        }
        let s = self.role_maps[self.sender_rank(id)].role_class();
        let r = self.role_maps[self.receiver_rank(id)].role_class();
        Ok(match (s, r) {
            (RoleClass::Separating, RoleClass::Separating) => StrategyClass::Separating,
            (RoleClass::Pooling, _) | (_, RoleClass::Pooling) => StrategyClass::Pooling,
            _ => StrategyClass::Partial,
        })
    }

    /// Human-readable label. For n = 2 this is the compact `S{i}R{j}` form;
    /// larger games spell the maps out, e.g. `s:[0,1,2]|r:[2,1,0]`.
    pub fn label(&self, id: usize) -> String {
        let s = self.sender_rank(id);
        let r = self.receiver_rank(id);
        if self.n == 2 {
            format!("S{}R{}", s + 1, r + 1)
        } else {
            let fmt = |m: &RoleMap| {
                m.digits()
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            format!(
                "s:[{}]|r:[{}]",
                fmt(&self.role_maps[s]),
                fmt(&self.role_maps[r])
            )
        }
    }

    /// Parse either label form accepted by [`StrategySpace::label`].
    pub fn parse_label(&self, label: &str) -> Result<usize> {
        let bad = |msg: &str| CoreError::InvalidArgument(format!("label '{label}': {msg}"));
        if let Some(rest) = label.strip_prefix('S') {
            if self.n != 2 {
                return Err(bad("S{i}R{j} labels are only defined for n = 2"));
            }
            let (s, r) = rest
                .split_once('R')
                .ok_or_else(|| bad("expected S{i}R{j}"))?;
            let s: usize = s.parse().map_err(|_| bad("bad sender index"))?;
            let r: usize = r.parse().map_err(|_| bad("bad receiver index"))?;
            let m = self.num_role_maps();
            if s < 1 || s > m || r < 1 || r > m {
                return Err(bad(&format!("indices must lie in 1..={m}")));
            }
            return Ok((s - 1) * m + (r - 1));
        }
        let rest = label
            .strip_prefix("s:[")
            .ok_or_else(|| bad("expected S{i}R{j} or s:[..]|r:[..]"))?;
        let (s_part, r_part) = rest
            .split_once("]|r:[")
            .ok_or_else(|| bad("expected s:[..]|r:[..]"))?;
        let r_part = r_part
            .strip_suffix(']')
            .ok_or_else(|| bad("missing closing bracket"))?;
        let parse_map = |text: &str| -> Result<RoleMap> {
            let digits = text
                .split(',')
                .map(|d| d.trim().parse::<u8>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("bad map digit"))?;
            if digits.len() != self.n {
                return Err(bad(&format!("maps must have {} digits", self.n)));
            }
            RoleMap::new(digits)
        };
        self.id_of_maps(&parse_map(s_part)?, &parse_map(r_part)?)
    }
}

/// All strategies for an n-state game in canonical id order.
pub fn enumerate_strategies(n: usize) -> Result<Vec<PureStrategy>> {
    Ok(StrategySpace::new(n)?.enumerate())
}

/// Expected payoff either participant earns when strategies `a` and `b`
/// meet: role assignments are equally likely, so each of the two directed
/// sender->receiver channels contributes half the success payoff weighted
/// by the probability mass of the states it transmits correctly.
pub fn expected_payoff(spec: &GameSpec, a: &PureStrategy, b: &PureStrategy) -> Result<f64> {
    if a.sender.n() != spec.n || b.sender.n() != spec.n {
        return Err(CoreError::InvalidArgument(format!(
            "strategies for n={} in a game with n={}",
            a.sender.n(),
            spec.n
        )));
    }
    let mut total = 0.0;
    for s in 0..spec.n {
        let p = spec.state_probs[s];
        if b.receiver.apply(a.sender.apply(s)) == s {
            total += 0.5 * p * spec.success_payoff;
        }
        if a.receiver.apply(b.sender.apply(s)) == s {
            total += 0.5 * p * spec.success_payoff;
        }
    }
    Ok(total)
}

/// Dense `K x K` expected-payoff table in canonical strategy order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffTable {
    pub n: usize,
    pub num_strategies: usize,
    pub success_payoff: f64,
    values: Vec<f64>,
}

impl PayoffTable {
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.num_strategies + b]
    }

    /// Whether the pair earns the full success payoff (within tolerance).
    #[inline]
    pub fn is_success(&self, a: usize, b: usize) -> bool {
        (self.get(a, b) - self.success_payoff).abs() <= PAYOFF_TOLERANCE
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The unique strategy that fully succeeds against `id`, if any.
    /// (Full success forces all four role maps to be bijections, which pins
    /// the partner down; scanning keeps this tied to the table itself.)
    pub fn perfect_partner(&self, id: usize) -> Option<usize> {
        (0..self.num_strategies).find(|&other| self.is_success(id, other))
    }
}

/// Build the symmetric payoff table for a game.
pub fn build_payoff_table(spec: &GameSpec) -> Result<PayoffTable> {
    let space = StrategySpace::new(spec.n)?;
    build_payoff_table_in(spec, &space)
}

fn build_payoff_table_in(spec: &GameSpec, space: &StrategySpace) -> Result<PayoffTable> {
    let k = space.num_strategies();
    if k.checked_mul(k).is_none_or(|e| e > MAX_TABLE_ENTRIES) {
        return Err(CoreError::ResourceLimit(format!(
            "payoff table for {k} strategies needs {} entries",
            (k as u128) * (k as u128)
        )));
    }
    let strategies = space.enumerate();
    let mut values = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let v = expected_payoff(spec, &strategies[i], &strategies[j])?;
            values[i * k + j] = v;
            values[j * k + i] = v;
        }
    }
    Ok(PayoffTable {
        n: spec.n,
        num_strategies: k,
        success_payoff: spec.success_payoff,
        values,
    })
}

/// Classify an (unordered) strategy pair by its expected payoff.
pub fn classify_pair(spec: &GameSpec, a: &PureStrategy, b: &PureStrategy) -> Result<PairClass> {
    let payoff = expected_payoff(spec, a, b)?;
    Ok(if (payoff - spec.success_payoff).abs() <= PAYOFF_TOLERANCE {
        if a.id == b.id {
            PairClass::Homogeneous
        } else {
            PairClass::HybridComplement
        }
    } else if payoff.abs() <= PAYOFF_TOLERANCE {
        PairClass::Failing
    } else {
        PairClass::Partial
    })
}

/// Exact counts of (homogeneous systems, hybrid complement pairs) for an
/// n-state game with equiprobable states: `n!` self-complementary strategies
/// and `n!(n! - 1)/2` unordered complementary pairs.
pub fn count_signaling_systems(n: usize) -> Result<(u64, u64)> {
    if n < 2 {
        return Err(CoreError::InvalidGame(format!(
            "need at least 2 states, got {n}"
        )));
    }
    let mut fact: u64 = 1;
    for i in 2..=n as u64 {
        fact = fact
            .checked_mul(i)
            .ok_or_else(|| CoreError::ResourceLimit(format!("{n}! overflows u64")))?;
    }
    let pairs = (fact as u128) * (fact as u128 - 1) / 2;
    let pairs = u64::try_from(pairs).map_err(|_| {
        CoreError::ResourceLimit(format!("hybrid pair count for n={n} overflows u64"))
    })?;
    Ok((fact, pairs))
}

/// A game spec bundled with its strategy space and payoff table, computed
/// once and shared by the simulation, analysis, and diffusion code.
#[derive(Debug, Clone)]
pub struct Game {
    pub spec: GameSpec,
    pub space: StrategySpace,
    pub table: PayoffTable,
}

impl Game {
    pub fn new(spec: GameSpec) -> Result<Self> {
        let space = StrategySpace::new(spec.n)?;
        let table = build_payoff_table_in(&spec, &space)?;
        Ok(Self { spec, space, table })
    }

    pub fn num_strategies(&self) -> usize {
        self.space.num_strategies()
    }
}
