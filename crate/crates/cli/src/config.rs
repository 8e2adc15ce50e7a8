//! Experiment configuration: a flat TOML schema whose keys follow the
//! model's parameter names (N, delta, epsilon, NLS, SLS, T, state_probs).
//! Any axis may hold a single value or a list; the cartesian product of the
//! lists defines the sweep cells.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use signet_core::diffusion::{DEFAULT_MAX_STEPS, DEFAULT_TRIALS};
use signet_core::engine::{InitSpec, SimParams, DEFAULT_NAIVE_ROUNDS, DEFAULT_TRAJECTORY_STRIDE};
use signet_core::game::{GameSpec, DEFAULT_SUCCESS_PAYOFF};
use signet_core::population::{LearningParams, SeededConfig, SeededGroup};

/// Environment variable naming the default output root. A config without an
/// `out` key writes to `$SIGNET_OUT/<config file stem>`.
pub const OUTPUT_ROOT_ENV: &str = "SIGNET_OUT";

/// Cell stride in the master-seed derivation. Seed indices must stay below
/// this, which makes `(cell, seed) -> master seed` injective.
pub const SEED_STRIDE: u64 = 1 << 20;

/// Master seed for one (cell, seed) job: `base + cell * 2^20 + seed`.
pub fn master_seed(base_seed: u64, cell: usize, seed: u32) -> u64 {
    base_seed + cell as u64 * SEED_STRIDE + seed as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Baseline,
    ThreeState,
    UnequalStates,
    Seeded,
    Naive,
    Diffusion,
    Sweep,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Baseline => "baseline",
            ExperimentKind::ThreeState => "three_state",
            ExperimentKind::UnequalStates => "unequal_states",
            ExperimentKind::Seeded => "seeded",
            ExperimentKind::Naive => "naive",
            ExperimentKind::Diffusion => "diffusion",
            ExperimentKind::Sweep => "sweep",
        }
    }
}

/// A sweep axis: scalar in TOML for a single value, array for a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(vs) => vs.clone(),
        }
    }
}

/// On-disk schema. Everything except `kind` is optional; defaults depend on
/// the kind and are documented in docs/configuration.md.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: ExperimentKind,
    #[serde(rename = "N")]
    n: Option<OneOrMany<usize>>,
    #[serde(rename = "T")]
    t: Option<OneOrMany<u64>>,
    delta: Option<OneOrMany<f64>>,
    epsilon: Option<OneOrMany<f64>>,
    #[serde(rename = "NLS")]
    nls: Option<OneOrMany<f64>>,
    #[serde(rename = "SLS")]
    sls: Option<OneOrMany<f64>>,
    state_probs: Option<OneOrMany<Vec<f64>>>,
    success_payoff: Option<f64>,
    seeds: Option<u32>,
    base_seed: Option<u64>,
    symmetric: Option<bool>,
    initial_link_weight: Option<f64>,
    threshold: Option<f64>,
    purity: Option<f64>,
    trajectory_stride: Option<u64>,
    snapshot_at: Option<Vec<u64>>,
    out: Option<PathBuf>,
    groups: Option<Vec<SeededGroup>>,
    naive_rounds: Option<u64>,
    trials: Option<usize>,
    max_steps: Option<usize>,
    diffusion_epsilon: Option<f64>,
    snapshot: Option<PathBuf>,
    min_group_size: Option<usize>,
}

/// Fully resolved configuration: every axis expanded, every default filled.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    #[serde(rename = "T")]
    pub t: Vec<u64>,
    pub delta: Vec<f64>,
    pub epsilon: Vec<f64>,
    #[serde(rename = "NLS")]
    pub nls: Vec<f64>,
    #[serde(rename = "SLS")]
    pub sls: Vec<f64>,
    pub state_probs: Vec<Vec<f64>>,
    pub success_payoff: f64,
    pub seeds: u32,
    pub base_seed: u64,
    pub symmetric: bool,
    pub initial_link_weight: Option<f64>,
    pub threshold: f64,
    pub purity: f64,
    pub trajectory_stride: u64,
    pub snapshot_at: Vec<u64>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub groups: Vec<SeededGroup>,
    pub naive_rounds: u64,
    pub diffusion: DiffusionSettings,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffusionSettings {
    pub trials: usize,
    pub max_steps: usize,
    pub epsilon: f64,
    pub snapshot: Option<PathBuf>,
    pub min_group_size: usize,
}

/// One point of the cartesian sweep. Index is row-major over the axes in
/// declaration order: N, T, delta, epsilon, NLS, SLS, state_probs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    #[serde(rename = "N")]
    pub n_agents: usize,
    #[serde(rename = "T")]
    pub rounds: u64,
    pub delta: f64,
    pub epsilon: f64,
    #[serde(rename = "NLS")]
    pub nls: f64,
    #[serde(rename = "SLS")]
    pub sls: f64,
    pub state_probs: Vec<f64>,
}

impl Cell {
    /// Human-readable axis values, e.g. for cells.csv.
    pub fn probs_string(&self) -> String {
        let mut s = String::new();
        for (i, p) in self.state_probs.iter().enumerate() {
            if i > 0 {
                s.push(';');
            }
            let _ = write!(s, "{p}");
        }
        s
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let raw: RawConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let kind = raw.kind;
        let default_probs: Vec<Vec<f64>> = match kind {
            ExperimentKind::ThreeState => vec![vec![1.0 / 3.0; 3]],
            _ => vec![vec![0.5, 0.5]],
        };
        let groups = raw.groups.unwrap_or_default();
        // Diffusion over declared groups defaults to exactly those agents.
        let group_total: usize = groups.iter().map(|g| g.size).sum();
        let default_n = if kind == ExperimentKind::Diffusion && group_total > 0 {
            group_total
        } else {
            100
        };
        // For naive-agent runs T counts pre-injection rounds and defaults
        // to zero: the stylized start stands in for a converged population.
        let default_t = if kind == ExperimentKind::Naive { 0 } else { 1_000_000 };
        let config = ExperimentConfig {
            kind,
            n: raw.n.map(|a| a.values()).unwrap_or_else(|| vec![default_n]),
            t: raw.t.map(|a| a.values()).unwrap_or_else(|| vec![default_t]),
            delta: raw.delta.map(|a| a.values()).unwrap_or_else(|| vec![0.01]),
            epsilon: raw.epsilon.map(|a| a.values()).unwrap_or_else(|| vec![0.01]),
            nls: raw.nls.map(|a| a.values()).unwrap_or_else(|| vec![1.0]),
            sls: raw.sls.map(|a| a.values()).unwrap_or_else(|| vec![1.0]),
            state_probs: raw
                .state_probs
                .map(|a| a.values())
                .unwrap_or(default_probs),
            success_payoff: raw.success_payoff.unwrap_or(DEFAULT_SUCCESS_PAYOFF),
            seeds: raw.seeds.unwrap_or(10),
            base_seed: raw.base_seed.unwrap_or(0),
            symmetric: raw.symmetric.unwrap_or(false),
            initial_link_weight: raw.initial_link_weight,
            threshold: raw.threshold.unwrap_or(0.1),
            purity: raw.purity.unwrap_or(0.9),
            trajectory_stride: raw
                .trajectory_stride
                .unwrap_or(DEFAULT_TRAJECTORY_STRIDE),
            snapshot_at: raw.snapshot_at.unwrap_or_default(),
            out: raw.out,
            groups,
            naive_rounds: raw.naive_rounds.unwrap_or(DEFAULT_NAIVE_ROUNDS),
            diffusion: DiffusionSettings {
                trials: raw.trials.unwrap_or(DEFAULT_TRIALS),
                max_steps: raw.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
                epsilon: raw.diffusion_epsilon.unwrap_or(0.01),
                snapshot: raw.snapshot,
                min_group_size: raw.min_group_size.unwrap_or(2),
            },
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        for (name, axis) in [
            ("N", self.n.len()),
            ("T", self.t.len()),
            ("delta", self.delta.len()),
            ("epsilon", self.epsilon.len()),
            ("NLS", self.nls.len()),
            ("SLS", self.sls.len()),
            ("state_probs", self.state_probs.len()),
        ] {
            if axis == 0 {
                bail!("axis {name} is an empty list");
            }
        }
        if self.seeds == 0 {
            bail!("seeds must be at least 1");
        }
        if u64::from(self.seeds) > SEED_STRIDE {
            bail!("at most {SEED_STRIDE} seeds per cell (master-seed derivation)");
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            bail!("threshold must lie in (0, 1], got {}", self.threshold);
        }
        if !(self.purity > 0.5 && self.purity <= 1.0) {
            bail!("purity must lie in (0.5, 1], got {}", self.purity);
        }
        match self.kind {
            ExperimentKind::ThreeState => {
                if self.state_probs.iter().any(|p| p.len() != 3) {
                    bail!("three_state requires three-entry state_probs");
                }
            }
            ExperimentKind::UnequalStates => {
                for probs in &self.state_probs {
                    let equal = probs.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12);
                    if equal {
                        bail!("unequal_states requires non-equiprobable state_probs");
                    }
                }
            }
            ExperimentKind::Seeded | ExperimentKind::Naive => {
                if self.groups.is_empty() {
                    bail!("{} requires at least one [[groups]] entry", self.kind.as_str());
                }
            }
            ExperimentKind::Diffusion => {
                let from_snapshot = self.diffusion.snapshot.is_some();
                if from_snapshot == !self.groups.is_empty() {
                    bail!("diffusion needs either a snapshot path or [[groups]], not both");
                }
                if self.diffusion.trials == 0 {
                    bail!("diffusion needs at least one trial");
                }
                if !(0.0..=1.0).contains(&self.diffusion.epsilon) {
                    bail!(
                        "diffusion_epsilon must lie in [0, 1], got {}",
                        self.diffusion.epsilon
                    );
                }
                if self.cell_count() != 1 {
                    bail!("diffusion configs cannot sweep simulation axes");
                }
            }
            ExperimentKind::Baseline | ExperimentKind::Sweep => {}
        }
        if !self.groups.is_empty() {
            let covered: usize = self.groups.iter().map(|g| g.size).sum();
            if let Some(&n_min) = self.n.iter().min() {
                if covered > n_min {
                    bail!("groups cover {covered} agents but the smallest N is {n_min}");
                }
            }
        }
        // Dry-run one SimParams per cell so bad axis values fail at load
        // time, not mid-sweep.
        if self.kind != ExperimentKind::Diffusion {
            for cell in self.cells() {
                self.sim_params(&cell, 0)
                    .with_context(|| format!("cell {}", cell.index))?;
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.n.len()
            * self.t.len()
            * self.delta.len()
            * self.epsilon.len()
            * self.nls.len()
            * self.sls.len()
            * self.state_probs.len()
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::with_capacity(self.cell_count());
        for &n_agents in &self.n {
            for &rounds in &self.t {
                for &delta in &self.delta {
                    for &epsilon in &self.epsilon {
                        for &nls in &self.nls {
                            for &sls in &self.sls {
                                for probs in &self.state_probs {
                                    cells.push(Cell {
                                        index: cells.len(),
                                        n_agents,
                                        rounds,
                                        delta,
                                        epsilon,
                                        nls,
                                        sls,
                                        state_probs: probs.clone(),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        cells
    }

    /// Simulation parameters for one (cell, seed) job. The init follows the
    /// kind: seeded and naive experiments start from the declared groups.
    pub fn sim_params(&self, cell: &Cell, seed: u32) -> Result<SimParams> {
        let game = GameSpec::new(
            cell.state_probs.len(),
            cell.state_probs.clone(),
            self.success_payoff,
        )?;
        let init = match self.kind {
            ExperimentKind::Seeded | ExperimentKind::Naive => InitSpec::Seeded {
                config: SeededConfig {
                    groups: self.groups.clone(),
                },
            },
            _ => InitSpec::Uniform,
        };
        let params = SimParams {
            n_agents: cell.n_agents,
            game,
            learning: LearningParams {
                delta: cell.delta,
                epsilon: cell.epsilon,
                nls: cell.nls,
                sls: cell.sls,
                ..LearningParams::default()
            },
            rounds: cell.rounds,
            master_seed: master_seed(self.base_seed, cell.index, seed),
            symmetric_network_updates: self.symmetric,
            snapshot_schedule: self.snapshot_at.clone(),
            trajectory_stride: self.trajectory_stride,
            init,
            initial_link_weight: self.initial_link_weight,
        };
        params.validate()?;
        Ok(params)
    }

    /// Digest over the resolved science-relevant fields. Seed count and the
    /// output path are deliberately excluded so a resumed run can extend
    /// either without invalidating completed work.
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        let map = value.as_object_mut().expect("config is an object");
        map.remove("seeds");
        let json = serde_json::to_string(&value).expect("digest serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let mut out = String::with_capacity(64);
        for byte in hasher.finalize() {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }
}

#[cfg(test)]
impl ExperimentConfig {
    pub(crate) fn load_for_tests(text: &str) -> Self {
        Self::from_raw(toml::from_str(text).unwrap()).unwrap()
    }
}

/// Output directory precedence: `--out` flag, then the config's `out` key,
/// then `$SIGNET_OUT/<config stem>`, then `./runs/<config stem>`.
pub fn resolve_out(flag: Option<PathBuf>, config: &ExperimentConfig, config_path: &Path) -> PathBuf {
    if let Some(path) = flag {
        return path;
    }
    if let Some(path) = &config.out {
        return path.clone();
    }
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(stem),
        None => PathBuf::from("runs").join(stem),
    }
}

/// Number of states n with n^(2n) strategies, for reading bare snapshots.
pub fn states_for_strategy_count(k: usize) -> Result<usize> {
    for n in 2..=6usize {
        if n.pow(2 * n as u32) == k {
            return Ok(n);
        }
    }
    bail!("no supported game has {k} strategies")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_raw(toml::from_str(text).unwrap())
    }

    #[test]
    fn scalar_and_list_axes_mix() {
        let config = parse(
            "kind = \"sweep\"\nN = [20, 50]\nNLS = [1.0, 10.0]\nT = 1000\nseeds = 2",
        )
        .unwrap();
        assert_eq!(config.cell_count(), 4);
        let cells = config.cells();
        assert_eq!(cells[0].n_agents, 20);
        assert_eq!(cells[1].nls, 10.0);
        assert_eq!(cells[3].n_agents, 50);
        // Indices are their position in the row-major expansion.
        for (i, cell) in cells.iter().enumerate() {
            assert_eq!(cell.index, i);
        }
    }

    #[test]
    fn kind_defaults_differ() {
        let three = parse("kind = \"three_state\"\nT = 1000").unwrap();
        assert_eq!(three.state_probs[0].len(), 3);
        let base = parse("kind = \"baseline\"\nT = 1000").unwrap();
        assert_eq!(base.state_probs[0], vec![0.5, 0.5]);
    }

    #[test]
    fn unequal_states_rejects_equiprobable() {
        let err = parse("kind = \"unequal_states\"\nstate_probs = [0.5, 0.5]").unwrap_err();
        assert!(err.to_string().contains("non-equiprobable"));
        assert!(parse("kind = \"unequal_states\"\nstate_probs = [0.9, 0.1]\nT = 1000").is_ok());
    }

    #[test]
    fn seeded_groups_parse_from_toml() {
        let config = parse(
            "kind = \"seeded\"\nN = 30\nT = 1000\n\
             [[groups]]\ntype = \"hybrid\"\nstrategies = [\"S1R2\", \"S2R1\"]\nsize = 4\n",
        )
        .unwrap();
        assert_eq!(config.groups.len(), 1);
        assert_eq!(config.groups[0].size, 4);
        let err = parse("kind = \"seeded\"\nN = 30").unwrap_err();
        assert!(err.to_string().contains("groups"));
    }

    #[test]
    fn master_seeds_are_injective_across_cells() {
        let mut seen = std::collections::HashSet::new();
        for cell in 0..5 {
            for seed in 0..100 {
                assert!(seen.insert(master_seed(7, cell, seed)));
            }
        }
    }

    #[test]
    fn digest_ignores_seed_count_but_not_axes() {
        let a = parse("kind = \"baseline\"\nT = 1000\nseeds = 5").unwrap();
        let b = parse("kind = \"baseline\"\nT = 1000\nseeds = 50").unwrap();
        let c = parse("kind = \"baseline\"\nT = 2000\nseeds = 5").unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RawConfig>("kind = \"baseline\"\nrounds = 10").is_err());
    }

    #[test]
    fn strategy_count_inversion() {
        assert_eq!(states_for_strategy_count(16).unwrap(), 2);
        assert_eq!(states_for_strategy_count(729).unwrap(), 3);
        assert_eq!(states_for_strategy_count(65536).unwrap(), 4);
        assert!(states_for_strategy_count(17).is_err());
    }
}
