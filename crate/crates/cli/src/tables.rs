//! Typed rows for every table the harness emits, plus small CSV helpers.
//! All tables are plain headered CSV so any downstream tooling can read
//! them; booleans appear as `true`/`false`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row.with_context(|| format!("reading {}", path.display()))?);
    }
    Ok(rows)
}

/// cells.csv: one row per sweep cell.
#[derive(Debug, Serialize, Deserialize)]
pub struct CellRow {
    pub cell: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: u64,
    pub delta: f64,
    pub epsilon: f64,
    #[serde(rename = "NLS")]
    pub nls: f64,
    #[serde(rename = "SLS")]
    pub sls: f64,
    /// Semicolon-joined probabilities.
    pub state_probs: String,
}

/// trajectory.csv: mean payoff at stride multiples plus the final round.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub round: u64,
    pub mean_payoff: f64,
}

/// adoption.csv: agents per argmax strategy at stride multiples, long form,
/// zero counts omitted.
#[derive(Debug, Serialize, Deserialize)]
pub struct AdoptionRow {
    pub round: u64,
    pub strategy: usize,
    pub label: String,
    pub count: u32,
}

/// groups.csv: one row per recovered group in a seed's final snapshot.
#[derive(Debug, Serialize, Deserialize)]
pub struct GroupRow {
    pub cell: usize,
    pub seed: u32,
    pub group: usize,
    pub kind: String,
    pub label: String,
    pub size: usize,
    pub bipartite: bool,
    pub mean_preferred_share: f64,
    pub mean_complementary_share: f64,
    pub mi_signal_action: f64,
    pub mi_signal_state: f64,
    pub mi_signal_action_mixture: f64,
    pub mi_signal_state_mixture: f64,
}

/// agents.csv: one row per agent in a seed's final snapshot.
#[derive(Debug, Serialize, Deserialize)]
pub struct AgentRow {
    pub cell: usize,
    pub seed: u32,
    pub agent: usize,
    pub group: usize,
    pub argmax: usize,
    pub argmax_label: String,
    pub argmax_class: String,
    pub preferred_share: f64,
    pub complementary_share: f64,
}

/// Per-group shorthand stored in summary.json for aggregation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupDigest {
    pub kind: String,
    pub label: String,
    pub size: usize,
}

/// Link-weight share of the naive agent toward one seeded source group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NaiveLink {
    pub source_group: usize,
    pub source_kind: String,
    pub source_label: String,
    pub link_share: f64,
}

/// Outcome of one naive-agent run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NaiveOutcome {
    pub joined_kind: String,
    pub joined_label: String,
    pub joined_size: usize,
    pub argmax_label: String,
    pub argmax_class: String,
    pub links: Vec<NaiveLink>,
}

/// summary.json: everything aggregation needs about one (cell, seed) job.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedSummary {
    pub cell: usize,
    pub seed: u32,
    pub master_seed: u64,
    pub n_agents: usize,
    pub n_groups: usize,
    pub has_homogeneous: bool,
    pub has_hybrid: bool,
    pub has_pooling: bool,
    pub has_mixed: bool,
    /// Distinct homogeneous group labels (two conventions exist for n = 2).
    pub distinct_homogeneous: usize,
    pub share_homogeneous: f64,
    pub share_hybrid: f64,
    pub share_pooling: f64,
    pub share_mixed: f64,
    pub mean_preferred_share: f64,
    pub mean_complementary_share: f64,
    pub final_mean_payoff: f64,
    pub groups: Vec<GroupDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub naive: Option<NaiveOutcome>,
}

/// aggregate/seed_summary.csv: SeedSummary flattened, one row per seed.
#[derive(Debug, Serialize, Deserialize)]
pub struct SeedRow {
    pub cell: usize,
    pub seed: u32,
    pub master_seed: u64,
    pub n_agents: usize,
    pub n_groups: usize,
    pub has_homogeneous: bool,
    pub has_hybrid: bool,
    pub has_pooling: bool,
    pub has_mixed: bool,
    pub distinct_homogeneous: usize,
    pub share_homogeneous: f64,
    pub share_hybrid: f64,
    pub share_pooling: f64,
    pub share_mixed: f64,
    pub mean_preferred_share: f64,
    pub mean_complementary_share: f64,
    pub final_mean_payoff: f64,
}

impl SeedRow {
    pub fn from_summary(s: &SeedSummary) -> Self {
        SeedRow {
            cell: s.cell,
            seed: s.seed,
            master_seed: s.master_seed,
            n_agents: s.n_agents,
            n_groups: s.n_groups,
            has_homogeneous: s.has_homogeneous,
            has_hybrid: s.has_hybrid,
            has_pooling: s.has_pooling,
            has_mixed: s.has_mixed,
            distinct_homogeneous: s.distinct_homogeneous,
            share_homogeneous: s.share_homogeneous,
            share_hybrid: s.share_hybrid,
            share_pooling: s.share_pooling,
            share_mixed: s.share_mixed,
            mean_preferred_share: s.mean_preferred_share,
            mean_complementary_share: s.mean_complementary_share,
            final_mean_payoff: s.final_mean_payoff,
        }
    }
}

/// aggregate/cell_summary.csv: per-cell presence rates with Wilson 95%
/// intervals and mean shares.
#[derive(Debug, Serialize, Deserialize)]
pub struct CellSummaryRow {
    pub cell: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: u64,
    pub delta: f64,
    pub epsilon: f64,
    #[serde(rename = "NLS")]
    pub nls: f64,
    #[serde(rename = "SLS")]
    pub sls: f64,
    pub state_probs: String,
    pub seeds: usize,
    pub hybrid_rate: f64,
    pub hybrid_lo: f64,
    pub hybrid_hi: f64,
    pub homogeneous_rate: f64,
    pub homogeneous_lo: f64,
    pub homogeneous_hi: f64,
    pub pooling_rate: f64,
    pub pooling_lo: f64,
    pub pooling_hi: f64,
    /// Both homogeneous conventions plus a hybrid group in one seed.
    pub all_three_rate: f64,
    pub all_three_lo: f64,
    pub all_three_hi: f64,
    pub mean_share_homogeneous: f64,
    pub mean_share_hybrid: f64,
    pub mean_share_pooling: f64,
    pub mean_share_mixed: f64,
    pub mean_preferred_share: f64,
    pub mean_complementary_share: f64,
    pub mean_final_payoff: f64,
}

/// aggregate/group_sizes.csv: group-size histogram per cell and kind.
#[derive(Debug, Serialize, Deserialize)]
pub struct GroupSizeRow {
    pub cell: usize,
    pub kind: String,
    pub size: usize,
    pub count: u64,
}

/// aggregate/naive.csv: which group each naive agent joined.
#[derive(Debug, Serialize, Deserialize)]
pub struct NaiveRow {
    pub cell: usize,
    pub seed: u32,
    #[serde(rename = "NLS")]
    pub nls: f64,
    pub joined_kind: String,
    pub joined_label: String,
    pub joined_size: usize,
    pub argmax_label: String,
    pub argmax_class: String,
}

/// aggregate/naive_links.csv: the naive agent's final link-weight share
/// toward each seeded source group, long form.
#[derive(Debug, Serialize, Deserialize)]
pub struct NaiveLinkRow {
    pub cell: usize,
    pub seed: u32,
    #[serde(rename = "NLS")]
    pub nls: f64,
    pub source_group: usize,
    pub source_kind: String,
    pub source_label: String,
    pub link_share: f64,
}

/// diffusion.csv: trial-level infection curves, long form. Column names
/// follow the regression input layout.
#[derive(Debug, Serialize, Deserialize)]
pub struct DiffusionRow {
    pub seed: u32,
    pub group_id: usize,
    pub group_type: String,
    pub group_size: usize,
    pub trial: usize,
    pub step: usize,
    pub fraction_infected: f64,
}

/// curves.csv: trial-mean infection curve per group.
#[derive(Debug, Serialize, Deserialize)]
pub struct CurveRow {
    pub seed: u32,
    pub group_id: usize,
    pub group_type: String,
    pub group_size: usize,
    pub step: usize,
    pub mean_fraction: f64,
}

/// diffusion_groups.csv: coverage summary per group.
#[derive(Debug, Serialize, Deserialize)]
pub struct DiffusionGroupRow {
    pub seed: u32,
    pub group_id: usize,
    pub group_type: String,
    pub group_size: usize,
    pub trials: usize,
    pub coverage_rate: f64,
    /// Empty when no trial covered the group.
    pub mean_coverage_step: Option<f64>,
}

/// Wilson 95% score interval for a binomial proportion. Returns
/// (estimate, low, high); (0, 0, 0..1) degenerates sensibly at n = 0.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64, f64) {
    if trials == 0 {
        return (0.0, 0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = 1.959_963_984_540_054_f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (p, (center - half).max(0.0), (center + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![
            TrajectoryRow { round: 0, mean_payoff: 0.5 },
            TrajectoryRow { round: 1000, mean_payoff: 1.25 },
        ];
        write_csv(&path, &rows).unwrap();
        let back: Vec<TrajectoryRow> = read_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].round, 1000);
        assert_eq!(back[1].mean_payoff, 1.25);
    }

    #[test]
    fn wilson_known_values() {
        // 8/10 successes: the textbook interval is roughly (0.49, 0.94).
        let (p, lo, hi) = wilson_interval(8, 10);
        assert_eq!(p, 0.8);
        assert!((lo - 0.49).abs() < 0.01, "lo = {lo}");
        assert!((hi - 0.943).abs() < 0.01, "hi = {hi}");
        // Degenerate cases stay inside [0, 1].
        let (_, lo, hi) = wilson_interval(0, 20);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.25);
        let (_, lo, hi) = wilson_interval(20, 20);
        assert!(lo > 0.75 && lo < 1.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn optional_cells_serialize_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let rows = vec![DiffusionGroupRow {
            seed: 0,
            group_id: 0,
            group_type: "hybrid".into(),
            group_size: 4,
            trials: 10,
            coverage_rate: 0.0,
            mean_coverage_step: None,
        }];
        write_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(','));
        let back: Vec<DiffusionGroupRow> = read_csv(&path).unwrap();
        assert!(back[0].mean_coverage_step.is_none());
    }
}
