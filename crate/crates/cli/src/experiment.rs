//! Experiment orchestration: independent (cell, seed) jobs on a worker
//! pool, per-seed artifact files, and a deterministic serial aggregation
//! pass over the sorted results. Worker count never changes any output
//! byte: every job's content is a function of (cell, seed) alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use signet_core::analysis::{
    concentration_stats, interaction_graph, recover_groups, GroupLabel, GroupStats,
};
use signet_core::diffusion::{run_diffusion, DiffusionConfig, DiffusionCurve};
use signet_core::engine::{inject_naive_agent, Simulation, SimulationRun};
use signet_core::game::{Game, GameSpec, StrategyClass};
use signet_core::population::{Population, SeededGroupKind};
use signet_core::snapshot::{read_snapshot, write_snapshot, PopulationSnapshot};

use crate::config::{
    master_seed, states_for_strategy_count, Cell, ExperimentConfig, ExperimentKind,
};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::tables::{
    write_csv, AdoptionRow, AgentRow, CellRow, CellSummaryRow, CurveRow, DiffusionGroupRow,
    DiffusionRow, GroupDigest, GroupRow, GroupSizeRow, NaiveLink, NaiveLinkRow, NaiveOutcome,
    NaiveRow, SeedRow, SeedSummary, TrajectoryRow, wilson_interval,
};

pub struct RunOptions {
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub resume: bool,
    /// False for `run`: a config expanding to several cells is an error.
    pub multi_cell: bool,
}

pub fn class_str(class: StrategyClass) -> &'static str {
    match class {
        StrategyClass::Separating => "separating",
        StrategyClass::Pooling => "pooling",
        StrategyClass::Partial => "partial",
    }
}

fn seed_rel_dir(cell: usize, seed: u32) -> PathBuf {
    PathBuf::from(format!("cell{cell:03}")).join(format!("seed{seed:05}"))
}

/// Shared analysis bundle for one final snapshot.
pub struct SnapshotAnalysis {
    pub game: Game,
    pub partition: signet_core::analysis::GroupPartition,
    pub stats: GroupStats,
}

pub fn analyze_snapshot(
    snapshot: &PopulationSnapshot,
    game: Game,
    threshold: f64,
    purity: f64,
) -> Result<SnapshotAnalysis> {
    let graph = interaction_graph(snapshot)?;
    let partition = recover_groups(&graph, snapshot, &game, threshold, purity)?;
    let stats = concentration_stats(snapshot, &partition, &game)?;
    Ok(SnapshotAnalysis {
        game,
        partition,
        stats,
    })
}

pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    let out = &opts.out;
    let cells = config.cells();
    if !opts.multi_cell && cells.len() != 1 {
        bail!(
            "config expands to {} cells; `signet run` takes exactly one (use `signet sweep`)",
            cells.len()
        );
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest_path = out.join(MANIFEST_FILE);
    let manifest = if manifest_path.exists() {
        if !opts.resume {
            bail!(
                "{} already exists; pass --resume to continue it or pick a fresh --out",
                manifest_path.display()
            );
        }
        let existing = RunManifest::load(&manifest_path)?;
        existing.check_matches(config)?;
        existing
    } else {
        RunManifest::new(config)
    };

    let cell_rows: Vec<CellRow> = cells
        .iter()
        .map(|c| CellRow {
            cell: c.index,
            n: c.n_agents,
            t: c.rounds,
            delta: c.delta,
            epsilon: c.epsilon,
            nls: c.nls,
            sls: c.sls,
            state_probs: c.probs_string(),
        })
        .collect();
    write_csv(&out.join("cells.csv"), &cell_rows)?;

    let mut jobs = Vec::new();
    let mut skipped = 0usize;
    for cell in &cells {
        for seed in 0..config.seeds {
            if manifest.is_completed(cell.index, seed) {
                skipped += 1;
            } else {
                jobs.push((cell.clone(), seed));
            }
        }
    }
    eprintln!(
        "{} job(s) to run, {skipped} already completed, {} worker(s)",
        jobs.len(),
        opts.threads.unwrap_or_else(rayon::current_num_threads)
    );

    let shared = Mutex::new(manifest);
    let run_all = || {
        jobs.par_iter().for_each(|(cell, seed)| {
            let result = run_one(config, cell, *seed, out);
            let mut manifest = shared.lock().expect("manifest lock");
            match result {
                Ok(files) => {
                    eprintln!("{} done", RunManifest::key(cell.index, *seed));
                    manifest.record(cell.index, *seed, RunManifest::completed_entry(files));
                }
                Err(err) => {
                    eprintln!("{} FAILED: {err:#}", RunManifest::key(cell.index, *seed));
                    manifest.record(cell.index, *seed, RunManifest::failed_entry(format!("{err:#}")));
                }
            }
            // Persist progress after every job so an interrupted sweep
            // resumes where it stopped.
            if let Err(err) = manifest.save(&manifest_path) {
                eprintln!("warning: could not save manifest: {err:#}");
            }
        });
    };
    match opts.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .context("building worker pool")?
            .install(run_all),
        None => run_all(),
    }

    let manifest = shared.into_inner().expect("manifest lock");
    let failed = manifest.failed_keys();
    if !failed.is_empty() {
        let list: Vec<String> = failed.iter().map(|k| k.to_string()).collect();
        manifest.save(&manifest_path)?;
        bail!("{} job(s) failed: {}", list.len(), list.join(", "));
    }
    if manifest.completed_keys().next().is_some() {
        aggregate(&manifest, config, out)?;
    }
    manifest.save(&manifest_path)?;
    Ok(manifest)
}

fn run_one(config: &ExperimentConfig, cell: &Cell, seed: u32, out: &Path) -> Result<Vec<String>> {
    let rel = seed_rel_dir(cell.index, seed);
    let dir = out.join(&rel);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    match config.kind {
        ExperimentKind::Diffusion => run_diffusion_seed(config, cell, seed, &rel, &dir),
        ExperimentKind::Naive => run_naive_seed(config, cell, seed, &rel, &dir),
        _ => run_standard_seed(config, cell, seed, &rel, &dir),
    }
}

/// One simulation seed: run, snapshot, analyze, write tables.
fn run_standard_seed(
    config: &ExperimentConfig,
    cell: &Cell,
    seed: u32,
    rel: &Path,
    dir: &Path,
) -> Result<Vec<String>> {
    let params = config.sim_params(cell, seed)?;
    let mut sim = Simulation::new(params)?;
    let run = sim.run()?;
    let game = sim.game().clone();
    let mut files = write_run_artifacts(&run, &game, rel, dir)?;
    let analysis = analyze_snapshot(&run.final_snapshot, game, config.threshold, config.purity)?;
    files.extend(write_analysis_artifacts(cell.index, seed, &analysis, rel, dir)?);
    let summary = build_summary(config, cell, seed, &run, &analysis, None);
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    files.push(rel.join("summary.json").to_string_lossy().into_owned());
    Ok(files)
}

/// Stylized population, one naive newcomer, a post-injection run, and the
/// newcomer's final affiliation.
fn run_naive_seed(
    config: &ExperimentConfig,
    cell: &Cell,
    seed: u32,
    rel: &Path,
    dir: &Path,
) -> Result<Vec<String>> {
    let params = config.sim_params(cell, seed)?;
    let mut pre = Simulation::new(params.clone())?;
    let pre_run = pre.run()?;
    let (mut post_params, population) = inject_naive_agent(&pre_run.final_snapshot, &params)?;
    post_params.rounds = config.naive_rounds;
    let naive_index = params.n_agents;
    let mut sim = Simulation::from_population(post_params, population)?;
    let run = sim.run()?;
    let game = sim.game().clone();

    let mut files = write_run_artifacts(&run, &game, rel, dir)?;
    let analysis = analyze_snapshot(&run.final_snapshot, game, config.threshold, config.purity)?;
    files.extend(write_analysis_artifacts(cell.index, seed, &analysis, rel, dir)?);

    // Which seeded source group does the newcomer point at? Groups occupy
    // the first agents in declaration order.
    let agent = &run.final_snapshot.agents[naive_index];
    let total: f64 = agent.link_weights.iter().sum();
    let mut links = Vec::with_capacity(config.groups.len());
    let mut start = 0usize;
    for (g, group) in config.groups.iter().enumerate() {
        let members = start..start + group.size;
        start += group.size;
        let weight: f64 = members.clone().map(|j| agent.link_weights[j]).sum();
        let (source_kind, source_label) = match &group.kind {
            SeededGroupKind::Homogeneous { strategy } => {
                ("homogeneous".to_string(), format!("homogeneous({strategy})"))
            }
            SeededGroupKind::Hybrid { strategies } => (
                "hybrid".to_string(),
                format!("hybrid({}+{})", strategies[0], strategies[1]),
            ),
        };
        links.push(NaiveLink {
            source_group: g,
            source_kind,
            source_label,
            link_share: if total > 0.0 { weight / total } else { 0.0 },
        });
    }
    let joined = &analysis.partition.groups[analysis.partition.group_of[naive_index]];
    let argmax = analysis.stats.agents[naive_index].argmax;
    let naive = NaiveOutcome {
        joined_kind: joined.label.kind_str().to_string(),
        joined_label: joined.label.describe(&analysis.game),
        joined_size: joined.members.len(),
        argmax_label: analysis.game.space.label(argmax),
        argmax_class: class_str(analysis.game.space.strategy_class(argmax)?).to_string(),
        links,
    };
    let summary = build_summary(config, cell, seed, &run, &analysis, Some(naive));
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    files.push(rel.join("summary.json").to_string_lossy().into_owned());
    Ok(files)
}

/// Diffusion trials over every studied group of a source population.
fn run_diffusion_seed(
    config: &ExperimentConfig,
    cell: &Cell,
    seed: u32,
    rel: &Path,
    dir: &Path,
) -> Result<Vec<String>> {
    // (members, type, size) triples plus the snapshot they live in.
    let (snapshot, game, groups) = diffusion_source(config, cell)?;
    let mut trial_rows: Vec<DiffusionRow> = Vec::new();
    let mut curve_rows: Vec<CurveRow> = Vec::new();
    let mut group_rows: Vec<DiffusionGroupRow> = Vec::new();
    for (group_id, members, group_type) in &groups {
        // Decorrelate groups sharing a master seed without colliding with
        // neighboring seeds' streams.
        let stream_seed = master_seed(config.base_seed, cell.index, seed)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(*group_id as u64);
        let diffusion_config = DiffusionConfig {
            group: members.clone(),
            trials: config.diffusion.trials,
            max_steps: config.diffusion.max_steps,
            epsilon: config.diffusion.epsilon,
            seed: stream_seed,
        };
        let curve: DiffusionCurve = run_diffusion(&snapshot, &game, &diffusion_config)?;
        for (trial, trace) in curve.trials.iter().enumerate() {
            for (step, fraction) in trace.fractions.iter().enumerate() {
                trial_rows.push(DiffusionRow {
                    seed,
                    group_id: *group_id,
                    group_type: group_type.clone(),
                    group_size: members.len(),
                    trial,
                    step,
                    fraction_infected: *fraction,
                });
            }
        }
        for (step, fraction) in curve.mean_fractions.iter().enumerate() {
            curve_rows.push(CurveRow {
                seed,
                group_id: *group_id,
                group_type: group_type.clone(),
                group_size: members.len(),
                step,
                mean_fraction: *fraction,
            });
        }
        group_rows.push(DiffusionGroupRow {
            seed,
            group_id: *group_id,
            group_type: group_type.clone(),
            group_size: members.len(),
            trials: config.diffusion.trials,
            coverage_rate: curve.coverage_rate,
            mean_coverage_step: curve.mean_coverage_step,
        });
    }
    write_csv(&dir.join("diffusion.csv"), &trial_rows)?;
    write_csv(&dir.join("curves.csv"), &curve_rows)?;
    write_csv(&dir.join("diffusion_groups.csv"), &group_rows)?;
    Ok(vec![
        rel.join("diffusion.csv").to_string_lossy().into_owned(),
        rel.join("curves.csv").to_string_lossy().into_owned(),
        rel.join("diffusion_groups.csv").to_string_lossy().into_owned(),
    ])
}

type DiffusionGroups = Vec<(usize, Vec<usize>, String)>;

/// The population diffusion runs over: either a stored snapshot with its
/// recovered groups, or an idealized population built from declared groups.
fn diffusion_source(
    config: &ExperimentConfig,
    cell: &Cell,
) -> Result<(PopulationSnapshot, Game, DiffusionGroups)> {
    if let Some(path) = &config.diffusion.snapshot {
        let snapshot = read_snapshot(path)?;
        let n_states = states_for_strategy_count(snapshot.num_strategies())?;
        let probs = if cell.state_probs.len() == n_states {
            cell.state_probs.clone()
        } else {
            vec![1.0 / n_states as f64; n_states]
        };
        let game = Game::new(GameSpec::new(n_states, probs, config.success_payoff)?)?;
        let graph = interaction_graph(&snapshot)?;
        let partition = recover_groups(&graph, &snapshot, &game, config.threshold, config.purity)?;
        let groups = partition
            .groups
            .iter()
            .filter(|g| g.members.len() >= config.diffusion.min_group_size)
            .map(|g| (g.id, g.members.clone(), g.label.kind_str().to_string()))
            .collect();
        Ok((snapshot, game, groups))
    } else {
        let game = Game::new(GameSpec::new(
            cell.state_probs.len(),
            cell.state_probs.clone(),
            config.success_payoff,
        )?)?;
        let spec: Vec<(SeededGroupKind, usize)> = config
            .groups
            .iter()
            .map(|g| (g.kind.clone(), g.size))
            .collect();
        let population = Population::idealized(cell.n_agents, &spec, &game)?;
        let snapshot = PopulationSnapshot::new(0, "idealized".into(), &population);
        let mut groups = Vec::with_capacity(spec.len());
        let mut start = 0usize;
        for (group_id, (kind, size)) in spec.iter().enumerate() {
            let members: Vec<usize> = (start..start + size).collect();
            start += size;
            let group_type = match kind {
                SeededGroupKind::Homogeneous { .. } => "homogeneous",
                SeededGroupKind::Hybrid { .. } => "hybrid",
            };
            groups.push((group_id, members, group_type.to_string()));
        }
        Ok((snapshot, game, groups))
    }
}

/// final.bin, scheduled snapshots, trajectory.csv, adoption.csv.
fn write_run_artifacts(
    run: &SimulationRun,
    game: &Game,
    rel: &Path,
    dir: &Path,
) -> Result<Vec<String>> {
    let mut files = Vec::new();
    write_snapshot(&dir.join("final.bin"), &run.final_snapshot)?;
    files.push(rel.join("final.bin").to_string_lossy().into_owned());
    for snap in &run.scheduled_snapshots {
        let name = format!("snap{:09}.bin", snap.round);
        write_snapshot(&dir.join(&name), snap)?;
        files.push(rel.join(&name).to_string_lossy().into_owned());
    }
    let trajectory: Vec<TrajectoryRow> = run
        .trajectory
        .points
        .iter()
        .map(|p| TrajectoryRow {
            round: p.round,
            mean_payoff: p.mean_payoff,
        })
        .collect();
    write_csv(&dir.join("trajectory.csv"), &trajectory)?;
    files.push(rel.join("trajectory.csv").to_string_lossy().into_owned());
    let mut adoption = Vec::new();
    for point in &run.trajectory.points {
        for &(strategy, count) in &point.adopters {
            adoption.push(AdoptionRow {
                round: point.round,
                strategy,
                label: game.space.label(strategy),
                count,
            });
        }
    }
    write_csv(&dir.join("adoption.csv"), &adoption)?;
    files.push(rel.join("adoption.csv").to_string_lossy().into_owned());
    Ok(files)
}

/// groups.csv and agents.csv for one analyzed snapshot.
pub fn write_analysis_artifacts(
    cell: usize,
    seed: u32,
    analysis: &SnapshotAnalysis,
    rel: &Path,
    dir: &Path,
) -> Result<Vec<String>> {
    let game = &analysis.game;
    let group_rows: Vec<GroupRow> = analysis
        .stats
        .groups
        .iter()
        .map(|g| GroupRow {
            cell,
            seed,
            group: g.group,
            kind: g.label.kind_str().to_string(),
            label: g.label.describe(game),
            size: g.size,
            bipartite: g.bipartite,
            mean_preferred_share: g.mean_preferred_share,
            mean_complementary_share: g.mean_complementary_share,
            mi_signal_action: g.mi.signal_action,
            mi_signal_state: g.mi.signal_state,
            mi_signal_action_mixture: g.mi.signal_action_mixture,
            mi_signal_state_mixture: g.mi.signal_state_mixture,
        })
        .collect();
    write_csv(&dir.join("groups.csv"), &group_rows)?;
    let agent_rows: Vec<AgentRow> = analysis
        .stats
        .agents
        .iter()
        .map(|a| {
            Ok(AgentRow {
                cell,
                seed,
                agent: a.agent,
                group: a.group,
                argmax: a.argmax,
                argmax_label: game.space.label(a.argmax),
                argmax_class: class_str(game.space.strategy_class(a.argmax)?).to_string(),
                preferred_share: a.preferred_share,
                complementary_share: a.complementary_share,
            })
        })
        .collect::<Result<_>>()?;
    write_csv(&dir.join("agents.csv"), &agent_rows)?;
    Ok(vec![
        rel.join("groups.csv").to_string_lossy().into_owned(),
        rel.join("agents.csv").to_string_lossy().into_owned(),
    ])
}

fn build_summary(
    config: &ExperimentConfig,
    cell: &Cell,
    seed: u32,
    run: &SimulationRun,
    analysis: &SnapshotAnalysis,
    naive: Option<NaiveOutcome>,
) -> SeedSummary {
    let mut has = [false; 4];
    let mut homogeneous_labels = BTreeSet::new();
    let mut groups = Vec::with_capacity(analysis.partition.groups.len());
    for group in &analysis.partition.groups {
        match &group.label {
            GroupLabel::Homogeneous { strategy } => {
                has[0] = true;
                homogeneous_labels.insert(*strategy);
            }
            GroupLabel::Hybrid { .. } => has[1] = true,
            GroupLabel::Pooling { .. } => has[2] = true,
            GroupLabel::Mixed => has[3] = true,
        }
        groups.push(GroupDigest {
            kind: group.label.kind_str().to_string(),
            label: group.label.describe(&analysis.game),
            size: group.members.len(),
        });
    }
    let shares = analysis.stats.type_shares;
    let n_agents = run.final_snapshot.n_agents();
    let inv = 1.0 / n_agents as f64;
    let mean_preferred_share =
        analysis.stats.agents.iter().map(|a| a.preferred_share).sum::<f64>() * inv;
    let mean_complementary_share =
        analysis.stats.agents.iter().map(|a| a.complementary_share).sum::<f64>() * inv;
    SeedSummary {
        cell: cell.index,
        seed,
        master_seed: master_seed(config.base_seed, cell.index, seed),
        n_agents,
        n_groups: analysis.partition.groups.len(),
        has_homogeneous: has[0],
        has_hybrid: has[1],
        has_pooling: has[2],
        has_mixed: has[3],
        distinct_homogeneous: homogeneous_labels.len(),
        share_homogeneous: shares.homogeneous,
        share_hybrid: shares.hybrid,
        share_pooling: shares.pooling,
        share_mixed: shares.mixed,
        mean_preferred_share,
        mean_complementary_share,
        final_mean_payoff: run
            .trajectory
            .points
            .last()
            .map(|p| p.mean_payoff)
            .unwrap_or(0.0),
        groups,
        naive,
    }
}

/// Deterministic aggregation: a serial fold over completed runs sorted by
/// (cell, seed). Errors list every missing file explicitly.
pub fn aggregate(manifest: &RunManifest, config: &ExperimentConfig, out: &Path) -> Result<()> {
    let missing = manifest.missing_files(out);
    if !missing.is_empty() {
        let mut lines = String::new();
        for (key, file) in &missing {
            lines.push_str(&format!("\n  {key}: {}", file.display()));
        }
        bail!("{} file(s) listed in the manifest are missing:{lines}", missing.len());
    }
    let agg_dir = out.join("aggregate");
    fs::create_dir_all(&agg_dir)?;

    let mut completed: Vec<(usize, u32)> = manifest
        .completed_keys()
        .filter_map(|(key, _)| parse_key(key))
        .collect();
    completed.sort_unstable();

    if config.kind == ExperimentKind::Diffusion {
        return aggregate_diffusion(&completed, out, &agg_dir);
    }

    let mut summaries = Vec::with_capacity(completed.len());
    for &(cell, seed) in &completed {
        let path = out.join(seed_rel_dir(cell, seed)).join("summary.json");
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let summary: SeedSummary = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        summaries.push(summary);
    }

    let seed_rows: Vec<SeedRow> = summaries.iter().map(SeedRow::from_summary).collect();
    write_csv(&agg_dir.join("seed_summary.csv"), &seed_rows)?;

    let cells: BTreeMap<usize, &Cell> = manifest.cells.iter().map(|c| (c.index, c)).collect();
    let mut by_cell: BTreeMap<usize, Vec<&SeedSummary>> = BTreeMap::new();
    for summary in &summaries {
        by_cell.entry(summary.cell).or_default().push(summary);
    }
    let mut cell_rows = Vec::with_capacity(by_cell.len());
    for (&cell_index, group) in &by_cell {
        let cell = cells
            .get(&cell_index)
            .with_context(|| format!("manifest lists no cell {cell_index}"))?;
        let n = group.len();
        let count = |pred: &dyn Fn(&SeedSummary) -> bool| group.iter().filter(|s| pred(s)).count();
        let hybrid = wilson_interval(count(&|s| s.has_hybrid), n);
        let homogeneous = wilson_interval(count(&|s| s.has_homogeneous), n);
        let pooling = wilson_interval(count(&|s| s.has_pooling), n);
        let all_three =
            wilson_interval(count(&|s| s.distinct_homogeneous >= 2 && s.has_hybrid), n);
        let mean = |f: &dyn Fn(&SeedSummary) -> f64| {
            group.iter().map(|s| f(s)).sum::<f64>() / n as f64
        };
        cell_rows.push(CellSummaryRow {
            cell: cell_index,
            n: cell.n_agents,
            t: cell.rounds,
            delta: cell.delta,
            epsilon: cell.epsilon,
            nls: cell.nls,
            sls: cell.sls,
            state_probs: cell.probs_string(),
            seeds: n,
            hybrid_rate: hybrid.0,
            hybrid_lo: hybrid.1,
            hybrid_hi: hybrid.2,
            homogeneous_rate: homogeneous.0,
            homogeneous_lo: homogeneous.1,
            homogeneous_hi: homogeneous.2,
            pooling_rate: pooling.0,
            pooling_lo: pooling.1,
            pooling_hi: pooling.2,
            all_three_rate: all_three.0,
            all_three_lo: all_three.1,
            all_three_hi: all_three.2,
            mean_share_homogeneous: mean(&|s| s.share_homogeneous),
            mean_share_hybrid: mean(&|s| s.share_hybrid),
            mean_share_pooling: mean(&|s| s.share_pooling),
            mean_share_mixed: mean(&|s| s.share_mixed),
            mean_preferred_share: mean(&|s| s.mean_preferred_share),
            mean_complementary_share: mean(&|s| s.mean_complementary_share),
            mean_final_payoff: mean(&|s| s.final_mean_payoff),
        });
    }
    write_csv(&agg_dir.join("cell_summary.csv"), &cell_rows)?;

    let mut histogram: BTreeMap<(usize, String, usize), u64> = BTreeMap::new();
    for summary in &summaries {
        for group in &summary.groups {
            *histogram
                .entry((summary.cell, group.kind.clone(), group.size))
                .or_insert(0) += 1;
        }
    }
    let size_rows: Vec<GroupSizeRow> = histogram
        .into_iter()
        .map(|((cell, kind, size), count)| GroupSizeRow {
            cell,
            kind,
            size,
            count,
        })
        .collect();
    write_csv(&agg_dir.join("group_sizes.csv"), &size_rows)?;

    if config.kind == ExperimentKind::Naive {
        let mut naive_rows = Vec::new();
        let mut link_rows = Vec::new();
        for summary in &summaries {
            let Some(naive) = &summary.naive else { continue };
            let nls = cells
                .get(&summary.cell)
                .map(|c| c.nls)
                .unwrap_or(f64::NAN);
            naive_rows.push(NaiveRow {
                cell: summary.cell,
                seed: summary.seed,
                nls,
                joined_kind: naive.joined_kind.clone(),
                joined_label: naive.joined_label.clone(),
                joined_size: naive.joined_size,
                argmax_label: naive.argmax_label.clone(),
                argmax_class: naive.argmax_class.clone(),
            });
            for link in &naive.links {
                link_rows.push(NaiveLinkRow {
                    cell: summary.cell,
                    seed: summary.seed,
                    nls,
                    source_group: link.source_group,
                    source_kind: link.source_kind.clone(),
                    source_label: link.source_label.clone(),
                    link_share: link.link_share,
                });
            }
        }
        write_csv(&agg_dir.join("naive.csv"), &naive_rows)?;
        write_csv(&agg_dir.join("naive_links.csv"), &link_rows)?;
    }
    Ok(())
}

fn aggregate_diffusion(completed: &[(usize, u32)], out: &Path, agg_dir: &Path) -> Result<()> {
    let mut trials: Vec<DiffusionRow> = Vec::new();
    let mut curves: Vec<CurveRow> = Vec::new();
    let mut groups: Vec<DiffusionGroupRow> = Vec::new();
    for &(cell, seed) in completed {
        let dir = out.join(seed_rel_dir(cell, seed));
        trials.extend(crate::tables::read_csv::<DiffusionRow>(&dir.join("diffusion.csv"))?);
        curves.extend(crate::tables::read_csv::<CurveRow>(&dir.join("curves.csv"))?);
        groups.extend(crate::tables::read_csv::<DiffusionGroupRow>(
            &dir.join("diffusion_groups.csv"),
        )?);
    }
    write_csv(&agg_dir.join("diffusion.csv"), &trials)?;
    write_csv(&agg_dir.join("curves.csv"), &curves)?;
    write_csv(&agg_dir.join("diffusion_groups.csv"), &groups)?;
    Ok(())
}

fn parse_key(key: &str) -> Option<(usize, u32)> {
    let rest = key.strip_prefix("cell")?;
    let (cell, seed) = rest.split_once("-seed")?;
    Some((cell.parse().ok()?, seed.parse().ok()?))
}
