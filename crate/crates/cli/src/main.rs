use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use signet_cli::config::{
    resolve_out, states_for_strategy_count, ExperimentConfig, ExperimentKind, SEED_STRIDE,
};
use signet_cli::experiment::{analyze_snapshot, run_experiment, write_analysis_artifacts, RunOptions};
use signet_core::game::{Game, GameSpec, DEFAULT_SUCCESS_PAYOFF};
use signet_core::snapshot::read_snapshot;

#[derive(Parser)]
#[command(name = "signet", version, about = "Signaling games on dynamic weighted networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config that expands to a single parameter cell
    Run(RunArgs),
    /// Run a config whose axes expand to any number of cells
    Sweep(RunArgs),
    /// Run a seeded-groups experiment (kind = "seeded")
    Seeded(RunArgs),
    /// Run a naive-agent experiment (kind = "naive")
    Naive(RunArgs),
    /// Run diffusion trials (kind = "diffusion")
    Diffuse(RunArgs),
    /// Recover groups and statistics from one snapshot file
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML)
    #[arg(short, long)]
    config: PathBuf,
    /// Override the config's seed count
    #[arg(long)]
    seeds: Option<u32>,
    /// Output directory (default: config `out`, then $SIGNET_OUT/<stem>,
    /// then runs/<stem>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Continue a previous run, skipping completed (cell, seed) jobs
    #[arg(long)]
    resume: bool,
    /// Extra snapshot rounds (comma separated, may repeat)
    #[arg(long = "snapshot-at", value_delimiter = ',')]
    snapshot_at: Vec<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Snapshot file (.bin or .json)
    snapshot: PathBuf,
    /// Interaction-probability cutoff for group recovery
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    /// Modal-strategy share required to label a group
    #[arg(long, default_value_t = 0.9)]
    purity: f64,
    /// State probabilities, comma separated (default: equiprobable)
    #[arg(long, value_delimiter = ',')]
    state_probs: Vec<f64>,
    /// Also write groups.csv and agents.csv to this directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run_with(args, None, false),
        Command::Sweep(args) => run_with(args, None, true),
        Command::Seeded(args) => run_with(args, Some(ExperimentKind::Seeded), true),
        Command::Naive(args) => run_with(args, Some(ExperimentKind::Naive), true),
        Command::Diffuse(args) => run_with(args, Some(ExperimentKind::Diffusion), false),
        Command::Analyze(args) => analyze(args),
    }
}

fn run_with(args: RunArgs, expect: Option<ExperimentKind>, multi_cell: bool) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(kind) = expect {
        if config.kind != kind {
            bail!(
                "this subcommand needs kind = \"{}\", the config says \"{}\"",
                kind.as_str(),
                config.kind.as_str()
            );
        }
    }
    if let Some(seeds) = args.seeds {
        if seeds == 0 || u64::from(seeds) > SEED_STRIDE {
            bail!("--seeds must lie in 1..={SEED_STRIDE}");
        }
        config.seeds = seeds;
    }
    if !args.snapshot_at.is_empty() {
        config.snapshot_at.extend(args.snapshot_at);
        config.snapshot_at.sort_unstable();
        config.snapshot_at.dedup();
    }
    let out = resolve_out(args.out, &config, &args.config);
    let manifest = run_experiment(
        &config,
        &RunOptions {
            out: out.clone(),
            threads: args.threads,
            resume: args.resume,
            multi_cell,
        },
    )?;
    println!(
        "{} completed run(s); results under {}",
        manifest.completed_keys().count(),
        out.display()
    );
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let snapshot = read_snapshot(&args.snapshot)
        .with_context(|| format!("reading {}", args.snapshot.display()))?;
    let n_states = states_for_strategy_count(snapshot.num_strategies())?;
    let probs = if args.state_probs.is_empty() {
        vec![1.0 / n_states as f64; n_states]
    } else if args.state_probs.len() == n_states {
        args.state_probs.clone()
    } else {
        bail!(
            "snapshot plays a {n_states}-state game but --state-probs has {} entries",
            args.state_probs.len()
        );
    };
    let game = Game::new(GameSpec::new(n_states, probs, DEFAULT_SUCCESS_PAYOFF)?)?;
    let analysis = analyze_snapshot(&snapshot, game, args.threshold, args.purity)?;

    println!(
        "{} agents, {} strategies, round {}",
        snapshot.n_agents(),
        snapshot.num_strategies(),
        snapshot.round
    );
    for row in &analysis.stats.groups {
        println!(
            "group {}: {:<24} size {:>3}  bipartite {:<5}  MI(signal;action) {:.4}  MI(signal;state) {:.4}",
            row.group,
            row.label.describe(&analysis.game),
            row.size,
            row.bipartite,
            row.mi.signal_action,
            row.mi.signal_state,
        );
    }
    let shares = analysis.stats.type_shares;
    println!(
        "agent shares: homogeneous {:.3}, hybrid {:.3}, pooling {:.3}, mixed {:.3}",
        shares.homogeneous, shares.hybrid, shares.pooling, shares.mixed
    );
    let n = snapshot.n_agents() as f64;
    println!(
        "mean preferred-strategy share {:.4}, mean complementary-link share {:.4}",
        analysis.stats.agents.iter().map(|a| a.preferred_share).sum::<f64>() / n,
        analysis.stats.agents.iter().map(|a| a.complementary_share).sum::<f64>() / n,
    );
    if let Some(out) = args.out {
        std::fs::create_dir_all(&out)?;
        let files = write_analysis_artifacts(0, 0, &analysis, std::path::Path::new(""), &out)?;
        println!("wrote {} table(s) under {}", files.len(), out.display());
    }
    Ok(())
}
