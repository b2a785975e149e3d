//! Command-line driver for the whole pipeline: agent optimization, prototype
//! extraction, game-tree self-play, regret-model training, head-to-head
//! races, and report aggregation. Every stage is deterministic in its seed
//! and writes a `config.json` capturing the exact flags used.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use osracer_core::evo::{optimize, read_archive, read_prototypes, select_prototypes, write_archive, write_history, write_prototypes, OptimizeConfig};
use osracer_core::game::{build_dataset, read_dataset, write_dataset, write_utility_table, GameConfig};
use osracer_core::harness::{build_report, read_race_log, run_match, write_race_log, write_report, EgoKind, MatchAssets, MatchConfig, OpponentKind};
use osracer_core::objectives::{make_scenario_set, write_scenario_set};
use osracer_core::regret_model::{read_model, train, write_loss_curve, write_model, TrainConfig};
use osracer_core::sim::VehicleParams;
use osracer_core::track::load_track;
use osracer_core::util::sub_seed;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "osracer", version, about = "Two-car objective-space racing laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve agent parameters on a map, logging every evaluated agent
    Optimize(OptimizeArgs),
    /// Extract the near-optimal set and two disjoint diverse prototype subsets
    Prototypes(PrototypesArgs),
    /// Exhaustive two-player game-tree self-play producing the regret dataset
    Selfplay(SelfplayArgs),
    /// Train the regret-prediction model on a self-play dataset
    Train(TrainArgs),
    /// Race an ego arm against an opponent kind over a start/pairing grid
    Race(RaceArgs),
    /// Aggregate two race logs into a paired-comparison report (JSON + CSV)
    Report(ReportArgs),
}

#[derive(clap::Args)]
struct OptimizeArgs {
    /// track directory (map.png, map.txt, raceline.csv)
    #[arg(long)]
    map: PathBuf,
    #[arg(long, default_value_t = 30)]
    generations: usize,
    /// population size per generation
    #[arg(long, default_value_t = 20)]
    pop: usize,
    /// number of evaluation scenarios (start line + random opponent pairs)
    #[arg(long, default_value_t = 24)]
    scenarios: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct PrototypesArgs {
    /// exploration archive CSV from `optimize`
    #[arg(long)]
    archive: PathBuf,
    /// near-optimal radius in objective units
    #[arg(long, default_value_t = 0.3)]
    d_near: f64,
    /// size of each diverse subset
    #[arg(long, default_value_t = 4)]
    n_dpp: usize,
    /// similarity kernel bandwidth in objective units
    #[arg(long, default_value_t = 0.5)]
    bandwidth: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct SelfplayArgs {
    #[arg(long)]
    map: PathBuf,
    /// prototypes CSV from `prototypes`
    #[arg(long)]
    prototypes: PathBuf,
    /// objective-space moves per player per game
    #[arg(long, default_value_t = 2)]
    moves: usize,
    /// seconds per game segment
    #[arg(long, default_value_t = 8.0)]
    segment_s: f64,
    /// expected pairing count (|subset 1| × |subset 2|); guards against a
    /// mismatched prototype file
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// dataset CSV from `selfplay`
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long, default_value_t = 1024)]
    batch: usize,
    /// initial learning rate
    #[arg(long, default_value_t = 0.005)]
    lr: f64,
    #[arg(long, default_value_t = 2048)]
    hidden: usize,
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EgoArg {
    /// online objective-space planning with the trained regret model
    Gt,
    /// starting prototype weights held fixed all race
    Fixed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OpponentArg {
    /// prototypes from the second diverse subset
    Fixed,
    /// agents drawn from the exploration archive
    Random,
    /// the reactive lane-switching baseline
    Laneswitch,
}

#[derive(clap::Args)]
struct RaceArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, value_enum)]
    ego: EgoArg,
    #[arg(long, value_enum)]
    opponent: OpponentArg,
    /// randomized start lines; each is raced from both sides
    #[arg(long, default_value_t = 5)]
    starts: usize,
    /// objective-space moves per race (race time = (moves+1) segments)
    #[arg(long, default_value_t = 2)]
    moves: usize,
    #[arg(long, default_value_t = 8.0)]
    segment_s: f64,
    #[arg(long)]
    prototypes: PathBuf,
    /// trained model file (required for --ego gt)
    #[arg(long)]
    model: Option<PathBuf>,
    /// exploration archive CSV (required for --opponent random)
    #[arg(long)]
    archive: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ReportArgs {
    /// race log of the first arm
    #[arg(long)]
    a: PathBuf,
    /// race log of the second arm
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value = "game_theoretic")]
    label_a: String,
    #[arg(long, default_value = "fixed_weights")]
    label_b: String,
    #[arg(long)]
    out: PathBuf,
}

fn write_config(dir: &Path, value: serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    std::fs::write(dir.join("config.json"), text)?;
    Ok(())
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<()> {
    let track = load_track(&args.map).context("loading track")?;
    std::fs::create_dir_all(&args.out)?;
    let cfg = OptimizeConfig {
        generations: args.generations,
        lambda: args.pop,
        scenario_count: args.scenarios,
        seed: args.seed,
        ..OptimizeConfig::default()
    };
    let out = optimize(&track, &cfg)?;
    write_archive(&args.out.join("archive.csv"), &out.archive)?;
    write_history(&args.out.join("history.csv"), &out.history)?;
    write_scenario_set(&args.out.join("scenarios.csv"), &out.scenarios, &out.opponents)?;
    write_config(
        &args.out,
        serde_json::json!({
            "command": "optimize",
            "map": track.id,
            "generations": args.generations,
            "pop": args.pop,
            "scenarios": args.scenarios,
            "seed": args.seed,
        }),
    )?;
    let front = out.archive.entries.len();
    log::info!("explored {} agents, front size {front}", out.archive.all_explored.len());
    println!("optimize: {} agents explored, {front} on the front -> {}", out.archive.all_explored.len(), args.out.display());
    Ok(())
}

fn cmd_prototypes(args: &PrototypesArgs) -> Result<()> {
    let archive = read_archive(&args.archive).context("reading archive")?;
    std::fs::create_dir_all(&args.out)?;
    let sets = select_prototypes(&archive, args.d_near, args.n_dpp, args.bandwidth, args.seed)?;
    write_prototypes(&args.out.join("prototypes.csv"), &sets)?;
    write_config(
        &args.out,
        serde_json::json!({
            "command": "prototypes",
            "archive": args.archive.file_name().map(|n| n.to_string_lossy().into_owned()),
            "d_near": args.d_near,
            "n_dpp": args.n_dpp,
            "bandwidth": args.bandwidth,
            "seed": args.seed,
        }),
    )?;
    println!(
        "prototypes: {} near-optimal, subsets {}+{} -> {}",
        sets.near_optimal.len(),
        sets.dpp1.len(),
        sets.dpp2.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_selfplay(args: &SelfplayArgs) -> Result<()> {
    let track = load_track(&args.map)?;
    let sets = read_prototypes(&args.prototypes).context("reading prototypes")?;
    let dpp1 = sets.dpp1_prototypes();
    let dpp2 = sets.dpp2_prototypes();
    let grid = dpp1.len() * dpp2.len();
    if let Some(pairs) = args.pairs {
        if pairs != grid {
            bail!("--pairs {pairs} does not match the {}x{} = {grid} self-play grid", dpp1.len(), dpp2.len());
        }
    }
    std::fs::create_dir_all(&args.out)?;
    let (scenarios, _) = make_scenario_set(&track, &VehicleParams::default(), grid, sub_seed(args.seed, 0))?;
    let cfg = GameConfig { max_moves: args.moves, segment_s: args.segment_s, ..GameConfig::default() };
    let build = build_dataset(&dpp1, &dpp2, &sets.near_optimal, &scenarios, &track, &cfg)?;
    write_dataset(&args.out.join("dataset.csv"), &build.samples)?;
    let tables_dir = args.out.join("tables");
    std::fs::create_dir_all(&tables_dir)?;
    let mut games = 0;
    for (i, j, table) in &build.tables {
        games += table.n_ego_seq() * table.n_opp_seq;
        write_utility_table(&tables_dir.join(format!("pair_{i}_{j}.csv")), table)?;
    }
    write_config(
        &args.out,
        serde_json::json!({
            "command": "selfplay",
            "map": track.id,
            "moves": args.moves,
            "segment_s": args.segment_s,
            "pairs": grid,
            "seed": args.seed,
        }),
    )?;
    println!("selfplay: {grid} pairs, {games} games, {} dataset rows -> {}", build.samples.len(), args.out.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let dataset = read_dataset(&args.dataset).context("reading dataset")?;
    std::fs::create_dir_all(&args.out)?;
    let cfg = TrainConfig {
        n_hidden: args.hidden,
        lr0: args.lr,
        batch: args.batch,
        epochs: args.epochs,
        val_fraction: args.val_fraction,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let result = train(&dataset, &cfg)?;
    write_model(&args.out.join("model.txt"), &result.params)?;
    write_loss_curve(&args.out.join("loss_curve.csv"), &result.curve)?;
    write_config(
        &args.out,
        serde_json::json!({
            "command": "train",
            "dataset_rows": dataset.len(),
            "epochs": args.epochs,
            "batch": args.batch,
            "lr": args.lr,
            "hidden": args.hidden,
            "val_fraction": args.val_fraction,
            "seed": args.seed,
        }),
    )?;
    println!(
        "train: {} rows, best validation L1 {:.6} at epoch {} -> {}",
        dataset.len(),
        result.best_val,
        result.best_epoch,
        args.out.display()
    );
    Ok(())
}

fn cmd_race(args: &RaceArgs) -> Result<()> {
    let track = load_track(&args.map)?;
    let sets = read_prototypes(&args.prototypes)?;
    let model = match (args.ego, &args.model) {
        (EgoArg::Gt, Some(p)) => Some(read_model(p).context("reading model")?),
        (EgoArg::Gt, None) => bail!("--ego gt requires --model"),
        (EgoArg::Fixed, _) => None,
    };
    let archive = match (args.opponent, &args.archive) {
        (OpponentArg::Random, Some(p)) => Some(read_archive(p)?),
        (OpponentArg::Random, None) => bail!("--opponent random requires --archive"),
        _ => None,
    };
    std::fs::create_dir_all(&args.out)?;
    let cfg = MatchConfig {
        ego: match args.ego {
            EgoArg::Gt => EgoKind::GameTheoretic,
            EgoArg::Fixed => EgoKind::FixedWeights,
        },
        opponent: match args.opponent {
            OpponentArg::Fixed => OpponentKind::FixedDpp2,
            OpponentArg::Random => OpponentKind::RandomExplored,
            OpponentArg::Laneswitch => OpponentKind::LaneSwitcher,
        },
        starts: args.starts,
        alternation: true,
        moves: args.moves,
        segment_s: args.segment_s,
        d_move: 1.0,
        seed: args.seed,
    };
    let assets = MatchAssets {
        track: &track,
        snap_set: &sets.near_optimal,
        ego_start_idx: &sets.dpp1,
        opp_idx: &sets.dpp2,
        model: model.as_ref(),
        explored: archive.as_ref().map(|a| a.all_explored.as_slice()).unwrap_or(&[]),
    };
    let records = run_match(&cfg, &assets)?;
    write_race_log(&args.out.join("races.csv"), &records)?;
    write_config(
        &args.out,
        serde_json::json!({
            "command": "race",
            "map": track.id,
            "ego": match args.ego { EgoArg::Gt => "gt", EgoArg::Fixed => "fixed" },
            "opponent": match args.opponent {
                OpponentArg::Fixed => "fixed",
                OpponentArg::Random => "random",
                OpponentArg::Laneswitch => "laneswitch",
            },
            "starts": args.starts,
            "moves": args.moves,
            "segment_s": args.segment_s,
            "seed": args.seed,
        }),
    )?;
    let credit: f64 = records.iter().map(|r| r.win).sum();
    println!("race: {} races, ego credit {credit} -> {}", records.len(), args.out.display());
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let a = read_race_log(&args.a).context("reading race log a")?;
    let b = read_race_log(&args.b).context("reading race log b")?;
    let report = build_report(&args.label_a, &a, &args.label_b, &b)?;
    std::fs::create_dir_all(&args.out)?;
    write_report(&args.out.join("report.json"), &report)?;
    // plot-ready per-pairing table
    let mut w = csv::Writer::from_path(args.out.join("report.csv"))?;
    w.write_record(["pairing", &format!("win_rate_{}", report.arm_a.label), &format!("win_rate_{}", report.arm_b.label), "diff"])?;
    for (i, (ra, rb)) in report.arm_a.pairing_win_rates.iter().zip(&report.arm_b.pairing_win_rates).enumerate() {
        w.write_record(&[i.to_string(), ra.to_string(), rb.to_string(), (ra - rb).to_string()])?;
    }
    w.flush()?;
    write_config(
        &args.out,
        serde_json::json!({
            "command": "report",
            "label_a": args.label_a,
            "label_b": args.label_b,
        }),
    )?;
    println!(
        "report: {} {:.4} vs {} {:.4}, t {:?}, p {:.6} -> {}",
        report.arm_a.label,
        report.arm_a.win_rate_mean,
        report.arm_b.label,
        report.arm_b.win_rate_mean,
        report.t,
        report.p,
        args.out.display()
    );
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Optimize(a) => cmd_optimize(a),
        Cmd::Prototypes(a) => cmd_prototypes(a),
        Cmd::Selfplay(a) => cmd_selfplay(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Race(a) => cmd_race(a),
        Cmd::Report(a) => cmd_report(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
