//! Command-line front end: sessions, scene tooling, map generation, bag
//! tooling, and beam-prediction evaluation, all driven by one flat
//! dotted-key config file.
//!
//! Every subcommand is headless and deterministic: the same config and
//! seed produce the same bytes on every run. Exit code 0 iff success.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use isacsim::beampred::{self, DEFAULT_KS};
use isacsim::bus::bag::{bag_inspect, read_bag, BagSummary};
use isacsim::ckm::{generate_ckm, write_outputs};
use isacsim::config::Config;
use isacsim::raytracer::RtScene;
use isacsim::scene::{export_assets, MaterialLibrary};
use isacsim::session::{self, Mode};

#[derive(Parser)]
#[command(name = "isacsim", version, about = "Deterministic multimodal ISAC simulation engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a session from a config file and record every topic to a bag.
    Run {
        /// Session config (flat `section.key = value` text file).
        config: PathBuf,
        /// Republish platform topics from this bag instead of walking the
        /// trajectory; channel outputs are recomputed.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Output bag (default `<session.output_dir>/session.bag`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scene construction and decimation.
    #[command(subcommand)]
    Scene(SceneCmd),
    /// Channel-knowledge-map generation.
    #[command(subcommand)]
    Ckm(CkmCmd),
    /// Bag inspection and replay.
    #[command(subcommand)]
    Bag(BagCmd),
    /// Beam-prediction evaluation.
    #[command(subcommand)]
    Beampred(BeampredCmd),
}

#[derive(Subcommand)]
enum SceneCmd {
    /// Extrude footprints, assign materials, and write both the
    /// high-fidelity sensing asset and the decimated propagation mesh.
    Build {
        config: PathBuf,
        /// Output directory (default `<session.output_dir>/scene`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Decimate the scene and report the triangle reduction.
    Simplify {
        config: PathBuf,
        /// Output directory (default `<session.output_dir>/scene`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CkmCmd {
    /// Grid-scan the configured transmitter and write one raster plus one
    /// heatmap per layer, and the config digest.
    Generate {
        config: PathBuf,
        /// Output directory (default `<session.output_dir>/ckm`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BagCmd {
    /// Print topics, schemas, record counts, and the stamp span.
    Inspect { bag: PathBuf },
    /// Replay a recorded session and record the result to a new bag.
    Replay {
        config: PathBuf,
        bag: PathBuf,
        /// Output bag (default `<session.output_dir>/replayed.bag`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BeampredCmd {
    /// Build a position->beam dataset, split it, and report top-k accuracy.
    Eval {
        config: PathBuf,
        /// Take samples from this session bag (GNSS joined with link KPIs)
        /// instead of scanning a map.
        #[arg(long)]
        bag: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli.command) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { config, replay, out } => cmd_run(&config, replay, out),
        Command::Scene(SceneCmd::Build { config, out_dir }) => cmd_scene(&config, out_dir, false),
        Command::Scene(SceneCmd::Simplify { config, out_dir }) => cmd_scene(&config, out_dir, true),
        Command::Ckm(CkmCmd::Generate { config, out_dir }) => cmd_ckm(&config, out_dir),
        Command::Bag(BagCmd::Inspect { bag }) => cmd_inspect(&bag),
        Command::Bag(BagCmd::Replay { config, bag, out }) => cmd_run(&config, Some(bag), out),
        Command::Beampred(BeampredCmd::Eval { config, bag }) => cmd_beampred(&config, bag),
    }
}

fn load_config(path: &Path) -> Result<Config> {
    Config::load(path).with_context(|| format!("loading config {}", path.display()))
}

/// Resolves an output location: explicit flag, else a name under the
/// config's `session.output_dir` (itself relative to the config file).
fn resolve_out(cfg: &Config, explicit: Option<PathBuf>, name: &str) -> Result<PathBuf> {
    let path = match explicit {
        Some(p) => p,
        None => cfg.path_or("session.output_dir", "out").join(name),
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    Ok(path)
}

fn cmd_run(config: &Path, replay: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config)?;
    let (mode, default_name) = match replay {
        Some(bag) => (Mode::Replay(bag), "replayed.bag"),
        None => (Mode::Online, "session.bag"),
    };
    let out = resolve_out(&cfg, out, default_name)?;
    let report = session::run_session(&cfg, mode, &out)?;
    println!("wrote {}", report.bag_path.display());
    println!("ticks: {}", report.ticks);
    print_summary(&report.summary);
    Ok(())
}

fn cmd_inspect(bag: &Path) -> Result<()> {
    let summary =
        bag_inspect(bag).with_context(|| format!("inspecting {}", bag.display()))?;
    println!("bag: {}", bag.display());
    print_summary(&summary);
    Ok(())
}

fn print_summary(summary: &BagSummary) {
    println!("version: {}", summary.version);
    println!("records: {}", summary.record_count);
    if let (Some(first), Some(last)) = (summary.first_stamp, summary.last_stamp) {
        println!("span: {first} .. {last}");
    }
    let width = summary
        .topics
        .iter()
        .map(|(name, _, _)| name.len())
        .max()
        .unwrap_or(0);
    let schema_width = summary
        .topics
        .iter()
        .map(|(_, schema, _)| schema.len())
        .max()
        .unwrap_or(0);
    println!("topics:");
    for (name, schema, count) in &summary.topics {
        println!("  {name:width$}  {schema:schema_width$}  {count}");
    }
}

fn cmd_scene(config: &Path, out_dir: Option<PathBuf>, report_reduction: bool) -> Result<()> {
    let cfg = load_config(config)?;
    let dir = match out_dir {
        Some(d) => d,
        None => cfg.path_or("session.output_dir", "out").join("scene"),
    };
    let setup = session::scene_setup(&cfg)?;
    let (asset, rtmesh) = session::build_scene(&setup)?;
    let before = asset.mesh.triangles.len();
    let after = rtmesh.mesh.triangles.len();
    let (asset_path, rt_path) = export_assets(&asset, &rtmesh, &dir)
        .with_context(|| format!("writing scene assets to {}", dir.display()))?;
    println!(
        "scene: {} objects, {} vertices",
        asset.objects.len(),
        asset.mesh.vertices.len()
    );
    println!(
        "triangles: {} -> {} ({:.1}x reduction)",
        before,
        after,
        before as f64 / after as f64
    );
    if report_reduction {
        println!("wrote {}", rt_path.display());
    } else {
        println!("wrote {}", asset_path.display());
        println!("wrote {}", rt_path.display());
    }
    Ok(())
}

fn cmd_ckm(config: &Path, out_dir: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config)?;
    let dir = match out_dir {
        Some(d) => d,
        None => cfg.path_or("session.output_dir", "out").join("ckm"),
    };
    let (_, rtmesh) = session::build_scene(&session::scene_setup(&cfg)?)?;
    let scene = RtScene::new(&rtmesh, &MaterialLibrary::standard())?;
    let job = session::ckm_job(&cfg)?;
    println!(
        "grid: {}x{} cells of {} m at height {} m",
        job.grid.n_x, job.grid.n_y, job.grid.cell_m, job.grid.rx_height_m
    );
    println!("scene: {} triangles", scene.mesh.triangles.len());
    let ckm = generate_ckm(&scene, &job)?;
    write_outputs(&ckm, &dir).with_context(|| format!("writing map to {}", dir.display()))?;
    for layer in &ckm.layers {
        println!("wrote {0}/{1}.ckm {0}/{1}.ppm", dir.display(), layer.name);
    }
    println!("digest: {}", ckm.digest);
    Ok(())
}

fn cmd_beampred(config: &Path, bag: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config)?;
    let samples = match bag {
        Some(path) => {
            let bag = read_bag(&path).with_context(|| format!("reading {}", path.display()))?;
            let slop_ms = cfg.f64_or("beampred.slop_ms", 50.0)?;
            let samples = beampred::build_dataset(&bag, (slop_ms * 1e6).round() as u64, None)?;
            println!("dataset: {} samples from {}", samples.len(), path.display());
            samples
        }
        None => {
            let (_, rtmesh) = session::build_scene(&session::scene_setup(&cfg)?)?;
            let scene = RtScene::new(&rtmesh, &MaterialLibrary::standard())?;
            let ckm = generate_ckm(&scene, &session::ckm_job(&cfg)?)?;
            let samples = beampred::dataset_from_ckm(&ckm, None);
            println!("dataset: {} samples from a grid scan", samples.len());
            samples
        }
    };
    let train_fraction = cfg.f64_or("beampred.train_fraction", 0.8)?;
    let split_seed = cfg.u64_or("beampred.split_seed", 1)?;
    let neighbors = cfg.usize_or("beampred.k", 5)?;
    let (train, test) = beampred::split_dataset(&samples, train_fraction, split_seed);
    println!("split: {} train / {} test (seed {split_seed})", train.len(), test.len());
    let report = beampred::evaluate_topk(&train, &test, neighbors, &DEFAULT_KS)?;
    println!("k = {neighbors} nearest neighbors");
    for (k, accuracy) in &report.accuracy {
        println!("top-{k} accuracy: {accuracy:.4}");
    }
    Ok(())
}
