//! `robustdense synth|corrupt|train|eval|sweep|report`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::config::TrainConfig;
use super::eval::{evaluate_sweep_files, RobustnessReport};
use super::report::{emit_report, load_report, ComparisonTable};
use super::train::train_on_dataset;
use crate::corruption::{corrupt_with_mask, CorruptionSpec, Region};
use crate::data::{synth_dataset, write_dataset, write_manifest, write_tile, Dataset, DatasetManifest};
use crate::error::{validation_err, Error, Result};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "ROBUSTDENSE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "robustdense", version, about = "Robust multimodal segmentation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Corrupt every tile of a dataset.
    Corrupt(CorruptArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(EvalArgs),
    /// Evaluate a checkpoint at several damage fractions and emit a report.
    Sweep(SweepArgs),
    /// Re-render a report, or render a comparison table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 16)]
    pub tiles: usize,
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// TOML or JSON file with further corruption settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// TOML or JSON training config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Drop the DSM branch and its fusion block.
    #[arg(long)]
    pub no_semix: bool,
    /// Replace fusing Up blocks by plain pixel shuffle of concatenated features.
    #[arg(long)]
    pub plain_pixelshuffle: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub patch: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.5")]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub patch: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A `report.json` written by `sweep`.
    #[arg(long, conflicts_with = "table")]
    pub input: Option<PathBuf>,
    /// A comparison-table JSON to render as Markdown.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct CorruptionSidecar<'a> {
    spec: &'a CorruptionSpec,
    tiles: Vec<TileDamage>,
}

#[derive(Serialize)]
struct TileDamage {
    tile_id: String,
    damaged_fraction: f64,
    regions: Vec<Region>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn load_corruption_spec(path: &Path) -> Result<CorruptionSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| Error::Toml(e.to_string()))
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let d = synth_dataset(a.tiles, a.size, a.seed)?;
    let path = write_dataset(&a.out, &d.manifest, &d.tiles)?;
    println!("{}", path.display());
    Ok(())
}

fn corrupt_cmd(a: &CorruptArgs) -> Result<()> {
    let mut spec = match &a.config {
        Some(p) => load_corruption_spec(p)?,
        None => CorruptionSpec::default(),
    };
    spec.damage_fraction = a.fraction;
    spec.seed = a.seed;
    spec.validate()?;
    let ds = Dataset::open(&a.manifest)?;
    let mut tiles = Vec::new();
    for r in &ds.manifest.records {
        let (out, mask) = corrupt_with_mask(&ds.load_tile(r)?, &spec)?;
        write_tile(&a.out, r, &out)?;
        tiles.push(TileDamage {
            tile_id: r.tile_id.clone(),
            damaged_fraction: mask.fraction(),
            regions: mask.regions,
        });
    }
    let manifest = DatasetManifest {
        dataset_id: format!("{}-corrupt{}-seed{}", ds.manifest.dataset_id, a.fraction, a.seed),
        ..ds.manifest.clone()
    };
    let path = write_manifest(&a.out, &manifest)?;
    write_json(&a.out.join("corruption.json"), &CorruptionSidecar { spec: &spec, tiles })?;
    println!("{}", path.display());
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.max_steps {
        cfg.max_steps = n;
    }
    if a.no_semix {
        cfg.model.semix = false;
    }
    if a.plain_pixelshuffle {
        cfg.model.up_fusion = false;
    }
    let ds = Dataset::open(&a.manifest)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    fs::write(a.out.join("config.toml"), cfg.to_toml()?).map_err(|e| Error::io(&a.out, e))?;
    let outcome = train_on_dataset::<f32>(&cfg, &ds, Some(&a.out))?;
    if let Some(p) = outcome.checkpoint {
        println!("{}", p.display());
    }
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let report = evaluate_sweep_files(&a.checkpoint, &a.manifest, &[a.fraction], a.seed, a.patch)?;
    let path = a.out.join("metrics.json");
    write_json(&path, &report.rows[0])?;
    let r = &report.rows[0];
    println!("OA {:.4}  mean F1 {:.4}", r.oa, r.mean_f1);
    Ok(())
}

fn sweep_cmd(a: &SweepArgs) -> Result<()> {
    let report = evaluate_sweep_files(&a.checkpoint, &a.manifest, &a.fractions, a.seed, a.patch)?;
    print_report(&report);
    for p in emit_report(&report, &a.out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn print_report(report: &RobustnessReport) {
    for r in &report.rows {
        println!("fraction {:.2}: OA {:.4}  mean F1 {:.4}", r.damage_fraction, r.oa, r.mean_f1);
    }
}

fn report_cmd(a: &ReportArgs) -> Result<()> {
    match (&a.input, &a.table) {
        (Some(input), None) => {
            let report = load_report(input)?;
            for p in emit_report(&report, &a.out)? {
                println!("{}", p.display());
            }
        }
        (None, Some(table)) => {
            let text = fs::read_to_string(table).map_err(|e| Error::io(table, e))?;
            let t: ComparisonTable = serde_json::from_str(&text)?;
            let md = t.render()?;
            fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
            let path = a.out.join("table.md");
            fs::write(&path, &md).map_err(|e| Error::io(&path, e))?;
            print!("{md}");
        }
        _ => return Err(validation_err!("report needs exactly one of --input or --table")),
    }
    Ok(())
}

/// Sizes the global rayon pool from [`THREADS_ENV`] when set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .parse()
        .map_err(|_| validation_err!("{THREADS_ENV}={v} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| validation_err!("{e}"))
}

pub fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Corrupt(a) => corrupt_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
