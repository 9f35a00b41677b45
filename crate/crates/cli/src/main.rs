//! `rough-manifold` command-line driver.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use commands::{Constants, SeedRecord};
use config::{ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "rough-manifold", version, about = "Random center manifolds of rough differential equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample fractional Brownian motion on [0, 1].
    SampleFbm(Common),
    /// Lift a two-sided fBm sample to a rough path and check Chen's relation.
    Lift(Common),
    /// Solve the RDE on [0, t_end].
    SolveRde(Common),
    /// Build the center-manifold chart at time zero.
    CenterManifold(Common),
    /// Check invariance of a chart written by `center-manifold`.
    VerifyInvariance {
        #[arg(long)]
        chart: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compute the splitting and the gap constant of a matrix.
    GapCheck {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare the flow with its cocycle decomposition.
    CocycleCheck(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated seed list replacing `noise.seeds`.
    #[arg(long, value_delimiter = ',', alias = "seed")]
    seeds: Option<Vec<u64>>,
    /// Grid mesh, a power of two such as 0.00390625.
    #[arg(long)]
    mesh: Option<f64>,
    #[arg(long)]
    levy_level: Option<u32>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    tail_depth: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    hurst: Option<f64>,
    /// Noise dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Two-sided paths live on [-horizon, horizon].
    #[arg(long)]
    horizon: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            seeds: self.seeds.clone(),
            mesh: self.mesh,
            levy_level: self.levy_level,
            window: self.window,
            tail_depth: self.tail_depth,
            tol: self.tol,
            hurst: self.hurst,
            dim: self.dim,
            horizon: self.horizon,
        })?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct RunRecord {
    subcommand: String,
    config_hash: String,
    config: serde_json::Value,
    constants: Constants,
    seeds: Vec<SeedRecord>,
    diagnostics: serde_json::Value,
    artifacts: Vec<String>,
    pass: bool,
}

fn hash_hex(value: &serde_json::Value) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_string(value)?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn write_record(out: &Path, record: &RunRecord) -> Result<()> {
    let text = serde_json::to_string_pretty(record)? + "\n";
    std::fs::write(out.join("run_record.json"), text).context("writing run_record.json")
}

type SeedFn = fn(&ExperimentConfig, u64, &Path) -> Result<SeedRecord>;

/// Run `f` for every seed in parallel; records keep the seed order.
fn per_seed(name: &str, cfg: &ExperimentConfig, out: &Path, f: SeedFn) -> Result<bool> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let seeds: Vec<SeedRecord> =
        cfg.noise.seeds.par_iter().map(|&s| f(cfg, s, out).with_context(|| format!("seed {s}"))).collect::<Result<_>>()?;
    let config = serde_json::to_value(cfg)?;
    let pass = seeds.iter().all(|s| s.pass);
    let record = RunRecord {
        subcommand: name.to_string(),
        config_hash: hash_hex(&config)?,
        config,
        constants: seeds.first().map(|s| s.constants.clone()).unwrap_or_default(),
        artifacts: seeds.iter().flat_map(|s| s.artifacts.iter().cloned()).collect(),
        seeds,
        diagnostics: serde_json::Value::Null,
        pass,
    };
    write_record(out, &record)?;
    Ok(pass)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SampleFbm(c) => per_seed("sample-fbm", &c.load()?, &c.out, commands::sample_fbm_cmd),
        Command::Lift(c) => per_seed("lift", &c.load()?, &c.out, commands::lift_cmd),
        Command::SolveRde(c) => per_seed("solve-rde", &c.load()?, &c.out, commands::solve_rde_cmd),
        Command::CenterManifold(c) => per_seed("center-manifold", &c.load()?, &c.out, commands::center_manifold_cmd),
        Command::CocycleCheck(c) => per_seed("cocycle-check", &c.load()?, &c.out, commands::cocycle_cmd),
        Command::VerifyInvariance { chart, steps, out } => {
            let file = commands::load_chart(&chart)?;
            let mut cfg = file.config;
            cfg.noise.seeds = vec![file.seed];
            if let Some(s) = steps {
                cfg.run.steps = s;
            }
            per_seed("verify-invariance", &cfg, &out, commands::verify_invariance_cmd)
        }
        Command::GapCheck { matrix, out } => {
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let text = std::fs::read_to_string(&matrix).with_context(|| format!("reading {}", matrix.display()))?;
            let m: commands::MatrixFile =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", matrix.display()))?;
            let (pass, report, constants, artifact) = commands::gap_check_cmd(&m, &out)?;
            let config = serde_json::to_value(&m)?;
            let record = RunRecord {
                subcommand: "gap-check".into(),
                config_hash: hash_hex(&config)?,
                config,
                constants,
                seeds: Vec::new(),
                diagnostics: serde_json::to_value(&report)?,
                artifacts: vec![artifact],
                pass,
            };
            write_record(&out, &record)?;
            Ok(pass)
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ROUGH_MANIFOLD_THREADS") {
        let n: usize = v.parse().with_context(|| format!("ROUGH_MANIFOLD_THREADS={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| run(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
