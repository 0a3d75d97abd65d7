use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use rfield_cli::commands;
use rfield_cli::config::{Config, ConfigFlags};
use rfield_cli::InputError;

/// Renderability fields, pseudo-view sampling, point projection and evaluation.
#[derive(Parser)]
#[command(name = "rfield", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat TOML file with any of the configuration keys.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the resolved configuration to PATH and exit.
    #[arg(long, alias = "dump_config", value_name = "PATH")]
    dump_config: Option<PathBuf>,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Subcommand)]
enum Command {
    /// Score every candidate view on the grid.
    Field {
        #[command(flatten)]
        common: Common,
    },
    /// Pick pseudo-views whose renderability lies in the band.
    Sample {
        /// Field export to read [default: <out>/field.jsonl].
        #[arg(long)]
        field: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Render point projections at every pose of a camera manifest.
    Project {
        /// Poses to render [default: <out>/pseudo_views.json].
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Voxel sizes (meters) for a resolution sweep, comma-separated.
        #[arg(long, value_delimiter = ',')]
        cells: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Projection / ground-truth pairs at every source view.
    Pairs {
        #[command(flatten)]
        common: Common,
    },
    /// PSNR, SSIM, SDP and histogram over a pairs CSV.
    Eval {
        /// `view_id,rendered,ground_truth` CSV [default: <out>/pairs/pairs.csv].
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Farthest-point train/test split over camera centers.
    Split {
        /// Number of test views.
        #[arg(long, conflicts_with = "ratio")]
        k: Option<usize>,
        /// Test-to-train ratio such as 1:7 [default when --k is absent].
        #[arg(long)]
        ratio: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a procedural test scene into the output directory.
    Synth {
        /// room, sealed-box or facing-wall.
        #[arg(long, default_value = "room")]
        preset: String,
        /// Camera count for the room preset.
        #[arg(long, default_value_t = 8)]
        views: usize,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Field { common }
            | Command::Sample { common, .. }
            | Command::Project { common, .. }
            | Command::Pairs { common }
            | Command::Eval { common, .. }
            | Command::Split { common, .. }
            | Command::Synth { common, .. } => common,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = cli.command.common();
    let config = Config::resolve(common.config.as_deref(), &common.flags)?;
    if let Some(path) = &common.dump_config {
        std::fs::write(path, config.to_toml()).with_context(|| format!("cannot write {}", path.display()))?;
        log::info!("configuration written to {}", path.display());
        return Ok(());
    }
    if config.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global()
            .context("cannot start worker threads")?;
    }
    let out = config.out.clone();
    match &cli.command {
        Command::Field { .. } => {
            commands::field(&config)?;
        }
        Command::Sample { field, .. } => {
            commands::sample(&config, &field.clone().unwrap_or_else(|| out.join("field.jsonl")))?;
        }
        Command::Project { manifest, cells, .. } => {
            let manifest = manifest.clone().unwrap_or_else(|| out.join("pseudo_views.json"));
            commands::project(&config, &manifest, cells.as_deref())?;
        }
        Command::Pairs { .. } => {
            commands::pairs(&config)?;
        }
        Command::Eval { pairs, .. } => {
            commands::eval(
                &config,
                &pairs.clone().unwrap_or_else(|| out.join("pairs").join("pairs.csv")),
            )?;
        }
        Command::Split { k, ratio, .. } => {
            commands::split(&config, *k, ratio.as_deref())?;
        }
        Command::Synth { preset, views, .. } => {
            commands::synth(&config, preset, *views)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
