use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stereogen::dvg::SceneSpec;
use stereogen_cli::commands::{self, ComposeMode};
use stereogen_cli::config::{MetricsConfig, PipelineConfig};
use stereogen_cli::{selfcheck, with_workers, CliResult, WORKERS_ENV};

#[derive(Debug, Parser)]
#[command(name = "stereogen", version, about = "Stereo video generation toolkit")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a paired-view sample from a monocular clip.
    Generate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Combine a left and a right clip into one viewable clip.
    Compose {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long, value_enum, default_value = "sbs")]
        mode: ComposeMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute quality and consistency metrics.
    Metrics {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in verification suite.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_gradient: f64,
    },
    /// Write a small synthetic input manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        frames: usize,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let g = with_workers(cli.workers, || commands::cmd_generate(&cfg))??;
            let masked: usize = g.diagnostics.iter().map(|d| d.refined_mask_area).sum();
            println!("wrote {} frames to {} ({masked} masked pixels)", g.diagnostics.len(), cfg.output.display());
        }
        Command::Compose { left, right, mode, out } => {
            let clip = with_workers(cli.workers, || commands::cmd_compose(&left, &right, mode, &out))??;
            println!("wrote {} frames to {}", clip.len(), out.display());
        }
        Command::Metrics { config } => {
            let cfg = MetricsConfig::load(&config)?;
            let reports = with_workers(cli.workers, || commands::cmd_metrics(&cfg))??;
            for r in reports {
                match r.mean {
                    Some(m) => println!("{}: {m:.6}", r.metric),
                    None => println!("{}: n/a (all pairs skipped)", r.metric),
                }
            }
        }
        Command::Selfcheck { seed, perturb_gradient } => {
            let opts = selfcheck::Options { seed, perturb_gradient };
            with_workers(cli.workers, || selfcheck::cmd_selfcheck(&opts, &mut io::stdout()))??;
        }
        Command::Synth { out, frames } => {
            let spec = SceneSpec {
                frames,
                ..Default::default()
            };
            commands::write_scene(&out, &spec)?;
            println!("wrote {frames} frames to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
