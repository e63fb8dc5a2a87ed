use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tame::commands::{cmd_gen_synthetic, cmd_pretrain, cmd_run, cmd_verify};
use tame::config::{DatasetSpec, ExperimentSpec, DATA_DIR_ENV};
use tame::{Error, Result};

/// Task-aware multi-expert lifelong learning experiments.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// Flat key = value experiment spec.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single seed, overriding `seeds`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated modes: tame, ae-tame, baseline, ae-baseline, shared-bottom.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Comma-separated similarity metrics: fid, cosine.
    #[arg(long, global = true)]
    metric: Option<String>,
    /// Output root.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `synthetic`, a CIFAR-100 directory/file or a generated task directory.
    /// Defaults to the TAME_DATA_DIR environment variable.
    #[arg(long, global = true)]
    dataset: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pretrain and freeze the expert pool, writing checkpoints.
    Pretrain,
    /// Run the lifelong sequences in every configured mode and metric.
    Run,
    /// Write synthetic tasks as TAMETASK containers.
    GenSynthetic,
    /// Check the byte layout of a dataset and report counts.
    Verify,
}

fn load_spec(cli: &Cli) -> Result<ExperimentSpec> {
    let mut spec = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            ExperimentSpec::parse(&text)?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.seeds = vec![seed];
    }
    let overrides = [("modes", &cli.mode), ("metrics", &cli.metric), ("dataset", &cli.dataset)];
    for (key, value) in overrides {
        if let Some(v) = value {
            spec.set(key, v)?;
        }
    }
    if let Some(out) = &cli.out {
        spec.out = out.clone();
    }
    Ok(spec)
}

fn execute(cli: &Cli) -> Result<i32> {
    let spec = load_spec(cli)?;
    match cli.command {
        Command::Pretrain => {
            let manifest = cmd_pretrain(&spec)?;
            println!("{}", manifest.display());
        }
        Command::Run => {
            let out = cmd_run(&spec)?;
            println!(
                "{} cells computed, {} resumed; events in {}",
                out.computed_cells,
                out.reused_cells,
                out.events.display()
            );
            out.summaries.iter().for_each(|p| println!("{}", p.display()));
        }
        Command::GenSynthetic => {
            let files = cmd_gen_synthetic(&spec)?;
            println!("{} task files under {}", files.len(), spec.out.display());
        }
        Command::Verify => {
            let path = match &spec.dataset {
                DatasetSpec::Path(p) => p.clone(),
                _ => return Err(Error::Config(format!("verify needs --dataset <path> or {DATA_DIR_ENV}"))),
            };
            let report = cmd_verify(&path);
            report.lines.iter().for_each(|l| println!("{l}"));
            return Ok(if report.ok { 0 } else { 2 });
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
