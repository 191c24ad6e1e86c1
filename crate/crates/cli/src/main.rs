use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pinnlab::pinnloss::Weighting;
use pinnlab::scenarios::{Mode, Tag};
use pinnlab::tapenet::Architecture;
use pinnlab_cli::commands::{self, EvalSource};
use pinnlab_cli::{artifacts, ExperimentConfig, Result};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "pinnlab", version, about = "Manufactured-solution PINN experiments for steady Burgers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run FD solves and write datasets with error summaries.
    GenerateData(Common),
    /// Train one network per tag.
    Train(Common),
    /// Fixed-weight sweep plus the learned-weight overlay.
    Pareto(Common),
    /// Error report for a trained network.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to evaluate instead of the trained run's.
        #[arg(long, conflicts_with = "oracle")]
        checkpoint: Option<PathBuf>,
        /// Evaluate the manufactured solution itself.
        #[arg(long)]
        oracle: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Architecture>,
    /// May be repeated.
    #[arg(long, value_parser = parse_tag)]
    tag: Vec<Tag>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// `lbpinn` or a fixed α in [0, 1].
    #[arg(long, value_parser = parse_weighting)]
    weighting: Option<Weighting>,
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_preset(s: &str) -> std::result::Result<Architecture, String> {
    match s {
        "desk" => Ok(Architecture::Desk),
        "paper" => Ok(Architecture::Paper),
        _ => Err(format!("unknown preset '{s}' (desk|paper)")),
    }
}

fn parse_tag(s: &str) -> std::result::Result<Tag, String> {
    s.parse().map_err(|e: pinnlab::Error| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: pinnlab::Error| e.to_string())
}

fn parse_weighting(s: &str) -> std::result::Result<Weighting, String> {
    if s == "lbpinn" {
        return Ok(Weighting::LbPinn);
    }
    match s.parse::<f64>() {
        Ok(alpha) if (0.0..=1.0).contains(&alpha) => Ok(Weighting::Fixed { alpha }),
        _ => Err(format!("weighting must be 'lbpinn' or an alpha in [0, 1], got '{s}'")),
    }
}

impl Common {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_json(&artifacts::read_file(p)?)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.out {
            cfg.out_dir = v;
        }
        if let Some(v) = self.preset {
            cfg.preset = v;
        }
        if !self.tag.is_empty() {
            cfg.tags = self.tag;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(v) = self.weighting {
            cfg.weighting = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData(c) => {
            let s = commands::generate_data(&c.resolve()?)?;
            println!("{}", json(&s));
        }
        Command::Train(c) => {
            let s = commands::train(&c.resolve()?)?;
            println!("{}", json(&s));
        }
        Command::Pareto(c) => {
            let s = commands::pareto(&c.resolve()?)?;
            println!("{}", json(&s));
        }
        Command::Evaluate {
            common,
            checkpoint,
            oracle,
        } => {
            let source = match (checkpoint, oracle) {
                (_, true) => EvalSource::Oracle,
                (Some(p), false) => EvalSource::Checkpoint(p),
                (None, false) => EvalSource::TrainedRun,
            };
            let r = commands::evaluate(&common.resolve()?, &source)?;
            println!("{}", json(&r));
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
