use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use iwknn_cli::commands;
use iwknn_cli::config::RunConfig;
use iwknn_core::Algorithm;

/// WiFi fingerprint positioning: simulate a venue, build a radio map and
/// locate or benchmark query streams against it.
#[derive(Parser)]
#[command(name = "iwknn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every command. Flags override the config file.
#[derive(Args, Clone)]
struct Settings {
    /// `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Neighbours used by every algorithm
    #[arg(long)]
    k: Option<usize>,
    /// Online window length in slots
    #[arg(long)]
    window: Option<usize>,
    /// Loss-rate threshold
    #[arg(long)]
    theta1: Option<f64>,
    /// Fluctuation threshold
    #[arg(long)]
    theta2: Option<f64>,
    /// Mass the asymmetric filter may reject
    #[arg(long)]
    epsilon: Option<f64>,
    /// Value standing in for an AP that was not heard
    #[arg(long, allow_hyphen_values = true)]
    rssi_min: Option<f64>,
    /// Candidate radius in metres
    #[arg(long)]
    radius: Option<f64>,
    /// Past estimates kept; 0 disables candidate restriction
    #[arg(long)]
    history: Option<usize>,
    /// Plain means offline and no online filtering
    #[arg(long)]
    no_filter: bool,
}

impl Settings {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.k = self.k.or(cfg.k);
        cfg.window = self.window.or(cfg.window);
        cfg.theta1 = self.theta1.or(cfg.theta1);
        cfg.theta2 = self.theta2.or(cfg.theta2);
        cfg.epsilon = self.epsilon.or(cfg.epsilon);
        cfg.rssi_min = self.rssi_min.unwrap_or(cfg.rssi_min);
        cfg.radius = self.radius.or(cfg.radius);
        cfg.history = self.history.unwrap_or(cfg.history);
        if self.no_filter {
            cfg.filtering = false;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate an offline survey and an online query stream
    Simulate {
        #[command(flatten)]
        settings: Settings,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a radio map from a survey
    Train {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        campaign: PathBuf,
        /// Radio map path; the elimination log goes next to it
        #[arg(long)]
        out: PathBuf,
    },
    /// Locate every query of a stream and write a trace
    Locate {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        stream: PathBuf,
        #[arg(long, default_value = "iwknn")]
        algo: Algorithm,
        /// Window 1, no history, no radius, no gates, no filtering
        #[arg(long)]
        degenerate: bool,
        /// Trace CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Run all algorithms on one stream and write report CSVs
    Bench {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        stream: PathBuf,
        /// Report directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate, train and benchmark over consecutive seeds
    Experiment {
        #[command(flatten)]
        settings: Settings,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { settings, out } => commands::cmd_simulate(&settings.resolve()?, &out),
        Command::Train {
            settings,
            campaign,
            out,
        } => commands::cmd_train(&settings.resolve()?, &campaign, &out),
        Command::Locate {
            settings,
            map,
            stream,
            algo,
            degenerate,
            out,
        } => commands::cmd_locate(&settings.resolve()?, &map, &stream, algo, degenerate, &out),
        Command::Bench {
            settings,
            map,
            stream,
            out,
        } => commands::cmd_bench(&settings.resolve()?, &map, &stream, &out),
        Command::Experiment { settings, seeds, out } => commands::cmd_experiment(&settings.resolve()?, seeds, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
