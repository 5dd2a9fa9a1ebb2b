use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use oppnet_cli::{compare, config_name, emit_report, emit_timeseries, parse_scenario, Format, NamedReport};
use oppnet_core::{run_with_timeseries, StrategyKind};

#[derive(Parser)]
#[command(name = "oppnet", version, about = "Opportunistic network routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its message stats report.
    Run {
        config: PathBuf,
        #[arg(long, env = "OPPNET_SEED")]
        seed: Option<u64>,
        /// Overrides routing.strategy from the config.
        #[arg(long)]
        strategy: Option<StrategyKind>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "table")]
        format: Format,
        /// Write the cumulative per-interval series as CSV.
        #[arg(long)]
        timeseries: Option<PathBuf>,
    },
    /// Run every config x strategy x seed combination and print averaged columns.
    Compare {
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        strategies: Vec<StrategyKind>,
        #[arg(long, num_args = 1.., value_delimiter = ',', env = "OPPNET_SEED")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "table")]
        format: Format,
        /// Include per-seed reports, not just the averages.
        #[arg(long)]
        per_seed: bool,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, strategy, out, format, timeseries } => {
            let mut cfg = parse_scenario(&config)?;
            if let Some(s) = strategy {
                cfg.routing.strategy = s;
            }
            let seed = seed.unwrap_or(cfg.seed);
            let (report, series) = run_with_timeseries(&cfg, seed).with_context(|| format!("running {}", config.display()))?;
            if let Some(path) = timeseries {
                emit_timeseries(&series, &path)?;
            }
            let name = format!("{}/{}", config_name(&config), cfg.routing.strategy);
            emit_report(&[NamedReport { name, report }], format, out.as_deref())?;
        }
        Command::Compare { configs, strategies, seeds, out, format, per_seed } => {
            if strategies.is_empty() {
                bail!("no strategies given");
            }
            let loaded = configs.iter().map(|p| Ok((config_name(p), parse_scenario(p)?))).collect::<Result<Vec<_>>>()?;
            let seeds = if seeds.is_empty() { vec![loaded[0].1.seed] } else { seeds };
            let result = compare(&loaded, &strategies, &seeds)?;
            let reports = if per_seed { result.all_reports() } else { result.averaged() };
            emit_report(&reports, format, out.as_deref())?;
        }
    }
    Ok(())
}
