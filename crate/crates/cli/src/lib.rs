//! Scenario loading, comparison batches and report output for the `oppnet`
//! command-line tool.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use oppnet_core::engine::SimError;
use oppnet_core::stats::REPORT_LABELS;
use oppnet_core::{ConfigError, ScenarioConfig, StatsReport, StrategyKind, TimeseriesRow};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("no strategies given")]
    NoStrategies,
    #[error("no configs given")]
    NoConfigs,
    #[error("no seeds given")]
    NoSeeds,
    #[error("run {config} / {strategy} / seed {seed} failed: {source}")]
    Run { config: String, strategy: StrategyKind, seed: u64, source: SimError },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Loads and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, CliError> {
    let path = path.as_ref();
    ScenarioConfig::load(path).map_err(|source| CliError::Config { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected table, csv or json)")),
        }
    }
}

/// A report with the column name it is shown under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedReport {
    pub name: String,
    #[serde(flatten)]
    pub report: StatsReport,
}

const COUNT_LABELS: [&str; 5] = ["created", "started", "relayed", "aborted", "dropped"];

fn format_value(label: &str, v: f64) -> String {
    if COUNT_LABELS.contains(&label) && v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}

/// Renders reports as a label-per-row table, a run-per-row CSV, or a JSON
/// array.
pub fn render(reports: &[NamedReport], format: Format) -> Result<String, CliError> {
    match format {
        Format::Table => Ok(render_table(reports)),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["run"];
            header.extend(REPORT_LABELS);
            w.write_record(&header)?;
            for r in reports {
                let mut row = vec![r.name.clone()];
                row.extend(REPORT_LABELS.iter().map(|l| format_value(l, r.report.value(l).unwrap_or(0.0))));
                w.write_record(&row)?;
            }
            let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(reports)?;
            s.push('\n');
            Ok(s)
        }
    }
}

fn render_table(reports: &[NamedReport]) -> String {
    let label_w = REPORT_LABELS.iter().map(|l| l.len()).max().unwrap_or(0);
    let cells: Vec<Vec<String>> =
        reports.iter().map(|r| REPORT_LABELS.iter().map(|l| format_value(l, r.report.value(l).unwrap_or(0.0))).collect()).collect();
    let widths: Vec<usize> =
        reports.iter().zip(&cells).map(|(r, c)| c.iter().map(String::len).max().unwrap_or(0).max(r.name.len())).collect();
    let mut out = String::new();
    let _ = write!(out, "{:label_w$}", "");
    for (r, w) in reports.iter().zip(&widths) {
        let _ = write!(out, "  {:>w$}", r.name);
    }
    out.push('\n');
    for (i, label) in REPORT_LABELS.iter().enumerate() {
        let _ = write!(out, "{label:label_w$}");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(out, "  {:>w$}", c[i]);
        }
        out.push('\n');
    }
    out
}

/// Writes rendered reports to `path`, or to stdout when `path` is `None`.
pub fn emit_report(reports: &[NamedReport], format: Format, path: Option<&Path>) -> Result<(), CliError> {
    write_output(&render(reports, format)?, path)
}

fn write_output(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Write { path: p.to_path_buf(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn render_timeseries(rows: &[TimeseriesRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "created", "delivered", "delivery_prob", "delay_prob", "latency_avg"])?;
    for r in rows {
        w.write_record([
            format!("{:.1}", r.time),
            r.created.to_string(),
            r.delivered.to_string(),
            format!("{:.4}", r.delivery_prob),
            format!("{:.4}", r.delay_prob),
            format!("{:.4}", r.latency_avg),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_timeseries(rows: &[TimeseriesRow], path: &Path) -> Result<(), CliError> {
    write_output(&render_timeseries(rows)?, Some(path))
}

/// One finished run of a comparison batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: String,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub report: StatsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// In `(config, strategy, seed)` order, whatever order runs finished in.
    pub runs: Vec<RunResult>,
}

impl Comparison {
    /// `(config, strategy)` columns in batch order.
    pub fn columns(&self) -> Vec<(String, StrategyKind)> {
        let mut cols: Vec<(String, StrategyKind)> = Vec::new();
        for r in &self.runs {
            let key = (r.config.clone(), r.strategy);
            if !cols.contains(&key) {
                cols.push(key);
            }
        }
        cols
    }

    pub fn reports_for(&self, config: &str, strategy: StrategyKind) -> Vec<&StatsReport> {
        self.runs.iter().filter(|r| r.config == config && r.strategy == strategy).map(|r| &r.report).collect()
    }

    /// Seed-averaged report per column.
    pub fn averaged(&self) -> Vec<NamedReport> {
        self.columns()
            .into_iter()
            .map(|(config, strategy)| NamedReport {
                name: format!("{config}/{strategy}"),
                report: average(&self.reports_for(&config, strategy)),
            })
            .collect()
    }

    /// Every per-seed report followed by the averaged columns.
    pub fn all_reports(&self) -> Vec<NamedReport> {
        let mut out: Vec<NamedReport> = self
            .runs
            .iter()
            .map(|r| NamedReport { name: format!("{}/{}/seed={}", r.config, r.strategy, r.seed), report: r.report.clone() })
            .collect();
        out.extend(self.averaged().into_iter().map(|mut r| {
            r.name.push_str("/mean");
            r
        }));
        out
    }
}

/// Field-wise mean of reports. Counters are rounded to the nearest integer;
/// ratios and averages are plain means.
pub fn average(reports: &[&StatsReport]) -> StatsReport {
    let n = reports.len().max(1) as f64;
    let mean = |f: &dyn Fn(&StatsReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
    let count = |f: &dyn Fn(&StatsReport) -> u64| (reports.iter().map(|r| f(r) as f64).sum::<f64>() / n).round() as u64;
    let delivered = count(&|r| r.delivered);
    let created = count(&|r| r.created);
    StatsReport {
        sim_time: mean(&|r| r.sim_time),
        created,
        started: count(&|r| r.started),
        relayed: count(&|r| r.relayed),
        aborted: count(&|r| r.aborted),
        dropped: count(&|r| r.dropped),
        delivered,
        in_flight: count(&|r| r.in_flight),
        delivery_prob: mean(&|r| r.delivery_prob),
        delay_prob: mean(&|r| r.delay_prob),
        hopcount_avg: mean(&|r| r.hopcount_avg),
        buffertime_avg: mean(&|r| r.buffertime_avg),
        latency_avg: mean(&|r| r.latency_avg),
        no_messages: created == 0,
        no_deliveries: delivered == 0,
    }
}

/// Runs every `(config, strategy, seed)` combination, in parallel. The
/// strategy replaces whatever the config names. The first failing
/// combination, in batch order, aborts the batch.
pub fn compare(configs: &[(String, ScenarioConfig)], strategies: &[StrategyKind], seeds: &[u64]) -> Result<Comparison, CliError> {
    if strategies.is_empty() {
        return Err(CliError::NoStrategies);
    }
    if configs.is_empty() {
        return Err(CliError::NoConfigs);
    }
    if seeds.is_empty() {
        return Err(CliError::NoSeeds);
    }
    let combos: Vec<(usize, StrategyKind, u64)> =
        (0..configs.len()).flat_map(|c| strategies.iter().flat_map(move |&s| seeds.iter().map(move |&seed| (c, s, seed)))).collect();
    let results: Vec<Result<RunResult, CliError>> = combos
        .par_iter()
        .map(|&(c, strategy, seed)| {
            let (name, base) = &configs[c];
            let mut cfg = base.clone();
            cfg.routing.strategy = strategy;
            oppnet_core::run(&cfg, seed)
                .map(|report| RunResult { config: name.clone(), strategy, seed, report })
                .map_err(|source| CliError::Run { config: name.clone(), strategy, seed, source })
        })
        .collect();
    Ok(Comparison { runs: results.into_iter().collect::<Result<_, _>>()? })
}

/// Column name for a config file: its stem.
pub fn config_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}
