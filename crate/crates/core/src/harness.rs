//! Strategy × seed experiment matrix.
//!
//! Output layout under the scenario's directory:
//!
//! ```text
//! run_<strategy>_seed<seed>.csv     aggregate row of one run
//! series/<strategy>_seed<seed>.csv  bandwidth utilization series
//! logs/<strategy>_seed<seed>.log    event log (when enabled)
//! logs/<strategy>_seed<seed>.json   full report next to its log
//! summary.csv                       mean and standard deviation per strategy
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{emit, write_series, Format, MetricsReport};
use crate::planner::Strategy;
use crate::sim::{run_simulation, run_with_log, SimConfig};

/// Reference setup: 6 groups × 6 proxies, 50 clients each, 300 videos of
/// 20–120 minutes at 1.5 Mbps, skew 0.75, 35–50 requests/min per proxy, 8 hours.
pub fn paper_defaults() -> SimConfig {
    SimConfig::default()
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: SimConfig,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub event_logs: bool,
}

impl Scenario {
    pub fn new(config: SimConfig, strategies: Vec<Strategy>, seeds: Vec<u64>) -> Self {
        Scenario {
            config,
            strategies,
            seeds,
            output_dir: None,
            workers: 0,
            event_logs: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub runs: usize,
    pub rejection_mean: f64,
    pub rejection_sd: f64,
    pub delay_mean_ms: f64,
    pub delay_sd_ms: f64,
    pub miss_mean: f64,
    pub miss_sd: f64,
    pub throughput_mean: f64,
    pub utilization_mean: f64,
}

#[derive(Clone, Debug)]
pub struct MatrixResult {
    /// In strategy-major, seed-minor order of the scenario.
    pub reports: Vec<MetricsReport>,
    pub summary: Vec<SummaryRow>,
}

impl MatrixResult {
    pub fn report(&self, strategy: Strategy, seed: u64) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.strategy == strategy && r.seed == seed)
    }

    pub fn summary_for(&self, strategy: Strategy) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.strategy == strategy)
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(reports: &[MetricsReport], strategies: &[Strategy]) -> Vec<SummaryRow> {
    strategies
        .iter()
        .map(|&s| {
            let mine: Vec<&MetricsReport> = reports.iter().filter(|r| r.strategy == s).collect();
            let col = |f: &dyn Fn(&MetricsReport) -> Option<f64>| -> Vec<f64> {
                mine.iter().filter_map(|r| f(r)).collect()
            };
            let (rejection_mean, rejection_sd) = mean_sd(&col(&|r| Some(r.rejection_ratio())));
            let (delay_mean_ms, delay_sd_ms) = mean_sd(&col(&|r| r.mean_initial_access_delay().map(|d| d.per_proxy_ms)));
            let (miss_mean, miss_sd) = mean_sd(&col(&|r| Some(r.miss_rate())));
            SummaryRow {
                strategy: s,
                runs: mine.len(),
                rejection_mean,
                rejection_sd,
                delay_mean_ms,
                delay_sd_ms,
                miss_mean,
                miss_sd,
                throughput_mean: mean_sd(&col(&|r| Some(r.throughput()))).0,
                utilization_mean: mean_sd(&col(&|r| r.mean_utilization())).0,
            }
        })
        .collect()
}

fn write_run(dir: &std::path::Path, report: &MetricsReport, log: Option<String>) -> Result<()> {
    let stem = format!("{}_seed{}", report.strategy, report.seed);
    emit(report, Format::Csv, BufWriter::new(File::create(dir.join(format!("run_{stem}.csv")))?))?;
    write_series(report, BufWriter::new(File::create(dir.join("series").join(format!("{stem}.csv")))?))?;
    if let Some(text) = log {
        fs::write(dir.join("logs").join(format!("{stem}.log")), text)?;
        emit(report, Format::Json, BufWriter::new(File::create(dir.join("logs").join(format!("{stem}.json")))?))?;
    }
    Ok(())
}

/// Runs every (strategy, seed) cell in parallel. Cells are independent and
/// deterministic, so the result does not depend on the worker count.
///
/// If some cells fail, the others are still written and the first failure is
/// returned after the summary of the successful cells.
pub fn run_matrix(scenario: &Scenario) -> Result<MatrixResult> {
    scenario.config.validate()?;
    if scenario.strategies.is_empty() || scenario.seeds.is_empty() {
        return Err(Error::invalid("scenario needs at least one strategy and one seed"));
    }
    if let Some(dir) = &scenario.output_dir {
        fs::create_dir_all(dir.join("series"))?;
        if scenario.event_logs {
            fs::create_dir_all(dir.join("logs"))?;
        }
    }
    let cells: Vec<(Strategy, u64)> = scenario
        .strategies
        .iter()
        .flat_map(|&s| scenario.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(scenario.workers)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let cfg = &scenario.config;
    let outcomes: Vec<Result<MetricsReport>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(strategy, seed)| {
                log::info!("running {strategy} seed {seed}");
                let (report, text) = if scenario.event_logs {
                    let run = run_with_log(cfg, strategy, seed)?;
                    (run.report, run.log.map(|l| l.write()))
                } else {
                    (run_simulation(cfg, strategy, seed)?, None)
                };
                if let Some(dir) = &scenario.output_dir {
                    write_run(dir, &report, text)?;
                }
                Ok(report)
            })
            .collect()
    });
    let mut reports = Vec::with_capacity(outcomes.len());
    let mut first_error = None;
    for ((strategy, seed), outcome) in cells.into_iter().zip(outcomes) {
        match outcome {
            Ok(r) => reports.push(r),
            Err(e) => {
                log::error!("{strategy} seed {seed} failed: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    let summary = summarize(&reports, &scenario.strategies);
    if let Some(dir) = &scenario.output_dir {
        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        for row in &summary {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(MatrixResult { reports, summary }),
    }
}
