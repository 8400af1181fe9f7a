use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use vodsim::catalog::dump_catalog;
use vodsim::harness::{run_matrix, Scenario};
use vodsim::metrics::{verify_report, MetricsReport};
use vodsim::planner::write_plan;
use vodsim::sccache::{allocate_blocks, default_t_min, parse_trace, static_peak_blocks, synthesize_trace, write_trace, TraceParams};
use vodsim::sim::{initial_plans, EventLog, LinkDelays, SimConfig};
use vodsim::{Error, Strategy};

#[derive(Parser)]
#[command(name = "vodsim", version, about = "Prefix replication and placement simulator for proxy-based VoD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum OutFormat {
    Table,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration file.
    Defaults,
    /// Run the strategy × seed matrix.
    Run {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long, value_delimiter = ',', default_value = "rpr-p,zipf-slfa,cr-rr")]
        strategies: Vec<Strategy>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        /// Directory for per-run CSVs, series and summary.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Worker threads, 0 for all cores.
        #[arg(short = 'j', long, default_value_t = 0)]
        workers: usize,
        /// Also write event logs under <out>/logs.
        #[arg(long)]
        log: bool,
        #[arg(long, value_enum, default_value = "table")]
        format: OutFormat,
    },
    /// Print the initial placement plan of one group.
    Plan {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long, default_value = "rpr-p")]
        strategy: Strategy,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long, default_value_t = 0)]
        group: usize,
    },
    /// Print the video catalog.
    Catalog {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Synthesize a frame trace, or analyze one with scene-change block allocation.
    Trace {
        #[arg(long, default_value_t = 2.0)]
        minutes: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = vodsim::sccache::DEFAULT_BLOCK_BITS)]
        block_bits: u64,
        /// Trace file to analyze instead of synthesizing.
        #[arg(long)]
        analyze: Option<PathBuf>,
    },
    /// Check a JSON report against the event log of the same run.
    Verify {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>) -> vodsim::Result<SimConfig> {
    match path {
        Some(p) => SimConfig::load(p),
        None => Ok(SimConfig::default()),
    }
}

fn delays(cfg: &SimConfig) -> LinkDelays {
    LinkDelays {
        ps_client_ms: cfg.ps_client_ms,
        ps_ps_ms: cfg.ps_ps_ms,
        tr_ps_ms: cfg.tr_ps_ms,
        tr_tr_ms: cfg.tr_tr_ms,
        mms_ps_ms: cfg.mms_ps_ms,
    }
}

fn fmt_opt(x: Option<f64>, scale: f64, digits: usize) -> String {
    x.map_or("-".into(), |v| format!("{:.*}", digits, v * scale))
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Defaults => write!(out, "{}", SimConfig::default().to_toml())?,
        Command::Run {
            config,
            strategies,
            seeds,
            out: dir,
            workers,
            log,
            format,
        } => {
            let mut scenario = Scenario::new(load_config(&config)?, strategies, seeds);
            scenario.output_dir = dir;
            scenario.workers = workers;
            scenario.event_logs = log;
            if log && scenario.output_dir.is_none() {
                bail!(Error::Config {
                    field: "log".into(),
                    reason: "event logs need --out".into()
                });
            }
            let res = run_matrix(&scenario)?;
            match format {
                OutFormat::Json => serde_json::to_writer_pretty(&mut out, &res.reports)?,
                OutFormat::Table => {
                    writeln!(out, "strategy    seed  requests  rejected%  delay_ms  miss%  cache%  bw%")?;
                    for r in &res.reports {
                        writeln!(
                            out,
                            "{:<10} {:>5} {:>9} {:>10} {:>9} {:>6} {:>7} {:>5}",
                            r.strategy.as_str(),
                            r.seed,
                            r.total_requests(),
                            fmt_opt(Some(r.rejection_ratio()), 100.0, 2),
                            fmt_opt(r.mean_initial_access_delay().map(|d| d.per_proxy_ms), 1.0, 1),
                            fmt_opt(Some(r.miss_rate()), 100.0, 1),
                            fmt_opt(r.mean_utilization(), 100.0, 1),
                            fmt_opt(r.mean_bandwidth_utilization(), 100.0, 0),
                        )?;
                    }
                    for s in &res.summary {
                        writeln!(
                            out,
                            "{:<10}  mean  rejected {:.2}% ± {:.2}  delay {:.1} ± {:.1} ms  miss {:.1}%",
                            s.strategy.as_str(),
                            s.rejection_mean * 100.0,
                            s.rejection_sd * 100.0,
                            s.delay_mean_ms,
                            s.delay_sd_ms,
                            s.miss_mean * 100.0
                        )?;
                    }
                }
            }
        }
        Command::Plan {
            config,
            strategy,
            seed,
            group,
        } => {
            let cfg = load_config(&config)?;
            if group >= cfg.z_lpsgs {
                bail!(Error::Config {
                    field: "group".into(),
                    reason: format!("only {} groups", cfg.z_lpsgs)
                });
            }
            let (_, plans) = initial_plans(&cfg, strategy, seed)?;
            write!(out, "{}", write_plan(&plans[group]))?;
        }
        Command::Catalog { config, seed } => {
            let cfg = load_config(&config)?;
            let [lo, hi] = cfg.video_duration_min;
            let videos = vodsim::catalog::build_catalog(
                cfg.n_videos,
                (lo, hi),
                vodsim::catalog::RateModel::Constant(cfg.encoding_rate_bps),
                seed,
            )?;
            write!(out, "{}", dump_catalog(&videos))?;
        }
        Command::Trace {
            minutes,
            seed,
            block_bits,
            analyze,
        } => match analyze {
            None => {
                let trace = synthesize_trace(minutes, &TraceParams::default(), seed)?;
                write!(out, "{}", write_trace(&trace))?;
            }
            Some(path) => {
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                let trace = parse_trace(&text)?;
                let alloc = allocate_blocks(&trace.frames, block_bits, default_t_min(&trace.frames))?;
                let peak = static_peak_blocks(&trace.frames, block_bits);
                writeln!(out, "frames {}", trace.frames.len())?;
                writeln!(out, "scenes {}", alloc.per_scene.len())?;
                writeln!(out, "scene_change_blocks {}", alloc.total_blocks)?;
                writeln!(out, "static_peak_blocks {peak}")?;
                writeln!(out, "payload_bits {}", trace.total_bits())?;
            }
        },
        Command::Verify { config, log, report } => {
            let cfg = load_config(&config)?;
            let log = EventLog::parse(&fs::read_to_string(&log)?)?;
            let report: MetricsReport = serde_json::from_str(&fs::read_to_string(&report)?)?;
            let extra = if cfg.sc_caching { cfg.renegotiation_latency_ms } else { 0.0 };
            let issues = verify_report(&report, &log, &delays(&cfg), extra);
            if issues.is_empty() {
                writeln!(out, "ok")?;
            } else {
                for i in &issues {
                    writeln!(out, "{i}")?;
                }
                bail!("{} discrepancies", issues.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Config { .. }) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
