//! Append-only run log, one whitespace-separated record per line:
//!
//! ```text
//! req  <time_ms> <request> <parent> <video> served <source> <serving> <delay_ms>
//! req  <time_ms> <request> <parent> <video> rejected <reason>
//! util <time_ms> <ps> <cache_used_bits> <cache_cap_bits> <bw_used_bps> <bw_cap_bps>
//! ```
//!
//! Proxies and videos are written as bare numbers; times use the shortest
//! exact decimal form so that a parsed log reproduces the run bit for bit.

use std::fmt::Write as _;

use super::{ServiceOutcome, Source};
use crate::error::{Error, Result};
use crate::ids::{PsId, VideoId};
use crate::planner::Strategy;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogRecord {
    Outcome {
        time_ms: f64,
        request: u64,
        parent: PsId,
        video: VideoId,
        outcome: ServiceOutcome,
    },
    Utilization {
        time_ms: f64,
        ps: PsId,
        /// (used, capacity) bits of cache.
        cache: (u64, u64),
        /// (used, capacity) bits per second of outgoing bandwidth.
        bandwidth: (u64, u64),
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub strategy: Strategy,
    pub seed: u64,
    pub config_digest: String,
    pub records: Vec<LogRecord>,
}

impl EventLog {
    pub fn new(strategy: Strategy, seed: u64, config_digest: String) -> Self {
        EventLog {
            strategy,
            seed,
            config_digest,
            records: Vec::new(),
        }
    }

    pub fn write(&self) -> String {
        let mut out = format!(
            "# log strategy={} seed={} config={}\n",
            self.strategy, self.seed, self.config_digest
        );
        for r in &self.records {
            match *r {
                LogRecord::Outcome {
                    time_ms,
                    request,
                    parent,
                    video,
                    outcome,
                } => {
                    let _ = write!(out, "req {time_ms:?} {request} {} {} ", parent.0, video.0);
                    let _ = match outcome {
                        ServiceOutcome::Served {
                            source,
                            serving,
                            delay_ms,
                        } => writeln!(out, "served {source} {} {delay_ms:?}", serving.0),
                        ServiceOutcome::Rejected(reason) => writeln!(out, "rejected {reason}"),
                    };
                }
                LogRecord::Utilization {
                    time_ms,
                    ps,
                    cache,
                    bandwidth,
                } => {
                    let _ = writeln!(
                        out,
                        "util {time_ms:?} {} {} {} {} {}",
                        ps.0, cache.0, cache.1, bandwidth.0, bandwidth.1
                    );
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "empty log".into(),
        })?;
        let mut strategy = None;
        let mut seed = None;
        let mut digest = None;
        for kv in header.trim_start_matches('#').split_whitespace() {
            match kv.split_once('=') {
                Some(("strategy", v)) => strategy = v.parse::<Strategy>().ok(),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                Some(("config", v)) => digest = Some(v.to_string()),
                _ => {}
            }
        }
        let bad = |line: usize, reason: &str| Error::Parse {
            line,
            reason: reason.to_string(),
        };
        let mut log = EventLog::new(
            strategy.ok_or_else(|| bad(1, "header lacks strategy"))?,
            seed.ok_or_else(|| bad(1, "header lacks seed"))?,
            digest.ok_or_else(|| bad(1, "header lacks config"))?,
        );
        for (i, line) in lines {
            let n = i + 1;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() || f[0].starts_with('#') {
                continue;
            }
            let num = |j: usize| -> Result<&str> { f.get(j).copied().ok_or_else(|| bad(n, "missing field")) };
            let float = |j: usize| -> Result<f64> { num(j)?.parse().map_err(|_| bad(n, "bad number")) };
            let int = |j: usize| -> Result<u64> { num(j)?.parse().map_err(|_| bad(n, "bad integer")) };
            let rec = match f[0] {
                "req" => {
                    let outcome = match num(5)? {
                        "served" => ServiceOutcome::Served {
                            source: num(6)?.parse::<Source>().map_err(|e| bad(n, &e.to_string()))?,
                            serving: PsId(int(7)? as usize),
                            delay_ms: float(8)?,
                        },
                        "rejected" => {
                            ServiceOutcome::Rejected(num(6)?.parse().map_err(|e: Error| bad(n, &e.to_string()))?)
                        }
                        _ => return Err(bad(n, "expected served or rejected")),
                    };
                    LogRecord::Outcome {
                        time_ms: float(1)?,
                        request: int(2)?,
                        parent: PsId(int(3)? as usize),
                        video: VideoId(int(4)? as u32),
                        outcome,
                    }
                }
                "util" => LogRecord::Utilization {
                    time_ms: float(1)?,
                    ps: PsId(int(2)? as usize),
                    cache: (int(3)?, int(4)?),
                    bandwidth: (int(5)?, int(6)?),
                },
                other => return Err(bad(n, &format!("unknown record `{other}`"))),
            };
            log.records.push(rec);
        }
        Ok(log)
    }
}
