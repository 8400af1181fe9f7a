//! Objective quantities of a run and their outputs.
//!
//! Counters are attributed to the request's parent proxy. Everything before
//! `measured_from_ms` (the warm-up) is ignored. A run's [`MetricsReport`] can
//! be rebuilt from its [`EventLog`] alone; [`verify_report`] does that and
//! lists every disagreement.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ids::PsId;
use crate::planner::Strategy;
use crate::scalar::Scalar;
use crate::sim::{EventLog, LinkDelays, LogRecord, RejectReason, ServiceOutcome, Source};

/// `Q = (1/M) Σ Q_i`.
pub fn mean_per_proxy<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(T::zero(), |a, &b| a + b);
    Some(sum / T::from_count(values.len()))
}

/// `((1/M) Σ N_rej,i) / (R/M)` with `M = rejected.len()`.
pub fn rejection_ratio_nested<T: Scalar>(rejected: &[T], total_requests: T) -> Option<T> {
    if rejected.is_empty() || total_requests <= T::zero() {
        return None;
    }
    let m = T::from_count(rejected.len());
    Some(mean_per_proxy(rejected)? / (total_requests / m))
}

pub fn rejection_ratio_flat<T: Scalar>(rejected_total: T, total_requests: T) -> Option<T> {
    (total_requests > T::zero()).then(|| rejected_total / total_requests)
}

/// Mean over proxies of each proxy's own mean; proxies with no samples are skipped.
/// Input pairs are `(sum, count)`.
pub fn nested_mean<T: Scalar>(per_proxy: &[(T, T)]) -> Option<T> {
    let means: Vec<T> = per_proxy
        .iter()
        .filter(|(_, n)| *n > T::zero())
        .map(|&(s, n)| s / n)
        .collect();
    mean_per_proxy(&means)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilizationSample {
    pub time_min: f64,
    pub ps: usize,
    pub cache_used_bits: u64,
    pub cache_cap_bits: u64,
    pub bw_used_bps: u64,
    pub bw_cap_bps: u64,
}

impl UtilizationSample {
    /// Cache occupancy.
    pub fn fraction(&self) -> f64 {
        self.cache_used_bits as f64 / self.cache_cap_bits as f64
    }

    pub fn bandwidth_fraction(&self) -> f64 {
        self.bw_used_bps as f64 / self.bw_cap_bps as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    /// Mean of per-proxy means.
    pub per_proxy_ms: f64,
    /// Mean over all served requests.
    pub global_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: Strategy,
    pub seed: u64,
    pub config_digest: String,
    pub n_ps: usize,
    pub m_ps_per_lpsg: usize,
    pub measured_from_ms: f64,
    pub horizon_ms: f64,
    pub requests_per_ps: Vec<u64>,
    pub served_per_ps: Vec<u64>,
    pub rejected_per_ps: Vec<u64>,
    pub delay_sum_ms_per_ps: Vec<f64>,
    pub served_by_source: BTreeMap<Source, u64>,
    pub rejected_by_reason: BTreeMap<RejectReason, u64>,
    /// Served by anything other than the parent proxy, or rejected.
    pub misses: u64,
    /// Served from outside the parent's group, or rejected.
    pub misses_outside_lpsg: u64,
    pub utilization: Vec<UtilizationSample>,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn new(
        strategy: Strategy,
        seed: u64,
        config_digest: String,
        n_ps: usize,
        m_ps_per_lpsg: usize,
        measured_from_ms: f64,
        horizon_ms: f64,
    ) -> Self {
        MetricsReport {
            strategy,
            seed,
            config_digest,
            n_ps,
            m_ps_per_lpsg,
            measured_from_ms,
            horizon_ms,
            requests_per_ps: vec![0; n_ps],
            served_per_ps: vec![0; n_ps],
            rejected_per_ps: vec![0; n_ps],
            delay_sum_ms_per_ps: vec![0.0; n_ps],
            served_by_source: BTreeMap::new(),
            rejected_by_reason: BTreeMap::new(),
            misses: 0,
            misses_outside_lpsg: 0,
            utilization: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn observe_outcome(&mut self, time_ms: f64, parent: PsId, outcome: &ServiceOutcome) {
        if time_ms < self.measured_from_ms {
            return;
        }
        let k = parent.0;
        self.requests_per_ps[k] += 1;
        match *outcome {
            ServiceOutcome::Served { source, delay_ms, .. } => {
                self.served_per_ps[k] += 1;
                self.delay_sum_ms_per_ps[k] += delay_ms;
                *self.served_by_source.entry(source).or_default() += 1;
                self.misses += source.is_miss() as u64;
                self.misses_outside_lpsg += !source.within_lpsg() as u64;
            }
            ServiceOutcome::Rejected(reason) => {
                self.rejected_per_ps[k] += 1;
                *self.rejected_by_reason.entry(reason).or_default() += 1;
                self.misses += 1;
                self.misses_outside_lpsg += 1;
            }
        }
    }

    pub fn observe_utilization(&mut self, time_ms: f64, ps: PsId, cache: (u64, u64), bandwidth: (u64, u64)) {
        self.utilization.push(UtilizationSample {
            time_min: time_ms / 60_000.0,
            ps: ps.0,
            cache_used_bits: cache.0,
            cache_cap_bits: cache.1,
            bw_used_bps: bandwidth.0,
            bw_cap_bps: bandwidth.1,
        });
    }

    pub fn total_requests(&self) -> u64 {
        self.requests_per_ps.iter().sum()
    }

    pub fn total_served(&self) -> u64 {
        self.served_per_ps.iter().sum()
    }

    pub fn total_rejected(&self) -> u64 {
        self.rejected_per_ps.iter().sum()
    }

    pub fn measured_minutes(&self) -> f64 {
        (self.horizon_ms - self.measured_from_ms) / 60_000.0
    }

    /// Served requests per proxy over the measured period.
    pub fn throughput(&self) -> f64 {
        let q: Vec<f64> = self.served_per_ps.iter().map(|&q| q as f64).collect();
        mean_per_proxy(&q).unwrap_or(0.0)
    }

    pub fn throughput_per_min(&self) -> f64 {
        self.throughput() / self.measured_minutes()
    }

    /// Zero when there were no requests.
    pub fn rejection_ratio(&self) -> f64 {
        let rej: Vec<f64> = self.rejected_per_ps.iter().map(|&r| r as f64).collect();
        rejection_ratio_nested(&rej, self.total_requests() as f64).unwrap_or(0.0)
    }

    pub fn rejection_ratio_flat(&self) -> f64 {
        rejection_ratio_flat(self.total_rejected() as f64, self.total_requests() as f64).unwrap_or(0.0)
    }

    /// `None` when nothing was served.
    pub fn mean_initial_access_delay(&self) -> Option<DelayStats> {
        let served = self.total_served();
        if served == 0 {
            return None;
        }
        let pairs: Vec<(f64, f64)> = self
            .delay_sum_ms_per_ps
            .iter()
            .zip(&self.served_per_ps)
            .map(|(&s, &n)| (s, n as f64))
            .collect();
        Some(DelayStats {
            per_proxy_ms: nested_mean(&pairs)?,
            global_ms: self.delay_sum_ms_per_ps.iter().sum::<f64>() / served as f64,
        })
    }

    pub fn miss_rate(&self) -> f64 {
        rejection_ratio_flat(self.misses as f64, self.total_requests() as f64).unwrap_or(0.0)
    }

    pub fn miss_rate_outside_lpsg(&self) -> f64 {
        rejection_ratio_flat(self.misses_outside_lpsg as f64, self.total_requests() as f64).unwrap_or(0.0)
    }

    fn mean_sampled(&self, f: fn(&UtilizationSample) -> f64) -> Option<f64> {
        let from = self.measured_from_ms / 60_000.0;
        let xs: Vec<f64> = self.utilization.iter().filter(|s| s.time_min >= from).map(f).collect();
        mean_per_proxy(&xs)
    }

    /// Mean cache occupancy over samples in the measured period.
    pub fn mean_utilization(&self) -> Option<f64> {
        self.mean_sampled(UtilizationSample::fraction)
    }

    pub fn mean_bandwidth_utilization(&self) -> Option<f64> {
        self.mean_sampled(UtilizationSample::bandwidth_fraction)
    }

    pub fn served_from(&self, source: Source) -> u64 {
        self.served_by_source.get(&source).copied().unwrap_or(0)
    }

    pub fn rejected_for(&self, reason: RejectReason) -> u64 {
        self.rejected_by_reason.get(&reason).copied().unwrap_or(0)
    }

    pub fn aggregate_row(&self) -> AggregateRow {
        let delay = self.mean_initial_access_delay();
        AggregateRow {
            strategy: self.strategy,
            seed: self.seed,
            config: self.config_digest.clone(),
            requests: self.total_requests(),
            served: self.total_served(),
            rejected: self.total_rejected(),
            rejection_ratio: self.rejection_ratio(),
            throughput_per_ps: self.throughput(),
            mean_delay_ms: delay.map(|d| d.per_proxy_ms),
            mean_delay_global_ms: delay.map(|d| d.global_ms),
            miss_rate: self.miss_rate(),
            miss_rate_outside_lpsg: self.miss_rate_outside_lpsg(),
            mean_utilization: self.mean_utilization(),
            mean_bandwidth_utilization: self.mean_bandwidth_utilization(),
            from_parent: self.served_from(Source::ParentPs),
            from_peer: self.served_from(Source::PeerPs),
            from_tracker: self.served_from(Source::TrackerPref2),
            from_neighbor_tracker: self.served_from(Source::NeighborTracker),
            from_neighbor_ps: self.served_from(Source::NeighborPs),
            from_mms: self.served_from(Source::Mms),
            rejected_no_bandwidth: self.rejected_for(RejectReason::NoBandwidth),
            rejected_no_room: self.rejected_for(RejectReason::NoRoomAfterDownload),
            rejected_unavailable: self.rejected_for(RejectReason::Unavailable),
        }
    }
}

/// One CSV row per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: Strategy,
    pub seed: u64,
    pub config: String,
    pub requests: u64,
    pub served: u64,
    pub rejected: u64,
    pub rejection_ratio: f64,
    pub throughput_per_ps: f64,
    pub mean_delay_ms: Option<f64>,
    pub mean_delay_global_ms: Option<f64>,
    pub miss_rate: f64,
    pub miss_rate_outside_lpsg: f64,
    pub mean_utilization: Option<f64>,
    pub mean_bandwidth_utilization: Option<f64>,
    pub from_parent: u64,
    pub from_peer: u64,
    pub from_tracker: u64,
    pub from_neighbor_tracker: u64,
    pub from_neighbor_ps: u64,
    pub from_mms: u64,
    pub rejected_no_bandwidth: u64,
    pub rejected_no_room: u64,
    pub rejected_unavailable: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// CSV: header plus one aggregate row. JSON: the whole report.
pub fn emit(report: &MetricsReport, format: Format, out: impl Write) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.serialize(report.aggregate_row())?;
            w.flush()?;
        }
        Format::Json => serde_json::to_writer_pretty(out, report)?,
    }
    Ok(())
}

/// Utilization time series, one row per (sample, proxy).
pub fn write_series(report: &MetricsReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "time_min",
        "ps",
        "cache_used_bits",
        "cache_cap_bits",
        "cache_utilization",
        "bw_used_bps",
        "bw_cap_bps",
        "bw_utilization",
    ])?;
    for s in &report.utilization {
        w.write_record([
            s.time_min.to_string(),
            s.ps.to_string(),
            s.cache_used_bits.to_string(),
            s.cache_cap_bits.to_string(),
            format!("{:.6}", s.fraction()),
            s.bw_used_bps.to_string(),
            s.bw_cap_bps.to_string(),
            format!("{:.6}", s.bandwidth_fraction()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate_rows(input: impl std::io::Read) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Rebuilds the report from the log and checks path delays and bandwidth
/// bounds record by record. An empty result means the run is consistent.
///
/// `mms_extra_ms` is the fixed latency added to main-server fetches.
pub fn verify_report(report: &MetricsReport, log: &EventLog, delays: &LinkDelays, mms_extra_ms: f64) -> Vec<String> {
    let mut issues = Vec::new();
    if log.strategy != report.strategy || log.seed != report.seed || log.config_digest != report.config_digest {
        issues.push("log header does not match report".to_string());
    }
    let mut rebuilt = MetricsReport::new(
        log.strategy,
        log.seed,
        log.config_digest.clone(),
        report.n_ps,
        report.m_ps_per_lpsg,
        report.measured_from_ms,
        report.horizon_ms,
    );
    rebuilt.warnings = report.warnings.clone();
    let mut last_t = f64::NEG_INFINITY;
    let mut next_request = 0u64;
    for (i, rec) in log.records.iter().enumerate() {
        match *rec {
            LogRecord::Outcome {
                time_ms,
                request,
                parent,
                outcome,
                ..
            } => {
                if time_ms < last_t {
                    issues.push(format!("record {i}: time goes backwards"));
                }
                last_t = time_ms;
                if request != next_request {
                    issues.push(format!("record {i}: request {request}, expected {next_request}"));
                }
                next_request = request + 1;
                if parent.0 >= report.n_ps {
                    issues.push(format!("record {i}: unknown proxy {parent}"));
                    continue;
                }
                if let ServiceOutcome::Served { source, delay_ms, .. } = outcome {
                    let extra = if source == Source::Mms { mms_extra_ms } else { 0.0 };
                    let want = source.path_delay_ms(delays) + extra;
                    if delay_ms != want {
                        issues.push(format!("record {i}: delay {delay_ms} ms via {source}, path gives {want}"));
                    }
                }
                rebuilt.observe_outcome(time_ms, parent, &outcome);
            }
            LogRecord::Utilization {
                time_ms,
                ps,
                cache,
                bandwidth,
            } => {
                if time_ms < last_t {
                    issues.push(format!("record {i}: time goes backwards"));
                }
                last_t = time_ms;
                if cache.0 > cache.1 {
                    issues.push(format!("record {i}: {ps} caches {} of {} bits", cache.0, cache.1));
                }
                if bandwidth.0 > bandwidth.1 {
                    issues.push(format!("record {i}: {ps} uses {} of {} bps", bandwidth.0, bandwidth.1));
                }
                rebuilt.observe_utilization(time_ms, ps, cache, bandwidth);
            }
        }
    }
    if rebuilt != *report {
        issues.push(describe_mismatch(report, &rebuilt));
    }
    issues
}

fn describe_mismatch(a: &MetricsReport, b: &MetricsReport) -> String {
    let mut parts = Vec::new();
    if a.requests_per_ps != b.requests_per_ps {
        parts.push("requests");
    }
    if a.served_per_ps != b.served_per_ps {
        parts.push("served");
    }
    if a.rejected_per_ps != b.rejected_per_ps {
        parts.push("rejected");
    }
    if a.delay_sum_ms_per_ps != b.delay_sum_ms_per_ps {
        parts.push("delays");
    }
    if a.served_by_source != b.served_by_source || a.rejected_by_reason != b.rejected_by_reason {
        parts.push("breakdown");
    }
    if a.misses != b.misses || a.misses_outside_lpsg != b.misses_outside_lpsg {
        parts.push("misses");
    }
    if a.utilization != b.utilization {
        parts.push("utilization");
    }
    if parts.is_empty() {
        parts.push("header");
    }
    format!("report differs from log replay in: {}", parts.join(", "))
}
