//! Video catalog, the Zipf-like popularity law, and per-proxy demand tracking.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::BufRead;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ids::{PsId, VideoId};
use crate::rng::{self, tags};
use crate::scalar::Real;

pub const DEFAULT_ENCODING_RATE_BPS: u64 = 1_500_000;

/// Skew range over which the Zipf-like law is known to describe video demand.
pub const TYPICAL_THETA: (f64, f64) = (0.271, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct Video {
    pub id: VideoId,
    pub duration_min: f64,
    pub encoding_rate_bps: u64,
}

impl Video {
    pub fn size_bits(&self) -> f64 {
        minutes_to_bits(self.duration_min, self.encoding_rate_bps)
    }
}

/// Bits needed to hold `minutes` of a stream encoded at `rate_bps`.
pub fn minutes_to_bits(minutes: f64, rate_bps: u64) -> f64 {
    minutes * 60.0 * rate_bps as f64
}

/// Zipf-like popularity over `n_videos` ranks.
#[derive(Clone, Debug, PartialEq)]
pub struct ZipfModel<T> {
    pub n_videos: usize,
    pub theta: T,
    pub pmf: Vec<T>,
}

impl<T: Real> ZipfModel<T> {
    pub fn new(n_videos: usize, theta: T) -> Result<Self> {
        let pmf = zipf_pmf(n_videos, theta)?;
        Ok(ZipfModel {
            n_videos,
            theta,
            pmf,
        })
    }

    /// Probability of rank `id`.
    pub fn p(&self, id: VideoId) -> T {
        self.pmf[id.index()]
    }
}

/// `p_i = i^-θ / Σ_j j^-θ` for ranks `1..=n_videos`.
pub fn zipf_pmf<T: Real>(n_videos: usize, theta: T) -> Result<Vec<T>> {
    if n_videos == 0 {
        return Err(Error::invalid("zipf_pmf needs at least one video"));
    }
    if !theta.is_finite() || theta < T::zero() {
        return Err(Error::invalid(format!(
            "zipf skew must be finite and non-negative, got {theta:?}"
        )));
    }
    let theta_f = theta.to_f64().unwrap_or(f64::NAN);
    if theta_f < TYPICAL_THETA.0 || theta_f > TYPICAL_THETA.1 {
        log::info!("zipf skew {theta_f} outside the typical range [0.271, 1]");
    }
    let weights: Vec<T> = (1..=n_videos)
        .map(|i| T::from_count(i).powf(-theta))
        .collect();
    // Sum smallest-first to keep the normalizer tight.
    let norm: T = weights.iter().rev().copied().sum();
    Ok(weights.into_iter().map(|w| w / norm).collect())
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum RateModel {
    Constant(u64),
    /// Uniform integer rate in `[lo, hi]` bits per second.
    Uniform { lo: u64, hi: u64 },
}

impl Default for RateModel {
    fn default() -> Self {
        RateModel::Constant(DEFAULT_ENCODING_RATE_BPS)
    }
}

/// Deterministic catalog; durations uniform over `duration_range` minutes.
pub fn build_catalog(
    n_videos: usize,
    duration_range: (f64, f64),
    rate_model: RateModel,
    seed: u64,
) -> Result<Vec<Video>> {
    let (lo, hi) = duration_range;
    if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || lo > hi {
        return Err(Error::invalid(format!(
            "duration range [{lo}, {hi}] is empty or non-positive"
        )));
    }
    match rate_model {
        RateModel::Constant(0) => return Err(Error::invalid("encoding rate must be positive")),
        RateModel::Uniform { lo, hi } if lo == 0 || lo > hi => {
            return Err(Error::invalid("encoding rate range is empty or zero"))
        }
        _ => {}
    }
    let mut rng = rng::stream(seed, tags::CATALOG, 0);
    let videos = (0..n_videos)
        .map(|i| {
            let duration_min = if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            };
            let encoding_rate_bps = match rate_model {
                RateModel::Constant(r) => r,
                RateModel::Uniform { lo, hi } => rng.random_range(lo..=hi),
            };
            Video {
                id: VideoId::from_index(i),
                duration_min,
                encoding_rate_bps,
            }
        })
        .collect();
    Ok(videos)
}

/// One video per line: `id duration_min encoding_rate_bps`.
pub fn dump_catalog(videos: &[Video]) -> String {
    let mut out = String::from("# id duration_min encoding_rate_bps\n");
    for v in videos {
        let _ = writeln!(out, "{} {} {}", v.id.0, v.duration_min, v.encoding_rate_bps);
    }
    out
}

pub fn load_catalog(reader: impl BufRead) -> Result<Vec<Video>> {
    let mut videos = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| Error::Parse {
            line: n + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(bad("expected 3 fields"));
        }
        let id: u32 = fields[0].parse().map_err(|_| bad("bad id"))?;
        let duration_min: f64 = fields[1].parse().map_err(|_| bad("bad duration"))?;
        let encoding_rate_bps: u64 = fields[2].parse().map_err(|_| bad("bad rate"))?;
        if id as usize != videos.len() + 1 {
            return Err(bad("ids must be consecutive from 1"));
        }
        if !(duration_min > 0.0) || encoding_rate_bps == 0 {
            return Err(bad("duration and rate must be positive"));
        }
        videos.push(Video {
            id: VideoId(id),
            duration_min,
            encoding_rate_bps,
        });
    }
    Ok(videos)
}

/// Observed per-proxy demand over a trailing window.
///
/// Matrices are video-major: entry `(v, k)` lives at `v.index() * n_ps + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PopularitySnapshot {
    pub n_videos: usize,
    pub n_ps: usize,
    pub window_min: f64,
    pub taken_at_ms: f64,
    counts: Vec<u64>,
    probs: Vec<f64>,
}

impl PopularitySnapshot {
    pub fn empty(n_videos: usize, n_ps: usize, window_min: f64) -> Self {
        PopularitySnapshot {
            n_videos,
            n_ps,
            window_min,
            taken_at_ms: 0.0,
            counts: vec![0; n_videos * n_ps],
            probs: vec![0.0; n_videos * n_ps],
        }
    }

    pub fn from_counts(n_videos: usize, n_ps: usize, window_min: f64, taken_at_ms: f64, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), n_videos * n_ps);
        let mut totals = vec![0u64; n_ps];
        for v in 0..n_videos {
            for k in 0..n_ps {
                totals[k] += counts[v * n_ps + k];
            }
        }
        let probs = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let t = totals[i % n_ps];
                if t == 0 {
                    0.0
                } else {
                    c as f64 / t as f64
                }
            })
            .collect();
        PopularitySnapshot {
            n_videos,
            n_ps,
            window_min,
            taken_at_ms,
            counts,
            probs,
        }
    }

    /// Snapshot carrying known request probabilities instead of observed counts.
    /// `per_ps[k][v]` is the share of video `v` at proxy `k`.
    pub fn from_probabilities(per_ps: &[Vec<f64>], window_min: f64) -> Self {
        let n_ps = per_ps.len();
        let n_videos = per_ps.first().map_or(0, Vec::len);
        let mut probs = vec![0.0; n_videos * n_ps];
        for (k, col) in per_ps.iter().enumerate() {
            assert_eq!(col.len(), n_videos, "ragged probability matrix");
            for (v, &p) in col.iter().enumerate() {
                probs[v * n_ps + k] = p;
            }
        }
        PopularitySnapshot {
            n_videos,
            n_ps,
            window_min,
            taken_at_ms: 0.0,
            counts: vec![0; n_videos * n_ps],
            probs,
        }
    }

    pub fn count(&self, video: VideoId, ps: usize) -> u64 {
        self.counts[video.index() * self.n_ps + ps]
    }

    pub fn prob(&self, video: VideoId, ps: usize) -> f64 {
        self.probs[video.index() * self.n_ps + ps]
    }

    /// `x_i^k` for all proxies `k`.
    pub fn row(&self, video: VideoId) -> &[f64] {
        let start = video.index() * self.n_ps;
        &self.probs[start..start + self.n_ps]
    }

    pub fn column_total(&self, ps: usize) -> u64 {
        (0..self.n_videos).map(|v| self.counts[v * self.n_ps + ps]).sum()
    }

    pub fn mean_share(&self, video: VideoId) -> f64 {
        if self.n_ps == 0 {
            return 0.0;
        }
        self.row(video).iter().sum::<f64>() / self.n_ps as f64
    }

    /// Restriction to a subset of proxies, renumbered `0..ps.len()` in the given order.
    pub fn select(&self, ps: &[PsId]) -> PopularitySnapshot {
        let m = ps.len();
        let mut counts = vec![0; self.n_videos * m];
        let mut probs = vec![0.0; self.n_videos * m];
        for v in 0..self.n_videos {
            for (j, p) in ps.iter().enumerate() {
                counts[v * m + j] = self.counts[v * self.n_ps + p.0];
                probs[v * m + j] = self.probs[v * self.n_ps + p.0];
            }
        }
        PopularitySnapshot {
            n_videos: self.n_videos,
            n_ps: m,
            window_min: self.window_min,
            taken_at_ms: self.taken_at_ms,
            counts,
            probs,
        }
    }
}

/// Sliding-window request counter per (video, proxy).
///
/// Each proxy keeps a timestamped log; entries leave the window lazily when
/// that proxy observes a later request or is advanced explicitly.
#[derive(Clone, Debug)]
pub struct DemandTracker {
    n_videos: usize,
    n_ps: usize,
    window_min: f64,
    counts: Vec<u64>,
    totals: Vec<u64>,
    logs: Vec<VecDeque<(f64, VideoId)>>,
    last_ms: Vec<f64>,
}

impl DemandTracker {
    pub fn new(n_videos: usize, n_ps: usize, window_min: f64) -> Self {
        DemandTracker {
            n_videos,
            n_ps,
            window_min,
            counts: vec![0; n_videos * n_ps],
            totals: vec![0; n_ps],
            logs: vec![VecDeque::new(); n_ps],
            last_ms: vec![f64::NEG_INFINITY; n_ps],
        }
    }

    pub fn window_min(&self) -> f64 {
        self.window_min
    }

    fn window_ms(&self) -> f64 {
        self.window_min * 60_000.0
    }

    pub fn observe(&mut self, video: VideoId, ps: PsId, time_ms: f64) -> Result<()> {
        if video.0 == 0 || video.index() >= self.n_videos {
            return Err(Error::invalid(format!("unknown video {video}")));
        }
        if ps.0 >= self.n_ps {
            return Err(Error::invalid(format!("unknown proxy {ps}")));
        }
        if time_ms < self.last_ms[ps.0] {
            return Err(Error::invalid(format!(
                "time went backwards at {ps}: {time_ms} < {}",
                self.last_ms[ps.0]
            )));
        }
        self.advance(ps, time_ms);
        self.logs[ps.0].push_back((time_ms, video));
        self.counts[video.index() * self.n_ps + ps.0] += 1;
        self.totals[ps.0] += 1;
        Ok(())
    }

    /// Expire everything at `ps` that is at least one window older than `now_ms`.
    pub fn advance(&mut self, ps: PsId, now_ms: f64) {
        let cutoff = now_ms - self.window_ms();
        self.last_ms[ps.0] = self.last_ms[ps.0].max(now_ms);
        let log = &mut self.logs[ps.0];
        while let Some(&(t, v)) = log.front() {
            if t > cutoff {
                break;
            }
            log.pop_front();
            self.counts[v.index() * self.n_ps + ps.0] -= 1;
            self.totals[ps.0] -= 1;
        }
    }

    /// Live in-window share of `video` at `ps` as of the last advance.
    pub fn share(&self, video: VideoId, ps: PsId) -> f64 {
        let total = self.totals[ps.0];
        if total == 0 {
            0.0
        } else {
            self.counts[video.index() * self.n_ps + ps.0] as f64 / total as f64
        }
    }

    pub fn in_window(&self, ps: PsId) -> u64 {
        self.totals[ps.0]
    }

    /// Counts requests with `at_ms - window < t <= at_ms`. Does not mutate state.
    pub fn snapshot(&self, at_ms: f64) -> PopularitySnapshot {
        let cutoff = at_ms - self.window_ms();
        let mut counts = vec![0u64; self.n_videos * self.n_ps];
        for (k, log) in self.logs.iter().enumerate() {
            for &(t, v) in log {
                if t > cutoff && t <= at_ms {
                    counts[v.index() * self.n_ps + k] += 1;
                }
            }
        }
        PopularitySnapshot::from_counts(self.n_videos, self.n_ps, self.window_min, at_ms, counts)
    }
}
