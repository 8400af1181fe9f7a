//! Scenario configuration: a flat TOML key-value file.
//!
//! Every key is optional; missing keys take the defaults of the reference
//! setup (6 groups of 6 proxies, 300 videos, skew 0.75, 35–50 requests per
//! proxy per minute). See `README.md` for the full key list.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::planner::PlannerConfig;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SessionHold {
    /// A proxy's bandwidth is held while it streams the cached portion it serves.
    #[default]
    Prefix,
    /// Held for the whole video.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    // topology
    pub z_lpsgs: usize,
    pub m_ps_per_lpsg: usize,
    pub clients_per_ps: usize,
    pub ps_bandwidth_bps: u64,
    pub ps_storage_gb: [f64; 2],
    /// Cache size ratio main server : tracker : proxy.
    pub storage_ratio: [f64; 3],

    // link delays, milliseconds
    pub ps_client_ms: f64,
    pub ps_ps_ms: f64,
    pub tr_ps_ms: f64,
    pub tr_tr_ms: f64,
    pub mms_ps_ms: f64,

    // catalog and demand
    pub n_videos: usize,
    pub video_duration_min: [f64; 2],
    pub encoding_rate_bps: u64,
    pub theta: f64,
    pub rate_per_ps_per_min: [f64; 2],
    /// Ranks reshuffled independently at every proxy to create regional hot sets.
    pub regional_top_ranks: usize,
    pub sim_duration_min: f64,
    pub warmup_fraction: f64,

    // planning
    pub popularity_threshold: Option<f64>,
    pub min_prefix_min: f64,
    pub baseline_prefix_min: f64,
    pub slfa_total_replicas: Option<usize>,
    pub crrr_replicas: usize,
    pub demand_window_min: f64,
    /// Re-plan from observed demand every this many minutes; static plan when absent.
    pub replan_every_min: Option<f64>,

    // request handling
    pub tracker_head: bool,
    pub mms_fallback: bool,
    /// Keep prefixes fetched from the main server at the parent proxy.
    pub cache_downloads: bool,
    /// Streams from another proxy pass through the parent, using bandwidth at both.
    pub relay_through_parent: bool,
    pub session_hold: SessionHold,
    pub sample_every_min: f64,

    // block allocation
    pub sc_caching: bool,
    pub sc_block_bits: u64,
    pub sc_sample_min: f64,
    pub renegotiation_latency_ms: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            z_lpsgs: 6,
            m_ps_per_lpsg: 6,
            clients_per_ps: 50,
            ps_bandwidth_bps: 1_500_000_000,
            ps_storage_gb: [60.0, 200.0],
            storage_ratio: [10.0, 4.0, 2.0],
            ps_client_ms: 100.0,
            ps_ps_ms: 100.0,
            tr_ps_ms: 100.0,
            tr_tr_ms: 300.0,
            mms_ps_ms: 1200.0,
            n_videos: 300,
            video_duration_min: [20.0, 120.0],
            encoding_rate_bps: 1_500_000,
            theta: 0.75,
            rate_per_ps_per_min: [35.0, 50.0],
            regional_top_ranks: 100,
            sim_duration_min: 480.0,
            warmup_fraction: 0.1,
            popularity_threshold: None,
            min_prefix_min: 1.0,
            baseline_prefix_min: 25.0,
            slfa_total_replicas: Some(600),
            crrr_replicas: 1,
            demand_window_min: 60.0,
            replan_every_min: None,
            tracker_head: true,
            mms_fallback: true,
            cache_downloads: true,
            relay_through_parent: true,
            session_hold: SessionHold::Prefix,
            sample_every_min: 1.0,
            sc_caching: false,
            sc_block_bits: crate::sccache::DEFAULT_BLOCK_BITS,
            sc_sample_min: 2.0,
            renegotiation_latency_ms: 0.0,
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::config(
            e.span().map(|s| &text[s]).unwrap_or("<file>"),
            e.message().to_string(),
        ))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Short stable hash of the canonical serialization.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_toml().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            threshold: self.popularity_threshold,
            min_prefix_min: self.min_prefix_min,
            baseline_prefix_min: self.baseline_prefix_min,
            slfa_total_replicas: self.slfa_total_replicas,
            crrr_replicas: self.crrr_replicas,
        }
    }

    pub fn n_ps(&self) -> usize {
        self.z_lpsgs * self.m_ps_per_lpsg
    }

    pub fn warmup_ms(&self) -> f64 {
        self.sim_duration_min * self.warmup_fraction * 60_000.0
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        }
        fn non_negative(field: &str, v: f64) -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be non-negative, got {v}")))
            }
        }
        fn range(field: &str, r: [f64; 2], allow_zero: bool) -> Result<()> {
            let lo_ok = if allow_zero { r[0] >= 0.0 } else { r[0] > 0.0 };
            if lo_ok && r[0] <= r[1] && r[1].is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("bad range [{}, {}]", r[0], r[1])))
            }
        }
        for (field, v) in [
            ("z_lpsgs", self.z_lpsgs),
            ("m_ps_per_lpsg", self.m_ps_per_lpsg),
            ("clients_per_ps", self.clients_per_ps),
            ("n_videos", self.n_videos),
            ("crrr_replicas", self.crrr_replicas),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if self.ps_bandwidth_bps == 0 {
            return Err(Error::config("ps_bandwidth_bps", "must be positive"));
        }
        if self.encoding_rate_bps == 0 {
            return Err(Error::config("encoding_rate_bps", "must be positive"));
        }
        if self.sc_block_bits == 0 {
            return Err(Error::config("sc_block_bits", "must be positive"));
        }
        range("ps_storage_gb", self.ps_storage_gb, false)?;
        range("video_duration_min", self.video_duration_min, false)?;
        range("rate_per_ps_per_min", self.rate_per_ps_per_min, false)?;
        if self.storage_ratio.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::config("storage_ratio", "entries must be positive"));
        }
        for (field, v) in [
            ("ps_client_ms", self.ps_client_ms),
            ("ps_ps_ms", self.ps_ps_ms),
            ("tr_ps_ms", self.tr_ps_ms),
            ("tr_tr_ms", self.tr_tr_ms),
            ("mms_ps_ms", self.mms_ps_ms),
            ("theta", self.theta),
            ("sim_duration_min", self.sim_duration_min),
            ("renegotiation_latency_ms", self.renegotiation_latency_ms),
        ] {
            non_negative(field, v)?;
        }
        for (field, v) in [
            ("min_prefix_min", self.min_prefix_min),
            ("baseline_prefix_min", self.baseline_prefix_min),
            ("demand_window_min", self.demand_window_min),
            ("sample_every_min", self.sample_every_min),
            ("sc_sample_min", self.sc_sample_min),
        ] {
            positive(field, v)?;
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::config("warmup_fraction", "must be in [0, 1)"));
        }
        if let Some(t) = self.popularity_threshold {
            if !(0.0..1.0).contains(&t) {
                return Err(Error::config("popularity_threshold", "must be in [0, 1)"));
            }
        }
        if let Some(e) = self.replan_every_min {
            positive("replan_every_min", e)?;
        }
        Ok(())
    }
}
