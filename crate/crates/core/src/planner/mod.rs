//! Prefix sizing and replica placement for one proxy group (LPSG).
//!
//! Proxies are addressed by local index `0..M` inside the group. All three
//! strategies produce a [`PlacementPlan`] that [`validate_plan`] can check
//! against the storage, distinct-server and replica-count constraints.

mod baselines;
mod format;
mod rpr_p;
pub mod sizing;
mod validate;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{minutes_to_bits, PopularitySnapshot, Video};
use crate::error::Error;
use crate::ids::VideoId;

pub use baselines::{default_slfa_replica_budget, plan_cr_rr, plan_zipf_slfa};
pub use format::{parse_plan, write_plan};
pub use rpr_p::plan_rpr_p;
pub use sizing::{size_prefixes_global, size_prefixes_regional, PrefixSizes, RegionalSizes};
pub use validate::{validate_plan, Violation};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "rpr-p")]
    RprP,
    #[serde(rename = "zipf-slfa")]
    ZipfSlfa,
    #[serde(rename = "cr-rr")]
    CrRr,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::RprP, Strategy::ZipfSlfa, Strategy::CrRr];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::RprP => "rpr-p",
            Strategy::ZipfSlfa => "zipf-slfa",
            Strategy::CrRr => "cr-rr",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rpr-p" | "rprp" => Ok(Strategy::RprP),
            "zipf-slfa" | "zipfr-slfa" | "slfa" => Ok(Strategy::ZipfSlfa),
            "cr-rr" | "crrr" | "rr" => Ok(Strategy::CrRr),
            other => Err(Error::invalid(format!("unknown strategy `{other}`"))),
        }
    }
}

/// How many bits a cached prefix occupies.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum CostModel {
    /// `d · 60 · b_i`.
    #[default]
    Analytic,
    /// Analytic cost times a per-video factor (indexed by catalog position),
    /// e.g. block-allocation overhead measured on a sample trace.
    Scaled(Vec<f64>),
}

impl CostModel {
    pub fn cost_bits(&self, video: &Video, minutes: f64) -> u64 {
        let base = minutes_to_bits(minutes, video.encoding_rate_bps);
        let bits = match self {
            CostModel::Analytic => base,
            CostModel::Scaled(f) => base * f[video.id.index()],
        };
        bits.ceil() as u64
    }
}

/// Storage envelope of one group: per-proxy capacity `B` and tracker capacity `P`.
#[derive(Clone, Debug, PartialEq)]
pub struct Budgets {
    pub ps_bits: Vec<u64>,
    pub tr_bits: u64,
    pub cost: CostModel,
}

impl Budgets {
    pub fn new(ps_bits: Vec<u64>, tr_bits: u64) -> Self {
        Budgets {
            ps_bits,
            tr_bits,
            cost: CostModel::Analytic,
        }
    }

    pub fn n_ps(&self) -> usize {
        self.ps_bits.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerConfig {
    /// Popularity threshold `t_p`; `None` means `1/N`.
    pub threshold: Option<f64>,
    /// Floor for any nonzero prefix, minutes.
    pub min_prefix_min: f64,
    /// Prefix length used by both baselines, minutes (capped at the video length).
    pub baseline_prefix_min: f64,
    /// Aggregate replica budget for Zipf replication; `None` derives it from storage.
    pub slfa_total_replicas: Option<usize>,
    /// Replicas per video under classical replication.
    pub crrr_replicas: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            threshold: None,
            min_prefix_min: 1.0,
            baseline_prefix_min: 25.0,
            slfa_total_replicas: None,
            crrr_replicas: 1,
        }
    }
}

impl PlannerConfig {
    pub fn threshold_for(&self, n_videos: usize) -> f64 {
        self.threshold.unwrap_or(1.0 / n_videos.max(1) as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Replica {
    /// Local proxy index.
    pub ps: usize,
    pub d1_min: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrefixAssignment {
    pub video: VideoId,
    pub replicas: Vec<Replica>,
    /// Second prefix cached at the tracker; 0 means none.
    pub d2_min: f64,
}

impl PrefixAssignment {
    pub fn replica_count(&self) -> usize {
        self.replicas.len()
    }

    pub fn d1_at(&self, ps: usize) -> Option<f64> {
        self.replicas.iter().find(|r| r.ps == ps).map(|r| r.d1_min)
    }

    /// Suffix left at the main server for a client served by `ps`.
    pub fn suffix_min(&self, ps: usize, duration_min: f64) -> f64 {
        duration_min - self.d1_at(ps).unwrap_or(0.0) - self.d2_min
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlacementPlan {
    pub strategy: Strategy,
    pub epoch_ms: f64,
    pub n_ps: usize,
    /// Sorted by video id; videos with neither prefix are absent.
    pub assignments: Vec<PrefixAssignment>,
    /// Popular somewhere but no selected proxy had room; served by sharing.
    pub share_only: BTreeSet<VideoId>,
    pub diagnostics: Vec<String>,
}

impl PlacementPlan {
    pub fn empty(strategy: Strategy, n_ps: usize) -> Self {
        PlacementPlan {
            strategy,
            epoch_ms: 0.0,
            n_ps,
            assignments: Vec::new(),
            share_only: BTreeSet::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn assignment(&self, video: VideoId) -> Option<&PrefixAssignment> {
        self.assignments
            .binary_search_by_key(&video, |a| a.video)
            .ok()
            .map(|i| &self.assignments[i])
    }

    pub fn replica_set(&self, video: VideoId) -> Vec<usize> {
        self.assignment(video)
            .map(|a| a.replicas.iter().map(|r| r.ps).collect())
            .unwrap_or_default()
    }

    pub fn total_replicas(&self) -> usize {
        self.assignments.iter().map(|a| a.replicas.len()).sum()
    }

    pub fn ps_load_bits(&self, ps: usize, catalog: &[Video], cost: &CostModel) -> u64 {
        self.assignments
            .iter()
            .flat_map(|a| a.replicas.iter().map(move |r| (a.video, r)))
            .filter(|(_, r)| r.ps == ps)
            .map(|(v, r)| cost.cost_bits(&catalog[v.index()], r.d1_min))
            .sum()
    }

    pub fn tr_load_bits(&self, catalog: &[Video], cost: &CostModel) -> u64 {
        self.assignments
            .iter()
            .filter(|a| a.d2_min > 0.0)
            .map(|a| cost.cost_bits(&catalog[a.video.index()], a.d2_min))
            .sum()
    }

    fn push(&mut self, a: PrefixAssignment) {
        if !a.replicas.is_empty() || a.d2_min > 0.0 {
            self.assignments.push(a);
        }
    }

    fn finish(mut self) -> Self {
        self.assignments.sort_by_key(|a| a.video);
        for a in &mut self.assignments {
            a.replicas.sort_by_key(|r| r.ps);
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PopularityClass {
    Global,
    /// Local indices of the proxies where the share exceeds the threshold.
    Regional(Vec<usize>),
    Unpopular,
}

/// Global when every proxy's share exceeds `t_p`, regional when some do.
pub fn classify_video(snapshot: &PopularitySnapshot, video: VideoId, threshold: f64) -> PopularityClass {
    classify_row(snapshot.row(video), threshold)
}

pub fn classify_row(x: &[f64], threshold: f64) -> PopularityClass {
    let hot: Vec<usize> = (0..x.len()).filter(|&k| x[k] > threshold).collect();
    if hot.is_empty() {
        PopularityClass::Unpopular
    } else if hot.len() == x.len() {
        PopularityClass::Global
    } else {
        PopularityClass::Regional(hot)
    }
}

/// Applies the minimum-length floor to a raw first prefix.
pub(crate) fn floor_d1(raw: f64, duration: f64, min_prefix: f64) -> f64 {
    raw.max(min_prefix).min(duration)
}

/// Floors a raw second prefix and fits it into what the first prefix leaves.
/// A raw value of zero stays zero.
pub(crate) fn floor_d2(raw: f64, room: f64, min_prefix: f64) -> f64 {
    if raw <= 0.0 || room <= 0.0 {
        0.0
    } else {
        raw.max(min_prefix).min(room)
    }
}

/// Planning order: descending mean share, then ascending id.
pub(crate) fn popularity_order(catalog: &[Video], score: impl Fn(VideoId) -> f64) -> Vec<VideoId> {
    let mut ids: Vec<(VideoId, f64)> = catalog.iter().map(|v| (v.id, score(v.id))).collect();
    ids.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ids.into_iter().map(|(v, _)| v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_cases() {
        assert_eq!(classify_row(&[0.2, 0.2, 0.2], 0.1), PopularityClass::Global);
        assert_eq!(classify_row(&[0.2, 0.0, 0.0], 0.1), PopularityClass::Regional(vec![0]));
        assert_eq!(classify_row(&[0.0, 0.0, 0.0], 0.05), PopularityClass::Unpopular);
        assert_eq!(classify_row(&[0.1, 0.3], 0.1), PopularityClass::Regional(vec![1]));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("lru".parse::<Strategy>().is_err());
    }

    #[test]
    fn floors() {
        assert_eq!(floor_d1(0.2, 90.0, 1.0), 1.0);
        assert_eq!(floor_d1(120.0, 90.0, 1.0), 90.0);
        assert_eq!(floor_d2(0.0, 30.0, 1.0), 0.0);
        assert_eq!(floor_d2(0.5, 30.0, 1.0), 1.0);
        assert_eq!(floor_d2(0.5, 0.4, 1.0), 0.4);
    }
}
