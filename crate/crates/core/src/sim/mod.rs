//! Discrete-event model of the proxy cluster.
//!
//! Time is in milliseconds from the start of the run. Events at equal time
//! are handled in the order: session ends, re-plan, utilization sample,
//! arrival.

pub mod config;
mod kernel;
pub mod log;
pub mod topology;
pub mod workload;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::ids::PsId;

pub use config::{SessionHold, SimConfig};
pub use kernel::{initial_plans, run_simulation, run_with_log, SimRun, SystemState};
pub use log::{EventLog, LogRecord};
pub use topology::{build_topology, ClusterTopology, LinkDelays};
pub use workload::{generate_workload, regional_pmfs, Request};

/// Where the first bytes of a served request came from.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    ParentPs,
    PeerPs,
    /// Second prefix at the group's own tracker, relayed by the parent proxy.
    TrackerPref2,
    NeighborTracker,
    NeighborPs,
    Mms,
}

impl Source {
    pub const ALL: [Source; 6] = [
        Source::ParentPs,
        Source::PeerPs,
        Source::TrackerPref2,
        Source::NeighborTracker,
        Source::NeighborPs,
        Source::Mms,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::ParentPs => "parent-ps",
            Source::PeerPs => "peer-ps",
            Source::TrackerPref2 => "tracker",
            Source::NeighborTracker => "neighbor-tr",
            Source::NeighborPs => "neighbor-ps",
            Source::Mms => "mms",
        }
    }

    pub fn is_miss(self) -> bool {
        self != Source::ParentPs
    }

    pub fn within_lpsg(self) -> bool {
        matches!(self, Source::ParentPs | Source::PeerPs | Source::TrackerPref2)
    }

    /// Path latency to the client's first byte.
    pub fn path_delay_ms(self, d: &LinkDelays) -> f64 {
        match self {
            Source::ParentPs => d.ps_client_ms,
            Source::PeerPs => d.ps_ps_ms + d.ps_client_ms,
            Source::TrackerPref2 => d.tr_ps_ms + d.ps_client_ms,
            Source::NeighborTracker => d.tr_tr_ms + d.tr_ps_ms + d.ps_client_ms,
            Source::NeighborPs => 2.0 * d.tr_ps_ms + d.tr_tr_ms + d.ps_client_ms,
            Source::Mms => d.mms_ps_ms + d.ps_client_ms,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    /// No copy anywhere and no fallback to the main server.
    Unavailable,
    NoBandwidth,
    /// Downloaded prefix would not fit at the parent even after eviction.
    NoRoomAfterDownload,
}

impl RejectReason {
    pub const ALL: [RejectReason; 3] = [
        RejectReason::Unavailable,
        RejectReason::NoBandwidth,
        RejectReason::NoRoomAfterDownload,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Unavailable => "unavailable",
            RejectReason::NoBandwidth => "no-bandwidth",
            RejectReason::NoRoomAfterDownload => "no-room-after-download",
        }
    }
}

macro_rules! parse_by_name {
    ($t:ty) => {
        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Error> {
                <$t>::ALL
                    .into_iter()
                    .find(|x| x.as_str() == s)
                    .ok_or_else(|| Error::invalid(format!("unknown tag `{s}`")))
            }
        }

        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

parse_by_name!(Source);
parse_by_name!(RejectReason);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ServiceOutcome {
    Served {
        source: Source,
        /// Proxy whose outgoing bandwidth carries the stream.
        serving: PsId,
        delay_ms: f64,
    },
    Rejected(RejectReason),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_path_delays() {
        let d = LinkDelays {
            ps_client_ms: 100.0,
            ps_ps_ms: 100.0,
            tr_ps_ms: 100.0,
            tr_tr_ms: 300.0,
            mms_ps_ms: 1200.0,
        };
        let got: Vec<f64> = Source::ALL.iter().map(|s| s.path_delay_ms(&d)).collect();
        assert_eq!(got, vec![100.0, 200.0, 200.0, 500.0, 600.0, 1300.0]);
    }

    #[test]
    fn tags_round_trip() {
        for s in Source::ALL {
            assert_eq!(s.as_str().parse::<Source>().unwrap(), s);
        }
        for r in RejectReason::ALL {
            assert_eq!(r.to_string().parse::<RejectReason>().unwrap(), r);
        }
    }
}
