use std::collections::BTreeSet;
use std::fmt;

use super::{Budgets, PlacementPlan};
use crate::catalog::Video;
use crate::ids::VideoId;

const LENGTH_SLACK_MIN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    StoragePs { ps: usize, used_bits: u64, capacity_bits: u64 },
    StorageTr { used_bits: u64, capacity_bits: u64 },
    DuplicateServer { video: VideoId, ps: usize },
    ReplicaBound { video: VideoId, replicas: usize, max: usize },
    UnknownServer { video: VideoId, ps: usize },
    UnknownVideo { video: VideoId },
    PrefixLength { video: VideoId, ps: Option<usize>, detail: String },
}

impl Violation {
    pub fn constraint(&self) -> &'static str {
        match self {
            Violation::StoragePs { .. } => "storage-PS",
            Violation::StorageTr { .. } => "storage-TR",
            Violation::DuplicateServer { .. } => "duplicate-server",
            Violation::ReplicaBound { .. } => "replica-bound",
            Violation::UnknownServer { .. } => "unknown-server",
            Violation::UnknownVideo { .. } => "unknown-video",
            Violation::PrefixLength { .. } => "prefix-length",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.constraint())?;
        match self {
            Violation::StoragePs { ps, used_bits, capacity_bits } => {
                write!(f, "proxy {ps} holds {used_bits} bits > {capacity_bits}")
            }
            Violation::StorageTr { used_bits, capacity_bits } => {
                write!(f, "tracker holds {used_bits} bits > {capacity_bits}")
            }
            Violation::DuplicateServer { video, ps } => write!(f, "{video} twice on proxy {ps}"),
            Violation::ReplicaBound { video, replicas, max } => {
                write!(f, "{video} has {replicas} replicas, allowed 1..={max}")
            }
            Violation::UnknownServer { video, ps } => write!(f, "{video} placed on missing proxy {ps}"),
            Violation::UnknownVideo { video } => write!(f, "{video} not in catalog"),
            Violation::PrefixLength { video, ps, detail } => match ps {
                Some(ps) => write!(f, "{video} at proxy {ps}: {detail}"),
                None => write!(f, "{video}: {detail}"),
            },
        }
    }
}

/// Re-reads a plan against the budgets and reports every broken constraint.
/// Loads are recomputed from prefix lengths, not taken from the planner.
pub fn validate_plan(plan: &PlacementPlan, budgets: &Budgets, catalog: &[Video]) -> Vec<Violation> {
    let m = budgets.n_ps();
    let mut out = Vec::new();
    let mut ps_used = vec![0u64; m];
    let mut tr_used = 0u64;

    for a in &plan.assignments {
        let video = match a.video.0 {
            0 => None,
            _ => catalog.get(a.video.index()),
        };
        let Some(video) = video else {
            out.push(Violation::UnknownVideo { video: a.video });
            continue;
        };
        let s = video.duration_min;

        if a.replicas.len() > m || (a.replicas.is_empty() && a.d2_min <= 0.0) {
            out.push(Violation::ReplicaBound {
                video: a.video,
                replicas: a.replicas.len(),
                max: m,
            });
        }
        if a.d2_min < 0.0 || a.d2_min.is_nan() {
            out.push(Violation::PrefixLength {
                video: a.video,
                ps: None,
                detail: format!("second prefix {} is negative", a.d2_min),
            });
        }

        let mut seen = BTreeSet::new();
        for r in &a.replicas {
            if !seen.insert(r.ps) {
                out.push(Violation::DuplicateServer { video: a.video, ps: r.ps });
            }
            if r.ps >= m {
                out.push(Violation::UnknownServer { video: a.video, ps: r.ps });
                continue;
            }
            if !(r.d1_min > 0.0) {
                out.push(Violation::PrefixLength {
                    video: a.video,
                    ps: Some(r.ps),
                    detail: format!("first prefix {} is not positive", r.d1_min),
                });
            } else if r.d1_min + a.d2_min.max(0.0) > s + LENGTH_SLACK_MIN {
                out.push(Violation::PrefixLength {
                    video: a.video,
                    ps: Some(r.ps),
                    detail: format!("d1 {} + d2 {} exceeds duration {s}", r.d1_min, a.d2_min),
                });
            }
            ps_used[r.ps] += budgets.cost.cost_bits(video, r.d1_min.max(0.0));
        }
        if a.d2_min > 0.0 {
            if a.d2_min > s + LENGTH_SLACK_MIN {
                out.push(Violation::PrefixLength {
                    video: a.video,
                    ps: None,
                    detail: format!("second prefix {} exceeds duration {s}", a.d2_min),
                });
            }
            tr_used += budgets.cost.cost_bits(video, a.d2_min);
        }
    }

    for (ps, (&used, &cap)) in ps_used.iter().zip(&budgets.ps_bits).enumerate() {
        if used > cap {
            out.push(Violation::StoragePs {
                ps,
                used_bits: used,
                capacity_bits: cap,
            });
        }
    }
    if tr_used > budgets.tr_bits {
        out.push(Violation::StorageTr {
            used_bits: tr_used,
            capacity_bits: budgets.tr_bits,
        });
    }
    out
}
