//! Line-oriented plan dump for diffing runs.
//!
//! ```text
//! # plan strategy=rpr-p epoch_ms=0 n_ps=6
//! [ps]
//! <video> <ps> <d1_min>
//! [tr]
//! <video> <d2_min>
//! [share-only]
//! <video>
//! # note <diagnostic>
//! ```

use std::fmt::Write as _;

use super::{PlacementPlan, PrefixAssignment, Replica, Strategy};
use crate::error::{Error, Result};
use crate::ids::VideoId;

pub fn write_plan(plan: &PlacementPlan) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# plan strategy={} epoch_ms={} n_ps={}",
        plan.strategy, plan.epoch_ms, plan.n_ps
    );
    out.push_str("[ps]\n");
    for a in &plan.assignments {
        for r in &a.replicas {
            let _ = writeln!(out, "{} {} {}", a.video.0, r.ps, r.d1_min);
        }
    }
    out.push_str("[tr]\n");
    for a in plan.assignments.iter().filter(|a| a.d2_min > 0.0) {
        let _ = writeln!(out, "{} {}", a.video.0, a.d2_min);
    }
    out.push_str("[share-only]\n");
    for v in &plan.share_only {
        let _ = writeln!(out, "{}", v.0);
    }
    for d in &plan.diagnostics {
        let _ = writeln!(out, "# note {}", d.replace('\n', " "));
    }
    out
}

/// Inverse of [`write_plan`].
pub fn parse_plan(text: &str) -> Result<PlacementPlan> {
    let mut plan: Option<PlacementPlan> = None;
    let mut section = "";
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let bad = |reason: &str| Error::Parse {
            line: n + 1,
            reason: reason.to_string(),
        };
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix("# plan") {
            let mut strategy = None;
            let mut epoch_ms = 0.0;
            let mut n_ps = 0;
            for kv in header.split_whitespace() {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad("malformed header"))?;
                match k {
                    "strategy" => strategy = Some(v.parse::<Strategy>()?),
                    "epoch_ms" => epoch_ms = v.parse().map_err(|_| bad("bad epoch"))?,
                    "n_ps" => n_ps = v.parse().map_err(|_| bad("bad n_ps"))?,
                    _ => return Err(bad("unknown header key")),
                }
            }
            let mut p = PlacementPlan::empty(strategy.ok_or_else(|| bad("missing strategy"))?, n_ps);
            p.epoch_ms = epoch_ms;
            plan = Some(p);
            continue;
        }
        if let Some(note) = line.strip_prefix("# note ") {
            plan.as_mut().ok_or_else(|| bad("note before header"))?.diagnostics.push(note.to_string());
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[ps]" => "ps",
                "[tr]" => "tr",
                "[share-only]" => "share",
                _ => return Err(bad("unknown section")),
            };
            continue;
        }
        let p = plan.as_mut().ok_or_else(|| bad("data before header"))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        let vid = |s: &str| s.parse::<u32>().map(VideoId).map_err(|_| bad("bad video id"));
        match (section, f.len()) {
            ("ps", 3) => {
                let video = vid(f[0])?;
                let ps = f[1].parse().map_err(|_| bad("bad proxy"))?;
                let d1_min = f[2].parse().map_err(|_| bad("bad d1"))?;
                entry(p, video).replicas.push(Replica { ps, d1_min });
            }
            ("tr", 2) => {
                let video = vid(f[0])?;
                entry(p, video).d2_min = f[1].parse().map_err(|_| bad("bad d2"))?;
            }
            ("share", 1) => {
                p.share_only.insert(vid(f[0])?);
            }
            _ => return Err(bad("wrong field count for section")),
        }
    }
    let mut plan = plan.ok_or(Error::Parse {
        line: 0,
        reason: "missing plan header".into(),
    })?;
    plan.assignments.sort_by_key(|a| a.video);
    Ok(plan)
}

fn entry(plan: &mut PlacementPlan, video: VideoId) -> &mut PrefixAssignment {
    let idx = match plan.assignments.iter().position(|a| a.video == video) {
        Some(i) => i,
        None => {
            plan.assignments.push(PrefixAssignment {
                video,
                replicas: Vec::new(),
                d2_min: 0.0,
            });
            plan.assignments.len() - 1
        }
    };
    &mut plan.assignments[idx]
}
