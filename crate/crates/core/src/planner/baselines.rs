//! Reconstructed comparison strategies. Both replicate a fixed-length prefix
//! regardless of observed demand and use no tracker storage.

use super::{popularity_order, Budgets, PlacementPlan, PlannerConfig, PrefixAssignment, Replica, Strategy};
use crate::catalog::Video;
use crate::error::{Error, Result};

fn baseline_d1(video: &Video, cfg: &PlannerConfig) -> f64 {
    cfg.baseline_prefix_min.min(video.duration_min)
}

/// Replica budget that fills the group's storage with baseline prefixes of
/// average cost, bounded to `[N, N·M]`.
pub fn default_slfa_replica_budget(catalog: &[Video], budgets: &Budgets, cfg: &PlannerConfig) -> usize {
    let n = catalog.len();
    if n == 0 {
        return 0;
    }
    let mean_cost = catalog
        .iter()
        .map(|v| budgets.cost.cost_bits(v, baseline_d1(v, cfg)) as f64)
        .sum::<f64>()
        / n as f64;
    let total: f64 = budgets.ps_bits.iter().map(|&b| b as f64).sum();
    let slots = if mean_cost > 0.0 { (total / mean_cost).floor() as usize } else { n };
    slots.clamp(n, n * budgets.n_ps().max(1))
}

/// Zipf replication with smallest-load-first placement.
///
/// `r_i = clamp(round(p_i · R), 1, M)`; each replica goes to the proxy with the
/// least committed storage that does not already hold the video.
pub fn plan_zipf_slfa(
    catalog: &[Video],
    pmf: &[f64],
    budgets: &Budgets,
    cfg: &PlannerConfig,
) -> Result<PlacementPlan> {
    if pmf.len() != catalog.len() {
        return Err(Error::invalid("pmf length differs from catalog size"));
    }
    let m = budgets.n_ps();
    let total = cfg
        .slfa_total_replicas
        .unwrap_or_else(|| default_slfa_replica_budget(catalog, budgets, cfg));
    let mut plan = PlacementPlan::empty(Strategy::ZipfSlfa, m);
    let mut load = vec![0u64; m];

    for vid in popularity_order(catalog, |v| pmf[v.index()]) {
        let video = &catalog[vid.index()];
        let wanted = ((pmf[vid.index()] * total as f64).round() as usize).clamp(1, m.max(1));
        let d1 = baseline_d1(video, cfg);
        let bits = budgets.cost.cost_bits(video, d1);
        let mut replicas: Vec<Replica> = Vec::with_capacity(wanted);
        for _ in 0..wanted {
            let target = (0..m)
                .filter(|&k| replicas.iter().all(|r| r.ps != k))
                .filter(|&k| budgets.ps_bits[k] - load[k] >= bits)
                .min_by_key(|&k| (load[k], k));
            match target {
                Some(k) => {
                    load[k] += bits;
                    replicas.push(Replica { ps: k, d1_min: d1 });
                }
                None => {
                    plan.diagnostics.push(format!(
                        "{vid}: placed {} of {wanted} replicas, no proxy had room",
                        replicas.len()
                    ));
                    break;
                }
            }
        }
        plan.push(PrefixAssignment {
            video: vid,
            replicas,
            d2_min: 0.0,
        });
    }
    if plan.assignments.is_empty() && !catalog.is_empty() {
        plan.diagnostics.push("budgets too small to place any prefix".into());
    }
    Ok(plan.finish())
}

/// Classical replication: `r` replicas of every video, dealt round-robin over
/// the proxies in catalog order, skipping proxies without room.
pub fn plan_cr_rr(catalog: &[Video], budgets: &Budgets, cfg: &PlannerConfig) -> Result<PlacementPlan> {
    let m = budgets.n_ps();
    let r = cfg.crrr_replicas.clamp(1, m.max(1));
    let mut plan = PlacementPlan::empty(Strategy::CrRr, m);
    let mut free = budgets.ps_bits.clone();
    let mut cursor = 0usize;

    for video in catalog {
        let d1 = baseline_d1(video, cfg);
        let bits = budgets.cost.cost_bits(video, d1);
        let mut replicas: Vec<Replica> = Vec::with_capacity(r);
        let mut tried = 0;
        while replicas.len() < r && tried < m {
            let k = cursor % m;
            cursor += 1;
            tried += 1;
            if free[k] >= bits && replicas.iter().all(|x| x.ps != k) {
                free[k] -= bits;
                replicas.push(Replica { ps: k, d1_min: d1 });
            }
        }
        if replicas.len() < r {
            plan.diagnostics.push(format!(
                "{}: overflow, placed {} of {r} replicas",
                video.id,
                replicas.len()
            ));
        }
        plan.push(PrefixAssignment {
            video: video.id,
            replicas,
            d2_min: 0.0,
        });
    }
    if plan.assignments.is_empty() && !catalog.is_empty() {
        plan.diagnostics.push("budgets too small to place any prefix".into());
    }
    Ok(plan.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::VideoId;

    fn catalog(n: usize) -> Vec<Video> {
        (0..n)
            .map(|i| Video {
                id: VideoId::from_index(i),
                duration_min: 90.0,
                encoding_rate_bps: 1_500_000,
            })
            .collect()
    }

    fn ample(m: usize) -> Budgets {
        Budgets::new(vec![u64::MAX / 64; m], 0)
    }

    #[test]
    fn uniform_pmf_gives_single_replicas() {
        let c = catalog(12);
        let pmf = vec![1.0 / 12.0; 12];
        let cfg = PlannerConfig {
            slfa_total_replicas: Some(12),
            ..Default::default()
        };
        let plan = plan_zipf_slfa(&c, &pmf, &ample(4), &cfg).unwrap();
        assert!(plan.assignments.iter().all(|a| a.replica_count() == 1));
    }

    #[test]
    fn zipf_replica_counts_follow_rounding() {
        let c = catalog(2);
        let cfg = PlannerConfig {
            slfa_total_replicas: Some(5),
            ..Default::default()
        };
        let plan = plan_zipf_slfa(&c, &[0.8, 0.2], &ample(4), &cfg).unwrap();
        assert_eq!(plan.assignment(VideoId(1)).unwrap().replica_count(), 4);
        assert_eq!(plan.assignment(VideoId(2)).unwrap().replica_count(), 1);
    }

    #[test]
    fn round_robin_deal() {
        let c = catalog(4);
        let plan = plan_cr_rr(&c, &ample(2), &PlannerConfig::default()).unwrap();
        assert_eq!(plan.replica_set(VideoId(1)), vec![0]);
        assert_eq!(plan.replica_set(VideoId(2)), vec![1]);
        assert_eq!(plan.replica_set(VideoId(3)), vec![0]);
        assert_eq!(plan.replica_set(VideoId(4)), vec![1]);
    }

    #[test]
    fn full_replication_or_overflow() {
        let c = catalog(3);
        let cfg = PlannerConfig {
            crrr_replicas: 3,
            ..Default::default()
        };
        let plan = plan_cr_rr(&c, &ample(3), &cfg).unwrap();
        for a in &plan.assignments {
            assert_eq!(a.replica_count(), 3);
        }
        // room for two prefixes per proxy only
        let bits = ample(1).cost.cost_bits(&c[0], cfg.baseline_prefix_min);
        let tight = Budgets::new(vec![2 * bits; 3], 0);
        let plan = plan_cr_rr(&c, &tight, &cfg).unwrap();
        assert!(plan.diagnostics.iter().any(|d| d.contains("overflow")));
    }

    #[test]
    fn prefix_is_capped_by_duration() {
        let mut c = catalog(1);
        c[0].duration_min = 20.0;
        let plan = plan_cr_rr(&c, &ample(1), &PlannerConfig::default()).unwrap();
        assert_eq!(plan.assignments[0].replicas[0].d1_min, 20.0);
    }
}
