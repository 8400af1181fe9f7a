use super::sizing::{argmax, size_prefixes_global, size_prefixes_regional};
use super::{
    classify_row, floor_d1, floor_d2, popularity_order, Budgets, PlacementPlan, PlannerConfig,
    PopularityClass, PrefixAssignment, Replica, Strategy,
};
use crate::catalog::{PopularitySnapshot, Video};
use crate::error::{Error, Result};

/// Regional-popularity replication and placement over one group.
///
/// Videos are taken in descending mean share. A video popular at every proxy
/// gets its first prefix at all of them; one popular at some proxies gets a
/// per-proxy first prefix wherever it is popular and storage remains; others
/// get no first prefix. Second prefixes go to the tracker while it has room.
pub fn plan_rpr_p(
    catalog: &[Video],
    snapshot: &PopularitySnapshot,
    budgets: &Budgets,
    cfg: &PlannerConfig,
) -> Result<PlacementPlan> {
    let m = budgets.n_ps();
    if snapshot.n_ps != m {
        return Err(Error::invalid(format!(
            "snapshot covers {} proxies, budgets cover {m}",
            snapshot.n_ps
        )));
    }
    if snapshot.n_videos != catalog.len() {
        return Err(Error::invalid("snapshot and catalog disagree on video count"));
    }
    let threshold = cfg.threshold_for(catalog.len());
    let d_min = cfg.min_prefix_min;
    let cost = &budgets.cost;

    let mut plan = PlacementPlan::empty(Strategy::RprP, m);
    plan.epoch_ms = snapshot.taken_at_ms;
    let mut ps_free = budgets.ps_bits.clone();
    let mut tr_free = budgets.tr_bits;

    for vid in popularity_order(catalog, |v| snapshot.mean_share(v)) {
        let video = &catalog[vid.index()];
        let s = video.duration_min;
        let x = snapshot.row(vid);
        let mut assignment = PrefixAssignment {
            video: vid,
            replicas: Vec::new(),
            d2_min: 0.0,
        };

        let d2 = match classify_row(x, threshold) {
            PopularityClass::Global => {
                let sizes = size_prefixes_global(x, s)?;
                let d1 = floor_d1(sizes.d1, s, d_min);
                let bits = cost.cost_bits(video, d1);
                for (k, free) in ps_free.iter_mut().enumerate() {
                    if *free >= bits {
                        *free -= bits;
                        assignment.replicas.push(Replica { ps: k, d1_min: d1 });
                    }
                }
                if assignment.replicas.len() < m {
                    plan.diagnostics.push(format!(
                        "{vid}: globally popular but only {} of {m} proxies had room",
                        assignment.replicas.len()
                    ));
                }
                floor_d2(sizes.d2, s - d1, d_min)
            }
            PopularityClass::Regional(hot) => {
                let sizes = size_prefixes_regional(x, &hot, s)?;
                let mut longest = floor_d1(sizes.reference_d1, s, d_min);
                for &(z, raw) in &sizes.d1 {
                    let d1 = floor_d1(raw, s, d_min);
                    let bits = cost.cost_bits(video, d1);
                    if ps_free[z] >= bits {
                        ps_free[z] -= bits;
                        assignment.replicas.push(Replica { ps: z, d1_min: d1 });
                        longest = longest.max(d1);
                    }
                }
                if assignment.replicas.is_empty() {
                    plan.share_only.insert(vid);
                }
                floor_d2(sizes.d2, s - longest, d_min)
            }
            PopularityClass::Unpopular => {
                let (_, x_max) = argmax(x);
                floor_d2(x_max * s, s, d_min)
            }
        };

        if d2 > 0.0 {
            let bits = cost.cost_bits(video, d2);
            if tr_free >= bits {
                tr_free -= bits;
                assignment.d2_min = d2;
            }
        }
        plan.push(assignment);
    }

    if plan.assignments.is_empty() && !catalog.is_empty() {
        plan.diagnostics
            .push("budgets too small to place any prefix".to_string());
    }
    Ok(plan.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::RateModel;
    use crate::ids::VideoId;

    fn video(id: u32, minutes: f64) -> Video {
        Video {
            id: VideoId(id),
            duration_min: minutes,
            encoding_rate_bps: 1_500_000,
        }
    }

    #[test]
    fn global_video_goes_everywhere() {
        let catalog = vec![video(1, 90.0)];
        let snap = PopularitySnapshot::from_probabilities(&[vec![1.0], vec![1.0]], 60.0);
        let budgets = Budgets::new(vec![u64::MAX / 4; 2], u64::MAX / 4);
        // with one video the default threshold 1/N = 1 admits nothing
        let cfg = PlannerConfig {
            threshold: Some(0.5),
            ..Default::default()
        };
        let plan = plan_rpr_p(&catalog, &snap, &budgets, &cfg).unwrap();
        assert_eq!(plan.replica_set(VideoId(1)), vec![0, 1]);
        // mean share 1 → whole video is the first prefix, nothing left for the tracker
        let a = plan.assignment(VideoId(1)).unwrap();
        assert_eq!(a.d1_at(0), Some(90.0));
        assert_eq!(a.d2_min, 0.0);
    }

    #[test]
    fn regional_video_does_not_spill_to_unselected_proxy() {
        // v1 is hot only at ps0; ps0 is already full from v2 which is global.
        let catalog = vec![video(1, 60.0), video(2, 60.0)];
        let snap = PopularitySnapshot::from_probabilities(&[vec![0.4, 0.6], vec![0.0, 1.0]], 60.0);
        let v2_cost = Budgets::new(vec![0], 0).cost.cost_bits(&catalog[1], 0.8 * 60.0);
        let budgets = Budgets::new(vec![v2_cost, u64::MAX / 4], u64::MAX / 4);
        let cfg = PlannerConfig {
            threshold: Some(0.1),
            ..Default::default()
        };
        let plan = plan_rpr_p(&catalog, &snap, &budgets, &cfg).unwrap();
        assert_eq!(plan.replica_set(VideoId(2)), vec![0, 1]);
        assert!(plan.replica_set(VideoId(1)).is_empty());
        assert!(plan.share_only.contains(&VideoId(1)));
    }

    #[test]
    fn tiny_budgets_give_empty_valid_plan() {
        let catalog = crate::catalog::build_catalog(10, (20.0, 120.0), RateModel::default(), 1).unwrap();
        let probs = vec![vec![0.1; 10]; 3];
        let snap = PopularitySnapshot::from_probabilities(&probs, 60.0);
        let budgets = Budgets::new(vec![10; 3], 10);
        let plan = plan_rpr_p(&catalog, &snap, &budgets, &PlannerConfig::default()).unwrap();
        assert!(plan.assignments.is_empty());
        assert!(!plan.diagnostics.is_empty());
        assert!(super::super::validate_plan(&plan, &budgets, &catalog).is_empty());
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let catalog = vec![video(1, 60.0)];
        let snap = PopularitySnapshot::from_probabilities(&[vec![1.0]], 60.0);
        let budgets = Budgets::new(vec![1, 1], 1);
        assert!(plan_rpr_p(&catalog, &snap, &budgets, &PlannerConfig::default()).is_err());
    }
}
