#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vodsim::catalog::{build_catalog, zipf_pmf, PopularitySnapshot, RateModel, Video};
use vodsim::planner::{
    plan_cr_rr, plan_rpr_p, plan_zipf_slfa, Budgets, CostModel, PlacementPlan, PlannerConfig, Strategy,
};
use vodsim::sim::SimConfig;

pub struct Instance {
    pub catalog: Vec<Video>,
    pub snapshot: PopularitySnapshot,
    pub pmf: Vec<f64>,
    pub budgets: Budgets,
    pub cfg: PlannerConfig,
}

/// Random planner input: up to `max_n` videos over up to `max_m` proxies,
/// budgets anywhere from empty to generous.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> Instance {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_m);
    let rate = if rng.random_bool(0.5) {
        RateModel::Constant(1_500_000)
    } else {
        RateModel::Uniform {
            lo: 500_000,
            hi: 4_000_000,
        }
    };
    let catalog = build_catalog(n, (20.0, 120.0), rate, rng.random()).unwrap();
    let theta = rng.random_range(0.0..1.2);
    let pmf = zipf_pmf(n, theta).unwrap();
    let counts: Vec<u64> = (0..n * m)
        .map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(0..50) })
        .collect();
    let snapshot = PopularitySnapshot::from_counts(n, m, 60.0, 0.0, counts);
    let full_video = 120.0 * 60.0 * 4_000_000.0;
    let ps_bits = (0..m)
        .map(|_| (rng.random_range(0.0..(n as f64 * 0.6)) * full_video) as u64)
        .collect();
    let tr_bits = (rng.random_range(0.0..(n as f64 * 0.6)) * full_video) as u64;
    let cost = if rng.random_bool(0.2) {
        CostModel::Scaled((0..n).map(|_| rng.random_range(1.0..1.5)).collect())
    } else {
        CostModel::Analytic
    };
    let cfg = PlannerConfig {
        threshold: if rng.random_bool(0.5) { None } else { Some(rng.random_range(0.0..0.3)) },
        min_prefix_min: rng.random_range(0.5..3.0),
        baseline_prefix_min: rng.random_range(5.0..130.0),
        slfa_total_replicas: if rng.random_bool(0.5) { None } else { Some(rng.random_range(1..=3 * n * m)) },
        crrr_replicas: rng.random_range(1..=m + 1),
    };
    Instance {
        catalog,
        snapshot,
        pmf,
        budgets: Budgets {
            ps_bits,
            tr_bits,
            cost,
        },
        cfg,
    }
}

pub fn plan(inst: &Instance, strategy: Strategy) -> PlacementPlan {
    match strategy {
        Strategy::RprP => plan_rpr_p(&inst.catalog, &inst.snapshot, &inst.budgets, &inst.cfg),
        Strategy::ZipfSlfa => plan_zipf_slfa(&inst.catalog, &inst.pmf, &inst.budgets, &inst.cfg),
        Strategy::CrRr => plan_cr_rr(&inst.catalog, &inst.budgets, &inst.cfg),
    }
    .unwrap()
}

/// Constraint check written from scratch: storage per proxy and at the
/// tracker, distinct servers per video, at most `M` replicas, every listed
/// video stores something, prefixes within the video.
pub fn independent_violations(inst: &Instance, plan: &PlacementPlan) -> Vec<String> {
    let m = inst.budgets.ps_bits.len();
    let mut out = Vec::new();
    let mut load = vec![0u128; m];
    let mut tr = 0u128;
    for a in &plan.assignments {
        let v = &inst.catalog[a.video.index()];
        let cost = |d: f64| inst.budgets.cost.cost_bits(v, d) as u128;
        let mut seen = vec![false; m];
        for r in &a.replicas {
            if r.ps >= m {
                out.push(format!("{}: proxy {} out of range", a.video, r.ps));
                continue;
            }
            if seen[r.ps] {
                out.push(format!("{}: twice on proxy {}", a.video, r.ps));
            }
            seen[r.ps] = true;
            load[r.ps] += cost(r.d1_min);
            if !(r.d1_min > 0.0) || r.d1_min > v.duration_min + 1e-9 {
                out.push(format!("{}: first prefix {}", a.video, r.d1_min));
            }
            if r.d1_min + a.d2_min > v.duration_min + 1e-9 {
                out.push(format!("{}: prefixes exceed the video", a.video));
            }
        }
        if a.replicas.is_empty() && a.d2_min <= 0.0 {
            out.push(format!("{}: listed but stores nothing", a.video));
        }
        if a.replicas.len() > m {
            out.push(format!("{}: {} replicas", a.video, a.replicas.len()));
        }
        if a.d2_min > 0.0 {
            tr += cost(a.d2_min);
        }
    }
    for k in 0..m {
        if load[k] > inst.budgets.ps_bits[k] as u128 {
            out.push(format!("proxy {k} over budget"));
        }
    }
    if tr > inst.budgets.tr_bits as u128 {
        out.push("tracker over budget".into());
    }
    out
}

/// A scaled-down cluster that still exercises every routing step.
pub fn small_config(rng: &mut ChaCha8Rng) -> SimConfig {
    SimConfig {
        z_lpsgs: rng.random_range(1..=3),
        m_ps_per_lpsg: rng.random_range(1..=3),
        n_videos: rng.random_range(5..=40),
        ps_bandwidth_bps: rng.random_range(5..=40) * 1_500_000,
        ps_storage_gb: [rng.random_range(0.5..2.0), 3.0],
        rate_per_ps_per_min: [2.0, 6.0],
        regional_top_ranks: rng.random_range(0..=40),
        sim_duration_min: rng.random_range(5.0..40.0),
        replan_every_min: if rng.random_bool(0.3) { Some(rng.random_range(3.0..10.0)) } else { None },
        tracker_head: rng.random_bool(0.7),
        mms_fallback: rng.random_bool(0.8),
        cache_downloads: rng.random_bool(0.8),
        relay_through_parent: rng.random_bool(0.7),
        session_hold: if rng.random_bool(0.5) {
            vodsim::sim::SessionHold::Prefix
        } else {
            vodsim::sim::SessionHold::Full
        },
        demand_window_min: rng.random_range(2.0..30.0),
        ..Default::default()
    }
}
