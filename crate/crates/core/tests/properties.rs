mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vodsim::catalog::{zipf_pmf, DemandTracker};
use vodsim::metrics::{rejection_ratio_flat, rejection_ratio_nested, verify_report};
use vodsim::planner::{
    plan_zipf_slfa, size_prefixes_global, size_prefixes_regional, validate_plan, Budgets, PlannerConfig, Strategy,
};
use vodsim::sccache::{
    allocate_blocks, data_loss_frames, detect_scene_changes, scene_starts, synthesize_trace, TraceParams,
};
use vodsim::sim::{build_topology, generate_workload, run_with_log, SimConfig};
use vodsim::{PsId, VideoId};

const STRATEGIES: [Strategy; 3] = [Strategy::RprP, Strategy::ZipfSlfa, Strategy::CrRr];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn zipf_is_decreasing_and_normalized(theta in 0.271f64..=1.0, n in 2usize..=1000) {
        let p = zipf_pmf(n, theta).unwrap();
        prop_assert_eq!(p.len(), n);
        for w in p.windows(2) {
            prop_assert!(w[0] > w[1]);
        }
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn first_prefix_grows_with_share(a in 0.0f64..=1.0, b in 0.0f64..=1.0, rest in 0.01f64..=1.0, s in 1.0f64..200.0) {
        let (lo, hi) = if a <= b { (a.max(1e-6), b.max(1e-6)) } else { (b.max(1e-6), a.max(1e-6)) };
        let g_lo = size_prefixes_global(&[lo, rest], s).unwrap();
        let g_hi = size_prefixes_global(&[hi, rest], s).unwrap();
        prop_assert!(g_lo.d1 <= g_hi.d1);
        let r_lo = size_prefixes_regional(&[lo, 0.0], &[0], s).unwrap();
        let r_hi = size_prefixes_regional(&[hi, 0.0], &[0], s).unwrap();
        prop_assert!(r_lo.d1[0].1 <= r_hi.d1[0].1);
    }

    #[test]
    fn both_prefixes_leave_a_suffix(x in prop::collection::vec(0.001f64..0.999, 1..8), s in 1.0f64..200.0) {
        let sizes = size_prefixes_global(&x, s).unwrap();
        prop_assert!(sizes.d1 + sizes.d2 < s);
        prop_assert!(sizes.d2 >= 0.0);
    }

    #[test]
    fn nested_and_flat_rejection_agree(rej in prop::collection::vec(0u64..10_000, 1..40), extra in 1u64..1_000_000) {
        let total: u64 = rej.iter().sum();
        let r = (total + extra) as f64;
        let as_f: Vec<f64> = rej.iter().map(|&v| v as f64).collect();
        let nested = rejection_ratio_nested(&as_f, r).unwrap();
        let flat = rejection_ratio_flat(total as f64, r).unwrap();
        prop_assert!((nested - flat).abs() <= 1e-12 * flat.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tracker_snapshot_matches_recount(
        events in prop::collection::vec((1u32..=6, 0usize..3, 0u32..400), 0..200),
        window in 1.0f64..5.0,
        at_extra in 0u32..400,
    ) {
        let mut sorted = events.clone();
        sorted.sort_by_key(|e| e.2);
        let mut tracker = DemandTracker::new(6, 3, window);
        for &(v, k, t) in &sorted {
            tracker.observe(VideoId(v), PsId(k), t as f64 * 1000.0).unwrap();
        }
        let last = sorted.last().map_or(0, |e| e.2);
        let at_ms = (last + at_extra) as f64 * 1000.0;
        let snap = tracker.snapshot(at_ms);
        let window_ms = window * 60_000.0;
        for v in 1..=6u32 {
            for k in 0..3 {
                let want = sorted
                    .iter()
                    .filter(|e| e.0 == v && e.1 == k)
                    .filter(|e| {
                        let t = e.2 as f64 * 1000.0;
                        t > at_ms - window_ms && t <= at_ms
                    })
                    .count() as u64;
                prop_assert_eq!(snap.count(VideoId(v), k), want);
            }
        }
        for k in 0..3 {
            if snap.column_total(k) > 0 {
                let sum: f64 = (1..=6u32).map(|v| snap.prob(VideoId(v), k)).sum();
                prop_assert!((sum - 1.0).abs() <= 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn planners_respect_constraints(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_instance(&mut rng, 50, 8);
        for s in STRATEGIES {
            let plan = common::plan(&inst, s);
            let v = validate_plan(&plan, &inst.budgets, &inst.catalog);
            prop_assert!(v.is_empty(), "{s:?}: {v:?}");
            let w = common::independent_violations(&inst, &plan);
            prop_assert!(w.is_empty(), "{s:?}: {w:?}");
        }
    }

    #[test]
    fn planners_are_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_instance(&mut rng, 30, 6);
        for s in STRATEGIES {
            prop_assert_eq!(common::plan(&inst, s), common::plan(&inst, s));
        }
    }

    #[test]
    fn slfa_balances_load(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inst = common::random_instance(&mut rng, 50, 8);
        let m = inst.budgets.n_ps();
        inst.budgets = Budgets::new(vec![u64::MAX / 1024; m], 0);
        let plan = plan_zipf_slfa(&inst.catalog, &inst.pmf, &inst.budgets, &inst.cfg).unwrap();
        let loads: Vec<u64> = (0..m).map(|k| plan.ps_load_bits(k, &inst.catalog, &inst.budgets.cost)).collect();
        let spread = loads.iter().max().unwrap() - loads.iter().min().unwrap();
        let max_cost = inst
            .catalog
            .iter()
            .map(|v| inst.budgets.cost.cost_bits(v, inst.cfg.baseline_prefix_min.min(v.duration_min)))
            .max()
            .unwrap();
        prop_assert!(spread <= max_cost, "spread {spread} > {max_cost}");
    }
}

fn trace_params(rng_seed: u64) -> (TraceParams, f64) {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let params = TraceParams {
        scene_mean_len_sec: rng.random_range(0.5..20.0),
        level_sigma: rng.random_range(0.2..2.0),
        ..Default::default()
    };
    (params, rng.random_range(0.05..1.5))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scene_count_shrinks_as_threshold_grows(seed in any::<u64>(), t1 in 0.0f64..200_000.0, t2 in 0.0f64..200_000.0) {
        let (params, minutes) = trace_params(seed);
        let trace = synthesize_trace(minutes, &params, seed).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let n_lo = scene_starts(&detect_scene_changes(&trace.frames, lo)).len();
        let n_hi = scene_starts(&detect_scene_changes(&trace.frames, hi)).len();
        prop_assert!(n_hi <= n_lo);
    }

    #[test]
    fn block_allocation_is_lossless_and_repeatable(seed in any::<u64>(), t in 0.0f64..200_000.0, block in 1_000u64..1_000_000) {
        let (params, minutes) = trace_params(seed);
        let trace = synthesize_trace(minutes, &params, seed).unwrap();
        let a = allocate_blocks(&trace.frames, block, t).unwrap();
        let b = allocate_blocks(&trace.frames, block, t).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(data_loss_frames(&trace.frames, &a).is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn small_runs_are_consistent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = common::small_config(&mut rng);
        let delays = build_topology(&cfg, seed).unwrap().delays;
        for s in STRATEGIES {
            let run = run_with_log(&cfg, s, seed).unwrap();
            let r = &run.report;
            prop_assert_eq!(r.total_served() + r.total_rejected(), r.total_requests());
            for k in 0..r.n_ps {
                prop_assert_eq!(r.served_per_ps[k] + r.rejected_per_ps[k], r.requests_per_ps[k]);
            }
            let log = run.log.as_ref().unwrap();
            let extra = if cfg.sc_caching { cfg.renegotiation_latency_ms } else { 0.0 };
            let issues = verify_report(r, log, &delays, extra);
            prop_assert!(issues.is_empty(), "{s:?}: {issues:?}");
            let again = run_with_log(&cfg, s, seed).unwrap();
            prop_assert_eq!(again.log.unwrap().write(), log.write());
        }
    }
}

#[test]
fn snapshot_is_detached_from_tracker() {
    let mut tracker = DemandTracker::new(3, 2, 10.0);
    tracker.observe(VideoId(1), PsId(0), 0.0).unwrap();
    tracker.observe(VideoId(2), PsId(1), 1000.0).unwrap();
    let snap = tracker.snapshot(1000.0);
    let kept = snap.clone();
    for t in 2..50 {
        tracker.observe(VideoId(3), PsId(0), t as f64 * 60_000.0).unwrap();
    }
    assert_eq!(snap, kept);
    assert_eq!(snap.count(VideoId(1), 0), 1);
}

fn single_proxy(rate: f64) -> SimConfig {
    SimConfig {
        z_lpsgs: 1,
        m_ps_per_lpsg: 1,
        n_videos: 20,
        rate_per_ps_per_min: [rate, rate],
        ..Default::default()
    }
}

#[test]
fn arrival_count_matches_rate() {
    let cfg = single_proxy(40.0);
    let topo = build_topology(&cfg, 3).unwrap();
    let pmf = vec![zipf_pmf(20, 0.75).unwrap()];
    for seed in 0..20 {
        let reqs = generate_workload(&topo, &pmf, cfg.rate_per_ps_per_min, 100.0, seed).unwrap();
        let n = reqs.len() as f64;
        assert!((n - 4000.0).abs() <= 3.0 * 4000f64.sqrt(), "seed {seed}: {n} requests");
    }
}

#[test]
fn video_draws_follow_the_law() {
    let cfg = single_proxy(1000.0);
    let topo = build_topology(&cfg, 5).unwrap();
    let law = zipf_pmf(20, 0.75).unwrap();
    let reqs = generate_workload(&topo, &[law.clone()], cfg.rate_per_ps_per_min, 100.0, 11).unwrap();
    let n = reqs.len() as f64;
    assert!(n > 90_000.0);
    let mut seen = [0u64; 20];
    for r in &reqs {
        seen[r.video.index()] += 1;
    }
    let chi2: f64 = seen
        .iter()
        .zip(&law)
        .map(|(&o, &p)| {
            let e = p * n;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    // 19 degrees of freedom, 0.1% upper tail
    assert!(chi2 < 43.82, "chi-square {chi2}");
}

#[test]
fn default_planner_config_matches_sim_config() {
    assert_eq!(SimConfig::default().planner_config(), PlannerConfig {
        slfa_total_replicas: Some(600),
        ..Default::default()
    });
}
