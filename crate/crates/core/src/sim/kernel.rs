use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::config::{SessionHold, SimConfig};
use super::log::{EventLog, LogRecord};
use super::topology::{build_topology, ClusterTopology};
use super::workload::{generate_workload, regional_pmfs, Request};
use super::{RejectReason, ServiceOutcome, Source};
use crate::catalog::{build_catalog, zipf_pmf, DemandTracker, PopularitySnapshot, RateModel, Video};
use crate::error::{Error, Result};
use crate::ids::{PsId, VideoId};
use crate::metrics::MetricsReport;
use crate::planner::{
    plan_cr_rr, plan_rpr_p, plan_zipf_slfa, validate_plan, Budgets, CostModel, PlacementPlan, PlannerConfig,
    Strategy,
};
use crate::sccache::{prefix_cache_cost, TraceParams};

#[derive(Clone, Debug)]
struct Entry {
    minutes: f64,
    bits: u64,
    pins: u32,
    gen: u64,
}

#[derive(Clone, Debug)]
struct Proxy {
    storage_cap: u64,
    storage_used: u64,
    bw_cap: u64,
    bw_used: u64,
    cache: Vec<Option<Entry>>,
}

impl Proxy {
    fn bw_free(&self) -> u64 {
        self.bw_cap - self.bw_used
    }
}

#[derive(Clone, Debug)]
struct Tracker {
    cap: u64,
    used: u64,
    cache: Vec<Option<(f64, u64)>>,
}

#[derive(Clone, Debug)]
struct Session {
    end_ms: f64,
    seq: u64,
    serving: PsId,
    relay: Option<PsId>,
    bw: u64,
    pin: Option<(PsId, VideoId, u64)>,
}

impl PartialEq for Session {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Session {}

impl PartialOrd for Session {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the max-heap pops the earliest end first.
impl Ord for Session {
    fn cmp(&self, other: &Self) -> Ordering {
        other.end_ms.total_cmp(&self.end_ms).then(other.seq.cmp(&self.seq))
    }
}

/// Live caches, bandwidth and demand of the whole cluster.
#[derive(Clone, Debug)]
pub struct SystemState {
    pub topology: ClusterTopology,
    catalog: Vec<Video>,
    cost: CostModel,
    strategy: Strategy,
    planner: PlannerConfig,
    tracker_head: bool,
    mms_fallback: bool,
    cache_downloads: bool,
    relay: bool,
    hold: SessionHold,
    mms_extra_ms: f64,
    proxies: Vec<Proxy>,
    trackers: Vec<Tracker>,
    demand: DemandTracker,
    sessions: BinaryHeap<Session>,
    next_seq: u64,
    next_gen: u64,
}

impl SystemState {
    pub fn new(
        cfg: &SimConfig,
        topology: ClusterTopology,
        catalog: Vec<Video>,
        strategy: Strategy,
        cost: CostModel,
    ) -> Self {
        let n = catalog.len();
        let proxies = topology
            .ps_storage_bits
            .iter()
            .map(|&cap| Proxy {
                storage_cap: cap,
                storage_used: 0,
                bw_cap: topology.ps_bandwidth_bps,
                bw_used: 0,
                cache: vec![None; n],
            })
            .collect();
        let trackers = topology
            .tr_storage_bits
            .iter()
            .map(|&cap| Tracker {
                cap,
                used: 0,
                cache: vec![None; n],
            })
            .collect();
        let demand = DemandTracker::new(n, topology.n_ps(), cfg.demand_window_min);
        SystemState {
            catalog,
            cost,
            strategy,
            planner: cfg.planner_config(),
            tracker_head: cfg.tracker_head,
            mms_fallback: cfg.mms_fallback,
            cache_downloads: cfg.cache_downloads,
            relay: cfg.relay_through_parent,
            hold: cfg.session_hold,
            mms_extra_ms: if cfg.sc_caching { cfg.renegotiation_latency_ms } else { 0.0 },
            proxies,
            trackers,
            demand,
            sessions: BinaryHeap::new(),
            next_seq: 0,
            next_gen: 0,
            topology,
        }
    }

    pub fn catalog(&self) -> &[Video] {
        &self.catalog
    }

    pub fn cached_minutes(&self, ps: PsId, video: VideoId) -> Option<f64> {
        self.proxies[ps.0].cache[video.index()].as_ref().map(|e| e.minutes)
    }

    pub fn tracker_minutes(&self, lpsg: usize, video: VideoId) -> Option<f64> {
        self.trackers[lpsg].cache[video.index()].map(|(m, _)| m)
    }

    pub fn bandwidth_used(&self, ps: PsId) -> u64 {
        self.proxies[ps.0].bw_used
    }

    pub fn storage_used(&self, ps: PsId) -> u64 {
        self.proxies[ps.0].storage_used
    }

    pub fn open_sessions(&self) -> usize {
        self.sessions.len()
    }

    fn budgets(&self, lpsg: usize) -> Budgets {
        Budgets {
            ps_bits: self.topology.members(lpsg).map(|p| self.proxies[p.0].storage_cap).collect(),
            tr_bits: self.trackers[lpsg].cap,
            cost: self.cost.clone(),
        }
    }

    /// Plans every group with the configured strategy. `snapshot` covers all
    /// proxies and drives the regional strategy; `pmf` drives Zipf replication.
    pub fn plan_all(&self, snapshot: &PopularitySnapshot, pmf: &[f64]) -> Result<Vec<PlacementPlan>> {
        (0..self.topology.z_lpsgs)
            .map(|g| {
                let budgets = self.budgets(g);
                let mut plan = match self.strategy {
                    Strategy::RprP => {
                        let members: Vec<PsId> = self.topology.members(g).collect();
                        plan_rpr_p(&self.catalog, &snapshot.select(&members), &budgets, &self.planner)?
                    }
                    Strategy::ZipfSlfa => plan_zipf_slfa(&self.catalog, pmf, &budgets, &self.planner)?,
                    Strategy::CrRr => plan_cr_rr(&self.catalog, &budgets, &self.planner)?,
                };
                plan.epoch_ms = snapshot.taken_at_ms;
                Ok(plan)
            })
            .collect()
    }

    /// Replaces a group's caches with `plan`; entries the plan keeps unchanged
    /// survive with their pins, everything else is dropped.
    pub fn install_plan(&mut self, lpsg: usize, plan: &PlacementPlan) -> Result<()> {
        let budgets = self.budgets(lpsg);
        let violations = validate_plan(plan, &budgets, &self.catalog);
        if !violations.is_empty() {
            return Err(Error::Inconsistency(format!(
                "group {lpsg}: plan violates {}",
                violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
            )));
        }
        let members: Vec<PsId> = self.topology.members(lpsg).collect();
        let n = self.catalog.len();
        for (k, &ps) in members.iter().enumerate() {
            let mut wanted: Vec<Option<f64>> = vec![None; n];
            for a in &plan.assignments {
                if let Some(d1) = a.d1_at(k) {
                    wanted[a.video.index()] = Some(d1);
                }
            }
            let proxy = &mut self.proxies[ps.0];
            let mut used = 0u64;
            for (v, want) in wanted.into_iter().enumerate() {
                let slot = &mut proxy.cache[v];
                match (want, slot.as_ref()) {
                    (None, _) => *slot = None,
                    (Some(d), Some(e)) if e.minutes == d => {}
                    (Some(d), _) => {
                        self.next_gen += 1;
                        *slot = Some(Entry {
                            minutes: d,
                            bits: self.cost.cost_bits(&self.catalog[v], d),
                            pins: 0,
                            gen: self.next_gen,
                        });
                    }
                }
                used += slot.as_ref().map_or(0, |e| e.bits);
            }
            proxy.storage_used = used;
            assert!(proxy.storage_used <= proxy.storage_cap, "storage overflow at {ps}");
        }
        let tr = &mut self.trackers[lpsg];
        tr.cache.iter_mut().for_each(|c| *c = None);
        tr.used = 0;
        for a in plan.assignments.iter().filter(|a| a.d2_min > 0.0) {
            let bits = self.cost.cost_bits(&self.catalog[a.video.index()], a.d2_min);
            tr.cache[a.video.index()] = Some((a.d2_min, bits));
            tr.used += bits;
        }
        assert!(tr.used <= tr.cap, "storage overflow at tracker {lpsg}");
        Ok(())
    }

    /// Ends every session finishing at or before `now_ms`.
    pub fn release_until(&mut self, now_ms: f64) {
        while self.sessions.peek().is_some_and(|s| s.end_ms <= now_ms) {
            let s = self.sessions.pop().expect("peeked");
            for ps in std::iter::once(s.serving).chain(s.relay) {
                let proxy = &mut self.proxies[ps.0];
                assert!(proxy.bw_used >= s.bw, "bandwidth underflow at {ps}");
                proxy.bw_used -= s.bw;
            }
            if let Some((ps, video, gen)) = s.pin {
                if let Some(e) = self.proxies[ps.0].cache[video.index()].as_mut() {
                    if e.gen == gen {
                        e.pins -= 1;
                    }
                }
            }
        }
    }

    fn open(&mut self, now_ms: f64, serving: PsId, relay: Option<PsId>, video: VideoId, portion_min: f64, pinned: bool) {
        let v = &self.catalog[video.index()];
        let hold_min = match self.hold {
            SessionHold::Prefix => portion_min,
            SessionHold::Full => v.duration_min,
        };
        let bw = v.encoding_rate_bps;
        if let Some(r) = relay {
            let proxy = &mut self.proxies[r.0];
            proxy.bw_used += bw;
            assert!(proxy.bw_used <= proxy.bw_cap, "bandwidth overflow at {r}");
        }
        let proxy = &mut self.proxies[serving.0];
        proxy.bw_used += bw;
        assert!(proxy.bw_used <= proxy.bw_cap, "bandwidth overflow at {serving}");
        let pin = if pinned {
            let e = proxy.cache[video.index()].as_mut().expect("pinned entry exists");
            e.pins += 1;
            Some((serving, video, e.gen))
        } else {
            None
        };
        self.next_seq += 1;
        self.sessions.push(Session {
            end_ms: now_ms + hold_min * 60_000.0,
            seq: self.next_seq,
            serving,
            relay,
            bw,
            pin,
        });
    }

    /// Holder of `video` among `candidates` with the most free bandwidth,
    /// ties to the lowest id.
    fn best_holder(&self, candidates: impl Iterator<Item = PsId>, video: VideoId, bw: u64) -> Option<PsId> {
        candidates
            .filter(|p| {
                let proxy = &self.proxies[p.0];
                proxy.cache[video.index()].is_some() && proxy.bw_free() >= bw
            })
            .max_by(|a, b| {
                self.proxies[a.0]
                    .bw_free()
                    .cmp(&self.proxies[b.0].bw_free())
                    .then(b.0.cmp(&a.0))
            })
    }

    fn held_anywhere(&self, video: VideoId) -> bool {
        self.proxies.iter().any(|p| p.cache[video.index()].is_some())
            || (self.tracker_head && self.trackers.iter().any(|t| t.cache[video.index()].is_some()))
    }

    /// Prefix the parent keeps after fetching `video` from the main server.
    fn download_minutes(&self, video: VideoId, parent: PsId) -> f64 {
        let v = &self.catalog[video.index()];
        match self.strategy {
            Strategy::RprP => {
                let x = self.demand.share(video, parent);
                (x * v.duration_min).max(self.planner.min_prefix_min).min(v.duration_min)
            }
            Strategy::ZipfSlfa | Strategy::CrRr => self.planner.baseline_prefix_min.min(v.duration_min),
        }
    }

    /// Frees `bits` at `ps` by evicting unpinned prefixes with the lowest
    /// live share there. Nothing is evicted unless the whole amount can be freed.
    fn make_room(&mut self, ps: PsId, bits: u64) -> bool {
        let proxy = &self.proxies[ps.0];
        let free = proxy.storage_cap - proxy.storage_used;
        if free >= bits {
            return true;
        }
        let mut victims: Vec<(f64, usize, u64)> = proxy
            .cache
            .iter()
            .enumerate()
            .filter_map(|(v, e)| e.as_ref().filter(|e| e.pins == 0).map(|e| (v, e.bits)))
            .map(|(v, b)| (self.demand.share(VideoId::from_index(v), ps), v, b))
            .collect();
        let evictable: u64 = victims.iter().map(|t| t.2).sum();
        if free + evictable < bits {
            return false;
        }
        victims.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        let proxy = &mut self.proxies[ps.0];
        for (_, v, b) in victims {
            if proxy.storage_cap - proxy.storage_used >= bits {
                break;
            }
            proxy.cache[v] = None;
            proxy.storage_used -= b;
        }
        true
    }

    /// Serves one request at `request.time_ms`, opening its session.
    ///
    /// Candidates in order: the parent proxy, a peer in the same group, the
    /// group's tracker, each neighbouring group (tracker, then its proxies),
    /// and finally the main server through the parent. With relaying on, a
    /// stream from another proxy also occupies the parent's bandwidth.
    pub fn route_request(&mut self, req: &Request) -> Result<ServiceOutcome> {
        let now = req.time_ms;
        self.demand.observe(req.video, req.ps, now)?;
        let video = req.video;
        let parent = req.ps;
        let b = self.catalog[video.index()].encoding_rate_bps;
        let g = self.topology.lpsg_of(parent);
        let delays = self.topology.delays;
        let served = |source: Source, serving: PsId, extra: f64| ServiceOutcome::Served {
            source,
            serving,
            delay_ms: source.path_delay_ms(&delays) + extra,
        };

        let parent_bw = self.proxies[parent.0].bw_free() >= b;
        let relay = self.relay.then_some(parent);
        let remote_ok = parent_bw || !self.relay;
        if let Some(d1) = self.cached_minutes(parent, video) {
            if parent_bw {
                self.open(now, parent, None, video, d1, true);
                return Ok(served(Source::ParentPs, parent, 0.0));
            }
        }
        if remote_ok {
            let peers = self.topology.members(g).filter(|&p| p != parent);
            if let Some(peer) = self.best_holder(peers, video, b) {
                let d1 = self.cached_minutes(peer, video).expect("holder");
                self.open(now, peer, relay, video, d1, true);
                return Ok(served(Source::PeerPs, peer, 0.0));
            }
        }
        if self.tracker_head && parent_bw {
            if let Some(d2) = self.tracker_minutes(g, video) {
                self.open(now, parent, None, video, d2, false);
                return Ok(served(Source::TrackerPref2, parent, 0.0));
            }
        }
        for ng in self.topology.neighbors(g) {
            if self.tracker_head && parent_bw {
                if let Some(d2) = self.tracker_minutes(ng, video) {
                    self.open(now, parent, None, video, d2, false);
                    return Ok(served(Source::NeighborTracker, parent, 0.0));
                }
            }
            if !remote_ok {
                continue;
            }
            if let Some(holder) = self.best_holder(self.topology.members(ng), video, b) {
                let d1 = self.cached_minutes(holder, video).expect("holder");
                self.open(now, holder, relay, video, d1, true);
                return Ok(served(Source::NeighborPs, holder, 0.0));
            }
        }

        if !self.mms_fallback {
            let reason = if self.held_anywhere(video) {
                RejectReason::NoBandwidth
            } else {
                RejectReason::Unavailable
            };
            return Ok(ServiceOutcome::Rejected(reason));
        }
        if !parent_bw {
            return Ok(ServiceOutcome::Rejected(RejectReason::NoBandwidth));
        }
        let d = self.download_minutes(video, parent);
        if !self.cache_downloads {
            self.open(now, parent, None, video, d, false);
            return Ok(served(Source::Mms, parent, self.mms_extra_ms));
        }
        let bits = self.cost.cost_bits(&self.catalog[video.index()], d);
        if self.proxies[parent.0].cache[video.index()].is_some() {
            // parent holds it but had no bandwidth; handled above
            return Ok(ServiceOutcome::Rejected(RejectReason::NoBandwidth));
        }
        if !self.make_room(parent, bits) {
            return Ok(ServiceOutcome::Rejected(RejectReason::NoRoomAfterDownload));
        }
        self.next_gen += 1;
        let proxy = &mut self.proxies[parent.0];
        proxy.cache[video.index()] = Some(Entry {
            minutes: d,
            bits,
            pins: 0,
            gen: self.next_gen,
        });
        proxy.storage_used += bits;
        assert!(proxy.storage_used <= proxy.storage_cap, "storage overflow at {parent}");
        self.open(now, parent, None, video, d, true);
        Ok(served(Source::Mms, parent, self.mms_extra_ms))
    }

    fn sample(&self, now_ms: f64, report: &mut MetricsReport, log: &mut Option<EventLog>) {
        for (k, p) in self.proxies.iter().enumerate() {
            let cache = (p.storage_used, p.storage_cap);
            let bandwidth = (p.bw_used, p.bw_cap);
            report.observe_utilization(now_ms, PsId(k), cache, bandwidth);
            if let Some(log) = log {
                log.records.push(LogRecord::Utilization {
                    time_ms: now_ms,
                    ps: PsId(k),
                    cache,
                    bandwidth,
                });
            }
        }
    }
}

/// Result of one simulated run.
#[derive(Clone, Debug)]
pub struct SimRun {
    pub report: MetricsReport,
    pub log: Option<EventLog>,
    /// Plans installed at time zero, one per group.
    pub initial_plans: Vec<PlacementPlan>,
}

pub fn run_simulation(cfg: &SimConfig, strategy: Strategy, seed: u64) -> Result<MetricsReport> {
    Ok(run(cfg, strategy, seed, false)?.report)
}

pub fn run_with_log(cfg: &SimConfig, strategy: Strategy, seed: u64) -> Result<SimRun> {
    run(cfg, strategy, seed, true)
}

fn cost_model(cfg: &SimConfig, catalog: &[Video], seed: u64) -> Result<CostModel> {
    if !cfg.sc_caching {
        return Ok(CostModel::Analytic);
    }
    let params = TraceParams::default();
    let factors = catalog
        .iter()
        .map(|v| {
            let d = cfg.sc_sample_min.min(v.duration_min);
            let c = prefix_cache_cost(v, d, &params, cfg.sc_block_bits, seed)?;
            Ok(c.sc_bits as f64 / c.analytic_bits)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CostModel::Scaled(factors))
}

struct Setup {
    topology: ClusterTopology,
    catalog: Vec<Video>,
    global: Vec<f64>,
    pmfs: Vec<Vec<f64>>,
    cost: CostModel,
}

fn setup(cfg: &SimConfig, seed: u64) -> Result<Setup> {
    cfg.validate()?;
    let topology = build_topology(cfg, seed)?;
    let [lo, hi] = cfg.video_duration_min;
    let catalog = build_catalog(cfg.n_videos, (lo, hi), RateModel::Constant(cfg.encoding_rate_bps), seed)?;
    let global = zipf_pmf(cfg.n_videos, cfg.theta)?;
    let pmfs = regional_pmfs(&global, topology.n_ps(), cfg.regional_top_ranks, seed);
    let cost = cost_model(cfg, &catalog, seed)?;
    Ok(Setup {
        topology,
        catalog,
        global,
        pmfs,
        cost,
    })
}

/// Catalog and the per-group plans a run starts from.
pub fn initial_plans(cfg: &SimConfig, strategy: Strategy, seed: u64) -> Result<(Vec<Video>, Vec<PlacementPlan>)> {
    let Setup {
        topology,
        catalog,
        global,
        pmfs,
        cost,
    } = setup(cfg, seed)?;
    let state = SystemState::new(cfg, topology, catalog.clone(), strategy, cost);
    let apriori = PopularitySnapshot::from_probabilities(&pmfs, cfg.demand_window_min);
    Ok((catalog, state.plan_all(&apriori, &global)?))
}

fn run(cfg: &SimConfig, strategy: Strategy, seed: u64, keep_log: bool) -> Result<SimRun> {
    let Setup {
        topology,
        catalog,
        global,
        pmfs,
        cost,
    } = setup(cfg, seed)?;
    let requests = generate_workload(&topology, &pmfs, cfg.rate_per_ps_per_min, cfg.sim_duration_min, seed)?;

    let horizon_ms = cfg.sim_duration_min * 60_000.0;
    let digest = cfg.digest();
    let mut report = MetricsReport::new(
        strategy,
        seed,
        digest.clone(),
        topology.n_ps(),
        topology.m_ps_per_lpsg,
        cfg.warmup_ms(),
        horizon_ms,
    );
    let mut log = keep_log.then(|| EventLog::new(strategy, seed, digest));

    let mut state = SystemState::new(cfg, topology, catalog, strategy, cost);
    let apriori = PopularitySnapshot::from_probabilities(&pmfs, cfg.demand_window_min);
    let initial_plans = state.plan_all(&apriori, &global)?;
    for (g, plan) in initial_plans.iter().enumerate() {
        state.install_plan(g, plan)?;
        for d in &plan.diagnostics {
            report.warnings.push(format!("group {g}: {d}"));
        }
    }

    let sample_ms = cfg.sample_every_min * 60_000.0;
    let replan_ms = cfg.replan_every_min.map(|e| e * 60_000.0);
    let mut samples_taken = 0u64;
    let mut replans_done = 0u64;
    let mut next = 0usize;
    loop {
        let t_arrival = requests.get(next).map_or(f64::INFINITY, |r| r.time_ms);
        let t_sample = Some((samples_taken + 1) as f64 * sample_ms)
            .filter(|&t| t <= horizon_ms)
            .unwrap_or(f64::INFINITY);
        let t_replan = replan_ms
            .map(|e| (replans_done + 1) as f64 * e)
            .filter(|&t| t < horizon_ms)
            .unwrap_or(f64::INFINITY);
        let now = t_arrival.min(t_sample).min(t_replan);
        if now == f64::INFINITY {
            break;
        }
        state.release_until(now);
        if now == t_replan {
            replans_done += 1;
            let snapshot = state.demand.snapshot(now);
            for (g, plan) in state.plan_all(&snapshot, &global)?.iter().enumerate() {
                state.install_plan(g, plan)?;
            }
        } else if now == t_sample {
            samples_taken += 1;
            state.sample(now, &mut report, &mut log);
        } else {
            let req = &requests[next];
            next += 1;
            let outcome = state.route_request(req)?;
            report.observe_outcome(req.time_ms, req.ps, &outcome);
            if let Some(log) = log.as_mut() {
                log.records.push(LogRecord::Outcome {
                    time_ms: req.time_ms,
                    request: req.id,
                    parent: req.ps,
                    video: req.video,
                    outcome,
                });
            }
        }
    }
    Ok(SimRun {
        report,
        log,
        initial_plans,
    })
}
