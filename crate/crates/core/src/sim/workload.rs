use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::topology::ClusterTopology;
use crate::error::{Error, Result};
use crate::ids::{PsId, VideoId};
use crate::rng::{self, tags};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub time_ms: f64,
    pub client: u32,
    pub ps: PsId,
    pub video: VideoId,
}

/// Per-proxy request distributions: the first `top_ranks` ranks of the global
/// law are shuffled independently at each proxy, the tail keeps its order.
pub fn regional_pmfs(global: &[f64], n_ps: usize, top_ranks: usize, seed: u64) -> Vec<Vec<f64>> {
    let r = top_ranks.min(global.len());
    (0..n_ps)
        .map(|k| {
            let mut perm: Vec<usize> = (0..r).collect();
            perm.shuffle(&mut rng::stream(seed, tags::REGIONAL, k as u64));
            let mut pmf = global.to_vec();
            for (video, &rank) in perm.iter().enumerate() {
                pmf[video] = global[rank];
            }
            pmf
        })
        .collect()
}

/// Poisson arrivals at each proxy, rate drawn once per proxy from
/// `rate_range` (requests per minute), video drawn from that proxy's law.
/// Requests are merged in time order and numbered from 0.
pub fn generate_workload(
    topology: &ClusterTopology,
    pmfs: &[Vec<f64>],
    rate_range: [f64; 2],
    duration_min: f64,
    seed: u64,
) -> Result<Vec<Request>> {
    let n_ps = topology.n_ps();
    if pmfs.len() != n_ps {
        return Err(Error::invalid(format!("{} demand laws for {n_ps} proxies", pmfs.len())));
    }
    let [lo, hi] = rate_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::invalid(format!("bad arrival rate range [{lo}, {hi}]")));
    }
    let horizon_ms = duration_min * 60_000.0;
    let mut rate_rng = rng::stream(seed, tags::RATES, 0);
    let mut all = Vec::new();
    for k in 0..n_ps {
        let per_min = if lo == hi { lo } else { rate_rng.random_range(lo..=hi) };
        let gap = Exp::new(per_min / 60_000.0).map_err(|e| Error::invalid(e.to_string()))?;
        let pick = WeightedIndex::new(&pmfs[k]).map_err(|e| Error::invalid(format!("proxy {k}: {e}")))?;
        let mut rng = rng::stream(seed, tags::ARRIVALS, k as u64);
        let first_client = (k * topology.clients_per_ps) as u32;
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut rng);
            if t >= horizon_ms {
                break;
            }
            all.push(Request {
                id: 0,
                time_ms: t,
                client: first_client + rng.random_range(0..topology.clients_per_ps as u32),
                ps: PsId(k),
                video: VideoId::from_index(pick.sample(&mut rng)),
            });
        }
    }
    all.sort_by(|a, b| a.time_ms.total_cmp(&b.time_ms).then(a.ps.cmp(&b.ps)));
    for (i, r) in all.iter_mut().enumerate() {
        r.id = i as u64;
    }
    Ok(all)
}
