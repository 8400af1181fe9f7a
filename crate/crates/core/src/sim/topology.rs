use rand::Rng;

use super::config::SimConfig;
use crate::error::Result;
use crate::ids::PsId;
use crate::rng::{self, tags};

const BITS_PER_GB: f64 = 8e9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkDelays {
    pub ps_client_ms: f64,
    pub ps_ps_ms: f64,
    pub tr_ps_ms: f64,
    pub tr_tr_ms: f64,
    pub mms_ps_ms: f64,
}

/// `Z` proxy groups on a tracker ring, `M` ring-connected proxies per group.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterTopology {
    pub z_lpsgs: usize,
    pub m_ps_per_lpsg: usize,
    pub clients_per_ps: usize,
    pub ps_bandwidth_bps: u64,
    pub ps_storage_bits: Vec<u64>,
    pub tr_storage_bits: Vec<u64>,
    pub delays: LinkDelays,
}

impl ClusterTopology {
    pub fn n_ps(&self) -> usize {
        self.ps_storage_bits.len()
    }

    pub fn n_clients(&self) -> usize {
        self.n_ps() * self.clients_per_ps
    }

    pub fn lpsg_of(&self, ps: PsId) -> usize {
        ps.0 / self.m_ps_per_lpsg
    }

    pub fn members(&self, lpsg: usize) -> impl Iterator<Item = PsId> + Clone {
        let m = self.m_ps_per_lpsg;
        (lpsg * m..(lpsg + 1) * m).map(PsId)
    }

    pub fn local_index(&self, ps: PsId) -> usize {
        ps.0 % self.m_ps_per_lpsg
    }

    /// Left and right groups on the tracker ring, without repeats or self.
    pub fn neighbors(&self, lpsg: usize) -> Vec<usize> {
        let z = self.z_lpsgs;
        let mut out = Vec::with_capacity(2);
        for n in [(lpsg + z - 1) % z, (lpsg + 1) % z] {
            if n != lpsg && !out.contains(&n) {
                out.push(n);
            }
        }
        out
    }
}

/// Proxy storage is drawn uniformly per proxy; each tracker gets its group's
/// mean proxy storage scaled by the tracker:proxy size ratio.
pub fn build_topology(cfg: &SimConfig, seed: u64) -> Result<ClusterTopology> {
    cfg.validate()?;
    let n_ps = cfg.n_ps();
    let [lo, hi] = cfg.ps_storage_gb;
    let mut rng = rng::stream(seed, tags::STORAGE, 0);
    let ps_storage_bits: Vec<u64> = (0..n_ps)
        .map(|_| {
            let gb = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            (gb * BITS_PER_GB).round() as u64
        })
        .collect();
    let tr_per_ps = cfg.storage_ratio[1] / cfg.storage_ratio[2];
    let m = cfg.m_ps_per_lpsg;
    let tr_storage_bits = (0..cfg.z_lpsgs)
        .map(|g| {
            let group = &ps_storage_bits[g * m..(g + 1) * m];
            let mean = group.iter().map(|&b| b as f64).sum::<f64>() / m as f64;
            (mean * tr_per_ps).round() as u64
        })
        .collect();
    Ok(ClusterTopology {
        z_lpsgs: cfg.z_lpsgs,
        m_ps_per_lpsg: m,
        clients_per_ps: cfg.clients_per_ps,
        ps_bandwidth_bps: cfg.ps_bandwidth_bps,
        ps_storage_bits,
        tr_storage_bits,
        delays: LinkDelays {
            ps_client_ms: cfg.ps_client_ms,
            ps_ps_ms: cfg.ps_ps_ms,
            tr_ps_ms: cfg.tr_ps_ms,
            tr_tr_ms: cfg.tr_tr_ms,
            mms_ps_ms: cfg.mms_ps_ms,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_sizes() {
        let t = build_topology(&SimConfig::default(), 1).unwrap();
        assert_eq!(t.n_ps(), 36);
        assert_eq!(t.n_clients(), 1800);
        assert_eq!(t.tr_storage_bits.len(), 6);
        for b in &t.ps_storage_bits {
            assert!((60.0 * BITS_PER_GB..=200.0 * BITS_PER_GB).contains(&(*b as f64)));
        }
        // tracker : proxy = 4 : 2
        for g in 0..6 {
            let mean: f64 = t.members(g).map(|p| t.ps_storage_bits[p.0] as f64).sum::<f64>() / 6.0;
            assert!((t.tr_storage_bits[g] as f64 - 2.0 * mean).abs() <= 1.0);
        }
        assert_eq!(build_topology(&SimConfig::default(), 1).unwrap(), t);
    }

    #[test]
    fn ring_neighbors() {
        let t = build_topology(&SimConfig::default(), 1).unwrap();
        assert_eq!(t.neighbors(0), vec![5, 1]);
        assert_eq!(t.neighbors(3), vec![2, 4]);
        let one = SimConfig { z_lpsgs: 1, m_ps_per_lpsg: 1, ..Default::default() };
        let t1 = build_topology(&one, 1).unwrap();
        assert!(t1.neighbors(0).is_empty());
        assert_eq!(t1.members(0).collect::<Vec<_>>(), vec![PsId(0)]);
        let two = SimConfig { z_lpsgs: 2, ..Default::default() };
        assert_eq!(build_topology(&two, 1).unwrap().neighbors(0), vec![1]);
    }

    #[test]
    fn invalid_config_names_field() {
        let bad = SimConfig { z_lpsgs: 0, ..Default::default() };
        let e = build_topology(&bad, 0).unwrap_err();
        assert!(e.to_string().contains("z_lpsgs"));
    }
}
