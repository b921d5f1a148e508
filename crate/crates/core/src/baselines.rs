//! Benchmark schemes: round-robin scheduling with conjugate or zero-forcing
//! beams at equal power, computed per RRH without coordination.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::norm_sqr;
use crate::wsr::{BeamformerSet, ScheduleMask, Topology};

/// Each RRH walks through `E_r` (ascending user index) in windows of `M`
/// users; slot `t` starts at position `t M mod |E_r|` and wraps around.
pub fn round_robin_schedule(topology: &Topology, antennas: usize, slot: usize) -> ScheduleMask {
    let mut s = ScheduleMask::empty(topology.num_rrhs(), topology.num_users());
    for r in 0..topology.num_rrhs() {
        let users = topology.served(r);
        let n = users.len();
        if n <= antennas {
            for &u in users {
                s.set(r, u, true);
            }
            continue;
        }
        let start = ((slot as u128 * antennas as u128) % n as u128) as usize;
        for i in 0..antennas {
            s.set(r, users[(start + i) % n], true);
        }
    }
    s
}

fn scheduled_blocks(topology: &Topology, schedule: &ScheduleMask, r: usize) -> Vec<(usize, usize)> {
    topology.beams_at(r).filter(|&(u, _)| schedule.get(r, u)).collect()
}

/// Matched-filter beams with the RRH power split equally over its
/// scheduled users.
pub fn conjugate_beamformers(
    channels: &ChannelMatrix,
    topology: &Topology,
    schedule: &ScheduleMask,
    power: f64,
) -> Result<BeamformerSet> {
    let mut w = BeamformerSet::zeros(topology);
    for r in 0..topology.num_rrhs() {
        let beams = scheduled_blocks(topology, schedule, r);
        if beams.is_empty() {
            continue;
        }
        let amp = (power / beams.len() as f64).sqrt();
        for (u, k) in beams {
            let h = channels.get(r, u);
            let norm = norm_sqr(h).sqrt();
            if !(norm > 0.0) {
                return Err(Error::ZeroChannel { rrh: r, user: u });
            }
            for (dst, src) in w.block_mut(u, k).iter_mut().zip(h) {
                *dst = src * (amp / norm);
            }
        }
    }
    Ok(w)
}

/// Eigenvalue ratio below which the scheduled channels count as rank
/// deficient.
const RANK_TOL: f64 = 1e-12;

/// Per-RRH zero-forcing `H (H^H H)^{-1}` over the scheduled users, columns
/// rescaled to power `p / k` each. Users are dropped, weakest channel first,
/// until the scheduled channels have full column rank. Returns the beams and
/// the schedule actually served.
pub fn zf_beamformers(
    channels: &ChannelMatrix,
    topology: &Topology,
    schedule: &ScheduleMask,
    power: f64,
) -> Result<(BeamformerSet, ScheduleMask)> {
    let m = channels.antennas();
    let mut w = BeamformerSet::zeros(topology);
    let mut served = schedule.clone();
    for r in 0..topology.num_rrhs() {
        let mut beams = scheduled_blocks(topology, schedule, r);
        let zf = loop {
            if beams.is_empty() {
                break None;
            }
            let h = DMatrix::from_fn(m, beams.len(), |a, j| channels.get(r, beams[j].0)[a]);
            let gram = h.ad_mul(&h);
            let eig = SymmetricEigen::new(gram.clone());
            let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
            let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            if beams.len() <= m && max > 0.0 && min > RANK_TOL * max {
                if let Some(chol) = gram.cholesky() {
                    break Some(&h * chol.inverse());
                }
            }
            let (weakest, _) = beams
                .iter()
                .enumerate()
                .map(|(i, &(u, _))| (i, norm_sqr(channels.get(r, u))))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            let (u, _) = beams.remove(weakest);
            warn!("zero-forcing at RRH {r}: dropping user {u} to restore full rank");
            served.set(r, u, false);
        };
        let Some(zf) = zf else { continue };
        let per_beam = power / beams.len() as f64;
        for (j, &(u, k)) in beams.iter().enumerate() {
            let col = zf.column(j);
            let scale = (per_beam / col.norm_squared()).sqrt();
            for (dst, src) in w.block_mut(u, k).iter_mut().zip(col.iter()) {
                *dst = src * scale;
            }
        }
    }
    Ok((w, served))
}
