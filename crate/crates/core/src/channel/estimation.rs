use nalgebra::DMatrix;
use rand::Rng;

use super::pilots::{dft_pilot, PilotAssignment};
use super::{ChannelMatrix, ChannelSet, TrainingConfig};
use crate::error::{Error, Result};
use crate::linalg::{complex_normal, norm_sqr, C64, ZERO};
use crate::netgen::Clusters;
use crate::pairs::PairMatrix;

/// Received pilot block `Y_r = sum_u sqrt(p_u) h_ru phi_u + Z_r` at every
/// RRH, each `M x tau_p`.
pub fn simulate_uplink_training<R: Rng + ?Sized>(
    true_channels: &ChannelMatrix,
    pilots: &PilotAssignment,
    config: &TrainingConfig,
    rng: &mut R,
) -> Vec<DMatrix<C64>> {
    let m = true_channels.antennas();
    let tau = pilots.pilot_length;
    let amp = config.pilot_power.sqrt();
    let sequences: Vec<Vec<C64>> = (0..tau).map(|k| dft_pilot(tau, k)).collect();
    (0..true_channels.num_rrhs())
        .map(|r| {
            let mut y = DMatrix::from_fn(m, tau, |_, _| complex_normal(rng, config.noise_power));
            for u in 0..true_channels.num_users() {
                let h = true_channels.get(r, u);
                let phi = &sequences[pilots.pilot_of[u]];
                for (n, &p) in phi.iter().enumerate() {
                    for (a, &hv) in h.iter().enumerate() {
                        y[(a, n)] += hv * p * amp;
                    }
                }
            }
            y
        })
        .collect()
}

/// Estimates with their covariance diagonals.
#[derive(Debug, Clone)]
pub struct MmseOutput {
    pub estimates: ChannelMatrix,
    pub estimate_var: PairMatrix<f64>,
    pub error_var: PairMatrix<f64>,
}

/// Linear MMSE estimate of every (RRH, user) channel.
///
/// With orthonormal pilots and `D_ru = d_ru I`, projecting `Y_r` on `phi_u`
/// gives a sufficient statistic, and the estimator reduces to a per-antenna
/// Wiener gain `d_ru / (sum_{u' in U_u} d_ru' + sigma^2 / p_u)`.
pub fn mmse_estimate(
    received: &[DMatrix<C64>],
    pilots: &PilotAssignment,
    large_scale: &PairMatrix<f64>,
    config: &TrainingConfig,
) -> Result<MmseOutput> {
    let nr = received.len();
    let nu = pilots.num_users();
    let tau = pilots.pilot_length;
    let m = received.first().map_or(0, |y| y.nrows());
    let noise_ratio = config.noise_power / config.pilot_power;
    let amp = config.pilot_power.sqrt();
    let sequences: Vec<Vec<C64>> = (0..tau).map(|k| dft_pilot(tau, k)).collect();

    let mut estimates = ChannelMatrix::zeros(m, nr, nu);
    let mut estimate_var = PairMatrix::filled(nr, nu, 0.0);
    let mut error_var = PairMatrix::filled(nr, nu, 0.0);

    for (r, y) in received.iter().enumerate() {
        // Y_r phi_k^H for every pilot.
        let projected: Vec<Vec<C64>> = sequences
            .iter()
            .map(|phi| {
                (0..m)
                    .map(|a| {
                        let mut acc = ZERO;
                        for (n, p) in phi.iter().enumerate() {
                            acc += y[(a, n)] * p.conj();
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let mut copilot_gain = vec![0.0; tau];
        for u in 0..nu {
            copilot_gain[pilots.pilot_of[u]] += large_scale.at(r, u);
        }
        for u in 0..nu {
            let k = pilots.pilot_of[u];
            let d = large_scale.at(r, u);
            let denom = copilot_gain[k] + noise_ratio;
            if !(denom > 0.0) {
                return Err(Error::Numerical(format!(
                    "singular training covariance at RRH {r}"
                )));
            }
            let wiener = d / denom / amp;
            for (dst, src) in estimates.get_mut(r, u).iter_mut().zip(&projected[k]) {
                *dst = src * wiener;
            }
            let psi = d * d / denom;
            *estimate_var.get_mut(r, u) = psi;
            *error_var.get_mut(r, u) = (d - psi).max(0.0);
        }
    }
    Ok(MmseOutput {
        estimates,
        estimate_var,
        error_var,
    })
}

/// Training plus estimation, packaged for the optimizer.
pub fn estimate_channels<R: Rng + ?Sized>(
    true_channels: ChannelMatrix,
    large_scale: PairMatrix<f64>,
    pilots: &PilotAssignment,
    config: &TrainingConfig,
    rng: &mut R,
) -> Result<ChannelSet> {
    let received = simulate_uplink_training(&true_channels, pilots, config, rng);
    let out = mmse_estimate(&received, pilots, &large_scale, config)?;
    Ok(ChannelSet {
        true_channels,
        estimates: out.estimates,
        error_var: out.error_var,
        estimate_var: out.estimate_var,
        large_scale,
    })
}

/// `sum ||h_hat - h||^2 / sum ||h||^2` over the given pairs.
pub fn nmse(
    true_channels: &ChannelMatrix,
    estimates: &ChannelMatrix,
    pairs: impl IntoIterator<Item = (usize, usize)>,
) -> Result<f64> {
    let mut err = 0.0;
    let mut energy = 0.0;
    for (r, u) in pairs {
        let h = true_channels.get(r, u);
        let e = estimates.get(r, u);
        err += h.iter().zip(e).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        energy += norm_sqr(h);
    }
    if energy > 0.0 {
        Ok(err / energy)
    } else {
        Err(Error::Undefined("NMSE of all-zero channels"))
    }
}

/// NMSE over the serving pairs `r in C_u`.
pub fn nmse_over_clusters(
    true_channels: &ChannelMatrix,
    estimates: &ChannelMatrix,
    clusters: &Clusters,
) -> Result<f64> {
    nmse(
        true_channels,
        estimates,
        clusters
            .serving
            .iter()
            .enumerate()
            .flat_map(|(u, c)| c.iter().map(move |&r| (r, u))),
    )
}
