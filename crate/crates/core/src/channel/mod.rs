//! Small-scale fading, pilot assignment, uplink training and MMSE channel
//! estimation.
//!
//! Every RRH-user channel is `h_ru = sqrt(gain_ru) g_ru` with
//! `g_ru ~ CN(0, I_M)`. Because the large-scale matrix `D_ru` is a scaled
//! identity and the pilots are orthonormal, the estimate and error
//! covariances are scaled identities too; [`ChannelSet`] stores their common
//! diagonal entry per pair.

mod estimation;
pub mod hac;
mod pilots;

pub use estimation::{
    estimate_channels, mmse_estimate, nmse, nmse_over_clusters, simulate_uplink_training,
    MmseOutput,
};
pub use pilots::{
    assign_pilots_hac, assign_pilots_random, dft_pilot, pilot_reuse_factor, PilotAssignment,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_normal, db_to_linear, C64, ZERO};
use crate::pairs::PairMatrix;

/// Uplink training parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// `tau_p`, pilot symbols per block.
    pub pilot_length: usize,
    /// `tau_d`, symbols per coherence block.
    pub block_length: usize,
    /// Uplink pilot power, W.
    pub pilot_power: f64,
    /// Receiver noise power, W.
    pub noise_power: f64,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pilot_length == 0 {
            return Err(Error::config("pilot_length", "must be at least 1"));
        }
        if self.pilot_length >= self.block_length {
            return Err(Error::config(
                "pilot_length",
                format!(
                    "must be smaller than block_length ({} >= {})",
                    self.pilot_length, self.block_length
                ),
            ));
        }
        if !(self.pilot_power > 0.0) {
            return Err(Error::config("pilot_power_dbm", "must give a positive power"));
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::config("noise_power", "must be positive"));
        }
        Ok(())
    }

    /// Fraction of the block left for data, `(tau_d - tau_p) / tau_d`.
    pub fn overhead_factor(&self) -> f64 {
        (self.block_length - self.pilot_length) as f64 / self.block_length as f64
    }
}

/// Thermal noise power in dBm over `bandwidth_hz`.
pub fn noise_power_dbm(psd_dbm_hz: f64, noise_figure_db: f64, bandwidth_hz: f64) -> f64 {
    psd_dbm_hz + noise_figure_db + 10.0 * bandwidth_hz.log10()
}

pub fn noise_power_watts(psd_dbm_hz: f64, noise_figure_db: f64, bandwidth_hz: f64) -> f64 {
    db_to_linear(noise_power_dbm(psd_dbm_hz, noise_figure_db, bandwidth_hz) - 30.0)
}

/// One complex `M`-vector per (RRH, user) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    antennas: usize,
    num_rrhs: usize,
    num_users: usize,
    data: Vec<C64>,
}

impl ChannelMatrix {
    pub fn zeros(antennas: usize, num_rrhs: usize, num_users: usize) -> Self {
        ChannelMatrix {
            antennas,
            num_rrhs,
            num_users,
            data: vec![ZERO; antennas * num_rrhs * num_users],
        }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn num_rrhs(&self) -> usize {
        self.num_rrhs
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    #[inline]
    pub fn get(&self, r: usize, u: usize) -> &[C64] {
        let start = (r * self.num_users + u) * self.antennas;
        &self.data[start..start + self.antennas]
    }

    #[inline]
    pub fn get_mut(&mut self, r: usize, u: usize) -> &mut [C64] {
        let start = (r * self.num_users + u) * self.antennas;
        &mut self.data[start..start + self.antennas]
    }

    /// All channels at RRH `r` as a column-major `M x num_users` slice.
    pub fn rrh_slice(&self, r: usize) -> &[C64] {
        let len = self.antennas * self.num_users;
        &self.data[r * len..(r + 1) * len]
    }

    pub fn map(&self, mut f: impl FnMut(usize, usize, &[C64]) -> Vec<C64>) -> Self {
        let mut out = ChannelMatrix::zeros(self.antennas, self.num_rrhs, self.num_users);
        for r in 0..self.num_rrhs {
            for u in 0..self.num_users {
                out.get_mut(r, u).copy_from_slice(&f(r, u, self.get(r, u)));
            }
        }
        out
    }
}

/// Draws `g_ru ~ CN(0, I_M)` for every pair.
pub fn draw_small_scale<R: Rng + ?Sized>(
    antennas: usize,
    num_rrhs: usize,
    num_users: usize,
    rng: &mut R,
) -> ChannelMatrix {
    let mut g = ChannelMatrix::zeros(antennas, num_rrhs, num_users);
    for v in g.data.iter_mut() {
        *v = complex_normal(rng, 1.0);
    }
    g
}

/// `h_ru = sqrt(gain_ru) g_ru`.
pub fn true_channels(small_scale: &ChannelMatrix, gain: &PairMatrix<f64>) -> ChannelMatrix {
    small_scale.map(|r, u, g| {
        let s = gain.at(r, u).sqrt();
        g.iter().map(|x| x * s).collect()
    })
}

/// Channels as seen by the optimizer plus their error statistics.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub true_channels: ChannelMatrix,
    /// Channel estimates; equal to the true channels under ideal CSI.
    pub estimates: ChannelMatrix,
    /// Common diagonal entry of the error covariance `Theta_ru`.
    pub error_var: PairMatrix<f64>,
    /// Common diagonal entry of the estimate covariance `Psi_ru`.
    pub estimate_var: PairMatrix<f64>,
    /// Common diagonal entry of `D_ru`.
    pub large_scale: PairMatrix<f64>,
}

impl ChannelSet {
    /// Ideal CSI: estimates equal the true channels and `Theta = 0`.
    pub fn ideal(true_channels: ChannelMatrix, large_scale: PairMatrix<f64>) -> Self {
        let (nr, nu) = (true_channels.num_rrhs(), true_channels.num_users());
        ChannelSet {
            estimates: true_channels.clone(),
            true_channels,
            error_var: PairMatrix::filled(nr, nu, 0.0),
            estimate_var: large_scale.clone(),
            large_scale,
        }
    }

    pub fn antennas(&self) -> usize {
        self.true_channels.antennas()
    }

    pub fn num_rrhs(&self) -> usize {
        self.true_channels.num_rrhs()
    }

    pub fn num_users(&self) -> usize {
        self.true_channels.num_users()
    }

    /// Same estimates with the error covariance dropped, i.e. the optimizer
    /// treats the estimates as exact.
    pub fn without_error_covariance(&self) -> Self {
        let mut out = self.clone();
        out.error_var = PairMatrix::filled(self.num_rrhs(), self.num_users(), 0.0);
        out
    }
}
