use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layout::NetworkRealization;
use crate::error::{Error, Result};
use crate::linalg::db_to_linear;
use crate::pairs::PairMatrix;
use crate::rng::{stream_rng, Stream};

/// COST231 Walfisch-Ikegami path loss at 1800 MHz, `d` in km.
pub fn path_loss_db(d_km: f64) -> Result<f64> {
    if !(d_km > 0.0) || !d_km.is_finite() {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {d_km} km"
        )));
    }
    Ok(-112.4271 - 38.0 * d_km.log10())
}

pub fn path_loss_linear(d_km: f64) -> Result<f64> {
    path_loss_db(d_km).map(db_to_linear)
}

/// I.i.d. log-normal shadowing `10^(X/10)`, `X ~ N(0, sigma_db^2)`, per
/// (RRH, user) pair.
pub fn draw_shadowing(realization: &NetworkRealization, sigma_db: f64) -> Result<PairMatrix<f64>> {
    if !(sigma_db >= 0.0) {
        return Err(Error::config("shadowing_db", "must be non-negative"));
    }
    let mut rng = stream_rng(realization.geometry.seed, Stream::Shadowing, &[]);
    let normal = Normal::new(0.0, sigma_db).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(PairMatrix::from_fn(
        realization.num_rrhs(),
        realization.num_users(),
        |_, _| {
            if sigma_db == 0.0 {
                1.0
            } else {
                db_to_linear(normal.sample(&mut rng))
            }
        },
    ))
}

/// User-centric serving clusters and their inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clusters {
    /// `C_u`: RRHs serving each user, ascending. This order is the block
    /// order of every stacked per-user vector.
    pub serving: Vec<Vec<usize>>,
    /// `E_r`: users served by each RRH, ascending.
    pub served: Vec<Vec<usize>>,
}

impl Clusters {
    pub fn num_users(&self) -> usize {
        self.serving.len()
    }

    pub fn num_rrhs(&self) -> usize {
        self.served.len()
    }

    /// Position of `r` within `C_u`.
    pub fn block_of(&self, u: usize, r: usize) -> Option<usize> {
        self.serving[u].binary_search(&r).ok()
    }

    pub fn from_serving(serving: Vec<Vec<usize>>, num_rrhs: usize) -> Self {
        let mut served = vec![Vec::new(); num_rrhs];
        for (u, c) in serving.iter().enumerate() {
            for &r in c {
                served[r].push(u);
            }
        }
        Clusters { serving, served }
    }

    pub fn mean_cluster_size(&self) -> f64 {
        let total: usize = self.serving.iter().map(Vec::len).sum();
        total as f64 / self.serving.len().max(1) as f64
    }
}

/// `C_u = {r : gain_ru >= rho} ∪ {argmax_r gain_ru}`; ties in the argmax go
/// to the lowest RRH index.
pub fn form_clusters(gains: &PairMatrix<f64>, rho: f64) -> Clusters {
    let (nr, nu) = (gains.num_rrhs(), gains.num_users());
    let mut serving = Vec::with_capacity(nu);
    for u in 0..nu {
        let mut best = 0;
        for r in 1..nr {
            if gains.at(r, u) > gains.at(best, u) {
                best = r;
            }
        }
        let c: Vec<usize> = (0..nr)
            .filter(|&r| r == best || gains.at(r, u) >= rho)
            .collect();
        serving.push(c);
    }
    Clusters::from_serving(serving, nr)
}

/// Everything that stays fixed across time slots within one realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LargeScaleState {
    /// Wrapped RRH-user distance, km.
    pub distance: PairMatrix<f64>,
    pub path_loss: PairMatrix<f64>,
    pub shadowing: PairMatrix<f64>,
    /// `psi_ru * l(d_ru)`.
    pub gain: PairMatrix<f64>,
    pub clusters: Clusters,
    pub threshold: f64,
}

pub fn large_scale_state(
    realization: &NetworkRealization,
    shadowing_db: f64,
    threshold: f64,
) -> Result<LargeScaleState> {
    let layout = realization.layout();
    let (nr, nu) = (realization.num_rrhs(), realization.num_users());
    let distance = PairMatrix::from_fn(nr, nu, |r, u| {
        layout.wrapped_distance(realization.rrh_positions[r], realization.user_positions[u])
    });
    let mut path_loss = PairMatrix::filled(nr, nu, 0.0);
    for r in 0..nr {
        for u in 0..nu {
            *path_loss.get_mut(r, u) = path_loss_linear(distance.at(r, u))?;
        }
    }
    let shadowing = draw_shadowing(realization, shadowing_db)?;
    let gain = PairMatrix::from_fn(nr, nu, |r, u| path_loss.at(r, u) * shadowing.at(r, u));
    let clusters = form_clusters(&gain, threshold);
    Ok(LargeScaleState {
        distance,
        path_loss,
        shadowing,
        gain,
        clusters,
        threshold,
    })
}
