//! Coherent transmission: every serving RRH sends the same symbol, so the
//! user sees `a_{u',u} = h_{u',u}^H w_{u'}` from each stacked beamformer.

use nalgebra::{DMatrix, DMatrixView, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::{
    for_each_cross_term, error_load, run_optimizer, BeamSystem, BeamformerSet, BlockWeights,
    Formulation, Multipliers, OptimConfig, OptimOutcome, PowerTerm, Problem, RrhPowerModel,
    Topology, UserPowerModel,
};
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::pairs::PairMatrix;

/// `h_{u',u}`: the channels from the RRHs of `C_{u'}` to user `u`, stacked in
/// cluster order.
pub fn stack_cluster_channel(
    channels: &ChannelMatrix,
    topology: &Topology,
    cluster_of: usize,
    user: usize,
) -> Vec<C64> {
    topology
        .serving(cluster_of)
        .iter()
        .flat_map(|&r| channels.get(r, user).iter().copied())
        .collect()
}

/// Own effective gain `a_uu` and everything else in the denominator
/// (interference, estimation-error load, noise) per user.
struct Stats {
    own: Vec<C64>,
    rest: Vec<f64>,
}

fn stats(
    channels: &ChannelMatrix,
    error_var: Option<&PairMatrix<f64>>,
    topology: &Topology,
    w: &BeamformerSet,
    noise_power: f64,
) -> Stats {
    let nu = topology.num_users();
    let load = error_load(error_var, topology, w);
    let per_user: Vec<(C64, f64)> = (0..nu)
        .into_par_iter()
        .map(|u| {
            let mut a = vec![ZERO; nu];
            for_each_cross_term(channels, topology, w, u, |r, j, d| {
                a[topology.served(r)[j]] += d;
            });
            let interference: f64 = a
                .iter()
                .enumerate()
                .filter(|&(v, _)| v != u)
                .map(|(_, x)| x.norm_sqr())
                .sum();
            (a[u], interference + load[u] + noise_power)
        })
        .collect();
    let (own, rest) = per_user.into_iter().unzip();
    Stats { own, rest }
}

/// `gamma_u = |a_uu|^2 / (sum_{u' != u} |a_{u',u}|^2 + sum_{u'} w_{u'}^H Theta_{u',u} w_{u'} + sigma^2)`.
pub fn coherent_sinr(
    channels: &ChannelMatrix,
    error_var: Option<&PairMatrix<f64>>,
    topology: &Topology,
    w: &BeamformerSet,
    noise_power: f64,
) -> Vec<f64> {
    let s = stats(channels, error_var, topology, w, noise_power);
    s.own
        .iter()
        .zip(&s.rest)
        .map(|(a, d)| (a.norm_sqr() / d).max(0.0))
        .collect()
}

/// `beta_u = sqrt(delta_u (1 + gamma_u)) w_u^H h_{u,u} / T_u` with `T_u` the
/// total received power including noise.
pub fn coherent_beta(problem: &Problem, w: &BeamformerSet, gamma: &[f64]) -> Vec<C64> {
    let s = stats(
        problem.channels,
        problem.error_var,
        &problem.topology,
        w,
        problem.noise_power,
    );
    (0..gamma.len())
        .map(|u| {
            let total = s.own[u].norm_sqr() + s.rest[u];
            s.own[u].conj() * (problem.gain_factor(u, gamma[u]) / total)
        })
        .collect()
}

/// Quadratic-transform surrogate
/// `sum_u delta_u (ln(1+gamma_u) - gamma_u) + 2 Re{beta_u^* c_u w_u^H h_{u,u}} - |beta_u|^2 T_u`.
pub fn coherent_surrogate(problem: &Problem, w: &BeamformerSet, gamma: &[f64], beta: &[C64]) -> f64 {
    let s = stats(
        problem.channels,
        problem.error_var,
        &problem.topology,
        w,
        problem.noise_power,
    );
    (0..gamma.len())
        .map(|u| {
            let g = gamma[u];
            let c = problem.gain_factor(u, g);
            let total = s.own[u].norm_sqr() + s.rest[u];
            problem.weights[u] * (g.ln_1p() - g)
                + 2.0 * (beta[u].conj() * s.own[u].conj() * c).re
                - beta[u].norm_sqr() * total
        })
        .sum()
}

/// Matrices behind `w_u = c_u beta_u^* (A_u + B_u)^{-1} h_{u,u}`.
struct CoherentSystem<'a> {
    problem: &'a Problem<'a>,
    /// `pair_index[r * nr + r']` into `blocks` for `r <= r'`.
    pair_index: Vec<Option<usize>>,
    /// `sum_u |beta_u|^2 ĥ_ru ĥ_r'u^H`.
    blocks: Vec<DMatrix<C64>>,
    /// `sum_u |beta_u|^2 theta_ru`.
    error_diag: Vec<f64>,
    /// `c_u beta_u^*`.
    rhs_scale: Vec<C64>,
}

impl<'a> CoherentSystem<'a> {
    fn new(problem: &'a Problem<'a>, gamma: &[f64], beta: &[C64]) -> Self {
        let topo = &problem.topology;
        let (nr, nu, m) = (topo.num_rrhs(), topo.num_users(), topo.antennas());
        let mut pairs = Vec::new();
        let mut pair_index = vec![None; nr * nr];
        for u in 0..nu {
            let c = topo.serving(u);
            for (i, &r) in c.iter().enumerate() {
                for &r2 in &c[i..] {
                    if pair_index[r * nr + r2].is_none() {
                        pair_index[r * nr + r2] = Some(pairs.len());
                        pairs.push((r, r2));
                    }
                }
            }
        }
        let weights: Vec<f64> = beta.iter().map(|b| b.norm_sqr()).collect();
        let view = |r: usize| DMatrixView::from_slice(problem.channels.rrh_slice(r), m, nu);
        let blocks = pairs
            .par_iter()
            .map(|&(r, r2)| {
                let mut scaled = view(r).into_owned();
                for (mut col, &b) in scaled.column_iter_mut().zip(&weights) {
                    col *= C64::from(b);
                }
                scaled * view(r2).adjoint()
            })
            .collect();
        let error_diag = (0..nr)
            .map(|r| (0..nu).map(|u| weights[u] * problem.theta(r, u)).sum())
            .collect();
        let rhs_scale = (0..nu)
            .map(|u| beta[u].conj() * problem.gain_factor(u, gamma[u]))
            .collect();
        CoherentSystem {
            problem,
            pair_index,
            blocks,
            error_diag,
            rhs_scale,
        }
    }

    fn block(&self, r: usize, r2: usize) -> DMatrix<C64> {
        let nr = self.problem.topology.num_rrhs();
        if r <= r2 {
            self.blocks[self.pair_index[r * nr + r2].expect("missing pair")].clone()
        } else {
            self.blocks[self.pair_index[r2 * nr + r].expect("missing pair")].adjoint()
        }
    }

    /// `A_u + B_u` for the given multipliers.
    fn matrix(&self, u: usize, alpha: &BlockWeights, mult: &Multipliers) -> DMatrix<C64> {
        let topo = &self.problem.topology;
        let m = topo.antennas();
        let c = topo.serving(u);
        let n = m * c.len();
        let mut k = DMatrix::<C64>::zeros(n, n);
        for (i, &r) in c.iter().enumerate() {
            for (j, &r2) in c.iter().enumerate().skip(i) {
                let b = self.block(r, r2);
                k.view_mut((i * m, j * m), (m, m)).copy_from(&b);
                if j != i {
                    k.view_mut((j * m, i * m), (m, m)).copy_from(&b.adjoint());
                }
            }
            let diag = self.error_diag[r] + mult.load(r, alpha[u][i]);
            for a in 0..m {
                k[(i * m + a, i * m + a)] += C64::from(diag);
            }
        }
        k
    }

    fn cholesky(
        &self,
        u: usize,
        alpha: &BlockWeights,
        mult: &Multipliers,
    ) -> Result<nalgebra::Cholesky<C64, nalgebra::Dyn>> {
        let k = self.matrix(u, alpha, mult);
        let n = k.nrows();
        let diag_max = (0..n).map(|i| k[(i, i)].re).fold(0.0, f64::max);
        nalgebra::Cholesky::new(k).ok_or_else(|| {
            Error::Numerical(format!(
                "beamformer system of user {u} (dimension {n}, largest diagonal {diag_max:e}) is not positive definite"
            ))
        })
    }

    fn stacked_channel(&self, u: usize) -> DVector<C64> {
        DVector::from_vec(stack_cluster_channel(
            self.problem.channels,
            &self.problem.topology,
            u,
            u,
        ))
    }
}

impl BeamSystem for CoherentSystem<'_> {
    fn power_model(&self, alpha: &BlockWeights, mult: &Multipliers, r: usize) -> Result<RrhPowerModel> {
        let topo = &self.problem.topology;
        let m = topo.antennas();
        let beams: Vec<(usize, usize)> = topo.beams_at(r).collect();
        let users = beams
            .par_iter()
            .map(|&(u, k)| {
                let chol = self.cholesky(u, alpha, mult)?;
                let n = m * topo.serving(u).len();
                // K^{-1} [h_uu, P_r]
                let mut rhs = DMatrix::<C64>::zeros(n, m + 1);
                rhs.column_mut(0).copy_from(&self.stacked_channel(u));
                for a in 0..m {
                    rhs[(k * m + a, a + 1)] = C64::new(1.0, 0.0);
                }
                let x = chol.solve(&rhs);
                let z0 = x.view((k * m, 0), (m, 1)).into_owned();
                let s = x.view((k * m, 1), (m, m));
                let s = (s + s.adjoint()) * C64::from(0.5);
                let eig = SymmetricEigen::new(s);
                let z = eig.eigenvectors.adjoint() * z0;
                let scale = self.rhs_scale[u].norm_sqr();
                Ok(UserPowerModel {
                    alpha: alpha[u][k],
                    base: mult.load(r, alpha[u][k]),
                    terms: (0..m)
                        .map(|i| PowerTerm {
                            q: scale * z[i].norm_sqr(),
                            d: 1.0,
                            e: eig.eigenvalues[i].max(0.0),
                        })
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RrhPowerModel { users })
    }

    fn solve(&self, alpha: &BlockWeights, mult: &Multipliers) -> Result<BeamformerSet> {
        let topo = &self.problem.topology;
        let solved = (0..topo.num_users())
            .into_par_iter()
            .map(|u| {
                if self.rhs_scale[u] == ZERO {
                    return Ok(None);
                }
                let chol = self.cholesky(u, alpha, mult)?;
                Ok(Some(chol.solve(&self.stacked_channel(u)) * self.rhs_scale[u]))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut w = BeamformerSet::zeros(topo);
        for (u, x) in solved.into_iter().enumerate() {
            if let Some(x) = x {
                w.user_mut(u).copy_from_slice(x.as_slice());
            }
        }
        Ok(w)
    }
}

/// Closed-form beamformers `w_u = c_u beta_u^* (A_u + B_u)^{-1} h_{u,u}`
/// with `A_u = sum_{u''} |beta_{u''}|^2 (h_{u,u''} h_{u,u''}^H + Theta_{u,u''})`
/// and `B_u = diag(mu_r + lambda_r alpha_ru) ⊗ I_M`.
pub fn coherent_beamformers(
    problem: &Problem,
    gamma: &[f64],
    beta: &[C64],
    alpha: &BlockWeights,
    mult: &Multipliers,
) -> Result<BeamformerSet> {
    CoherentSystem::new(problem, gamma, beta).solve(alpha, mult)
}

pub(crate) struct Coherent;

impl Formulation for Coherent {
    type Beta = Vec<C64>;

    fn sinr(&self, problem: &Problem, w: &BeamformerSet) -> Vec<f64> {
        coherent_sinr(
            problem.channels,
            problem.error_var,
            &problem.topology,
            w,
            problem.noise_power,
        )
    }

    fn beta(&self, problem: &Problem, w: &BeamformerSet, gamma: &[f64]) -> Vec<C64> {
        coherent_beta(problem, w, gamma)
    }

    fn surrogate(&self, problem: &Problem, w: &BeamformerSet, gamma: &[f64], beta: &Vec<C64>) -> f64 {
        coherent_surrogate(problem, w, gamma, beta)
    }

    fn system<'s>(
        &self,
        problem: &'s Problem,
        gamma: &'s [f64],
        beta: &'s Vec<C64>,
    ) -> Result<Box<dyn BeamSystem + 's>> {
        Ok(Box::new(CoherentSystem::new(problem, gamma, beta)))
    }
}

/// Coherent-mode block-coordinate optimizer started from conjugate
/// beamforming.
pub fn optimize_coherent(problem: &Problem, config: &OptimConfig) -> Result<OptimOutcome> {
    run_optimizer(&Coherent, problem, config, None)
}
