//! Non-coherent transmission: each serving RRH sends its own stream and the
//! user decodes them by successive interference cancellation, so useful
//! powers add per RRH instead of amplitudes.

use nalgebra::{DMatrixView, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::{
    error_load, for_each_cross_term, run_optimizer, BeamSystem, BeamformerSet, BlockWeights,
    Formulation, Multipliers, OptimConfig, OptimOutcome, PowerTerm, Problem, RrhPowerModel,
    Topology, UserPowerModel,
};
use crate::channel::ChannelMatrix;
use crate::error::Result;
use crate::linalg::{C64, ZERO};
use crate::pairs::PairMatrix;

/// Per-block useful gains `ĥ_ru^H w̄_ru` and the rest of the denominator.
struct Stats {
    own: Vec<Vec<C64>>,
    rest: Vec<f64>,
}

impl Stats {
    fn signal(&self, u: usize) -> f64 {
        self.own[u].iter().map(|x| x.norm_sqr()).sum()
    }

    fn total(&self, u: usize) -> f64 {
        self.signal(u) + self.rest[u]
    }
}

fn stats(
    channels: &ChannelMatrix,
    error_var: Option<&PairMatrix<f64>>,
    topology: &Topology,
    w: &BeamformerSet,
    noise_power: f64,
) -> Stats {
    let load = error_load(error_var, topology, w);
    let per_user: Vec<(Vec<C64>, f64)> = (0..topology.num_users())
        .into_par_iter()
        .map(|u| {
            let mut own = vec![ZERO; topology.serving(u).len()];
            let mut interference = 0.0;
            for_each_cross_term(channels, topology, w, u, |r, j, d| {
                if topology.served(r)[j] == u {
                    let k = topology.block_of(u, r).expect("served user outside cluster");
                    own[k] = d;
                } else {
                    interference += d.norm_sqr();
                }
            });
            (own, interference + load[u] + noise_power)
        })
        .collect();
    let (own, rest) = per_user.into_iter().unzip();
    Stats { own, rest }
}

/// `gamma_u = sum_{r in C_u} |ĥ_ru^H w̄_ru|^2 / (sum_{r'} sum_{u' != u} |ĥ_r'u^H w̄_r'u'|^2 + sum_{r'} sum_{u'} w̄_r'u'^H Theta_r'u w̄_r'u' + sigma^2)`.
pub fn noncoherent_sinr(
    channels: &ChannelMatrix,
    error_var: Option<&PairMatrix<f64>>,
    topology: &Topology,
    w: &BeamformerSet,
    noise_power: f64,
) -> Vec<f64> {
    let s = stats(channels, error_var, topology, w, noise_power);
    (0..topology.num_users())
        .map(|u| (s.signal(u) / s.rest[u]).max(0.0))
        .collect()
}

/// `beta_ru = sqrt(delta_u (1 + gamma_u)) w̄_ru^H ĥ_ru / T_u`, one per beam,
/// where `T_u` is the total received power including noise.
pub fn noncoherent_beta(problem: &Problem, w: &BeamformerSet, gamma: &[f64]) -> Vec<Vec<C64>> {
    let s = stats(
        problem.channels,
        problem.error_var,
        &problem.topology,
        w,
        problem.noise_power,
    );
    (0..gamma.len())
        .map(|u| {
            let scale = problem.gain_factor(u, gamma[u]) / s.total(u);
            s.own[u].iter().map(|d| d.conj() * scale).collect()
        })
        .collect()
}

/// Surrogate
/// `sum_u delta_u (ln(1+gamma_u) - gamma_u) + sum_r sum_{u in E_r} 2 Re{beta_ru^* c_u w̄_ru^H ĥ_ru} - |beta_ru|^2 T_u`.
pub fn noncoherent_surrogate(
    problem: &Problem,
    w: &BeamformerSet,
    gamma: &[f64],
    beta: &[Vec<C64>],
) -> f64 {
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
            let total = s.total(u);
            let fp: f64 = s.own[u]
                .iter()
                .zip(&beta[u])
                .map(|(d, b)| 2.0 * (b.conj() * d.conj() * c).re - b.norm_sqr() * total)
                .sum();
            problem.weights[u] * (g.ln_1p() - g) + fp
        })
        .sum()
}

/// Eigendecomposition of the per-RRH matrix
/// `A_r = sum_{u''} b_{u''} (ĥ_ru'' ĥ_ru''^H + theta_ru'' I)`,
/// `b_{u''} = sum_{r'' in C_{u''}} |beta_{r''u''}|^2`.
struct NonCoherentSystem<'a> {
    problem: &'a Problem<'a>,
    eig: Vec<SymmetricEigen<C64, nalgebra::Dyn>>,
    /// `c_u beta_ru^*` per beam block.
    rhs_scale: Vec<Vec<C64>>,
}

impl<'a> NonCoherentSystem<'a> {
    fn new(problem: &'a Problem<'a>, gamma: &[f64], beta: &[Vec<C64>]) -> Self {
        let topo = &problem.topology;
        let (nu, m) = (topo.num_users(), topo.antennas());
        let b: Vec<f64> = beta.iter().map(|v| v.iter().map(|x| x.norm_sqr()).sum()).collect();
        let eig = (0..topo.num_rrhs())
            .into_par_iter()
            .map(|r| {
                let h = DMatrixView::from_slice(problem.channels.rrh_slice(r), m, nu);
                let mut scaled = h.into_owned();
                for (mut col, &bu) in scaled.column_iter_mut().zip(&b) {
                    col *= C64::from(bu);
                }
                let mut a = scaled * h.adjoint();
                let diag: f64 = (0..nu).map(|u| b[u] * problem.theta(r, u)).sum();
                for i in 0..m {
                    a[(i, i)] += C64::from(diag);
                }
                let a = (&a + a.adjoint()) * C64::from(0.5);
                SymmetricEigen::new(a)
            })
            .collect();
        let rhs_scale = (0..nu)
            .map(|u| {
                let c = problem.gain_factor(u, gamma[u]);
                beta[u].iter().map(|x| x.conj() * c).collect()
            })
            .collect();
        NonCoherentSystem {
            problem,
            eig,
            rhs_scale,
        }
    }

    /// `V^H ĥ_ru` in the eigenbasis of `A_r`.
    fn rotated(&self, r: usize, u: usize) -> DVector<C64> {
        let h = DVector::from_column_slice(self.problem.channels.get(r, u));
        self.eig[r].eigenvectors.adjoint() * h
    }
}

impl BeamSystem for NonCoherentSystem<'_> {
    fn power_model(&self, alpha: &BlockWeights, _mult: &Multipliers, r: usize) -> Result<RrhPowerModel> {
        let topo = &self.problem.topology;
        let values = &self.eig[r].eigenvalues;
        let users = topo
            .beams_at(r)
            .map(|(u, k)| {
                let z = self.rotated(r, u);
                let scale = self.rhs_scale[u][k].norm_sqr();
                UserPowerModel {
                    alpha: alpha[u][k],
                    base: 0.0,
                    terms: z
                        .iter()
                        .zip(values.iter())
                        .map(|(zi, &l)| PowerTerm {
                            q: scale * zi.norm_sqr(),
                            d: l.max(0.0),
                            e: 1.0,
                        })
                        .collect(),
                }
            })
            .collect();
        Ok(RrhPowerModel { users })
    }

    fn solve(&self, alpha: &BlockWeights, mult: &Multipliers) -> Result<BeamformerSet> {
        let topo = &self.problem.topology;
        let mut w = BeamformerSet::zeros(topo);
        for r in 0..topo.num_rrhs() {
            let eig = &self.eig[r];
            for (u, k) in topo.beams_at(r) {
                let scale = self.rhs_scale[u][k];
                if scale == ZERO {
                    continue;
                }
                let x = mult.load(r, alpha[u][k]);
                let mut z = self.rotated(r, u);
                for (zi, &l) in z.iter_mut().zip(eig.eigenvalues.iter()) {
                    *zi *= scale / (l.max(0.0) + x);
                }
                let beam: DVector<C64> = &eig.eigenvectors * z;
                w.block_mut(u, k).copy_from_slice(beam.as_slice());
            }
        }
        Ok(w)
    }
}

/// Closed-form beams
/// `w̄_ru = c_u beta_ru^* (A_r + (mu_r + lambda_r alpha_ru) I_M)^{-1} ĥ_ru`.
pub fn noncoherent_beamformers(
    problem: &Problem,
    gamma: &[f64],
    beta: &[Vec<C64>],
    alpha: &BlockWeights,
    mult: &Multipliers,
) -> Result<BeamformerSet> {
    NonCoherentSystem::new(problem, gamma, beta).solve(alpha, mult)
}

pub(crate) struct NonCoherent;

impl Formulation for NonCoherent {
    type Beta = Vec<Vec<C64>>;

    fn sinr(&self, problem: &Problem, w: &BeamformerSet) -> Vec<f64> {
        noncoherent_sinr(
            problem.channels,
            problem.error_var,
            &problem.topology,
            w,
            problem.noise_power,
        )
    }

    fn beta(&self, problem: &Problem, w: &BeamformerSet, gamma: &[f64]) -> Vec<Vec<C64>> {
        noncoherent_beta(problem, w, gamma)
    }

    fn surrogate(
        &self,
        problem: &Problem,
        w: &BeamformerSet,
        gamma: &[f64],
        beta: &Vec<Vec<C64>>,
    ) -> f64 {
        noncoherent_surrogate(problem, w, gamma, beta)
    }

    fn system<'s>(
        &self,
        problem: &'s Problem,
        gamma: &'s [f64],
        beta: &'s Vec<Vec<C64>>,
    ) -> Result<Box<dyn BeamSystem + 's>> {
        Ok(Box::new(NonCoherentSystem::new(problem, gamma, beta)))
    }
}

/// Non-coherent block-coordinate optimizer started from conjugate
/// beamforming.
pub fn optimize_noncoherent(problem: &Problem, config: &OptimConfig) -> Result<OptimOutcome> {
    run_optimizer(&NonCoherent, problem, config, None)
}
