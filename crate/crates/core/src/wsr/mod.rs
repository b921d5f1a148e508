//! Weighted sum-rate maximization with joint user scheduling.
//!
//! Both transmission modes share one block-coordinate loop: update the SINR
//! auxiliaries `gamma`, the fractional-programming auxiliaries `beta`, the
//! beamformers together with the per-RRH multipliers, and finally the
//! reweighted-l1 weights `alpha`. The objective recorded after every
//! iteration is `sum_u delta_u ln(1 + gamma_u)` evaluated at the current
//! beamformers, which equals the surrogate at its optimal auxiliaries.
//!
//! Beamformers are stored per user, stacked over the serving cluster `C_u`
//! in ascending RRH order. All powers are in watts.

mod coherent;
mod multipliers;
mod noncoherent;

pub use coherent::{
    coherent_beta, coherent_beamformers, coherent_sinr, coherent_surrogate, optimize_coherent,
    stack_cluster_channel,
};
pub use multipliers::{bisect_mu, update_multipliers, PowerTerm, RrhPowerModel, UserPowerModel};
pub use noncoherent::{
    noncoherent_beta, noncoherent_beamformers, noncoherent_sinr, noncoherent_surrogate,
    optimize_noncoherent,
};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dotc, norm_sqr, C64};
use crate::netgen::Clusters;
use crate::pairs::PairMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransmissionMode {
    Coherent,
    NonCoherent,
}

impl std::fmt::Display for TransmissionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransmissionMode::Coherent => "coherent",
            TransmissionMode::NonCoherent => "noncoherent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub max_iters: usize,
    /// Stop once the relative objective change drops below this.
    pub rel_tol: f64,
    /// Reweighting stabilizer, W.
    pub epsilon: f64,
    /// Capacity multiplier used when the l1 capacity budget is exceeded.
    pub lambda_small: f64,
    pub bisection_iters: usize,
    /// Relative accuracy of the per-RRH power after bisection.
    pub bisection_tol: f64,
    /// Beams above this power (W) count as scheduled.
    pub schedule_threshold: f64,
    /// Value of an inactive power multiplier; keeps every solve definite.
    pub mu_floor: f64,
    /// Per-RRH power budget, W.
    pub power: f64,
    pub antennas: usize,
}

impl OptimConfig {
    pub fn new(power: f64, antennas: usize) -> Self {
        let m = antennas as f64;
        OptimConfig {
            max_iters: 200,
            rel_tol: 1e-4,
            epsilon: 0.9 * power / m,
            lambda_small: 1.0,
            bisection_iters: 100,
            bisection_tol: 1e-10,
            schedule_threshold: 1e-3 * power / m,
            mu_floor: 1e-9 / power,
            power,
            antennas,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("epsilon", self.epsilon),
            ("lambda_small", self.lambda_small),
            ("bisection_tol", self.bisection_tol),
            ("schedule_threshold", self.schedule_threshold),
            ("mu_floor", self.mu_floor),
            ("power", self.power),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(key, "must be positive and finite"));
            }
        }
        if self.antennas == 0 {
            return Err(Error::config("antennas", "must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

/// Cluster bookkeeping shared by all per-user and per-RRH views.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    antennas: usize,
    serving: Vec<Vec<usize>>,
    served: Vec<Vec<usize>>,
    /// `served_block[r][j]`: block of RRH `r` inside `w_u`, `u = E_r[j]`.
    served_block: Vec<Vec<usize>>,
    /// `serving_pos[u][k]`: position of `u` inside `E_r`, `r = C_u[k]`.
    serving_pos: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(clusters: &Clusters, antennas: usize) -> Self {
        let served_block = clusters
            .served
            .iter()
            .enumerate()
            .map(|(r, users)| {
                users
                    .iter()
                    .map(|&u| clusters.block_of(u, r).expect("cluster sets disagree"))
                    .collect()
            })
            .collect();
        let serving_pos = clusters
            .serving
            .iter()
            .enumerate()
            .map(|(u, rrhs)| {
                rrhs.iter()
                    .map(|&r| clusters.served[r].binary_search(&u).expect("cluster sets disagree"))
                    .collect()
            })
            .collect();
        Topology {
            antennas,
            serving: clusters.serving.clone(),
            served: clusters.served.clone(),
            served_block,
            serving_pos,
        }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn num_users(&self) -> usize {
        self.serving.len()
    }

    pub fn num_rrhs(&self) -> usize {
        self.served.len()
    }

    /// `C_u`.
    pub fn serving(&self, u: usize) -> &[usize] {
        &self.serving[u]
    }

    /// `E_r`.
    pub fn served(&self, r: usize) -> &[usize] {
        &self.served[r]
    }

    /// `(user, block)` for every beam at RRH `r`.
    pub fn beams_at(&self, r: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.served[r].iter().copied().zip(self.served_block[r].iter().copied())
    }

    /// `(rrh, position in E_r)` for every block of `w_u`.
    pub fn blocks_of(&self, u: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.serving[u].iter().copied().zip(self.serving_pos[u].iter().copied())
    }

    pub fn block_of(&self, u: usize, r: usize) -> Option<usize> {
        self.serving[u].binary_search(&r).ok()
    }
}

/// Per-user stacked beamformers `w_u`, blocks ordered as `C_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    antennas: usize,
    beams: Vec<Vec<C64>>,
}

impl BeamformerSet {
    pub fn zeros(topology: &Topology) -> Self {
        let m = topology.antennas;
        BeamformerSet {
            antennas: m,
            beams: (0..topology.num_users())
                .map(|u| vec![C64::new(0.0, 0.0); m * topology.serving(u).len()])
                .collect(),
        }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn num_users(&self) -> usize {
        self.beams.len()
    }

    pub fn user(&self, u: usize) -> &[C64] {
        &self.beams[u]
    }

    pub fn user_mut(&mut self, u: usize) -> &mut [C64] {
        &mut self.beams[u]
    }

    pub fn block(&self, u: usize, k: usize) -> &[C64] {
        &self.beams[u][k * self.antennas..(k + 1) * self.antennas]
    }

    pub fn block_mut(&mut self, u: usize, k: usize) -> &mut [C64] {
        let m = self.antennas;
        &mut self.beams[u][k * m..(k + 1) * m]
    }

    /// `w̄_ru`, if `r` serves `u`.
    pub fn beam(&self, topology: &Topology, r: usize, u: usize) -> Option<&[C64]> {
        topology.block_of(u, r).map(|k| self.block(u, k))
    }

    pub fn block_power(&self, u: usize, k: usize) -> f64 {
        norm_sqr(self.block(u, k))
    }

    /// `sum_{u in E_r} ||w̄_ru||^2`.
    pub fn rrh_power(&self, topology: &Topology, r: usize) -> f64 {
        topology.beams_at(r).map(|(u, k)| self.block_power(u, k)).sum()
    }

    pub fn rrh_powers(&self, topology: &Topology) -> Vec<f64> {
        (0..topology.num_rrhs()).map(|r| self.rrh_power(topology, r)).collect()
    }

    pub fn scale_rrh(&mut self, topology: &Topology, r: usize, factor: f64) {
        for (u, k) in topology.beams_at(r) {
            for v in self.block_mut(u, k) {
                *v *= factor;
            }
        }
    }

    /// `(1 - t) self + t other`.
    pub fn lerp(&self, other: &BeamformerSet, t: f64) -> BeamformerSet {
        BeamformerSet {
            antennas: self.antennas,
            beams: self
                .beams
                .iter()
                .zip(&other.beams)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * (1.0 - t) + y * t).collect())
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.beams.iter().all(|w| crate::linalg::is_finite(w))
    }
}

/// Binary scheduling decision `s_ru`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleMask {
    mask: PairMatrix<bool>,
}

impl ScheduleMask {
    pub fn empty(num_rrhs: usize, num_users: usize) -> Self {
        ScheduleMask {
            mask: PairMatrix::filled(num_rrhs, num_users, false),
        }
    }

    /// Every `r in C_u` schedules `u`.
    pub fn all_served(topology: &Topology) -> Self {
        let mut s = Self::empty(topology.num_rrhs(), topology.num_users());
        for r in 0..topology.num_rrhs() {
            for &u in topology.served(r) {
                s.set(r, u, true);
            }
        }
        s
    }

    pub fn get(&self, r: usize, u: usize) -> bool {
        self.mask.at(r, u)
    }

    pub fn set(&mut self, r: usize, u: usize, on: bool) {
        *self.mask.get_mut(r, u) = on;
    }

    pub fn num_rrhs(&self) -> usize {
        self.mask.num_rrhs()
    }

    pub fn num_users(&self) -> usize {
        self.mask.num_users()
    }

    /// Users scheduled at RRH `r`, ascending.
    pub fn users_at(&self, r: usize) -> Vec<usize> {
        (0..self.num_users()).filter(|&u| self.get(r, u)).collect()
    }

    pub fn count_at(&self, r: usize) -> usize {
        self.mask.row(r).iter().filter(|&&b| b).count()
    }

    pub fn total(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Whether any RRH schedules `u`.
    pub fn is_user_scheduled(&self, u: usize) -> bool {
        (0..self.num_rrhs()).any(|r| self.get(r, u))
    }

    pub fn scheduled_users(&self) -> Vec<usize> {
        (0..self.num_users()).filter(|&u| self.is_user_scheduled(u)).collect()
    }

    /// Copy of `w` with unscheduled beams zeroed.
    pub fn apply(&self, topology: &Topology, w: &BeamformerSet) -> BeamformerSet {
        let mut out = w.clone();
        for u in 0..topology.num_users() {
            for (k, &r) in topology.serving(u).iter().enumerate() {
                if !self.get(r, u) {
                    out.block_mut(u, k).fill(C64::new(0.0, 0.0));
                }
            }
        }
        out
    }
}

/// Per-RRH multipliers: `mu` for the power budget, `lambda` for the l1
/// capacity budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Multipliers {
    pub fn new(num_rrhs: usize, mu: f64) -> Self {
        Multipliers {
            mu: vec![mu; num_rrhs],
            lambda: vec![0.0; num_rrhs],
        }
    }

    /// `mu_r + lambda_r alpha`.
    pub fn load(&self, r: usize, alpha: f64) -> f64 {
        self.mu[r] + self.lambda[r] * alpha
    }
}

/// Reweighting weights `alpha_ru`, aligned with the beam blocks.
pub type BlockWeights = Vec<Vec<f64>>;

pub fn initial_alpha(topology: &Topology, power: f64) -> BlockWeights {
    let a = topology.antennas() as f64 / power;
    (0..topology.num_users())
        .map(|u| vec![a; topology.serving(u).len()])
        .collect()
}

/// `alpha_ru = 1 / (||w̄_ru||^2 + epsilon)`.
pub fn update_alpha(w: &BeamformerSet, epsilon: f64) -> BlockWeights {
    (0..w.num_users())
        .map(|u| {
            let blocks = w.user(u).len() / w.antennas().max(1);
            (0..blocks).map(|k| 1.0 / (w.block_power(u, k) + epsilon)).collect()
        })
        .collect()
}

/// Everything the optimizer sees for one slot.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    /// Channels the optimizer designs for: estimates, or true channels
    /// under ideal CSI.
    pub channels: &'a ChannelMatrix,
    /// Estimation-error variance per pair; `None` ignores estimation error.
    pub error_var: Option<&'a PairMatrix<f64>>,
    pub topology: Topology,
    /// `delta_u`.
    pub weights: &'a [f64],
    pub noise_power: f64,
}

impl<'a> Problem<'a> {
    pub fn new(
        channels: &'a ChannelMatrix,
        error_var: Option<&'a PairMatrix<f64>>,
        clusters: &Clusters,
        weights: &'a [f64],
        noise_power: f64,
    ) -> Result<Self> {
        let nu = channels.num_users();
        if clusters.num_users() != nu || clusters.num_rrhs() != channels.num_rrhs() {
            return Err(Error::Domain(format!(
                "clusters cover {} RRHs x {} users, channels {} x {}",
                clusters.num_rrhs(),
                clusters.num_users(),
                channels.num_rrhs(),
                nu
            )));
        }
        if weights.len() != nu {
            return Err(Error::Domain(format!(
                "{} weights for {} users",
                weights.len(),
                nu
            )));
        }
        if let Some(u) = weights.iter().position(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::Domain(format!("weight of user {u} is not positive")));
        }
        if let Some(u) = clusters.serving.iter().position(Vec::is_empty) {
            return Err(Error::Domain(format!("user {u} has an empty serving cluster")));
        }
        if !(noise_power > 0.0) {
            return Err(Error::config("noise_power", "must be positive"));
        }
        Ok(Problem {
            channels,
            error_var,
            topology: Topology::new(clusters, channels.antennas()),
            weights,
            noise_power,
        })
    }

    pub fn theta(&self, r: usize, u: usize) -> f64 {
        self.error_var.map_or(0.0, |t| t.at(r, u))
    }

    /// `sqrt(delta_u (1 + gamma_u))`.
    pub(crate) fn gain_factor(&self, u: usize, gamma: f64) -> f64 {
        (self.weights[u] * (1.0 + gamma)).sqrt()
    }

    /// `sum_u delta_u ln(1 + gamma_u)`.
    pub fn weighted_sum_rate(&self, gamma: &[f64]) -> f64 {
        self.weights.iter().zip(gamma).map(|(d, g)| d * g.ln_1p()).sum()
    }
}

/// Calls `f(r, j, ĥ_ru^H w̄_{r,E_r[j]})` for every beam in the network, as
/// seen by user `u`.
#[inline]
pub(crate) fn for_each_cross_term(
    channels: &ChannelMatrix,
    topology: &Topology,
    w: &BeamformerSet,
    u: usize,
    mut f: impl FnMut(usize, usize, C64),
) {
    for r in 0..topology.num_rrhs() {
        let h = channels.get(r, u);
        for (j, (v, k)) in topology.beams_at(r).enumerate() {
            f(r, j, dotc(h, w.block(v, k)));
        }
    }
}

/// `sum_r theta_ru P_r` per user, `P_r` the total power at RRH `r`.
pub(crate) fn error_load(
    error_var: Option<&PairMatrix<f64>>,
    topology: &Topology,
    w: &BeamformerSet,
) -> Vec<f64> {
    let nu = topology.num_users();
    match error_var {
        None => vec![0.0; nu],
        Some(theta) => {
            let powers = w.rrh_powers(topology);
            (0..nu)
                .map(|u| {
                    powers
                        .iter()
                        .enumerate()
                        .map(|(r, p)| theta.at(r, u) * p)
                        .sum()
                })
                .collect()
        }
    }
}

/// Conjugate beamforming over every served user at full RRH power:
/// `w̄_ru = sqrt(p / |E_r|) ĥ_ru / ||ĥ_ru||`.
pub fn initial_beamformers(
    channels: &ChannelMatrix,
    topology: &Topology,
    power: f64,
) -> Result<BeamformerSet> {
    let mut w = BeamformerSet::zeros(topology);
    for r in 0..topology.num_rrhs() {
        let n = topology.served(r).len();
        if n == 0 {
            continue;
        }
        let amp = (power / n as f64).sqrt();
        for (u, k) in topology.beams_at(r) {
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

/// Thresholds beam powers at `threshold` and keeps at most `antennas`
/// strongest beams per RRH (ties go to the lower user index).
pub fn extract_schedule(
    topology: &Topology,
    w: &BeamformerSet,
    threshold: f64,
    antennas: usize,
) -> ScheduleMask {
    let mut s = ScheduleMask::empty(topology.num_rrhs(), topology.num_users());
    for r in 0..topology.num_rrhs() {
        let mut live: Vec<(usize, f64)> = topology
            .beams_at(r)
            .map(|(u, k)| (u, w.block_power(u, k)))
            .filter(|&(_, p)| p > threshold)
            .collect();
        live.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(u, _) in live.iter().take(antennas) {
            s.set(r, u, true);
        }
    }
    s
}

/// Scales down every RRH whose power exceeds `power`.
pub(crate) fn project_power(topology: &Topology, w: &mut BeamformerSet, power: f64) {
    for r in 0..topology.num_rrhs() {
        let p = w.rrh_power(topology, r);
        if p > power {
            w.scale_rrh(topology, r, (power / p).sqrt());
        }
    }
}

/// Result of one optimizer run.
#[derive(Debug, Clone)]
pub struct OptimOutcome {
    /// Converged beamformers before schedule extraction.
    pub beamformers: BeamformerSet,
    pub schedule: ScheduleMask,
    /// SINR auxiliaries at the final iterate, as seen by the optimizer.
    pub sinr: Vec<f64>,
    pub multipliers: Multipliers,
    pub alpha: BlockWeights,
    /// Objective at the initial point and after every iteration.
    pub trace: Vec<f64>,
    /// Number of RRHs with an active capacity multiplier, per iteration.
    pub capacity_active: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

/// Linear system behind the closed-form beamformer update for fixed
/// `gamma` and `beta`.
pub(crate) trait BeamSystem: Sync {
    fn power_model(
        &self,
        alpha: &BlockWeights,
        mult: &Multipliers,
        r: usize,
    ) -> Result<RrhPowerModel>;

    fn solve(&self, alpha: &BlockWeights, mult: &Multipliers) -> Result<BeamformerSet>;
}

/// One transmission mode's closed-form updates.
pub(crate) trait Formulation {
    type Beta: Sync;

    fn sinr(&self, problem: &Problem, w: &BeamformerSet) -> Vec<f64>;

    fn beta(&self, problem: &Problem, w: &BeamformerSet, gamma: &[f64]) -> Self::Beta;

    fn surrogate(&self, problem: &Problem, w: &BeamformerSet, gamma: &[f64], beta: &Self::Beta)
        -> f64;

    fn system<'s>(
        &self,
        problem: &'s Problem,
        gamma: &'s [f64],
        beta: &'s Self::Beta,
    ) -> Result<Box<dyn BeamSystem + 's>>;
}

/// Best point on the segment `old -> new` for the surrogate, which is a
/// concave quadratic along the segment.
fn line_search<F: Formulation>(
    form: &F,
    problem: &Problem,
    gamma: &[f64],
    beta: &F::Beta,
    old: &BeamformerSet,
    new: BeamformerSet,
) -> BeamformerSet {
    let f = |w: &BeamformerSet| form.surrogate(problem, w, gamma, beta);
    let f0 = f(old);
    let f1 = f(&new);
    let mid = old.lerp(&new, 0.5);
    let fh = f(&mid);
    let c = 2.0 * (f1 + f0 - 2.0 * fh);
    let b = f1 - f0 - c;
    let mut best = (0.0, f0);
    for (t, v) in [(0.5, fh), (1.0, f1)] {
        if v > best.1 {
            best = (t, v);
        }
    }
    if c < 0.0 {
        let t = (-b / (2.0 * c)).clamp(0.0, 1.0);
        if t != 0.0 && t != 0.5 && t != 1.0 {
            let cand = old.lerp(&new, t);
            let v = f(&cand);
            if v > best.1 {
                return cand;
            }
        }
    }
    match best.0 {
        t if t == 1.0 => new,
        t if t == 0.5 => mid,
        _ => old.clone(),
    }
}

fn relative_change(prev: f64, next: f64) -> f64 {
    let scale = prev.abs().max(next.abs());
    if scale == 0.0 {
        0.0
    } else {
        (next - prev).abs() / scale
    }
}

/// Shared block-coordinate loop.
pub(crate) fn run_optimizer<F: Formulation>(
    form: &F,
    problem: &Problem,
    config: &OptimConfig,
    init: Option<BeamformerSet>,
) -> Result<OptimOutcome> {
    config.validate()?;
    if config.antennas != problem.channels.antennas() {
        return Err(Error::config(
            "antennas",
            format!(
                "optimizer configured for {} antennas, channels have {}",
                config.antennas,
                problem.channels.antennas()
            ),
        ));
    }
    let topo = &problem.topology;
    let mut w = match init {
        Some(w) => w,
        None => initial_beamformers(problem.channels, topo, config.power)?,
    };
    project_power(topo, &mut w, config.power);
    let mut alpha = initial_alpha(topo, config.power);
    let mut mult = Multipliers::new(topo.num_rrhs(), config.mu_floor);

    let mut gamma = form.sinr(problem, &w);
    let mut objective = problem.weighted_sum_rate(&gamma);
    let mut trace = vec![objective];
    let mut capacity_active = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        let beta = form.beta(problem, &w, &gamma);
        let next = {
            let system = form.system(problem, &gamma, &beta)?;
            for r in 0..topo.num_rrhs() {
                let model = system.power_model(&alpha, &mult, r)?;
                let (mu, lambda) = update_multipliers(&model, config, r)?;
                mult.mu[r] = mu;
                mult.lambda[r] = lambda;
            }
            let mut candidate = system.solve(&alpha, &mult)?;
            if !candidate.is_finite() {
                return Err(Error::Numerical("non-finite beamformer update".into()));
            }
            project_power(topo, &mut candidate, config.power);
            candidate
        };
        capacity_active.push(mult.lambda.iter().filter(|&&l| l > 0.0).count());
        w = line_search(form, problem, &gamma, &beta, &w, next);
        alpha = update_alpha(&w, config.epsilon);
        gamma = form.sinr(problem, &w);
        let next_objective = problem.weighted_sum_rate(&gamma);
        trace.push(next_objective);
        let change = relative_change(objective, next_objective);
        objective = next_objective;
        if change < config.rel_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!(
            "optimizer stopped at {} iterations without reaching rel_tol {}",
            iterations, config.rel_tol
        );
    }
    let schedule = extract_schedule(topo, &w, config.schedule_threshold, config.antennas);
    Ok(OptimOutcome {
        beamformers: w,
        schedule,
        sinr: gamma,
        multipliers: mult,
        alpha,
        trace,
        capacity_active,
        iterations,
        converged,
    })
}

/// Runs the optimizer for `mode`.
pub fn optimize(problem: &Problem, mode: TransmissionMode, config: &OptimConfig) -> Result<OptimOutcome> {
    match mode {
        TransmissionMode::Coherent => optimize_coherent(problem, config),
        TransmissionMode::NonCoherent => optimize_noncoherent(problem, config),
    }
}

/// Per-user spectral efficiency (nats/s/Hz) on `true_channels` with the
/// unscheduled beams zeroed and no estimation-error term.
pub fn evaluate_rates(
    mode: TransmissionMode,
    true_channels: &ChannelMatrix,
    topology: &Topology,
    w: &BeamformerSet,
    schedule: &ScheduleMask,
    noise_power: f64,
    overhead: f64,
) -> Vec<f64> {
    let w = schedule.apply(topology, w);
    let gamma = match mode {
        TransmissionMode::Coherent => coherent_sinr(true_channels, None, topology, &w, noise_power),
        TransmissionMode::NonCoherent => {
            noncoherent_sinr(true_channels, None, topology, &w, noise_power)
        }
    };
    gamma.iter().map(|g| overhead * g.ln_1p()).collect()
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn alpha_update_values() {
        let p = 1.0;
        let m = 4;
        let cfg = OptimConfig::new(p, m);
        let clusters = Clusters::from_serving(vec![vec![0], vec![0]], 1);
        let topo = Topology::new(&clusters, m);
        let mut w = BeamformerSet::zeros(&topo);
        w.block_mut(1, 0)[0] = C64::new((p / m as f64).sqrt(), 0.0);
        let a = update_alpha(&w, cfg.epsilon);
        assert!((a[0][0] - 1.0 / cfg.epsilon).abs() < 1e-12);
        assert!((a[1][0] - m as f64 / (1.9 * p)).abs() < 1e-12);
        assert_eq!(initial_alpha(&topo, p)[0][0], m as f64 / p);
    }

    #[test]
    fn schedule_extraction_cases() {
        let m = 2;
        let clusters = Clusters::from_serving(vec![vec![0]; 3], 1);
        let topo = Topology::new(&clusters, m);
        let mut w = BeamformerSet::zeros(&topo);
        assert_eq!(extract_schedule(&topo, &w, 1e-3, m).total(), 0);

        w.block_mut(1, 0)[0] = C64::new(1.0, 0.0);
        let s = extract_schedule(&topo, &w, 1e-3, m);
        assert_eq!(s.total(), 1);
        assert!(s.get(0, 1));

        // M + 1 beams above threshold: the weakest goes.
        for (u, a) in [(0, 0.5), (1, 0.9), (2, 0.7)] {
            w.block_mut(u, 0)[0] = C64::new(a, 0.0);
        }
        let s = extract_schedule(&topo, &w, 1e-3, m);
        assert_eq!(s.users_at(0), vec![1, 2]);
    }

    #[test]
    fn schedule_mask_zeroes_beams() {
        let topo = Topology::new(&Clusters::from_serving(vec![vec![0, 1], vec![1]], 2), 2);
        let w = random_beams(&topo, 1);
        let mut s = ScheduleMask::all_served(&topo);
        s.set(1, 0, false);
        let z = s.apply(&topo, &w);
        assert_eq!(z.block(0, 0), w.block(0, 0));
        assert!(z.block(0, 1).iter().all(|v| v.norm() == 0.0));
        assert_eq!(z.block(1, 0), w.block(1, 0));
    }

    #[test]
    fn initial_beams_use_equal_power() {
        let inst = Instance::random(3, 3, vec![vec![0, 1], vec![1], vec![1]], 2);
        let problem = inst.problem(false);
        let w = initial_beamformers(&inst.channels, &problem.topology, 2.0).unwrap();
        let powers = w.rrh_powers(&problem.topology);
        assert!((powers[0] - 2.0).abs() < 1e-12);
        assert!((powers[1] - 2.0).abs() < 1e-12);
        assert!((w.block_power(2, 0) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn projection_caps_power() {
        let topo = Topology::new(&Clusters::from_serving(vec![vec![0, 1], vec![0]], 2), 2);
        let mut w = random_beams(&topo, 4);
        for v in w.user_mut(0) {
            *v *= 10.0;
        }
        project_power(&topo, &mut w, 0.5);
        for p in w.rrh_powers(&topo) {
            assert!(p <= 0.5 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn problem_rejects_bad_weights() {
        let inst = Instance::random(5, 2, vec![vec![0]], 1);
        let zero = vec![0.0];
        assert!(Problem::new(&inst.channels, None, &inst.clusters, &zero, 0.1).is_err());
        let short: Vec<f64> = Vec::new();
        assert!(Problem::new(&inst.channels, None, &inst.clusters, &short, 0.1).is_err());
    }
}
