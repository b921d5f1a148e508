//! Time-slot driver: per realization, draw the network once, then for every
//! slot draw fading, train and estimate, schedule and beamform, evaluate the
//! realized rates on the true channels and update the fairness weights.

mod config;
mod fairness;

pub use config::{PilotScheme, Profile, SimConfig};
pub use fairness::{jain_index, update_fairness, FairnessState};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{conjugate_beamformers, round_robin_schedule, zf_beamformers};
use crate::channel::{
    assign_pilots_hac, assign_pilots_random, draw_small_scale, estimate_channels,
    nmse_over_clusters, true_channels, ChannelSet, PilotAssignment, TrainingConfig,
};
use crate::error::{Error, Result};
use crate::netgen::{generate_layout, large_scale_state, LargeScaleState, NetworkRealization};
use crate::rng::{stream_rng, Stream};
use crate::wsr::{
    evaluate_rates, optimize, OptimOutcome, Problem, ScheduleMask, TransmissionMode,
};

/// Which channel knowledge the scheduler gets and how rates are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EvalMode {
    /// Perfect CSI, no training overhead.
    Pi,
    /// Estimated CSI, error-aware optimizer, training overhead.
    Pear,
    /// Estimated CSI treated as exact, training overhead.
    Pea,
    /// As `Pear` without the training overhead.
    Pearnf,
}

impl EvalMode {
    pub const ALL: [EvalMode; 4] = [EvalMode::Pi, EvalMode::Pear, EvalMode::Pea, EvalMode::Pearnf];

    pub fn uses_estimates(self) -> bool {
        self != EvalMode::Pi
    }

    /// Whether the optimizer accounts for the estimation-error covariance.
    pub fn robust(self) -> bool {
        matches!(self, EvalMode::Pear | EvalMode::Pearnf)
    }

    pub fn overhead_factor(self, training: &TrainingConfig) -> f64 {
        match self {
            EvalMode::Pear | EvalMode::Pea => training.overhead_factor(),
            EvalMode::Pi | EvalMode::Pearnf => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Pi => "PI",
            EvalMode::Pear => "PEAR",
            EvalMode::Pea => "PEA",
            EvalMode::Pearnf => "PEARNF",
        }
    }
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EvalMode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("mode", format!("unknown mode `{s}`")))
    }
}

/// Scheduling and beamforming scheme run in each slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Proposed(TransmissionMode),
    /// Round-robin schedule, per-RRH zero-forcing.
    ZfRoundRobin,
    /// Round-robin schedule, conjugate beams.
    CbRoundRobin,
    /// Schedule of the coherent optimizer, per-RRH zero-forcing beams.
    ZfOptimizedSchedule,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Proposed(TransmissionMode::Coherent),
        Scheme::Proposed(TransmissionMode::NonCoherent),
        Scheme::ZfRoundRobin,
        Scheme::CbRoundRobin,
        Scheme::ZfOptimizedSchedule,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed(TransmissionMode::Coherent) => "proposed-coherent",
            Scheme::Proposed(TransmissionMode::NonCoherent) => "proposed-noncoherent",
            Scheme::ZfRoundRobin => "zf-rr",
            Scheme::CbRoundRobin => "cb-rr",
            Scheme::ZfOptimizedSchedule => "zf-optimized-schedule",
        }
    }

    /// Combining assumed when the rates are evaluated. The baselines serve
    /// users coherently.
    pub fn transmission(self) -> TransmissionMode {
        match self {
            Scheme::Proposed(m) => m,
            _ => TransmissionMode::Coherent,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Quantities fixed across the slots of one realization.
#[derive(Debug, Clone)]
pub struct Realization {
    pub index: usize,
    pub network: NetworkRealization,
    pub large_scale: LargeScaleState,
    /// Present whenever the mode trains channels.
    pub pilots: Option<PilotAssignment>,
}

pub fn assign_pilots(
    config: &SimConfig,
    network: &NetworkRealization,
    scheme: PilotScheme,
    index: usize,
) -> PilotAssignment {
    match scheme {
        PilotScheme::Hac => assign_pilots_hac(
            &network.user_positions,
            config.pilot_length,
            &mut stream_rng(config.seed, Stream::PilotPermutation, &[index as u64]),
        ),
        PilotScheme::Random => assign_pilots_random(
            network.num_users(),
            config.pilot_length,
            &mut stream_rng(config.seed, Stream::RandomPilots, &[index as u64]),
        ),
    }
}

pub fn build_realization(config: &SimConfig, index: usize) -> Result<Realization> {
    let network = generate_layout(&config.geometry(index))?;
    let large_scale = large_scale_state(&network, config.shadowing_db, config.cluster_threshold()?)?;
    let pilots = config
        .mode
        .uses_estimates()
        .then(|| assign_pilots(config, &network, config.pilot_assignment, index));
    Ok(Realization {
        index,
        network,
        large_scale,
        pilots,
    })
}

/// True channels of one slot plus what the scheduler knows about them.
pub fn slot_channels(config: &SimConfig, realization: &Realization, slot: usize) -> Result<ChannelSet> {
    let idx = [realization.index as u64, slot as u64];
    let gain = &realization.large_scale.gain;
    let small = draw_small_scale(
        config.antennas,
        gain.num_rrhs(),
        gain.num_users(),
        &mut stream_rng(config.seed, Stream::Fading, &idx),
    );
    let h = true_channels(&small, gain);
    match &realization.pilots {
        Some(pilots) if config.mode.uses_estimates() => estimate_channels(
            h,
            gain.clone(),
            pilots,
            &config.training(),
            &mut stream_rng(config.seed, Stream::Noise, &idx),
        ),
        _ => Ok(ChannelSet::ideal(h, gain.clone())),
    }
}

/// Optimizer input for one slot under the configured mode.
pub fn slot_problem<'a>(
    config: &SimConfig,
    realization: &Realization,
    channels: &'a ChannelSet,
    weights: &'a [f64],
) -> Result<Problem<'a>> {
    let error_var = config.mode.robust().then_some(&channels.error_var);
    Problem::new(
        &channels.estimates,
        error_var,
        &realization.large_scale.clusters,
        weights,
        config.noise_power(),
    )
}

#[derive(Debug, Clone)]
pub struct SlotOutcome {
    /// Realized spectral efficiency per user, nats/s/Hz.
    pub rates: Vec<f64>,
    pub schedule: ScheduleMask,
    /// Optimizer objective per iteration; empty for the round-robin schemes.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Schedules, beamforms and evaluates one slot.
pub fn run_slot(
    config: &SimConfig,
    scheme: Scheme,
    problem: &Problem,
    channels: &ChannelSet,
    slot: usize,
) -> Result<SlotOutcome> {
    let optim = config.optim();
    let topo = &problem.topology;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut keep = |out: &OptimOutcome| {
        trace = out.trace.clone();
        iterations = out.iterations;
    };
    let (w, schedule) = match scheme {
        Scheme::Proposed(mode) => {
            let out = optimize(problem, mode, &optim)?;
            keep(&out);
            (out.beamformers, out.schedule)
        }
        Scheme::ZfOptimizedSchedule => {
            let out = optimize(problem, TransmissionMode::Coherent, &optim)?;
            keep(&out);
            zf_beamformers(&channels.estimates, topo, &out.schedule, optim.power)?
        }
        Scheme::ZfRoundRobin => {
            let s = round_robin_schedule(topo, config.antennas, slot);
            zf_beamformers(&channels.estimates, topo, &s, optim.power)?
        }
        Scheme::CbRoundRobin => {
            let s = round_robin_schedule(topo, config.antennas, slot);
            (conjugate_beamformers(&channels.estimates, topo, &s, optim.power)?, s)
        }
    };
    let rates = evaluate_rates(
        scheme.transmission(),
        &channels.true_channels,
        topo,
        &w,
        &schedule,
        config.noise_power(),
        config.overhead_factor(),
    );
    Ok(SlotOutcome {
        rates,
        schedule,
        trace,
        iterations,
    })
}

/// Everything recorded for one realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizationMetrics {
    pub index: usize,
    pub num_rrhs: usize,
    pub num_users: usize,
    pub mean_cluster_size: f64,
    /// Network sum SE per slot, nats/s/Hz.
    pub slot_sum_se: Vec<f64>,
    /// `user_rates[t][u]`, nats/s/Hz; zero when unscheduled.
    pub user_rates: Vec<Vec<f64>>,
    /// Scheduled users per RRH and slot.
    pub occupancy: Vec<Vec<usize>>,
    /// Whether the scheduled set differs from the previous slot's.
    pub schedule_changed: Vec<bool>,
    pub iterations: Vec<usize>,
    /// NMSE over the serving pairs, averaged over slots.
    pub nmse: Option<f64>,
    /// Optimizer traces per slot, kept only on request.
    pub traces: Vec<Vec<f64>>,
}

impl RealizationMetrics {
    /// Per-user SE averaged over slots `from..`, unscheduled slots counting
    /// as zero.
    pub fn long_term_user_se(&self, from: usize) -> Vec<f64> {
        let slots = &self.user_rates[from.min(self.user_rates.len() - 1)..];
        let n = slots.len() as f64;
        (0..self.num_users)
            .map(|u| slots.iter().map(|r| r[u]).sum::<f64>() / n)
            .collect()
    }

    pub fn mean_sum_se(&self, from: usize) -> f64 {
        let s = &self.slot_sum_se[from.min(self.slot_sum_se.len() - 1)..];
        s.iter().sum::<f64>() / s.len() as f64
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads for the realization pool; `None` uses the global pool.
    pub workers: Option<usize>,
    pub keep_traces: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimMetrics {
    pub scheme: String,
    pub config: SimConfig,
    pub realizations: Vec<RealizationMetrics>,
}

/// Aggregates reported for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scheme: String,
    pub mode: EvalMode,
    pub transmission: TransmissionMode,
    pub seed: u64,
    pub realizations: usize,
    pub num_slots: usize,
    pub overhead_factor: f64,
    /// First slot of the averaging window.
    pub window_start: usize,
    pub sum_se: f64,
    pub jain_all_users: Option<f64>,
    pub jain_scheduled_users: Option<f64>,
    pub schedule_change_rate: Option<f64>,
    pub mean_nmse: Option<f64>,
}

impl SimMetrics {
    /// Long-term results average over the final half of the slots.
    pub fn window_start(&self) -> usize {
        self.config.num_slots / 2
    }

    /// Mean over realizations of the windowed network sum SE.
    pub fn sum_se(&self) -> f64 {
        let from = self.window_start();
        mean(self.realizations.iter().map(|r| r.mean_sum_se(from)))
    }

    /// Jain index of the long-term per-user SE over slots `from..`, averaged
    /// over realizations. The first value covers all users, the second only
    /// users that were served at least once in the window. Realizations
    /// where nobody was served are skipped.
    pub fn jain(&self, from: usize) -> (Option<f64>, Option<f64>) {
        let mut all = Vec::new();
        let mut served = Vec::new();
        for r in &self.realizations {
            let se = r.long_term_user_se(from);
            if let Ok(j) = jain_index(&se) {
                all.push(j);
            }
            let pos: Vec<f64> = se.into_iter().filter(|&x| x > 0.0).collect();
            if let Ok(j) = jain_index(&pos) {
                served.push(j);
            }
        }
        let avg = |v: Vec<f64>| (!v.is_empty()).then(|| mean(v.into_iter()));
        (avg(all), avg(served))
    }

    /// Fraction of consecutive slot pairs whose scheduled sets differ.
    pub fn schedule_change_rate(&self) -> Option<f64> {
        let flags: Vec<bool> = self
            .realizations
            .iter()
            .flat_map(|r| r.schedule_changed.iter().copied())
            .collect();
        (!flags.is_empty()).then(|| mean(flags.iter().map(|&b| b as u8 as f64)))
    }

    pub fn mean_nmse(&self) -> Option<f64> {
        let v: Vec<f64> = self.realizations.iter().filter_map(|r| r.nmse).collect();
        (!v.is_empty()).then(|| mean(v.into_iter()))
    }

    pub fn summary(&self) -> Summary {
        let (jain_all_users, jain_scheduled_users) = self.jain(self.window_start());
        let c = &self.config;
        Summary {
            scheme: self.scheme.clone(),
            mode: c.mode,
            transmission: c.transmission,
            seed: c.seed,
            realizations: c.realizations,
            num_slots: c.num_slots,
            overhead_factor: c.overhead_factor(),
            window_start: self.window_start(),
            sum_se: self.sum_se(),
            jain_all_users,
            jain_scheduled_users,
            schedule_change_rate: self.schedule_change_rate(),
            mean_nmse: self.mean_nmse(),
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

/// One realization, slots in sequence.
pub fn run_realization(
    config: &SimConfig,
    scheme: Scheme,
    index: usize,
    keep_traces: bool,
) -> Result<RealizationMetrics> {
    let real = build_realization(config, index).map_err(|e| e.in_slot(index, 0))?;
    let (nr, nu) = (real.network.num_rrhs(), real.network.num_users());
    let mut fairness = FairnessState::new(
        nu,
        config.forgetting_factor,
        config.initial_rate,
        config.max_weight,
    )?;
    let mut m = RealizationMetrics {
        index,
        num_rrhs: nr,
        num_users: nu,
        mean_cluster_size: real.large_scale.clusters.mean_cluster_size(),
        slot_sum_se: Vec::with_capacity(config.num_slots),
        user_rates: Vec::with_capacity(config.num_slots),
        occupancy: Vec::with_capacity(config.num_slots),
        schedule_changed: Vec::new(),
        iterations: Vec::new(),
        nmse: None,
        traces: Vec::new(),
    };
    let mut nmse_sum = 0.0;
    let mut previous: Option<ScheduleMask> = None;
    for t in 0..config.num_slots {
        let mut slot = || -> Result<SlotOutcome> {
            let channels = slot_channels(config, &real, t)?;
            if config.mode.uses_estimates() {
                nmse_sum += nmse_over_clusters(
                    &channels.true_channels,
                    &channels.estimates,
                    &real.large_scale.clusters,
                )?;
            }
            let weights = fairness.normalized_weights();
            let problem = slot_problem(config, &real, &channels, &weights)?;
            run_slot(config, scheme, &problem, &channels, t)
        };
        let out = slot().map_err(|e| e.in_slot(index, t))?;
        m.slot_sum_se.push(out.rates.iter().sum());
        m.occupancy.push((0..nr).map(|r| out.schedule.count_at(r)).collect());
        if let Some(prev) = &previous {
            m.schedule_changed.push(prev.scheduled_users() != out.schedule.scheduled_users());
        }
        m.iterations.push(out.iterations);
        if keep_traces {
            m.traces.push(out.trace);
        }
        fairness = update_fairness(&fairness, &out.rates)?;
        m.user_rates.push(out.rates);
        previous = Some(out.schedule);
    }
    if config.mode.uses_estimates() {
        m.nmse = Some(nmse_sum / config.num_slots as f64);
    }
    Ok(m)
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config("workers", e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// Monte-Carlo run over `config.realizations` independent networks.
/// Results are ordered by realization and depend only on the config.
pub fn run_simulation(config: &SimConfig, scheme: Scheme, options: RunOptions) -> Result<SimMetrics> {
    config.validate()?;
    let realizations = in_pool(options.workers, || {
        (0..config.realizations)
            .into_par_iter()
            .map(|i| run_realization(config, scheme, i, options.keep_traces))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SimMetrics {
        scheme: scheme.name().to_string(),
        config: config.clone(),
        realizations,
    })
}

/// Optimizer run on the first slot of realization 0 with unit weights.
pub fn convergence_trace(config: &SimConfig, transmission: TransmissionMode) -> Result<OptimOutcome> {
    config.validate()?;
    let run = || -> Result<OptimOutcome> {
        let real = build_realization(config, 0)?;
        let channels = slot_channels(config, &real, 0)?;
        let weights = vec![1.0; real.network.num_users()];
        let problem = slot_problem(config, &real, &channels, &weights)?;
        optimize(&problem, transmission, &config.optim())
    };
    run().map_err(|e| e.in_slot(0, 0))
}

/// Paired NMSE of HAC and random pilot assignment on one network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmseSample {
    pub user_density: f64,
    pub realization: usize,
    pub hac: f64,
    pub random: f64,
}

/// For every density and realization, estimates one slot of channels under
/// both pilot schemes with identical fading and receiver noise. User counts
/// are drawn from each density; a fixed `user_count` is ignored.
pub fn nmse_sweep(
    config: &SimConfig,
    densities: &[f64],
    options: RunOptions,
) -> Result<Vec<NmseSample>> {
    config.validate()?;
    let jobs: Vec<(f64, usize)> = densities
        .iter()
        .flat_map(|&d| (0..config.realizations).map(move |i| (d, i)))
        .collect();
    in_pool(options.workers, || {
        jobs.par_iter()
            .map(|&(density, i)| {
                let mut cfg = config.clone();
                cfg.user_density = density;
                cfg.user_count = None;
                cfg.mode = EvalMode::Pear;
                cfg.validate()?;
                let mut real = build_realization(&cfg, i)?;
                let mut est = |scheme| -> Result<f64> {
                    real.pilots = Some(assign_pilots(&cfg, &real.network, scheme, i));
                    let ch = slot_channels(&cfg, &real, 0)?;
                    nmse_over_clusters(&ch.true_channels, &ch.estimates, &real.large_scale.clusters)
                };
                let hac = est(PilotScheme::Hac)?;
                let random = est(PilotScheme::Random)?;
                Ok(NmseSample {
                    user_density: density,
                    realization: i,
                    hac,
                    random,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}
