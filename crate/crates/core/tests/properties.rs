use cellfree::baselines::{conjugate_beamformers, round_robin_schedule, zf_beamformers};
use cellfree::channel::{
    assign_pilots_random, draw_small_scale, estimate_channels, true_channels, TrainingConfig,
};
use cellfree::linalg::dotc;
use cellfree::netgen::Clusters;
use cellfree::pairs::PairMatrix;
use cellfree::rng::{stream_rng, Stream};
use cellfree::sim::{run_simulation, EvalMode, Profile, RunOptions, Scheme, SimConfig};
use cellfree::wsr::{
    evaluate_rates, optimize, OptimConfig, Problem, ScheduleMask, Topology, TransmissionMode,
};
use proptest::prelude::*;

/// Random non-empty serving clusters over `nr` RRHs.
fn clusters(seed: u64, nr: usize, nu: usize) -> Clusters {
    let serving = (0..nu)
        .map(|u| {
            let bits = derive(seed, u) % ((1u64 << nr) - 1) + 1;
            (0..nr).filter(|r| bits >> r & 1 == 1).collect()
        })
        .collect();
    Clusters::from_serving(serving, nr)
}

fn derive(seed: u64, i: usize) -> u64 {
    cellfree::rng::derive_seed(seed, Stream::Geometry, &[i as u64])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimizer_output_is_feasible(
        seed in 0u64..10_000,
        m in 1usize..=3,
        nr in 1usize..=3,
        nu in 1usize..=7,
        robust in any::<bool>(),
        coherent in any::<bool>(),
    ) {
        let channels = draw_small_scale(m, nr, nu, &mut stream_rng(seed, Stream::Fading, &[]));
        let theta = PairMatrix::filled(nr, nu, 0.02);
        let cl = clusters(seed, nr, nu);
        let weights: Vec<f64> = (0..nu).map(|u| 0.5 + (u % 3) as f64).collect();
        let problem = Problem::new(&channels, robust.then_some(&theta), &cl, &weights, 0.1).unwrap();
        let config = OptimConfig { max_iters: 60, ..OptimConfig::new(1.0, m) };
        let mode = if coherent { TransmissionMode::Coherent } else { TransmissionMode::NonCoherent };
        let out = optimize(&problem, mode, &config).unwrap();

        for w in out.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{:?}", out.trace);
        }
        for r in 0..nr {
            prop_assert!(out.beamformers.rrh_power(&problem.topology, r) <= 1.0 + 1e-6);
            prop_assert!(out.schedule.count_at(r) <= m);
            for u in out.schedule.users_at(r) {
                prop_assert!(cl.serving[u].contains(&r));
            }
        }
        let rates = evaluate_rates(mode, &channels, &problem.topology, &out.beamformers, &out.schedule, 0.1, 1.0);
        prop_assert!(rates.iter().all(|&x| x.is_finite() && x >= 0.0));
        for u in 0..nu {
            if !out.schedule.is_user_scheduled(u) {
                prop_assert_eq!(rates[u], 0.0);
            }
        }
    }

    #[test]
    fn zero_forcing_nulls_and_splits_power(seed in 0u64..10_000, m in 1usize..=5, extra in 0usize..3) {
        let nu = m + extra;
        let topo = Topology::new(&Clusters::from_serving(vec![vec![0]; nu], 1), m);
        let h = draw_small_scale(m, 1, nu, &mut stream_rng(seed, Stream::Fading, &[]));
        let schedule = round_robin_schedule(&topo, m, seed as usize);
        let (w, served) = zf_beamformers(&h, &topo, &schedule, 2.0).unwrap();
        let users = served.users_at(0);
        prop_assert_eq!(users.len(), m);
        prop_assert!((w.rrh_power(&topo, 0) - 2.0).abs() < 1e-9);
        for &u in &users {
            prop_assert!((w.block_power(u, 0) - 2.0 / m as f64).abs() < 1e-9);
            for &v in &users {
                if u != v {
                    let leak = dotc(h.get(0, v), w.block(u, 0)).norm();
                    prop_assert!(leak < 1e-8, "leak {}", leak);
                }
            }
        }

        let cb = conjugate_beamformers(&h, &topo, &schedule, 2.0).unwrap();
        prop_assert!((cb.rrh_power(&topo, 0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn round_robin_covers_every_user_equally(n in 1usize..30, m in 1usize..9) {
        let topo = Topology::new(&Clusters::from_serving(vec![vec![0]; n], 1), m);
        let mut counts = vec![0usize; n];
        for t in 0..n {
            let s: ScheduleMask = round_robin_schedule(&topo, m, t);
            prop_assert_eq!(s.count_at(0), n.min(m));
            for u in s.users_at(0) {
                counts[u] += 1;
            }
        }
        // n slots visit n * min(n, M) positions, the same number per user.
        prop_assert!(counts.iter().all(|&c| c == n.min(m)), "{:?}", counts);
    }

    #[test]
    fn estimate_and_error_variances_split_the_gain(
        seed in 0u64..10_000,
        nu in 1usize..8,
        tau in 1usize..4,
        noise in 0.01f64..2.0,
    ) {
        let (m, nr) = (2, 2);
        let gain = PairMatrix::from_fn(nr, nu, |r, u| 0.1 + ((derive(seed, r * nu + u) % 1000) as f64) / 500.0);
        let pilots = assign_pilots_random(nu, tau, &mut stream_rng(seed, Stream::RandomPilots, &[]));
        let training = TrainingConfig { pilot_length: tau, block_length: 50, pilot_power: 1.0, noise_power: noise };
        let g = draw_small_scale(m, nr, nu, &mut stream_rng(seed, Stream::Fading, &[]));
        let set = estimate_channels(true_channels(&g, &gain), gain.clone(), &pilots, &training, &mut stream_rng(seed, Stream::Noise, &[]))
            .unwrap();
        for r in 0..nr {
            for u in 0..nu {
                let (psi, theta, d) = (set.estimate_var.at(r, u), set.error_var.at(r, u), gain.at(r, u));
                prop_assert!(psi > 0.0 && theta > 0.0);
                prop_assert!((psi + theta - d).abs() < 1e-12 * d.max(1.0));
            }
        }
    }
}

fn tiny(mode: EvalMode, seed: u64) -> SimConfig {
    SimConfig {
        rrhs_per_cell: 1,
        antennas: 2,
        user_count: Some(9),
        pilot_length: 3,
        num_slots: 3,
        realizations: 2,
        max_iters: 25,
        mode,
        seed,
        ..SimConfig::profile(Profile::Desk)
    }
}

#[test]
fn simulation_is_a_function_of_the_seed() {
    let scheme = Scheme::Proposed(TransmissionMode::NonCoherent);
    let run = |seed| {
        let m = run_simulation(&tiny(EvalMode::Pear, seed), scheme, RunOptions::default()).unwrap();
        serde_json::to_string(&m.realizations).unwrap()
    };
    assert_eq!(run(4), run(4));
    assert_ne!(run(4), run(5));
}

#[test]
fn data_fraction_scales_rates_exactly() {
    // PEAR and PEARNF share channels, estimates and beams, and differ only in
    // the data fraction of the block.
    let scheme = Scheme::CbRoundRobin;
    let pear = run_simulation(&tiny(EvalMode::Pear, 1), scheme, RunOptions::default()).unwrap();
    let nf = run_simulation(&tiny(EvalMode::Pearnf, 1), scheme, RunOptions::default()).unwrap();
    let factor = (200.0 - 3.0) / 200.0;
    for (a, b) in pear.realizations.iter().zip(&nf.realizations) {
        for (x, y) in a.slot_sum_se.iter().zip(&b.slot_sum_se) {
            assert!((x - factor * y).abs() < 1e-12 * y.max(1.0));
        }
    }
}

#[test]
fn every_scheme_respects_capacity() {
    for scheme in Scheme::ALL {
        let config = tiny(EvalMode::Pi, 2);
        let m = run_simulation(&config, scheme, RunOptions::default()).unwrap();
        for r in &m.realizations {
            for occ in &r.occupancy {
                assert!(occ.iter().all(|&k| k <= config.antennas), "{}", scheme.name());
            }
        }
    }
}
