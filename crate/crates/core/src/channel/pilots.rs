use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hac::centroid_linkage;
use crate::linalg::C64;
use crate::netgen::Point;

/// Pilot index per user. Sequences are rows of the `tau_p`-point DFT matrix
/// scaled to unit norm, so distinct indices are orthogonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotAssignment {
    pub pilot_length: usize,
    pub pilot_of: Vec<usize>,
    /// Groups whose members hold mutually orthogonal pilots (the final HAC
    /// clusters). Empty for random assignment.
    pub groups: Vec<Vec<usize>>,
}

impl PilotAssignment {
    pub fn num_users(&self) -> usize {
        self.pilot_of.len()
    }

    /// Users sharing `u`'s pilot, including `u`.
    pub fn copilot_users(&self, u: usize) -> Vec<usize> {
        let k = self.pilot_of[u];
        (0..self.pilot_of.len())
            .filter(|&v| self.pilot_of[v] == k)
            .collect()
    }

    pub fn sequence(&self, u: usize) -> Vec<C64> {
        dft_pilot(self.pilot_length, self.pilot_of[u])
    }
}

/// Row `index` of the `len`-point DFT matrix divided by `sqrt(len)`.
pub fn dft_pilot(len: usize, index: usize) -> Vec<C64> {
    let scale = 1.0 / (len as f64).sqrt();
    (0..len)
        .map(|n| {
            let phase = -2.0 * std::f64::consts::PI * ((index * n) % len) as f64 / len as f64;
            C64::from_polar(scale, phase)
        })
        .collect()
}

/// Hierarchical pilot assignment: build a centroid-linkage dendrogram of the
/// user positions, cut it into clusters of at most `tau_p` users, then hand
/// out orthogonal pilots inside each cluster by a random permutation.
pub fn assign_pilots_hac<R: Rng + ?Sized>(
    positions: &[Point],
    pilot_length: usize,
    rng: &mut R,
) -> PilotAssignment {
    let groups = centroid_linkage(positions).cut_by_size(pilot_length);
    let mut pilot_of = vec![0; positions.len()];
    let mut perm: Vec<usize> = (0..pilot_length).collect();
    for g in &groups {
        perm.shuffle(rng);
        for (&u, &k) in g.iter().zip(&perm) {
            pilot_of[u] = k;
        }
    }
    PilotAssignment {
        pilot_length,
        pilot_of,
        groups,
    }
}

/// Independent uniform pilot per user.
pub fn assign_pilots_random<R: Rng + ?Sized>(
    num_users: usize,
    pilot_length: usize,
    rng: &mut R,
) -> PilotAssignment {
    PilotAssignment {
        pilot_length,
        pilot_of: (0..num_users).map(|_| rng.random_range(0..pilot_length)).collect(),
        groups: Vec::new(),
    }
}

/// Area-based pilot reuse factor `tau_p / zeta_users`.
pub fn pilot_reuse_factor(pilot_length: usize, user_density: f64) -> f64 {
    pilot_length as f64 / user_density
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dotc;
    use crate::rng::{stream_rng, Stream};
    use proptest::prelude::*;

    #[test]
    fn dft_pilots_are_orthonormal() {
        let n = 8;
        for a in 0..n {
            for b in 0..n {
                let ip = dotc(&dft_pilot(n, b), &dft_pilot(n, a));
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((ip - C64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn reuse_factors() {
        assert!((pilot_reuse_factor(64, 200.0) - 0.32).abs() < 1e-15);
        assert!((pilot_reuse_factor(32, 200.0) - 0.16).abs() < 1e-15);
        assert!((pilot_reuse_factor(16, 200.0) - 0.08).abs() < 1e-15);
    }

    #[test]
    fn few_users_get_orthogonal_pilots() {
        let pts: Vec<Point> = (0..6).map(|i| Point::new(i as f64 * 0.1, 0.0)).collect();
        let mut rng = stream_rng(4, Stream::PilotPermutation, &[]);
        let pa = assign_pilots_hac(&pts, 8, &mut rng);
        assert_eq!(pa.groups.len(), 1);
        let mut p = pa.pilot_of.clone();
        p.sort_unstable();
        p.dedup();
        assert_eq!(p.len(), 6);
    }

    proptest! {
        #[test]
        fn copilot_users_never_share_a_cluster(
            coords in prop::collection::vec((0.0f64..2.0, 0.0f64..2.0), 1..80),
            tau in 1usize..10,
            seed in 0u64..100,
        ) {
            let pts: Vec<Point> = coords.iter().map(|&(x, y)| Point::new(x, y)).collect();
            let mut rng = stream_rng(seed, Stream::PilotPermutation, &[]);
            let pa = assign_pilots_hac(&pts, tau, &mut rng);
            for g in &pa.groups {
                prop_assert!(g.len() <= tau);
                let mut ks: Vec<usize> = g.iter().map(|&u| pa.pilot_of[u]).collect();
                ks.sort_unstable();
                let before = ks.len();
                ks.dedup();
                prop_assert_eq!(before, ks.len());
            }
            prop_assert!(pa.pilot_of.iter().all(|&k| k < tau));
        }
    }
}
