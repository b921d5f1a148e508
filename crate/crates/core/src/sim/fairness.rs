//! Proportional-fair weights and fairness metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponentially averaged rates and the weights `delta_u = 1 / R̄_u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessState {
    /// Forgetting factor `eta`.
    pub eta: f64,
    /// Long-term rate `R̄_u`, nats/s/Hz.
    pub average: Vec<f64>,
    /// Weight used when `R̄_u` is zero or tiny.
    pub max_weight: f64,
}

impl FairnessState {
    pub fn new(num_users: usize, eta: f64, initial_rate: f64, max_weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::config("forgetting_factor", "must lie in [0, 1]"));
        }
        if !(initial_rate >= 0.0) {
            return Err(Error::config("initial_rate", "must be non-negative"));
        }
        if !(max_weight > 0.0) {
            return Err(Error::config("max_weight", "must be positive"));
        }
        Ok(FairnessState {
            eta,
            average: vec![initial_rate; num_users],
            max_weight,
        })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.average
            .iter()
            .map(|&r| if r > 0.0 { (1.0 / r).min(self.max_weight) } else { self.max_weight })
            .collect()
    }

    /// Weights rescaled to mean one. The weighted sum rate has the same
    /// maximizer under any positive scaling; this keeps the optimizer's
    /// fixed constants on a consistent scale.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let w = self.weights();
        let mean = w.iter().sum::<f64>() / w.len().max(1) as f64;
        w.into_iter().map(|x| x / mean).collect()
    }
}

/// `R̄' = eta R + (1 - eta) R̄` per user.
pub fn update_fairness(state: &FairnessState, rates: &[f64]) -> Result<FairnessState> {
    if rates.len() != state.average.len() {
        return Err(Error::Domain(format!(
            "{} rates for {} users",
            rates.len(),
            state.average.len()
        )));
    }
    let eta = state.eta;
    Ok(FairnessState {
        average: state
            .average
            .iter()
            .zip(rates)
            .map(|(avg, r)| eta * r + (1.0 - eta) * avg)
            .collect(),
        ..state.clone()
    })
}

/// Jain's index `(sum x)^2 / (n sum x^2)`.
pub fn jain_index(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Undefined("Jain index of an empty set"));
    }
    let s: f64 = values.iter().sum();
    let s2: f64 = values.iter().map(|x| x * x).sum();
    if !(s2 > 0.0) {
        return Err(Error::Undefined("Jain index of all-zero rates"));
    }
    Ok(s * s / (values.len() as f64 * s2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(avg: Vec<f64>, eta: f64) -> FairnessState {
        FairnessState {
            eta,
            average: avg,
            max_weight: 1e3,
        }
    }

    #[test]
    fn single_update() {
        let s = update_fairness(&state(vec![1.0], 0.2), &[2.0]).unwrap();
        assert!((s.average[0] - 1.2).abs() < 1e-15);
        assert!((s.weights()[0] - 1.0 / 1.2).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_and_frozen_average() {
        let s = update_fairness(&state(vec![0.7, 3.0], 0.2), &[0.7, 3.0]).unwrap();
        assert!((s.average[0] - 0.7).abs() < 1e-15 && (s.average[1] - 3.0).abs() < 1e-15);
        let s = update_fairness(&state(vec![0.7, 3.0], 0.0), &[5.0, 0.0]).unwrap();
        assert_eq!(s.average, vec![0.7, 3.0]);
    }

    #[test]
    fn zero_average_uses_cap() {
        let s = state(vec![0.0, 1e-9, 2.0], 0.2);
        assert_eq!(s.weights(), vec![1e3, 1e3, 0.5]);
    }

    #[test]
    fn normalized_weights_have_unit_mean() {
        let s = state(vec![1.0, 2.0, 4.0], 0.2);
        let w = s.normalized_weights();
        assert!((w.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!((w[0] / w[2] - 4.0).abs() < 1e-12);
        let fresh = FairnessState::new(5, 0.2, 1e-3, 1e3).unwrap();
        assert!(fresh.normalized_weights().iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn length_mismatch() {
        assert!(update_fairness(&state(vec![1.0], 0.2), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn jain_examples() {
        assert!((jain_index(&[2.0; 5]).unwrap() - 1.0).abs() < 1e-15);
        assert!((jain_index(&[0.0, 0.0, 3.0, 0.0]).unwrap() - 0.25).abs() < 1e-15);
        assert!((jain_index(&[1.0, 2.0, 3.0]).unwrap() - 6.0 / 7.0).abs() < 1e-15);
        assert!(jain_index(&[0.0, 0.0]).is_err());
        assert!(jain_index(&[]).is_err());
    }

    proptest! {
        #[test]
        fn jain_is_bounded(x in prop::collection::vec(0.0f64..10.0, 1..40)) {
            prop_assume!(x.iter().any(|&v| v > 0.0));
            let j = jain_index(&x).unwrap();
            prop_assert!(j >= 1.0 / x.len() as f64 - 1e-12);
            prop_assert!(j <= 1.0 + 1e-12);
        }

        #[test]
        fn average_stays_between_old_and_new(
            avg in 0.0f64..5.0, r in 0.0f64..5.0, eta in 0.0f64..=1.0,
        ) {
            let s = update_fairness(&state(vec![avg], eta), &[r]).unwrap();
            let (lo, hi) = (avg.min(r), avg.max(r));
            prop_assert!(s.average[0] >= lo - 1e-12 && s.average[0] <= hi + 1e-12);
        }
    }
}
