//! Per-RRH multiplier heuristic.
//!
//! With all other variables fixed, the power of beam `w̄_ru` depends on the
//! RRH's own multipliers only through `x = mu_r + lambda_r alpha_ru`, and
//! can be written as `sum_i q_i / (d_i + e_i (x - base))^2` with
//! nonnegative `q`, `e`. This makes each bisection step a cheap scalar
//! evaluation instead of a fresh linear solve.

use super::OptimConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub q: f64,
    pub d: f64,
    pub e: f64,
}

/// Power of one beam as a function of the RRH multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPowerModel {
    pub alpha: f64,
    /// Value of `x` at which the model was expanded.
    pub base: f64,
    pub terms: Vec<PowerTerm>,
}

impl UserPowerModel {
    pub fn power(&self, mu: f64, lambda: f64) -> f64 {
        let x = mu + lambda * self.alpha - self.base;
        self.terms
            .iter()
            .map(|t| {
                let den = t.d + t.e * x;
                t.q / (den * den)
            })
            .sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RrhPowerModel {
    pub users: Vec<UserPowerModel>,
}

impl RrhPowerModel {
    /// `sum_{u in E_r} ||w̄_ru||^2`.
    pub fn power(&self, mu: f64, lambda: f64) -> f64 {
        self.users.iter().map(|u| u.power(mu, lambda)).sum()
    }

    /// `sum_{u in E_r} alpha_ru ||w̄_ru||^2`.
    pub fn weighted_power(&self, mu: f64, lambda: f64) -> f64 {
        self.users.iter().map(|u| u.alpha * u.power(mu, lambda)).sum()
    }
}

const MAX_DOUBLINGS: usize = 2000;

/// Smallest `mu >= mu_floor` (to bisection accuracy) whose power is at most
/// `config.power`. The returned value is always on the feasible side.
pub fn bisect_mu(model: &RrhPowerModel, lambda: f64, config: &OptimConfig, rrh: usize) -> Result<f64> {
    let p = config.power;
    let floor = config.mu_floor;
    if model.power(floor, lambda) <= p {
        return Ok(floor);
    }
    let mut lo = floor;
    let mut hi = floor * 2.0;
    let mut doublings = 0;
    while model.power(hi, lambda) > p {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::Bracket {
                rrh,
                mu: hi,
                power: model.power(hi, lambda),
            });
        }
    }
    for _ in 0..config.bisection_iters {
        if model.power(hi, lambda) >= p * (1.0 - config.bisection_tol) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if model.power(mid, lambda) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Power multiplier first with the capacity multiplier off; if the
/// reweighted capacity budget `M` is then exceeded, switch the capacity
/// multiplier to `lambda_small` and redo the power bisection.
pub fn update_multipliers(model: &RrhPowerModel, config: &OptimConfig, rrh: usize) -> Result<(f64, f64)> {
    let mu = bisect_mu(model, 0.0, config, rrh)?;
    if model.weighted_power(mu, 0.0) <= config.antennas as f64 {
        return Ok((mu, 0.0));
    }
    let lambda = config.lambda_small;
    Ok((bisect_mu(model, lambda, config, rrh)?, lambda))
}
