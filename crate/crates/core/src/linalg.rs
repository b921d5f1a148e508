//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);

/// Draws one circularly-symmetric complex Gaussian sample with the given
/// variance per complex entry.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// `a^H b` for equal-length slices.
#[inline]
pub fn dotc(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = ZERO;
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

#[inline]
pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Solves the Hermitian positive-definite system `a x = b`.
pub fn solve_hpd(a: DMatrix<C64>, b: &DVector<C64>) -> Result<DVector<C64>> {
    let n = a.nrows();
    let chol: Cholesky<C64, Dyn> = Cholesky::new(a).ok_or_else(|| {
        Error::Numerical(format!(
            "system of dimension {n} is not numerically positive definite"
        ))
    })?;
    let x = chol.solve(b);
    if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Numerical(format!(
            "non-finite solution for system of dimension {n}"
        )))
    }
}

pub fn is_finite(v: &[C64]) -> bool {
    v.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(20.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn hpd_solve_matches_direct() {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(2.0, 0.0),
                C64::new(0.5, 0.5),
                C64::new(0.5, -0.5),
                C64::new(3.0, 0.0),
            ],
        );
        let b = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        let x = solve_hpd(a.clone(), &b).unwrap();
        let r = &a * &x - &b;
        assert!(r.norm() < 1e-14);
    }
}
