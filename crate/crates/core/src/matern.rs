//! Exact coefficient sequences of the half-integer Matérn model.
//!
//! For `nu = p + 1/2` the covariance in distance `eta` reads
//! `sigma^2 * exp(-m) * sum_k c(k) m^k` with `m = sqrt(2 nu) eta / s`, and its
//! derivative in squared distance is
//! `-sigma^2 (2p+1)/(2 s^2) * exp(-m) * sum_k d(k) m^k`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MaternCoefficients {
    pub p: u32,
    /// `c(0..=p)`
    pub c: Vec<BigRational>,
    /// `d(0..p)`
    pub d: Vec<BigRational>,
}

impl MaternCoefficients {
    pub fn c_f64(&self) -> Vec<f64> {
        self.c.iter().map(rational_to_f64).collect()
    }

    pub fn d_f64(&self) -> Vec<f64> {
        self.d.iter().map(rational_to_f64).collect()
    }
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `n!!` for odd or even `n`; `(-1)!! = 0!! = 1`.
pub fn double_factorial(n: i64) -> BigInt {
    let mut acc = BigInt::one();
    let mut k = n;
    while k > 1 {
        acc *= BigInt::from(k);
        k -= 2;
    }
    acc
}

fn c_coeffs(p: u32) -> Vec<BigRational> {
    let lead = BigRational::new(factorial(p), factorial(2 * p));
    (0..=p)
        .map(|k| {
            let num = factorial(2 * p - k) * (BigInt::one() << k);
            let den = factorial(p - k) * factorial(k);
            &lead * BigRational::new(num, den)
        })
        .collect()
}

/// Coefficients `c(k)` and `d(k)` for the Matérn model with `nu = p + 1/2`.
///
/// `d` is computed from its defining recursion
/// `d(k) = c(k+1) - (k+2) c(k+2)` (`k <= p-2`), `d(p-1) = c(p)`.
pub fn matern_coeffs(p: u32) -> Result<MaternCoefficients> {
    if p == 0 {
        return Err(Error::InvalidParameter(
            "Matérn p = 0 (nu = 1/2) is not differentiable".into(),
        ));
    }
    let c = c_coeffs(p);
    let pu = p as usize;
    let d = (0..pu)
        .map(|k| {
            if k + 1 == pu {
                c[pu].clone()
            } else {
                &c[k + 1] - BigRational::from_integer(BigInt::from(k + 2)) * &c[k + 2]
            }
        })
        .collect();
    Ok(MaternCoefficients { p, c, d })
}

fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn p1_and_p2() {
        let m1 = matern_coeffs(1).unwrap();
        assert_eq!(m1.c, vec![q(1, 1), q(1, 1)]);
        assert_eq!(m1.d, vec![q(1, 1)]);

        let m2 = matern_coeffs(2).unwrap();
        assert_eq!(m2.c, vec![q(1, 1), q(1, 1), q(1, 3)]);
        assert_eq!(m2.d, vec![q(1, 3), q(1, 3)]);
    }

    #[test]
    fn p0_rejected() {
        assert!(matern_coeffs(0).is_err());
    }

    #[test]
    fn endpoints() {
        for p in 1..=12u32 {
            let m = matern_coeffs(p).unwrap();
            assert_eq!(m.c[0], q(1, 1));
            assert_eq!(m.c[1], q(1, 1));
            let dfact = double_factorial(2 * p as i64 - 1);
            assert_eq!(m.c[p as usize], BigRational::new(BigInt::one(), dfact));
            assert_eq!(m.d[p as usize - 1], m.c[p as usize]);
        }
    }

    #[test]
    fn d_identity_holds_exactly() {
        for p in 2..=8u32 {
            let m = matern_coeffs(p).unwrap();
            let prev = matern_coeffs(p - 1).unwrap();
            let scale = BigRational::from_integer(BigInt::from(2 * p - 1));
            for k in 0..=(p as usize - 2) {
                assert_eq!(&m.d[k] * &scale, prev.c[k], "p={p} k={k}");
            }
        }
    }

    #[test]
    fn double_factorial_values() {
        assert_eq!(double_factorial(-1), BigInt::one());
        assert_eq!(double_factorial(1), BigInt::one());
        assert_eq!(double_factorial(5), BigInt::from(15));
        assert_eq!(double_factorial(7), BigInt::from(105));
    }

    #[test]
    fn large_p_does_not_overflow() {
        let m = matern_coeffs(40).unwrap();
        let c = m.c_f64();
        assert!(c.iter().all(|x| x.is_finite() && *x >= 0.0));
    }
}
