//! Best linear unbiased estimators (BLUE) of the loss at a displaced point.
//!
//! All estimators condition on a single observation `(l(w), grad l(w))`.
//! Gradient noise is specified per coordinate: `E[e1 e1^T] = grad_var * I`,
//! so the gradient observation has per-coordinate variance
//! `-2 C'(0) + grad_var`.

use nalgebra::{DMatrix, DVector};

use crate::covariance::IsotropicModel;
use crate::error::{Error, Result};
use crate::step_size::NoiseSpec;

/// Weights of the stationary BLUE: the predicted centered loss at `w + d` is
/// `a * (l - mu) + <b, grad l>` with `b = grad_weight * d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlueCoeffs {
    pub a: f64,
    /// Scalar multiplying `<d, grad l>`: `-2 C'(|d|^2) / (grad_var - 2 C'(0))`.
    pub grad_weight: f64,
    pub b: DVector<f64>,
}

impl BlueCoeffs {
    pub fn predict(&self, loss_minus_mu: f64, grad: &[f64]) -> f64 {
        self.a * loss_minus_mu + self.b.iter().zip(grad).map(|(b, g)| b * g).sum::<f64>()
    }
}

fn require_stationary(model: &IsotropicModel) -> Result<()> {
    if model.is_stationary() {
        Ok(())
    } else {
        Err(Error::NotStationary)
    }
}

/// Value weight `C(r2) / (C(0) + E[e0^2])`.
pub(crate) fn value_weight(model: &IsotropicModel, noise: &NoiseSpec, r2: f64) -> f64 {
    model.cov(r2) / (model.cov(0.0) + noise.value_var)
}

/// Gradient weight `-2 C'(r2) / (grad_var - 2 C'(0))`; equals `C'(r2)/C'(0)`
/// without noise.
pub(crate) fn gradient_weight(model: &IsotropicModel, noise: &NoiseSpec, r2: f64) -> f64 {
    -2.0 * model.cov_d1(r2) / (noise.grad_var - 2.0 * model.cov_d1(0.0))
}

pub fn stationary_blue_coeffs(
    model: &IsotropicModel,
    noise: &NoiseSpec,
    d: &[f64],
) -> Result<BlueCoeffs> {
    require_stationary(model)?;
    let d = DVector::from_column_slice(d);
    let r2 = d.norm_squared();
    let grad_weight = gradient_weight(model, noise, r2);
    Ok(BlueCoeffs {
        a: value_weight(model, noise, r2),
        grad_weight,
        b: d * grad_weight,
    })
}

/// Coefficient on `<d, grad l>` of the gradient-only BLUE of
/// `L(w + d) - L(w)`: `2 phi'(r2) / (2 phi'(0) + grad_var)`.
pub fn gradient_blue_coeff(model: &IsotropicModel, grad_var: f64, r2: f64) -> Result<f64> {
    if r2.is_nan() || r2 < 0.0 {
        return Err(Error::NegativeDistance(r2));
    }
    let d1 = model.variogram(r2, 1);
    let d0 = model.variogram(0.0, 1);
    Ok(2.0 * d1 / (2.0 * d0 + grad_var))
}

/// `Var[L(w + d) | l(w), grad l(w)]` for `|d|^2 = r2`:
/// `C(0) - C(r2)^2/(C(0) + E[e0^2]) - 4 C'(r2)^2 r2 / (grad_var - 2 C'(0))`.
pub fn conditional_variance(model: &IsotropicModel, noise: &NoiseSpec, r2: f64) -> Result<f64> {
    require_stationary(model)?;
    if r2.is_nan() || r2 < 0.0 {
        return Err(Error::NegativeDistance(r2));
    }
    let c0 = model.cov(0.0);
    let c = model.cov(r2);
    let c1 = model.cov_d1(r2);
    let var = c0 - c * c / (c0 + noise.value_var)
        - 4.0 * c1 * c1 * r2 / (noise.grad_var - 2.0 * model.cov_d1(0.0));
    if var >= 0.0 {
        Ok(var)
    } else if var >= -1e-12 * c0 {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance(var))
    }
}

/// Weights of the BLUE of `L(w + d) - L(w)` given the gradient and Hessian at `w`:
/// `b_factor * <d, grad L> + sum_ij c_ij d_ij L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderCoeffs {
    /// `phi'(|d|^2) / phi'(0)`
    pub b_factor: f64,
    pub c: DMatrix<f64>,
}

/// Second-order BLUE weights for a rotation invariant variogram.
///
/// `c = phi''(r)/(2 phi''(0)) d d^T - I/(n+2) [(phi'(0) - phi'(r))/(2 phi''(0)) + phi''(r) r/(2 phi''(0))]`
/// with `r = |d|^2`; for small `d` this tends to `d d^T / 2` (the Taylor term).
pub fn second_order_blue(model: &IsotropicModel, d: &[f64]) -> Result<SecondOrderCoeffs> {
    if !model.has_finite_second_derivative_at_zero() {
        return Err(Error::Unbounded("second derivative of the variogram at zero"));
    }
    let n = d.len();
    let dv = DVector::from_column_slice(d);
    let r = dv.norm_squared();
    let p1_0 = model.variogram(0.0, 1);
    let p2_0 = model.variogram(0.0, 2);
    if p2_0 == 0.0 || !p2_0.is_finite() {
        return Err(Error::InvalidParameter(
            "second derivative of the variogram at zero must be finite and nonzero".into(),
        ));
    }
    let p1_r = model.variogram(r, 1);
    let p2_r = model.variogram(r, 2);
    let ratio = p2_r / (2.0 * p2_0);
    let diag = ((p1_0 - p1_r) / (2.0 * p2_0) + ratio * r) / (n as f64 + 2.0);
    let c = &dv * dv.transpose() * ratio - DMatrix::identity(n, n) * diag;
    Ok(SecondOrderCoeffs {
        b_factor: p1_r / p1_0,
        c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub offset: f64,
    pub mean: f64,
    pub two_sigma: f64,
}

/// Conditional mean and two conditional standard deviations of the loss along
/// `w + t * direction`, given the observation `(loss, grad)` at `w`.
pub fn predict_curve(
    model: &IsotropicModel,
    noise: &NoiseSpec,
    mu: f64,
    loss: f64,
    grad: &[f64],
    grid: &[f64],
    direction: &[f64],
) -> Result<Vec<CurvePoint>> {
    if grad.len() != direction.len() {
        return Err(Error::DimensionMismatch {
            expected: grad.len(),
            got: direction.len(),
        });
    }
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "direction must have unit norm, got {norm}"
        )));
    }
    grid.iter()
        .map(|&t| {
            let d: Vec<f64> = direction.iter().map(|u| t * u).collect();
            let coeffs = stationary_blue_coeffs(model, noise, &d)?;
            let var = conditional_variance(model, noise, t * t)?;
            Ok(CurvePoint {
                offset: t,
                mean: mu + coeffs.predict(loss - mu, grad),
                two_sigma: 2.0 * var.sqrt(),
            })
        })
        .collect()
}
