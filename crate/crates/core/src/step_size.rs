//! Optimal step sizes of random function descent.
//!
//! The step size minimizes the one-dimensional objective
//! `J(eta) = C(eta^2)/C(0) * xi - eta * C'(eta^2)/C'(0)` where `xi` is the
//! noise-corrected loss-above-mean per unit gradient norm.

use crate::blue::{conditional_variance, gradient_weight, value_weight};
use crate::covariance::{IsotropicModel, ModelKind};
use crate::error::{Error, Result};
use crate::scalar_min::{bisect, golden_section, grid_then_golden, polish_with_derivative};

/// Default relative tolerance of the numeric step search.
pub const NUMERIC_TOL: f64 = 1e-10;
const GOLDEN_MAX_ITER: usize = 200;
const RQ_BISECTIONS: usize = 50;
const GRID_POINTS: usize = 400;

/// Observation noise: value noise variance `E[e0^2]` and per-coordinate
/// gradient noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    pub value_var: f64,
    pub grad_var: f64,
}

impl NoiseSpec {
    pub fn new(value_var: f64, grad_var: f64) -> Result<Self> {
        if !(value_var >= 0.0 && value_var.is_finite() && grad_var >= 0.0 && grad_var.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variances must be nonnegative, got ({value_var}, {grad_var})"
            )));
        }
        Ok(Self {
            value_var,
            grad_var,
        })
    }

    pub fn exact() -> Self {
        Self::default()
    }

    pub fn is_exact(&self) -> bool {
        self.value_var == 0.0 && self.grad_var == 0.0
    }
}

/// Scalar inputs of a step size query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub loss: f64,
    pub mu: f64,
    pub grad_norm: f64,
    pub noise: NoiseSpec,
    pub xi: f64,
}

impl StepContext {
    pub fn new(
        model: &IsotropicModel,
        loss: f64,
        mu: f64,
        grad_norm: f64,
        noise: NoiseSpec,
    ) -> Result<Self> {
        let xi = compute_xi(model, loss, mu, grad_norm, &noise)?;
        Ok(Self {
            loss,
            mu,
            grad_norm,
            noise,
            xi,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMethod {
    ClosedForm,
    NumericFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub eta: f64,
    pub method: StepMethod,
    pub objective_at_eta: f64,
}

/// `xi = C(0)/(C(0)+E[e0^2]) * (grad_var - 2C'(0))/(-2C'(0)) * (loss - mu)/grad_norm`.
pub fn compute_xi(
    model: &IsotropicModel,
    loss: f64,
    mu: f64,
    grad_norm: f64,
    noise: &NoiseSpec,
) -> Result<f64> {
    if !model.is_stationary() {
        return Err(Error::NotStationary);
    }
    if grad_norm.is_nan() || grad_norm < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gradient norm must be nonnegative, got {grad_norm}"
        )));
    }
    if grad_norm == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let centered = loss - mu;
    if noise.is_exact() {
        return Ok(centered / grad_norm);
    }
    let c0 = model.cov(0.0);
    let grad_prior = -2.0 * model.cov_d1(0.0);
    let factor = c0 / (c0 + noise.value_var) * (noise.grad_var + grad_prior) / grad_prior;
    Ok(factor * centered / grad_norm)
}

/// `J(eta)` for stationary models; `-eta phi'(eta^2)/phi'(0)` for the
/// gradient-only variogram case (independent of `xi`).
pub fn step_objective(model: &IsotropicModel, xi: f64, eta: f64) -> f64 {
    let r2 = eta * eta;
    if model.is_stationary() {
        model.cov(r2) / model.cov(0.0) * xi - eta * model.cov_d1(r2) / model.cov_d1(0.0)
    } else {
        -eta * model.variogram(r2, 1) / model.variogram(0.0, 1)
    }
}

/// Closed-form optimal step for each model family. Matérn and rational
/// quadratic closed forms hold for `xi <= 0`; positive `xi` falls back to
/// [`numeric_step`].
pub fn closed_form_step(model: &IsotropicModel, xi: f64) -> Result<StepResult> {
    if !xi.is_finite() {
        return Err(Error::InvalidParameter(format!("xi must be finite, got {xi}")));
    }
    let s = model.length_scale();
    let eta = match model.kind() {
        ModelKind::SquaredExponential => {
            let half = xi / 2.0;
            let hyp = (half * half + s * s).sqrt();
            // s^2 / (hyp - half) avoids cancellation for very negative xi
            if half < 0.0 {
                s * s / (hyp - half)
            } else {
                half + hyp
            }
        }
        ModelKind::Matern { .. } | ModelKind::RationalQuadratic { .. } if xi > 0.0 => {
            return numeric_step(model, xi, NUMERIC_TOL);
        }
        ModelKind::Matern { p: 1 } => (s / 3f64.sqrt()) / (1.0 - 3f64.sqrt() * xi / s),
        ModelKind::Matern { .. } => {
            // sqrt(5) eta / s is the positive root of a x^2 - b x - 1 with
            // a = 1 - k, b = 1 + k, k = sqrt(5) xi / (3 s)
            let k = 5f64.sqrt() * xi / (3.0 * s);
            let (a, b) = (1.0 - k, 1.0 + k);
            let root_disc = (b * b + 4.0 * a).sqrt();
            let x = if b <= 0.0 {
                2.0 / (root_disc - b)
            } else {
                (b + root_disc) / (2.0 * a)
            };
            s * x / 5f64.sqrt()
        }
        ModelKind::RationalQuadratic { beta } => {
            let k = beta.sqrt() * xi / s;
            let poly = |t: f64| 1.0 + k * t - (1.0 + beta) * t * t + k * t * t * t;
            let hi = 1.0 / (1.0 + beta).sqrt();
            let root = if poly(hi) >= 0.0 {
                hi
            } else {
                bisect(poly, 0.0, hi, RQ_BISECTIONS)?
            };
            s * beta.sqrt() * root
        }
        ModelKind::GeneralizedRationalQuadratic { beta } => {
            if beta <= -1.0 {
                return Err(Error::NoFiniteStep(beta));
            }
            1.0 / (1.0 + beta).sqrt()
        }
    };
    Ok(StepResult {
        eta,
        method: StepMethod::ClosedForm,
        objective_at_eta: step_objective(model, xi, eta),
    })
}

/// Numeric minimization of the step objective by golden-section search on
/// `[0, 2|xi| + 10 s_eff]`. The bracket is widened once if the minimizer sits
/// on its upper end.
pub fn numeric_step(model: &IsotropicModel, xi: f64, tol: f64) -> Result<StepResult> {
    if !model.has_finite_step() {
        if let ModelKind::GeneralizedRationalQuadratic { beta } = model.kind() {
            return Err(Error::NoFiniteStep(beta));
        }
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let f = |eta: f64| step_objective(model, xi, eta);
    let mut hi = 2.0 * xi.abs() + 10.0 * model.effective_length_scale();
    for attempt in 0..2 {
        let m = golden_section(f, 0.0, hi, tol, GOLDEN_MAX_ITER);
        let at_edge = hi - m.x <= 1e-6 * hi;
        if !at_edge {
            return Ok(StepResult {
                eta: m.x,
                method: StepMethod::NumericFallback,
                objective_at_eta: m.value,
            });
        }
        if attempt == 0 {
            hi *= 10.0;
        }
    }
    Err(Error::MinimizerFailed(format!(
        "optimal step not bracketed in [0, {hi}]"
    )))
}

/// Gradient-only step of the intrinsically stationary case:
/// `argmax eta * 2 phi'(eta^2) / (2 phi'(0) + grad_var)`, found numerically.
pub fn gradient_only_step(model: &IsotropicModel, grad_var: f64) -> Result<StepResult> {
    if let ModelKind::GeneralizedRationalQuadratic { beta } = model.kind() {
        if beta <= -1.0 {
            return Err(Error::NoFiniteStep(beta));
        }
    }
    if !(grad_var >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gradient noise variance must be nonnegative, got {grad_var}"
        )));
    }
    // The noise only rescales the objective, so the search runs on the
    // unscaled profile and the argmax is exactly noise invariant.
    let profile = |eta: f64| -eta * model.variogram(eta * eta, 1);
    let mut hi = 10.0 * model.effective_length_scale();
    for attempt in 0..2 {
        let m = grid_then_golden(profile, 0.0, hi, GRID_POINTS, NUMERIC_TOL, GOLDEN_MAX_ITER);
        if hi - m.x > 1e-6 * hi {
            let scale = 2.0 / (2.0 * model.variogram(0.0, 1) + grad_var);
            return Ok(StepResult {
                eta: m.x,
                method: StepMethod::NumericFallback,
                objective_at_eta: scale * m.value,
            });
        }
        if attempt == 0 {
            hi *= 10.0;
        }
    }
    Err(Error::MinimizerFailed("gradient-only step not bracketed".into()))
}

/// Penalized objective of conservative RFD at step length `eta`:
/// `a(eta) (l - mu) - eta * omega(eta) * |grad| + sqrt(Var(eta^2) / epsilon)`
/// with the noise-weighted BLUE weights `a` and `omega`.
pub fn conservative_objective(
    model: &IsotropicModel,
    noise: &NoiseSpec,
    loss_minus_mu: f64,
    grad_norm: f64,
    epsilon: f64,
    eta: f64,
) -> Result<f64> {
    let r2 = eta * eta;
    let var = conditional_variance(model, noise, r2)?;
    Ok(value_weight(model, noise, r2) * loss_minus_mu
        - eta * gradient_weight(model, noise, r2) * grad_norm
        + (var / epsilon).sqrt())
}

pub fn conservative_step(
    model: &IsotropicModel,
    noise: &NoiseSpec,
    loss_minus_mu: f64,
    grad_norm: f64,
    epsilon: f64,
) -> Result<StepResult> {
    if !model.is_stationary() {
        return Err(Error::NotStationary);
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if grad_norm.is_nan() || grad_norm < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gradient norm must be nonnegative, got {grad_norm}"
        )));
    }
    let f = |eta: f64| {
        conservative_objective(model, noise, loss_minus_mu, grad_norm, epsilon, eta)
            .unwrap_or(f64::INFINITY)
    };
    let xi_scale = if grad_norm > 0.0 {
        (loss_minus_mu / grad_norm).abs()
    } else {
        0.0
    };
    let hi = 2.0 * xi_scale + 10.0 * model.effective_length_scale();
    let m = grid_then_golden(f, 0.0, hi, GRID_POINTS, NUMERIC_TOL, GOLDEN_MAX_ITER);
    Ok(StepResult {
        eta: m.x,
        method: StepMethod::NumericFallback,
        objective_at_eta: m.value,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedStep {
    pub eta: f64,
    /// Unit descent direction `-g(eta) / |g(eta)|`.
    pub direction: Vec<f64>,
    pub objective_at_eta: f64,
}

/// Step of RFD under the quadratic mean `reg_var |w|^2 + mu`.
///
/// The regularized gradient is `g(eta) = omega(eta) grad + (1 - omega(eta)) 2 reg_var w`,
/// where `omega` is the (noise-weighted) gradient BLUE weight, and
/// `eta = argmin reg_var eta^2 + a(eta) (L - m(w)) - eta |g(eta)|`.
pub fn regularized_step(
    model: &IsotropicModel,
    noise: &NoiseSpec,
    reg_var: f64,
    loss_minus_mean: f64,
    grad: &[f64],
    w: &[f64],
) -> Result<RegularizedStep> {
    if !model.is_stationary() {
        return Err(Error::NotStationary);
    }
    if !(reg_var >= 0.0 && reg_var.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "regularization variance must be nonnegative, got {reg_var}"
        )));
    }
    if grad.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: grad.len(),
        });
    }
    let mean_grad: Vec<f64> = w.iter().map(|x| 2.0 * reg_var * x).collect();
    // g(eta) = mean_grad + omega(eta) * (grad - mean_grad)
    let centered: Vec<f64> = grad.iter().zip(&mean_grad).map(|(g, m)| g - m).collect();
    let g_at = |omega: f64| -> Vec<f64> {
        mean_grad
            .iter()
            .zip(&centered)
            .map(|(m, c)| m + omega * c)
            .collect()
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let grad_prior = -2.0 * model.cov_d1(0.0);
    let objective = |eta: f64| {
        let r2 = eta * eta;
        let omega = gradient_weight(model, noise, r2);
        reg_var * r2 + value_weight(model, noise, r2) * loss_minus_mean - eta * norm(&g_at(omega))
    };
    let derivative = |eta: f64| {
        let r2 = eta * eta;
        let omega = gradient_weight(model, noise, r2);
        let omega_d = -4.0 * eta * model.cov_d2(r2) / (noise.grad_var + grad_prior);
        let a_d = 2.0 * eta * model.cov_d1(r2) / (model.cov(0.0) + noise.value_var);
        let g = g_at(omega);
        let gn = norm(&g);
        let gn_d = if gn > 0.0 { omega_d * dot(&g, &centered) / gn } else { 0.0 };
        2.0 * reg_var * eta + a_d * loss_minus_mean - gn - eta * gn_d
    };

    let g0 = norm(grad);
    let xi_scale = if g0 > 0.0 { (loss_minus_mean / g0).abs() } else { 0.0 };
    let hi = 2.0 * xi_scale + 10.0 * model.effective_length_scale() + 2.0 * norm(w);
    let m = grid_then_golden(objective, 0.0, hi, GRID_POINTS, NUMERIC_TOL, GOLDEN_MAX_ITER);
    let mut eta = m.x;
    if eta > 0.0 {
        if let Some(x) = polish_with_derivative(derivative, eta, m.hi - m.lo, 0.0, hi) {
            if objective(x) <= objective(eta) + 1e-15 * objective(eta).abs() {
                eta = x;
            }
        }
    }
    let g = g_at(gradient_weight(model, noise, eta * eta));
    let gn = norm(&g);
    if gn == 0.0 {
        return Err(Error::StationaryRegularizedGradient);
    }
    Ok(RegularizedStep {
        eta,
        direction: g.iter().map(|x| -x / gn).collect(),
        objective_at_eta: objective(eta),
    })
}
