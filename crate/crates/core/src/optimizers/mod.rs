//! Optimization loops driven by a [`LossOracle`].
//!
//! Every run records one [`StepRecord`] per evaluation; a run of `steps`
//! updates therefore has `steps + 1` records. The step quantities (`xi`,
//! `eta`) of record `n` describe the update taken from that evaluation; the
//! final record carries none.

mod baselines;
mod rfd;

use std::time::Duration;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::covariance::IsotropicModel;
use crate::error::{Error, Result};
use crate::grf::{add_noise, GrfSampler};
use crate::step_size::NoiseSpec;

pub use baselines::{run_baseline, BaselineKind, Hyper};
pub use rfd::{
    rfd_step, run, run_conservative, run_regularized, run_rfd, run_rfm_star, momentum_coefficient,
    RfdStepper, StepOutcome,
};

/// One evaluation: the noiseless loss (when known), the observed loss and the
/// observed gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub loss_true: f64,
    pub loss: f64,
    pub grad: Vec<f64>,
}

pub trait LossOracle {
    fn dim(&self) -> usize;
    fn evaluate(&mut self, w: &[f64]) -> Result<Observation>;
}

/// Oracle backed by an incrementally sampled Gaussian random function, with
/// optional additive observation noise.
#[derive(Debug, Clone)]
pub struct GrfOracle {
    sampler: GrfSampler,
    noise: NoiseSpec,
    value_rng: ChaCha8Rng,
    grad_rng: Option<ChaCha8Rng>,
}

impl GrfOracle {
    pub fn new(sampler: GrfSampler) -> Self {
        Self {
            sampler,
            noise: NoiseSpec::exact(),
            value_rng: ChaCha8Rng::seed_from_u64(0),
            grad_rng: None,
        }
    }

    /// Observation noise drawn from a generator seeded with `noise_seed`.
    ///
    /// With `independent_gradient`, gradient noise comes from a separate
    /// stream, modelling a gradient computed on a different sample than the
    /// loss.
    pub fn with_noise(mut self, noise: NoiseSpec, noise_seed: u64, independent_gradient: bool) -> Self {
        self.noise = noise;
        self.value_rng = ChaCha8Rng::seed_from_u64(noise_seed);
        self.grad_rng = independent_gradient
            .then(|| ChaCha8Rng::seed_from_u64(noise_seed ^ 0x9E37_79B9_7F4A_7C15));
        self
    }

    pub fn sampler(&self) -> &GrfSampler {
        &self.sampler
    }
}

impl LossOracle for GrfOracle {
    fn dim(&self) -> usize {
        self.sampler.dim()
    }

    fn evaluate(&mut self, w: &[f64]) -> Result<Observation> {
        let truth = self.sampler.eval(w)?;
        let observed = match self.grad_rng.as_mut() {
            None => add_noise(&truth, &self.noise, &mut self.value_rng),
            Some(grad_rng) => {
                let value_only = NoiseSpec { grad_var: 0.0, ..self.noise };
                let grad_only = NoiseSpec { value_var: 0.0, ..self.noise };
                let v = add_noise(&truth, &value_only, &mut self.value_rng);
                let g = add_noise(&truth, &grad_only, grad_rng);
                crate::grf::GrfRecord {
                    value: v.value,
                    grad: g.grad,
                }
            }
        };
        Ok(Observation {
            loss_true: truth.value,
            loss: observed.value,
            grad: observed.grad,
        })
    }
}

/// Deterministic oracle from a closure returning `(loss, gradient)`.
pub struct FnOracle<F> {
    dim: usize,
    f: F,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> FnOracle<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> LossOracle for FnOracle<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&mut self, w: &[f64]) -> Result<Observation> {
        let (loss, grad) = (self.f)(w);
        if grad.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: grad.len(),
            });
        }
        Ok(Observation {
            loss_true: loss,
            loss,
            grad,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub w: Vec<f64>,
    pub loss_true: f64,
    pub loss_observed: f64,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    pub xi: Option<f64>,
    pub eta: Option<f64>,
    /// Cosine between this gradient and the previous record's gradient.
    pub cos_prev_grad: Option<f64>,
    /// Zero gradient observed; no gradient step was taken.
    pub stationary: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub wall_time: Duration,
    /// Ordered key/value notes describing the run.
    pub meta: Vec<(String, String)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iterates(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.w.as_slice())
    }

    pub(crate) fn push(&mut self, w: &[f64], obs: Observation) -> &mut StepRecord {
        let grad_norm = obs.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let cos_prev_grad = self.records.last().and_then(|prev| {
            let denom = prev.grad_norm * grad_norm;
            (denom > 0.0).then(|| {
                let dot: f64 = prev.grad.iter().zip(&obs.grad).map(|(a, b)| a * b).sum();
                (dot / denom).clamp(-1.0, 1.0)
            })
        });
        self.records.push(StepRecord {
            w: w.to_vec(),
            loss_true: obs.loss_true,
            loss_observed: obs.loss,
            grad: obs.grad,
            grad_norm,
            xi: None,
            eta: None,
            cos_prev_grad,
            stationary: false,
        });
        self.records.last_mut().expect("just pushed")
    }
}

/// Symmetric positive definite metric `A` of anisotropic descent, factored once.
#[derive(Debug, Clone)]
pub struct Anisotropy {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for Anisotropy {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl Anisotropy {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidParameter("anisotropy matrix must be square".into()));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * matrix.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidParameter("anisotropy matrix must be symmetric".into()));
        }
        let chol = Cholesky::new(matrix.clone()).ok_or_else(|| {
            Error::InvalidParameter("anisotropy matrix must be positive definite".into())
        })?;
        Ok(Self { matrix, chol })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `(A^{-1} g, sqrt(g^T A^{-1} g))`.
    pub fn precondition(&self, grad: &[f64]) -> (Vec<f64>, f64) {
        let g = DVector::from_column_slice(grad);
        let d = self.chol.solve(&g);
        let norm = g.dot(&d).max(0.0).sqrt();
        (d.as_slice().to_vec(), norm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Rfd,
    RfmStar,
    Conservative { epsilon: f64 },
    Regularized { reg_var: f64 },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Rfd => "rfd",
            Variant::RfmStar => "rfm_star",
            Variant::Conservative { .. } => "conservative",
            Variant::Regularized { .. } => "regularized",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub model: IsotropicModel,
    pub mu: f64,
    pub noise: NoiseSpec,
    pub steps: usize,
    /// Exponential smoothing factor of `xi`, in `[0, 1)`.
    pub xi_ema: Option<f64>,
    pub anisotropy: Option<Anisotropy>,
    pub variant: Variant,
}

impl OptimizerConfig {
    pub fn new(model: IsotropicModel, steps: usize) -> Self {
        Self {
            model,
            mu: 0.0,
            noise: NoiseSpec::exact(),
            steps,
            xi_ema: None,
            anisotropy: None,
            variant: Variant::Rfd,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be finite, got {}", self.mu)));
        }
        if let Some(f) = self.xi_ema {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::InvalidParameter(format!(
                    "xi smoothing factor must lie in [0, 1), got {f}"
                )));
            }
        }
        match self.variant {
            Variant::Rfd | Variant::RfmStar => {}
            Variant::Conservative { epsilon } => {
                if !(epsilon > 0.0 && epsilon < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "confidence epsilon must lie in (0, 1), got {epsilon}"
                    )));
                }
            }
            Variant::Regularized { reg_var } => {
                if !(reg_var >= 0.0 && reg_var.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "regularization variance must be nonnegative, got {reg_var}"
                    )));
                }
            }
        }
        if matches!(self.variant, Variant::Conservative { .. } | Variant::Regularized { .. }) {
            if !self.model.is_stationary() {
                return Err(Error::NotStationary);
            }
            if self.anisotropy.is_some() {
                return Err(Error::InvalidParameter(format!(
                    "anisotropy is only supported by rfd and rfm_star, not {}",
                    self.variant.name()
                )));
            }
            if self.xi_ema.is_some() {
                return Err(Error::InvalidParameter(format!(
                    "xi smoothing is only supported by rfd and rfm_star, not {}",
                    self.variant.name()
                )));
            }
        }
        if let Some(a) = &self.anisotropy {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.dim(),
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn check_start(oracle: &dyn LossOracle, w0: &[f64]) -> Result<()> {
    if w0.len() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: w0.len(),
        });
    }
    Ok(())
}

pub(crate) fn evaluate_at(oracle: &mut dyn LossOracle, w: &[f64], step: usize) -> Result<Observation> {
    oracle.evaluate(w).map_err(|e| Error::Oracle {
        step,
        message: e.to_string(),
    })
}
