//! Random quadratic test loss built from a linear regression model.
//!
//! With a true parameter `t` and a `dim x m` design matrix `X`, both drawn
//! standard normal,
//!
//! `L(w) = (sigma^2 / m) (t - w)^T X X^T (t - w) + sigma_eps^2`.
//!
//! Averaged over the draws this is `sigma^2 (|w|^2 + dim) + sigma_eps^2`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rfd_core::optimizers::{LossOracle, Observation};
use rfd_core::{Error, Result};

#[derive(Debug, Clone)]
pub struct ToyLinearLoss {
    target: DVector<f64>,
    /// `(sigma^2 / m) X X^T`
    curvature: DMatrix<f64>,
    offset: f64,
}

impl ToyLinearLoss {
    /// Draws the target first, then `X` column by column.
    pub fn new(seed: u64, dim: usize, m: usize, sigma: f64, sigma_eps: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be at least 1".into()));
        }
        if m < dim {
            return Err(Error::InvalidParameter(format!(
                "sample count m = {m} must be at least dim = {dim}"
            )));
        }
        if !(sigma.is_finite() && sigma_eps.is_finite()) {
            return Err(Error::InvalidParameter("noise scales must be finite".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let target = DVector::from_fn(dim, |_, _| draw());
        let x = DMatrix::from_fn(dim, m, |_, _| draw());
        let curvature = (&x * x.transpose()) * (sigma * sigma / m as f64);
        Ok(Self {
            target,
            curvature,
            offset: sigma_eps * sigma_eps,
        })
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn target(&self) -> &[f64] {
        self.target.as_slice()
    }

    pub fn loss_and_grad(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let diff = &self.target - DVector::from_column_slice(w);
        let hd = &self.curvature * &diff;
        let loss = diff.dot(&hd) + self.offset;
        let grad = hd.iter().map(|v| -2.0 * v).collect();
        (loss, grad)
    }
}

impl LossOracle for ToyLinearLoss {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn evaluate(&mut self, w: &[f64]) -> Result<Observation> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        let (loss, grad) = self.loss_and_grad(w);
        Ok(Observation {
            loss_true: loss,
            loss,
            grad,
        })
    }
}
