use std::time::Instant;

use super::rfd::momentum_coefficient;
use super::{check_start, evaluate_at, LossOracle, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Gd,
    Nesterov,
    Adam,
    Nadam,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Gd => "gd",
            BaselineKind::Nesterov => "nesterov",
            BaselineKind::Adam => "adam",
            BaselineKind::Nadam => "nadam",
        }
    }
}

/// Baseline hyperparameters. Moment decays and `eps` only affect Adam and NAdam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Hyper {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be nonnegative, got {}",
                self.lr
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs a baseline optimizer. The `eta` column holds the length of the
/// gradient-driven part of each update.
pub fn run_baseline(
    kind: BaselineKind,
    hyper: &Hyper,
    oracle: &mut dyn LossOracle,
    w0: &[f64],
    steps: usize,
) -> Result<Trajectory> {
    hyper.validate()?;
    check_start(oracle, w0)?;
    let start = Instant::now();
    let mut traj = Trajectory {
        meta: vec![("optimizer".into(), kind.name().into())],
        ..Default::default()
    };
    let dim = w0.len();
    let mut w = w0.to_vec();
    let mut w_prev = w0.to_vec();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let (b1, b2) = (hyper.beta1, hyper.beta2);

    for n in 0..=steps {
        // Nesterov evaluates at the look-ahead point
        let x = if kind == BaselineKind::Nesterov {
            let beta = momentum_coefficient(n + 1);
            w.iter().zip(&w_prev).map(|(a, b)| a + beta * (a - b)).collect()
        } else {
            w.clone()
        };
        let obs = evaluate_at(oracle, &x, n)?;
        let grad = obs.grad.clone();
        let rec = traj.push(&x, obs);
        if n == steps {
            break;
        }
        let t = (n + 1) as i32;
        let delta: Vec<f64> = match kind {
            BaselineKind::Gd | BaselineKind::Nesterov => grad.iter().map(|g| hyper.lr * g).collect(),
            BaselineKind::Adam | BaselineKind::Nadam => {
                for i in 0..dim {
                    m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                }
                let c1 = 1.0 - b1.powi(t);
                let c2 = 1.0 - b2.powi(t);
                (0..dim)
                    .map(|i| {
                        let num = if kind == BaselineKind::Adam {
                            m[i] / c1
                        } else {
                            b1 * m[i] / (1.0 - b1.powi(t + 1)) + (1.0 - b1) * grad[i] / c1
                        };
                        hyper.lr * num / ((v[i] / c2).sqrt() + hyper.eps)
                    })
                    .collect()
            }
        };
        rec.eta = Some(norm(&delta));
        rec.stationary = rec.grad_norm == 0.0;
        let next: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a - d).collect();
        w_prev = std::mem::replace(&mut w, next);
    }
    traj.wall_time = start.elapsed();
    Ok(traj)
}
