use std::time::Instant;

use super::{check_start, evaluate_at, LossOracle, OptimizerConfig, Trajectory, Variant};
use crate::error::{Error, Result};
use crate::step_size::{
    closed_form_step, compute_xi, conservative_step, regularized_step,
};

/// Outcome of a single descent step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: Vec<f64>,
    /// Smoothed `xi` used for the step; `None` for zero gradients and
    /// intrinsically stationary models.
    pub xi: Option<f64>,
    pub eta: f64,
    pub stationary: bool,
}

/// `beta_n = (n - 1) / (n + 2)`, so `beta_1 = 0`.
pub fn momentum_coefficient(n: usize) -> f64 {
    (n as f64 - 1.0) / (n as f64 + 2.0)
}

/// Stateful step computation (carries the `xi` moving average).
#[derive(Debug, Clone)]
pub struct RfdStepper<'a> {
    config: &'a OptimizerConfig,
    xi_avg: Option<f64>,
}

impl<'a> RfdStepper<'a> {
    pub fn new(config: &'a OptimizerConfig) -> Self {
        Self {
            config,
            xi_avg: None,
        }
    }

    fn smooth(&mut self, xi: f64) -> f64 {
        let next = match (self.config.xi_ema, self.xi_avg) {
            (Some(f), Some(prev)) => f * prev + (1.0 - f) * xi,
            _ => xi,
        };
        self.xi_avg = Some(next);
        next
    }

    pub fn step(&mut self, w: &[f64], loss: f64, grad: &[f64]) -> Result<StepOutcome> {
        self.step_scaled(w, loss, grad, 1.0)
    }

    /// Step with the optimal step length multiplied by `scale`.
    pub fn step_scaled(&mut self, w: &[f64], loss: f64, grad: &[f64], scale: f64) -> Result<StepOutcome> {
        if grad.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: grad.len(),
            });
        }
        let cfg = self.config;
        if let Variant::Regularized { reg_var } = cfg.variant {
            return regularized(cfg, reg_var, w, loss, grad);
        }
        let (dir, norm) = match &cfg.anisotropy {
            Some(a) => a.precondition(grad),
            None => (grad.to_vec(), grad.iter().map(|g| g * g).sum::<f64>().sqrt()),
        };
        if norm == 0.0 {
            return Ok(stationary(w));
        }
        let (xi, eta) = match cfg.variant {
            Variant::Conservative { epsilon } => {
                let xi = compute_xi(&cfg.model, loss, cfg.mu, norm, &cfg.noise)?;
                let r = conservative_step(&cfg.model, &cfg.noise, loss - cfg.mu, norm, epsilon)?;
                (Some(xi), r.eta)
            }
            _ if !cfg.model.is_stationary() => (None, closed_form_step(&cfg.model, 0.0)?.eta),
            _ => {
                let raw = compute_xi(&cfg.model, loss, cfg.mu, norm, &cfg.noise)?;
                let xi = self.smooth(raw);
                (Some(xi), closed_form_step(&cfg.model, xi)?.eta)
            }
        };
        let eta = eta * scale;
        let next = w.iter().zip(&dir).map(|(x, d)| x - eta * d / norm).collect();
        Ok(StepOutcome {
            next,
            xi,
            eta,
            stationary: false,
        })
    }
}

fn stationary(w: &[f64]) -> StepOutcome {
    StepOutcome {
        next: w.to_vec(),
        xi: None,
        eta: 0.0,
        stationary: true,
    }
}

fn regularized(cfg: &OptimizerConfig, reg_var: f64, w: &[f64], loss: f64, grad: &[f64]) -> Result<StepOutcome> {
    let mean = cfg.mu + reg_var * w.iter().map(|x| x * x).sum::<f64>();
    let r = match regularized_step(&cfg.model, &cfg.noise, reg_var, loss - mean, grad, w) {
        Err(Error::StationaryRegularizedGradient) => return Ok(stationary(w)),
        other => other?,
    };
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let xi = if norm > 0.0 {
        Some(compute_xi(&cfg.model, loss, mean, norm, &cfg.noise)?)
    } else {
        None
    };
    Ok(StepOutcome {
        next: w.iter().zip(&r.direction).map(|(x, d)| x + r.eta * d).collect(),
        xi,
        eta: r.eta,
        stationary: false,
    })
}

/// One RFD step from `w` without smoothing state.
pub fn rfd_step(config: &OptimizerConfig, w: &[f64], loss: f64, grad: &[f64]) -> Result<StepOutcome> {
    RfdStepper::new(config).step(w, loss, grad)
}

/// Runs the variant selected in `config`.
pub fn run(oracle: &mut dyn LossOracle, config: &OptimizerConfig, w0: &[f64]) -> Result<Trajectory> {
    config.validate(oracle.dim())?;
    check_start(oracle, w0)?;
    let start = Instant::now();
    let mut traj = Trajectory {
        meta: vec![("optimizer".into(), config.variant.name().into())],
        ..Default::default()
    };
    if config.variant == Variant::RfmStar {
        traj.meta.push(("xi_at".into(), "momentum point".into()));
        momentum_loop(oracle, config, w0, &mut traj)?;
    } else {
        descent_loop(oracle, config, w0, &mut traj)?;
    }
    traj.wall_time = start.elapsed();
    Ok(traj)
}

fn descent_loop(
    oracle: &mut dyn LossOracle,
    config: &OptimizerConfig,
    w0: &[f64],
    traj: &mut Trajectory,
) -> Result<()> {
    let mut stepper = RfdStepper::new(config);
    let mut w = w0.to_vec();
    for n in 0..=config.steps {
        let obs = evaluate_at(oracle, &w, n)?;
        let (loss, grad) = (obs.loss, obs.grad.clone());
        let rec = traj.push(&w, obs);
        if n == config.steps {
            break;
        }
        let out = stepper.step(&w, loss, &grad)?;
        rec.xi = out.xi;
        rec.eta = Some(out.eta);
        rec.stationary = out.stationary;
        w = out.next;
    }
    Ok(())
}

/// RFM*: `y_n = w_{n-1} + beta_n (w_{n-1} - w_{n-2})`, loss evaluated at
/// `y_n`, `w_n = y_n - eta/2 * grad/|grad|` with the RFD step at `y_n`.
/// Records hold the evaluation points `y_n`.
fn momentum_loop(
    oracle: &mut dyn LossOracle,
    config: &OptimizerConfig,
    w0: &[f64],
    traj: &mut Trajectory,
) -> Result<()> {
    let mut stepper = RfdStepper::new(config);
    let mut w_prev = w0.to_vec();
    let mut w = w0.to_vec();
    for n in 1..=config.steps + 1 {
        let beta = momentum_coefficient(n);
        let y: Vec<f64> = w.iter().zip(&w_prev).map(|(a, b)| a + beta * (a - b)).collect();
        let obs = evaluate_at(oracle, &y, n - 1)?;
        let (loss, grad) = (obs.loss, obs.grad.clone());
        let rec = traj.push(&y, obs);
        if n - 1 == config.steps {
            break;
        }
        let out = stepper.step_scaled(&y, loss, &grad, 0.5)?;
        rec.xi = out.xi;
        rec.eta = Some(out.eta);
        rec.stationary = out.stationary;
        w_prev = std::mem::replace(&mut w, out.next);
    }
    Ok(())
}

pub fn run_rfd(oracle: &mut dyn LossOracle, config: &OptimizerConfig, w0: &[f64]) -> Result<Trajectory> {
    let cfg = OptimizerConfig {
        variant: Variant::Rfd,
        ..config.clone()
    };
    run(oracle, &cfg, w0)
}

pub fn run_rfm_star(oracle: &mut dyn LossOracle, config: &OptimizerConfig, w0: &[f64]) -> Result<Trajectory> {
    let cfg = OptimizerConfig {
        variant: Variant::RfmStar,
        ..config.clone()
    };
    run(oracle, &cfg, w0)
}

pub fn run_conservative(
    oracle: &mut dyn LossOracle,
    config: &OptimizerConfig,
    epsilon: f64,
    w0: &[f64],
) -> Result<Trajectory> {
    let cfg = OptimizerConfig {
        variant: Variant::Conservative { epsilon },
        ..config.clone()
    };
    run(oracle, &cfg, w0)
}

pub fn run_regularized(
    oracle: &mut dyn LossOracle,
    config: &OptimizerConfig,
    reg_var: f64,
    w0: &[f64],
) -> Result<Trajectory> {
    let cfg = OptimizerConfig {
        variant: Variant::Regularized { reg_var },
        ..config.clone()
    };
    run(oracle, &cfg, w0)
}
