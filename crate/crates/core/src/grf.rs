//! Incremental sampling of a differentiable Gaussian random function.
//!
//! Every evaluation appends `dim + 1` scalars (value, then gradient
//! components) to a joint Gaussian system whose lower Cholesky factor is
//! extended one block at a time.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::covariance::{cov_blocks, IsotropicModel};
use crate::error::{Error, Result};
use crate::step_size::NoiseSpec;

/// Relative diagonal regularizer, multiplied by `C(0)`.
pub const DEFAULT_RELATIVE_JITTER: f64 = 1e-10;
const JITTER_ESCALATION: f64 = 100.0;
const MAX_ESCALATIONS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct GrfRecord {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// A noisy observation together with the noiseless truth it perturbs.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyRecord {
    pub truth: GrfRecord,
    pub observed: GrfRecord,
}

#[derive(Debug, Clone)]
pub struct GrfSampler {
    model: IsotropicModel,
    dim: usize,
    mean: f64,
    jitter: f64,
    seed: u64,
    rng: ChaCha8Rng,
    points: Vec<Vec<f64>>,
    records: Vec<GrfRecord>,
    /// Row `i` holds the first `i + 1` entries of the lower factor.
    factor: Vec<Vec<f64>>,
    draws: Vec<f64>,
}

impl GrfSampler {
    pub fn new(model: IsotropicModel, dim: usize, seed: u64) -> Result<Self> {
        if !model.is_stationary() {
            return Err(Error::NotStationary);
        }
        if !model.has_finite_second_derivative_at_zero() {
            return Err(Error::Unbounded("gradient process variance at distance 0"));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self {
            jitter: DEFAULT_RELATIVE_JITTER * model.cov(0.0),
            model,
            dim,
            mean: 0.0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            points: Vec::new(),
            records: Vec::new(),
            factor: Vec::new(),
            draws: Vec::new(),
        })
    }

    /// Constant mean of the value process.
    pub fn with_mean(mut self, mean: f64) -> Self {
        self.mean = mean;
        self
    }

    /// Absolute diagonal regularizer added to each new Schur block.
    pub fn with_jitter(mut self, jitter: f64) -> Result<Self> {
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "jitter must be nonnegative, got {jitter}"
            )));
        }
        self.jitter = jitter;
        Ok(self)
    }

    pub fn model(&self) -> &IsotropicModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn records(&self) -> &[GrfRecord] {
        &self.records
    }

    /// Standard normal innovations consumed so far.
    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn factor_rows(&self) -> usize {
        self.factor.len()
    }

    /// Row `i` of the lower-triangular factor (`i + 1` entries).
    pub fn factor_row(&self, i: usize) -> &[f64] {
        &self.factor[i]
    }

    pub fn eval(&mut self, w: &[f64]) -> Result<GrfRecord> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: w.len(),
            });
        }
        if let Some(i) = self.points.iter().position(|p| p.as_slice() == w) {
            return Ok(self.records[i].clone());
        }
        let m = self.dim + 1;
        let n_old = self.factor.len();

        // cross covariance of all previous scalars with the new ones, row-major n_old x m
        let mut cross = vec![0.0; n_old * m];
        for (pi, p) in self.points.iter().enumerate() {
            let b = cov_blocks(&self.model, p, w)?;
            for a in 0..m {
                let row = &mut cross[(pi * m + a) * m..(pi * m + a + 1) * m];
                if a == 0 {
                    row[0] = b.vv;
                    for j in 1..m {
                        row[j] = -b.gv[j - 1];
                    }
                } else {
                    row[0] = b.gv[a - 1];
                    for j in 1..m {
                        row[j] = b.gg[(a - 1, j - 1)];
                    }
                }
            }
        }

        // forward solve L11 X = K12 in place
        for i in 0..n_old {
            let (done, rest) = cross.split_at_mut(i * m);
            let acc = &mut rest[..m];
            let li = &self.factor[i];
            for (k, lik) in li[..i].iter().enumerate() {
                if *lik != 0.0 {
                    let xk = &done[k * m..(k + 1) * m];
                    for (a, x) in acc.iter_mut().zip(xk) {
                        *a -= lik * x;
                    }
                }
            }
            let diag = li[i];
            for a in acc.iter_mut() {
                *a /= diag;
            }
        }
        let x = &cross;

        let own = cov_blocks(&self.model, w, w)?;
        let mut schur = DMatrix::zeros(m, m);
        schur[(0, 0)] = own.vv;
        schur.view_mut((1, 1), (self.dim, self.dim)).copy_from(&own.gg);
        for k in 0..n_old {
            let xk = &x[k * m..(k + 1) * m];
            for a in 0..m {
                let xa = xk[a];
                if xa == 0.0 {
                    continue;
                }
                for b in 0..=a {
                    schur[(a, b)] -= xa * xk[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                schur[(b, a)] = schur[(a, b)];
            }
        }

        let mut jitter = self.jitter;
        let mut chol = None;
        for _ in 0..=MAX_ESCALATIONS {
            let mut s = schur.clone();
            for a in 0..m {
                s[(a, a)] += jitter;
            }
            if let Some(c) = s.cholesky() {
                chol = Some(c.l());
                break;
            }
            jitter = if jitter > 0.0 {
                jitter * JITTER_ESCALATION
            } else {
                DEFAULT_RELATIVE_JITTER * self.model.cov(0.0)
            };
        }
        let l22 = match chol {
            Some(l) => l,
            None => return Err(self.degeneracy(w)),
        };

        // innovations in fixed order: value, then gradient components
        let z_new: Vec<f64> = (0..m).map(|_| self.rng.sample(StandardNormal)).collect();
        let mut emitted = DVector::from_element(m, 0.0);
        emitted[0] = self.mean;
        for (k, zk) in self.draws.iter().enumerate() {
            let xk = &x[k * m..(k + 1) * m];
            for a in 0..m {
                emitted[a] += xk[a] * zk;
            }
        }
        for a in 0..m {
            for b in 0..=a {
                emitted[a] += l22[(a, b)] * z_new[b];
            }
        }

        for a in 0..m {
            let mut row = Vec::with_capacity(n_old + a + 1);
            row.extend((0..n_old).map(|k| x[k * m + a]));
            row.extend((0..=a).map(|b| l22[(a, b)]));
            self.factor.push(row);
        }
        self.draws.extend_from_slice(&z_new);
        let record = GrfRecord {
            value: emitted[0],
            grad: emitted.as_slice()[1..].to_vec(),
        };
        self.points.push(w.to_vec());
        self.records.push(record.clone());
        Ok(record)
    }

    /// Evaluation plus independent observation noise drawn from `rng`:
    /// `Normal(0, value_var)` on the value, `Normal(0, grad_var I)` on the gradient.
    pub fn eval_noisy<R: Rng + ?Sized>(
        &mut self,
        w: &[f64],
        noise: &NoiseSpec,
        rng: &mut R,
    ) -> Result<NoisyRecord> {
        let truth = self.eval(w)?;
        let observed = add_noise(&truth, noise, rng);
        Ok(NoisyRecord { truth, observed })
    }

    fn degeneracy(&self, w: &[f64]) -> Error {
        let (closest, distance) = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = p.iter().zip(w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                (i, d)
            })
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        Error::CovarianceDegeneracy {
            point: self.points.len(),
            closest,
            distance,
        }
    }
}

/// Adds independent value and gradient noise to a record. No draws are made
/// for a zero variance, so noiseless observation consumes no randomness.
pub fn add_noise<R: Rng + ?Sized>(truth: &GrfRecord, noise: &NoiseSpec, rng: &mut R) -> GrfRecord {
    let mut observed = truth.clone();
    if noise.value_var > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        observed.value += noise.value_var.sqrt() * z;
    }
    if noise.grad_var > 0.0 {
        let sd = noise.grad_var.sqrt();
        for g in observed.grad.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *g += sd * z;
        }
    }
    observed
}
