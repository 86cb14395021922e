//! Isotropic covariance models and variograms.
//!
//! Every model is evaluated in squared distance `r2 = |x - y|^2`, i.e. as
//! `C(r2)`, and derivatives are taken with respect to `r2`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matern::matern_coeffs;

/// `beta` values closer to zero than this use the logarithmic branch of the
/// generalized rational quadratic variogram.
const LOG_BRANCH_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    SquaredExponential,
    /// Matérn with `nu = p + 1/2`, `p` in `{1, 2}`.
    Matern { p: u32 },
    RationalQuadratic { beta: f64 },
    /// Scale-normalized variogram `phi(x) = ((1+x)^(-beta/2) - 1) / (2^(-beta/2) - 1)`
    /// with `phi(1) = 1`. Intrinsically stationary, no variance or length scale.
    GeneralizedRationalQuadratic { beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicModel {
    kind: ModelKind,
    variance: f64,
    length_scale: f64,
    matern_c: Vec<f64>,
    matern_d: Vec<f64>,
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

impl IsotropicModel {
    pub fn squared_exponential(variance: f64, length_scale: f64) -> Result<Self> {
        check_positive("variance", variance)?;
        check_positive("length scale", length_scale)?;
        Ok(Self::raw(ModelKind::SquaredExponential, variance, length_scale))
    }

    pub fn matern(p: u32, variance: f64, length_scale: f64) -> Result<Self> {
        check_positive("variance", variance)?;
        check_positive("length scale", length_scale)?;
        if !(1..=2).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "Matérn smoothness p must be 1 or 2, got {p}"
            )));
        }
        let coeffs = matern_coeffs(p)?;
        let mut model = Self::raw(ModelKind::Matern { p }, variance, length_scale);
        model.matern_c = coeffs.c_f64();
        model.matern_d = coeffs.d_f64();
        Ok(model)
    }

    pub fn rational_quadratic(beta: f64, variance: f64, length_scale: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        check_positive("variance", variance)?;
        check_positive("length scale", length_scale)?;
        Ok(Self::raw(
            ModelKind::RationalQuadratic { beta },
            variance,
            length_scale,
        ))
    }

    /// `beta` must lie in `[-2, inf)`. Values `beta <= -1` are accepted but
    /// have no finite optimal step, see [`IsotropicModel::has_finite_step`].
    pub fn generalized_rational_quadratic(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < -2.0 {
            return Err(Error::InvalidParameter(format!(
                "generalized rational quadratic requires beta >= -2, got {beta}"
            )));
        }
        Ok(Self::raw(
            ModelKind::GeneralizedRationalQuadratic { beta },
            1.0,
            1.0,
        ))
    }

    fn raw(kind: ModelKind, variance: f64, length_scale: f64) -> Self {
        Self {
            kind,
            variance,
            length_scale,
            matern_c: Vec::new(),
            matern_d: Vec::new(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// `sigma^2`; 1 for the normalized variogram.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `s`; 1 for the normalized variogram.
    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    /// Natural unit of the optimal step (`s sqrt(beta)` for the rational quadratic).
    pub fn effective_length_scale(&self) -> f64 {
        match self.kind {
            ModelKind::RationalQuadratic { beta } => self.length_scale * beta.sqrt(),
            _ => self.length_scale,
        }
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self.kind, ModelKind::GeneralizedRationalQuadratic { .. })
    }

    pub fn has_finite_step(&self) -> bool {
        match self.kind {
            ModelKind::GeneralizedRationalQuadratic { beta } => beta > -1.0,
            _ => true,
        }
    }

    /// Whether `C''(0)` is finite, i.e. the gradient process is itself
    /// differentiable in mean square.
    pub fn has_finite_second_derivative_at_zero(&self) -> bool {
        !matches!(self.kind, ModelKind::Matern { p: 1 })
    }

    /// Same model with variance multiplied by `factor`.
    pub fn scaled_variance(&self, factor: f64) -> Result<Self> {
        check_positive("variance factor", factor)?;
        if !self.is_stationary() {
            return Err(Error::NotStationary);
        }
        let mut m = self.clone();
        m.variance *= factor;
        Ok(m)
    }

    /// Same model with length scale replaced by `length_scale`.
    pub fn with_length_scale(&self, length_scale: f64) -> Result<Self> {
        check_positive("length scale", length_scale)?;
        if !self.is_stationary() {
            return Err(Error::NotStationary);
        }
        let mut m = self.clone();
        m.length_scale = length_scale;
        Ok(m)
    }

    /// `C(r2)`. Precondition: stationary model, `r2 >= 0`.
    pub fn cov(&self, r2: f64) -> f64 {
        let (v, s) = (self.variance, self.length_scale);
        match self.kind {
            ModelKind::SquaredExponential => v * (-r2 / (2.0 * s * s)).exp(),
            ModelKind::Matern { p } => {
                let m = self.matern_m(p, r2);
                v * (-m).exp() * horner(&self.matern_c, m)
            }
            ModelKind::RationalQuadratic { beta } => {
                v * (1.0 + r2 / (beta * s * s)).powf(-beta / 2.0)
            }
            ModelKind::GeneralizedRationalQuadratic { .. } => f64::NAN,
        }
    }

    /// `C'(r2)`. Precondition: stationary model, `r2 >= 0`.
    pub fn cov_d1(&self, r2: f64) -> f64 {
        let (v, s) = (self.variance, self.length_scale);
        match self.kind {
            ModelKind::SquaredExponential => -v / (2.0 * s * s) * (-r2 / (2.0 * s * s)).exp(),
            ModelKind::Matern { p } => {
                let m = self.matern_m(p, r2);
                let k = (2 * p + 1) as f64;
                -v * k / (2.0 * s * s) * (-m).exp() * horner(&self.matern_d, m)
            }
            ModelKind::RationalQuadratic { beta } => {
                -v / (2.0 * s * s) * (1.0 + r2 / (beta * s * s)).powf(-beta / 2.0 - 1.0)
            }
            ModelKind::GeneralizedRationalQuadratic { .. } => f64::NAN,
        }
    }

    /// `C''(r2)`. Precondition: stationary model, `r2 >= 0`. Returns `+inf`
    /// for Matérn `p = 1` at `r2 = 0`.
    pub fn cov_d2(&self, r2: f64) -> f64 {
        let (v, s) = (self.variance, self.length_scale);
        match self.kind {
            ModelKind::SquaredExponential => {
                v / (4.0 * s.powi(4)) * (-r2 / (2.0 * s * s)).exp()
            }
            ModelKind::Matern { p } => {
                let m = self.matern_m(p, r2);
                let k = (2 * p + 1) as f64;
                let lead = v * k * k / (4.0 * s.powi(4)) * (-m).exp();
                if p == 1 {
                    // d(0) / m, singular at the origin
                    return if m == 0.0 {
                        f64::INFINITY
                    } else {
                        lead * self.matern_d[0] / m
                    };
                }
                // sum_{k>=1} (d(k) - (k+1) d(k+1)) m^(k-1); the k = 0 term
                // vanishes because d(0) = d(1) for p >= 2.
                let d = &self.matern_d;
                let pu = p as usize;
                let poly: Vec<f64> = (1..pu)
                    .map(|j| {
                        let next = if j + 1 < pu { d[j + 1] } else { 0.0 };
                        d[j] - (j as f64 + 1.0) * next
                    })
                    .collect();
                lead * horner(&poly, m)
            }
            ModelKind::RationalQuadratic { beta } => {
                v * (beta / 2.0 + 1.0) / (2.0 * beta * s.powi(4))
                    * (1.0 + r2 / (beta * s * s)).powf(-beta / 2.0 - 2.0)
            }
            ModelKind::GeneralizedRationalQuadratic { .. } => f64::NAN,
        }
    }

    fn matern_m(&self, p: u32, r2: f64) -> f64 {
        ((2 * p + 1) as f64 * r2).sqrt() / self.length_scale
    }

    /// Variogram `phi(r2)` and its derivatives (`order` 0, 1, 2). For
    /// stationary models `phi = C(0) - C`.
    pub fn variogram(&self, r2: f64, order: usize) -> f64 {
        match self.kind {
            ModelKind::GeneralizedRationalQuadratic { beta } => grq_phi(beta, r2, order),
            _ => match order {
                0 => self.variance - self.cov(r2),
                1 => -self.cov_d1(r2),
                _ => -self.cov_d2(r2),
            },
        }
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn grq_phi(beta: f64, x: f64, order: usize) -> f64 {
    if beta.abs() < LOG_BRANCH_EPS {
        let ln2 = std::f64::consts::LN_2;
        return match order {
            0 => (1.0 + x).ln() / ln2,
            1 => 1.0 / (ln2 * (1.0 + x)),
            _ => -1.0 / (ln2 * (1.0 + x).powi(2)),
        };
    }
    let h = -beta / 2.0;
    let norm = 2f64.powf(h) - 1.0;
    match order {
        0 => ((1.0 + x).powf(h) - 1.0) / norm,
        1 => h * (1.0 + x).powf(h - 1.0) / norm,
        _ => h * (h - 1.0) * (1.0 + x).powf(h - 2.0) / norm,
    }
}

fn check_r2(r2: f64) -> Result<()> {
    if r2.is_nan() || r2 < 0.0 {
        Err(Error::NegativeDistance(r2))
    } else {
        Ok(())
    }
}

/// `C(r2)`, `C'(r2)` or `C''(r2)` for a stationary model.
pub fn sqc_eval(model: &IsotropicModel, r2: f64, order: usize) -> Result<f64> {
    check_r2(r2)?;
    if !model.is_stationary() {
        return Err(Error::NotStationary);
    }
    match order {
        0 => Ok(model.cov(r2)),
        1 => Ok(model.cov_d1(r2)),
        2 => {
            let v = model.cov_d2(r2);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Unbounded("second derivative of the covariance"))
            }
        }
        o => Err(Error::UnsupportedOrder(o)),
    }
}

/// `phi(r2)` or `phi'(r2)`; for stationary models this is `C(0) - C(r2)` and
/// `-C'(r2)`.
pub fn variogram_eval(model: &IsotropicModel, r2: f64, order: usize) -> Result<f64> {
    check_r2(r2)?;
    match order {
        0 | 1 => Ok(model.variogram(r2, order)),
        o => Err(Error::UnsupportedOrder(o)),
    }
}

/// Joint second moments of `(L(x), grad L(x))` against `(L(y), grad L(y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovBlocks {
    /// `Cov(L(x), L(y))`
    pub vv: f64,
    /// `Cov(grad L(x), L(y))`
    pub gv: DVector<f64>,
    /// `Cov(grad L(x), grad L(y))`
    pub gg: DMatrix<f64>,
}

pub fn cov_blocks(model: &IsotropicModel, x: &[f64], y: &[f64]) -> Result<CovBlocks> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if !model.is_stationary() {
        return Err(Error::NotStationary);
    }
    let diff = DVector::from_iterator(x.len(), x.iter().zip(y).map(|(a, b)| a - b));
    let r2 = diff.norm_squared();
    let c1 = model.cov_d1(r2);
    let mut gg = DMatrix::identity(x.len(), x.len()) * (-2.0 * c1);
    if r2 > 0.0 {
        let c2 = model.cov_d2(r2);
        gg -= &diff * diff.transpose() * (4.0 * c2);
    }
    Ok(CovBlocks {
        vv: model.cov(r2),
        gv: &diff * (2.0 * c1),
        gg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sqexp() -> IsotropicModel {
        IsotropicModel::squared_exponential(1.0, 1.0).unwrap()
    }

    fn covariance_models() -> Vec<IsotropicModel> {
        vec![
            IsotropicModel::squared_exponential(1.3, 0.7).unwrap(),
            IsotropicModel::matern(1, 2.0, 1.5).unwrap(),
            IsotropicModel::matern(2, 0.5, 0.3).unwrap(),
            IsotropicModel::rational_quadratic(0.5, 1.0, 1.0).unwrap(),
            IsotropicModel::rational_quadratic(3.0, 1.7, 2.0).unwrap(),
        ]
    }

    #[test]
    fn sqexp_values() {
        let m = sqexp();
        assert_eq!(sqc_eval(&m, 0.0, 0).unwrap(), 1.0);
        assert_eq!(sqc_eval(&m, 0.0, 1).unwrap(), -0.5);
        assert_eq!(sqc_eval(&m, 0.0, 2).unwrap(), 0.25);
    }

    #[test]
    fn matern_p2_matches_bessel_form() {
        // sigma^2 2^(1-nu)/Gamma(nu) x^nu K_nu(x), x = sqrt(5) r, computed with scipy
        let m = IsotropicModel::matern(2, 1.0, 1.0).unwrap();
        assert_relative_eq!(m.cov(1.0), 0.5239941088318205, max_relative = 1e-14);
        assert_relative_eq!(m.cov(0.09), 0.9309653427750053, max_relative = 1e-14);
        let m1 = IsotropicModel::matern(1, 1.0, 1.0).unwrap();
        assert_relative_eq!(m1.cov(1.0), 0.4833577245965079, max_relative = 1e-14);
    }

    #[test]
    fn matern_p1_second_derivative_unbounded_at_zero() {
        let m = IsotropicModel::matern(1, 1.0, 1.0).unwrap();
        assert_eq!(
            sqc_eval(&m, 0.0, 2),
            Err(Error::Unbounded("second derivative of the covariance"))
        );
        assert!(sqc_eval(&m, 1e-6, 2).unwrap().is_finite());
        assert!(!m.has_finite_second_derivative_at_zero());
    }

    #[test]
    fn matern_p2_second_derivative_at_zero() {
        // limit: sigma^2 (2p+1)^2/(4 s^4) * (d(1) - 2 d(2)) = 25/12
        let m = IsotropicModel::matern(2, 1.0, 1.0).unwrap();
        assert_relative_eq!(m.cov_d2(0.0), 25.0 / 12.0, max_relative = 1e-15);
        assert_relative_eq!(m.cov_d2(1e-12), 25.0 / 12.0, max_relative = 1e-5);
    }

    #[test]
    fn errors() {
        let m = sqexp();
        assert_eq!(sqc_eval(&m, -1.0, 0), Err(Error::NegativeDistance(-1.0)));
        assert_eq!(sqc_eval(&m, 1.0, 3), Err(Error::UnsupportedOrder(3)));
        let g = IsotropicModel::generalized_rational_quadratic(0.0).unwrap();
        assert_eq!(sqc_eval(&g, 1.0, 0), Err(Error::NotStationary));
        assert!(IsotropicModel::squared_exponential(0.0, 1.0).is_err());
        assert!(IsotropicModel::squared_exponential(1.0, -1.0).is_err());
        assert!(IsotropicModel::matern(3, 1.0, 1.0).is_err());
        assert!(IsotropicModel::rational_quadratic(0.0, 1.0, 1.0).is_err());
        assert!(IsotropicModel::generalized_rational_quadratic(-2.5).is_err());
    }

    #[test]
    fn grq_flags_infinite_step() {
        assert!(IsotropicModel::generalized_rational_quadratic(-1.0)
            .map(|m| !m.has_finite_step())
            .unwrap());
        assert!(IsotropicModel::generalized_rational_quadratic(-0.5)
            .unwrap()
            .has_finite_step());
    }

    #[test]
    fn variogram_values() {
        for m in covariance_models() {
            assert_eq!(variogram_eval(&m, 0.0, 0).unwrap(), 0.0);
        }
        let g0 = IsotropicModel::generalized_rational_quadratic(0.0).unwrap();
        assert_relative_eq!(variogram_eval(&g0, 1.0, 0).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(variogram_eval(&g0, 0.0, 0).unwrap(), 0.0);
        let gm1 = IsotropicModel::generalized_rational_quadratic(-1.0).unwrap();
        assert_relative_eq!(
            variogram_eval(&gm1, 0.0, 1).unwrap(),
            0.5 / (2f64.sqrt() - 1.0),
            max_relative = 1e-15
        );
        for beta in [-1.5, -0.5, 0.5, 3.0] {
            let g = IsotropicModel::generalized_rational_quadratic(beta).unwrap();
            assert_relative_eq!(g.variogram(1.0, 0), 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn grq_log_branch_is_continuous() {
        let g0 = IsotropicModel::generalized_rational_quadratic(0.0).unwrap();
        let g = IsotropicModel::generalized_rational_quadratic(1e-7).unwrap();
        for x in [0.0, 0.3, 2.0, 10.0] {
            for order in 0..3 {
                assert_relative_eq!(
                    g.variogram(x, order),
                    g0.variogram(x, order),
                    max_relative = 1e-6,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn finite_differences_match_derivatives() {
        let grid: Vec<f64> = (0..25).map(|i| 10f64.powf(-3.0 + 0.2 * i as f64)).collect();
        for m in covariance_models() {
            let s2 = m.length_scale().powi(2);
            for &u in &grid {
                let r2 = u * s2;
                let h = 1e-5 * r2;
                let fd1 = (m.cov(r2 + h) - m.cov(r2 - h)) / (2.0 * h);
                assert_relative_eq!(fd1, m.cov_d1(r2), max_relative = 1e-6, epsilon = 1e-14);
                let fd2 = (m.cov_d1(r2 + h) - m.cov_d1(r2 - h)) / (2.0 * h);
                assert_relative_eq!(fd2, m.cov_d2(r2), max_relative = 1e-5, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn variogram_nonnegative_nondecreasing() {
        for m in covariance_models() {
            let mut prev = 0.0;
            for i in 0..200 {
                let r2 = 0.05 * i as f64 * m.length_scale().powi(2);
                let g = m.variogram(r2, 0);
                assert!(g >= 0.0 && g >= prev - 1e-15);
                prev = g;
            }
        }
    }

    #[test]
    fn rational_quadratic_converges_to_sqexp() {
        let (v, s) = (1.7, 0.8);
        let rq = IsotropicModel::rational_quadratic(1e4, v, s).unwrap();
        let se = IsotropicModel::squared_exponential(v, s).unwrap();
        for i in 0..=100 {
            let r2 = 0.1 * i as f64 * s * s;
            assert!((rq.cov(r2) - se.cov(r2)).abs() <= 1e-3 * v);
        }
    }

    #[test]
    fn blocks_at_coincident_points() {
        let b = cov_blocks(&sqexp(), &[0.3, -1.0], &[0.3, -1.0]).unwrap();
        assert_eq!(b.vv, 1.0);
        assert_eq!(b.gv, DVector::zeros(2));
        assert_eq!(b.gg, DMatrix::identity(2, 2));
    }

    #[test]
    fn blocks_at_unit_offset() {
        let b = cov_blocks(&sqexp(), &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        let e = (-0.5f64).exp();
        assert_relative_eq!(b.vv, e, max_relative = 1e-15);
        assert_relative_eq!(b.gv[0], -e, max_relative = 1e-15);
        assert_eq!(b.gv[1], 0.0);
        assert_relative_eq!(b.gg[(0, 0)], 0.0, epsilon = 1e-15);
        assert_relative_eq!(b.gg[(1, 1)], e, max_relative = 1e-15);
        assert_eq!(b.gg[(0, 1)], 0.0);
    }

    #[test]
    fn blocks_match_finite_differences_of_vv() {
        let x = [0.4, -0.2, 0.9];
        let y = [-0.3, 0.5, 0.1];
        let h = 1e-5;
        for m in covariance_models() {
            let b = cov_blocks(&m, &x, &y).unwrap();
            let vv = |x: &[f64], y: &[f64]| cov_blocks(&m, x, y).unwrap().vv;
            for i in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (vv(&xp, &y) - vv(&xm, &y)) / (2.0 * h);
                assert_relative_eq!(fd, b.gv[i], max_relative = 1e-6, epsilon = 1e-10);
                for j in 0..3 {
                    let shift = |xv: [f64; 3], dy: f64| {
                        let mut yy = y;
                        yy[j] += dy;
                        vv(&xv, &yy)
                    };
                    let fd2 = (shift(xp, h) - shift(xp, -h) - shift(xm, h) + shift(xm, -h))
                        / (4.0 * h * h);
                    assert_relative_eq!(fd2, b.gg[(i, j)], max_relative = 1e-4, epsilon = 1e-5);
                }
            }
        }
    }

    #[test]
    fn swapping_points() {
        let m = IsotropicModel::matern(2, 1.0, 0.5).unwrap();
        let (x, y) = ([0.1, 0.2], [-0.4, 0.7]);
        let a = cov_blocks(&m, &x, &y).unwrap();
        let b = cov_blocks(&m, &y, &x).unwrap();
        assert_eq!(a.vv, b.vv);
        assert_eq!(a.gv, -b.gv);
        assert_eq!(a.gg, b.gg.transpose());
    }

    #[test]
    fn blocks_dimension_mismatch() {
        assert_eq!(
            cov_blocks(&sqexp(), &[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch {
                expected: 1,
                got: 2
            })
        );
    }
}
