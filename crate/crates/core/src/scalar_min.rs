//! One-dimensional minimization and root finding on bounded intervals.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    /// Final bracket `[lo, hi]` containing `x`.
    pub lo: f64,
    pub hi: f64,
}

/// Golden-section search on `[lo, hi]`, stopping when the bracket width drops
/// below `rel_tol * |x|` (or an absolute floor of `rel_tol * 1e-12 * (hi - lo)`)
/// or after `max_iter` iterations.
pub fn golden_section<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Minimum {
    let abs_floor = rel_tol * 1e-12 * (hi - lo).abs();
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        if (b - a) <= rel_tol * mid.abs() + abs_floor {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let (x, value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Minimum {
        x,
        value,
        lo: a,
        hi: b,
    }
}

/// Global-ish minimization: evaluate `f` on `grid_points` equispaced nodes of
/// `[lo, hi]`, then refine around the best node by golden section. Always
/// returns a value no larger than `f(lo)`.
pub fn grid_then_golden<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    grid_points: usize,
    rel_tol: f64,
    max_iter: usize,
) -> Minimum {
    let n = grid_points.max(3);
    let h = (hi - lo) / (n - 1) as f64;
    let (mut best_i, mut best_v) = (0usize, f(lo));
    for i in 1..n {
        let v = f(lo + h * i as f64);
        if v < best_v {
            best_i = i;
            best_v = v;
        }
    }
    let a = lo + h * best_i.saturating_sub(1) as f64;
    let b = (lo + h * (best_i + 1) as f64).min(hi);
    let refined = golden_section(&f, a, b, rel_tol, max_iter);
    if refined.value <= best_v {
        refined
    } else {
        let x = lo + h * best_i as f64;
        Minimum {
            x,
            value: best_v,
            lo: a,
            hi: b,
        }
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`. Requires
/// `f(lo)` and `f(hi)` of opposite sign (zero counts as either).
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, iterations: usize) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::MinimizerFailed(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    let a_positive = fa > 0.0;
    for _ in 0..iterations {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == a_positive {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Sharpen an approximate interior minimizer `x0` using the sign of the
/// derivative `df`: expands a bracket around `x0` until `df` changes sign
/// from negative to positive, then bisects. Returns `None` if no sign change
/// is found inside `[lo, hi]`.
pub fn polish_with_derivative<D: Fn(f64) -> f64>(
    df: D,
    x0: f64,
    width: f64,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    let mut h = width.max(f64::EPSILON * x0.abs().max(1e-300));
    for _ in 0..60 {
        let a = (x0 - h).max(lo);
        let b = (x0 + h).min(hi);
        if df(a) < 0.0 && df(b) > 0.0 {
            return bisect(&df, a, b, 200).ok();
        }
        if a <= lo && b >= hi {
            return None;
        }
        h *= 2.0;
    }
    None
}
