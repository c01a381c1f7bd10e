//! Numerical helpers shared by every module: the normal distribution,
//! midpoint quadrature, small vector algebra and a bracketed 1-D solver.

use libm::erfc;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Default quadrature step in years.
pub const DEFAULT_DT: f64 = 0.01;

/// Standard normal CDF, computed from `erfc` so the lower tail keeps full
/// relative accuracy.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Number of midpoint cells used to cover `[a, b]` with cells no wider than `dt`.
pub fn cells(a: f64, b: f64, dt: f64) -> usize {
    if b <= a {
        return 0;
    }
    ((b - a) / dt - 1e-9).ceil().max(1.0) as usize
}

/// Midpoint (rectangle) rule on `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, dt: f64, mut f: F) -> f64 {
    let n = cells(a, b, dt);
    if n == 0 {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    for k in 0..n {
        acc += f(a + (k as f64 + 0.5) * h);
    }
    acc * h
}

/// Midpoint nodes and the common cell width for `[a, b]`.
pub fn nodes(a: f64, b: f64, dt: f64) -> (Vec<f64>, f64) {
    let n = cells(a, b, dt);
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let h = (b - a) / n as f64;
    ((0..n).map(|k| a + (k as f64 + 0.5) * h).collect(), h)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `a * x + b * y` componentwise.
pub fn axpby(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(u, v)| a * u + b * v).collect()
}

pub fn scale(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|u| a * u).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `f(x) = 0` on `[lo, hi]` where `f(lo)` and `f(hi)` differ in sign.
///
/// Newton steps use the supplied derivative when it is finite and nonzero,
/// otherwise a secant slope from the last two iterates. Any step leaving the
/// current bracket is replaced by bisection.
pub fn solve_bracketed<F>(mut f: F, lo: f64, hi: f64, x0: f64, tol: f64, max_iter: usize) -> Result<Root>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (fa, _) = f(a);
    let (fb, _) = f(b);
    if fa == 0.0 {
        return Ok(Root { x: a, iterations: 0, residual: 0.0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, iterations: 0, residual: 0.0 });
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoRoot { msg: format!("no sign change on [{a}, {b}]: f(a)={fa:e}, f(b)={fb:e}"), residual: fa.abs().min(fb.abs()) });
    }
    let a_neg = fa < 0.0;
    let mut x = if x0 > a && x0 < b { x0 } else { 0.5 * (a + b) };
    let mut prev: Option<(f64, f64)> = None;
    let mut best = Root { x, iterations: 0, residual: f64::INFINITY };
    for it in 1..=max_iter {
        let (fx, dfx) = f(x);
        if fx.abs() < best.residual {
            best = Root { x, iterations: it, residual: fx.abs() };
        }
        if fx.abs() <= tol || (b - a) <= f64::EPSILON * (1.0 + x.abs()) {
            return Ok(Root { x, iterations: it, residual: fx.abs() });
        }
        if (fx < 0.0) == a_neg {
            a = x;
        } else {
            b = x;
        }
        let slope = if dfx.is_finite() && dfx != 0.0 {
            Some(dfx)
        } else {
            prev.and_then(|(xp, fp)| {
                let s = (fx - fp) / (x - xp);
                (s.is_finite() && s != 0.0).then_some(s)
            })
        };
        prev = Some((x, fx));
        let cand = slope.map(|s| x - fx / s);
        x = match cand {
            Some(c) if c > a && c < b => c,
            _ => 0.5 * (a + b),
        };
    }
    if best.residual <= tol {
        Ok(best)
    } else {
        Err(Error::NoRoot { msg: format!("no convergence after {max_iter} iterations"), residual: best.residual })
    }
}

/// Expands `[lo, hi]` geometrically upward until `f` changes sign, returning the
/// new upper end. Used when a variance-type unknown has no natural cap.
pub fn expand_upper<F: FnMut(f64) -> f64>(mut f: F, lo: f64, mut hi: f64, max_doublings: usize) -> Option<f64> {
    let flo = f(lo);
    for _ in 0..max_doublings {
        let fhi = f(hi);
        if fhi.signum() != flo.signum() || fhi == 0.0 {
            return Some(hi);
        }
        hi *= 2.0;
    }
    None
}

/// Pairwise summation keeps reductions independent of chunking order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Independent random stream for path `index` under master `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
