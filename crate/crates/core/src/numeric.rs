//! Small scalar utilities shared by the N-function calculus and the norms.

use crate::error::{Error, Result};

/// Absolute tolerance used by every bisection in the crate.
pub const BISECT_TOL: f64 = 1e-12;
/// Iteration cap used by every bisection in the crate.
pub const BISECT_MAX_ITER: usize = 200;

/// Root of a nondecreasing `f` on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
///
/// Stops when the bracket is narrower than [`BISECT_TOL`], when the midpoint
/// no longer separates the endpoints, or after [`BISECT_MAX_ITER`] halvings.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    for _ in 0..BISECT_MAX_ITER {
        if hi - lo <= BISECT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expands `hi` geometrically until `f(hi) > 0`; `f` must be nondecreasing.
pub fn expand_upper<F>(mut f: F, start: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut hi = start.max(f64::MIN_POSITIVE);
    for _ in 0..2100 {
        if f(hi)? > 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    Err(Error::Range("bracket expansion overflowed".into()))
}

/// `n` log-spaced points from `a` to `b` inclusive (`0 < a < b`).
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                a
            } else if i == n - 1 {
                b
            } else {
                (la + (lb - la) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Pairwise summation in a fixed order, so results are bit-reproducible.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Smallest power of two that is `>= n`.
pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}
