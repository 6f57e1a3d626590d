//! Scalar series algebra: the transform of a constant, the Cauchy product at
//! one order, and the split of that product into its linear and history parts.

use crate::error::{Error, Result};

/// Transform of a constant: 1 at order 0, 0 above.
#[inline]
pub fn delta(k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        0.0
    }
}

fn need(len: usize, k: usize) -> Result<()> {
    if len <= k {
        Err(Error::OrderOutOfRange {
            order: k,
            available: len.saturating_sub(1),
        })
    } else {
        Ok(())
    }
}

/// `sum_{m=0..k} x[m] * y[k-m]`.
pub fn conv_at(x: &[f64], y: &[f64], k: usize) -> Result<f64> {
    need(x.len().min(y.len()), k)?;
    Ok((0..=k).map(|m| x[m] * y[k - m]).sum())
}

/// Linear split of the order-`k` product: returns `(a, b, c)` with
/// `a * x[k] + b * y[k] + c == conv_at(x, y, k)`.
///
/// Only `x[0..k]` and `y[0..k]` are read, so the order-`k` entries may be
/// unknown. `k = 0` has no such split.
pub fn lemma_coeffs(x: &[f64], y: &[f64], k: usize) -> Result<(f64, f64, f64)> {
    if k == 0 {
        return Err(Error::OrderOutOfRange {
            order: 0,
            available: 0,
        });
    }
    need(x.len().min(y.len()) + 1, k)?;
    Ok((y[0], x[0], history(|m| x[m], |m| y[m], k)))
}

/// `sum_{m=1..k-1} x(m) * y(k-m)`: the part of the order-`k` product that
/// involves neither order-`k` coefficient.
#[inline]
pub fn history(x: impl Fn(usize) -> f64, y: impl Fn(usize) -> f64, k: usize) -> f64 {
    (1..k).map(|m| x(m) * y(k - m)).sum()
}
