//! Sign-change bisection for monotone scalar maps.

use crate::error::{DsmError, Result};

/// Midpoint rule used to split a bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Arithmetic,
    /// `√(lo·hi)`; requires a positive bracket. Suited to brackets spanning decades.
    Geometric,
}

/// Outcome of a bisection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub value: f64,
    pub steps: usize,
}

/// Bisects `g` on `[lo, hi]`, where `g(lo)` and `g(hi)` differ in sign, until
/// the bracket collapses to adjacent floats or `g` vanishes. Returns the
/// endpoint with the smaller `|g|`.
pub fn bisect<F>(g: F, mut lo: f64, mut hi: f64, split: Split, max_steps: usize) -> Result<Root>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) {
        return Err(DsmError::InvalidInput(format!(
            "empty bracket [{lo}, {hi}]"
        )));
    }
    if split == Split::Geometric && lo <= 0.0 {
        return Err(DsmError::InvalidInput(format!(
            "geometric bisection needs a positive bracket, got [{lo}, {hi}]"
        )));
    }
    let mut g_lo = g(lo);
    let mut g_hi = g(hi);
    if g_lo == 0.0 {
        return Ok(Root {
            x: lo,
            value: 0.0,
            steps: 0,
        });
    }
    if g_hi == 0.0 {
        return Ok(Root {
            x: hi,
            value: 0.0,
            steps: 0,
        });
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(DsmError::NoSolution(format!(
            "no sign change on [{lo:e}, {hi:e}]: g = {g_lo:e}, {g_hi:e}"
        )));
    }
    for step in 1..=max_steps {
        let mid = match split {
            Split::Arithmetic => lo + 0.5 * (hi - lo),
            Split::Geometric => (lo.sqrt()) * (hi.sqrt()),
        };
        if mid <= lo || mid >= hi {
            return Ok(best(lo, g_lo, hi, g_hi, step));
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return Ok(Root {
                x: mid,
                value: 0.0,
                steps: step,
            });
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }
    Ok(best(lo, g_lo, hi, g_hi, max_steps))
}

fn best(lo: f64, g_lo: f64, hi: f64, g_hi: f64, steps: usize) -> Root {
    if g_lo.abs() <= g_hi.abs() {
        Root {
            x: lo,
            value: g_lo,
            steps,
        }
    } else {
        Root {
            x: hi,
            value: g_hi,
            steps,
        }
    }
}
