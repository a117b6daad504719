//! Bulk thermodynamics of the homogeneous mixture: the double-well free
//! energy density and the coexisting bulk densities of the segregated phases.

use crate::error::{Error, Result};

/// Free energy density of a homogeneous state `(rho1, rho2)`:
/// `rho1 ln rho1 + rho2 ln rho2 + beta rho1 rho2`.
pub fn eval_double_well(beta: f64, rho1: f64, rho2: f64) -> Result<f64> {
    if !(rho1 > 0.0) || !(rho2 > 0.0) {
        return Err(Error::invalid(
            "rho",
            format!("densities must be positive (got {rho1}, {rho2})"),
        ));
    }
    Ok(rho1 * rho1.ln() + rho2 * rho2.ln() + beta * rho1 * rho2)
}

/// Whether segregated phases exist at all.
pub fn is_supercritical(beta: f64, n: f64) -> bool {
    beta * n > 2.0
}

/// Result of the coexistence computation at total density `n`.
#[derive(Debug, Clone, Copy)]
pub struct Coexistence {
    /// Majority-species density of a segregated bulk phase.
    pub rho_plus: f64,
    /// Minority-species density; `rho_plus + rho_minus = n`.
    pub rho_minus: f64,
    /// Segregation parameter `m = (rho_plus - rho_minus) / n` in `[0, 1)`.
    pub m: f64,
}

/// Solve for the coexisting densities: `m` is the largest root of
/// `artanh(m) = (beta n / 2) m`. Subcritical parameters give the mixed state
/// `m = 0`, `rho_plus = rho_minus = n/2`.
pub fn coexistence_densities(beta: f64, n: f64, tol: f64) -> Result<Coexistence> {
    if !(beta > 0.0) {
        return Err(Error::invalid("beta", "must be > 0"));
    }
    if !(n > 0.0) {
        return Err(Error::invalid("n", "must be > 0"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be > 0"));
    }
    let s = 0.5 * beta * n;
    if s <= 1.0 {
        return Ok(Coexistence {
            rho_plus: 0.5 * n,
            rho_minus: 0.5 * n,
            m: 0.0,
        });
    }
    // g(m) = artanh(m) - s m has g'(0) = 1 - s < 0 and g(m) -> +inf as m -> 1,
    // so the positive root is bracketed by [lo, 1).
    let g = |m: f64| m.atanh() - s * m;
    let mut lo = tol.max(1e-3);
    // Very weak supercriticality: shrink lo until g(lo) < 0.
    while g(lo) >= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Ok(Coexistence {
                rho_plus: 0.5 * n,
                rho_minus: 0.5 * n,
                m: 0.0,
            });
        }
    }
    let mut hi = 1.0 - 1e-12;
    if g(hi) <= 0.0 {
        // Root is pushed into the last ulps below 1; clamp.
        hi = 1.0 - 1e-15;
    }
    let mut iterations = 0usize;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::NonConvergence {
                iterations,
                residual: hi - lo,
            });
        }
    }
    let m = 0.5 * (lo + hi);
    Ok(Coexistence {
        rho_plus: 0.5 * n * (1.0 + m),
        rho_minus: 0.5 * n * (1.0 - m),
        m,
    })
}
