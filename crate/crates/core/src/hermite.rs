//! Probabilists' Hermite polynomials and Gauss-Hermite quadrature for the
//! velocity variable.
//!
//! The velocity basis is `psi_k(v) = M(v) He_k(sqrt(beta) v) / sqrt(k!)` with
//! the Maxwellian `M` of variance `1/beta`; the weights here refer to the
//! standard-normal variable `x = sqrt(beta) v`.

use crate::eig::eigh_inplace;
use crate::error::{Error, Result};

/// `He_k(x)` for k = 0..=order, by the recurrence
/// `He_{k+1} = x He_k - k He_{k-1}`.
pub fn hermite_values(order: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    out.push(1.0);
    if order == 0 {
        return out;
    }
    out.push(x);
    for k in 1..order {
        let next = x * out[k] - k as f64 * out[k - 1];
        out.push(next);
    }
    out
}

/// Gauss-Hermite rule for the standard normal weight: `n` nodes `x_q` and
/// weights `omega_q` with `sum omega_q = 1`, exact for polynomials of degree
/// `2n - 1` against `exp(-x^2/2)/sqrt(2 pi)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite recurrence
/// (zero diagonal, off-diagonal `sqrt(k)`).
pub fn gauss_hermite(n: usize) -> Result<GaussHermite> {
    if n == 0 {
        return Err(Error::invalid("n", "quadrature order must be >= 1"));
    }
    let mut a = vec![0.0f64; n * n];
    for k in 1..n {
        let b = (k as f64).sqrt();
        a[k * n + (k - 1)] = b;
        a[(k - 1) * n + k] = b;
    }
    let w = eigh_inplace(&mut a, n, true)?;
    let mut nodes = w;
    let mut weights = Vec::with_capacity(n);
    for q in 0..n {
        // First component of the normalized eigenvector, squared.
        let v0 = a[q * n];
        weights.push(v0 * v0);
    }
    // Symmetrize roundoff: the rule is exactly even.
    for q in 0..n / 2 {
        let avg = 0.5 * (weights[q] + weights[n - 1 - q]);
        weights[q] = avg;
        weights[n - 1 - q] = avg;
        let s = 0.5 * (nodes[n - 1 - q] - nodes[q]);
        nodes[q] = -s;
        nodes[n - 1 - q] = s;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(GaussHermite { nodes, weights })
}

/// Largest node of the `n`-point rule, i.e. the largest root of `He_n`.
pub fn max_hermite_root(n: usize) -> Result<f64> {
    let gh = gauss_hermite(n)?;
    Ok(gh.nodes[n - 1])
}
