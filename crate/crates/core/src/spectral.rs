//! Linearized operators around the front: the Fokker-Planck operator in the
//! Hermite representation, the second-variation operator A, its symmetrized
//! form and the constant-coefficient symbol bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eig::eigh_inplace;
use crate::error::{Error, Result};
use crate::front::FrontProfile;
use crate::model::{convolve, derivative, Extension, Kernel1D, ScalarField};

/// Hermite-mode description of the velocity space at inverse temperature beta.
///
/// Mode k is `M(v) He_k(sqrt(beta) v) / sqrt(k!)`; the Fokker-Planck operator
/// is diagonal on these modes with eigenvalue `-beta k`.
#[derive(Debug, Clone, Copy)]
pub struct HermiteBasis {
    pub order: usize,
    pub beta: f64,
}

impl HermiteBasis {
    pub fn new(order: usize, beta: f64) -> Self {
        HermiteBasis { order, beta }
    }

    /// Eigenvalues of the Fokker-Planck operator: 0, -beta, ..., -beta K.
    pub fn fp_eigenvalues(&self) -> Vec<f64> {
        (0..=self.order).map(|k| -self.beta * k as f64).collect()
    }
}

/// Empirical minimum over random coefficient vectors of the dissipation ratio
/// `-<g, Lg>_M / ||(I-P)g||_D^2`, the spectral-gap constant of the
/// Fokker-Planck operator against the dissipation norm.
///
/// In mode coefficients the ratio is
/// `beta sum_{k>=1} k c_k^2 / sum_{k>=1} (1 + beta (k+1)) c_k^2`;
/// its exact minimum is the k = 1 value `beta / (1 + 2 beta)`.
pub fn check_lgap(basis: &HermiteBasis, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::invalid("samples", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = basis.beta;
    let mut min_ratio = f64::INFINITY;
    for _ in 0..samples {
        let c: Vec<f64> = (0..=basis.order).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, &ck) in c.iter().enumerate().skip(1) {
            num += beta * k as f64 * ck * ck;
            den += (1.0 + beta * (k + 1) as f64) * ck * ck;
        }
        if den < 1e-300 {
            continue;
        }
        min_ratio = min_ratio.min(num / den);
    }
    if min_ratio.is_infinite() {
        return Err(Error::Numerical("all samples degenerate".into()));
    }
    Ok(min_ratio)
}

/// The second variation of the excess free energy at the front:
/// `(Ag)_1 = g_1/w_1 + beta U*g_2`, `(Ag)_2 = g_2/w_2 + beta U*g_1`,
/// with perturbations extended by zero.
#[derive(Debug, Clone, Copy)]
pub struct OperatorA<'a> {
    pub front: &'a FrontProfile,
}

impl<'a> OperatorA<'a> {
    pub fn new(front: &'a FrontProfile) -> Self {
        OperatorA { front }
    }

    pub fn apply(&self, g1: &[f64], g2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.front;
        let u2 = convolve(&p.kernel, &ScalarField::new(g2.to_vec(), Extension::Zero));
        let u1 = convolve(&p.kernel, &ScalarField::new(g1.to_vec(), Extension::Zero));
        let a1 = (0..p.grid.nz())
            .map(|k| g1[k] / p.w1[k] + p.beta * u2.values[k])
            .collect();
        let a2 = (0..p.grid.nz())
            .map(|k| g2[k] / p.w2[k] + p.beta * u1.values[k])
            .collect();
        (a1, a2)
    }

    /// Vector inner product `<f, g> = sum dz (f_1 g_1 + f_2 g_2)`.
    pub fn inner(&self, f: (&[f64], &[f64]), g: (&[f64], &[f64])) -> f64 {
        let dz = self.front.grid.dz;
        let mut acc = 0.0;
        for k in 0..self.front.grid.nz() {
            acc += f.0[k] * g.0[k] + f.1[k] * g.1[k];
        }
        acc * dz
    }

    pub fn quadratic_form(&self, g1: &[f64], g2: &[f64]) -> f64 {
        let (a1, a2) = self.apply(g1, g2);
        self.inner((g1, g2), (&a1, &a2))
    }
}

/// Two evaluations of the same quadratic form: directly, and through the
/// squared-difference double integral that exhibits its sign.
#[derive(Debug, Clone, Copy)]
pub struct QuadFormCheck {
    pub direct: f64,
    pub measure_form: f64,
    /// Grid mass `sum dz` of nodes excluded by the derivative floor.
    pub excluded_mass: f64,
    pub agrees: bool,
}

/// Evaluate `<g, Ag>` against the identity
///
/// `-beta int int [g_1(z)/w'_1(z) - g_2(z')/w'_2(z')]^2 U(z-z') w'_1(z) w'_2(z') dz dz'`
///
/// which holds on the exact front and shows nonnegativity, since
/// `w'_1 >= 0 >= w'_2`. Nodes where `|w'|` is below `1e-12 max|w'|` are
/// excluded from the measure form; their grid mass is reported.
pub fn quadratic_form_identity(
    op: &OperatorA,
    g1: &[f64],
    g2: &[f64],
    tol: f64,
) -> QuadFormCheck {
    let p = op.front;
    let nz = p.grid.nz();
    let dz = p.grid.dz;
    let wmax = p
        .w1p
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max);
    let floor = 1e-12 * wmax;
    let usable1: Vec<bool> = p.w1p.iter().map(|v| v.abs() > floor).collect();
    let usable2: Vec<bool> = p.w2p.iter().map(|v| v.abs() > floor).collect();
    let mut excluded = 0usize;
    for k in 0..nz {
        if !usable1[k] || !usable2[k] {
            excluded += 1;
        }
    }
    let m = p.kernel.half_nodes as isize;
    let mut measure = 0.0;
    for k in 0..nz {
        if !usable1[k] {
            continue;
        }
        let r1 = g1[k] / p.w1p[k];
        for off in -m..=m {
            let l = k as isize + off;
            if l < 0 || l >= nz as isize {
                continue;
            }
            let l = l as usize;
            if !usable2[l] {
                continue;
            }
            let u = p.kernel.weights[(off + m) as usize];
            let d = r1 - g2[l] / p.w2p[l];
            measure += d * d * u * p.w1p[k] * p.w2p[l];
        }
    }
    measure *= -p.beta * dz * dz;
    let direct = op.quadratic_form(g1, g2);
    QuadFormCheck {
        direct,
        measure_form: measure,
        excluded_mass: excluded as f64 * dz,
        agrees: (direct - measure).abs() <= tol,
    }
}

/// Dense symmetric discretization of the conjugated operator
/// `(A~ u)_1 = u_1 + beta sqrt(w_1) U*(sqrt(w_2) u_2)` (and symmetrically),
/// as a `2 nz x 2 nz` matrix acting on the plain node vector `(u_1, u_2)`.
pub fn build_atilde(front: &FrontProfile) -> Vec<f64> {
    let nz = front.grid.nz();
    let n = 2 * nz;
    let dz = front.grid.dz;
    let m = front.kernel.half_nodes as isize;
    let sw1: Vec<f64> = front.w1.iter().map(|v| v.sqrt()).collect();
    let sw2: Vec<f64> = front.w2.iter().map(|v| v.sqrt()).collect();
    let mut a = vec![0.0f64; n * n];
    for k in 0..n {
        a[k * n + k] = 1.0;
    }
    // Off-diagonal block B[k][l] = beta dz U_{k-l} sqrt(w1[k] w2[l]); the
    // (2,1) block is set to the exact transpose so symmetry is bitwise.
    for k in 0..nz {
        for off in -m..=m {
            let l = k as isize + off;
            if l < 0 || l >= nz as isize {
                continue;
            }
            let l = l as usize;
            let b = front.beta * dz * front.kernel.weights[(off + m) as usize] * sw1[k] * sw2[l];
            a[k * n + (nz + l)] = b;
            a[(nz + l) * n + k] = b;
        }
    }
    a
}

/// Predicted null vector of the conjugated operator: `w'_i / sqrt(w_i)`.
pub fn atilde_null_vector(front: &FrontProfile) -> Vec<f64> {
    let nz = front.grid.nz();
    let mut v = Vec::with_capacity(2 * nz);
    for k in 0..nz {
        v.push(front.w1p[k] / front.w1[k].sqrt());
    }
    for k in 0..nz {
        v.push(front.w2p[k] / front.w2[k].sqrt());
    }
    v
}

/// Low end of the spectrum of the symmetrized second variation.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// The `k` smallest eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Second-smallest eigenvalue (the spectral gap above the near-null one).
    pub gap: f64,
    /// `||A~ v|| / ||v||` for the predicted null vector.
    pub null_residual: f64,
    /// |cosine| between the lowest computed eigenvector and the predicted
    /// null vector.
    pub null_alignment: f64,
}

/// Full symmetric eigensolve of the `build_atilde` matrix; reports the `k`
/// smallest eigenvalues and the null-direction diagnostics.
pub fn spectrum_atilde(front: &FrontProfile, k: usize) -> Result<SpectrumReport> {
    let nz = front.grid.nz();
    let n = 2 * nz;
    let mut a = build_atilde(front);
    let matrix = a.clone();
    let w = eigh_inplace(&mut a, n, true)?;
    let k = k.min(n);
    let eigenvalues: Vec<f64> = w[..k].to_vec();
    let gap = if k >= 2 { w[1] } else { f64::NAN };
    // Predicted null vector diagnostics.
    let pred = atilde_null_vector(front);
    let pred_norm = pred.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut resid = 0.0;
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += matrix[i * n + j] * pred[j];
        }
        resid += acc * acc;
    }
    let null_residual = resid.sqrt() / pred_norm;
    // Lowest eigenvector is column 0 of the overwritten buffer.
    let v0 = &a[..n];
    let dot: f64 = v0.iter().zip(&pred).map(|(x, y)| x * y).sum();
    let v0_norm = v0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let null_alignment = (dot / (v0_norm * pred_norm)).abs();
    Ok(SpectrumReport {
        eigenvalues,
        gap,
        null_residual,
        null_alignment,
    })
}

/// Fourier-symbol spectrum of the constant-coefficient operator obtained by
/// freezing the front at its bulk values.
#[derive(Debug, Clone, Copy)]
pub struct SymbolReport {
    /// `min_xi 1 - beta sqrt(rho+ rho-) |U^(xi)|` style lower edge.
    pub lower_edge: f64,
    pub upper_edge: f64,
    /// `max_xi |U^(xi)|`; equals `U^(0) = 1` for positive kernels.
    pub u_hat_max: f64,
    /// `U^` evaluated at xi = 0 (the discrete kernel mass).
    pub u_hat_zero: f64,
}

/// Scan `U^(xi) = sum_m U_m cos(xi m dz) dz` over a fine xi grid up to the
/// grid Nyquist frequency and return the symbol interval
/// `[1 - beta sqrt(rho+ rho-) max|U^|, 1 + beta sqrt(rho+ rho-) max|U^|]`.
pub fn symbol_spectrum_a0(
    beta: f64,
    rho_plus: f64,
    rho_minus: f64,
    kernel: &Kernel1D,
) -> SymbolReport {
    let dz = kernel.dz;
    let m = kernel.half_nodes as isize;
    let u_hat = |xi: f64| -> f64 {
        let mut acc = 0.0;
        for off in -m..=m {
            acc += kernel.weights[(off + m) as usize] * (xi * off as f64 * dz).cos();
        }
        acc * dz
    };
    let nxi = 4096;
    let xi_max = std::f64::consts::PI / dz;
    let mut max_abs: f64 = 0.0;
    for q in 0..=nxi {
        let xi = xi_max * q as f64 / nxi as f64;
        max_abs = max_abs.max(u_hat(xi).abs());
    }
    let s = beta * (rho_plus * rho_minus).sqrt();
    SymbolReport {
        lower_edge: 1.0 - s * max_abs,
        upper_edge: 1.0 + s * max_abs,
        u_hat_max: max_abs,
        u_hat_zero: u_hat(0.0),
    }
}

/// Empirical lower-bound probe for the derivative estimate
/// `||(Au)'||^2 >= B (alpha^2 + ||Q u~'||^2)` over random smooth fields
/// orthogonal to `w'`. Returns the minimum observed ratio (not a proof).
pub fn probe_aprime_bound(op: &OperatorA, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::invalid("samples", "must be >= 1"));
    }
    let p = op.front;
    let nz = p.grid.nz();
    let dz = p.grid.dz;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wp = (&p.w1p[..], &p.w2p[..]);
    let wp_norm2 = op.inner(wp, wp);
    // Antisymmetric partner and its normalization N = <w~', w~'>.
    let wt1 = p.w1p.clone();
    let wt2: Vec<f64> = p.w2p.iter().map(|v| -v).collect();
    let n_const = op.inner((&wt1, &wt2), (&wt1, &wt2));
    // Q projects off w'' in the vector inner product.
    let wpp1 = derivative(&p.w1p, dz);
    let wpp2 = derivative(&p.w2p, dz);
    let wpp_norm2 = op.inner((&wpp1, &wpp2), (&wpp1, &wpp2));
    let mut min_ratio = f64::INFINITY;
    for _ in 0..samples {
        // Random smooth field: a few Gaussian bumps per species, kept away
        // from the domain boundary.
        let mut u1 = vec![0.0; nz];
        let mut u2 = vec![0.0; nz];
        for u in [&mut u1, &mut u2] {
            let bumps = rng.gen_range(1..=3);
            for _ in 0..bumps {
                let center = rng.gen_range(-0.5..0.5) * p.grid.half_width;
                let width = rng.gen_range(0.5..2.0);
                let amp = rng.gen_range(-1.0..1.0);
                for k in 0..nz {
                    let t = (p.grid.z[k] - center) / width;
                    u[k] += amp * (-0.5 * t * t).exp();
                }
            }
        }
        // Enforce the precondition <u, w'> = 0.
        let proj = op.inner((&u1, &u2), wp) / wp_norm2;
        for k in 0..nz {
            u1[k] -= proj * p.w1p[k];
            u2[k] -= proj * p.w2p[k];
        }
        // Decomposition u = alpha w~' + u~.
        let alpha = op.inner((&u1, &u2), (&wt1, &wt2)) / n_const;
        let ut1: Vec<f64> = (0..nz).map(|k| u1[k] - alpha * wt1[k]).collect();
        let ut2: Vec<f64> = (0..nz).map(|k| u2[k] - alpha * wt2[k]).collect();
        // Q applied to u~'.
        let mut utp1 = derivative(&ut1, dz);
        let mut utp2 = derivative(&ut2, dz);
        let q_proj = op.inner((&utp1, &utp2), (&wpp1, &wpp2)) / wpp_norm2;
        for k in 0..nz {
            utp1[k] -= q_proj * wpp1[k];
            utp2[k] -= q_proj * wpp2[k];
        }
        let denom = alpha * alpha + op.inner((&utp1, &utp2), (&utp1, &utp2));
        if denom < 1e-14 {
            continue;
        }
        let (a1, a2) = op.apply(&u1, &u2);
        let ap1 = derivative(&a1, dz);
        let ap2 = derivative(&a2, dz);
        let num = op.inner((&ap1, &ap2), (&ap1, &ap2));
        min_ratio = min_ratio.min(num / denom);
    }
    if min_ratio.is_infinite() {
        return Err(Error::Numerical("all probe samples degenerate".into()));
    }
    Ok(min_ratio)
}
