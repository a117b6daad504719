//! Shared domain types: model parameters, the symmetric z-grid, the discretized
//! repulsive kernel, and the convolution primitive used by every other module.

use crate::error::{Error, Result};

/// Shape of the repulsive potential `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `U(s) ∝ (1 - (s/R)^2)^2` on `|s| <= R`. C1 at the support edge,
    /// closed-form moments.
    Biweight,
    /// `U(s) ∝ exp(-1/(1-(s/R)^2))` on `|s| < R`. C-infinity.
    Bump,
}

impl KernelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "biweight" => Ok(KernelKind::Biweight),
            "bump" => Ok(KernelKind::Bump),
            other => Err(Error::invalid(
                "kernel",
                format!("unknown kernel `{other}` (expected `biweight` or `bump`)"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Biweight => "biweight",
            KernelKind::Bump => "bump",
        }
    }

    fn shape(&self, u: f64) -> f64 {
        let u2 = u * u;
        match self {
            KernelKind::Biweight => {
                if u2 >= 1.0 {
                    0.0
                } else {
                    let t = 1.0 - u2;
                    t * t
                }
            }
            KernelKind::Bump => {
                if u2 >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - u2)).exp()
                }
            }
        }
    }

    /// d shape / d u (analytic; no finite differencing).
    fn shape_deriv(&self, u: f64) -> f64 {
        let u2 = u * u;
        match self {
            KernelKind::Biweight => {
                if u2 >= 1.0 {
                    0.0
                } else {
                    -4.0 * u * (1.0 - u2)
                }
            }
            KernelKind::Bump => {
                if u2 >= 1.0 {
                    0.0
                } else {
                    let t = 1.0 - u2;
                    (-1.0 / t).exp() * (-2.0 * u / (t * t))
                }
            }
        }
    }
}

/// Physical and discretization parameters of the two-species mixture.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Inverse temperature beta.
    pub beta: f64,
    /// Mean total density n. The supercritical regime is `beta * n > 2`.
    pub n: f64,
    pub kernel_kind: KernelKind,
    /// Support radius R of the repulsive kernel.
    pub kernel_radius: f64,
    /// The z-domain is `[-half_width, half_width]`.
    pub half_width: f64,
    /// Number of grid nodes (must be odd so z = 0 is a node).
    pub nz: usize,
    /// Velocity truncation order K of the Hermite expansion.
    pub hermite_order: usize,
    /// Time step for the kinetic integrator.
    pub dt: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            beta: 1.25,
            n: 2.0,
            kernel_kind: KernelKind::Biweight,
            kernel_radius: 1.0,
            half_width: 12.0,
            nz: 1025,
            hermite_order: 16,
            dt: 2.5e-3,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::invalid("beta", "must be > 0"));
        }
        if !(self.n > 0.0) {
            return Err(Error::invalid("n", "must be > 0"));
        }
        if !(self.kernel_radius > 0.0) {
            return Err(Error::invalid("radius", "must be > 0"));
        }
        if self.half_width < 10.0 * self.kernel_radius {
            return Err(Error::invalid(
                "domain",
                format!(
                    "half width {} must be >= 10 * kernel radius {} to resolve the front tails",
                    self.half_width, self.kernel_radius
                ),
            ));
        }
        if self.nz < 16 {
            return Err(Error::invalid("nz", "must be >= 16"));
        }
        if self.nz % 2 == 0 {
            return Err(Error::invalid(
                "nz",
                format!("must be odd so z = 0 is a node (got {})", self.nz),
            ));
        }
        if self.hermite_order < 2 {
            return Err(Error::invalid("hermite_order", "must be >= 2"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        Ok(())
    }

    pub fn dz(&self) -> f64 {
        2.0 * self.half_width / (self.nz - 1) as f64
    }
}

/// Uniform symmetric grid on `[-Z, Z]` with z = 0 as the midpoint node.
#[derive(Debug, Clone)]
pub struct Grid1D {
    pub z: Vec<f64>,
    pub dz: f64,
    pub half_width: f64,
}

impl Grid1D {
    pub fn nz(&self) -> usize {
        self.z.len()
    }

    pub fn mid(&self) -> usize {
        (self.z.len() - 1) / 2
    }

    /// Index of the node mirrored across z = 0.
    pub fn mirror(&self, k: usize) -> usize {
        self.z.len() - 1 - k
    }
}

/// `build_grid` rejects even `nz`: the centering condition and every symmetry
/// check is evaluated at the z = 0 node.
pub fn build_grid(params: &ModelParams) -> Result<Grid1D> {
    if params.nz % 2 == 0 {
        return Err(Error::invalid(
            "nz",
            format!("must be odd so z = 0 is a node (got {})", params.nz),
        ));
    }
    let nz = params.nz;
    let dz = params.dz();
    let mid = (nz - 1) / 2;
    // Build as integer multiples of dz so that z[k] == -z[nz-1-k] exactly.
    let z = (0..nz)
        .map(|k| (k as isize - mid as isize) as f64 * dz)
        .collect();
    Ok(Grid1D {
        z,
        dz,
        half_width: params.half_width,
    })
}

/// Discretized repulsive kernel with exactly renormalized weights.
///
/// `weights[m + half_nodes]` samples U at offset `m * dz`; the discrete mass
/// `sum weights * dz` is exactly 1 so that `U * 1 = 1` holds to roundoff.
#[derive(Debug, Clone)]
pub struct Kernel1D {
    pub radius: f64,
    pub dz: f64,
    pub half_nodes: usize,
    pub weights: Vec<f64>,
    /// Samples of dU/ds on the same offsets, scaled by the same normalization.
    pub deriv_weights: Vec<f64>,
    pub discrete_mass: f64,
}

impl Kernel1D {
    pub fn offset(&self, m: isize) -> f64 {
        m as f64 * self.dz
    }
}

pub fn build_kernel(kind: KernelKind, radius: f64, grid: &Grid1D) -> Result<Kernel1D> {
    let dz = grid.dz;
    if radius < 2.0 * dz {
        return Err(Error::invalid(
            "radius",
            format!("kernel under-resolved: radius {radius} < 2 dz = {}", 2.0 * dz),
        ));
    }
    let half_nodes = (radius / dz + 1e-12).floor() as usize;
    let m = half_nodes as isize;
    let mut weights: Vec<f64> = (-m..=m)
        .map(|i| kind.shape(i as f64 * dz / radius))
        .collect();
    let raw_mass: f64 = weights.iter().sum::<f64>() * dz;
    let scale = 1.0 / raw_mass;
    for w in &mut weights {
        *w *= scale;
    }
    let deriv_weights: Vec<f64> = (-m..=m)
        .map(|i| kind.shape_deriv(i as f64 * dz / radius) / radius * scale)
        .collect();
    let discrete_mass = weights.iter().sum::<f64>() * dz;
    Ok(Kernel1D {
        radius,
        dz,
        half_nodes,
        weights,
        deriv_weights,
        discrete_mass,
    })
}

/// Values requested outside `[-Z, Z]` by the convolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extension {
    /// `(left, right)` constants; used for front-like fields.
    Constant(f64, f64),
    /// Zero outside the domain; used for perturbations.
    Zero,
}

/// A grid function together with its declared behavior outside the domain.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub extension: Extension,
}

impl ScalarField {
    pub fn new(values: Vec<f64>, extension: Extension) -> Self {
        ScalarField { values, extension }
    }

    pub fn zeros(nz: usize) -> Self {
        ScalarField {
            values: vec![0.0; nz],
            extension: Extension::Zero,
        }
    }

    /// Value at a (possibly out-of-range) node index.
    #[inline]
    pub fn value(&self, idx: isize) -> f64 {
        let n = self.values.len() as isize;
        if idx < 0 {
            match self.extension {
                Extension::Constant(left, _) => left,
                Extension::Zero => 0.0,
            }
        } else if idx >= n {
            match self.extension {
                Extension::Constant(_, right) => right,
                Extension::Zero => 0.0,
            }
        } else {
            self.values[idx as usize]
        }
    }
}

/// Discrete convolution `(U * f)(z_k) = sum_m U_m f(z_k - m dz) dz`.
pub fn convolve(kernel: &Kernel1D, field: &ScalarField) -> ScalarField {
    convolve_with(kernel, &kernel.weights, field)
}

/// `(dU/dz * f)`, i.e. the z-derivative of the convolution computed with the
/// analytically differentiated kernel samples.
pub fn convolve_derivative(kernel: &Kernel1D, field: &ScalarField) -> ScalarField {
    let mut out = convolve_with(kernel, &kernel.deriv_weights, field);
    // The derivative of a field with constant tails decays to zero.
    if let Extension::Constant(_, _) = field.extension {
        out.extension = Extension::Zero;
    }
    out
}

fn convolve_with(kernel: &Kernel1D, weights: &[f64], field: &ScalarField) -> ScalarField {
    let n = field.values.len();
    let m = kernel.half_nodes as isize;
    let dz = kernel.dz;
    let mut out = vec![0.0; n];
    for (k, o) in out.iter_mut().enumerate() {
        let k = k as isize;
        let mut acc = 0.0;
        // Interior fast path: no extension lookups needed.
        if k - m >= 0 && k + m < n as isize {
            for (wi, w) in weights.iter().enumerate() {
                let off = wi as isize - m;
                acc += w * field.values[(k - off) as usize];
            }
        } else {
            for (wi, w) in weights.iter().enumerate() {
                let off = wi as isize - m;
                acc += w * field.value(k - off);
            }
        }
        *o = acc * dz;
    }
    ScalarField {
        values: out,
        extension: field.extension,
    }
}

/// Mirror a grid vector across z = 0.
pub fn mirror(values: &[f64]) -> Vec<f64> {
    values.iter().rev().copied().collect()
}

/// Second-order derivative: centered in the interior, one-sided second-order
/// at the two boundary nodes. Annihilates constants exactly.
pub fn derivative(values: &[f64], dz: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 3);
    let mut out = vec![0.0; n];
    out[0] = (-1.5 * values[0] + 2.0 * values[1] - 0.5 * values[2]) / dz;
    for k in 1..n - 1 {
        out[k] = (values[k + 1] - values[k - 1]) / (2.0 * dz);
    }
    out[n - 1] = (1.5 * values[n - 1] - 2.0 * values[n - 2] + 0.5 * values[n - 3]) / dz;
    out
}

/// Fourth-order derivative: five-point centered in the interior, one-sided
/// fourth-order stencils at the four nodes nearest the boundary.
pub fn derivative4(values: &[f64], dz: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 6);
    let mut out = vec![0.0; n];
    let c = 1.0 / (12.0 * dz);
    // One-sided coefficients for nodes 0 and 1 (and mirrored at the far end).
    out[0] = (-25.0 * values[0] + 48.0 * values[1] - 36.0 * values[2] + 16.0 * values[3]
        - 3.0 * values[4])
        * c;
    out[1] = (-3.0 * values[0] - 10.0 * values[1] + 18.0 * values[2] - 6.0 * values[3]
        + values[4])
        * c;
    for k in 2..n - 2 {
        out[k] =
            (values[k - 2] - 8.0 * values[k - 1] + 8.0 * values[k + 1] - values[k + 2]) * c;
    }
    out[n - 2] = (3.0 * values[n - 1] + 10.0 * values[n - 2] - 18.0 * values[n - 3]
        + 6.0 * values[n - 4]
        - values[n - 5])
        * c;
    out[n - 1] = (25.0 * values[n - 1] - 48.0 * values[n - 2] + 36.0 * values[n - 3]
        - 16.0 * values[n - 4]
        + 3.0 * values[n - 5])
        * c;
    out
}

/// Negative transpose of [`derivative`]. Pairing the streaming terms of the
/// moment system as `(D, -D^T)` makes them exactly mass-conservative and
/// l2-energy-neutral: every row of `D` sums to zero, so every column of
/// `-D^T` does too. The boundary rows here are not consistent derivative
/// stencils; this operator acts on fields that vanish at the walls.
pub fn derivative_adjoint(values: &[f64], dz: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 6);
    let mut out = vec![0.0; n];
    // Rows of -D^T where D is `derivative`.
    out[0] = (1.5 * values[0] + 0.5 * values[1]) / dz;
    out[1] = (-2.0 * values[0] + 0.5 * values[2]) / dz;
    out[2] = (0.5 * values[0] - 0.5 * values[1] + 0.5 * values[3]) / dz;
    for k in 3..n - 3 {
        out[k] = (values[k + 1] - values[k - 1]) / (2.0 * dz);
    }
    out[n - 3] = (-0.5 * values[n - 1] + 0.5 * values[n - 2] - 0.5 * values[n - 4]) / dz;
    out[n - 2] = (2.0 * values[n - 1] - 0.5 * values[n - 3]) / dz;
    out[n - 1] = (-1.5 * values[n - 1] - 0.5 * values[n - 2]) / dz;
    out
}
