//! Stationary front profiles connecting the two segregated bulk phases, and
//! the excess free energy they carry.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    self, build_grid, build_kernel, convolve, derivative, Extension, Grid1D, Kernel1D,
    ModelParams, ScalarField,
};
use crate::thermo;

/// Converged front profile on the truncated domain `[-Z, Z]`.
///
/// Species 1 rises from `rho_minus` on the left to `rho_plus` on the right;
/// species 2 is its mirror image, `w2(z) = w1(-z)`.
#[derive(Debug, Clone)]
pub struct FrontProfile {
    pub grid: Grid1D,
    pub kernel: Kernel1D,
    pub kernel_kind: crate::model::KernelKind,
    pub beta: f64,
    pub n: f64,
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    /// Discrete z-derivatives (second-order stencil).
    pub w1p: Vec<f64>,
    pub w2p: Vec<f64>,
}

impl FrontProfile {
    /// Species-1 profile as a field with its bulk extension.
    pub fn w1_field(&self) -> ScalarField {
        ScalarField::new(self.w1.clone(), Extension::Constant(self.rho_minus, self.rho_plus))
    }

    pub fn w2_field(&self) -> ScalarField {
        ScalarField::new(self.w2.clone(), Extension::Constant(self.rho_plus, self.rho_minus))
    }

    /// Lagrange multiplier of the profile equation `ln w_i + beta U*w_j = C`.
    pub fn multiplier(&self) -> f64 {
        self.rho_plus.ln() + self.beta * self.rho_minus
    }
}

/// Options for the damped fixed-point front solver.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Sup-norm update tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Damping factor in `(0, 1]`; the undamped map is not contractive.
    pub damping: f64,
    /// Accept subcritical parameters (the iteration then collapses to the
    /// constant mixed state, which has no front).
    pub allow_subcritical: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-14,
            max_iter: 5000,
            damping: 0.5,
            allow_subcritical: false,
        }
    }
}

/// Convergence record of a front solve.
#[derive(Debug, Clone, Copy)]
pub struct FrontReport {
    pub iterations: usize,
    pub final_update: f64,
    pub el_residual: f64,
}

/// Solve the profile equation `ln w1 + beta U*w2 = C`, `w2 = mirror(w1)`,
/// with `C = ln rho_plus + beta rho_minus`, by a damped fixed-point sweep:
/// `w1 <- (1-theta) w1 + theta exp(C - beta U*w2)`.
pub fn solve_front(params: &ModelParams, opts: &SolveOptions) -> Result<(FrontProfile, FrontReport)> {
    params.validate()?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::invalid("damping", "must be in (0, 1]"));
    }
    let coex = thermo::coexistence_densities(params.beta, params.n, f64::max(1e-15, opts.tol * 1e-2))?;
    if coex.m == 0.0 && !opts.allow_subcritical {
        return Err(Error::invalid(
            "beta,n",
            format!(
                "subcritical parameters (beta n = {} <= 2): no front exists",
                params.beta * params.n
            ),
        ));
    }
    let grid = build_grid(params)?;
    let kernel = build_kernel(params.kernel_kind, params.kernel_radius, &grid)?;
    let (rho_plus, rho_minus) = (coex.rho_plus, coex.rho_minus);
    let c = rho_plus.ln() + params.beta * rho_minus;
    let nz = grid.nz();

    // Sharp-step initial guess through the exact bulk values.
    let mut w1: Vec<f64> = grid
        .z
        .iter()
        .map(|&z| if z < 0.0 { rho_minus } else { rho_plus })
        .collect();
    let theta = opts.damping;
    let mut final_update = f64::INFINITY;
    let mut iterations = opts.max_iter;
    for it in 0..opts.max_iter {
        let w2 = model::mirror(&w1);
        let conv = convolve(
            &kernel,
            &ScalarField::new(w2, Extension::Constant(rho_plus, rho_minus)),
        );
        let mut update: f64 = 0.0;
        for k in 0..nz {
            let target = (c - params.beta * conv.values[k]).exp();
            let new = (1.0 - theta) * w1[k] + theta * target;
            update = update.max((new - w1[k]).abs());
            w1[k] = new;
        }
        final_update = update;
        if update < opts.tol {
            iterations = it + 1;
            break;
        }
        if it + 1 == opts.max_iter {
            return Err(Error::NonConvergence {
                iterations: opts.max_iter,
                residual: update,
            });
        }
    }
    // The sweep preserves the front symmetry w2(z) = w1(-z) exactly: it is
    // definitional, not an approximate property of the iterate.
    let w2 = model::mirror(&w1);
    let w1p = derivative(&w1, grid.dz);
    let w2p: Vec<f64> = model::mirror(&w1p).iter().map(|v| -v).collect();
    let profile = FrontProfile {
        grid,
        kernel,
        kernel_kind: params.kernel_kind,
        beta: params.beta,
        n: params.n,
        rho_plus,
        rho_minus,
        w1,
        w2,
        w1p,
        w2p,
    };
    let el = el_residual(&profile);
    let report = FrontReport {
        iterations,
        final_update,
        el_residual: el,
    };
    Ok((profile, report))
}

/// Sup-norm residual of the profile equation `ln w_i + beta U*w_j - C`.
pub fn el_residual(p: &FrontProfile) -> f64 {
    let c = p.multiplier();
    let conv2 = convolve(&p.kernel, &p.w2_field());
    let conv1 = convolve(&p.kernel, &p.w1_field());
    let mut r: f64 = 0.0;
    for k in 0..p.grid.nz() {
        r = r.max((p.w1[k].ln() + p.beta * conv2.values[k] - c).abs());
        r = r.max((p.w2[k].ln() + p.beta * conv1.values[k] - c).abs());
    }
    r
}

/// l2 residual (grid-weighted) of the differentiated profile equation
/// `w1'/w1 + beta U*w2' = 0`, with the derivative extended by zero.
pub fn elp_residual(p: &FrontProfile) -> f64 {
    let conv = convolve(&p.kernel, &ScalarField::new(p.w2p.clone(), Extension::Zero));
    let mut acc = 0.0;
    for k in 0..p.grid.nz() {
        let r = p.w1p[k] / p.w1[k] + p.beta * conv.values[k];
        acc += r * r * p.grid.dz;
    }
    acc.sqrt()
}

/// Excess free energy of a density pair over the segregated bulk state,
/// split into the local entropy part and the nonlocal interaction part.
#[derive(Debug, Clone, Copy)]
pub struct ExcessFreeEnergy {
    pub local: f64,
    pub interaction: f64,
    pub total: f64,
}

/// Excess free energy of `(rho1, rho2)` over the homogeneous segregated
/// reference `(rho_plus, rho_minus)`. The cross term is taken in its
/// difference form, whose integrand
///
/// `(beta/2) int U(z - z') [rho1(z) - rho1(z')] [rho2(z') - rho2(z)] dz'`
///
/// vanishes identically on constants, so truncating the z-integral to
/// `[-Z, Z]` only drops exponentially small tail contributions. The fields
/// are extended by their bulk constants.
pub fn excess_free_energy(
    p: &FrontProfile,
    rho1: &ScalarField,
    rho2: &ScalarField,
) -> Result<ExcessFreeEnergy> {
    let nz = p.grid.nz();
    if rho1.values.len() != nz || rho2.values.len() != nz {
        return Err(Error::invalid("rho", "length mismatch with the grid"));
    }
    let dz = p.grid.dz;
    let beta = p.beta;
    let f_ref = thermo::eval_double_well(beta, p.rho_plus, p.rho_minus)?;
    let mut local = 0.0;
    for k in 0..nz {
        local += thermo::eval_double_well(beta, rho1.values[k], rho2.values[k])? - f_ref;
    }
    local *= dz;
    // With U of unit mass the inner integral collapses to
    //   (beta/2) [rho1 (U*rho2) + rho2 (U*rho1)] - beta rho1 rho2.
    let u2 = convolve(&p.kernel, rho2);
    let u1 = convolve(&p.kernel, rho1);
    let mut inter = 0.0;
    for k in 0..nz {
        inter += 0.5 * beta * (rho1.values[k] * u2.values[k] + rho2.values[k] * u1.values[k])
            - beta * rho1.values[k] * rho2.values[k];
    }
    inter *= dz;
    Ok(ExcessFreeEnergy {
        local,
        interaction: inter,
        total: local + inter,
    })
}

/// Exponential decay rate of the front tail, fitted from
/// `ln |w1 - rho_plus|` on the window `[Z/2, Z - R]` by least squares.
pub fn tail_decay_rate(p: &FrontProfile) -> Result<f64> {
    let lo = 0.5 * p.grid.half_width;
    let hi = p.grid.half_width - p.kernel.radius;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..p.grid.nz() {
        let z = p.grid.z[k];
        if z >= lo && z <= hi {
            let d = (p.rho_plus - p.w1[k]).abs();
            if d > 1e-300 {
                xs.push(z);
                ys.push(d.ln());
            }
        }
    }
    if xs.len() < 4 {
        return Err(Error::Numerical(
            "tail fit window has fewer than 4 usable nodes".into(),
        ));
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(-slope)
}

/// The sharp-step comparison pair on the profile's grid: species 1 jumps
/// from `rho_minus` to `rho_plus` at z = 0 (midpoint value at the jump node,
/// preserving the centering), species 2 is its mirror.
pub fn sharp_step(p: &FrontProfile) -> (ScalarField, ScalarField) {
    let mid = p.grid.mid();
    let mut step1 = vec![p.rho_minus; p.grid.nz()];
    for k in mid + 1..p.grid.nz() {
        step1[k] = p.rho_plus;
    }
    step1[mid] = 0.5 * (p.rho_plus + p.rho_minus);
    let step2 = model::mirror(&step1);
    (
        ScalarField::new(step1, Extension::Constant(p.rho_minus, p.rho_plus)),
        ScalarField::new(step2, Extension::Constant(p.rho_plus, p.rho_minus)),
    )
}

/// Write a profile and its solve report to a structured text file; floats
/// are printed with 17 significant digits so the round trip is bit-exact.
pub fn save_front(p: &FrontProfile, report: &FrontReport, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# front profile")?;
    writeln!(f, "beta {:.16e}", p.beta)?;
    writeln!(f, "n {:.16e}", p.n)?;
    writeln!(f, "kernel {}", p.kernel_kind.name())?;
    writeln!(f, "radius {:.16e}", p.kernel.radius)?;
    writeln!(f, "half_width {:.16e}", p.grid.half_width)?;
    writeln!(f, "nz {}", p.grid.nz())?;
    writeln!(f, "rho_plus {:.16e}", p.rho_plus)?;
    writeln!(f, "rho_minus {:.16e}", p.rho_minus)?;
    writeln!(f, "c {:.16e}", p.multiplier())?;
    writeln!(f, "iterations {}", report.iterations)?;
    writeln!(f, "final_update {:.16e}", report.final_update)?;
    writeln!(f, "el_residual {:.16e}", report.el_residual)?;
    writeln!(f, "# z w1 w2 w1p w2p")?;
    for k in 0..p.grid.nz() {
        writeln!(
            f,
            "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
            p.grid.z[k], p.w1[k], p.w2[k], p.w1p[k], p.w2p[k]
        )?;
    }
    Ok(())
}

/// Read a profile written by [`save_front`].
pub fn load_front(path: &Path) -> Result<(FrontProfile, FrontReport)> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut beta = None;
    let mut n_total = None;
    let mut kind = None;
    let mut radius = None;
    let mut half_width = None;
    let mut nz = None;
    let mut rho_plus = None;
    let mut rho_minus = None;
    let mut c_saved = None;
    let mut iterations = None;
    let mut final_update = None;
    let mut el_saved = None;
    let mut w1: Vec<f64> = Vec::new();
    let mut w2: Vec<f64> = Vec::new();
    let mut w1p: Vec<f64> = Vec::new();
    let mut w2p: Vec<f64> = Vec::new();
    for line in f.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap();
        let parse_f = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| Error::Parse(format!("missing value for `{key}`")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad float for `{key}`: {e}")))
        };
        match key {
            "beta" => beta = Some(parse_f(parts.next())?),
            "n" => n_total = Some(parse_f(parts.next())?),
            "kernel" => {
                kind = Some(crate::model::KernelKind::parse(
                    parts
                        .next()
                        .ok_or_else(|| Error::Parse("missing kernel kind".into()))?,
                )?)
            }
            "radius" => radius = Some(parse_f(parts.next())?),
            "half_width" => half_width = Some(parse_f(parts.next())?),
            "nz" => {
                nz = Some(
                    parts
                        .next()
                        .ok_or_else(|| Error::Parse("missing nz".into()))?
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("bad nz: {e}")))?,
                )
            }
            "rho_plus" => rho_plus = Some(parse_f(parts.next())?),
            "rho_minus" => rho_minus = Some(parse_f(parts.next())?),
            "c" => c_saved = Some(parse_f(parts.next())?),
            "iterations" => {
                iterations = Some(
                    parts
                        .next()
                        .ok_or_else(|| Error::Parse("missing iterations".into()))?
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("bad iterations: {e}")))?,
                )
            }
            "final_update" => final_update = Some(parse_f(parts.next())?),
            "el_residual" => el_saved = Some(parse_f(parts.next())?),
            _ => {
                // Data row: "z w1 w2 w1p w2p".
                let z: f64 = key
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad data row: {e}")))?;
                let _ = z;
                w1.push(parse_f(parts.next())?);
                w2.push(parse_f(parts.next())?);
                w1p.push(parse_f(parts.next())?);
                w2p.push(parse_f(parts.next())?);
            }
        }
    }
    let missing = |what: &str| Error::Parse(format!("missing header field `{what}`"));
    let beta = beta.ok_or_else(|| missing("beta"))?;
    let n_total = n_total.ok_or_else(|| missing("n"))?;
    let kind = kind.ok_or_else(|| missing("kernel"))?;
    let radius = radius.ok_or_else(|| missing("radius"))?;
    let half_width = half_width.ok_or_else(|| missing("half_width"))?;
    let nz = nz.ok_or_else(|| missing("nz"))?;
    let rho_plus = rho_plus.ok_or_else(|| missing("rho_plus"))?;
    let rho_minus = rho_minus.ok_or_else(|| missing("rho_minus"))?;
    let iterations = iterations.ok_or_else(|| missing("iterations"))?;
    let final_update = final_update.ok_or_else(|| missing("final_update"))?;
    let el_saved = el_saved.ok_or_else(|| missing("el_residual"))?;
    if w1.len() != nz {
        return Err(Error::Parse(format!(
            "expected {nz} data rows, found {}",
            w1.len()
        )));
    }
    let params = ModelParams {
        beta,
        n: n_total,
        kernel_kind: kind,
        kernel_radius: radius,
        half_width,
        nz,
        ..Default::default()
    };
    let grid = build_grid(&params)?;
    let kernel = build_kernel(kind, radius, &grid)?;
    let profile = FrontProfile {
        grid,
        kernel,
        beta,
        n: n_total,
        rho_plus,
        rho_minus,
        w1,
        w2,
        w1p,
        w2p,
        kernel_kind: kind,
    };
    let c_saved = c_saved.ok_or_else(|| missing("c"))?;
    if (c_saved - profile.multiplier()).abs() > 1e-12 {
        return Err(Error::Parse(format!(
            "stored multiplier {c_saved} disagrees with ln(rho_plus) + beta rho_minus"
        )));
    }
    let report = FrontReport {
        iterations,
        final_update,
        el_residual: el_saved,
    };
    Ok((profile, report))
}
