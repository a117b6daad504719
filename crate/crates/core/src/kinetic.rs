//! Hermite-moment time integration of the kinetic perturbation around the
//! front, with the diagnostics (norms, free energy, conservation and
//! symmetry monitors) used to verify decay.
//!
//! Velocity space is one-dimensional; the perturbation of species i is
//! `h_i(z, v, t) = sum_k c_{i,k}(z, t) psi_k(v)` with
//! `psi_k = M He_k(sqrt(beta) v)/sqrt(k!)`.

use crate::error::{Error, Result};
use crate::front::FrontProfile;
use crate::hermite::{gauss_hermite, hermite_values, max_hermite_root};
use crate::model::{
    convolve, convolve_derivative, derivative, derivative4, derivative_adjoint, Extension,
    ScalarField,
};

/// Hermite coefficients of both species at one instant.
///
/// Layout: `coeffs[(i (K+1) + k) nz + z]` for species `i`, mode `k`, node `z`.
/// Mode 0 of species i is the density perturbation `a_i(z)`.
#[derive(Debug, Clone)]
pub struct KineticState {
    pub coeffs: Vec<f64>,
    pub order: usize,
    pub nz: usize,
    pub time: f64,
}

impl KineticState {
    pub fn zeros(order: usize, nz: usize) -> Self {
        KineticState {
            coeffs: vec![0.0; 2 * (order + 1) * nz],
            order,
            nz,
            time: 0.0,
        }
    }

    #[inline]
    pub fn idx(&self, species: usize, mode: usize, node: usize) -> usize {
        (species * (self.order + 1) + mode) * self.nz + node
    }

    pub fn mode(&self, species: usize, mode: usize) -> &[f64] {
        let base = (species * (self.order + 1) + mode) * self.nz;
        &self.coeffs[base..base + self.nz]
    }

    pub fn mode_mut(&mut self, species: usize, mode: usize) -> &mut [f64] {
        let base = (species * (self.order + 1) + mode) * self.nz;
        &mut self.coeffs[base..base + self.nz]
    }

    /// Density perturbation `a_i` (mode 0) of species i.
    pub fn density(&self, species: usize) -> &[f64] {
        self.mode(species, 0)
    }

    /// The reflected partner state: `c_{1,k}(z) -> (-1)^k c_{2,k}(-z)`.
    /// An involution; symmetric states are its fixed points.
    pub fn reflect(&self) -> KineticState {
        let mut out = self.clone();
        for k in 0..=self.order {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            for z in 0..self.nz {
                let zr = self.nz - 1 - z;
                let i0 = self.idx(0, k, z);
                let i1 = self.idx(1, k, z);
                out.coeffs[i0] = sign * self.coeffs[self.idx(1, k, zr)];
                out.coeffs[i1] = sign * self.coeffs[self.idx(0, k, zr)];
            }
        }
        out
    }

    /// Sup-norm distance to the reflected partner.
    pub fn symmetry_error(&self) -> f64 {
        let r = self.reflect();
        self.coeffs
            .iter()
            .zip(&r.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Polynomial confinement weight `z_gamma(z) = (1 + z^2)^gamma`.
#[derive(Debug, Clone)]
pub struct GammaWeight {
    pub gamma: f64,
    pub values: Vec<f64>,
}

impl GammaWeight {
    pub fn new(gamma: f64, z: &[f64]) -> Self {
        GammaWeight {
            gamma,
            values: z.iter().map(|&z| (1.0 + z * z).powf(gamma)).collect(),
        }
    }
}

/// Initial-data families for the perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    /// Zero-mean Gaussian density bump in mode 0 (and its mirror partner).
    GaussianDensity,
    /// Antisymmetric mode-1 (current) perturbation.
    Mode1Current,
}

/// Integrator for the moment system, tied to a converged front.
pub struct KineticSim<'a> {
    pub front: &'a FrontProfile,
    pub order: usize,
    /// Linear Vlasov force per species: `U * w'_j` (j the other species).
    pub lin_force: [Vec<f64>; 2],
    /// Fastest Hermite characteristic speed, largest root of `He_{K+1}`
    /// divided by `sqrt(beta)`.
    pub v_max: f64,
    /// Re-impose the reflection symmetry after every step.
    pub enforce_symmetry: bool,
}

impl<'a> KineticSim<'a> {
    pub fn new(front: &'a FrontProfile, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::invalid("hermite_order", "must be >= 2"));
        }
        let w2p = ScalarField::new(front.w2p.clone(), Extension::Zero);
        let w1p = ScalarField::new(front.w1p.clone(), Extension::Zero);
        let lin_force_1 = convolve(&front.kernel, &w2p).values;
        let lin_force_2 = convolve(&front.kernel, &w1p).values;
        let v_max = max_hermite_root(order + 1)? / front.beta.sqrt();
        Ok(KineticSim {
            front,
            order,
            lin_force: [lin_force_1, lin_force_2],
            v_max,
            enforce_symmetry: false,
        })
    }

    /// Largest stable time step accepted by [`step_rk4`].
    pub fn cfl_limit(&self) -> f64 {
        2.0 * self.front.grid.dz / self.v_max
    }

    pub fn init_perturbation(&self, kind: PerturbationKind, amplitude: f64) -> Result<KineticState> {
        if amplitude < 0.0 {
            return Err(Error::invalid("amplitude", "must be >= 0"));
        }
        let nz = self.front.grid.nz();
        let mut state = KineticState::zeros(self.order, nz);
        match kind {
            PerturbationKind::GaussianDensity => {
                // Zero-mass bump as a difference of two Gaussians (widths 1
                // and 2): unlike subtracting a constant, this keeps the data
                // exponentially small at the walls, where a uniform offset
                // would excite boundary modes.
                let g1: Vec<f64> = self
                    .front
                    .grid
                    .z
                    .iter()
                    .map(|&z| (-0.5 * z * z).exp())
                    .collect();
                let g2: Vec<f64> = self
                    .front
                    .grid
                    .z
                    .iter()
                    .map(|&z| (-0.125 * z * z).exp())
                    .collect();
                let ratio = g1.iter().sum::<f64>() / g2.iter().sum::<f64>();
                let mut a1: Vec<f64> = g1
                    .iter()
                    .zip(&g2)
                    .map(|(&a, &b)| amplitude * (a - ratio * b))
                    .collect();
                // Remove the last-bit rounding residue of the grid mass.
                let mean = a1.iter().sum::<f64>() / nz as f64;
                for v in &mut a1 {
                    *v -= mean;
                }
                for z in 0..nz {
                    let i0 = state.idx(0, 0, z);
                    state.coeffs[i0] = a1[z];
                    let i1 = state.idx(1, 0, z);
                    state.coeffs[i1] = a1[nz - 1 - z];
                }
            }
            PerturbationKind::Mode1Current => {
                for z in 0..nz {
                    let zv = self.front.grid.z[z];
                    let c = amplitude * zv * (-0.5 * zv * zv).exp();
                    let i0 = state.idx(0, 1, z);
                    state.coeffs[i0] = c;
                    // c_{2,1}(z) = -c_{1,1}(-z); the profile is odd in z, so
                    // this equals c_{1,1}(z) here.
                    let zr = nz - 1 - z;
                    let zrv = self.front.grid.z[zr];
                    let i1 = state.idx(1, 1, z);
                    state.coeffs[i1] = -amplitude * zrv * (-0.5 * zrv * zrv).exp();
                }
            }
        }
        Ok(state)
    }

    /// Wrap user-provided coefficients, rejecting asymmetric data when
    /// symmetry enforcement is on.
    pub fn custom_state(&self, coeffs: Vec<f64>) -> Result<KineticState> {
        let nz = self.front.grid.nz();
        if coeffs.len() != 2 * (self.order + 1) * nz {
            return Err(Error::invalid("coeffs", "length mismatch with grid and order"));
        }
        let state = KineticState {
            coeffs,
            order: self.order,
            nz,
            time: 0.0,
        };
        if self.enforce_symmetry {
            let err = state.symmetry_error();
            if err > 1e-13 {
                return Err(Error::invalid(
                    "coeffs",
                    format!("violates the reflection symmetry by {err:.3e}"),
                ));
            }
        }
        Ok(state)
    }

    /// Time derivative of the coefficient array.
    ///
    /// Per species i (j the other) and mode k:
    /// streaming couples k with k -/+ 1 through the skew pair `(D, -D^T)`,
    /// the Vlasov force (linear part from the front, nonlinear part from the
    /// perturbation density) raises the mode index, the Fokker-Planck
    /// operator damps mode k at rate `beta k`, and the perturbation force
    /// acting on the front Maxwellian sources mode 1.
    pub fn rhs(&self, state: &KineticState) -> Vec<f64> {
        let nz = state.nz;
        let kk = self.order;
        let beta = self.front.beta;
        let sqrt_beta = beta.sqrt();
        let dz = self.front.grid.dz;
        let mut out = vec![0.0; state.coeffs.len()];
        // Nonlinear force field per species: (dU/dz * a_j), zero extension.
        let g = [
            convolve_derivative(
                &self.front.kernel,
                &ScalarField::new(state.density(1).to_vec(), Extension::Zero),
            )
            .values,
            convolve_derivative(
                &self.front.kernel,
                &ScalarField::new(state.density(0).to_vec(), Extension::Zero),
            )
            .values,
        ];
        let w = [&self.front.w1, &self.front.w2];
        for i in 0..2 {
            for k in 0..=kk {
                let base = (i * (kk + 1) + k) * nz;
                // Streaming: -(1/sqrt(beta)) [sqrt(k) D c_{k-1}
                //                             + sqrt(k+1) (-D^T) c_{k+1}].
                if k > 0 {
                    let d = derivative(state.mode(i, k - 1), dz);
                    let c = -(k as f64).sqrt() / sqrt_beta;
                    for z in 0..nz {
                        out[base + z] += c * d[z];
                    }
                }
                if k < kk {
                    let d = derivative_adjoint(state.mode(i, k + 1), dz);
                    let c = -((k + 1) as f64).sqrt() / sqrt_beta;
                    for z in 0..nz {
                        out[base + z] += c * d[z];
                    }
                }
                // Force (mode raising): -sqrt(beta) sqrt(k) E_i c_{k-1} with
                // E_i = U*w'_j + dU/dz * a_j.
                if k > 0 {
                    let c = -sqrt_beta * (k as f64).sqrt();
                    let lower = state.mode(i, k - 1);
                    for z in 0..nz {
                        let e = self.lin_force[i][z] + g[i][z];
                        out[base + z] += c * e * lower[z];
                    }
                }
                // Fokker-Planck damping.
                if k > 0 {
                    let c = -beta * k as f64;
                    let own = state.mode(i, k);
                    for z in 0..nz {
                        out[base + z] += c * own[z];
                    }
                }
                // Source from the force acting on the front background,
                // injected into mode 1: -sqrt(beta) w_i (dU/dz * a_j).
                if k == 1 {
                    for z in 0..nz {
                        out[base + z] += -sqrt_beta * w[i][z] * g[i][z];
                    }
                }
            }
        }
        out
    }

    /// Classical RK4 step. `dt` may be negative (used by reversibility
    /// tests); the CFL check applies to its magnitude.
    pub fn step_rk4(&self, state: &KineticState, dt: f64) -> Result<KineticState> {
        let limit = self.cfl_limit();
        if dt.abs() > limit {
            return Err(Error::invalid(
                "dt",
                format!("|dt| = {} exceeds the CFL bound {limit:.6e}", dt.abs()),
            ));
        }
        let n = state.coeffs.len();
        let k1 = self.rhs(state);
        let mut s2 = state.clone();
        for z in 0..n {
            s2.coeffs[z] = state.coeffs[z] + 0.5 * dt * k1[z];
        }
        let k2 = self.rhs(&s2);
        let mut s3 = state.clone();
        for z in 0..n {
            s3.coeffs[z] = state.coeffs[z] + 0.5 * dt * k2[z];
        }
        let k3 = self.rhs(&s3);
        let mut s4 = state.clone();
        for z in 0..n {
            s4.coeffs[z] = state.coeffs[z] + dt * k3[z];
        }
        let k4 = self.rhs(&s4);
        let mut out = state.clone();
        for z in 0..n {
            out.coeffs[z] =
                state.coeffs[z] + dt / 6.0 * (k1[z] + 2.0 * k2[z] + 2.0 * k3[z] + k4[z]);
        }
        out.time = state.time + dt;
        if self.enforce_symmetry {
            let r = out.reflect();
            for z in 0..n {
                out.coeffs[z] = 0.5 * (out.coeffs[z] + r.coeffs[z]);
            }
        }
        Ok(out)
    }

    /// Weighted kinetic norm `||z_gamma h||_M`:
    /// `sqrt(sum_i sum_k sum_z dz z_gamma^2 c^2 / w_i)`.
    pub fn norm_m(&self, state: &KineticState, weight: Option<&GammaWeight>) -> f64 {
        let w = [&self.front.w1, &self.front.w2];
        let dz = self.front.grid.dz;
        let mut acc = 0.0;
        for i in 0..2 {
            for k in 0..=self.order {
                let c = state.mode(i, k);
                for z in 0..state.nz {
                    let zg = weight.map_or(1.0, |g| g.values[z]);
                    acc += zg * zg * c[z] * c[z] / w[i][z];
                }
            }
        }
        (acc * dz).sqrt()
    }

    /// Same norm applied to an arbitrary coefficient array (e.g. a rhs).
    pub fn norm_m_of(&self, coeffs: &[f64], weight: Option<&GammaWeight>) -> f64 {
        let state = KineticState {
            coeffs: coeffs.to_vec(),
            order: self.order,
            nz: self.front.grid.nz(),
            time: 0.0,
        };
        self.norm_m(&state, weight)
    }

    /// Dissipation norm: modes `k >= 1` weighted by `1 + beta (k+1)` (the
    /// closed form of `||(I-P)g||_M^2 + ||d_v (I-P)g||_M^2`).
    pub fn norm_d(&self, state: &KineticState, weight: Option<&GammaWeight>) -> f64 {
        let w = [&self.front.w1, &self.front.w2];
        let beta = self.front.beta;
        let dz = self.front.grid.dz;
        let mut acc = 0.0;
        for i in 0..2 {
            for k in 1..=self.order {
                let c = state.mode(i, k);
                let factor = 1.0 + beta * (k + 1) as f64;
                for z in 0..state.nz {
                    let zg = weight.map_or(1.0, |g| g.values[z]);
                    acc += factor * zg * zg * c[z] * c[z] / w[i][z];
                }
            }
        }
        (acc * dz).sqrt()
    }

    /// Grid mass `sum dz c_{i,0}` of each species; conserved by the flow.
    pub fn masses(&self, state: &KineticState) -> (f64, f64) {
        let dz = self.front.grid.dz;
        let m1: f64 = state.density(0).iter().sum::<f64>() * dz;
        let m2: f64 = state.density(1).iter().sum::<f64>() * dz;
        (m1, m2)
    }

    /// Component of the density perturbation on the null direction of the
    /// second variation: `<a_h, w'> = sum dz (a_1 w'_1 + a_2 w'_2)`.
    pub fn null_component(&self, state: &KineticState) -> f64 {
        let dz = self.front.grid.dz;
        let mut acc = 0.0;
        for z in 0..state.nz {
            acc += state.density(0)[z] * self.front.w1p[z]
                + state.density(1)[z] * self.front.w2p[z];
        }
        acc * dz
    }

    /// Liapunov functional of the full distribution `f_i = (w_i + H_i) M`,
    /// referenced to the front value (`h = 0` gives exactly 0).
    ///
    /// Gauss-Hermite quadrature in velocity; rectangle rule in z, with the
    /// interaction grouped so that the discrete first variation vanishes
    /// identically on zero-mass perturbations.
    pub fn free_energy_g(&self, state: &KineticState) -> Result<f64> {
        let nz = state.nz;
        let kk = self.order;
        let beta = self.front.beta;
        let dz = self.front.grid.dz;
        let nq = (2 * kk).max(32);
        let gh = gauss_hermite(nq)?;
        let ln_cm = (beta / (2.0 * std::f64::consts::PI)).sqrt().ln();
        // Precompute He_k(x_q)/sqrt(k!) for all quadrature nodes.
        let mut fact = vec![1.0f64];
        for k in 1..=kk {
            fact.push(fact[k - 1] * k as f64);
        }
        let basis: Vec<Vec<f64>> = gh
            .nodes
            .iter()
            .map(|&x| {
                let h = hermite_values(kk, x);
                (0..=kk).map(|k| h[k] / fact[k].sqrt()).collect()
            })
            .collect();
        let w = [&self.front.w1, &self.front.w2];
        let mut entropy = 0.0;
        for i in 0..2 {
            for z in 0..nz {
                let wi = w[i][z];
                let wlogw = wi * wi.ln();
                for (q, b) in basis.iter().enumerate() {
                    let mut h_poly = 0.0;
                    for k in 0..=kk {
                        h_poly += state.mode(i, k)[z] * b[k];
                    }
                    let f = wi + h_poly;
                    if f <= 0.0 {
                        return Err(Error::Numerical(format!(
                            "distribution not positive at species {i}, z index {z}, \
                             velocity node {q} (value {f:.3e}); perturbation too large \
                             for the entropy evaluation"
                        )));
                    }
                    entropy += gh.weights[q] * (f * f.ln() - wlogw + ln_cm * h_poly);
                }
            }
        }
        entropy *= dz;
        // Interaction difference, grouped so that the linear-in-a part pairs
        // a_i with the constant-extended front convolution:
        //   beta sum dz [a_1 (U*w_2) + a_2 (U*w_1) + a_1 (U* a_2)].
        let a1 = state.density(0);
        let a2 = state.density(1);
        let uw2 = convolve(&self.front.kernel, &self.front.w2_field());
        let uw1 = convolve(&self.front.kernel, &self.front.w1_field());
        let ua2 = convolve(
            &self.front.kernel,
            &ScalarField::new(a2.to_vec(), Extension::Zero),
        );
        let mut inter = 0.0;
        for z in 0..nz {
            inter += a1[z] * uw2.values[z] + a2[z] * uw1.values[z] + a1[z] * ua2.values[z];
        }
        inter *= beta * dz;
        Ok(entropy + inter)
    }

    /// Quadratic approximation of the free-energy difference:
    /// `1/2 <a, A a> + 1/2 ||(I-P)h||_M^2` with the same rectangle measure.
    pub fn free_energy_quadratic(&self, state: &KineticState) -> f64 {
        let op = crate::spectral::OperatorA::new(self.front);
        let quad_a = op.quadratic_form(state.density(0), state.density(1));
        let w = [&self.front.w1, &self.front.w2];
        let dz = self.front.grid.dz;
        let mut ip = 0.0;
        for i in 0..2 {
            for k in 1..=self.order {
                let c = state.mode(i, k);
                for z in 0..state.nz {
                    ip += c[z] * c[z] / w[i][z];
                }
            }
        }
        0.5 * quad_a + 0.5 * ip * dz
    }

    pub fn diagnostics(
        &self,
        state: &KineticState,
        weight: &GammaWeight,
        k_const: f64,
    ) -> Result<DiagnosticsRecord> {
        let rhs = self.rhs(state);
        let dnorm_t = self.norm_m_of(&rhs, None);
        // z-derivative of every mode, high-order stencil (diagnostic only).
        let dz = self.front.grid.dz;
        let mut dcoeffs = vec![0.0; state.coeffs.len()];
        for i in 0..2 {
            for k in 0..=self.order {
                let d = derivative4(state.mode(i, k), dz);
                let base = (i * (self.order + 1) + k) * state.nz;
                dcoeffs[base..base + state.nz].copy_from_slice(&d);
            }
        }
        let dnorm_z = self.norm_m_of(&dcoeffs, None);
        let norm_m = self.norm_m(state, None);
        let (mass_1, mass_2) = self.masses(state);
        Ok(DiagnosticsRecord {
            time: state.time,
            norm_m,
            norm_d: self.norm_d(state, None),
            norm_m_gamma: self.norm_m(state, Some(weight)),
            dnorm_t_m: dnorm_t,
            dnorm_z_m: dnorm_z,
            energy_combined: k_const * (norm_m * norm_m + dnorm_t * dnorm_t)
                + dnorm_z * dnorm_z,
            // The Liapunov functional is only defined while the truncated
            // distribution stays pointwise positive at the quadrature nodes;
            // once phase mixing populates the top retained mode the extreme
            // nodes lose positivity and the value is recorded as NaN rather
            // than aborting the run.
            free_energy: self.free_energy_g(state).unwrap_or(f64::NAN),
            mass_1,
            mass_2,
            null_component: self.null_component(state),
            symmetry_error: state.symmetry_error(),
        })
    }

    /// Run until `t_end`, recording diagnostics every `record_every` steps
    /// (plus the initial and final states). Aborts on blow-up, returning the
    /// trajectory collected so far.
    pub fn evolve(&self, state: KineticState, opts: &EvolveOptions) -> Result<Trajectory> {
        if !(opts.t_end > 0.0) {
            return Err(Error::invalid("tmax", "must be > 0"));
        }
        if !(opts.dt > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        if opts.record_every == 0 {
            return Err(Error::invalid("record_every", "must be >= 1"));
        }
        let weight = GammaWeight::new(opts.gamma, &self.front.grid.z);
        let mut records = Vec::new();
        let mut current = state;
        let initial_norm = self.norm_m(&current, None);
        records.push(self.diagnostics(&current, &weight, opts.k_const)?);
        let steps = (opts.t_end / opts.dt).ceil() as usize;
        for step in 1..=steps {
            current = self.step_rk4(&current, opts.dt)?;
            if step % opts.record_every == 0 || step == steps {
                let norm = self.norm_m(&current, None);
                if !norm.is_finite() || norm > 1e6 * initial_norm.max(1e-300) {
                    return Ok(Trajectory {
                        records,
                        completed: false,
                        abort_reason: Some(format!(
                            "blow-up at t = {:.6}: norm_M = {norm:.3e}",
                            current.time
                        )),
                        final_state: current,
                    });
                }
                records.push(self.diagnostics(&current, &weight, opts.k_const)?);
            }
        }
        Ok(Trajectory {
            records,
            completed: true,
            abort_reason: None,
            final_state: current,
        })
    }
}

/// Options for [`KineticSim::evolve`].
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub gamma: f64,
    /// Constant weighting the non-derivative terms of `energy_combined`.
    pub k_const: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dt: 2.5e-3,
            t_end: 1.0,
            record_every: 100,
            gamma: 0.1,
            k_const: 50.0,
        }
    }
}

/// One CSV row of the kinetic diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub norm_m: f64,
    pub norm_d: f64,
    pub norm_m_gamma: f64,
    pub dnorm_t_m: f64,
    pub dnorm_z_m: f64,
    pub energy_combined: f64,
    pub free_energy: f64,
    pub mass_1: f64,
    pub mass_2: f64,
    pub null_component: f64,
    pub symmetry_error: f64,
}

/// Result of a kinetic run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub completed: bool,
    pub abort_reason: Option<String>,
    pub final_state: KineticState,
}

/// Monotonicity audit and decay-envelope fit of a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    /// Number of record-to-record increases of `energy_combined` above
    /// `1e-9 x` the initial energy.
    pub violations: usize,
    /// Largest positive jump observed between consecutive records.
    pub largest_jump: f64,
    /// Least-squares exponent p of `energy ~ C (1 + t/(2 gamma))^{-p}`
    /// over the records after the initial transient.
    pub fitted_exponent: f64,
}

pub fn energy_monitor(records: &[DiagnosticsRecord], gamma: f64) -> Result<EnergyReport> {
    if records.is_empty() {
        return Err(Error::invalid("trajectory", "must be nonempty"));
    }
    let initial = records[0].energy_combined;
    let tol = 1e-9 * initial.abs();
    let mut violations = 0;
    let mut largest: f64 = 0.0;
    for pair in records.windows(2) {
        let jump = pair[1].energy_combined - pair[0].energy_combined;
        if jump > tol {
            violations += 1;
        }
        largest = largest.max(jump);
    }
    // Envelope fit: log energy against log(1 + t/(2 gamma)), skipping the
    // first quarter of the records as transient.
    let skip = records.len() / 4;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in &records[skip..] {
        if r.energy_combined > 0.0 {
            xs.push((1.0 + r.time / (2.0 * gamma)).ln());
            ys.push(r.energy_combined.ln());
        }
    }
    let fitted = if xs.len() >= 3 {
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        -(n * sxy - sx * sy) / (n * sxx - sx * sx)
    } else {
        f64::NAN
    };
    Ok(EnergyReport {
        violations,
        largest_jump: largest,
        fitted_exponent: fitted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::{solve_front, SolveOptions};
    use crate::model::ModelParams;

    fn solved(nz: usize) -> FrontProfile {
        let params = ModelParams {
            nz,
            ..Default::default()
        };
        solve_front(&params, &SolveOptions::default()).unwrap().0
    }

    #[test]
    fn zero_state_stays_zero() {
        let p = solved(129);
        let sim = KineticSim::new(&p, 8).unwrap();
        let state = KineticState::zeros(8, p.grid.nz());
        let rhs = sim.rhs(&state);
        assert!(rhs.iter().all(|&v| v == 0.0));
        let next = sim.step_rk4(&state, 1e-3).unwrap();
        assert!(next.coeffs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_init_is_symmetric_zero_mass() {
        let p = solved(129);
        let sim = KineticSim::new(&p, 8).unwrap();
        let s = sim
            .init_perturbation(PerturbationKind::GaussianDensity, 1e-3)
            .unwrap();
        assert_eq!(s.symmetry_error(), 0.0);
        let (m1, m2) = sim.masses(&s);
        assert!(m1.abs() < 1e-18 && m2.abs() < 1e-18, "{m1} {m2}");
        // Reflection is an involution.
        let rr = s.reflect().reflect();
        assert_eq!(rr.coeffs, s.coeffs);
    }

    #[test]
    fn mode1_init_is_symmetric() {
        let p = solved(129);
        let sim = KineticSim::new(&p, 8).unwrap();
        let s = sim
            .init_perturbation(PerturbationKind::Mode1Current, 1e-3)
            .unwrap();
        assert!(s.symmetry_error() < 1e-18);
        assert!(sim.norm_m(&s, None) > 0.0);
    }

    #[test]
    fn custom_state_symmetry_guard() {
        let p = solved(129);
        let mut sim = KineticSim::new(&p, 4).unwrap();
        sim.enforce_symmetry = true;
        let mut coeffs = vec![0.0; 2 * 5 * p.grid.nz()];
        coeffs[3] = 1e-3;
        assert!(sim.custom_state(coeffs).is_err());
        let ok = sim.custom_state(vec![0.0; 2 * 5 * p.grid.nz()]);
        assert!(ok.is_ok());
    }

    #[test]
    fn cfl_guard_rejects_large_steps() {
        let p = solved(129);
        let sim = KineticSim::new(&p, 8).unwrap();
        let state = KineticState::zeros(8, p.grid.nz());
        let dt = sim.cfl_limit() * 1.01;
        assert!(sim.step_rk4(&state, dt).is_err());
    }

    #[test]
    fn rhs_of_constant_density_shift_matches_closed_form() {
        // A z-constant mode-0 shift c per species: streaming of a constant
        // vanishes, so only mode 1 responds, with the closed form
        // -sqrt(beta) [E_i c + w_i g_i], g_i = dU/dz * a_j (zero-extended).
        let p = solved(257);
        let sim = KineticSim::new(&p, 6).unwrap();
        let nz = p.grid.nz();
        let c = 1e-3;
        let mut state = KineticState::zeros(6, nz);
        for z in 0..nz {
            let i0 = state.idx(0, 0, z);
            state.coeffs[i0] = c;
            let i1 = state.idx(1, 0, z);
            state.coeffs[i1] = c;
        }
        let rhs = sim.rhs(&state);
        let sqrt_beta = p.beta.sqrt();
        let w = [&p.w1, &p.w2];
        let a = ScalarField::new(vec![c; nz], Extension::Zero);
        let g = convolve_derivative(&p.kernel, &a).values;
        for i in 0..2 {
            for k in 0..=6 {
                let base = (i * 7 + k) * nz;
                for z in 0..nz {
                    let expect = if k == 1 {
                        -sqrt_beta * ((sim.lin_force[i][z] + g[z]) * c + w[i][z] * g[z])
                    } else {
                        0.0
                    };
                    assert!(
                        (rhs[base + z] - expect).abs() < 1e-15,
                        "species {i} mode {k} node {z}: {} vs {expect}",
                        rhs[base + z]
                    );
                }
            }
        }
    }

    #[test]
    fn transport_conserves_mass_exactly() {
        use rand::{Rng, SeedableRng};
        let p = solved(129);
        let sim = KineticSim::new(&p, 6).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut state = KineticState::zeros(6, p.grid.nz());
        for v in &mut state.coeffs {
            *v = 1e-3 * rng.gen_range(-1.0..1.0);
        }
        let rhs = sim.rhs(&state);
        // Mode-0 time derivative must sum to zero per species.
        for i in 0..2 {
            let base = i * 7 * p.grid.nz();
            let s: f64 = rhs[base..base + p.grid.nz()].iter().sum();
            assert!(s.abs() < 1e-15, "species {i}: {s}");
        }
    }

    #[test]
    fn step_locally_reversible() {
        let p = solved(129);
        let sim = KineticSim::new(&p, 8).unwrap();
        let s0 = sim
            .init_perturbation(PerturbationKind::GaussianDensity, 1e-3)
            .unwrap();
        let dt = sim.cfl_limit() / 16.0;
        let s1 = sim.step_rk4(&s0, dt).unwrap();
        let s2 = sim.step_rk4(&s1, -dt).unwrap();
        let mut err: f64 = 0.0;
        for (a, b) in s0.coeffs.iter().zip(&s2.coeffs) {
            err = err.max((a - b).abs());
        }
        let scale = s0.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-10 * scale, "err {err} scale {scale}");
    }

    #[test]
    fn symmetry_preserved_without_enforcement() {
        let p = solved(129);
        let sim = KineticSim::new(&p, 8).unwrap();
        let mut s = sim
            .init_perturbation(PerturbationKind::GaussianDensity, 1e-3)
            .unwrap();
        let dt = sim.cfl_limit() * 0.5;
        for _ in 0..50 {
            s = sim.step_rk4(&s, dt).unwrap();
        }
        assert!(s.symmetry_error() < 1e-13, "{}", s.symmetry_error());
    }

    #[test]
    fn null_component_zero_for_symmetric_data() {
        let p = solved(129);
        let sim = KineticSim::new(&p, 8).unwrap();
        let mut s = sim
            .init_perturbation(PerturbationKind::GaussianDensity, 1e-3)
            .unwrap();
        assert!(sim.null_component(&s).abs() < 1e-16);
        let dt = sim.cfl_limit() * 0.5;
        for _ in 0..20 {
            s = sim.step_rk4(&s, dt).unwrap();
        }
        assert!(sim.null_component(&s).abs() < 1e-14, "{}", sim.null_component(&s));
    }

    #[test]
    fn free_energy_zero_at_front_and_positive_nearby() {
        let p = solved(129);
        let sim = KineticSim::new(&p, 8).unwrap();
        let zero = KineticState::zeros(8, p.grid.nz());
        assert_eq!(sim.free_energy_g(&zero).unwrap(), 0.0);
        let s = sim
            .init_perturbation(PerturbationKind::GaussianDensity, 1e-3)
            .unwrap();
        let g = sim.free_energy_g(&s).unwrap();
        assert!(g > 0.0, "{g}");
    }

    #[test]
    fn free_energy_matches_quadratic_expansion() {
        // At amplitude eps the error of the quadratic model is O(eps^3);
        // halving eps must cut the relative error roughly in half.
        let p = solved(257);
        let sim = KineticSim::new(&p, 8).unwrap();
        let mut rel = Vec::new();
        for eps in [1e-4, 5e-5] {
            let s = sim
                .init_perturbation(PerturbationKind::GaussianDensity, eps)
                .unwrap();
            let g = sim.free_energy_g(&s).unwrap();
            let q = sim.free_energy_quadratic(&s);
            rel.push((g - q).abs() / q);
        }
        assert!(rel[0] < 1e-3, "rel {:?}", rel);
        let ratio = rel[0] / rel[1];
        assert!(ratio > 1.5 && ratio < 2.5, "ratio {ratio} rel {rel:?}");
    }

    #[test]
    fn free_energy_positivity_guard() {
        let p = solved(129);
        let sim = KineticSim::new(&p, 4).unwrap();
        let mut s = KineticState::zeros(4, p.grid.nz());
        // A mode-0 dip deeper than the minority density makes f negative.
        let mid = p.grid.mid();
        let i0 = s.idx(0, 0, mid);
        s.coeffs[i0] = -2.0 * p.rho_plus;
        assert!(sim.free_energy_g(&s).is_err());
    }

    #[test]
    fn short_run_diagnostics_behave() {
        let p = solved(129);
        let sim = KineticSim::new(&p, 8).unwrap();
        let s = sim
            .init_perturbation(PerturbationKind::GaussianDensity, 1e-3)
            .unwrap();
        let opts = EvolveOptions {
            dt: sim.cfl_limit() * 0.5,
            t_end: 1.0,
            record_every: 20,
            ..Default::default()
        };
        let traj = sim.evolve(s, &opts).unwrap();
        assert!(traj.completed);
        let first = &traj.records[0];
        let last = traj.records.last().unwrap();
        // Mass conserved, free energy non-increasing, norms finite.
        assert!((last.mass_1 - first.mass_1).abs() < 1e-14);
        assert!((last.mass_2 - first.mass_2).abs() < 1e-14);
        for pair in traj.records.windows(2) {
            assert!(
                pair[1].free_energy <= pair[0].free_energy + 1e-12,
                "free energy rose: {} -> {}",
                pair[0].free_energy,
                pair[1].free_energy
            );
        }
        let report = energy_monitor(&traj.records, opts.gamma).unwrap();
        assert_eq!(report.violations, 0, "largest jump {}", report.largest_jump);
    }

    #[test]
    fn norms_match_hand_values() {
        let p = solved(129);
        let sim = KineticSim::new(&p, 4).unwrap();
        let mut s = KineticState::zeros(4, p.grid.nz());
        // Unit mode-1 coefficients, species 1 only.
        for z in 0..p.grid.nz() {
            let i = s.idx(0, 1, z);
            s.coeffs[i] = 1.0;
        }
        let dz = p.grid.dz;
        let sum_invw: f64 = p.w1.iter().map(|w| 1.0 / w).sum::<f64>() * dz;
        let beta = p.beta;
        let expect_m = sum_invw.sqrt();
        let expect_d = ((1.0 + 2.0 * beta) * sum_invw).sqrt();
        assert!((sim.norm_m(&s, None) - expect_m).abs() < 1e-12);
        assert!((sim.norm_d(&s, None) - expect_d).abs() < 1e-12);
        // Gamma = 0 equals unweighted.
        let w0 = GammaWeight::new(0.0, &p.grid.z);
        assert_eq!(sim.norm_m(&s, Some(&w0)), sim.norm_m(&s, None));
    }
}
