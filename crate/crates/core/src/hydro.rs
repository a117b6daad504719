//! Macroscopic gradient-flow integration of the two densities and the
//! cross-checks that the front is its equilibrium and the density free
//! energy dissipates.
//!
//! The flow is `d_t rho_i = d_z (beta^-1 rho_i d_z mu_i)` with
//! `mu_i = ln rho_i + beta U * rho_j`; forward Euler with face-centered
//! fluxes and zero-flux walls conserves the grid mass of each species
//! exactly.

use crate::error::{Error, Result};
use crate::front::FrontProfile;
use crate::model::{convolve, Extension, ScalarField};

/// Pair of positive densities at one instant.
#[derive(Debug, Clone)]
pub struct HydroState {
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
    pub time: f64,
}

impl HydroState {
    pub fn positive(&self) -> bool {
        self.rho1.iter().chain(&self.rho2).all(|&r| r > 0.0)
    }
}

/// Integrator tied to a converged front (supplies grid, kernel, coupling and
/// the equilibrium used by the distance diagnostic).
pub struct HydroSim<'a> {
    pub front: &'a FrontProfile,
    /// Fraction of the explicit-diffusion bound allowed in a step.
    pub safety: f64,
}

impl<'a> HydroSim<'a> {
    pub fn new(front: &'a FrontProfile) -> Self {
        HydroSim { front, safety: 1.0 }
    }

    /// State initialized at the front profile itself.
    pub fn front_state(&self) -> HydroState {
        HydroState {
            rho1: self.front.w1.clone(),
            rho2: self.front.w2.clone(),
            time: 0.0,
        }
    }

    /// Largest step accepted by [`hydro_step`] for the given state:
    /// `safety * dz^2 / (2 max(rho) / beta)`.
    pub fn stable_dt(&self, state: &HydroState) -> f64 {
        let max_rho = state
            .rho1
            .iter()
            .chain(&state.rho2)
            .fold(0.0f64, |m, &r| m.max(r));
        let dz = self.front.grid.dz;
        self.safety * dz * dz * self.front.beta / (2.0 * max_rho)
    }

    /// Chemical potentials `mu_i = ln rho_i + beta U * rho_j`, densities
    /// extended by their boundary values.
    pub fn chemical_potential(&self, state: &HydroState) -> Result<(Vec<f64>, Vec<f64>)> {
        if !state.positive() {
            return Err(Error::Numerical(
                "chemical potential requires positive densities".into(),
            ));
        }
        let nz = state.rho1.len();
        let f1 = ScalarField::new(
            state.rho1.clone(),
            Extension::Constant(state.rho1[0], state.rho1[nz - 1]),
        );
        let f2 = ScalarField::new(
            state.rho2.clone(),
            Extension::Constant(state.rho2[0], state.rho2[nz - 1]),
        );
        let u2 = convolve(&self.front.kernel, &f2);
        let u1 = convolve(&self.front.kernel, &f1);
        let beta = self.front.beta;
        let mu1 = (0..nz)
            .map(|z| state.rho1[z].ln() + beta * u2.values[z])
            .collect();
        let mu2 = (0..nz)
            .map(|z| state.rho2[z].ln() + beta * u1.values[z])
            .collect();
        Ok((mu1, mu2))
    }

    /// Face fluxes `G_{m+1/2} = beta^-1 rho_face (mu_{m+1} - mu_m)/dz`,
    /// arithmetic-mean face mobility; `nz - 1` interior faces per species
    /// (the wall faces carry zero flux).
    pub fn face_fluxes(&self, state: &HydroState) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mu1, mu2) = self.chemical_potential(state)?;
        let nz = state.rho1.len();
        let dz = self.front.grid.dz;
        let inv_beta = 1.0 / self.front.beta;
        let mut g1 = Vec::with_capacity(nz - 1);
        let mut g2 = Vec::with_capacity(nz - 1);
        for m in 0..nz - 1 {
            let mob1 = 0.5 * (state.rho1[m] + state.rho1[m + 1]);
            let mob2 = 0.5 * (state.rho2[m] + state.rho2[m + 1]);
            g1.push(inv_beta * mob1 * (mu1[m + 1] - mu1[m]) / dz);
            g2.push(inv_beta * mob2 * (mu2[m + 1] - mu2[m]) / dz);
        }
        Ok((g1, g2))
    }

    /// Forward-Euler step in divergence form. Rejects steps above the
    /// stability bound and aborts on positivity loss, naming the node.
    pub fn hydro_step(&self, state: &HydroState, dt: f64) -> Result<HydroState> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        let limit = self.stable_dt(state);
        if dt > limit {
            return Err(Error::invalid(
                "dt",
                format!("{dt} exceeds the diffusion stability bound {limit:.6e}"),
            ));
        }
        let (g1, g2) = self.face_fluxes(state)?;
        let nz = state.rho1.len();
        let dz = self.front.grid.dz;
        let mut out = state.clone();
        for m in 0..nz {
            // Zero flux through the wall faces.
            let left1 = if m == 0 { 0.0 } else { g1[m - 1] };
            let right1 = if m == nz - 1 { 0.0 } else { g1[m] };
            let left2 = if m == 0 { 0.0 } else { g2[m - 1] };
            let right2 = if m == nz - 1 { 0.0 } else { g2[m] };
            out.rho1[m] += dt * (right1 - left1) / dz;
            out.rho2[m] += dt * (right2 - left2) / dz;
        }
        out.time = state.time + dt;
        for m in 0..nz {
            if out.rho1[m] <= 0.0 || out.rho2[m] <= 0.0 {
                return Err(Error::Numerical(format!(
                    "density lost positivity at node {m} after the step to t = {:.6}",
                    out.time
                )));
            }
        }
        Ok(out)
    }

    /// Density free energy referenced to the homogeneous minimizer, by the
    /// trapezoid rule in z with the direct double-convolution cross term:
    /// `int [f(rho) - f(rho+, rho-)] + beta int [rho_1 (U*rho_2) - rho+ rho-]`.
    ///
    /// Deliberately a different quadrature and grouping than the excess
    /// functional of the front module, so agreement between the two is a
    /// real consistency check.
    pub fn hydro_free_energy(&self, state: &HydroState) -> Result<f64> {
        if !state.positive() {
            return Err(Error::Numerical(
                "free energy requires positive densities".into(),
            ));
        }
        let nz = state.rho1.len();
        let beta = self.front.beta;
        let rp = self.front.rho_plus;
        let rm = self.front.rho_minus;
        let f_ref = rp * rp.ln() + rm * rm.ln();
        let f2 = ScalarField::new(
            state.rho2.clone(),
            Extension::Constant(state.rho2[0], state.rho2[nz - 1]),
        );
        let u2 = convolve(&self.front.kernel, &f2);
        let dz = self.front.grid.dz;
        let mut acc = 0.0;
        for z in 0..nz {
            let r1 = state.rho1[z];
            let r2 = state.rho2[z];
            let local = r1 * r1.ln() + r2 * r2.ln() - f_ref;
            let cross = beta * (r1 * u2.values[z] - rp * rm);
            let weight = if z == 0 || z == nz - 1 { 0.5 } else { 1.0 };
            acc += weight * (local + cross);
        }
        Ok(acc * dz)
    }

    pub fn masses(&self, state: &HydroState) -> (f64, f64) {
        let dz = self.front.grid.dz;
        (
            state.rho1.iter().sum::<f64>() * dz,
            state.rho2.iter().sum::<f64>() * dz,
        )
    }

    pub fn flux_sup_norm(&self, state: &HydroState) -> Result<f64> {
        let (g1, g2) = self.face_fluxes(state)?;
        Ok(g1
            .iter()
            .chain(&g2)
            .fold(0.0f64, |m, &g| m.max(g.abs())))
    }

    /// Sup-norm distance of the state to the front profile, both species.
    pub fn dist_to_front_sup(&self, state: &HydroState) -> f64 {
        let mut d: f64 = 0.0;
        for z in 0..state.rho1.len() {
            d = d.max((state.rho1[z] - self.front.w1[z]).abs());
            d = d.max((state.rho2[z] - self.front.w2[z]).abs());
        }
        d
    }

    pub fn record(&self, state: &HydroState) -> Result<HydroRecord> {
        let (mass_1, mass_2) = self.masses(state);
        Ok(HydroRecord {
            time: state.time,
            free_energy: self.hydro_free_energy(state)?,
            mass_1,
            mass_2,
            flux_sup_norm: self.flux_sup_norm(state)?,
            dist_to_front_sup: self.dist_to_front_sup(state),
        })
    }

    /// Run until `t_end`, recording every `record_every` steps plus the
    /// endpoints. A positivity abort returns the trajectory so far.
    pub fn evolve(
        &self,
        state: HydroState,
        dt: f64,
        t_end: f64,
        record_every: usize,
    ) -> Result<HydroTrajectory> {
        if !(t_end > 0.0) {
            return Err(Error::invalid("tmax", "must be > 0"));
        }
        if record_every == 0 {
            return Err(Error::invalid("record_every", "must be >= 1"));
        }
        let mut records = vec![self.record(&state)?];
        let mut current = state;
        let steps = (t_end / dt).ceil() as usize;
        for step in 1..=steps {
            match self.hydro_step(&current, dt) {
                Ok(next) => current = next,
                Err(Error::Numerical(msg)) => {
                    return Ok(HydroTrajectory {
                        records,
                        completed: false,
                        abort_reason: Some(msg),
                        final_state: current,
                    });
                }
                Err(e) => return Err(e),
            }
            if step % record_every == 0 || step == steps {
                records.push(self.record(&current)?);
            }
        }
        Ok(HydroTrajectory {
            records,
            completed: true,
            abort_reason: None,
            final_state: current,
        })
    }
}

/// One CSV row of the hydrodynamic diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct HydroRecord {
    pub time: f64,
    pub free_energy: f64,
    pub mass_1: f64,
    pub mass_2: f64,
    pub flux_sup_norm: f64,
    pub dist_to_front_sup: f64,
}

#[derive(Debug, Clone)]
pub struct HydroTrajectory {
    pub records: Vec<HydroRecord>,
    pub completed: bool,
    pub abort_reason: Option<String>,
    pub final_state: HydroState,
}
