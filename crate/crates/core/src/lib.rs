//! Numerical laboratory for phase-transition fronts in a two-species kinetic
//! mixture with repulsive cross-interaction: bulk coexistence, front
//! profiles, linearized spectra, Hermite-moment kinetics, and the
//! hydrodynamic gradient flow.

pub mod config;
pub mod eig;
pub mod error;
pub mod front;
pub mod hermite;
pub mod hydro;
pub mod kinetic;
pub mod manifest;
pub mod model;
pub mod runner;
pub mod spectral;
pub mod thermo;

pub use error::{Error, Result};
