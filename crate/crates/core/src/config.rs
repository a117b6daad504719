//! Experiment configuration: flat key=value files, CLI flag overlay, and
//! up-front validation of every stage precondition.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kinetic::PerturbationKind;
use crate::model::{KernelKind, ModelParams};

/// Which stage(s) a CLI invocation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Thermo,
    Front,
    Spectrum,
    Evolve,
    Hydro,
    Pipeline,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Thermo => "thermo",
            Experiment::Front => "front",
            Experiment::Spectrum => "spectrum",
            Experiment::Evolve => "evolve",
            Experiment::Hydro => "hydro",
            Experiment::Pipeline => "pipeline",
        }
    }
}

/// Full run configuration. Every field has a documented default; unknown
/// keys are rejected at parse time.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub experiment: Experiment,
    /// Output directory for all artifacts.
    pub out_dir: PathBuf,
    /// `None` means "auto": the integrators pick a stable step themselves.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub gamma: f64,
    pub seed: u64,
    pub record_every: usize,
    /// Initial perturbation of the kinetic run.
    pub perturbation: PerturbationKind,
    pub amplitude: f64,
    /// Weight of the non-derivative terms in the combined energy.
    pub k_const: f64,
    /// Sample count for the stochastic spectral probes.
    pub samples: usize,
    /// Eigenvalues reported from the discrete second-variation matrix.
    pub spectrum_count: usize,
    /// Front solver tolerance.
    pub front_tol: f64,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        ExperimentConfig {
            params: ModelParams::default(),
            experiment,
            out_dir: PathBuf::from("out"),
            dt: None,
            t_end: 1.0,
            gamma: 0.1,
            seed: 7,
            record_every: 40,
            perturbation: PerturbationKind::GaussianDensity,
            amplitude: 1e-3,
            k_const: 50.0,
            samples: 200,
            spectrum_count: 8,
            front_tol: 1e-14,
        }
    }

    /// Apply one key=value assignment. Key names coincide with CLI flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: std::num::ParseFloatError| {
            Error::Parse(format!("key `{key}`: bad float `{value}`: {e}"))
        };
        let bad_int = |e: std::num::ParseIntError| {
            Error::Parse(format!("key `{key}`: bad integer `{value}`: {e}"))
        };
        match key {
            "beta" => self.params.beta = value.parse().map_err(bad)?,
            "n" => self.params.n = value.parse().map_err(bad)?,
            "kernel" => self.params.kernel_kind = KernelKind::parse(value)?,
            "radius" => self.params.kernel_radius = value.parse().map_err(bad)?,
            "domain" => self.params.half_width = value.parse().map_err(bad)?,
            "nz" => self.params.nz = value.parse().map_err(bad_int)?,
            "hermite_order" => self.params.hermite_order = value.parse().map_err(bad_int)?,
            "dt" => {
                if value == "auto" {
                    self.dt = None;
                } else {
                    let v: f64 = value.parse().map_err(bad)?;
                    self.dt = Some(v);
                    self.params.dt = v;
                }
            }
            "tmax" => self.t_end = value.parse().map_err(bad)?,
            "gamma" => self.gamma = value.parse().map_err(bad)?,
            "seed" => self.seed = value.parse().map_err(bad_int)?,
            "record_every" => self.record_every = value.parse().map_err(bad_int)?,
            "perturbation" => {
                self.perturbation = match value {
                    "gaussian_density" => PerturbationKind::GaussianDensity,
                    "mode1_current" => PerturbationKind::Mode1Current,
                    other => {
                        return Err(Error::Parse(format!(
                            "key `perturbation`: unknown kind `{other}` \
                             (expected gaussian_density or mode1_current)"
                        )))
                    }
                }
            }
            "amplitude" => self.amplitude = value.parse().map_err(bad)?,
            "k_const" => self.k_const = value.parse().map_err(bad)?,
            "samples" => self.samples = value.parse().map_err(bad_int)?,
            "spectrum_count" => self.spectrum_count = value.parse().map_err(bad_int)?,
            "front_tol" => self.front_tol = value.parse().map_err(bad)?,
            "out" => self.out_dir = PathBuf::from(value),
            other => {
                return Err(Error::Parse(format!(
                    "unknown configuration key `{other}`"
                )))
            }
        }
        Ok(())
    }

    /// Read a flat key=value file (one assignment per line, `#` comments).
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!(
                    "line {}: expected key=value, got `{line}`",
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Run every stage precondition that is checkable without solving.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::invalid("dt", "must be > 0 or `auto`"));
            }
        }
        if !(self.t_end > 0.0) {
            return Err(Error::invalid("tmax", "must be > 0"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 0.125) {
            return Err(Error::invalid("gamma", "must be in (0, 1/8]"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be >= 1"));
        }
        if !(self.amplitude >= 0.0) {
            return Err(Error::invalid("amplitude", "must be >= 0"));
        }
        if self.samples == 0 {
            return Err(Error::invalid("samples", "must be >= 1"));
        }
        if self.spectrum_count == 0 {
            return Err(Error::invalid("spectrum_count", "must be >= 1"));
        }
        if !(self.front_tol > 0.0) {
            return Err(Error::invalid("front_tol", "must be > 0"));
        }
        if !(self.k_const > 0.0) {
            return Err(Error::invalid("k_const", "must be > 0"));
        }
        Ok(())
    }

    /// Sorted key=value echo of the full effective configuration; 17
    /// significant digits for floats so runs can be replayed exactly.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("beta".into(), format!("{:.16e}", self.params.beta));
        m.insert("n".into(), format!("{:.16e}", self.params.n));
        m.insert("kernel".into(), self.params.kernel_kind.name().to_string());
        m.insert("radius".into(), format!("{:.16e}", self.params.kernel_radius));
        m.insert("domain".into(), format!("{:.16e}", self.params.half_width));
        m.insert("nz".into(), self.params.nz.to_string());
        m.insert(
            "hermite_order".into(),
            self.params.hermite_order.to_string(),
        );
        m.insert(
            "dt".into(),
            match self.dt {
                Some(v) => format!("{v:.16e}"),
                None => "auto".into(),
            },
        );
        m.insert("tmax".into(), format!("{:.16e}", self.t_end));
        m.insert("gamma".into(), format!("{:.16e}", self.gamma));
        m.insert("seed".into(), self.seed.to_string());
        m.insert("record_every".into(), self.record_every.to_string());
        m.insert(
            "perturbation".into(),
            match self.perturbation {
                PerturbationKind::GaussianDensity => "gaussian_density".into(),
                PerturbationKind::Mode1Current => "mode1_current".into(),
            },
        );
        m.insert("amplitude".into(), format!("{:.16e}", self.amplitude));
        m.insert("k_const".into(), format!("{:.16e}", self.k_const));
        m.insert("samples".into(), self.samples.to_string());
        m.insert("spectrum_count".into(), self.spectrum_count.to_string());
        m.insert("front_tol".into(), format!("{:.16e}", self.front_tol));
        m.insert("out".into(), self.out_dir.display().to_string());
        m.insert("experiment".into(), self.experiment.name().into());
        m
    }
}

/// Merge precedence: defaults, then the optional file, then the flag
/// assignments (each "key=value").
pub fn parse_config(
    experiment: Experiment,
    file: Option<&Path>,
    flag_assignments: &[(String, String)],
) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::defaults(experiment);
    if let Some(path) = file {
        config.apply_file(path)?;
    }
    for (key, value) in flag_assignments {
        config.set(key, value)?;
    }
    config.validate()?;
    Ok(config)
}
