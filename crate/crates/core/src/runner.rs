//! Experiment orchestration: runs the requested stage chain, persists every
//! artifact, and records the run in a manifest.

use std::io::Write;
use std::path::Path;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::front::{
    el_residual, elp_residual, excess_free_energy, save_front, solve_front, tail_decay_rate,
    FrontProfile, FrontReport, SolveOptions,
};
use crate::hydro::HydroSim;
use crate::kinetic::{EvolveOptions, KineticSim};
use crate::manifest::RunManifest;
use crate::spectral::{
    check_lgap, probe_aprime_bound, spectrum_atilde, symbol_spectrum_a0, HermiteBasis, OperatorA,
};
use crate::thermo;

const KINETIC_CSV_HEADER: &str = "t,norm_M,norm_D,norm_M_gamma,dnorm_t_M,dnorm_z_M,\
energy_combined,free_energy,mass_1,mass_2,null_component,symmetry_error";
const HYDRO_CSV_HEADER: &str = "t,free_energy,mass_1,mass_2,flux_sup_norm,dist_to_front_sup";

/// Run the configured experiment. Stage failures inside a pipeline are
/// recorded in the manifest and later stages skipped; a single-stage run
/// propagates its failure after recording it.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest> {
    std::fs::create_dir_all(&config.out_dir)?;
    let mut manifest = RunManifest::begin(config);
    manifest.write(&RunManifest::path_in(&config.out_dir))?;

    let outcome = run_stages(config, &mut manifest);
    manifest.finalize();
    manifest.write(&RunManifest::path_in(&config.out_dir))?;
    match outcome {
        Ok(()) => Ok(manifest),
        Err(e) => {
            if config.experiment == Experiment::Pipeline {
                // The pipeline reports failures through the manifest.
                Ok(manifest)
            } else {
                Err(e)
            }
        }
    }
}

fn run_stages(config: &ExperimentConfig, manifest: &mut RunManifest) -> Result<()> {
    let out = config.out_dir.clone();
    let pipeline = config.experiment == Experiment::Pipeline;
    let wants = |e: Experiment| pipeline || config.experiment == e;

    // Thermo is cheap and every later stage depends on its output, so it
    // always runs; it only writes its artifact when requested.
    let coex = match stage_thermo(config, manifest, &out, wants(Experiment::Thermo)) {
        Ok(c) => c,
        Err(e) => return fail(manifest, "thermo", e),
    };
    if config.experiment == Experiment::Thermo {
        return Ok(());
    }

    let needs_front = pipeline
        || matches!(
            config.experiment,
            Experiment::Front | Experiment::Spectrum | Experiment::Evolve | Experiment::Hydro
        );
    let front = if needs_front {
        if coex.m == 0.0 {
            let e = Error::invalid(
                "beta,n",
                format!(
                    "subcritical parameters (beta n = {}): no front exists",
                    config.params.beta * config.params.n
                ),
            );
            return fail(manifest, "front", e);
        }
        match stage_front(config, manifest, &out, wants(Experiment::Front)) {
            Ok(p) => p,
            Err(e) => return fail(manifest, "front", e),
        }
    } else {
        unreachable!("all non-thermo experiments need the front");
    };

    if wants(Experiment::Spectrum) {
        if let Err(e) = stage_spectrum(config, manifest, &out, &front) {
            return fail(manifest, "spectrum", e);
        }
    }
    if wants(Experiment::Evolve) {
        if let Err(e) = stage_evolve(config, manifest, &out, &front) {
            return fail(manifest, "evolve", e);
        }
    }
    if wants(Experiment::Hydro) {
        if let Err(e) = stage_hydro(config, manifest, &out, &front) {
            return fail(manifest, "hydro", e);
        }
    }
    Ok(())
}

fn fail(manifest: &mut RunManifest, stage: &str, e: Error) -> Result<()> {
    manifest.record_stage(stage, &format!("failed: {e}"));
    manifest.record_stage("remaining", "skipped");
    Err(e)
}

fn stage_thermo(
    config: &ExperimentConfig,
    manifest: &mut RunManifest,
    out: &Path,
    write_artifact: bool,
) -> Result<thermo::Coexistence> {
    let coex = thermo::coexistence_densities(config.params.beta, config.params.n, 1e-12)?;
    if write_artifact {
        let path = out.join("thermo.txt");
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(f, "beta {:.16e}", config.params.beta)?;
        writeln!(f, "n {:.16e}", config.params.n)?;
        writeln!(
            f,
            "supercritical {}",
            thermo::is_supercritical(config.params.beta, config.params.n)
        )?;
        writeln!(f, "m {:.16e}", coex.m)?;
        writeln!(f, "rho_plus {:.16e}", coex.rho_plus)?;
        writeln!(f, "rho_minus {:.16e}", coex.rho_minus)?;
        drop(f);
        manifest.record_file(out, "thermo.txt")?;
    }
    manifest.record_stage("thermo", "ok");
    Ok(coex)
}

fn stage_front(
    config: &ExperimentConfig,
    manifest: &mut RunManifest,
    out: &Path,
    write_artifact: bool,
) -> Result<(FrontProfile, FrontReport)> {
    let opts = SolveOptions {
        tol: config.front_tol,
        ..SolveOptions::default()
    };
    let (profile, report) = solve_front(&config.params, &opts)?;
    if write_artifact {
        save_front(&profile, &report, &out.join("front.txt"))?;
        manifest.record_file(out, "front.txt")?;
        let excess = excess_free_energy(&profile, &profile.w1_field(), &profile.w2_field())?;
        let alpha = tail_decay_rate(&profile)?;
        let path = out.join("front_summary.txt");
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(f, "iterations {}", report.iterations)?;
        writeln!(f, "final_update {:.16e}", report.final_update)?;
        writeln!(f, "el_residual {:.16e}", el_residual(&profile))?;
        writeln!(f, "elp_residual {:.16e}", elp_residual(&profile))?;
        writeln!(f, "excess_local {:.16e}", excess.local)?;
        writeln!(f, "excess_interaction {:.16e}", excess.interaction)?;
        writeln!(f, "excess_total {:.16e}", excess.total)?;
        writeln!(f, "tail_decay_rate {:.16e}", alpha)?;
        drop(f);
        manifest.record_file(out, "front_summary.txt")?;
    }
    manifest.record_stage("front", "ok");
    Ok((profile, report))
}

fn stage_spectrum(
    config: &ExperimentConfig,
    manifest: &mut RunManifest,
    out: &Path,
    front: &(FrontProfile, FrontReport),
) -> Result<()> {
    let profile = &front.0;
    let basis = HermiteBasis::new(config.params.hermite_order, config.params.beta);
    let nu0 = check_lgap(&basis, config.samples, config.seed)?;
    let spectrum = spectrum_atilde(profile, config.spectrum_count)?;
    let symbol = symbol_spectrum_a0(
        profile.beta,
        profile.rho_plus,
        profile.rho_minus,
        &profile.kernel,
    );
    let op = OperatorA::new(profile);
    let probe = probe_aprime_bound(&op, config.samples, config.seed)?;
    let path = out.join("spectrum.txt");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(f, "lgap_nu0 {:.16e}", nu0)?;
    let fp: Vec<String> = basis
        .fp_eigenvalues()
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect();
    writeln!(f, "fp_eigenvalues {}", fp.join(" "))?;
    let eigs: Vec<String> = spectrum
        .eigenvalues
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect();
    writeln!(f, "atilde_eigenvalues {}", eigs.join(" "))?;
    writeln!(f, "atilde_gap {:.16e}", spectrum.gap)?;
    writeln!(f, "atilde_null_residual {:.16e}", spectrum.null_residual)?;
    writeln!(f, "atilde_null_alignment {:.16e}", spectrum.null_alignment)?;
    writeln!(f, "symbol_lower_edge {:.16e}", symbol.lower_edge)?;
    writeln!(f, "symbol_upper_edge {:.16e}", symbol.upper_edge)?;
    writeln!(f, "symbol_u_hat_max {:.16e}", symbol.u_hat_max)?;
    writeln!(f, "symbol_u_hat_zero {:.16e}", symbol.u_hat_zero)?;
    writeln!(f, "aprime_probe_bound {:.16e}", probe)?;
    drop(f);
    manifest.record_file(out, "spectrum.txt")?;
    manifest.record_stage("spectrum", "ok");
    Ok(())
}

fn stage_evolve(
    config: &ExperimentConfig,
    manifest: &mut RunManifest,
    out: &Path,
    front: &(FrontProfile, FrontReport),
) -> Result<()> {
    let profile = &front.0;
    let sim = KineticSim::new(profile, config.params.hermite_order)?;
    let dt = config.dt.unwrap_or_else(|| sim.cfl_limit() / 3.0);
    let state = sim.init_perturbation(config.perturbation, config.amplitude)?;
    let opts = EvolveOptions {
        dt,
        t_end: config.t_end,
        record_every: config.record_every,
        gamma: config.gamma,
        k_const: config.k_const,
    };
    let traj = sim.evolve(state, &opts)?;
    let path = out.join("kinetic.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(f, "{KINETIC_CSV_HEADER}")?;
    for r in &traj.records {
        writeln!(
            f,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.time,
            r.norm_m,
            r.norm_d,
            r.norm_m_gamma,
            r.dnorm_t_m,
            r.dnorm_z_m,
            r.energy_combined,
            r.free_energy,
            r.mass_1,
            r.mass_2,
            r.null_component,
            r.symmetry_error
        )?;
    }
    drop(f);
    manifest.record_file(out, "kinetic.csv")?;
    match &traj.abort_reason {
        None => manifest.record_stage("evolve", "ok"),
        Some(reason) => {
            manifest.record_stage("evolve", &format!("failed: {reason}"));
            return Err(Error::Numerical(reason.clone()));
        }
    }
    Ok(())
}

fn stage_hydro(
    config: &ExperimentConfig,
    manifest: &mut RunManifest,
    out: &Path,
    front: &(FrontProfile, FrontReport),
) -> Result<()> {
    let profile = &front.0;
    let sim = HydroSim::new(profile);
    let mut state = sim.front_state();
    // Perturb the front symmetrically so the run exercises relaxation.
    for z in 0..profile.grid.nz() {
        let zv = profile.grid.z[z];
        state.rho1[z] += config.amplitude * (-0.5 * zv * zv).exp();
        let zr = profile.grid.z[profile.grid.mirror(z)];
        state.rho2[z] += config.amplitude * (-0.5 * zr * zr).exp();
    }
    let dt = config.dt.unwrap_or_else(|| 0.5 * sim.stable_dt(&state));
    let traj = sim.evolve(state, dt, config.t_end, config.record_every)?;
    let path = out.join("hydro.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(f, "{HYDRO_CSV_HEADER}")?;
    for r in &traj.records {
        writeln!(
            f,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.time, r.free_energy, r.mass_1, r.mass_2, r.flux_sup_norm, r.dist_to_front_sup
        )?;
    }
    drop(f);
    manifest.record_file(out, "hydro.csv")?;
    match &traj.abort_reason {
        None => manifest.record_stage("hydro", "ok"),
        Some(reason) => {
            manifest.record_stage("hydro", &format!("failed: {reason}"));
            return Err(Error::Numerical(reason.clone()));
        }
    }
    Ok(())
}
