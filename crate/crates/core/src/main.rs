//! Command-line experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use frontlab::config::{parse_config, Experiment};
use frontlab::runner;

#[derive(Parser)]
#[command(
    name = "frontlab",
    about = "Numerical laboratory for phase-transition fronts of a two-species kinetic mixture"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bulk coexistence densities.
    Thermo(SharedArgs),
    /// Solve and persist the stationary front.
    Front(SharedArgs),
    /// Linearized spectra: Fokker-Planck gap, second-variation matrix,
    /// homogeneous symbol, and the preconditioned probe.
    Spectrum(SharedArgs),
    /// Kinetic Hermite-moment evolution of a front perturbation.
    Evolve(SharedArgs),
    /// Hydrodynamic gradient-flow evolution.
    Hydro(SharedArgs),
    /// All stages in sequence.
    Pipeline(SharedArgs),
}

#[derive(Args)]
struct SharedArgs {
    /// Flat key=value configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Inverse temperature.
    #[arg(long)]
    beta: Option<f64>,
    /// Total density of the two species.
    #[arg(long)]
    n: Option<f64>,
    /// Half-width Z of the computational domain [-Z, Z].
    #[arg(long)]
    domain: Option<f64>,
    /// Number of grid nodes (odd).
    #[arg(long)]
    nz: Option<usize>,
    /// Hermite truncation order K.
    #[arg(long)]
    hermite_order: Option<usize>,
    /// Time step, or "auto" for a stability-derived choice.
    #[arg(long)]
    dt: Option<String>,
    /// Final time of the evolution stages.
    #[arg(long)]
    tmax: Option<f64>,
    /// Confinement weight exponent.
    #[arg(long)]
    gamma: Option<f64>,
    /// Seed of every stochastic probe.
    #[arg(long)]
    seed: Option<u64>,
    /// Diagnostics cadence in steps.
    #[arg(long)]
    record_every: Option<usize>,
    /// Interaction kernel: biweight or bump.
    #[arg(long)]
    kernel: Option<String>,
    /// Kernel radius R.
    #[arg(long)]
    radius: Option<f64>,
    /// Initial perturbation amplitude.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Initial perturbation kind: gaussian_density or mode1_current.
    #[arg(long)]
    perturbation: Option<String>,
    /// Sample count of the stochastic spectral probes.
    #[arg(long)]
    samples: Option<usize>,
}

impl SharedArgs {
    fn assignments(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push((key.to_string(), v));
            }
        };
        push("out", self.out.clone());
        push("beta", self.beta.map(|v| v.to_string()));
        push("n", self.n.map(|v| v.to_string()));
        push("domain", self.domain.map(|v| v.to_string()));
        push("nz", self.nz.map(|v| v.to_string()));
        push("hermite_order", self.hermite_order.map(|v| v.to_string()));
        push("dt", self.dt.clone());
        push("tmax", self.tmax.map(|v| v.to_string()));
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("record_every", self.record_every.map(|v| v.to_string()));
        push("kernel", self.kernel.clone());
        push("radius", self.radius.map(|v| v.to_string()));
        push("amplitude", self.amplitude.map(|v| v.to_string()));
        push("perturbation", self.perturbation.clone());
        push("samples", self.samples.map(|v| v.to_string()));
        out
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::Thermo(a) => (Experiment::Thermo, a),
        Command::Front(a) => (Experiment::Front, a),
        Command::Spectrum(a) => (Experiment::Spectrum, a),
        Command::Evolve(a) => (Experiment::Evolve, a),
        Command::Hydro(a) => (Experiment::Hydro, a),
        Command::Pipeline(a) => (Experiment::Pipeline, a),
    };
    let config = match parse_config(experiment, args.config.as_deref(), &args.assignments()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match runner::run(&config) {
        Ok(manifest) => {
            println!(
                "{}: wrote {} file(s) to {}",
                config.experiment.name(),
                manifest.files.len(),
                config.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
