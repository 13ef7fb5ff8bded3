use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parastab::forward::Scheme;
use parastab::model::BoundaryCondition;
use parastab::reconstruct::Filter;
use parastab::runner::{self, number_list, Command, RunConfig};

#[derive(Parser)]
#[command(
    name = "parastab",
    version,
    about = "Carleman estimates and conditional stability for coupled parabolic systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Check symmetry, ellipticity and the Lipschitz bound of a problem.
    Validate(Flags),
    /// Solve the forward problem and export the trajectory.
    Forward(Flags),
    /// Sweep the weighted Carleman constant over (s, lambda).
    Carleman(Flags),
    /// Hölder stability experiment at an intermediate time.
    Holder(Flags),
    /// Logarithmic stability experiment at the initial time.
    Lograte(Flags),
    /// Regularized backward reconstruction.
    Reconstruct(Flags),
    /// Run the command named in a configuration file or manifest.
    Run(Flags),
}

#[derive(Args, Default)]
struct Flags {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// heat1d, coupled2 or sine_gradient.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    bc: Option<BoundaryCondition>,
    /// Robin coefficient.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    /// Final time.
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    /// Comma-separated list.
    #[arg(long)]
    lambda: Option<String>,
    /// Comma-separated list.
    #[arg(long)]
    s: Option<String>,
    /// Comma-separated list of perturbation amplitudes.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated list of noise levels.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    filter: Option<Filter>,
    /// be or cn.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// single_mode, two_mode, high_mode:K, random_smooth:M or robin_compatible.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $PARASTAB_OUT or ./parastab-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Terminal data CSV for reconstruct.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn list(raw: &Option<String>, name: &str) -> parastab::Result<Option<Vec<f64>>> {
    raw.as_deref().map(|r| number_list(r, name)).transpose()
}

fn build(command: Option<Command>, f: Flags) -> parastab::Result<RunConfig> {
    let base = match &f.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        command,
        preset: f.preset,
        bc: f.bc,
        p: f.p,
        nx: f.nx,
        nt: f.nt,
        horizon: f.horizon,
        t0: f.t0,
        lambda: list(&f.lambda, "lambda")?,
        s: list(&f.s, "s")?,
        eps: list(&f.eps, "eps")?,
        alpha: f.alpha,
        delta: list(&f.delta, "delta")?,
        filter: f.filter,
        scheme: f.scheme,
        family: f.family,
        amplitude: f.amplitude,
        bound: f.bound,
        stride: f.stride,
        samples: f.samples,
        pairs: f.pairs,
        seed: f.seed,
        out: f.out,
        input: f.input,
        ..RunConfig::default()
    };
    Ok(base.overlay(flags))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::Validate(f) => (Some(Command::Validate), f),
        Sub::Forward(f) => (Some(Command::Forward), f),
        Sub::Carleman(f) => (Some(Command::Carleman), f),
        Sub::Holder(f) => (Some(Command::Holder), f),
        Sub::Lograte(f) => (Some(Command::Lograte), f),
        Sub::Reconstruct(f) => (Some(Command::Reconstruct), f),
        Sub::Run(f) => (None, f),
    };
    let result = build(command, flags).and_then(runner::run);
    let code = match result {
        Ok(outcome) => {
            print!("{}", outcome.summary());
            outcome.exit_code()
        }
        Err(err) => {
            eprintln!("parastab: {err}");
            runner::error_exit_code(&err)
        }
    };
    ExitCode::from(code as u8)
}
