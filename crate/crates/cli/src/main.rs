mod commands;
mod config;
mod error;
mod io;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

/// Characteristic classes of approximate vector bundles from data.
///
/// Exit status: 0 success, 1 usage, 2 regime violation, 3 degenerate
/// input, 4 I/O or parse failure, 5 empty epsilon-span.
#[derive(Parser, Debug)]
#[command(name = "approxbundle", version)]
pub struct Cli {
    /// key=value file of defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Generate one of the synthetic datasets.
    Gen {
        #[command(subcommand)]
        dataset: GenCmd,
    },
    /// Vietoris-Rips filtration of points, a dissimilarity matrix, or
    /// rotation-aligned images.
    Vr(VrArgs),
    /// Local PCA tangent frames.
    LocalPca(LocalPcaArgs),
    /// Witness cocycle of frames over a filtration's complex.
    Witness(WitnessArgs),
    /// Per-triangle defects and consistency radius.
    Defects(CocycleArgs),
    /// Epsilon-death of a cocycle.
    Death(DeathArgs),
    /// First Stiefel-Whitney class.
    Sw1(ClassArgs),
    /// Second Stiefel-Whitney class.
    Sw2(ClassArgs),
    /// Euler class of an SO(2) cocycle.
    Euler(EulerArgs),
    /// Persistence diagram of a filtration.
    Persistence(PersistenceArgs),
    /// Coordinates of a class in the persistence basis.
    Decompose(DecomposeArgs),
    /// Data to decorated persistence diagram in one run.
    Pipeline(pipeline::PipelineArgs),
}

#[derive(Subcommand, Debug)]
pub enum GenCmd {
    /// Delay embedding of the x-coordinate of a double-gyre trajectory.
    DoubleGyre(DoubleGyreArgs),
    /// Blurred images of lines, a sample of the projective plane.
    Lines(LinesArgs),
    /// Projection images of a union of balls, with their rotations.
    SphereProjections(ProjectionsArgs),
}

#[derive(Args, Debug)]
pub struct DoubleGyreArgs {
    #[arg(long, default_value_t = 0.55)]
    pub x0: f64,
    #[arg(long, default_value_t = 0.5)]
    pub y0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1000.0)]
    pub t_end: f64,
    /// Largest RK4 step.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, default_value_t = 0.1)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0.1)]
    pub flow_eps: f64,
    #[arg(long, default_value_t = std::f64::consts::PI / 5.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 5)]
    pub delay_dim: usize,
    #[arg(long, default_value_t = 5)]
    pub delay: usize,
    /// Accepted for uniformity; the generator is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the raw `t,x,y` trajectory here.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LinesArgs {
    #[arg(long, default_value_t = 160)]
    pub count: usize,
    #[arg(long, default_value_t = 10)]
    pub size: usize,
    #[arg(long, default_value_t = 3.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 9.0)]
    pub max_offset: f64,
    /// Accepted for uniformity; the generator is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProjectionsArgs {
    #[arg(long, default_value_t = 400)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Images, one flattened row each.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rotations, nine row-major entries per row.
    #[arg(long)]
    pub rotations_out: PathBuf,
}

/// Where the metric comes from: exactly one of points, a dissimilarity
/// matrix, or images with rotations.
#[derive(Args, Debug, Clone, Default)]
pub struct MetricInput {
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[arg(long)]
    pub dissimilarity: Option<PathBuf>,
    #[arg(long, requires = "rotations")]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub rotations: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VrArgs {
    #[command(flatten)]
    pub input: MetricInput,
    #[arg(long)]
    pub threshold: f64,
    #[arg(long, default_value_t = 2)]
    pub max_dim: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LocalPcaArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WitnessArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub filtration: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CocycleArgs {
    #[arg(long)]
    pub cocycle: PathBuf,
    #[arg(long)]
    pub filtration: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DeathArgs {
    #[arg(long)]
    pub cocycle: PathBuf,
    #[arg(long)]
    pub filtration: PathBuf,
    #[arg(long)]
    pub eps: f64,
}

#[derive(Args, Debug)]
pub struct ClassArgs {
    #[arg(long)]
    pub cocycle: PathBuf,
    #[arg(long)]
    pub filtration: PathBuf,
    /// Compute on the complex at this scale; the whole complex by default.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EulerArgs {
    #[command(flatten)]
    pub class: ClassArgs,
    /// Reduce the integer class modulo this prime.
    #[arg(long)]
    pub prime: Option<u32>,
}

#[derive(Args, Debug)]
pub struct PersistenceArgs {
    #[arg(long)]
    pub filtration: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub prime: u32,
    #[arg(long, default_value_t = 2)]
    pub max_degree: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    /// Class CSV as written by sw1, sw2 or euler.
    #[arg(long)]
    pub class: PathBuf,
    #[arg(long)]
    pub filtration: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub prime: u32,
    /// Scale to decompose at; the filtration threshold by default.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubsampleMethod {
    Maxmin,
    Random,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let args = match config::expand_args(&Cli::command(), args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
