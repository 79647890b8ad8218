use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, ValueEnum};

use meshkit::analysis::RunMode;
use meshkit::cli::{load_config, run, Artifact, Overrides};
use meshkit::grid::Stencil;
use meshkit::presets::Preset;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Exact,
    Pma,
    Analyze,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StencilArg {
    Second,
    Fourth,
    Spectral,
}

/// Optimal-transport mesh redistribution on the periodic unit square.
#[derive(Debug, Parser)]
#[command(name = "meshkit", version, group(ArgGroup::new("source").args(["preset", "config"])))]
struct Args {
    /// Pipeline: closed-form separable solution, parabolic relaxation, or
    /// re-analysis of an exported mesh.
    #[arg(value_enum)]
    mode: ModeArg,
    /// Built-in density: example1, example2, example3 or example4.
    #[arg(long, value_name = "NAME")]
    preset: Option<Preset>,
    /// JSON run configuration.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Nodes per side.
    #[arg(long, value_name = "INT")]
    n: Option<usize>,
    /// Smoothing parameter of the relaxation.
    #[arg(long, value_name = "F")]
    gamma: Option<f64>,
    /// Initial time step.
    #[arg(long, value_name = "F")]
    dt: Option<f64>,
    /// Convergence tolerance on the coefficient of variation of ρJ.
    #[arg(long, value_name = "F")]
    tol: Option<f64>,
    #[arg(long, value_name = "INT")]
    max_steps: Option<usize>,
    /// Derivative discretization used by the relaxation and by `analyze`
    /// [default: spectral].
    #[arg(long, value_enum)]
    stencil: Option<StencilArg>,
    /// Amplitude of a seeded smooth random initial potential.
    #[arg(long, value_name = "F")]
    init_amplitude: Option<f64>,
    /// Output directory [default: $MESHKIT_OUT, else ./meshkit-out].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Artifacts to write.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    emit: Option<Vec<Artifact>>,
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Ellipse semi-axes are this scale times |λ| [default: h/2].
    #[arg(long, value_name = "F")]
    ellipse_scale: Option<f64>,
    /// Mesh CSV read by `analyze` [default: OUT/mesh.csv].
    #[arg(long, value_name = "FILE")]
    mesh: Option<PathBuf>,
    /// Stream one JSON progress record per relaxation step to stderr.
    #[arg(long)]
    progress: bool,
}

impl Args {
    fn overrides(&self) -> Overrides {
        Overrides {
            mode: Some(match self.mode {
                ModeArg::Exact => RunMode::Exact,
                ModeArg::Pma => RunMode::Pma,
                ModeArg::Analyze => RunMode::Analyze,
            }),
            preset: self.preset,
            n: self.n,
            gamma: self.gamma,
            dt: self.dt,
            tol: self.tol,
            max_steps: self.max_steps,
            stencil: self.stencil.map(|s| match s {
                StencilArg::Second => Stencil::Second,
                StencilArg::Fourth => Stencil::Fourth,
                StencilArg::Spectral => Stencil::Spectral,
            }),
            init_amplitude: self.init_amplitude,
            emit: self.emit.clone(),
            out_dir: self.out.clone(),
            seed: self.seed,
            ellipse_scale: self.ellipse_scale,
            mesh: self.mesh.clone(),
            progress: self.progress,
            default_out_dir: std::env::var_os("MESHKIT_OUT").filter(|v| !v.is_empty()).map(PathBuf::from),
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = load_config(args.config.as_deref(), &args.overrides()).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(out) => {
            if !out.report.converged {
                eprintln!(
                    "meshkit: not converged after {} steps (cv = {:.3e}, max residual = {:.3e})",
                    out.report.steps, out.report.residual.cv, out.report.residual.max
                );
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("meshkit: error: {e}");
            ExitCode::from(1)
        }
    }
}
