//! Run configuration and the end-to-end driver behind the `meshkit` binary.
//!
//! A run is described by an optional JSON document overlaid with command
//! line flags. The document schema:
//!
//! ```json
//! {
//!   "mode": "pma",
//!   "preset": "example1",
//!   "n": 60,
//!   "pma": { "gamma": 0.1, "dt": 0.001, "tol": 0.01, "max_steps": 200000,
//!            "stencil": "spectral", "init_amplitude": 0.0 },
//!   "emit": ["mesh", "ellipses", "residual", "report", "svg"],
//!   "out_dir": "out",
//!   "seed": 0,
//!   "ellipse_scale": 0.008333
//! }
//! ```
//!
//! Instead of `preset`, a `density` object may be given, tagged by `kind`:
//! `uniform`; `single_train` with `train`; `product_trains` with `first` and
//! `second`; `level_set`; `arclength` or `hessian` with a sine-wave `u` and
//! `alpha_h`. A train is
//! `{"amplitude", "sharpness", "direction": [x, y], "scale", "offsets"}`.
//! `stencil` is one of `second`, `fourth` or `spectral`. Unknown keys are
//! rejected everywhere.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_mesh, build_report, ellipses, jacobians_from_mesh, AnisotropyReport, MeshAnalysis, RunMode};
use crate::density::{theta_2d, DensityKind, DensitySpec, LevelSetFeature, ShockTrain, SineWave, DEFAULT_QUADRATURE};
use crate::error::{Error, Result};
use crate::exact::{SeparableSolution, DEFAULT_SAMPLES};
use crate::grid::{ComputationalGrid, Stencil};
use crate::io;
use crate::linalg::Vec2;
use crate::pma::{json_lines_sink, PmaParams, PmaSolver, PotentialState};
use crate::presets::Preset;

pub const DEFAULT_N: usize = 60;
pub const DEFAULT_OUT_DIR: &str = "meshkit-out";

/// Files a run can write into its output directory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Artifact {
    Mesh,
    Ellipses,
    Residual,
    Report,
    Svg,
}

impl Artifact {
    pub const ALL: [Artifact; 5] =
        [Artifact::Mesh, Artifact::Ellipses, Artifact::Residual, Artifact::Report, Artifact::Svg];

    pub fn name(self) -> &'static str {
        match self {
            Artifact::Mesh => "mesh",
            Artifact::Ellipses => "ellipses",
            Artifact::Residual => "residual",
            Artifact::Report => "report",
            Artifact::Svg => "svg",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Artifact::Mesh => "mesh.csv",
            Artifact::Ellipses => "ellipses.csv",
            Artifact::Residual => "residual.csv",
            Artifact::Report => "report.json",
            Artifact::Svg => "mesh.svg",
        }
    }
}

impl fmt::Display for Artifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Artifact {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Artifact::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown artifact `{s}` (expected mesh, ellipses, residual, report or svg)"))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainDoc {
    pub amplitude: f64,
    pub sharpness: f64,
    pub direction: [f64; 2],
    pub scale: f64,
    #[serde(default = "default_offsets")]
    pub offsets: Vec<f64>,
}

fn default_offsets() -> Vec<f64> {
    vec![0.0]
}

impl TrainDoc {
    fn build(&self) -> Result<ShockTrain> {
        ShockTrain::new(
            self.amplitude,
            self.sharpness,
            Vec2::new(self.direction[0], self.direction[1]),
            self.scale,
            self.offsets.clone(),
        )
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineDoc {
    pub amplitude: f64,
    pub wavevector: [i32; 2],
    #[serde(default)]
    pub phase: f64,
}

/// Inline density description.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityDoc {
    Uniform,
    SingleTrain { train: TrainDoc },
    ProductTrains { first: TrainDoc, second: TrainDoc },
    LevelSet { amplitude: f64, sharpness: f64, wave_amplitude: f64, wave_number: i32, offset: f64 },
    Arclength { u: SineDoc, alpha_h: f64 },
    Hessian { u: SineDoc, alpha_h: f64 },
}

impl DensityDoc {
    pub fn build(&self) -> Result<DensitySpec> {
        let sine = |u: &SineDoc| SineWave { amplitude: u.amplitude, wavevector: u.wavevector, phase: u.phase };
        let kind = match self {
            DensityDoc::Uniform => DensityKind::Uniform,
            DensityDoc::SingleTrain { train } => DensityKind::SingleTrain(train.build()?),
            DensityDoc::ProductTrains { first, second } => DensityKind::ProductTrains(first.build()?, second.build()?),
            DensityDoc::LevelSet { amplitude, sharpness, wave_amplitude, wave_number, offset } => {
                DensityKind::LevelSet(LevelSetFeature {
                    amplitude: *amplitude,
                    sharpness: *sharpness,
                    wave_amplitude: *wave_amplitude,
                    wave_number: *wave_number,
                    offset: *offset,
                })
            }
            DensityDoc::Arclength { u, alpha_h } => DensityKind::ArclengthFromU { u: Arc::new(sine(u)), alpha_h: *alpha_h },
            DensityDoc::Hessian { u, alpha_h } => DensityKind::HessianFromU { u: Arc::new(sine(u)), alpha_h: *alpha_h },
        };
        DensitySpec::new(kind)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmaDoc {
    pub gamma: Option<f64>,
    pub dt: Option<f64>,
    pub tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub stencil: Option<Stencil>,
    pub init_amplitude: Option<f64>,
}

/// The JSON configuration document; every field is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub mode: Option<RunMode>,
    pub preset: Option<Preset>,
    pub density: Option<DensityDoc>,
    pub n: Option<usize>,
    #[serde(default)]
    pub pma: PmaDoc,
    pub emit: Option<Vec<Artifact>>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub ellipse_scale: Option<f64>,
    pub mesh: Option<PathBuf>,
}

/// Parses a configuration document; an empty document is `{}`.
pub fn parse_config(text: &str) -> Result<ConfigDoc> {
    if text.trim().is_empty() {
        return Ok(ConfigDoc::default());
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::config(if field == "." { "<document>".into() } else { field }, e.inner().to_string())
    })
}

/// Command-line values, each overriding the document.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<RunMode>,
    pub preset: Option<Preset>,
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub dt: Option<f64>,
    pub tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub stencil: Option<Stencil>,
    pub init_amplitude: Option<f64>,
    pub emit: Option<Vec<Artifact>>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub ellipse_scale: Option<f64>,
    pub mesh: Option<PathBuf>,
    pub progress: bool,
    /// Output directory used when neither the flags nor the document name
    /// one (the binary fills this from `MESHKIT_OUT`).
    pub default_out_dir: Option<PathBuf>,
}

/// Where the density came from.
#[derive(Clone, Debug)]
pub enum DensitySource {
    Preset(Preset),
    Inline,
}

/// A validated run description.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: RunMode,
    pub source: DensitySource,
    pub density: DensitySpec,
    pub n: usize,
    pub pma: PmaParams,
    /// Amplitude of the seeded smooth random initial potential; 0 starts
    /// from the identity mesh.
    pub init_amplitude: f64,
    pub emit: BTreeSet<Artifact>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub ellipse_scale: Option<f64>,
    /// Mesh CSV read by `analyze` (default `out_dir/mesh.csv`).
    pub mesh: Option<PathBuf>,
    pub progress: bool,
}

impl RunConfig {
    /// Ellipse scale, defaulting to half a cell.
    pub fn ellipse_scale_or_default(&self, n: usize) -> f64 {
        self.ellipse_scale.unwrap_or(0.5 / n as f64)
    }

    pub fn mesh_input(&self) -> PathBuf {
        self.mesh.clone().unwrap_or_else(|| self.out_dir.join(Artifact::Mesh.file_name()))
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

/// Merges a document with flag overrides, applies defaults and validates.
pub fn resolve_config(doc: ConfigDoc, o: &Overrides) -> Result<RunConfig> {
    let mode = o.mode.or(doc.mode).ok_or_else(|| Error::config("mode", "no mode given (exact, pma or analyze)"))?;
    let preset = o.preset.or(doc.preset);
    let (source, density) = match (preset, &doc.density) {
        (Some(_), Some(_)) => return Err(Error::config("density", "give either a preset or a density, not both")),
        (Some(p), None) => (DensitySource::Preset(p), p.density()),
        (None, Some(d)) => {
            let spec = d.build().map_err(|e| Error::config("density", e.to_string()))?;
            (DensitySource::Inline, spec)
        }
        (None, None) => return Err(Error::config("density", "no density given; set `preset` or `density`")),
    };
    let n = o.n.or(doc.n).unwrap_or(DEFAULT_N);
    ComputationalGrid::new(n).map_err(|e| Error::config("n", e.to_string()))?;
    let defaults = PmaParams::default();
    let pma = PmaParams {
        gamma: o.gamma.or(doc.pma.gamma).unwrap_or(defaults.gamma),
        dt: o.dt.or(doc.pma.dt).unwrap_or(defaults.dt),
        tol: o.tol.or(doc.pma.tol).unwrap_or(defaults.tol),
        max_steps: o.max_steps.or(doc.pma.max_steps).unwrap_or(defaults.max_steps),
        stencil: o.stencil.or(doc.pma.stencil).unwrap_or(defaults.stencil),
    };
    pma.validate().map_err(|e| Error::config("pma", e.to_string()))?;
    let init_amplitude = o.init_amplitude.or(doc.pma.init_amplitude).unwrap_or(0.0);
    if !(init_amplitude >= 0.0 && init_amplitude.is_finite()) {
        return Err(Error::config("pma.init_amplitude", format!("must be >= 0, got {init_amplitude}")));
    }
    let ellipse_scale = match o.ellipse_scale.or(doc.ellipse_scale) {
        Some(s) => Some(positive("ellipse_scale", s)?),
        None => None,
    };
    if mode == RunMode::Exact {
        SeparableSolution::from_density(&density, DEFAULT_SAMPLES).map_err(|e| {
            Error::config("mode", format!("exact mode needs a separable density: {e}"))
        })?;
    }
    let emit: BTreeSet<Artifact> = match o.emit.clone().or(doc.emit) {
        Some(list) => list.into_iter().collect(),
        None => Artifact::ALL.into_iter().collect(),
    };
    let out_dir = o
        .out_dir
        .clone()
        .or(doc.out_dir)
        .or_else(|| o.default_out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    Ok(RunConfig {
        mode,
        source,
        density,
        n,
        pma,
        init_amplitude,
        emit,
        out_dir,
        seed: o.seed.or(doc.seed).unwrap_or(0),
        ellipse_scale,
        mesh: o.mesh.clone().or(doc.mesh),
        progress: o.progress,
    })
}

/// Reads the optional document at `path` and resolves it against `o`.
pub fn load_config(path: Option<&Path>, o: &Overrides) -> Result<RunConfig> {
    let doc = match path {
        Some(p) => parse_config(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => ConfigDoc::default(),
    };
    resolve_config(doc, o)
}

/// Result of a completed run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: AnisotropyReport,
    pub analysis: MeshAnalysis,
    /// Paths written, in artifact order.
    pub written: Vec<PathBuf>,
}

impl RunOutcome {
    /// `0` when converged, `2` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.converged {
            0
        } else {
            2
        }
    }
}

/// Mesh, Jacobians and iteration outcome for one pipeline.
struct Solved {
    grid: ComputationalGrid,
    lifted: Vec<Vec2>,
    jacobians: Vec<crate::linalg::SymMat2>,
    theta: f64,
    steps: usize,
    converged: bool,
}

fn solve_exact(cfg: &RunConfig) -> Result<Solved> {
    let grid = ComputationalGrid::new(cfg.n)?;
    let sol = SeparableSolution::from_density(&cfg.density, DEFAULT_SAMPLES)?;
    Ok(Solved {
        grid,
        lifted: sol.mesh(grid),
        jacobians: grid.nodes().map(|xi| sol.jacobian(xi)).collect(),
        theta: sol.theta(),
        steps: 0,
        converged: true,
    })
}

fn solve_pma(cfg: &RunConfig) -> Result<Solved> {
    let grid = ComputationalGrid::new(cfg.n)?;
    let solver = PmaSolver::new(&cfg.density, grid, cfg.pma)?;
    let init = (cfg.init_amplitude > 0.0).then(|| PotentialState::smooth_random(grid, cfg.init_amplitude, cfg.seed));
    let init = init.transpose()?;
    let (state, report) = if cfg.progress {
        let mut stderr = std::io::stderr().lock();
        let mut sink = json_lines_sink(&mut stderr);
        solver.solve(init, Some(&mut sink))?
    } else {
        solver.solve(init, None)?
    };
    let (lifted, jacobians) = state.images_and_jacobians();
    Ok(Solved {
        grid,
        lifted,
        jacobians: jacobians.into_values(),
        theta: solver.theta(),
        steps: report.steps,
        converged: report.converged,
    })
}

fn solve_analyze(cfg: &RunConfig) -> Result<Solved> {
    let input = cfg.mesh_input();
    let (n, lifted) = io::read_mesh(&input)?;
    let grid = ComputationalGrid::new(n).map_err(|e| Error::Parse { path: input.clone(), reason: e.to_string() })?;
    Ok(Solved {
        grid,
        jacobians: jacobians_from_mesh(grid, &lifted, cfg.pma.stencil)?,
        lifted,
        theta: theta_2d(&cfg.density, DEFAULT_QUADRATURE)?,
        steps: 0,
        converged: true,
    })
}

/// Runs the configured pipeline, analyzes the mesh and writes the requested
/// artifacts. A run that stops before converging still writes everything.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let solved = match cfg.mode {
        RunMode::Exact => solve_exact(cfg)?,
        RunMode::Pma => solve_pma(cfg)?,
        RunMode::Analyze => solve_analyze(cfg)?,
    };
    let Solved { grid, lifted, jacobians, theta, steps, converged } = solved;
    let analysis = analyze_mesh(&cfg.density, grid, lifted, jacobians, theta)?;
    let report = build_report(&cfg.density, &analysis, cfg.mode, steps, converged);
    let written = write_artifacts(cfg, &analysis, &report)?;
    Ok(RunOutcome { report, analysis, written })
}

fn write_artifacts(cfg: &RunConfig, a: &MeshAnalysis, report: &AnisotropyReport) -> Result<Vec<PathBuf>> {
    if cfg.emit.is_empty() {
        return Ok(Vec::new());
    }
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let n = a.grid.n();
    let records = if cfg.emit.contains(&Artifact::Ellipses) {
        ellipses(a, cfg.ellipse_scale_or_default(n))?
    } else {
        Vec::new()
    };
    let mut written = Vec::new();
    for &artifact in &cfg.emit {
        // analyze reads the mesh; it never rewrites it
        if artifact == Artifact::Mesh && cfg.mode == RunMode::Analyze {
            continue;
        }
        let path = cfg.out_dir.join(artifact.file_name());
        match artifact {
            Artifact::Mesh => io::export_mesh(n, &a.positions, &path)?,
            Artifact::Ellipses => io::export_ellipses(n, &records, &path)?,
            Artifact::Residual => io::export_residual(n, &a.residual, &path)?,
            Artifact::Report => io::export_report(report, &path)?,
            Artifact::Svg => io::render_svg(n, &a.positions, &records, &path)?,
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(mode: RunMode) -> Overrides {
        Overrides { mode: Some(mode), ..Default::default() }
    }

    #[test]
    fn empty_document_has_no_density() {
        let err = resolve_config(parse_config("").unwrap(), &flags(RunMode::Pma)).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "density"), "{err}");
    }

    #[test]
    fn exact_mode_rejects_non_orthogonal_preset() {
        let o = Overrides { preset: Some(Preset::Example3), ..flags(RunMode::Exact) };
        let err = resolve_config(ConfigDoc::default(), &o).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "mode"), "{err}");
        let o = Overrides { preset: Some(Preset::Example1), n: Some(60), ..flags(RunMode::Exact) };
        let cfg = resolve_config(ConfigDoc::default(), &o).unwrap();
        assert_eq!((cfg.n, cfg.mode), (60, RunMode::Exact));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = parse_config(r#"{"pma": {"gama": 0.1}}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field.starts_with("pma")), "{err}");
        let doc = r#"{"density": {"kind": "single_train",
            "train": {"amplitude": 1, "sharpness": 2, "direction": [1, 0], "scale": 1, "extra": 0}}}"#;
        assert!(parse_config(doc).is_err());
    }

    #[test]
    fn flags_override_document() {
        let doc = parse_config(r#"{"mode": "exact", "preset": "example1", "n": 32, "pma": {"tol": 0.5}}"#).unwrap();
        let o = Overrides { n: Some(40), mode: Some(RunMode::Pma), ..Default::default() };
        let cfg = resolve_config(doc, &o).unwrap();
        assert_eq!((cfg.n, cfg.mode, cfg.pma.tol), (40, RunMode::Pma, 0.5));
        assert_eq!(cfg.emit.len(), 5);
    }

    #[test]
    fn inline_density_documents_build() {
        let doc = r#"{"mode": "pma", "density": {"kind": "arclength",
            "u": {"amplitude": 0.1, "wavevector": [1, 1]}, "alpha_h": 4.0}}"#;
        let cfg = resolve_config(parse_config(doc).unwrap(), &Overrides::default()).unwrap();
        assert!(matches!(cfg.density.kind(), DensityKind::ArclengthFromU { .. }));
        let doc = r#"{"mode": "exact", "density": {"kind": "uniform"}}"#;
        assert!(resolve_config(parse_config(doc).unwrap(), &Overrides::default()).is_ok());
    }
}
