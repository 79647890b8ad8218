//! Node-by-node anisotropy analysis of a mesh and the summary report.
//!
//! A mesh is described by its lifted node images and one symmetric Jacobian
//! per node. [`analyze_mesh`] evaluates the density, `Q_s`, `Q_a` against a
//! [`ReferenceMetric`] and the equidistribution residual at every node;
//! [`build_report`] condenses that into an [`AnisotropyReport`].

use serde::{Deserialize, Serialize};

use crate::density::{theta_separable, DensityKind, DensitySpec, LevelSetFeature, ShockTrain};
use crate::error::{Error, Result};
use crate::grid::{gradient_with, ComputationalGrid, PeriodicScalarField, Stencil};
use crate::linalg::{torus_distance, Mat2, SymMat2, Vec2};
use crate::metric::{
    ellipse_from_jacobian, metric_from_jacobian, minor_axis_angle, predicted_metric_levelset,
    predicted_metric_product, predicted_metric_single, qa, qs, EllipseRecord,
};
use crate::pma::{coefficient_of_variation, ResidualSummary};

/// Pipeline that produced a mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Exact,
    Pma,
    Analyze,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Exact => "exact",
            RunMode::Pma => "pma",
            RunMode::Analyze => "analyze",
        }
    }
}

/// Number of points on `Ψ = 0` checked for alignment of curved features.
pub const CURVE_SAMPLES: usize = 20;

/// Factor value below which a train counts as absent at a node.
pub const OFF_FEATURE: f64 = 1.5;

/// The metric a mesh is expected to be aligned with, used for `Q_a`.
#[derive(Clone, Debug)]
pub enum ReferenceMetric {
    /// `θ I`.
    Isotropic { theta: f64 },
    /// One train: eigenvalues `ρ²/θ`, `θ` on the train normal and tangent.
    Single { train: ShockTrain, theta: f64 },
    /// Orthogonal trains: the separable product metric.
    Product { first: ShockTrain, second: ShockTrain, theta1: f64, theta2: f64 },
    /// Non-orthogonal trains: the product metric in the frame of whichever
    /// train is stronger at the node.
    DominantTrain { first: ShockTrain, second: ShockTrain, theta1: f64, theta2: f64 },
    /// Curved feature: the single-train metric with normal `∇Ψ/‖∇Ψ‖`.
    LevelSet { feature: LevelSetFeature, theta: f64 },
    /// `θ J⁻²` of the mesh itself, so `Q_a ≡ 1`.
    SelfConsistent { theta: f64 },
}

impl ReferenceMetric {
    pub fn for_density(spec: &DensitySpec, theta: f64) -> Self {
        match spec.kind() {
            DensityKind::Uniform => ReferenceMetric::Isotropic { theta },
            DensityKind::SingleTrain(t) => ReferenceMetric::Single { train: t.clone(), theta },
            DensityKind::ProductTrains(a, b) => {
                let (first, second) = (a.clone(), b.clone());
                let (theta1, theta2) = (theta_separable(a), theta_separable(b));
                if a.direction().dot(b.direction()).abs() <= 1e-12 {
                    ReferenceMetric::Product { first, second, theta1, theta2 }
                } else {
                    ReferenceMetric::DominantTrain { first, second, theta1, theta2 }
                }
            }
            DensityKind::LevelSet(f) => ReferenceMetric::LevelSet { feature: f.clone(), theta },
            DensityKind::ArclengthFromU { .. } | DensityKind::HessianFromU { .. } => {
                ReferenceMetric::SelfConsistent { theta }
            }
        }
    }

    /// Reference metric at physical point `x` for a node with Jacobian `j`.
    pub fn at(&self, x: Vec2, j: SymMat2) -> Result<SymMat2> {
        Ok(match self {
            ReferenceMetric::Isotropic { theta } => SymMat2::scaled_identity(*theta),
            ReferenceMetric::Single { train, theta } => {
                predicted_metric_single(train.eval(x), *theta, train.direction())
            }
            ReferenceMetric::Product { first, second, theta1, theta2 } => predicted_metric_product(
                first.eval(x),
                second.eval(x),
                *theta1,
                *theta2,
                first.direction(),
            ),
            ReferenceMetric::DominantTrain { first, second, theta1, theta2 } => {
                let (r1, r2) = (first.eval(x), second.eval(x));
                if r1 >= r2 {
                    predicted_metric_product(r1, r2, *theta1, *theta2, first.direction())
                } else {
                    predicted_metric_product(r2, r1, *theta2, *theta1, second.direction())
                }
            }
            ReferenceMetric::LevelSet { feature, theta } => {
                predicted_metric_levelset(feature.eval(x), *theta, feature.grad_psi(x))?
            }
            ReferenceMetric::SelfConsistent { theta } => metric_from_jacobian(j, *theta)?,
        })
    }
}

/// Per-node quantities of an analyzed mesh, in storage order.
#[derive(Clone, Debug)]
pub struct MeshAnalysis {
    pub grid: ComputationalGrid,
    pub theta: f64,
    /// Lifted node images.
    pub positions: Vec<Vec2>,
    pub jacobians: Vec<SymMat2>,
    pub rho: Vec<f64>,
    pub qs: Vec<f64>,
    pub qa: Vec<f64>,
    /// `ρ det J / θ − 1`.
    pub residual: Vec<f64>,
    /// `(ρ₁, ρ₂)` for train densities.
    pub factors: Option<Vec<(f64, f64)>>,
}

impl MeshAnalysis {
    pub fn residual_summary(&self) -> ResidualSummary {
        let rj: Vec<f64> = self.residual.iter().map(|r| (r + 1.0) * self.theta).collect();
        let max = self.residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        ResidualSummary { max, cv: coefficient_of_variation(&rj) }
    }
}

pub fn analyze_mesh(
    spec: &DensitySpec,
    grid: ComputationalGrid,
    positions: Vec<Vec2>,
    jacobians: Vec<SymMat2>,
    theta: f64,
) -> Result<MeshAnalysis> {
    if positions.len() != grid.len() || jacobians.len() != grid.len() {
        return Err(Error::InvalidGrid(format!(
            "expected {} nodes, got {} positions and {} Jacobians",
            grid.len(),
            positions.len(),
            jacobians.len()
        )));
    }
    let reference = ReferenceMetric::for_density(spec, theta);
    let n = grid.len();
    let (mut rho, mut qs_v, mut qa_v, mut residual) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (x, j) in positions.iter().zip(&jacobians) {
        let r = spec.eval(*x);
        rho.push(r);
        qs_v.push(qs(*j)?);
        qa_v.push(qa(*j, reference.at(*x, *j)?)?);
        residual.push(r * j.det() / theta - 1.0);
    }
    let factors = spec.factors(Vec2::ZERO).map(|_| {
        positions.iter().map(|x| spec.factors(*x).expect("train density")).collect()
    });
    Ok(MeshAnalysis { grid, theta, positions, jacobians, rho, qs: qs_v, qa: qa_v, residual, factors })
}

/// Jacobians recovered from tabulated node images by differentiating the
/// periodic displacement with `stencil`, symmetrized.
pub fn jacobians_from_mesh(grid: ComputationalGrid, lifted: &[Vec2], stencil: Stencil) -> Result<Vec<SymMat2>> {
    if lifted.len() != grid.len() {
        return Err(Error::InvalidGrid(format!("expected {} nodes, got {}", grid.len(), lifted.len())));
    }
    let disp: Vec<Vec2> = grid.nodes().zip(lifted).map(|(xi, x)| *x - xi).collect();
    let dx = PeriodicScalarField::from_values(grid, disp.iter().map(|d| d.x).collect())?;
    let dy = PeriodicScalarField::from_values(grid, disp.iter().map(|d| d.y).collect())?;
    let gx = gradient_with(&dx, stencil);
    let gy = gradient_with(&dy, stencil);
    Ok(gx
        .values()
        .iter()
        .zip(gy.values())
        .map(|(a, b)| Mat2::new(1.0 + a.x, a.y, b.x, 1.0 + b.y).symmetric_part())
        .collect())
}

/// A named node at which `Q_s` and `Q_a` are reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub i: usize,
    pub j: usize,
    pub qs: f64,
    pub qa: f64,
}

fn argmax_by(values: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k)
}

fn probe(a: &MeshAnalysis, name: &str, k: usize) -> Probe {
    let (i, j) = a.grid.coords(k);
    Probe { name: name.into(), i, j, qs: a.qs[k], qa: a.qa[k] }
}

/// Node with the largest `ρ(x_ij)` (first in storage order on ties).
pub fn feature_node(a: &MeshAnalysis) -> usize {
    argmax_by(a.rho.iter().copied().enumerate()).expect("non-empty mesh")
}

/// Node with the smallest `ρ(x_ij)`.
pub fn background_node(a: &MeshAnalysis) -> usize {
    argmax_by(a.rho.iter().map(|r| -r).enumerate()).expect("non-empty mesh")
}

/// For train products: the node where each train most dominates the other,
/// `argmax ρ₁/ρ₂` over nodes with `ρ₂ <` [`OFF_FEATURE`] and vice versa.
pub fn single_feature_nodes(a: &MeshAnalysis) -> Option<(Option<usize>, Option<usize>)> {
    let f = a.factors.as_ref()?;
    let first = argmax_by(f.iter().enumerate().filter(|(_, p)| p.1 < OFF_FEATURE).map(|(k, p)| (k, p.0 / p.1)));
    let second = argmax_by(f.iter().enumerate().filter(|(_, p)| p.0 < OFF_FEATURE).map(|(k, p)| (k, p.1 / p.0)));
    Some((first, second))
}

/// Probe nodes: for two-train densities the first train alone, the second
/// alone, the crossing and the background; otherwise feature and
/// background.
pub fn probes(spec: &DensitySpec, a: &MeshAnalysis) -> Vec<Probe> {
    let feature = feature_node(a);
    let background = background_node(a);
    match spec.kind() {
        DensityKind::ProductTrains(..) => {
            let (first, second) = single_feature_nodes(a).expect("train density");
            let mut out = Vec::with_capacity(4);
            if let Some(k) = first {
                out.push(probe(a, "first_feature", k));
            }
            if let Some(k) = second {
                out.push(probe(a, "second_feature", k));
            }
            out.push(probe(a, "intersection", feature));
            out.push(probe(a, "background", background));
            out
        }
        _ => vec![probe(a, "feature", feature), probe(a, "background", background)],
    }
}

/// Angle between the compressed eigenvector of `J` and a predicted feature
/// normal at one node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSample {
    pub name: String,
    pub i: usize,
    pub j: usize,
    pub angle_deg: f64,
}

fn nearest_node(a: &MeshAnalysis, p: Vec2) -> usize {
    argmax_by(a.positions.iter().map(|x| -torus_distance(*x, p)).enumerate()).expect("non-empty mesh")
}

fn sample(a: &MeshAnalysis, name: String, k: usize, normal: Vec2) -> AlignmentSample {
    let (i, j) = a.grid.coords(k);
    AlignmentSample { name, i, j, angle_deg: minor_axis_angle(a.jacobians[k], normal).to_degrees() }
}

/// Alignment of the mesh with each single feature: train probes against
/// their train normals and, for curved features, the node nearest each of
/// [`CURVE_SAMPLES`] points of `Ψ = 0` against `∇Ψ`.
pub fn feature_alignment(spec: &DensitySpec, a: &MeshAnalysis) -> Vec<AlignmentSample> {
    match spec.kind() {
        DensityKind::SingleTrain(t) => {
            vec![sample(a, "feature".into(), feature_node(a), t.direction())]
        }
        DensityKind::ProductTrains(t1, t2) => {
            let (first, second) = single_feature_nodes(a).expect("train density");
            let mut out = Vec::new();
            if let Some(k) = first {
                out.push(sample(a, "first_feature".into(), k, t1.direction()));
            }
            if let Some(k) = second {
                out.push(sample(a, "second_feature".into(), k, t2.direction()));
            }
            out
        }
        DensityKind::LevelSet(f) => {
            let mut out = vec![sample(a, "feature".into(), feature_node(a), f.grad_psi(a.positions[feature_node(a)]))];
            for s in 0..CURVE_SAMPLES {
                let p = f.curve_point(s as f64 / CURVE_SAMPLES as f64);
                let k = nearest_node(a, p);
                out.push(sample(a, format!("curve_{s:02}"), k, f.grad_psi(a.positions[k])));
            }
            out
        }
        _ => Vec::new(),
    }
}

/// Ellipse per node, centered at the reduced image.
pub fn ellipses(a: &MeshAnalysis, scale: f64) -> Result<Vec<EllipseRecord>> {
    a.positions
        .iter()
        .zip(&a.jacobians)
        .map(|(x, j)| ellipse_from_jacobian(*j, x.wrap_unit(), scale))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QsSummary {
    pub feature: f64,
    pub background: f64,
    pub probes: Vec<Probe>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaSummary {
    pub min: f64,
    pub max: f64,
}

/// Summary of a run, serialized as `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnisotropyReport {
    pub theta: f64,
    pub n: usize,
    pub mode: RunMode,
    pub qs: QsSummary,
    pub qa: QaSummary,
    pub residual: ResidualSummary,
    pub steps: usize,
    pub converged: bool,
}

pub fn build_report(
    spec: &DensitySpec,
    a: &MeshAnalysis,
    mode: RunMode,
    steps: usize,
    converged: bool,
) -> AnisotropyReport {
    let qa_min = a.qa.iter().copied().fold(f64::INFINITY, f64::min);
    let qa_max = a.qa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    AnisotropyReport {
        theta: a.theta,
        n: a.grid.n(),
        mode,
        qs: QsSummary {
            feature: a.qs[feature_node(a)],
            background: a.qs[background_node(a)],
            probes: probes(spec, a),
        },
        qa: QaSummary { min: qa_min, max: qa_max },
        residual: a.residual_summary(),
        steps,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn identity(spec: &DensitySpec, n: usize) -> MeshAnalysis {
        let grid = ComputationalGrid::new(n).unwrap();
        let pos: Vec<Vec2> = grid.nodes().collect();
        analyze_mesh(spec, grid, pos, vec![SymMat2::IDENTITY; grid.len()], 1.0).unwrap()
    }

    #[test]
    fn uniform_identity_is_isotropic_and_equidistributed() {
        let a = identity(&DensitySpec::uniform(), 8);
        assert!(a.qs.iter().chain(&a.qa).all(|&q| (q - 1.0).abs() < 1e-15));
        assert_eq!(a.residual_summary(), ResidualSummary { max: 0.0, cv: 0.0 });
        let r = build_report(&DensitySpec::uniform(), &a, RunMode::Pma, 0, true);
        assert_eq!(r.qs.probes.len(), 2);
        assert_eq!((r.qa.min, r.qa.max), (1.0, 1.0));
    }

    #[test]
    fn product_probes_follow_train_roles() {
        let spec = presets::example2_density();
        let a = identity(&spec, 60);
        let p = probes(&spec, &a);
        let names: Vec<&str> = p.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["first_feature", "second_feature", "intersection", "background"]);
        let f = a.factors.as_ref().unwrap();
        let k = a.grid.index(p[0].i as isize, p[0].j as isize);
        assert!(f[k].0 > 40.0 && f[k].1 < OFF_FEATURE);
        let k = a.grid.index(p[1].i as isize, p[1].j as isize);
        assert!(f[k].1 > 5.0 && f[k].0 < OFF_FEATURE);
    }

    #[test]
    fn identity_mesh_jacobians_from_mesh() {
        let grid = ComputationalGrid::new(12).unwrap();
        let pos: Vec<Vec2> = grid.nodes().collect();
        for s in [Stencil::Second, Stencil::Fourth] {
            let j = jacobians_from_mesh(grid, &pos, s).unwrap();
            assert!(j.iter().all(|m| (*m - SymMat2::IDENTITY).max_abs() < 1e-12));
        }
    }

    #[test]
    fn dominant_train_switches_frame() {
        let spec = presets::example3_density();
        let m = ReferenceMetric::for_density(&spec, 5.4);
        assert!(matches!(m, ReferenceMetric::DominantTrain { .. }));
        let (t1, _) = presets::example3_trains();
        // on the strong train, the stiff eigenvector is its normal
        let x = Vec2::new(0.25, 0.25);
        assert!(t1.eval(x) > 50.0);
        let metric = m.at(x, SymMat2::IDENTITY).unwrap();
        let e = crate::metric::eig_sym2(metric);
        assert!(crate::metric::line_angle(e.e2, t1.direction()) < 1e-9);
    }

    #[test]
    fn curve_alignment_has_one_sample_per_point_plus_feature() {
        let spec = presets::example4_density();
        let a = identity(&spec, 16);
        assert_eq!(feature_alignment(&spec, &a).len(), CURVE_SAMPLES + 1);
    }
}
