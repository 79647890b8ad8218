//! Parabolic Monge–Ampère relaxation.
//!
//! The mesh potential is `P(ξ) = ½|ξ|² + φ(ξ)` with periodic `φ`, so the map
//! is `x = ξ + ∇φ` and its Jacobian is `J = I + H(φ)`. The potential evolves
//! by the smoothed parabolic law
//!
//! ```text
//! (I − γΔ) φ_t = q − mean(q),   q = (ρ(ξ + ∇φ) det(I + H(φ)))^½,
//! ```
//!
//! discretized with explicit Euler steps. A steady state has `ρ·det J`
//! constant over the grid, which is the Monge–Ampère equation
//! `ρ(∇P) det H(P) = θ`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{theta_2d, DensitySpec, DEFAULT_QUADRATURE};
use crate::error::{Error, Result};
use crate::grid::{
    derivatives_with, gradient_with, hessian_with, ComputationalGrid, HelmholtzSmoother, PeriodicScalarField, Stencil,
    TensorField,
};
use crate::linalg::{SymMat2, Vec2};

/// Time steps are halved on rejection down to this floor.
pub const DT_MIN: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmaParams {
    pub gamma: f64,
    pub dt: f64,
    /// Stop when the coefficient of variation of `ρJ` is at most `tol` and
    /// `ρJ` over its node mean lies in `[1/(1 + tol), 1 + tol]` everywhere.
    pub tol: f64,
    pub max_steps: usize,
    pub stencil: Stencil,
}

impl Default for PmaParams {
    fn default() -> Self {
        Self { gamma: 0.1, dt: 1e-3, tol: 1e-2, max_steps: 200_000, stencil: Stencil::Spectral }
    }
}

impl PmaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.dt >= 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be >= 0, got {}", self.dt)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParams(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParams("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// The periodic part `φ` of a convex mesh potential, with the stencil used
/// to differentiate it.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialState {
    phi: PeriodicScalarField,
    stencil: Stencil,
}

const LOW_MODES: [(f64, f64); 4] = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0)];

impl PotentialState {
    /// `φ = 0`: the identity mesh.
    pub fn identity(grid: ComputationalGrid) -> Self {
        Self { phi: PeriodicScalarField::zeros(grid), stencil: Stencil::default() }
    }

    /// Wraps `φ`, checking that `I + H(φ)` is positive definite everywhere.
    pub fn new(phi: PeriodicScalarField) -> Result<Self> {
        Self { phi, stencil: Stencil::default() }.checked()
    }

    /// The same potential differentiated with `stencil`.
    pub fn with_stencil(self, stencil: Stencil) -> Result<Self> {
        Self { stencil, ..self }.checked()
    }

    fn checked(self) -> Result<Self> {
        if let Some((i, j)) = self.first_nonconvex_node() {
            return Err(Error::InvalidParams(format!("potential is not convex at node ({i}, {j})")));
        }
        Ok(self)
    }

    /// A smooth random perturbation of the identity: six modes with
    /// `|k|² ≤ 2` and total amplitude `amplitude`, drawn from `seed`.
    /// Convex whenever `amplitude < 1/(8π²)`.
    pub fn smooth_random(grid: ComputationalGrid, amplitude: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(f64, f64, f64, f64)> = (0..6)
            .map(|_| {
                let (kx, ky) = LOW_MODES[rng.random_range(0..LOW_MODES.len())];
                (rng.random_range(-1.0..1.0), kx, ky, rng.random_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        let norm: f64 = modes.iter().map(|m| m.0.abs()).sum::<f64>().max(1e-12);
        let tau = std::f64::consts::TAU;
        let phi = PeriodicScalarField::from_fn(grid, |p| {
            modes.iter().map(|&(a, kx, ky, ph)| a * (tau * (kx * p.x + ky * p.y) + ph).sin()).sum::<f64>()
                * (amplitude / norm)
        });
        Self::new(phi)
    }

    pub fn phi(&self) -> &PeriodicScalarField {
        &self.phi
    }

    pub fn grid(&self) -> ComputationalGrid {
        self.phi.grid()
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    /// `J = I + H(φ)` at every node.
    pub fn jacobians(&self) -> TensorField {
        hessian_with(&self.phi, self.stencil).map(|h| SymMat2::IDENTITY + *h)
    }

    /// Unreduced images `ξ + ∇φ` in storage order.
    pub fn images(&self) -> Vec<Vec2> {
        let grad = gradient_with(&self.phi, self.stencil);
        self.grid().nodes().zip(grad.values()).map(|(xi, g)| xi + *g).collect()
    }

    /// Images and Jacobians from one differentiation pass.
    pub fn images_and_jacobians(&self) -> (Vec<Vec2>, TensorField) {
        let (grad, hess) = derivatives_with(&self.phi, self.stencil);
        let images = self.grid().nodes().zip(grad.values()).map(|(xi, g)| xi + *g).collect();
        (images, hess.map(|h| SymMat2::IDENTITY + *h))
    }

    fn first_nonconvex_node(&self) -> Option<(usize, usize)> {
        let jac = self.jacobians();
        jac.values()
            .iter()
            .position(|j| !j.is_positive_definite())
            .map(|k| self.grid().coords(k))
    }

    /// Adds a constant to `φ` (a gauge change that leaves the map unchanged).
    pub fn shifted(&self, c: f64) -> Self {
        Self { phi: self.phi.map(|v| v + c), stencil: self.stencil }
    }
}

/// Node coordinates of the mesh generated by a potential.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    grid: ComputationalGrid,
    lifted: Vec<Vec2>,
}

impl Mesh {
    pub fn new(grid: ComputationalGrid, lifted: Vec<Vec2>) -> Result<Self> {
        if lifted.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("expected {} nodes, got {}", grid.len(), lifted.len())));
        }
        Ok(Self { grid, lifted })
    }

    pub fn grid(&self) -> ComputationalGrid {
        self.grid
    }

    /// Images before reduction; `lifted − ξ` is periodic.
    pub fn lifted(&self) -> &[Vec2] {
        &self.lifted
    }

    /// Images reduced into `[0, 1)²`.
    pub fn positions(&self) -> Vec<Vec2> {
        self.lifted.iter().map(|p| p.wrap_unit()).collect()
    }

    /// Periodic displacement `x − ξ` at node `(i, j)` (indices wrap).
    pub fn displacement(&self, i: isize, j: isize) -> Vec2 {
        let k = self.grid.index(i, j);
        let (ii, jj) = self.grid.coords(k);
        self.lifted[k] - self.grid.node(ii, jj)
    }
}

/// `x_ij = ξ_ij + (∇φ)_ij`.
pub fn mesh_from_potential(state: &PotentialState) -> Mesh {
    Mesh { grid: state.grid(), lifted: state.images() }
}

/// Summary of the equidistribution residual `ρJ/θ − 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub max: f64,
    pub cv: f64,
}

/// Coefficient of variation (population standard deviation over mean).
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt() / mean
}

fn rho_times_det(state: &PotentialState, spec: &DensitySpec) -> Vec<f64> {
    let (images, jac) = state.images_and_jacobians();
    images.iter().zip(jac.values()).map(|(x, j)| spec.eval(*x) * j.det()).collect()
}

/// Per-node `ρ(x_ij) det(J_ij)/θ − 1` with its max-abs and the coefficient
/// of variation of `ρJ`.
pub fn equidist_residual_with_theta(
    state: &PotentialState,
    spec: &DensitySpec,
    theta: f64,
) -> (PeriodicScalarField, ResidualSummary) {
    let rj = rho_times_det(state, spec);
    let cv = coefficient_of_variation(&rj);
    let r: Vec<f64> = rj.iter().map(|v| v / theta - 1.0).collect();
    let max = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let field = PeriodicScalarField::from_values(state.grid(), r).expect("finite residual");
    (field, ResidualSummary { max, cv })
}

/// As [`equidist_residual_with_theta`], with `θ` from quadrature.
pub fn equidist_residual(state: &PotentialState, spec: &DensitySpec) -> Result<(PeriodicScalarField, ResidualSummary)> {
    let theta = theta_2d(spec, DEFAULT_QUADRATURE)?;
    Ok(equidist_residual_with_theta(state, spec, theta))
}

/// One progress record per accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub step: usize,
    pub dt: f64,
    pub cv: f64,
    pub max_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub steps: usize,
    pub final_cv: f64,
    pub final_max_residual: f64,
    pub converged: bool,
    /// Time step in use when the iteration stopped.
    pub final_dt: f64,
}

struct Evaluation {
    summary: ResidualSummary,
    converged: bool,
}

/// Relaxation driver with cached smoother and normalization constant.
pub struct PmaSolver<'a> {
    spec: &'a DensitySpec,
    params: PmaParams,
    smoother: HelmholtzSmoother,
    grid: ComputationalGrid,
    theta: f64,
}

impl<'a> PmaSolver<'a> {
    pub fn new(spec: &'a DensitySpec, grid: ComputationalGrid, params: PmaParams) -> Result<Self> {
        params.validate()?;
        let smoother = HelmholtzSmoother::new(grid, params.gamma)?;
        let theta = theta_2d(spec, DEFAULT_QUADRATURE)?;
        Ok(Self { spec, params, smoother, grid, theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn params(&self) -> &PmaParams {
        &self.params
    }

    /// `q = (ρ(ξ+∇φ) det(I + H(φ)))^½` at every node.
    fn forcing(&self, state: &PotentialState) -> Result<PeriodicScalarField> {
        let grid = state.grid();
        let rj = rho_times_det(state, self.spec);
        let mut q = Vec::with_capacity(rj.len());
        for (k, v) in rj.into_iter().enumerate() {
            if !(v > 0.0) {
                let (i, j) = grid.coords(k);
                return Err(Error::StepRejected { i, j, dt: 0.0 });
            }
            q.push(v.sqrt());
        }
        PeriodicScalarField::from_values(grid, q)
    }

    /// One explicit step with time step `dt`, differentiating with the
    /// solver's stencil.
    pub fn step(&self, state: &PotentialState, dt: f64) -> Result<PotentialState> {
        if dt == 0.0 {
            return Ok(state.clone());
        }
        let relabeled;
        let state = if state.stencil == self.params.stencil {
            state
        } else {
            relabeled = PotentialState { phi: state.phi.clone(), stencil: self.params.stencil };
            &relabeled
        };
        let q = self.forcing(state)?;
        let mean = q.mean();
        let centered = q.map(|v| v - mean);
        let update = self.smoother.apply(&centered);
        let next = PotentialState { phi: state.phi.axpby(1.0, &update, dt), stencil: state.stencil };
        if let Some((i, j)) = next.first_nonconvex_node() {
            return Err(Error::StepRejected { i, j, dt });
        }
        Ok(next)
    }

    pub fn residual(&self, state: &PotentialState) -> ResidualSummary {
        self.evaluate(state).summary
    }

    pub fn is_converged(&self, state: &PotentialState) -> bool {
        self.evaluate(state).converged
    }

    fn evaluate(&self, state: &PotentialState) -> Evaluation {
        let rj = rho_times_det(state, self.spec);
        let cv = coefficient_of_variation(&rj);
        let max = rj.iter().fold(0.0_f64, |m, v| m.max((v / self.theta - 1.0).abs()));
        let mean = rj.iter().sum::<f64>() / rj.len() as f64;
        let band = (1.0 + self.params.tol).ln();
        let within = rj.iter().all(|v| (v / mean).ln().abs() <= band);
        Evaluation { summary: ResidualSummary { max, cv }, converged: cv <= self.params.tol && within }
    }

    /// Iterates until converged (see [`PmaParams::tol`]) or `max_steps`,
    /// halving `dt` whenever a step would break convexity.
    pub fn solve(
        &self,
        init: Option<PotentialState>,
        mut progress: Option<&mut dyn FnMut(&ProgressRecord)>,
    ) -> Result<(PotentialState, ConvergenceReport)> {
        let grid = self.grid;
        let state = init.unwrap_or_else(|| PotentialState::identity(grid));
        if state.grid() != grid {
            return Err(Error::InvalidGrid("initial potential lives on a different grid".into()));
        }
        let mut state = state.with_stencil(self.params.stencil)?;
        let mut dt = self.params.dt;
        let mut steps = 0;
        let mut eval = self.evaluate(&state);
        while !eval.converged && steps < self.params.max_steps {
            match self.step(&state, dt) {
                Ok(next) => {
                    state = next;
                    steps += 1;
                    eval = self.evaluate(&state);
                    if let Some(cb) = progress.as_deref_mut() {
                        let s = eval.summary;
                        cb(&ProgressRecord { step: steps, dt, cv: s.cv, max_residual: s.max });
                    }
                }
                Err(Error::StepRejected { i, j, .. }) => {
                    dt *= 0.5;
                    if dt < DT_MIN {
                        return Err(Error::StepRejected { i, j, dt });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        let report = ConvergenceReport {
            steps,
            final_cv: eval.summary.cv,
            final_max_residual: eval.summary.max,
            converged: eval.converged,
            final_dt: dt,
        };
        Ok((state, report))
    }
}

/// One relaxation step; see [`PmaSolver::step`].
pub fn pma_step(state: &PotentialState, spec: &DensitySpec, params: &PmaParams) -> Result<PotentialState> {
    PmaSolver::new(spec, state.grid(), *params)?.step(state, params.dt)
}

/// Relaxes from `init` (default: identity mesh) to equidistribution.
pub fn pma_solve(
    spec: &DensitySpec,
    grid: ComputationalGrid,
    params: &PmaParams,
    init: Option<PotentialState>,
) -> Result<(PotentialState, ConvergenceReport)> {
    PmaSolver::new(spec, grid, *params)?.solve(init, None)
}

/// Writes each progress record as one JSON line.
pub fn json_lines_sink<W: Write>(out: &mut W) -> impl FnMut(&ProgressRecord) + '_ {
    move |rec| {
        // progress output is best effort
        if serde_json::to_writer(&mut *out, rec).is_ok() {
            let _ = writeln!(out);
        }
    }
}
