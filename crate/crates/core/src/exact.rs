//! Closed-form optimal-transport maps for separable densities
//! `ρ(x) = ρ₁(x·e₁) ρ₂(x·e₂)` with orthonormal `e₁, e₂`.
//!
//! The potential splits as `P = F(ξ·e₁) + G(ξ·e₂)`, and the map is
//!
//! ```text
//! x·e₁ = R₁⁻¹(θ₁ ξ·e₁),   x·e₂ = R₂⁻¹(θ₂ ξ·e₂),   R_a(t) = ∫_0^t ρ_a,
//! ```
//!
//! with Jacobian `J = (θ₁/ρ₁) e₁e₁ᵀ + (θ₂/ρ₂) e₂e₂ᵀ`.

use crate::density::{DensityKind, DensitySpec, ShockTrain};
use crate::error::{Error, Result};
use crate::grid::ComputationalGrid;
use crate::interp::MonotoneCubic;
use crate::linalg::{SymMat2, Vec2};

/// Default number of table intervals per tabulated period.
pub const DEFAULT_SAMPLES: usize = 1000;

/// Samples `(x′_i, R(x′_i))` of the cumulative density over `[0, L]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulativeTable {
    xs: Vec<f64>,
    rs: Vec<f64>,
}

impl CumulativeTable {
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn rs(&self) -> &[f64] {
        &self.rs
    }

    /// Tabulated length `L`.
    pub fn length(&self) -> f64 {
        *self.xs.last().expect("non-empty table")
    }

    /// `R(L)`; equals `θ L` when `L` is a whole number of periods.
    pub fn total(&self) -> f64 {
        *self.rs.last().expect("non-empty table")
    }
}

/// Tabulates the closed-form `tanh` antiderivative of a train at
/// `samples + 1` equispaced points over `[0, length]`.
pub fn build_r(train: &ShockTrain, length: f64, samples: usize) -> Result<CumulativeTable> {
    if samples < 1000 {
        return Err(Error::InvalidParams(format!("table needs at least 1000 samples, got {samples}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidParams("table length must be positive".into()));
    }
    let xs: Vec<f64> = (0..=samples).map(|i| length * i as f64 / samples as f64).collect();
    let rs: Vec<f64> = xs.iter().map(|&x| train.antiderivative(x)).collect();
    if let Some(k) = rs.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotoneTable { index: k + 1 });
    }
    Ok(CumulativeTable { xs, rs })
}

/// Monotone cubic interpolant of `R⁻¹` through the swapped pairs
/// `(R(x′_i), x′_i)`.
///
/// Arguments outside `[0, R(L)]` are reduced with `R(x′ + L) = R(x′) + R(L)`.
#[derive(Clone, Debug)]
pub struct InverseCumulative {
    spline: MonotoneCubic,
    length: f64,
    total: f64,
}

impl InverseCumulative {
    pub fn eval(&self, t: f64) -> f64 {
        let m = (t / self.total).floor();
        let r = t - m * self.total;
        m * self.length + self.spline.eval(r)
    }
}

/// Inverts a table with PCHIP slopes estimated from the samples.
pub fn invert_r(table: &CumulativeTable) -> Result<InverseCumulative> {
    let spline = MonotoneCubic::new(table.rs.clone(), table.xs.clone())?;
    Ok(InverseCumulative { spline, length: table.length(), total: table.total() })
}

/// Inverts a table using the known derivative `dx′/dR = 1/ρ(x′)` at each
/// sample as the Hermite slope (still limited for monotonicity).
pub fn invert_r_with_density(table: &CumulativeTable, train: &ShockTrain) -> Result<InverseCumulative> {
    let slopes = table.xs.iter().map(|&x| 1.0 / train.profile(x)).collect();
    let spline = MonotoneCubic::with_slopes(table.rs.clone(), table.xs.clone(), slopes)?;
    Ok(InverseCumulative { spline, length: table.length(), total: table.total() })
}

#[derive(Clone, Debug)]
struct Axis {
    train: ShockTrain,
    dir: Vec2,
    theta: f64,
    inverse: InverseCumulative,
}

impl Axis {
    fn new(train: ShockTrain, dir: Vec2, samples: usize) -> Result<Self> {
        let length = if train.is_trivial() { 1.0 } else { train.period() };
        let table = build_r(&train, length, samples)?;
        let theta = table.total() / table.length();
        let inverse = invert_r_with_density(&table, &train)?;
        Ok(Self { train, dir, theta, inverse })
    }

    /// Rotated physical coordinate for rotated computational coordinate.
    fn forward(&self, xi_rot: f64) -> f64 {
        self.inverse.eval(self.theta * xi_rot)
    }
}

/// Exact solution for an orthogonal pair of shock trains.
#[derive(Clone, Debug)]
pub struct SeparableSolution {
    first: Axis,
    second: Axis,
}

fn check_lattice(train: &ShockTrain, dir: Vec2) -> Result<()> {
    if train.is_trivial() {
        return Ok(());
    }
    // Shifts by lattice vectors must move x·e by whole periods.
    for c in [dir.x, dir.y] {
        let periods = c * train.scale();
        if (periods - periods.round()).abs() > 1e-9 {
            return Err(Error::NotSeparable(format!(
                "train with direction ({:.6}, {:.6}) and scale {} is not doubly periodic",
                dir.x,
                dir.y,
                train.scale()
            )));
        }
    }
    Ok(())
}

impl SeparableSolution {
    pub fn new(first: ShockTrain, second: ShockTrain, samples: usize) -> Result<Self> {
        let e1 = first.direction();
        let e2 = second.direction();
        if e1.dot(e2).abs() > 1e-12 {
            return Err(Error::NotSeparable(format!(
                "directions are not orthogonal (e1·e2 = {:e})",
                e1.dot(e2)
            )));
        }
        check_lattice(&first, e1)?;
        check_lattice(&second, e2)?;
        Ok(Self { first: Axis::new(first, e1, samples)?, second: Axis::new(second, e2, samples)? })
    }

    /// Builds the solution for a single-train or orthogonal product density.
    pub fn from_density(spec: &DensitySpec, samples: usize) -> Result<Self> {
        match spec.kind() {
            DensityKind::Uniform => {
                let x = ShockTrain::uniform(Vec2::new(1.0, 0.0))?;
                let y = ShockTrain::uniform(Vec2::new(0.0, 1.0))?;
                Self::new(x, y, samples)
            }
            DensityKind::SingleTrain(t) => {
                let other = ShockTrain::uniform(t.direction().perp())?;
                Self::new(t.clone(), other, samples)
            }
            DensityKind::ProductTrains(a, b) => Self::new(a.clone(), b.clone(), samples),
            _ => Err(Error::NotSeparable("density is not built from shock trains".into())),
        }
    }

    pub fn directions(&self) -> (Vec2, Vec2) {
        (self.first.dir, self.second.dir)
    }

    /// `(θ₁, θ₂)`.
    pub fn thetas(&self) -> (f64, f64) {
        (self.first.theta, self.second.theta)
    }

    pub fn theta(&self) -> f64 {
        self.first.theta * self.second.theta
    }

    /// Unreduced image `x(ξ)` (a lift of the torus map).
    pub fn map_lifted(&self, xi: Vec2) -> Vec2 {
        let (e1, e2) = self.directions();
        let xp = self.first.forward(xi.dot(e1));
        let yp = self.second.forward(xi.dot(e2));
        e1 * xp + e2 * yp
    }

    /// `x(ξ)` reduced into `[0, 1)²`.
    pub fn map(&self, xi: Vec2) -> Vec2 {
        self.map_lifted(xi).wrap_unit()
    }

    /// `(ρ₁, ρ₂)` at the image of `ξ`.
    pub fn factors_at(&self, xi: Vec2) -> (f64, f64) {
        let (e1, e2) = self.directions();
        let xp = self.first.forward(xi.dot(e1));
        let yp = self.second.forward(xi.dot(e2));
        (self.first.train.profile(xp), self.second.train.profile(yp))
    }

    /// `J = (θ₁/ρ₁) e₁e₁ᵀ + (θ₂/ρ₂) e₂e₂ᵀ` at `ξ`.
    pub fn jacobian(&self, xi: Vec2) -> SymMat2 {
        let (rho1, rho2) = self.factors_at(xi);
        let (e1, e2) = self.directions();
        SymMat2::from_eigen(self.first.theta / rho1, e1, self.second.theta / rho2, e2)
    }

    /// Images of every grid node, lifted, in storage order.
    pub fn mesh(&self, grid: ComputationalGrid) -> Vec<Vec2> {
        grid.nodes().map(|xi| self.map_lifted(xi)).collect()
    }
}

/// `x(ξ)` reduced into `[0, 1)²`.
pub fn exact_map(sol: &SeparableSolution, xi: Vec2) -> Vec2 {
    sol.map(xi)
}

pub fn exact_jacobian(sol: &SeparableSolution, xi: Vec2) -> SymMat2 {
    sol.jacobian(xi)
}
