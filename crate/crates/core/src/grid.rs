//! Uniform grids on the unit torus, node-valued fields, and the periodic
//! finite-difference and spectral operators that act on them.
//!
//! A grid with `n` nodes per side has spacing `h = 1/n` and nodes
//! `ξ_ij = (i h, j h)` for `i, j = 0..n`. Node `n` is identified with node
//! `0`, so the seam is never stored twice. Values are laid out with `i`
//! (the `ξ` index) varying fastest.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{SymMat2, Vec2};

/// Smallest supported grid size.
pub const MIN_NODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ComputationalGrid {
    n: usize,
}

impl ComputationalGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES} nodes per side, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of node `(i, j)`; both indices wrap periodically.
    #[inline]
    pub fn index(&self, i: isize, j: isize) -> usize {
        let n = self.n as isize;
        let i = i.rem_euclid(n) as usize;
        let j = j.rem_euclid(n) as usize;
        j * self.n + i
    }

    /// `(i, j)` of a flat index.
    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.n, k / self.n)
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        let h = self.h();
        Vec2::new(i as f64 * h, j as f64 * h)
    }

    /// Computational coordinates of every node in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = Vec2> + '_ {
        (0..self.len()).map(move |k| {
            let (i, j) = self.coords(k);
            self.node(i, j)
        })
    }
}

/// A value attached to every node of a [`ComputationalGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: ComputationalGrid,
    values: Vec<T>,
}

/// Real values on the torus grid.
pub type PeriodicScalarField = Field<f64>;
/// One vector per node.
pub type VectorField = Field<Vec2>;
/// One symmetric 2×2 matrix per node.
pub type TensorField = Field<SymMat2>;

impl<T: Copy> Field<T> {
    pub fn filled(grid: ComputationalGrid, value: T) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: ComputationalGrid, mut f: impl FnMut(Vec2) -> T) -> Self {
        let values = grid.nodes().map(&mut f).collect();
        Self { grid, values }
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(&T) -> U) -> Field<U> {
        Field { grid: self.grid, values: self.values.iter().map(f).collect() }
    }

    pub fn grid(&self) -> ComputationalGrid {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Value at node `(i, j)` with periodic wrap.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> T {
        self.values[self.grid.index(i, j)]
    }
}

impl PeriodicScalarField {
    pub fn zeros(grid: ComputationalGrid) -> Self {
        Self::filled(grid, 0.0)
    }

    /// Builds a field from raw values in storage order, rejecting a length
    /// mismatch or any non-finite entry.
    pub fn from_values(grid: ComputationalGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = grid.coords(k);
            return Err(Error::InvalidGrid(format!("non-finite value at node ({i}, {j})")));
        }
        Ok(Self { grid, values })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &PeriodicScalarField, b: f64) -> PeriodicScalarField {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Field { grid: self.grid, values }
    }
}

/// Second-order central-difference gradient with periodic wrap.
pub fn gradient_fd(f: &PeriodicScalarField) -> VectorField {
    let grid = f.grid();
    let n = grid.n() as isize;
    let inv2h = 0.5 / grid.h();
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..n {
        for i in 0..n {
            let dx = (f.at(i + 1, j) - f.at(i - 1, j)) * inv2h;
            let dy = (f.at(i, j + 1) - f.at(i, j - 1)) * inv2h;
            out.push(Vec2::new(dx, dy));
        }
    }
    Field { grid, values: out }
}

/// Second-order central-difference Hessian with periodic wrap.
///
/// Pure second derivatives use the compact three-point stencil and the
/// mixed derivative the four-point cross stencil; the result is symmetric
/// by construction.
pub fn hessian_fd(f: &PeriodicScalarField) -> TensorField {
    let grid = f.grid();
    let n = grid.n() as isize;
    let h = grid.h();
    let inv_h2 = 1.0 / (h * h);
    let inv_4h2 = 0.25 * inv_h2;
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..n {
        for i in 0..n {
            let c = f.at(i, j);
            let fxx = (f.at(i + 1, j) - 2.0 * c + f.at(i - 1, j)) * inv_h2;
            let fyy = (f.at(i, j + 1) - 2.0 * c + f.at(i, j - 1)) * inv_h2;
            let fxy = (f.at(i + 1, j + 1) - f.at(i + 1, j - 1) - f.at(i - 1, j + 1)
                + f.at(i - 1, j - 1))
                * inv_4h2;
            out.push(SymMat2::new(fxx, fxy, fyy));
        }
    }
    Field { grid, values: out }
}

/// Derivative discretization used by the relaxation and by mesh analysis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    /// Three-point first and second differences, four-point cross difference.
    Second,
    /// Five-point first and second differences; the mixed derivative is the
    /// product of the five-point first differences.
    Fourth,
    /// Fourier differentiation. For even `n` the Nyquist mode has first
    /// derivative zero and pure second derivative `−(πn)²`.
    #[default]
    Spectral,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

fn spectral_derivatives(f: &PeriodicScalarField) -> (VectorField, TensorField) {
    let grid = f.grid();
    let n = grid.n();
    let (forward, inverse) = plans(n);
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_2d(&mut data, n, &*forward);
    let wave = |m: usize| -> f64 {
        if m <= n / 2 {
            2.0 * PI * m as f64
        } else {
            2.0 * PI * (m as f64 - n as f64)
        }
    };
    let first = |m: usize| if 2 * m == n { 0.0 } else { wave(m) };
    let norm = 1.0 / (n * n) as f64;
    let zero = Complex64::new(0.0, 0.0);
    let mut parts = vec![vec![zero; grid.len()]; 5];
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let z = data[k] * norm;
            let iz = Complex64::new(-z.im, z.re);
            parts[0][k] = iz * first(i);
            parts[1][k] = iz * first(j);
            parts[2][k] = -z * (wave(i) * wave(i));
            parts[3][k] = -z * (first(i) * first(j));
            parts[4][k] = -z * (wave(j) * wave(j));
        }
    }
    for p in parts.iter_mut() {
        fft_2d(p, n, &*inverse);
    }
    let gradient = (0..grid.len()).map(|k| Vec2::new(parts[0][k].re, parts[1][k].re)).collect();
    let hessian = (0..grid.len())
        .map(|k| SymMat2::new(parts[2][k].re, parts[3][k].re, parts[4][k].re))
        .collect();
    (Field { grid, values: gradient }, Field { grid, values: hessian })
}

fn gradient_fourth(f: &PeriodicScalarField) -> VectorField {
    let grid = f.grid();
    let n = grid.n() as isize;
    let inv12h = 1.0 / (12.0 * grid.h());
    let d = |m2: f64, m1: f64, p1: f64, p2: f64| (m2 - 8.0 * m1 + 8.0 * p1 - p2) * inv12h;
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..n {
        for i in 0..n {
            let dx = d(f.at(i - 2, j), f.at(i - 1, j), f.at(i + 1, j), f.at(i + 2, j));
            let dy = d(f.at(i, j - 2), f.at(i, j - 1), f.at(i, j + 1), f.at(i, j + 2));
            out.push(Vec2::new(dx, dy));
        }
    }
    Field { grid, values: out }
}

fn hessian_fourth(f: &PeriodicScalarField) -> TensorField {
    let grid = f.grid();
    let n = grid.n() as isize;
    let h = grid.h();
    let inv12h2 = 1.0 / (12.0 * h * h);
    let inv144h2 = 1.0 / (144.0 * h * h);
    const W: [(isize, f64); 4] = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..n {
        for i in 0..n {
            let c = f.at(i, j);
            let fxx = (-f.at(i + 2, j) + 16.0 * f.at(i + 1, j) - 30.0 * c + 16.0 * f.at(i - 1, j) - f.at(i - 2, j))
                * inv12h2;
            let fyy = (-f.at(i, j + 2) + 16.0 * f.at(i, j + 1) - 30.0 * c + 16.0 * f.at(i, j - 1) - f.at(i, j - 2))
                * inv12h2;
            let mut fxy = 0.0;
            for (di, wi) in W {
                for (dj, wj) in W {
                    fxy += wi * wj * f.at(i + di, j + dj);
                }
            }
            out.push(SymMat2::new(fxx, fxy * inv144h2, fyy));
        }
    }
    Field { grid, values: out }
}

/// Gradient and Hessian with the requested discretization.
pub fn derivatives_with(f: &PeriodicScalarField, stencil: Stencil) -> (VectorField, TensorField) {
    match stencil {
        Stencil::Second => (gradient_fd(f), hessian_fd(f)),
        Stencil::Fourth => (gradient_fourth(f), hessian_fourth(f)),
        Stencil::Spectral => spectral_derivatives(f),
    }
}

pub fn gradient_with(f: &PeriodicScalarField, stencil: Stencil) -> VectorField {
    match stencil {
        Stencil::Second => gradient_fd(f),
        Stencil::Fourth => gradient_fourth(f),
        Stencil::Spectral => spectral_derivatives(f).0,
    }
}

pub fn hessian_with(f: &PeriodicScalarField, stencil: Stencil) -> TensorField {
    match stencil {
        Stencil::Second => hessian_fd(f),
        Stencil::Fourth => hessian_fourth(f),
        Stencil::Spectral => spectral_derivatives(f).1,
    }
}

/// Solves `(I - γΔ) u = f` on the torus.
///
/// Each Fourier mode is divided by `1 + γ·4π²|k|²` using the exact
/// (spectral) Laplacian symbol. Holds cached FFT plans so repeated solves on
/// the same grid are cheap.
pub struct HelmholtzSmoother {
    grid: ComputationalGrid,
    gamma: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `1 / (1 + γ 4π² |k|²) / n²` per mode, in storage order.
    multiplier: Vec<f64>,
}

impl HelmholtzSmoother {
    pub fn new(grid: ComputationalGrid, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        let n = grid.n();
        let (forward, inverse) = plans(n);
        let wavenumber = |m: usize| -> f64 {
            if m <= n / 2 {
                m as f64
            } else {
                m as f64 - n as f64
            }
        };
        let norm = 1.0 / (n * n) as f64;
        let mut multiplier = Vec::with_capacity(grid.len());
        for j in 0..n {
            for i in 0..n {
                let (kx, ky) = (wavenumber(i), wavenumber(j));
                let symbol = 4.0 * PI * PI * (kx * kx + ky * ky);
                multiplier.push(norm / (1.0 + gamma * symbol));
            }
        }
        Ok(Self { grid, gamma, forward, inverse, multiplier })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn apply(&self, f: &PeriodicScalarField) -> PeriodicScalarField {
        assert_eq!(f.grid(), self.grid, "field grid does not match smoother grid");
        if self.gamma == 0.0 {
            return f.clone();
        }
        let n = self.grid.n();
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_2d(&mut data, n, &*self.forward);
        for (z, m) in data.iter_mut().zip(&self.multiplier) {
            *z *= *m;
        }
        fft_2d(&mut data, n, &*self.inverse);
        let values = data.iter().map(|z| z.re).collect();
        Field { grid: self.grid, values }
    }
}

fn fft_2d(data: &mut [Complex64], n: usize, plan: &dyn Fft<f64>) {
    // rows (i fastest) are contiguous
    plan.process(data);
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        for j in 0..n {
            column[j] = data[j * n + i];
        }
        plan.process(&mut column);
        for j in 0..n {
            data[j * n + i] = column[j];
        }
    }
}

/// One-shot inverse Helmholtz solve; see [`HelmholtzSmoother`].
pub fn inv_helmholtz(f: &PeriodicScalarField, gamma: f64) -> Result<PeriodicScalarField> {
    Ok(HelmholtzSmoother::new(f.grid(), gamma)?.apply(f))
}
