//! Doubly-periodic scalar densities `ρ(x) > 0` and their normalization
//! constants `θ = ∫ρ dx` over the unit torus.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{SymMat2, Vec2};

/// Side length of the positivity probe grid used when validating a density.
pub const POSITIVITY_PROBE: usize = 256;

/// Default number of quadrature samples per side for [`theta_2d`].
pub const DEFAULT_QUADRATURE: usize = 256;

#[inline]
fn sech2(t: f64) -> f64 {
    let c = t.cosh();
    if c.is_finite() {
        1.0 / (c * c)
    } else {
        0.0
    }
}

/// Number of integer translates on each side needed so that the neglected
/// tail `4·exp(-2k·distance)` falls below double precision.
fn translate_window(sharpness: f64) -> i64 {
    ((20.0 / sharpness).ceil() as i64 + 1).max(3)
}

/// A periodic train of `sech²` bumps across parallel lines:
///
/// `ρ₁(x′) = 1 + A Σ_m Σ_{n∈ℤ} sech²(k (s·x′ − c_m − n))`, with `x′ = x·e`.
///
/// The train has period `1/s` in `x′`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShockTrain {
    amplitude: f64,
    sharpness: f64,
    direction: Vec2,
    scale: f64,
    offsets: Vec<f64>,
}

impl ShockTrain {
    /// `direction` is normalized; a zero amplitude gives the uniform profile.
    pub fn new(
        amplitude: f64,
        sharpness: f64,
        direction: Vec2,
        scale: f64,
        offsets: Vec<f64>,
    ) -> Result<Self> {
        let bad = |what: &str| Err(Error::InvalidDensity(what.to_string()));
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return bad("shock amplitude must be finite and non-negative");
        }
        if !(sharpness > 0.0 && sharpness.is_finite()) {
            return bad("shock sharpness must be positive");
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return bad("shock scale must be positive");
        }
        if offsets.iter().any(|c| !c.is_finite()) {
            return bad("shock offsets must be finite");
        }
        if amplitude > 0.0 && offsets.is_empty() {
            return bad("a shock train with positive amplitude needs at least one offset");
        }
        let Some(direction) = direction.normalized() else {
            return bad("shock direction must be a non-zero vector");
        };
        Ok(Self { amplitude, sharpness, direction, scale, offsets })
    }

    /// The train with `A = 0`, i.e. `ρ₁ ≡ 1`.
    pub fn uniform(direction: Vec2) -> Result<Self> {
        Self::new(0.0, 1.0, direction, 1.0, Vec::new())
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    pub fn direction(&self) -> Vec2 {
        self.direction
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Period of the profile in the rotated coordinate `x′`.
    pub fn period(&self) -> f64 {
        1.0 / self.scale
    }

    pub fn is_trivial(&self) -> bool {
        self.amplitude == 0.0
    }

    /// `ρ₁` as a function of the rotated coordinate `x′`.
    pub fn profile(&self, xp: f64) -> f64 {
        if self.is_trivial() {
            return 1.0;
        }
        let window = translate_window(self.sharpness);
        let mut sum = 0.0;
        for &c in &self.offsets {
            let u = self.scale * xp - c;
            let r = u - u.round();
            for n in -window..=window {
                sum += sech2(self.sharpness * (r - n as f64));
            }
        }
        1.0 + self.amplitude * sum
    }

    /// `ρ₁(x·e)`.
    pub fn eval(&self, x: Vec2) -> f64 {
        self.profile(x.dot(self.direction))
    }

    /// Closed-form antiderivative `R(x′) = ∫_0^{x′} ρ₁(s) ds`, built from
    /// `tanh` sums. Satisfies `R(x′ + 1/s) = R(x′) + θ₁/s`.
    pub fn antiderivative(&self, xp: f64) -> f64 {
        if self.is_trivial() {
            return xp;
        }
        let k = self.sharpness;
        let window = translate_window(k);
        // ∫_0^r Σ_n sech²(k(v − n)) dv for r ∈ [0, 1)
        let partial = |r: f64| -> f64 {
            let mut acc = 0.0;
            for n in -window..=window + 1 {
                let n = n as f64;
                acc += (k * (r - n)).tanh() - (-k * n).tanh();
            }
            acc / k
        };
        let period_mass = 2.0 / k;
        let lift = |u: f64| -> f64 {
            let p = u.floor();
            p * period_mass + partial(u - p)
        };
        let mut bumps = 0.0;
        for &c in &self.offsets {
            bumps += lift(self.scale * xp - c) - lift(-c);
        }
        xp + self.amplitude / self.scale * bumps
    }
}

/// Mean of `ρ₁` over one period, by the periodic trapezoid rule with `q`
/// samples.
pub fn theta_separable_with(train: &ShockTrain, q: usize) -> f64 {
    let period = train.period();
    let q = q.max(1);
    (0..q).map(|i| train.profile(period * i as f64 / q as f64)).sum::<f64>() / q as f64
}

/// `θ₁`: average of a shock-train profile over one period.
pub fn theta_separable(train: &ShockTrain) -> f64 {
    theta_separable_with(train, 4096)
}

/// Density concentrated along the periodic curve `Ψ(x) = 0` with
/// `Ψ = y − a·sin(2π m x) − c`:
///
/// `ρ = 1 + A Σ_{n∈ℤ} sech²(k (Ψ + n))`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetFeature {
    pub amplitude: f64,
    pub sharpness: f64,
    pub wave_amplitude: f64,
    pub wave_number: i32,
    pub offset: f64,
}

impl LevelSetFeature {
    pub fn psi(&self, x: Vec2) -> f64 {
        x.y - self.wave_amplitude * (2.0 * PI * self.wave_number as f64 * x.x).sin() - self.offset
    }

    pub fn grad_psi(&self, x: Vec2) -> Vec2 {
        let w = 2.0 * PI * self.wave_number as f64;
        Vec2::new(-self.wave_amplitude * w * (w * x.x).cos(), 1.0)
    }

    /// The point of the curve `Ψ = 0` above abscissa `x`.
    pub fn curve_point(&self, x: f64) -> Vec2 {
        let w = 2.0 * PI * self.wave_number as f64;
        Vec2::new(x, self.offset + self.wave_amplitude * (w * x).sin())
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        let psi = self.psi(x);
        let r = psi - psi.round();
        let window = translate_window(self.sharpness);
        let sum: f64 = (-window..=window).map(|n| sech2(self.sharpness * (r - n as f64))).sum();
        1.0 + self.amplitude * sum
    }

    fn validate(&self) -> Result<()> {
        let ok = self.amplitude >= 0.0
            && self.amplitude.is_finite()
            && self.sharpness > 0.0
            && self.sharpness.is_finite()
            && self.wave_amplitude.is_finite()
            && self.offset.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDensity("level-set parameters out of range".into()))
        }
    }
}

/// A smooth, doubly-periodic scalar function with analytic derivatives,
/// used to build solution-driven densities.
pub trait ScalarFunction: fmt::Debug + Send + Sync {
    fn value(&self, x: Vec2) -> f64;
    fn gradient(&self, x: Vec2) -> Vec2;
    fn hessian(&self, x: Vec2) -> SymMat2;
}

/// `u(x) = a·sin(2π (k·x) + φ)` with an integer wave vector `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SineWave {
    pub amplitude: f64,
    pub wavevector: [i32; 2],
    pub phase: f64,
}

impl SineWave {
    fn k(&self) -> Vec2 {
        Vec2::new(
            2.0 * PI * self.wavevector[0] as f64,
            2.0 * PI * self.wavevector[1] as f64,
        )
    }
}

impl ScalarFunction for SineWave {
    fn value(&self, x: Vec2) -> f64 {
        self.amplitude * (self.k().dot(x) + self.phase).sin()
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        let k = self.k();
        k * (self.amplitude * (k.dot(x) + self.phase).cos())
    }

    fn hessian(&self, x: Vec2) -> SymMat2 {
        let k = self.k();
        SymMat2::outer(k) * (-self.amplitude * (k.dot(x) + self.phase).sin())
    }
}

/// The shape of a density, before validation.
#[derive(Clone, Debug)]
pub enum DensityKind {
    Uniform,
    SingleTrain(ShockTrain),
    ProductTrains(ShockTrain, ShockTrain),
    LevelSet(LevelSetFeature),
    /// `ρ = √(1 + α_h ‖∇u‖²)`.
    ArclengthFromU { u: Arc<dyn ScalarFunction>, alpha_h: f64 },
    /// `ρ = √(1 + α_h (|u_xx| + |u_yy|))`.
    HessianFromU { u: Arc<dyn ScalarFunction>, alpha_h: f64 },
}

/// A validated, strictly positive, doubly-periodic density.
#[derive(Clone, Debug)]
pub struct DensitySpec {
    kind: DensityKind,
}

impl DensitySpec {
    /// Validates parameters and probes positivity on a
    /// [`POSITIVITY_PROBE`]² grid.
    pub fn new(kind: DensityKind) -> Result<Self> {
        match &kind {
            DensityKind::LevelSet(f) => f.validate()?,
            DensityKind::ArclengthFromU { alpha_h, .. } | DensityKind::HessianFromU { alpha_h, .. } => {
                if !(*alpha_h > 0.0 && alpha_h.is_finite()) {
                    return Err(Error::InvalidDensity("alpha_h must be positive".into()));
                }
            }
            _ => {}
        }
        let spec = Self { kind };
        let q = POSITIVITY_PROBE;
        for j in 0..q {
            for i in 0..q {
                let x = Vec2::new(i as f64 / q as f64, j as f64 / q as f64);
                let rho = spec.eval(x);
                if !(rho > 0.0 && rho.is_finite()) {
                    return Err(Error::InvalidDensity(format!(
                        "density is {rho} at ({}, {})",
                        x.x, x.y
                    )));
                }
            }
        }
        Ok(spec)
    }

    pub fn uniform() -> Self {
        Self { kind: DensityKind::Uniform }
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    /// `ρ(x)`.
    pub fn eval(&self, x: Vec2) -> f64 {
        match &self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::SingleTrain(t) => t.eval(x),
            DensityKind::ProductTrains(a, b) => a.eval(x) * b.eval(x),
            DensityKind::LevelSet(f) => f.eval(x),
            DensityKind::ArclengthFromU { u, alpha_h } => {
                let g = u.gradient(x);
                (1.0 + alpha_h * g.dot(g)).sqrt()
            }
            DensityKind::HessianFromU { u, alpha_h } => {
                let h = u.hessian(x);
                (1.0 + alpha_h * (h.a11.abs() + h.a22.abs())).sqrt()
            }
        }
    }

    /// The factors `(ρ₁, ρ₂)` for train-based densities; a single train
    /// reports `ρ₂ = 1`.
    pub fn factors(&self, x: Vec2) -> Option<(f64, f64)> {
        match &self.kind {
            DensityKind::SingleTrain(t) => Some((t.eval(x), 1.0)),
            DensityKind::ProductTrains(a, b) => Some((a.eval(x), b.eval(x))),
            _ => None,
        }
    }
}

/// `θ = ∫ρ dx` over the unit torus by the `q × q` periodic trapezoid rule.
pub fn theta_2d(spec: &DensitySpec, q: usize) -> Result<f64> {
    if q < 64 {
        return Err(Error::InvalidParams(format!("quadrature needs at least 64 points per side, got {q}")));
    }
    if matches!(spec.kind(), DensityKind::Uniform) {
        return Ok(1.0);
    }
    let inv = 1.0 / q as f64;
    let total: f64 = (0..q)
        .map(|j| {
            (0..q)
                .map(|i| spec.eval(Vec2::new(i as f64 * inv, j as f64 * inv)))
                .sum::<f64>()
        })
        .sum();
    Ok(total * inv * inv)
}
