//! The four benchmark densities: a diagonal shock train, two orthogonal
//! trains, two non-orthogonal trains, and a sinusoidal curved shock.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::{DensityKind, DensitySpec, LevelSetFeature, ShockTrain};
use crate::linalg::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Example1,
    Example2,
    Example3,
    Example4,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Example1, Preset::Example2, Preset::Example3, Preset::Example4];

    pub fn density(self) -> DensitySpec {
        match self {
            Preset::Example1 => example1_density(),
            Preset::Example2 => example2_density(),
            Preset::Example3 => example3_density(),
            Preset::Example4 => example4_density(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
            Preset::Example3 => "example3",
            Preset::Example4 => "example4",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected example1..example4)"))
    }
}

fn diag() -> Vec2 {
    Vec2::new(1.0, 1.0) * (1.0 / SQRT_2)
}

/// `1 + 50 Σ sech²(50(√2 x′ − n))`, `x′ = x·(1,1)/√2`.
pub fn example1_train() -> ShockTrain {
    ShockTrain::new(50.0, 50.0, diag(), SQRT_2, vec![0.0]).expect("valid preset")
}

/// `1 + 10 Σ sech²(25(√2 y′ − m))`, `y′ = x·(−1,1)/√2`.
pub fn example2_second_train() -> ShockTrain {
    ShockTrain::new(10.0, 25.0, diag().perp(), SQRT_2, vec![0.0]).expect("valid preset")
}

pub fn example1_density() -> DensitySpec {
    DensitySpec::new(DensityKind::SingleTrain(example1_train())).expect("valid preset")
}

pub fn example2_density() -> DensitySpec {
    DensitySpec::new(DensityKind::ProductTrains(example1_train(), example2_second_train()))
        .expect("valid preset")
}

/// Strong train normal to `(−1, 1)/√2` crossed with a weaker train normal to
/// `(1, 2)/√5`.
pub fn example3_trains() -> (ShockTrain, ShockTrain) {
    let first = ShockTrain::new(50.0, 50.0, Vec2::new(-1.0, 1.0), SQRT_2, vec![0.0]).expect("valid preset");
    // Centers 2i−1 coincide modulo the unit period of √5·y′, so a single
    // offset represents the whole family.
    let second = ShockTrain::new(10.0, 25.0, Vec2::new(1.0, 2.0), 5f64.sqrt(), vec![1.0]).expect("valid preset");
    (first, second)
}

pub fn example3_density() -> DensitySpec {
    let (a, b) = example3_trains();
    DensitySpec::new(DensityKind::ProductTrains(a, b)).expect("valid preset")
}

/// `Ψ = y − 0.2 sin(2πx) − 0.5`, `ρ = 1 + 50 sech²(50 Ψ)`.
pub fn example4_feature() -> LevelSetFeature {
    LevelSetFeature { amplitude: 50.0, sharpness: 50.0, wave_amplitude: 0.2, wave_number: 1, offset: 0.5 }
}

pub fn example4_density() -> DensitySpec {
    DensitySpec::new(DensityKind::LevelSet(example4_feature())).expect("valid preset")
}
