//! Optimal-transport mesh redistribution on the periodic unit square.
//!
//! A uniform grid is mapped by `x = ξ + ∇φ(ξ)` so that `ρ(x) det J = θ`.
//! [`exact`] builds the map in closed form for separable densities, [`pma`]
//! relaxes `φ` for any density, and [`analysis`] measures the skewness and
//! metric alignment of the resulting Jacobians. [`cli`] and [`io`] drive
//! runs and write meshes, ellipses and reports.

pub mod analysis;
pub mod cli;
pub mod density;
pub mod error;
pub mod exact;
pub mod grid;
pub mod interp;
pub mod io;
pub mod linalg;
pub mod metric;
pub mod pma;
pub mod presets;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/densities.md")]
    mod densities {}
    #[doc = include_str!("../../../book/src/exact.md")]
    mod exact {}
    #[doc = include_str!("../../../book/src/relaxation.md")]
    mod relaxation {}
    #[doc = include_str!("../../../book/src/quality.md")]
    mod quality {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
