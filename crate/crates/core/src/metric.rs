//! Jacobian and metric-tensor analysis of a mesh map.
//!
//! For a symmetric Jacobian `J = λ₁e₁e₁ᵀ + λ₂e₂e₂ᵀ` the metric to which the
//! mesh is uniform is `M = θ J⁻ᵀJ⁻¹ = θ(λ₁⁻²e₁e₁ᵀ + λ₂⁻²e₂e₂ᵀ)`. Two scalar
//! measures summarize a node:
//!
//! * `Q_s = tr(JᵀJ) / (2 det(JᵀJ)^½)`, the skewness of the element, and
//! * `Q_a = tr(JᵀMJ) / (2 det(JᵀMJ)^½)`, its departure from being
//!   equilateral in a given metric `M`.
//!
//! Both are `≥ 1`, with equality for isotropic (resp. `M`-aligned) elements.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat2, SymMat2, Vec2};

/// Determinant below which a Jacobian is treated as tangled.
pub const SINGULAR_DET: f64 = 1e-14;

/// Largest tolerated `|a12 − a21|` before a general matrix is rejected as
/// non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Ordered eigen-decomposition of a symmetric 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenPair {
    pub l1: f64,
    pub l2: f64,
    pub e1: Vec2,
    pub e2: Vec2,
}

impl EigenPair {
    pub fn reconstruct(&self) -> SymMat2 {
        SymMat2::from_eigen(self.l1, self.e1, self.l2, self.e2)
    }
}

fn canonical_sign(v: Vec2) -> Vec2 {
    if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
        -v
    } else {
        v
    }
}

/// Closed-form eigen-decomposition with `λ₁ ≤ λ₂`.
///
/// Eigenvectors are unit length with a non-negative first component (ties
/// broken by the second). A multiple eigenvalue yields the coordinate basis.
pub fn eig_sym2(m: SymMat2) -> EigenPair {
    let half_diff = 0.5 * (m.a11 - m.a22);
    let radius = half_diff.hypot(m.a12);
    let mean = 0.5 * (m.a11 + m.a22);
    if radius == 0.0 {
        return EigenPair { l1: mean, l2: mean, e1: Vec2::new(1.0, 0.0), e2: Vec2::new(0.0, 1.0) };
    }
    // the larger-magnitude root is computed directly, the other via the determinant
    let (l1, l2) = if mean >= 0.0 {
        let l2 = mean + radius;
        (m.det() / l2, l2)
    } else {
        let l1 = mean - radius;
        (l1, m.det() / l1)
    };
    // major eigenvector at angle ½·atan2(2a12, a11 − a22)
    let angle = 0.5 * m.a12.atan2(half_diff);
    let major = Vec2::new(angle.cos(), angle.sin());
    let e2 = canonical_sign(major);
    let e1 = canonical_sign(major.perp());
    EigenPair { l1, l2, e1, e2 }
}

/// Accepts a general 2×2 Jacobian only if it is symmetric to
/// [`SYMMETRY_TOL`] (scaled by its magnitude).
pub fn require_symmetric(m: &Mat2) -> Result<SymMat2> {
    let scale = m.m.iter().flatten().fold(1.0_f64, |a, v| a.max(v.abs()));
    let asymmetry = m.asymmetry();
    if asymmetry > SYMMETRY_TOL * scale {
        return Err(Error::AsymmetricJacobian { asymmetry });
    }
    Ok(m.symmetric_part())
}

fn check_nonsingular(j: &SymMat2) -> Result<f64> {
    let det = j.det();
    if !(det.abs() > SINGULAR_DET) || !det.is_finite() {
        return Err(Error::SingularJacobian { det });
    }
    Ok(det)
}

/// `M = θ J⁻ᵀJ⁻¹`, with eigenvalues `θ/λ_i²` on the eigenvectors of `J`.
pub fn metric_from_jacobian(j: SymMat2, theta: f64) -> Result<SymMat2> {
    let det = j.det();
    if !(det > SINGULAR_DET) {
        return Err(Error::SingularJacobian { det });
    }
    let inv = j.inverse().ok_or(Error::SingularJacobian { det })?;
    Ok(inv.square() * theta)
}

/// Anisotropy `Q_s = tr(JᵀJ) / (2 |det J|) = (σ₁/σ₂ + σ₂/σ₁)/2`.
pub fn qs(j: SymMat2) -> Result<f64> {
    let det = check_nonsingular(&j)?;
    let tr = j.a11 * j.a11 + 2.0 * j.a12 * j.a12 + j.a22 * j.a22;
    Ok((tr / (2.0 * det.abs())).max(1.0))
}

/// Alignment `Q_a = tr(A) / (2 √det A)` of `J` to the metric `M`, with
/// `A = JᵀMJ`.
pub fn qa(j: SymMat2, m: SymMat2) -> Result<f64> {
    if !m.is_positive_definite() {
        return Err(Error::NonPositiveMetric);
    }
    check_nonsingular(&j)?;
    let a = j.congruence(&m);
    if !a.is_positive_definite() {
        return Err(Error::NonPositiveMetric);
    }
    Ok((a.trace() / (2.0 * a.det().sqrt())).max(1.0))
}

/// `θ[I + (ρ²/θ² − 1) e₁e₁ᵀ]`: eigenvalue `ρ²/θ` across the feature (`e₁`)
/// and `θ` along it.
pub fn predicted_metric_single(rho: f64, theta: f64, e1: Vec2) -> SymMat2 {
    SymMat2::from_eigen(rho * rho / theta, e1, theta, e1.perp())
}

/// `(θ₂ρ₁²/θ₁) e₁e₁ᵀ + (θ₁ρ₂²/θ₂) e₂e₂ᵀ` with `e₂ = e₁⊥`.
pub fn predicted_metric_product(rho1: f64, rho2: f64, theta1: f64, theta2: f64, e1: Vec2) -> SymMat2 {
    SymMat2::from_eigen(
        theta2 * rho1 * rho1 / theta1,
        e1,
        theta1 * rho2 * rho2 / theta2,
        e1.perp(),
    )
}

/// Single-feature metric with the normal taken from a level-set gradient.
pub fn predicted_metric_levelset(rho: f64, theta: f64, grad_psi: Vec2) -> Result<SymMat2> {
    if grad_psi.norm() <= 1e-12 {
        return Err(Error::ZeroGradient);
    }
    let normal = grad_psi.normalized().ok_or(Error::ZeroGradient)?;
    Ok(predicted_metric_single(rho, theta, normal))
}

/// A per-node ellipse whose axes follow the eigenvectors of `J`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipseRecord {
    pub center: Vec2,
    /// Semi-axes `(a, b)` with `a ≥ b`.
    pub semi_axes: (f64, f64),
    /// Angle of the major axis from the first coordinate axis, in
    /// `(−π/2, π/2]`.
    pub angle: f64,
}

fn normalize_axis_angle(mut a: f64) -> f64 {
    while a <= -FRAC_PI_2 {
        a += std::f64::consts::PI;
    }
    while a > FRAC_PI_2 {
        a -= std::f64::consts::PI;
    }
    a
}

/// Ellipse with semi-axes `scale·|λ_i|` along the eigenvectors of `J`.
pub fn ellipse_from_jacobian(j: SymMat2, center: Vec2, scale: f64) -> Result<EllipseRecord> {
    let det = j.det();
    if !(det > SINGULAR_DET) {
        return Err(Error::SingularJacobian { det });
    }
    let eig = eig_sym2(j);
    let (major, minor, dir) = if eig.l2.abs() >= eig.l1.abs() {
        (eig.l2.abs(), eig.l1.abs(), eig.e2)
    } else {
        (eig.l1.abs(), eig.l2.abs(), eig.e1)
    };
    let angle = if major == minor { 0.0 } else { normalize_axis_angle(dir.y.atan2(dir.x)) };
    Ok(EllipseRecord { center, semi_axes: (scale * major, scale * minor), angle })
}

/// Angle in `[0, π/2]` between two lines (sign of the directions ignored).
pub fn line_angle(a: Vec2, b: Vec2) -> f64 {
    let c = (a.dot(b) / (a.norm() * b.norm())).abs().min(1.0);
    c.acos()
}

/// Angle between the eigenvector of `J` with the smallest `|λ|` (the
/// compressed direction) and a predicted feature normal.
pub fn minor_axis_angle(j: SymMat2, normal: Vec2) -> f64 {
    let eig = eig_sym2(j);
    let minor = if eig.l1.abs() <= eig.l2.abs() { eig.e1 } else { eig.e2 };
    line_angle(minor, normal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn diag45() -> (Vec2, Vec2) {
        let e1 = Vec2::new(1.0, 1.0) * (1.0 / SQRT_2);
        let e2 = Vec2::new(1.0, -1.0) * (1.0 / SQRT_2);
        (e1, e2)
    }

    #[test]
    fn identity_decomposition() {
        let e = eig_sym2(SymMat2::IDENTITY);
        assert_eq!((e.l1, e.l2), (1.0, 1.0));
        assert_eq!(e.e1, Vec2::new(1.0, 0.0));
        assert_eq!(e.e2, Vec2::new(0.0, 1.0));
    }

    #[test]
    fn rotated_feature_jacobian() {
        let (e1, e2) = diag45();
        let j = SymMat2::from_eigen(3.0 / 51.0, e1, 1.0, e2);
        let e = eig_sym2(j);
        assert!((e.l1 - 3.0 / 51.0).abs() < 1e-14);
        assert!((e.l2 - 1.0).abs() < 1e-14);
        assert!((e.e1 - e1).norm() < 1e-12);
    }

    #[test]
    fn swap_matrix() {
        let e = eig_sym2(SymMat2::new(0.0, 1.0, 0.0));
        assert!((e.l1 + 1.0).abs() < 1e-15 && (e.l2 - 1.0).abs() < 1e-15);
        assert!((e.e1 - Vec2::new(1.0, -1.0) * (1.0 / SQRT_2)).norm() < 1e-12);
        assert!((e.e2 - Vec2::new(1.0, 1.0) * (1.0 / SQRT_2)).norm() < 1e-12);
    }

    #[test]
    fn metric_of_feature_jacobian() {
        let (e1, e2) = diag45();
        let j = SymMat2::from_eigen(3.0 / 51.0, e1, 1.0, e2);
        let m = metric_from_jacobian(j, 3.0).unwrap();
        let e = eig_sym2(m);
        assert!((e.l1 - 3.0).abs() < 1e-10);
        assert!((e.l2 - 867.0).abs() < 1e-9);
        assert_eq!(metric_from_jacobian(SymMat2::IDENTITY, 1.0).unwrap(), SymMat2::IDENTITY);
        assert!(matches!(
            metric_from_jacobian(SymMat2::diag(1.0, 0.0), 1.0),
            Err(Error::SingularJacobian { .. })
        ));
    }

    #[test]
    fn qs_reference_values() {
        assert_eq!(qs(SymMat2::IDENTITY).unwrap(), 1.0);
        assert!((qs(SymMat2::diag(3.0 / 51.0, 1.0)).unwrap() - 8.529).abs() < 5e-4);
        assert!((qs(SymMat2::diag(3.0, 1.8)).unwrap() - 1.13).abs() < 5e-3);
        assert!(qs(SymMat2::ZERO).is_err());
    }

    #[test]
    fn qa_reference_values() {
        assert!((qa(SymMat2::IDENTITY, SymMat2::diag(4.0, 1.0)).unwrap() - 1.25).abs() < 1e-14);
        assert_eq!(qa(SymMat2::IDENTITY, SymMat2::IDENTITY).unwrap(), 1.0);
        let j = SymMat2::new(0.3, 0.1, 2.0);
        let m = metric_from_jacobian(j, 2.5).unwrap();
        assert!((qa(j, m).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(qa(j, SymMat2::diag(1.0, -1.0)), Err(Error::NonPositiveMetric)));
    }

    #[test]
    fn predicted_metrics() {
        let (e1, _) = diag45();
        let m = predicted_metric_single(3.0, 3.0, e1);
        assert!((m - SymMat2::scaled_identity(3.0)).max_abs() < 1e-14);
        let e = eig_sym2(predicted_metric_single(51.0, 3.0, e1));
        assert!((e.l1 - 3.0).abs() < 1e-12 && (e.l2 - 867.0).abs() < 1e-10);

        assert!((predicted_metric_product(1.0, 1.0, 1.0, 1.0, e1) - SymMat2::IDENTITY).max_abs() < 1e-15);
        let e = eig_sym2(predicted_metric_product(51.0, 11.0, 3.0, 1.8, e1));
        assert!((e.l2 - 1560.6).abs() / 1560.6 < 1e-10);
        assert!((e.l1 - 3.0 * 121.0 / 1.8).abs() / 201.67 < 1e-10);

        let g = Vec2::new(0.0, 1.0);
        let m = predicted_metric_levelset(2.0, 2.0, g).unwrap();
        assert!((m - SymMat2::scaled_identity(2.0)).max_abs() < 1e-14);
        assert!(matches!(predicted_metric_levelset(2.0, 2.0, Vec2::ZERO), Err(Error::ZeroGradient)));
        let g = Vec2::new(-0.7, 1.3);
        assert_eq!(
            predicted_metric_levelset(7.0, 2.0, g).unwrap(),
            predicted_metric_single(7.0, 2.0, g.normalized().unwrap())
        );
    }

    #[test]
    fn ellipses() {
        let c = ellipse_from_jacobian(SymMat2::IDENTITY, Vec2::ZERO, 0.25).unwrap();
        assert_eq!(c.semi_axes, (0.25, 0.25));
        assert_eq!(c.angle, 0.0);

        let (e1, e2) = diag45();
        let j = SymMat2::from_eigen(3.0 / 51.0, e1, 1.0, e2);
        let el = ellipse_from_jacobian(j, Vec2::ZERO, 0.5 / 60.0).unwrap();
        assert!((el.semi_axes.0 / el.semi_axes.1 - 17.0).abs() < 1e-10);
        assert!((el.angle + std::f64::consts::FRAC_PI_4).abs() < 1e-12);

        let off = SymMat2::from_eigen(3.0, e1, 1.8, e2);
        let el = ellipse_from_jacobian(off, Vec2::ZERO, 1.0).unwrap();
        assert!((el.semi_axes.0 / el.semi_axes.1 - 5.0 / 3.0).abs() < 1e-12);
        assert!(ellipse_from_jacobian(SymMat2::diag(1.0, -1.0), Vec2::ZERO, 1.0).is_err());
    }

    #[test]
    fn symmetry_gate() {
        assert!(require_symmetric(&Mat2::new(1.0, 0.5, 0.5, 2.0)).is_ok());
        assert!(matches!(
            require_symmetric(&Mat2::new(1.0, 0.5, 0.5 + 1e-6, 2.0)),
            Err(Error::AsymmetricJacobian { .. })
        ));
    }

    #[test]
    fn minor_axis_alignment() {
        let (e1, e2) = diag45();
        let j = SymMat2::from_eigen(0.1, e1, 2.0, e2);
        assert!(minor_axis_angle(j, e1) < 1e-12);
        assert!((minor_axis_angle(j, e2) - FRAC_PI_2).abs() < 1e-12);
    }
}
