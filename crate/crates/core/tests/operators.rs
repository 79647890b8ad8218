use std::f64::consts::PI;

use meshkit::grid::{
    gradient_fd, hessian_fd, inv_helmholtz, ComputationalGrid, PeriodicScalarField,
};
use proptest::prelude::*;

fn grid(n: usize) -> ComputationalGrid {
    ComputationalGrid::new(n).unwrap()
}

fn product_field(n: usize) -> PeriodicScalarField {
    PeriodicScalarField::from_fn(grid(n), |p| (2.0 * PI * p.x).sin() * (2.0 * PI * p.y).sin())
}

/// Max-norm errors of the gradient and the Hessian of `sin(2πξ) sin(2πη)`.
fn fd_errors(n: usize) -> (f64, f64) {
    let f = product_field(n);
    let w = 2.0 * PI;
    let (mut eg, mut eh) = (0.0_f64, 0.0_f64);
    for (p, (d, m)) in grid(n).nodes().zip(gradient_fd(&f).values().iter().zip(hessian_fd(&f).values())) {
        let (sx, cx, sy, cy) = ((w * p.x).sin(), (w * p.x).cos(), (w * p.y).sin(), (w * p.y).cos());
        eg = eg.max((d.x - w * cx * sy).abs()).max((d.y - w * sx * cy).abs());
        eh = eh
            .max((m.a11 + w * w * sx * sy).abs())
            .max((m.a12 - w * w * cx * cy).abs())
            .max((m.a22 + w * w * sx * sy).abs());
    }
    (eg, eh)
}

#[test]
fn finite_differences_converge_at_second_order() {
    let (g32, h32) = fd_errors(32);
    let (g64, h64) = fd_errors(64);
    for ratio in [g32 / g64, h32 / h64] {
        assert!((ratio - 4.0).abs() <= 4.0 * 0.15, "ratio {ratio}");
    }
}

#[test]
fn hessian_is_symmetric_by_construction() {
    // a single off-diagonal slot: the cross stencil is symmetric in its arguments
    let f = product_field(16);
    let h = hessian_fd(&f);
    let g = grid(16);
    for (k, m) in h.values().iter().enumerate() {
        let (i, j) = g.coords(k);
        let (i, j) = (i as isize, j as isize);
        let swapped = (f.at(i + 1, j + 1) - f.at(i - 1, j + 1) - f.at(i + 1, j - 1) + f.at(i - 1, j - 1)) / (4.0 * g.h() * g.h());
        assert!((m.a12 - swapped).abs() <= 1e-9);
    }
}

fn field_strategy(n: usize) -> impl Strategy<Value = PeriodicScalarField> {
    prop::collection::vec(-10.0..10.0_f64, n * n)
        .prop_map(move |v| PeriodicScalarField::from_values(grid(n), v).unwrap())
}

proptest! {
    #[test]
    fn constants_are_annihilated(c in -1e3..1e3_f64, n in 8usize..24) {
        let f = PeriodicScalarField::filled(grid(n), c);
        prop_assert!(gradient_fd(&f).values().iter().all(|v| v.norm() <= 1e-12 * c.abs().max(1.0)));
        prop_assert!(hessian_fd(&f).values().iter().all(|m| m.max_abs() <= 1e-12 * c.abs().max(1.0) * (n * n) as f64));
        let u = inv_helmholtz(&f, 0.3).unwrap();
        prop_assert!(u.values().iter().all(|v| (v - c).abs() <= 1e-12 * c.abs().max(1.0)));
    }

    #[test]
    fn helmholtz_is_linear(
        f in field_strategy(12),
        g in field_strategy(12),
        a in -3.0..3.0_f64,
        b in -3.0..3.0_f64,
        gamma in 0.0..2.0_f64,
    ) {
        let combo = f.axpby(a, &g, b);
        let lhs = inv_helmholtz(&combo, gamma).unwrap();
        let rhs = inv_helmholtz(&f, gamma).unwrap().axpby(a, &inv_helmholtz(&g, gamma).unwrap(), b);
        let scale = f.max_abs() + g.max_abs();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale * 10.0);
        }
    }

    #[test]
    fn helmholtz_inverts_its_operator(f in field_strategy(16), gamma in 0.0..1.0_f64) {
        // (I − γΔ)u = f with the spectral Laplacian: check on the mean and by
        // the contraction bound ‖u‖₂ ≤ ‖f‖₂
        let u = inv_helmholtz(&f, gamma).unwrap();
        prop_assert!((u.mean() - f.mean()).abs() <= 1e-12 * f.max_abs().max(1.0));
        let l2 = |v: &PeriodicScalarField| v.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(l2(&u) <= l2(&f) * (1.0 + 1e-12));
    }
}
