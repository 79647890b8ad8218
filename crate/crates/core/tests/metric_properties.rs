use std::f64::consts::{FRAC_PI_4, SQRT_2};

use meshkit::exact::{SeparableSolution, DEFAULT_SAMPLES};
use meshkit::linalg::{SymMat2, Vec2};
use meshkit::metric::{
    eig_sym2, ellipse_from_jacobian, metric_from_jacobian, predicted_metric_levelset, predicted_metric_product,
    predicted_metric_single, qa, qs,
};
use meshkit::presets::{example2_second_train, example1_train, Preset};
use proptest::prelude::*;

fn unit(angle: f64) -> Vec2 {
    Vec2::new(angle.cos(), angle.sin())
}

/// Symmetric positive-definite matrix from eigenvalues and a rotation.
fn spd() -> impl Strategy<Value = SymMat2> {
    (-4.0..4.0_f64, -4.0..4.0_f64, 0.0..std::f64::consts::PI)
        .prop_map(|(a, b, t)| SymMat2::from_eigen(a.exp(), unit(t), b.exp(), unit(t).perp()))
}

fn symmetric() -> impl Strategy<Value = SymMat2> {
    (-10.0..10.0_f64, -10.0..10.0_f64, -10.0..10.0_f64).prop_map(|(a, b, c)| SymMat2::new(a, b, c))
}

/// `tr(A)/(2√det A)` with `A = JᵀMJ` formed as a dense product.
fn qa_oracle(j: SymMat2, m: SymMat2) -> f64 {
    let jd = [[j.a11, j.a12], [j.a12, j.a22]];
    let md = [[m.a11, m.a12], [m.a12, m.a22]];
    let mut mj = [[0.0; 2]; 2];
    let mut a = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            mj[r][c] = (0..2).map(|k| md[r][k] * jd[k][c]).sum();
        }
    }
    for r in 0..2 {
        for c in 0..2 {
            a[r][c] = (0..2).map(|k| jd[k][r] * mj[k][c]).sum();
        }
    }
    (a[0][0] + a[1][1]) / (2.0 * (a[0][0] * a[1][1] - a[0][1] * a[1][0]).sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn qs_and_qa_are_at_least_one(j in spd(), m in spd()) {
        prop_assert!(qs(j).unwrap() >= 1.0 - 1e-15);
        prop_assert!(qa(j, m).unwrap() >= 1.0 - 1e-15);
        // both evaluations lose ~cond(JᵀMJ)·ε ≈ (2 Q_a)²·ε to cancellation in the determinant
        let oracle = qa_oracle(j, m);
        prop_assert!((qa(j, m).unwrap() - oracle).abs() <= 1e-14 * (2.0 * oracle).powi(2) * oracle);
    }

    #[test]
    fn jacobian_is_aligned_with_its_own_metric(j in spd(), log_theta in -3.0..3.0_f64) {
        let m = metric_from_jacobian(j, log_theta.exp()).unwrap();
        prop_assert!((qa(j, m).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn qs_is_scale_invariant(j in spd(), c in prop_oneof![-50.0..-0.02_f64, 0.02..50.0_f64]) {
        prop_assert!((qs(j * c).unwrap() - qs(j).unwrap()).abs() <= 1e-12 * qs(j).unwrap());
    }

    #[test]
    fn qs_is_one_only_for_scalar_jacobians(j in spd()) {
        let e = eig_sym2(j);
        let ratio = e.l2 / e.l1;
        prop_assert!((qs(j).unwrap() - 0.5 * (ratio + 1.0 / ratio)).abs() <= 1e-10 * ratio);
    }

    #[test]
    fn metric_determinant_identities(j in spd(), log_theta in -3.0..3.0_f64) {
        let theta = log_theta.exp();
        let m = metric_from_jacobian(j, theta).unwrap();
        // entries of M carry relative rounding ε, so det M is good to cond(M)·ε
        let e = eig_sym2(j);
        let cond = (e.l2 / e.l1).powi(2);
        prop_assert!((m.det().sqrt() - theta / j.det()).abs() <= 1e-15 * cond.max(1e3) * theta / j.det());
    }

    /// Densities and normalizations in the range of the shock presets.
    #[test]
    fn predicted_metrics_have_density_as_root_determinant(
        rho in 1.0..60.0_f64,
        rho2 in 1.0..60.0_f64,
        theta in 1.0..6.0_f64,
        theta2 in 1.0..6.0_f64,
        angle in 0.0..std::f64::consts::TAU,
        stretch in 0.01..100.0_f64,
    ) {
        let single = predicted_metric_single(rho, theta, unit(angle));
        prop_assert!((single.det().sqrt() - rho).abs() <= 1e-12 * rho);
        let product = predicted_metric_product(rho, rho2, theta, theta2, unit(angle));
        prop_assert!((product.det().sqrt() - rho * rho2).abs() <= 1e-12 * rho * rho2);
        let level = predicted_metric_levelset(rho, theta, unit(angle) * stretch).unwrap();
        prop_assert!((level.det().sqrt() - rho).abs() <= 1e-12 * rho);
        prop_assert!((level - single).max_abs() <= 1e-12 * single.max_abs());
    }

    #[test]
    fn eigen_decomposition_reconstructs(m in symmetric()) {
        let e = eig_sym2(m);
        prop_assert!(e.l1 <= e.l2);
        prop_assert!((e.e1.norm() - 1.0).abs() <= 1e-12 && (e.e2.norm() - 1.0).abs() <= 1e-12);
        prop_assert!(e.e1.dot(e.e2).abs() <= 1e-12);
        prop_assert!((e.reconstruct() - m).max_abs() <= 1e-10 * m.max_abs().max(1.0));
        for v in [e.e1, e.e2] {
            prop_assert!(v.x > 0.0 || (v.x == 0.0 && v.y >= 0.0));
        }
    }

    #[test]
    fn ellipse_axes_follow_the_eigenvalues(j in spd(), s in 0.01..1.0_f64) {
        let e = ellipse_from_jacobian(j, Vec2::ZERO, s).unwrap();
        let eig = eig_sym2(j);
        prop_assert!(e.semi_axes.0 >= e.semi_axes.1 && e.semi_axes.1 > 0.0);
        prop_assert!((e.semi_axes.0 - s * eig.l2).abs() <= 1e-12 * s * eig.l2);
        prop_assert!((e.semi_axes.1 - s * eig.l1).abs() <= 1e-12 * s * eig.l2);
        prop_assert!(e.angle > -std::f64::consts::FRAC_PI_2 && e.angle <= std::f64::consts::FRAC_PI_2);
    }
}

#[test]
fn separable_qs_formula() {
    let sol = SeparableSolution::from_density(&Preset::Example2.density(), DEFAULT_SAMPLES).unwrap();
    let (t1, t2) = sol.thetas();
    for i in 0..40 {
        for j in 0..40 {
            let xi = Vec2::new(i as f64 / 40.0, j as f64 / 40.0);
            let (r1, r2) = sol.factors_at(xi);
            let expected = 0.5 * (t1 * r2 / (t2 * r1) + t2 * r1 / (t1 * r2));
            assert!((qs(sol.jacobian(xi)).unwrap() - expected).abs() <= 1e-10 * expected);
        }
    }
}

#[test]
fn operation_examples() {
    let d = Vec2::new(1.0, 1.0) * (1.0 / SQRT_2);
    // eig of the Example 1 feature Jacobian
    let j = SymMat2::from_eigen(3.0 / 51.0, d, 1.0, d.perp());
    let e = eig_sym2(j);
    assert!((e.l1 - 3.0 / 51.0).abs() <= 1e-14 && (e.l2 - 1.0).abs() <= 1e-14);
    assert!((e.e1 - d).norm() <= 1e-12);
    let swap = eig_sym2(SymMat2::new(0.0, 1.0, 0.0));
    assert_eq!((swap.l1, swap.l2), (-1.0, 1.0));
    assert!((swap.e1 - Vec2::new(1.0, -1.0) * (1.0 / SQRT_2)).norm() <= 1e-12);

    let m = eig_sym2(metric_from_jacobian(j, 3.0).unwrap());
    assert!((m.l1 - 3.0).abs() <= 1e-10 && (m.l2 - 867.0).abs() <= 1e-9);

    assert!((qs(j).unwrap() - 8.529).abs() <= 5e-4);
    assert!((qs(SymMat2::new(3.0, 0.0, 1.8)).unwrap() - 1.13).abs() <= 5e-3);
    assert_eq!(qa(SymMat2::IDENTITY, SymMat2::new(4.0, 0.0, 1.0)).unwrap(), 1.25);

    let p = eig_sym2(predicted_metric_product(51.0, 11.0, 3.0, 1.8, d));
    assert!((p.l2 / (1.8 * 51.0 * 51.0 / 3.0) - 1.0).abs() <= 1e-10);
    assert!((p.l1 / (3.0 * 121.0 / 1.8) - 1.0).abs() <= 1e-10);

    let ell = ellipse_from_jacobian(j, Vec2::ZERO, 0.5 / 60.0).unwrap();
    assert!((ell.semi_axes.0 / ell.semi_axes.1 - 17.0).abs() <= 1e-9);
    assert!((ell.angle + FRAC_PI_4).abs() <= 1e-12);
    let off = ellipse_from_jacobian(SymMat2::from_eigen(3.0, d, 1.8, d.perp()), Vec2::ZERO, 1.0).unwrap();
    assert!((off.semi_axes.0 / off.semi_axes.1 - 5.0 / 3.0).abs() <= 1e-12);

    // trains used by the examples are the ones whose θ the solver quotes
    assert!((meshkit::density::theta_separable(&example1_train()) - 3.0).abs() <= 1e-8);
    assert!((meshkit::density::theta_separable(&example2_second_train()) - 1.8).abs() <= 1e-8);
}
