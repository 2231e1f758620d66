use std::f64::consts::FRAC_PI_2;

use doamap::{steering_derivative, steering_matrix, steering_vector, ArrayGeometry};
use proptest::prelude::*;

#[test]
fn derivative_matches_central_difference() {
    let geom = ArrayGeometry::half_wavelength(10).unwrap();
    let theta = 20f64.to_radians();
    let h = 1e-6;
    let fd = (steering_vector(theta + h, &geom).unwrap() - steering_vector(theta - h, &geom).unwrap()).unscale(2.0 * h);
    let d = steering_derivative(theta, &geom).unwrap();
    assert!((&d - &fd).norm() / d.norm() < 1e-6);
}

#[test]
fn three_distinct_angles_have_rank_three() {
    let geom = ArrayGeometry::half_wavelength(10).unwrap();
    let thetas: Vec<f64> = [15.0f64, 20.0, -35.0].iter().map(|t| t.to_radians()).collect();
    let sv = steering_matrix(&thetas, &geom).unwrap().a.singular_values();
    let tol = sv.max() * 1e-10;
    assert_eq!(sv.iter().filter(|&&s| s > tol).count(), 3);
}

#[test]
fn unit_modulus_and_conjugate_symmetry_on_a_dense_sweep() {
    let geom = ArrayGeometry::half_wavelength(16).unwrap();
    for k in 0..1000 {
        let theta = -FRAC_PI_2 + std::f64::consts::PI * k as f64 / 999.0;
        let a = steering_vector(theta, &geom).unwrap();
        assert!((a.norm() - 4.0).abs() < 1e-12);
        let mirrored = steering_vector(-theta, &geom).unwrap();
        assert!((mirrored - a.conjugate()).norm() < 1e-12);
    }
}

proptest! {
    #[test]
    fn norm_is_sqrt_m(m in 1usize..64, theta in -FRAC_PI_2..FRAC_PI_2) {
        let geom = ArrayGeometry::half_wavelength(m).unwrap();
        let a = steering_vector(theta, &geom).unwrap();
        prop_assert!((a.norm() - (m as f64).sqrt()).abs() < 1e-12);
        for z in a.iter() {
            prop_assert!((z.norm() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn first_element_is_the_reference(m in 1usize..32, theta in -FRAC_PI_2..FRAC_PI_2) {
        let geom = ArrayGeometry::half_wavelength(m).unwrap();
        let a = steering_vector(theta, &geom).unwrap();
        prop_assert_eq!(a[0].re, 1.0);
        prop_assert_eq!(a[0].im, 0.0);
    }

    #[test]
    fn derivative_agrees_with_finite_difference(m in 2usize..20, theta in -1.4f64..1.4) {
        let geom = ArrayGeometry::half_wavelength(m).unwrap();
        let h = 1e-6;
        let fd = (steering_vector(theta + h, &geom).unwrap() - steering_vector(theta - h, &geom).unwrap())
            .unscale(2.0 * h);
        let d = steering_derivative(theta, &geom).unwrap();
        prop_assert!((&d - &fd).norm() <= 1e-6 * d.norm().max(1.0));
    }

    #[test]
    fn distinct_angles_give_full_column_rank(
        m in 4usize..12,
        raw in proptest::collection::vec(-1.3f64..1.3, 1..4),
    ) {
        let mut thetas = raw.clone();
        thetas.sort_by(f64::total_cmp);
        prop_assume!(thetas.windows(2).all(|w| w[1] - w[0] > 0.1));
        let geom = ArrayGeometry::half_wavelength(m).unwrap();
        let sv = steering_matrix(&thetas, &geom).unwrap().a.singular_values();
        prop_assert!(sv.min() > 1e-8 * sv.max());
    }

    #[test]
    fn out_of_domain_is_rejected(theta in 1.5708f64..10.0) {
        let geom = ArrayGeometry::half_wavelength(4).unwrap();
        prop_assert!(steering_vector(theta, &geom).is_err());
        prop_assert!(steering_vector(-theta, &geom).is_err());
    }
}
