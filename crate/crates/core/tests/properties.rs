use std::f64::consts::PI;

use heatball_core::estimates::{
    ell_two_sided_bounds, geodesic_speed_envelopes, heatball_radius_bound,
};
use heatball_core::heatball::{
    comparison_inequality, compute_p, Heatball, PForm, SpaceTimeOrigin, TestFunction,
};
use heatball_core::kernels::KernelField;
use heatball_core::models::{unit_sphere_area, ModelSpacetime};
use heatball_core::numerics::{
    extrapolate_to_zero, find_root, gauss_legendre, integrate_adaptive, Interval,
};
use heatball_core::reduced_geometry::reduced_distance;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_integral_01(coeffs: &[f64]) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c / (k + 1) as f64)
        .sum()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn gauss_legendre_is_exact_up_to_its_degree(
        n in 2usize..20,
        seed in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let coeffs = &seed[..2 * n];
        let (x, w) = gauss_legendre(n);
        let got: f64 = x
            .iter()
            .zip(&w)
            .map(|(x, w)| 0.5 * w * poly(coeffs, 0.5 * (x + 1.0)))
            .sum();
        let want = poly_integral_01(coeffs);
        prop_assert!((got - want).abs() <= 1e-13 * (1.0 + coeffs.iter().map(|c| c.abs()).sum::<f64>()));
    }

    #[test]
    fn adaptive_quadrature_is_exact_on_polynomials(
        coeffs in prop::collection::vec(-5.0f64..5.0, 1..12),
    ) {
        let res = integrate_adaptive(|x| poly(&coeffs, x), Interval::new(0.0, 1.0).unwrap(), 1e-13)
            .unwrap();
        prop_assert!((res.value - poly_integral_01(&coeffs)).abs() <= 1e-12);
        prop_assert!(res.abs_error_estimate >= 0.0);
        prop_assert!(res.evaluations >= 1);
    }

    #[test]
    fn roots_are_bracketed_and_accurate(root in -3.0f64..3.0, slope in 0.1f64..10.0) {
        let x = find_root(|x| slope * (x - root) + (x - root).powi(3), Interval::new(-4.0, 4.0).unwrap(), 1e-13)
            .unwrap();
        prop_assert!((x - root).abs() < 1e-11);
    }

    #[test]
    fn extrapolation_recovers_even_polynomials(
        c0 in -2.0f64..2.0,
        c1 in -2.0f64..2.0,
        c2 in -2.0f64..2.0,
    ) {
        let samples: Vec<(f64, f64)> = (0..6)
            .map(|k| {
                let r = 0.5f64.powi(k);
                (r, c0 + c1 * r * r + c2 * r.powi(4))
            })
            .collect();
        let e = extrapolate_to_zero(&samples, 3).unwrap();
        prop_assert!((e.value - c0).abs() < 1e-10);
    }

    #[test]
    fn small_spheres_look_flat(which in 0usize..6, tau in 0.05f64..1.0) {
        let m = [
            ModelSpacetime::euclidean(2, 1.0),
            ModelSpacetime::euclidean(3, 1.0),
            ModelSpacetime::sphere(2, 1.3, 1.0),
            ModelSpacetime::hyperbolic3(1.0),
            ModelSpacetime::shrinking_sphere(3, 0.2, 1.0),
            ModelSpacetime::gaussian_soliton(2, 1.0),
        ][which]
        .clone()
        .unwrap();
        let n = m.dim();
        let d: f64 = 1e-4;
        let want = unit_sphere_area(n) * d.powi(n as i32 - 1);
        let got = m.sphere_area(d, tau).unwrap();
        prop_assert!(((got - want) / want).abs() <= 1e-6);
    }

    #[test]
    fn shrinking_sphere_metric_follows_ricci_flow(
        n in 2usize..4,
        offset in 0.05f64..2.0,
        tau in 0.01f64..1.0,
    ) {
        let m = ModelSpacetime::shrinking_sphere(n, offset, 1.0).unwrap();
        let h = 1e-5;
        let g = |t: f64| m.metric_scale(t).powi(2);
        let fd = (g(tau + h) - g(tau - h)) / (2.0 * h);
        let want = 2.0 * m.ricci_eigenvalue(tau) * g(tau);
        prop_assert!(((fd - want) / want).abs() <= 1e-8);
    }

    #[test]
    fn ricci_bounds_are_sharp(offset in 0.05f64..2.0, lo in 0.0f64..0.5, width in 0.01f64..0.5) {
        let m = ModelSpacetime::shrinking_sphere(2, offset, 1.0).unwrap();
        let iv = Interval::new(lo, lo + width).unwrap();
        let (_, big_k) = m.ricci_bounds(iv);
        let samples: Vec<f64> = (0..=20)
            .map(|i| m.ricci_eigenvalue(iv.lo + iv.width() * i as f64 / 20.0))
            .collect();
        prop_assert!(samples.iter().all(|&l| l <= big_k * (1.0 + 1e-14)));
        prop_assert!(samples.iter().any(|&l| (l - big_k).abs() <= 1e-10 * big_k));
    }

    #[test]
    fn soliton_reduced_distance_is_scale_invariant(
        d in 0.0f64..2.0,
        tau in 0.05f64..0.5,
        lambda in 0.3f64..1.4,
    ) {
        let m = ModelSpacetime::gaussian_soliton(2, 2.0).unwrap();
        let a = reduced_distance(&m, d, tau).unwrap();
        let b = reduced_distance(&m, lambda * d, lambda * lambda * tau).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn reduced_distance_bounds_are_ordered(
        n in 2usize..4,
        k in 0.0f64..3.0,
        big_k in 0.0f64..3.0,
        d0 in 0.0f64..3.0,
        tau in 0.01f64..2.0,
    ) {
        let (lo, hi) = ell_two_sided_bounds(n, k, big_k, d0, tau);
        prop_assert!(lo.is_finite() && hi.is_finite());
        prop_assert!(lo <= hi * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn speed_envelopes_are_ordered_and_flat_limits_agree(
        g in 0.0f64..3.0,
        rate in 0.0f64..2.0,
        tau0 in 0.01f64..0.5,
        span in 0.01f64..1.0,
    ) {
        let tau1 = tau0 + span;
        let tau = tau0 + 0.5 * span;
        let (lo, hi) = geodesic_speed_envelopes(g, rate, rate, 0.0, tau0, tau1, tau);
        prop_assert!(lo <= hi * (1.0 + 1e-12) + 1e-15);
        let (lo0, hi0) = geodesic_speed_envelopes(g, 0.0, 0.0, 0.0, tau0, tau1, tau);
        let flat = g / tau.sqrt();
        prop_assert!((lo0 - flat).abs() <= 1e-12 * flat.max(1.0));
        prop_assert!((hi0 - flat).abs() <= 1e-12 * flat.max(1.0));
        prop_assert!(lo <= lo0 + 1e-12 && hi >= hi0 - 1e-12);
    }

    #[test]
    fn heatball_radius_bound_vanishes_after_cutoff(
        n in 1usize..4,
        r in 0.1f64..1.0,
        k in 0.0f64..2.0,
        z in 1.0f64..3.0,
    ) {
        let tau_bar = 10.0;
        let (_, c) = heatball_radius_bound(n, r, k, 1e-3, tau_bar);
        let tau = z * c * r * r;
        prop_assume!(tau <= tau_bar);
        prop_assert_eq!(heatball_radius_bound(n, r, k, tau, tau_bar).0, 0.0);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn slices_are_exactly_where_the_shifted_kernel_is_positive(
        which in 0usize..4,
        r in 0.3f64..1.5,
        z in 0.02f64..0.98,
        y in 0.0f64..2.0,
    ) {
        let kf = match which {
            0 => KernelField::euclidean(&ModelSpacetime::euclidean(2, 10.0).unwrap()),
            1 => KernelField::hyperbolic3(&ModelSpacetime::hyperbolic3(10.0).unwrap()),
            2 => KernelField::reduced_volume_density(&ModelSpacetime::gaussian_soliton(3, 10.0).unwrap()),
            _ => KernelField::reduced_volume_density(&ModelSpacetime::shrinking_sphere(2, 0.1, 10.0).unwrap()),
        }
        .unwrap();
        let hb = Heatball::build(&kf, r).unwrap();
        let tau = z * hb.tau_sup();
        let rho = hb.slice_radius(tau).unwrap();
        prop_assert!(rho > 0.0);
        let d = (y * rho).min(0.999 * kf.model().max_distance(tau));
        prop_assume!((d - rho).abs() > 1e-6 * rho);
        prop_assert_eq!(hb.contains(d, tau).unwrap(), d < rho);
    }

    #[test]
    fn euclidean_slices_match_closed_form(n in 1usize..4, r in 0.2f64..3.0, z in 0.01f64..0.99) {
        let kf = KernelField::euclidean(&ModelSpacetime::euclidean(n, 100.0).unwrap()).unwrap();
        let hb = Heatball::build(&kf, r).unwrap();
        let tau_sup = r * r / (4.0 * PI);
        prop_assert!(((hb.tau_sup() - tau_sup) / tau_sup).abs() < 1e-12);
        let tau = z * tau_sup;
        let want = (2.0 * n as f64 * tau * (r * r / (4.0 * PI * tau)).ln()).sqrt();
        let got = hb.slice_radius(tau).unwrap();
        prop_assert!((got - want).abs() <= 1e-10 * want.max(1e-3));
    }

    #[test]
    fn mean_value_identity_holds_for_random_affine_data(
        a in prop::collection::vec(-2.0f64..2.0, 2),
        b in -2.0f64..2.0,
        y in prop::collection::vec(-1.0f64..1.0, 2),
        s in -1.0f64..1.0,
        r in 0.2f64..2.0,
    ) {
        let kf = KernelField::euclidean(&ModelSpacetime::euclidean(2, 100.0).unwrap()).unwrap();
        let origin = SpaceTimeOrigin::new(y, s);
        let phi = TestFunction::CoordinateLinear { a, b };
        let p = compute_p(&kf, r, &phi, &origin, PForm::Defining, 1e-10).unwrap();
        let want = phi.at_origin(&origin);
        prop_assert!((p / (r * r) - want).abs() <= 1e-8 * want.abs().max(1.0));
    }

    #[test]
    fn density_moves_against_the_heat_image(
        a in -1.0f64..1.0,
        b in -2.0f64..2.0,
        r0 in 0.3f64..1.0,
        step in 0.2f64..1.0,
    ) {
        let n = 2;
        let phi = TestFunction::RadialPolynomial { a, b, c: 0.0 };
        let image = phi.heat_image(n);
        prop_assume!(image.abs() > 0.05);
        let kf = KernelField::euclidean(&ModelSpacetime::euclidean(n, 100.0).unwrap()).unwrap();
        let origin = SpaceTimeOrigin::pole(n, 0.0);
        let density = |r: f64| {
            compute_p(&kf, r, &phi, &origin, PForm::Defining, 1e-11).unwrap() / (r * r)
        };
        let change = density(r0 + step) - density(r0);
        prop_assert_eq!(change.signum(), -image.signum());
    }

    #[test]
    fn reduced_densities_give_nonnegative_p_and_the_comparison_holds(
        offset in 0.05f64..1.0,
        r0 in 0.1f64..0.4,
        step in 0.05f64..0.3,
    ) {
        let m = ModelSpacetime::shrinking_sphere(2, offset, 1.0).unwrap();
        let kf = KernelField::reduced_volume_density(&m).unwrap();
        let origin = SpaceTimeOrigin::pole(2, 0.0);
        let one = TestFunction::one();
        let p = compute_p(&kf, r0, &one, &origin, PForm::Defining, 1e-10).unwrap();
        prop_assert!(p >= 0.0);
        let check = comparison_inequality(&kf, &one, &origin, r0, r0 + step, 1e-9).unwrap();
        prop_assert!(check.holds, "{check:?}");
    }
}
