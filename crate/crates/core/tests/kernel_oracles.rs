use std::f64::consts::PI;

use heatball_core::heatball::{density_curve, SpaceTimeOrigin, TestFunction};
use heatball_core::kernels::{sphere_spectral_density, KernelField};
use heatball_core::models::ModelSpacetime;
use heatball_core::numerics::{integrate_adaptive, Interval};
use heatball_core::reduced_geometry::{minimize_l_action, reduced_volume, solve_l_geodesic};

/// Every kernel kind paired with a `(d, τ)` box on which it is resolved.
/// Spectral sums refuse far-field points at small τ, hence the later start.
fn kernels() -> Vec<(KernelField, f64, f64, f64)> {
    let e2 = ModelSpacetime::euclidean(2, 2.0).unwrap();
    let e3 = ModelSpacetime::euclidean(3, 2.0).unwrap();
    let s2 = ModelSpacetime::sphere(2, 1.0, 2.0).unwrap();
    let s3 = ModelSpacetime::sphere(3, 1.0, 2.0).unwrap();
    let h3 = ModelSpacetime::hyperbolic3(2.0).unwrap();
    let soliton = ModelSpacetime::gaussian_soliton(2, 2.0).unwrap();
    let shrinking = ModelSpacetime::shrinking_sphere(2, 0.1, 2.0).unwrap();
    let vertex = ModelSpacetime::shrinking_sphere(3, 0.0, 2.0).unwrap();
    vec![
        (KernelField::euclidean(&e2).unwrap(), 4.0, 0.02, 2.0),
        (KernelField::euclidean(&e3).unwrap(), 4.0, 0.02, 2.0),
        (
            KernelField::sphere_spectral(&s2).unwrap(),
            0.85 * PI,
            0.2,
            2.0,
        ),
        (
            KernelField::sphere_spectral(&s3).unwrap(),
            0.85 * PI,
            0.2,
            2.0,
        ),
        (KernelField::hyperbolic3(&h3).unwrap(), 4.0, 0.02, 2.0),
        (
            KernelField::transplant(0, &s2).unwrap(),
            0.85 * PI,
            0.2,
            2.0,
        ),
        (
            KernelField::transplant(1, &s3).unwrap(),
            0.85 * PI,
            0.2,
            2.0,
        ),
        (KernelField::transplant(-1, &h3).unwrap(), 4.0, 0.02, 2.0),
        (
            KernelField::reduced_volume_density(&soliton).unwrap(),
            4.0,
            0.02,
            2.0,
        ),
        (
            KernelField::reduced_volume_density(&shrinking).unwrap(),
            0.85 * PI * 0.45,
            0.02,
            2.0,
        ),
        (
            KernelField::reduced_volume_density(&vertex).unwrap(),
            0.85 * PI * 0.2,
            0.02,
            2.0,
        ),
    ]
}

#[test]
fn kernels_decrease_away_from_the_pole() {
    for (kf, reach, tau_lo, tau_hi) in kernels() {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..100 {
            let tau = tau_lo + (tau_hi - tau_lo) * i as f64 / 99.0;
            let d_max = reach.min(0.99 * kf.model().max_distance(tau));
            for j in 0..100 {
                let d = d_max * j as f64 / 99.0;
                let v = kf.eval(d, tau).unwrap();
                assert!(v.psi.is_finite());
                worst = worst.max(v.psi_d);
            }
        }
        assert!(worst <= 1e-12, "{:?}: ψ_d reaches {worst:e}", kf.kind());
    }
}

#[test]
fn analytic_derivatives_match_differences() {
    let h = 1e-5;
    for (kf, reach, tau_lo, tau_hi) in kernels() {
        for i in 1..8 {
            let tau = tau_lo + (tau_hi - tau_lo) * i as f64 / 8.0;
            let d_max = reach.min(0.99 * kf.model().max_distance(tau));
            for j in 1..8 {
                let d = d_max * j as f64 / 8.0;
                let v = kf.eval(d, tau).unwrap();
                let psi = |d: f64, tau: f64| kf.eval(d, tau).unwrap().psi;
                let fd_d = (psi(d + h, tau) - psi(d - h, tau)) / (2.0 * h);
                // ψ_τ is taken at a fixed point, whose distance follows the metric.
                let m = kf.model();
                let at = |t: f64| d * m.metric_scale(t) / m.metric_scale(tau);
                let fd_tau = (psi(at(tau + h), tau + h) - psi(at(tau - h), tau - h)) / (2.0 * h);
                let scale = |x: f64| x.abs().max(1e-2);
                assert!(
                    (fd_d - v.psi_d).abs() <= 1e-6 * scale(v.psi_d),
                    "{:?} ψ_d at ({d}, {tau}): {} vs {fd_d}",
                    kf.kind(),
                    v.psi_d
                );
                assert!(
                    (fd_tau - v.psi_tau).abs() <= 1e-6 * scale(v.psi_tau),
                    "{:?} ψ_τ at ({d}, {tau}): {} vs {fd_tau}",
                    kf.kind(),
                    v.psi_tau
                );
            }
        }
    }
}

#[test]
fn heat_kernels_carry_unit_mass() {
    let cases = [
        (ModelSpacetime::euclidean(3, 2.0).unwrap(), "E3"),
        (ModelSpacetime::hyperbolic3(2.0).unwrap(), "H3"),
    ];
    for (m, label) in cases {
        let kf = KernelField::new(&m, own_kind(&m)).unwrap();
        for tau in [0.05f64, 0.3, 1.0, 2.0] {
            let reach = 40.0 * tau.sqrt() + 4.0 * tau;
            let mass = integrate_adaptive(
                |d| kf.eval(d, tau).unwrap().density() * m.sphere_area(d, tau).unwrap(),
                Interval::new(0.0, reach).unwrap(),
                1e-12,
            )
            .unwrap()
            .value;
            assert!((mass - 1.0).abs() <= 1e-8, "{label} τ = {tau}: mass {mass}");
        }
    }
    for n in [2, 3] {
        let m = ModelSpacetime::sphere(n, 1.0, 2.0).unwrap();
        for tau in [0.05, 0.3, 1.0, 2.0] {
            let mass = integrate_adaptive(
                |d| {
                    sphere_spectral_density(1.0, n, d, tau, 1e-13).unwrap()
                        * m.sphere_area(d, tau).unwrap()
                },
                Interval::new(0.0, PI).unwrap(),
                1e-12,
            )
            .unwrap()
            .value;
            assert!((mass - 1.0).abs() <= 1e-8, "S{n} τ = {tau}: mass {mass}");
        }
    }
}

fn own_kind(m: &ModelSpacetime) -> heatball_core::kernels::KernelKind {
    heatball_core::kernels::own_heat_kernel(m).unwrap().kind()
}

#[test]
fn reduced_volume_never_increases_in_tau() {
    for offset in [0.1, 0.5, 1.0] {
        let m = ModelSpacetime::shrinking_sphere(2, offset, 2.0).unwrap();
        let vols: Vec<f64> = (1..=12)
            .map(|i| reduced_volume(&m, 2.0 * i as f64 / 12.0, 1e-11).unwrap())
            .collect();
        for w in vols.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "offset {offset}: {vols:?}");
        }
        assert!(vols[0] <= 1.0 + 1e-9);
    }
}

/// Axisymmetric heat flow on the unit `S²` by Crank–Nicolson finite volumes
/// in the polar angle.
fn crank_nicolson_s2(u: &mut [f64], dt: f64, steps: usize) {
    let n = u.len();
    let h = PI / n as f64;
    let vol: Vec<f64> = (0..n)
        .map(|i| (i as f64 * h).cos() - ((i + 1) as f64 * h).cos())
        .collect();
    // Conductance through the face between cells i and i + 1.
    let cond: Vec<f64> = (0..n - 1).map(|i| ((i + 1) as f64 * h).sin() / h).collect();
    let lap = |u: &[f64], i: usize| {
        let mut flux = 0.0;
        if i > 0 {
            flux += cond[i - 1] * (u[i - 1] - u[i]);
        }
        if i + 1 < n {
            flux += cond[i] * (u[i + 1] - u[i]);
        }
        flux / vol[i]
    };
    let mut rhs = vec![0.0; n];
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let cl = if i > 0 { cond[i - 1] } else { 0.0 };
        let cu = if i + 1 < n { cond[i] } else { 0.0 };
        let c = 0.5 * dt / vol[i];
        lower[i] = -c * cl;
        upper[i] = -c * cu;
        diag[i] = 1.0 + c * (cl + cu);
    }
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    for _ in 0..steps {
        for i in 0..n {
            rhs[i] = u[i] + 0.5 * dt * lap(u, i);
        }
        c_prime[0] = upper[0] / diag[0];
        d_prime[0] = rhs[0] / diag[0];
        for i in 1..n {
            let m = diag[i] - lower[i] * c_prime[i - 1];
            c_prime[i] = upper[i] / m;
            d_prime[i] = (rhs[i] - lower[i] * d_prime[i - 1]) / m;
        }
        u[n - 1] = d_prime[n - 1];
        for i in (0..n - 1).rev() {
            u[i] = d_prime[i] - c_prime[i] * u[i + 1];
        }
    }
}

#[test]
fn sphere_kernel_matches_crank_nicolson() {
    let m = ModelSpacetime::sphere(2, 1.0, 2.0).unwrap();
    let kf = KernelField::sphere_spectral(&m).unwrap();
    let cells = 1200;
    let h = PI / cells as f64;
    let centres: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * h).collect();
    let (tau0, tau1) = (0.2, 0.6);
    let mut u: Vec<f64> = centres
        .iter()
        .map(|&d| sphere_spectral_density(1.0, 2, d, tau0, 1e-13).unwrap())
        .collect();
    let steps = 2000;
    crank_nicolson_s2(&mut u, (tau1 - tau0) / steps as f64, steps);
    let peak = kf.eval(0.0, tau1).unwrap().density();
    let worst = centres
        .iter()
        .zip(&u)
        .map(|(&d, &v)| (v - sphere_spectral_density(1.0, 2, d, tau1, 1e-13).unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(
        worst <= 1e-5 * peak,
        "max deviation {worst:e} against peak {peak}"
    );
}

#[test]
fn shooting_agrees_with_brute_force_minimization() {
    let models = [
        ModelSpacetime::gaussian_soliton(2, 1.0).unwrap(),
        ModelSpacetime::gaussian_soliton(3, 1.0).unwrap(),
        ModelSpacetime::shrinking_sphere(2, 0.1, 1.0).unwrap(),
        ModelSpacetime::shrinking_sphere(3, 0.5, 1.0).unwrap(),
        ModelSpacetime::shrinking_sphere(2, 1.0, 1.0).unwrap(),
    ];
    for m in models {
        for (frac, tau) in [(0.2, 0.3), (0.5, 0.7), (0.8, 1.0)] {
            let reach = if m.is_compact() {
                0.6 * m.max_distance(tau)
            } else {
                2.0 * tau.sqrt()
            };
            let d = frac * reach;
            let shot = solve_l_geodesic(&m, d, tau, 1e-11).unwrap();
            let oracle = minimize_l_action(&m, d, tau, 128, 1e-12).unwrap();
            assert!(
                oracle.action >= shot.action - 1e-8,
                "{}: {d} {tau}",
                m.label()
            );
            assert!(
                (oracle.action - shot.action).abs() <= 1e-4 * shot.action.abs().max(1.0),
                "{} at ({d}, {tau}): {} vs {}",
                m.label(),
                shot.action,
                oracle.action
            );
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let m = ModelSpacetime::shrinking_sphere(2, 0.1, 1.0).unwrap();
    let kf = KernelField::reduced_volume_density(&m).unwrap();
    let origin = SpaceTimeOrigin::pole(2, 0.0);
    let grid: Vec<f64> = (0..8).map(|k| 0.05 * 1.4f64.powi(k)).collect();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| density_curve(&kf, &TestFunction::one(), &origin, &grid, 1e-10).unwrap())
    };
    let serial: Vec<u64> = run(1).densities().iter().map(|v| v.to_bits()).collect();
    let parallel: Vec<u64> = run(4).densities().iter().map(|v| v.to_bits()).collect();
    assert_eq!(serial, parallel);
}
