//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints one PASS/FAIL line; the process fails if any criterion fails other
//! than the ones listed in `KNOWN_FAILURES`.

use std::f64::consts::{E, PI};
use std::process::ExitCode;
use std::time::Instant;

use heatball_core::estimates::{
    check_containment, containment_scale_limit, ell_bounds_audit, finiteness_constant,
    gradient_estimate_audit, refined_scale_grid, speed_envelope_sweep, within_relative,
    GradientAuditSetup,
};
use heatball_core::heatball::{
    compute_p, density_curve, density_limit, entropy_level_integral, fulks_weight,
    heat_sphere_mean, heat_sphere_weight, main_identity_residual, ni_mean_value_ratio, Heatball,
    PForm, SpaceTimeOrigin, TestFunction,
};
use heatball_core::kernels::{transplant_comparison, KernelField, KernelKind};
use heatball_core::models::{unit_sphere_area, ModelSpacetime};
use heatball_core::reduced_geometry::{reduced_volume, solve_l_geodesic};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Sub-checks whose failure is a property of the mathematics rather than of
/// the implementation. The kernel of a round sphere dominates the flat
/// transplant, so `Ψ̃ ≥ Ψ` fails at every grid point; the reverse inequality
/// is asserted instead.
const KNOWN_FAILURES: &[&str] = &["10c"];

struct Check {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

type Outcome = Result<(bool, String), String>;

fn run(id: &'static str, name: &'static str, f: impl FnOnce() -> Outcome) -> Check {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let check = Check {
        id,
        name,
        pass,
        detail: format!("{detail} [{:.2?}]", start.elapsed()),
    };
    println!(
        "criterion {:<4} {:<48} {}  {}",
        check.id,
        check.name,
        if check.pass { "PASS" } else { "FAIL" },
        check.detail
    );
    check
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

fn euclid(n: usize) -> KernelField {
    KernelField::euclidean(&ModelSpacetime::euclidean(n, 100.0).unwrap()).unwrap()
}

fn mean_value_identity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in 1..=3 {
        let kf = euclid(n);
        let origin = SpaceTimeOrigin::new(vec![0.3, 0.2, 0.1][..n].to_vec(), 0.5);
        for r in [0.5, 1.0, 2.0] {
            for phi in [
                TestFunction::one(),
                TestFunction::first_coordinate(n),
                TestFunction::RadialCaloric,
            ] {
                let p = compute_p(&kf, r, &phi, &origin, PForm::Defining, 1e-9)
                    .map_err(|e| e.to_string())?;
                worst = worst.max(rel_err(p / r.powi(n as i32), phi.at_origin(&origin)));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-6 && secs < 30.0,
        format!("max rel err {worst:.2e} over 27 cases"),
    ))
}

fn normalization() -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=3 {
        let kf = euclid(n);
        for r in [0.5, 1.0, 2.0] {
            let hb = Heatball::build(&kf, r).map_err(|e| e.to_string())?;
            let v = hb
                .volume_integral(1e-11, 1e-11 * hb.volume_scale(), |slice, d, _| {
                    let tau = slice.tau();
                    Ok(d * d / (4.0 * tau * tau))
                })
                .map_err(|e| e.to_string())?;
            worst = worst.max(rel_err(v, r.powi(n as i32)));
        }
    }
    Ok((worst <= 1e-8, format!("max rel err {worst:.2e}")))
}

fn forms_agree() -> Outcome {
    let soliton = ModelSpacetime::gaussian_soliton(2, 10.0).unwrap();
    let kernels = [
        euclid(2),
        KernelField::reduced_volume_density(&soliton).unwrap(),
    ];
    let origin = SpaceTimeOrigin::pole(2, 0.0);
    let one = TestFunction::one();
    let mut worst = 0.0f64;
    for kf in &kernels {
        for r in [0.25, 0.5, 1.0, 1.5, 2.0] {
            let a = compute_p(kf, r, &one, &origin, PForm::Defining, 1e-10)
                .map_err(|e| e.to_string())?;
            let b = compute_p(kf, r, &one, &origin, PForm::Alternate, 1e-10)
                .map_err(|e| e.to_string())?;
            worst = worst.max(rel_err(b, a));
        }
    }
    Ok((
        worst <= 1e-6,
        format!("max rel gap {worst:.2e} over 10 cases"),
    ))
}

fn identity_residual() -> Outcome {
    let phi = TestFunction::RadialPolynomial {
        a: 1.0,
        b: 0.0,
        c: 0.0,
    };
    let t = main_identity_residual(
        &euclid(2),
        &phi,
        &SpaceTimeOrigin::pole(2, 0.0),
        0.5,
        1.0,
        1e-10,
    )
    .map_err(|e| e.to_string())?;
    let bound = 1e-5 * t.lhs.abs().max(1.0);
    Ok((
        t.residual() <= bound,
        format!(
            "lhs {:.10} rhs {:.10} residual {:.2e}",
            t.lhs,
            t.rhs(),
            t.residual()
        ),
    ))
}

fn gaussian_soliton() -> Outcome {
    let m = ModelSpacetime::gaussian_soliton(2, 10.0).unwrap();
    let mut rng = StdRng::seed_from_u64(20_240_917);
    let mut ell_err = 0.0f64;
    for _ in 0..20 {
        let d = rng.gen_range(0.0..3.0);
        let tau = rng.gen_range(0.05..2.0);
        let g = solve_l_geodesic(&m, d, tau, 1e-11).map_err(|e| e.to_string())?;
        let want = d * d / (4.0 * tau);
        ell_err = ell_err.max((g.reduced_distance - want).abs() / want.max(1.0));
    }
    let kf = KernelField::reduced_volume_density(&m).unwrap();
    let origin = SpaceTimeOrigin::pole(2, 0.0);
    let mut p_err = 0.0f64;
    for r in [0.25, 0.5, 1.0] {
        let p = compute_p(&kf, r, &TestFunction::one(), &origin, PForm::Reduced, 1e-10)
            .map_err(|e| e.to_string())?;
        p_err = p_err.max((p / (r * r) - 1.0).abs());
    }
    let mut v_err = 0.0f64;
    for tau in [0.1, 1.0] {
        v_err = v_err.max((reduced_volume(&m, tau, 1e-12).map_err(|e| e.to_string())? - 1.0).abs());
    }
    Ok((
        ell_err <= 1e-6 && p_err <= 1e-4 && v_err <= 1e-6,
        format!(
            "ell err {ell_err:.2e} (20 targets), P/r^n err {p_err:.2e}, volume err {v_err:.2e}"
        ),
    ))
}

fn vertex_density() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for n in [2usize, 3] {
        let nf = n as f64;
        let want = ((nf - 1.0) / (2.0 * PI * E)).powf(0.5 * nf) * unit_sphere_area(n + 1);
        let m = ModelSpacetime::shrinking_sphere(n, 0.0, 10.0).unwrap();
        let kf = KernelField::reduced_volume_density(&m).unwrap();
        let origin = SpaceTimeOrigin::pole(n, 0.0);
        for r in [0.2, 0.5, 1.0, 2.0] {
            let p = compute_p(
                &kf,
                r,
                &TestFunction::one(),
                &origin,
                PForm::Defining,
                1e-10,
            )
            .map_err(|e| e.to_string())?;
            worst = worst.max((p / r.powi(n as i32) - want).abs());
        }
        parts.push(format!("n={n} target {want:.9}"));
    }
    let two_over_e = 2.0 / E;
    Ok((
        worst <= 1e-4,
        format!(
            "{} (2/e = {two_over_e:.9}), max abs err {worst:.2e}",
            parts.join(", ")
        ),
    ))
}

fn reduced_volume_comparison() -> Outcome {
    let m = ModelSpacetime::shrinking_sphere(2, 0.1, 1.0).unwrap();
    let kf = KernelField::reduced_volume_density(&m).unwrap();
    let origin = SpaceTimeOrigin::pole(2, 0.0);
    let one = TestFunction::one();
    let grid: Vec<f64> = (0..10).map(|k| 0.05 * 1.3f64.powi(k)).collect();
    let curve = density_curve(&kf, &one, &origin, &grid, 1e-9).map_err(|e| e.to_string())?;
    let ups = curve.increases(1e-5);
    let limit = density_limit(&kf, &one, &origin, 0.4, 1e-10).map_err(|e| e.to_string())?;
    let d = curve.densities();
    Ok((
        ups == 0 && (limit.value - 1.0).abs() <= 1e-3,
        format!(
            "P/r^n from {:.6} to {:.6}, {ups} increases, limit {:.8}",
            d[0],
            d[d.len() - 1],
            limit.value
        ),
    ))
}

fn heat_sphere() -> Outcome {
    let kf = euclid(2);
    let origin = SpaceTimeOrigin::new(vec![0.3, 0.2], 0.5);
    let mut mean_err = 0.0f64;
    for r in [0.5, 1.0, 2.0] {
        for phi in [
            TestFunction::one(),
            TestFunction::first_coordinate(2),
            TestFunction::RadialCaloric,
        ] {
            let m = heat_sphere_mean(&kf, r, &phi, &origin, 1e-10).map_err(|e| e.to_string())?;
            mean_err = mean_err.max(rel_err(m, phi.at_origin(&origin)));
        }
    }

    let mut weight_err = 0.0f64;
    let mut samples = 0;
    for r in [0.5, 1.0, 2.0, 3.0] {
        let hb = Heatball::build(&kf, r).map_err(|e| e.to_string())?;
        for j in 1..=25 {
            let tau = hb.tau_sup() * j as f64 / 26.0;
            let d = hb.slice_radius(tau).map_err(|e| e.to_string())?;
            let v = kf.eval(d, tau).map_err(|e| e.to_string())?;
            let w = heat_sphere_weight(r.powi(-2), &v);
            weight_err = weight_err.max(rel_err(w, fulks_weight(2, r, d, tau)));
            samples += 1;
        }
    }

    let s2 = ModelSpacetime::sphere(2, 1.0, 10.0).unwrap();
    let ks = KernelField::sphere_spectral(&s2).unwrap();
    let pole = SpaceTimeOrigin::pole(2, 0.0);
    let mut sphere_err = 0.0f64;
    for r in [0.3, 1.0, 2.0] {
        let m = heat_sphere_mean(&ks, r, &TestFunction::one(), &pole, 1e-8)
            .map_err(|e| e.to_string())?;
        sphere_err = sphere_err.max((m - 1.0).abs());
    }
    Ok((
        mean_err <= 1e-6 && weight_err <= 1e-10 && sphere_err <= 1e-4,
        format!(
            "flat mean err {mean_err:.2e}, weight err {weight_err:.2e} at {samples} points, S^2 err {sphere_err:.2e}"
        ),
    ))
}

fn entropy() -> Outcome {
    let m = ModelSpacetime::gaussian_soliton(2, 10.0).unwrap();
    let kf = KernelField::reduced_volume_density(&m).unwrap();
    let mut worst = 0.0f64;
    for fbar in [-2.0, -1.0, 0.0] {
        let v = entropy_level_integral(&kf, fbar, 1e-10).map_err(|e| e.to_string())?;
        worst = worst.max((v - 1.0).abs());
    }
    Ok((worst <= 1e-6, format!("max abs err {worst:.2e}")))
}

fn transplant_equality_cases() -> Outcome {
    let mut worst = 0.0f64;
    let cases = [
        (ModelSpacetime::euclidean(3, 10.0).unwrap(), 0),
        (ModelSpacetime::hyperbolic3(10.0).unwrap(), -1),
    ];
    for (m, k) in cases {
        let origin = SpaceTimeOrigin::pole(3, 0.0);
        for r in [0.5, 1.0, 2.0] {
            let v = ni_mean_value_ratio(&m, k, r, &TestFunction::one(), &origin, 1e-10)
                .map_err(|e| e.to_string())?;
            worst = worst.max((v.mean - 1.0).abs());
        }
    }
    Ok((
        worst <= 1e-6,
        format!("E^3 and H^3 max abs err {worst:.2e}"),
    ))
}

fn transplant_on_sphere() -> Outcome {
    let s2 = ModelSpacetime::sphere(2, 1.0, 10.0).unwrap();
    let origin = SpaceTimeOrigin::pole(2, 0.0);
    let mut means = Vec::new();
    for r in [0.2, 0.5, 1.0, 2.0] {
        let v = ni_mean_value_ratio(&s2, 0, r, &TestFunction::one(), &origin, 1e-10)
            .map_err(|e| e.to_string())?;
        means.push(v.mean);
    }
    let bounded = means.iter().all(|&m| m <= 1.0 + 1e-6);
    let nonincreasing = means.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.6}")).collect();
    Ok((
        bounded && nonincreasing,
        format!("means {} over r in [0.2, 2]", shown.join(" ")),
    ))
}

/// Runs the transplant domination grid on S² and reports it against the
/// stated direction `Ψ̃ ≥ Ψ`; also returns whether the observed outcome is
/// the documented one (every point has `Ψ̃ < Ψ`).
fn transplant_domination() -> (Outcome, bool) {
    let s2 = ModelSpacetime::sphere(2, 1.0, 10.0).unwrap();
    let taus: Vec<f64> = (0..10).map(|i| 0.25 + 0.2 * i as f64).collect();
    match transplant_comparison(&s2, 0, 10.0, &taus, 20) {
        Ok(c) => {
            let documented = c.transplant_below == c.points && c.transplant_above == 0;
            let detail = format!(
                "{} of {} points violate, log(transplant/kernel) in [{:.3}, {:.3}]; reverse holds everywhere: {}",
                c.transplant_below, c.points, c.min_log_ratio, c.max_log_ratio, documented
            );
            (Ok((c.transplant_below == 0, detail)), documented)
        }
        Err(e) => (Err(e.to_string()), false),
    }
}

fn ricci_flow_models() -> Vec<ModelSpacetime> {
    vec![
        ModelSpacetime::gaussian_soliton(2, 1.0).unwrap(),
        ModelSpacetime::gaussian_soliton(3, 1.0).unwrap(),
        ModelSpacetime::shrinking_sphere(2, 0.1, 1.0).unwrap(),
        ModelSpacetime::shrinking_sphere(3, 0.1, 1.0).unwrap(),
        ModelSpacetime::shrinking_sphere(2, 1.0, 1.0).unwrap(),
        ModelSpacetime::shrinking_sphere(2, 0.0, 1.0).unwrap(),
    ]
}

fn appendix_audits() -> Outcome {
    let mut points = [0usize; 3];
    let mut violations = [0usize; 3];
    for m in ricci_flow_models() {
        let ell = ell_bounds_audit(&m, 5, 10).map_err(|e| e.to_string())?;
        let r = 0.5
            * containment_scale_limit(&m)
                .map_err(|e| e.to_string())?
                .min(1.0);
        let contain = check_containment(&m, r, 50).map_err(|e| e.to_string())?;
        let speed = speed_envelope_sweep(&m, 5, 10).map_err(|e| e.to_string())?;
        for (i, rep) in [ell, contain, speed].iter().enumerate() {
            points[i] += rep.points;
            violations[i] += rep.violations;
        }
    }
    Ok((
        violations.iter().all(|&v| v == 0),
        format!(
            "violations: ell {}/{}, containment {}/{}, speed {}/{} over 6 models",
            violations[0], points[0], violations[1], points[1], violations[2], points[2]
        ),
    ))
}

fn gradient_stability() -> Outcome {
    let e2 = ModelSpacetime::euclidean(2, 10.0).unwrap();
    let s2 = ModelSpacetime::sphere(2, 10.0, 10.0).unwrap();
    let kernels = [
        ("E^2", KernelField::euclidean(&e2).unwrap()),
        (
            "S^2(10)",
            KernelField::new(&s2, KernelKind::SphereSpectral { tol: 1e-8 }).unwrap(),
        ),
    ];
    let mut stable = true;
    let mut parts = Vec::new();
    for (label, kf) in kernels {
        let coarse = GradientAuditSetup::default();
        let fine = GradientAuditSetup {
            resolution: 2 * coarse.resolution,
            ..coarse
        };
        let a = gradient_estimate_audit(&kf, &coarse).map_err(|e| e.to_string())?;
        let b = gradient_estimate_audit(&kf, &fine).map_err(|e| e.to_string())?;
        let finite = [a.c1, a.c2, b.c1, b.c2].iter().all(|c| c.is_finite());
        let close = |x: f64, y: f64| x == y || within_relative(x, y, 0.1);
        stable &= finite && close(a.c1, b.c1) && close(a.c2, b.c2);
        parts.push(format!(
            "{label} (C1, C2) {:.4}, {:.6} -> {:.4}, {:.6}",
            a.c1, a.c2, b.c1, b.c2
        ));
    }

    let m = ModelSpacetime::shrinking_sphere(2, 0.1, 1.0).unwrap();
    let phis = [
        TestFunction::one(),
        TestFunction::RadialPolynomial {
            a: 0.0,
            b: -1.0,
            c: 1.0,
        },
    ];
    let r_max = 0.9
        * containment_scale_limit(&m)
            .map_err(|e| e.to_string())?
            .min(1.0);
    let c1 = finiteness_constant(&m, &phis, &refined_scale_grid(r_max, 4, 1), 1e-9)
        .map_err(|e| e.to_string())?;
    let c2 = finiteness_constant(&m, &phis, &refined_scale_grid(r_max, 4, 2), 1e-9)
        .map_err(|e| e.to_string())?;
    stable &= c1.is_finite() && within_relative(c1, c2, 0.1);
    parts.push(format!("finiteness constant {c1:.6} -> {c2:.6}"));
    Ok((stable, parts.join("; ")))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut checks = vec![
        run("1", "mean value identity, n = 1..3", mean_value_identity),
        run("2", "normalization to r^n", normalization),
        run("3", "defining vs alternate P forms", forms_agree),
        run("4", "monotonicity identity residual", identity_residual),
        run("5", "Gaussian soliton reduced geometry", gaussian_soliton),
        run("6", "vertex soliton density constancy", vertex_density),
        run(
            "7",
            "reduced-volume density comparison",
            reduced_volume_comparison,
        ),
        run("8", "heat-sphere means and weight", heat_sphere),
        run("9", "entropy level-set integral", entropy),
        run(
            "10a",
            "transplant mean, equality cases",
            transplant_equality_cases,
        ),
        run("10b", "transplant mean on S^2, k = 0", transplant_on_sphere),
    ];
    let (outcome, documented) = transplant_domination();
    checks.push(run("10c", "transplant dominates kernel on S^2", || outcome));
    checks.push(run(
        "11",
        "reduced distance, containment, speeds",
        appendix_audits,
    ));
    checks.push(run(
        "12",
        "fitted constants stable under refinement",
        gradient_stability,
    ));

    let unexpected: Vec<&str> = checks
        .iter()
        .filter(|c| !c.pass && !KNOWN_FAILURES.contains(&c.id))
        .map(|c| c.id)
        .collect();
    let known: Vec<&str> = checks
        .iter()
        .filter(|c| !c.pass && KNOWN_FAILURES.contains(&c.id))
        .map(|c| c.id)
        .collect();
    let passed = checks.iter().filter(|c| c.pass).count();
    println!(
        "acceptance: {passed}/{} passed, known failures {:?}, unexpected failures {:?} in {:.1?}",
        checks.len(),
        known,
        unexpected,
        start.elapsed()
    );
    for c in &checks {
        if !c.pass && KNOWN_FAILURES.contains(&c.id) {
            println!("  {} {}: failing as documented", c.id, c.name);
        }
    }
    if !documented {
        println!("  10c: observed outcome differs from the documented one");
    }
    if unexpected.is_empty() && documented {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
