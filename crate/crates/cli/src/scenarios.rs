//! Scenario definitions. Each scenario reads its whole configuration up front
//! (so bad configs fail before any numerics run) and returns a job that fills
//! in a [`ScenarioReport`].

use std::f64::consts::{E, PI};

use heatball_core::estimates::{
    check_containment, containment_scale_limit, ell_bounds_audit, finiteness_constant,
    gradient_estimate_audit, refined_scale_grid, speed_envelope_sweep, GradientAuditSetup,
    GRADIENT_CONSTANT_CAP,
};
use heatball_core::heatball::{
    comparison_inequality, density_curve_in, density_limit, entropy_level_integral, fulks_weight,
    heat_sphere_mean, heat_sphere_weight, identity_terms, ni_mean_value_ratio, DensityCurve,
    Heatball, PForm, SpaceTimeOrigin, TestFunction,
};
use heatball_core::kernels::{
    sphere_spectral_density, transplant_comparison, KernelField, KernelKind,
};
use heatball_core::models::{unit_sphere_area, ModelKind, ModelSpacetime};
use heatball_core::numerics::{integrate_adaptive, Interval};
use heatball_core::reduced_geometry::reduced_volume;

use crate::config::{Params, Setup};
use crate::error::CliError;
use crate::report::{fmt_num, CheckRecord, CurveRow, ScenarioReport};

pub type Job = Box<dyn FnOnce(&mut ScenarioReport) -> Result<(), CliError>>;

pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub defaults: &'static str,
    plan: fn(&Params) -> Result<(String, Job), CliError>,
}

impl Scenario {
    /// Reads the configuration and returns a setup label and the job.
    pub fn plan(&self, params: &Params) -> Result<(String, Job), CliError> {
        let planned = (self.plan)(params)?;
        params.finish(self.name)?;
        Ok(planned)
    }
}

pub fn find(name: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.name == name)
}

pub const SCENARIOS: &[Scenario] = &[
    Scenario {
        name: "mvp",
        summary: "mean value property: P(r)/r^n on a scale grid and its r -> 0 limit",
        defaults: r#"
model = "euclidean"
dim = 2
horizon = 100.0
kernel = "heat"
phi = "x1"
origin = [0.3, 0.0]
origin_time = 0.0
r_grid = [0.25, 0.5, 1.0, 2.0]
form = "defining"
limit_r_max = 0.5
tol = 1e-10
check_tol = 1e-6
"#,
        plan: plan_mvp,
    },
    Scenario {
        name: "heat-sphere",
        summary: "surface means over heat spheres and the explicit flat boundary weight",
        defaults: r#"
model = "euclidean"
dim = 2
horizon = 100.0
kernel = "heat"
phi = "radial-caloric"
origin = [0.3, 0.2]
origin_time = 0.5
r_grid = [0.5, 1.0, 2.0]
weight_samples = 100
weight_tol = 1e-10
tol = 1e-10
check_tol = 1e-6
"#,
        plan: plan_heat_sphere,
    },
    Scenario {
        name: "reduced-volume",
        summary: "reduced-volume density: monotone P/r^n, its limit, comparison inequality, V(tau)",
        defaults: r#"
model = "shrinking-sphere"
dim = 2
offset = 0.1
horizon = 1.0
phi = "one"
r_grid = [0.05, 0.065, 0.0845, 0.10985, 0.142805, 0.1856465, 0.24134045, 0.313742585, 0.4078653605, 0.53022496865]
taus = [0.1, 0.25, 0.5, 0.75, 1.0]
limit_r_max = 0.4
monotone_tol = 1e-5
tol = 1e-9
check_tol = 1e-3
"#,
        plan: plan_reduced_volume,
    },
    Scenario {
        name: "soliton-density",
        summary: "P/r^n of the reduced-volume density is constant on shrinking solitons",
        defaults: r#"
model = "shrinking-sphere"
dim = 2
offset = 0.0
horizon = 10.0
r_grid = [0.2, 0.4, 0.8]
form = "defining"
tol = 1e-10
check_tol = 1e-4
"#,
        plan: plan_soliton_density,
    },
    Scenario {
        name: "monotonicity",
        summary: "P/r^n moves against the heat image of the test function",
        defaults: r#"
model = "euclidean"
dim = 2
horizon = 100.0
kernel = "heat"
phi = "radial-polynomial"
phi_a = 1.0
phi_b = 0.0
phi_c = 0.0
origin_time = 0.0
r_grid = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0]
monotone_tol = 1e-9
tol = 1e-10
"#,
        plan: plan_monotonicity,
    },
    Scenario {
        name: "identity-residual",
        summary: "both sides of the monotonicity identity between two scales",
        defaults: r#"
model = "euclidean"
dim = 2
horizon = 100.0
kernel = "heat"
phi = "radial-polynomial"
phi_a = 1.0
phi_b = 0.0
phi_c = 0.0
origin_time = 0.0
r0 = 0.5
r1 = 1.0
tol = 1e-10
check_tol = 1e-5
"#,
        plan: plan_identity_residual,
    },
    Scenario {
        name: "entropy",
        summary: "level-set entropy integral equals one",
        defaults: r#"
model = "gaussian-soliton"
dim = 2
horizon = 10.0
kernel = "reduced-volume"
fbar = [-2.0, -1.0, 0.0]
tol = 1e-10
check_tol = 1e-6
"#,
        plan: plan_entropy,
    },
    Scenario {
        name: "ni-mvi",
        summary: "mean value with a transplanted space-form kernel and the kernel comparison",
        defaults: r#"
model = "sphere"
dim = 2
radius = 1.0
horizon = 10.0
curvature = 0
phi = "one"
origin_time = 0.0
r_grid = [0.2, 0.5, 1.0, 2.0]
compare_taus = [0.25, 0.45, 0.65, 0.85, 1.05, 1.25, 1.45, 1.65, 1.85, 2.05]
compare_points = 20
compare_reach = 3.0
tol = 1e-10
check_tol = 1e-6
"#,
        plan: plan_ni_mvi,
    },
    Scenario {
        name: "bounds",
        summary:
            "reduced-distance bounds, heatball containment, geodesic speeds, finiteness constant",
        defaults: r#"
model = "gaussian-soliton"
dim = 2
horizon = 1.0
grid_tau = 5
grid_d = 10
containment_slices = 50
finiteness_levels = 4
stability_tol = 0.1
tol = 1e-9
"#,
        plan: plan_bounds,
    },
    Scenario {
        name: "gradient-estimate",
        summary: "fitted local gradient-estimate constants and their stability under refinement",
        defaults: r#"
model = "euclidean"
dim = 2
horizon = 10.0
kernel = "heat"
rho = 0.3
center_distance = 5.0
time_shift = 0.5
audit_horizon = 1.0
amplitude = 1.0
resolution = 12
stability_tol = 0.1
"#,
        plan: plan_gradient_estimate,
    },
    Scenario {
        name: "sphere-kernel",
        summary: "spectral sphere kernel: mass, monotonicity and heat-sphere means",
        defaults: r#"
model = "sphere"
dim = 2
radius = 1.0
horizon = 10.0
kernel = "sphere-spectral"
spectral_tol = 1e-13
taus = [0.05, 0.3, 1.0, 2.0]
r_grid = [0.3, 1.0, 2.0]
grid_points = 100
grid_tau_min = 0.2
tol = 1e-10
check_tol = 1e-8
mean_tol = 1e-4
"#,
        plan: plan_sphere_kernel,
    },
];

fn at_r(name: &str, r: f64) -> String {
    format!("{name}@r={}", fmt_num(r))
}

fn form_of(p: &Params) -> Result<PForm, CliError> {
    match p.str("form")?.as_str() {
        "defining" => Ok(PForm::Defining),
        "alternate" => Ok(PForm::Alternate),
        "reduced" => Ok(PForm::Reduced),
        other => Err(CliError::Config(format!(
            "`form`: unknown form `{other}` (defining, alternate, reduced)"
        ))),
    }
}

fn label(s: &Setup) -> String {
    format!("{} / {:?} / {:?}", s.model.label(), s.kernel.kind(), s.phi)
}

fn curve_rows(curve: &DensityCurve) -> Vec<CurveRow> {
    curve
        .points()
        .iter()
        .map(|p| CurveRow {
            r: p.r,
            p: p.p,
            p_over_rn: p.density,
        })
        .collect()
}

/// `[(n−1)/(2πe)]^{n/2} |Sⁿ|`, the constant density of the vertex soliton.
pub fn vertex_density(n: usize) -> f64 {
    let nf = n as f64;
    ((nf - 1.0) / (2.0 * PI * E)).powf(0.5 * nf) * unit_sphere_area(n + 1)
}

/// Small-scale limit of `P_{1,v}/rⁿ` for the reduced-volume density.
fn reduced_limit(model: &ModelSpacetime) -> f64 {
    match model.kind() {
        ModelKind::ShrinkingSphere { offset } if offset == 0.0 => vertex_density(model.dim()),
        _ => 1.0,
    }
}

fn plan_mvp(p: &Params) -> Result<(String, Job), CliError> {
    let s = p.setup()?;
    let grid = p.grid("r_grid")?;
    let form = form_of(p)?;
    let r_max = p.positive("limit_r_max")?;
    let tol = p.positive("tol")?;
    let check_tol = p.positive("check_tol")?;
    let admissible =
        s.kernel.is_fundamental_solution() || s.kernel.kind() == KernelKind::ReducedVolumeDensity;
    if !admissible {
        return Err(CliError::Config(
            "`kernel`: the mean value property needs a heat kernel or a reduced-volume density"
                .into(),
        ));
    }
    let name = label(&s);
    let job: Job = Box::new(move |report| {
        let n = s.model.dim();
        let value = s.phi.at_origin(&s.origin);
        let limit_target = if s.kernel.kind() == KernelKind::ReducedVolumeDensity {
            reduced_limit(&s.model) * value
        } else {
            value
        };
        let tolerance = check_tol * value.abs().max(1.0);
        let curve = density_curve_in(&s.kernel, &s.phi, &s.origin, &grid, form, tol)
            .map_err(CliError::numeric("density_curve"))?;
        report.curve = curve_rows(&curve);
        let exact =
            s.kernel.is_fundamental_solution() && !s.model.is_ricci_flow() && s.phi.is_caloric(n);
        if exact {
            for pt in curve.points() {
                report.push(CheckRecord::value(
                    at_r("P_over_rn", pt.r),
                    pt.density,
                    value,
                    tolerance,
                ));
            }
        } else {
            report.note("P/r^n is not constant for this kernel and test function; only the limit is checked");
        }
        let limit = density_limit(&s.kernel, &s.phi, &s.origin, r_max, tol)
            .map_err(CliError::numeric("density_limit"))?;
        report.note(format!(
            "extrapolation error estimate {:e}",
            limit.error_estimate
        ));
        report.push(CheckRecord::value(
            "density_limit",
            limit.value,
            limit_target,
            tolerance,
        ));
        Ok(())
    });
    Ok((name, job))
}

fn plan_heat_sphere(p: &Params) -> Result<(String, Job), CliError> {
    let s = p.setup()?;
    let grid = p.grid("r_grid")?;
    let tol = p.positive("tol")?;
    let check_tol = p.positive("check_tol")?;
    let flat = s.kernel.kind() == KernelKind::EuclideanBackward;
    let weight = if flat {
        Some((p.usize("weight_samples")?, p.positive("weight_tol")?))
    } else {
        None
    };
    if !s.kernel.is_fundamental_solution() || s.model.is_ricci_flow() {
        return Err(CliError::Config(
            "`kernel`: heat-sphere means need the heat kernel of a static model".into(),
        ));
    }
    if !s.phi.is_caloric(s.model.dim()) {
        return Err(CliError::Config(
            "`phi`: heat-sphere means need a caloric test function".into(),
        ));
    }
    let name = label(&s);
    let job: Job = Box::new(move |report| {
        let value = s.phi.at_origin(&s.origin);
        for &r in &grid {
            let m = heat_sphere_mean(&s.kernel, r, &s.phi, &s.origin, tol)
                .map_err(CliError::numeric(at_r("heat_sphere_mean", r)))?;
            report.push(CheckRecord::value(
                at_r("heat_sphere_mean", r),
                m,
                value,
                check_tol * value.abs().max(1.0),
            ));
        }
        if let Some((samples, weight_tol)) = weight {
            let n = s.model.dim();
            let per_r = samples.div_ceil(grid.len());
            let mut bad = 0;
            let mut worst = 0.0f64;
            for &r in &grid {
                let hb =
                    Heatball::build(&s.kernel, r).map_err(CliError::numeric("fulks_weight"))?;
                for j in 1..=per_r {
                    let tau = hb.tau_sup() * j as f64 / (per_r + 1) as f64;
                    let d = hb
                        .slice_radius(tau)
                        .map_err(CliError::numeric("fulks_weight"))?;
                    let v = s
                        .kernel
                        .eval(d, tau)
                        .map_err(CliError::numeric("fulks_weight"))?;
                    let w = heat_sphere_weight(r.powi(-(n as i32)), &v);
                    let f = fulks_weight(n, r, d, tau);
                    let rel = (w - f).abs() / f.abs().max(f64::MIN_POSITIVE);
                    worst = worst.max(rel);
                    if !(rel <= weight_tol) {
                        bad += 1;
                    }
                }
            }
            report.note(format!(
                "boundary weight vs explicit flat weight: max relative deviation {worst:e} at {} points",
                per_r * grid.len()
            ));
            report.audit("boundary_weight_mismatch", bad);
        }
        Ok(())
    });
    Ok((name, job))
}

fn plan_reduced_volume(p: &Params) -> Result<(String, Job), CliError> {
    let model = p.model()?;
    let kernel = KernelField::reduced_volume_density(&model)
        .map_err(|e| CliError::Config(format!("`model`: {e}")))?;
    let phi = p.test_function(model.dim())?;
    let origin = SpaceTimeOrigin::pole(model.dim(), 0.0);
    phi.validate(&model, &origin)
        .map_err(|e| CliError::Config(format!("`phi`: {e}")))?;
    let grid = p.grid("r_grid")?;
    let taus = p.grid("taus")?;
    let r_max = p.positive("limit_r_max")?;
    let monotone_tol = p.positive("monotone_tol")?;
    let tol = p.positive("tol")?;
    let check_tol = p.positive("check_tol")?;
    let name = format!("{} / reduced-volume / {phi:?}", model.label());
    let job: Job = Box::new(move |report| {
        let curve = density_curve_in(&kernel, &phi, &origin, &grid, PForm::Defining, tol)
            .map_err(CliError::numeric("density_curve"))?;
        report.curve = curve_rows(&curve);
        report.audit("density_increases", curve.increases(monotone_tol));

        let limit = density_limit(&kernel, &phi, &origin, r_max, tol)
            .map_err(CliError::numeric("density_limit"))?;
        let target = reduced_limit(&model) * phi.at_origin(&origin);
        report.push(CheckRecord::value(
            "density_limit",
            limit.value,
            target,
            check_tol,
        ));

        let mut broken = 0;
        for w in grid.windows(2) {
            let c = comparison_inequality(&kernel, &phi, &origin, w[0], w[1], tol)
                .map_err(CliError::numeric("comparison_inequality"))?;
            if !c.holds {
                broken += 1;
                report.note(format!(
                    "comparison fails on [{}, {}]: {:e} > {:e}",
                    w[0], w[1], c.lhs, c.bound
                ));
            }
        }
        report.audit("comparison_inequality", broken);

        let vols = taus
            .iter()
            .map(|&t| reduced_volume(&model, t, 1e-2 * tol))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(CliError::numeric("reduced_volume"))?;
        report.note(format!("reduced volume at taus {taus:?}: {vols:?}"));
        report.audit(
            "reduced_volume_increases",
            vols.windows(2).filter(|w| w[1] > w[0] + 1e-9).count(),
        );
        report.audit(
            "reduced_volume_above_one",
            vols.iter().filter(|&&v| v > 1.0 + 1e-9).count(),
        );
        Ok(())
    });
    Ok((name, job))
}

fn plan_soliton_density(p: &Params) -> Result<(String, Job), CliError> {
    let model = p.model()?;
    let expected = match model.kind() {
        ModelKind::ShrinkingSphere { offset } if offset == 0.0 => vertex_density(model.dim()),
        ModelKind::GaussianSoliton => 1.0,
        _ => return Err(CliError::Config(
            "`model`: soliton densities need gaussian-soliton or shrinking-sphere with offset = 0"
                .into(),
        )),
    };
    let kernel = KernelField::reduced_volume_density(&model)
        .map_err(|e| CliError::Config(format!("`model`: {e}")))?;
    let grid = p.grid("r_grid")?;
    let form = form_of(p)?;
    let tol = p.positive("tol")?;
    let check_tol = p.positive("check_tol")?;
    let name = format!("{} / reduced-volume / one", model.label());
    let job: Job = Box::new(move |report| {
        let origin = SpaceTimeOrigin::pole(model.dim(), 0.0);
        let curve = density_curve_in(&kernel, &TestFunction::one(), &origin, &grid, form, tol)
            .map_err(CliError::numeric("density_curve"))?;
        report.curve = curve_rows(&curve);
        for pt in curve.points() {
            report.push(CheckRecord::value(
                at_r("P_over_rn", pt.r),
                pt.density,
                expected,
                check_tol,
            ));
        }
        Ok(())
    });
    Ok((name, job))
}

fn plan_monotonicity(p: &Params) -> Result<(String, Job), CliError> {
    let s = p.setup()?;
    let grid = p.grid("r_grid")?;
    let monotone_tol = p.positive("monotone_tol")?;
    let tol = p.positive("tol")?;
    if grid.len() < 2 {
        return Err(CliError::Config(
            "`r_grid`: needs at least two scales".into(),
        ));
    }
    let image = s.phi.heat_image(s.model.dim());
    // (nonincreasing, nondecreasing) requirements.
    let direction = if s.kernel.is_exact_solution() {
        (image >= 0.0, image <= 0.0)
    } else if s.kernel.kind() == KernelKind::ReducedVolumeDensity && image >= 0.0 {
        (true, false)
    } else {
        return Err(CliError::Config(
            "`kernel`/`phi`: no monotonicity claim for this combination (use an exact kernel, \
             or the reduced-volume density with a supersolution)"
                .into(),
        ));
    };
    let name = label(&s);
    let job: Job = Box::new(move |report| {
        let curve = density_curve_in(&s.kernel, &s.phi, &s.origin, &grid, PForm::Defining, tol)
            .map_err(CliError::numeric("density_curve"))?;
        report.curve = curve_rows(&curve);
        report.note(format!("heat image of phi: {image}"));
        if direction.0 {
            report.audit("density_increases", curve.increases(monotone_tol));
        }
        if direction.1 {
            report.audit("density_decreases", curve.decreases(monotone_tol));
        }
        Ok(())
    });
    Ok((name, job))
}

fn plan_identity_residual(p: &Params) -> Result<(String, Job), CliError> {
    let s = p.setup()?;
    let r0 = p.positive("r0")?;
    let r1 = p.positive("r1")?;
    if r1 <= r0 {
        return Err(CliError::Config("`r1`: must exceed r0".into()));
    }
    let tol = p.positive("tol")?;
    let check_tol = p.positive("check_tol")?;
    let name = label(&s);
    let job: Job = Box::new(move |report| {
        let t = identity_terms(&s.kernel, &s.phi, &s.origin, r0, r1, tol)
            .map_err(CliError::numeric("identity_terms"))?;
        report.note(format!(
            "lhs {:e}, source term {:e}, defect term {:e}",
            t.lhs, t.source, t.defect
        ));
        report.push(CheckRecord::value(
            "identity",
            t.lhs,
            t.rhs(),
            check_tol * t.lhs.abs().max(1.0),
        ));
        Ok(())
    });
    Ok((name, job))
}

fn plan_entropy(p: &Params) -> Result<(String, Job), CliError> {
    let model = p.model()?;
    let kernel = p.kernel(&model)?;
    let levels = p.f64_list("fbar")?;
    let tol = p.positive("tol")?;
    let check_tol = p.positive("check_tol")?;
    let name = format!("{} / {:?}", model.label(), kernel.kind());
    let job: Job = Box::new(move |report| {
        for fbar in levels {
            let check = format!("entropy@fbar={}", fmt_num(fbar));
            let v = entropy_level_integral(&kernel, fbar, tol)
                .map_err(CliError::numeric(check.clone()))?;
            report.push(CheckRecord::value(check, v, 1.0, check_tol));
        }
        Ok(())
    });
    Ok((name, job))
}

fn plan_ni_mvi(p: &Params) -> Result<(String, Job), CliError> {
    let model = p.model()?;
    let k = p.i32("curvature")?;
    KernelField::transplant(k, &model)
        .map_err(|e| CliError::Config(format!("`curvature`: {e}")))?;
    let phi = p.test_function(model.dim())?;
    let origin = p.origin(model.dim())?;
    phi.validate(&model, &origin)
        .map_err(|e| CliError::Config(format!("`phi`: {e}")))?;
    let grid = p.grid("r_grid")?;
    let taus = p.grid("compare_taus")?;
    let points = p.usize("compare_points")?;
    let reach = p.positive("compare_reach")?;
    let tol = p.positive("tol")?;
    let check_tol = p.positive("check_tol")?;
    let name = format!("{} / transplant k={k} / {phi:?}", model.label());
    let job: Job = Box::new(move |report| {
        let cmp = transplant_comparison(&model, k, reach, &taus, points)
            .map_err(CliError::numeric("transplant_comparison"))?;
        report.note(format!(
            "transplant vs own kernel at {} points: {} below, {} above, log ratio in [{:e}, {:e}]",
            cmp.points,
            cmp.transplant_below,
            cmp.transplant_above,
            cmp.min_log_ratio,
            cmp.max_log_ratio
        ));
        // Curvature comparison: the model's own kernel dominates the transplant.
        report.audit("transplant_above_kernel", cmp.transplant_above);

        let equality = cmp.transplant_below == 0 && cmp.transplant_above == 0;
        let value = phi.at_origin(&origin);
        let slack = check_tol * value.abs().max(1.0);
        let mut means = Vec::with_capacity(grid.len());
        for &r in &grid {
            let m = ni_mean_value_ratio(&model, k, r, &phi, &origin, tol)
                .map_err(CliError::numeric(at_r("transplant_mean", r)))?;
            if equality {
                report.push(CheckRecord::value(
                    at_r("transplant_mean", r),
                    m.mean,
                    value,
                    slack,
                ));
            }
            means.push(m.mean);
        }
        report.curve = grid
            .iter()
            .zip(&means)
            .map(|(&r, &m)| CurveRow {
                r,
                p: m * r.powi(model.dim() as i32),
                p_over_rn: m,
            })
            .collect();
        if !equality {
            report.audit(
                "transplant_mean_above_value",
                means.iter().filter(|&&m| m > value + slack).count(),
            );
            report.audit(
                "transplant_mean_increases",
                means.windows(2).filter(|w| w[1] > w[0] + slack).count(),
            );
        }
        Ok(())
    });
    Ok((name, job))
}

fn plan_bounds(p: &Params) -> Result<(String, Job), CliError> {
    let model = p.model()?;
    if !model.supports_reduced_geometry() {
        return Err(CliError::Config(
            "`model`: bounds need a Ricci-flow model (gaussian-soliton or shrinking-sphere)".into(),
        ));
    }
    let n_tau = p.usize("grid_tau")?;
    let n_d = p.usize("grid_d")?;
    let slices = p.usize("containment_slices")?;
    let levels = p.usize("finiteness_levels")?;
    let stability_tol = p.positive("stability_tol")?;
    let tol = p.positive("tol")?;
    let fixed_r = if p.has("containment_r") {
        Some(p.positive("containment_r")?)
    } else {
        None
    };
    let name = model.label();
    let job: Job = Box::new(move |report| {
        let ell = ell_bounds_audit(&model, n_tau, n_d).map_err(CliError::numeric("ell_bounds"))?;
        report.note(format!(
            "ell bounds: {} points, worst margin {:e}",
            ell.points, ell.worst_margin
        ));
        report.audit("ell_bounds", ell.violations);

        let limit = containment_scale_limit(&model).map_err(CliError::numeric("containment"))?;
        let r = fixed_r.unwrap_or(0.5 * limit.min(1.0));
        let contain =
            check_containment(&model, r, slices).map_err(CliError::numeric("containment"))?;
        report.note(format!(
            "containment at r = {r} (scale limit {limit}): {} points, worst margin {:e}",
            contain.points, contain.worst_margin
        ));
        report.audit("containment", contain.violations);

        let speed = speed_envelope_sweep(&model, n_tau, n_d)
            .map_err(CliError::numeric("speed_envelopes"))?;
        report.note(format!(
            "speed envelopes: {} nodes, worst margin {:e}",
            speed.points, speed.worst_margin
        ));
        report.audit("speed_envelopes", speed.violations);

        let phis = [
            TestFunction::one(),
            TestFunction::RadialPolynomial {
                a: 0.0,
                b: -1.0,
                c: 1.0,
            },
        ];
        let r_max = 0.9 * limit.min(1.0);
        let coarse = finiteness_constant(&model, &phis, &refined_scale_grid(r_max, levels, 1), tol)
            .map_err(CliError::numeric("finiteness"))?;
        let fine = finiteness_constant(&model, &phis, &refined_scale_grid(r_max, levels, 2), tol)
            .map_err(CliError::numeric("finiteness"))?;
        report.push(CheckRecord::value(
            "finiteness_constant_refined",
            fine,
            coarse,
            stability_tol * coarse.abs(),
        ));
        Ok(())
    });
    Ok((name, job))
}

fn plan_gradient_estimate(p: &Params) -> Result<(String, Job), CliError> {
    let model = p.model()?;
    let kernel = p.kernel(&model)?;
    if model.is_ricci_flow() || !kernel.is_exact_solution() {
        return Err(CliError::Config(
            "`kernel`: the gradient audit needs an exact kernel on a static model".into(),
        ));
    }
    let setup = GradientAuditSetup {
        rho: p.positive("rho")?,
        center_distance: p.f64("center_distance")?,
        time_shift: p.positive("time_shift")?,
        horizon: p.positive("audit_horizon")?,
        amplitude: p.positive("amplitude")?,
        resolution: p.usize("resolution")?,
    };
    if setup.resolution < 2 {
        return Err(CliError::Config("`resolution`: needs at least 2".into()));
    }
    let stability_tol = p.positive("stability_tol")?;
    let name = format!("{} / {:?}", model.label(), kernel.kind());
    let job: Job = Box::new(move |report| {
        let coarse = gradient_estimate_audit(&kernel, &setup)
            .map_err(CliError::numeric("gradient_audit"))?;
        let fine_setup = GradientAuditSetup {
            resolution: 2 * setup.resolution,
            ..setup
        };
        let fine = gradient_estimate_audit(&kernel, &fine_setup)
            .map_err(CliError::numeric("gradient_audit_refined"))?;
        report.note(format!(
            "k1 {} k2 {} k3 {} A {}; (C1, C2) {} {} -> {} {}",
            coarse.k1, coarse.k2, coarse.k3, coarse.a, coarse.c1, coarse.c2, fine.c1, fine.c2
        ));
        let unbounded = [coarse.c1, coarse.c2, fine.c1, fine.c2]
            .iter()
            .filter(|c| !(c.is_finite() && **c <= GRADIENT_CONSTANT_CAP))
            .count();
        report.audit("constants_unbounded", unbounded);
        report.push(CheckRecord::value(
            "c1_refined",
            fine.c1,
            coarse.c1,
            stability_tol * coarse.c1.abs(),
        ));
        report.push(CheckRecord::value(
            "c2_refined",
            fine.c2,
            coarse.c2,
            stability_tol * coarse.c2.abs(),
        ));
        Ok(())
    });
    Ok((name, job))
}

fn plan_sphere_kernel(p: &Params) -> Result<(String, Job), CliError> {
    let model = p.model()?;
    let kernel = p.kernel(&model)?;
    let KernelKind::SphereSpectral { tol: spectral_tol } = kernel.kind() else {
        return Err(CliError::Config(
            "`kernel`: this scenario needs kernel = \"sphere-spectral\"".into(),
        ));
    };
    let radius = model
        .sphere_radius(0.0)
        .expect("spectral kernels live on spheres");
    let taus = p.grid("taus")?;
    let grid = p.grid("r_grid")?;
    let points = p.usize("grid_points")?;
    let tau_min = p.positive("grid_tau_min")?;
    let tol = p.positive("tol")?;
    let check_tol = p.positive("check_tol")?;
    let mean_tol = p.positive("mean_tol")?;
    if points < 2 || tau_min >= model.horizon() {
        return Err(CliError::Config(
            "`grid_points`/`grid_tau_min`: need at least 2 points and a minimum time below the horizon"
                .into(),
        ));
    }
    let name = format!("{} / {:?}", model.label(), kernel.kind());
    let job: Job = Box::new(move |report| {
        let n = model.dim();
        for &tau in &taus {
            let check = format!("mass@tau={}", fmt_num(tau));
            let mass = integrate_adaptive(
                |d| {
                    sphere_spectral_density(radius, n, d, tau, spectral_tol).unwrap_or(f64::NAN)
                        * model.sphere_area(d, tau).unwrap_or(f64::NAN)
                },
                Interval::new(0.0, PI * radius).map_err(CliError::numeric(check.clone()))?,
                tol,
            )
            .map_err(CliError::numeric(check.clone()))?;
            report.push(CheckRecord::value(check, mass.value, 1.0, check_tol));
        }

        let mut rising = 0;
        for i in 0..points {
            let tau = tau_min + (model.horizon() - tau_min) * i as f64 / (points - 1) as f64;
            for j in 0..points {
                let d = 0.99 * PI * radius * j as f64 / (points - 1) as f64;
                let v = kernel
                    .eval(d, tau)
                    .map_err(CliError::numeric("radial_monotonicity"))?;
                if v.psi_d > 1e-12 {
                    rising += 1;
                }
            }
        }
        report.audit("kernel_increases_outward", rising);

        let one = TestFunction::one();
        let pole = SpaceTimeOrigin::pole(n, 0.0);
        for &r in &grid {
            let m = heat_sphere_mean(&kernel, r, &one, &pole, 1e-8)
                .map_err(CliError::numeric(at_r("heat_sphere_mean", r)))?;
            report.push(CheckRecord::value(
                at_r("heat_sphere_mean", r),
                m,
                1.0,
                mean_tol,
            ));
        }
        Ok(())
    });
    Ok((name, job))
}
