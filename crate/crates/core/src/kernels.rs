//! Positive space-time densities `Ψ` in log form, with analytic radial and
//! time derivatives.
//!
//! Every evaluator returns `ψ = log Ψ` together with `∂_d ψ`, `∂_dd ψ` and
//! `∂_τ ψ`, where `d` is the `g(τ)` distance from the pole and `∂_τ` is taken
//! at a fixed point of the manifold.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelSpacetime};
use crate::numerics::Interval;
use crate::reduced_geometry::ReducedSlice;

/// Largest truncation order of a spectral sum.
pub const SPECTRAL_CAP: usize = 10_000;

/// Default relative truncation tolerance for spectral kernels.
pub const SPECTRAL_TOL: f64 = 1e-13;

// Below these values of τ/ρ₀² the sphere kernels switch from the spectral sum
// to the short-time form: the exact single-image formula on S³, and the
// leading parametrix √(θ/sin θ) e^{τ/3} on S² (relative error O(τ²)).
const S2_SHORT_TIME: f64 = 1e-4;
const S3_SHORT_TIME: f64 = 2e-2;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelValue {
    pub psi: f64,
    pub psi_d: f64,
    pub psi_dd: f64,
    pub psi_tau: f64,
}

impl KernelValue {
    pub fn density(&self) -> f64 {
        self.psi.exp()
    }
}

/// Space-form curvature of a transplanted profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceForm {
    Hyperbolic,
    Flat,
    Spherical,
}

impl SpaceForm {
    pub fn from_curvature(k: i32) -> Result<Self> {
        match k {
            -1 => Ok(Self::Hyperbolic),
            0 => Ok(Self::Flat),
            1 => Ok(Self::Spherical),
            _ => Err(Error::InvalidParameter(format!(
                "space-form curvature must be -1, 0 or 1, got {k}"
            ))),
        }
    }

    pub fn curvature(&self) -> i32 {
        match self {
            Self::Hyperbolic => -1,
            Self::Flat => 0,
            Self::Spherical => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelKind {
    EuclideanBackward,
    SphereSpectral { tol: f64 },
    Hyperbolic3ClosedForm,
    Transplant { form: SpaceForm },
    ReducedVolumeDensity,
}

/// A kernel bound to a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelField {
    model: ModelSpacetime,
    kind: KernelKind,
}

impl KernelField {
    pub fn new(model: &ModelSpacetime, kind: KernelKind) -> Result<Self> {
        let ok = match kind {
            KernelKind::EuclideanBackward => model.is_flat(),
            KernelKind::SphereSpectral { tol } => {
                if !(tol > 0.0 && tol < 1e-3) {
                    return Err(Error::InvalidParameter(format!(
                        "spectral tolerance must lie in (0, 1e-3), got {tol}"
                    )));
                }
                matches!(model.kind(), ModelKind::SphereStatic { .. })
            }
            KernelKind::Hyperbolic3ClosedForm => model.kind() == ModelKind::Hyperbolic3Static,
            KernelKind::Transplant { form } => {
                check_transplant(model, form)?;
                true
            }
            KernelKind::ReducedVolumeDensity => model.supports_reduced_geometry(),
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "kernel {kind:?} is not available on {}",
                model.label()
            )));
        }
        Ok(Self {
            model: *model,
            kind,
        })
    }

    pub fn euclidean(model: &ModelSpacetime) -> Result<Self> {
        Self::new(model, KernelKind::EuclideanBackward)
    }

    pub fn sphere_spectral(model: &ModelSpacetime) -> Result<Self> {
        Self::new(model, KernelKind::SphereSpectral { tol: SPECTRAL_TOL })
    }

    pub fn hyperbolic3(model: &ModelSpacetime) -> Result<Self> {
        Self::new(model, KernelKind::Hyperbolic3ClosedForm)
    }

    pub fn transplant(k: i32, model: &ModelSpacetime) -> Result<Self> {
        Self::new(
            model,
            KernelKind::Transplant {
                form: SpaceForm::from_curvature(k)?,
            },
        )
    }

    pub fn reduced_volume_density(model: &ModelSpacetime) -> Result<Self> {
        Self::new(model, KernelKind::ReducedVolumeDensity)
    }

    pub fn model(&self) -> &ModelSpacetime {
        &self.model
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// `tr_g h` of the underlying model.
    pub fn trace_h(&self, tau: f64) -> f64 {
        self.model.trace_h(tau)
    }

    /// True when `Ψ` solves the conjugate heat equation exactly.
    pub fn is_exact_solution(&self) -> bool {
        match self.kind {
            KernelKind::Transplant { form } => {
                matches!(
                    (form, self.model.kind()),
                    (
                        SpaceForm::Flat,
                        ModelKind::EuclideanStatic | ModelKind::GaussianSoliton
                    ) | (SpaceForm::Hyperbolic, ModelKind::Hyperbolic3Static)
                ) || matches!(
                    (form, self.model.kind()),
                    (SpaceForm::Spherical, ModelKind::SphereStatic { radius }) if radius == 1.0
                )
            }
            KernelKind::ReducedVolumeDensity => match self.model.kind() {
                ModelKind::ShrinkingSphere { offset } => offset == 0.0,
                _ => true,
            },
            _ => true,
        }
    }

    /// True for heat kernels (unit mass, delta initial data).
    pub fn is_fundamental_solution(&self) -> bool {
        match self.kind {
            KernelKind::ReducedVolumeDensity => self.model.is_flat(),
            KernelKind::Transplant { .. } => self.is_exact_solution(),
            _ => true,
        }
    }

    /// Times at which the evaluator changes representation; quadratures over
    /// `τ` split there.
    pub fn time_breakpoints(&self) -> Vec<f64> {
        let sphere_switch = |radius: f64, n: usize| {
            let a = if n == 2 { S2_SHORT_TIME } else { S3_SHORT_TIME };
            a * radius * radius
        };
        match (self.kind, self.model.kind()) {
            (KernelKind::SphereSpectral { .. }, ModelKind::SphereStatic { radius }) => {
                vec![sphere_switch(radius, self.dim())]
            }
            (
                KernelKind::Transplant {
                    form: SpaceForm::Spherical,
                },
                _,
            ) => {
                vec![sphere_switch(1.0, self.dim())]
            }
            _ => Vec::new(),
        }
    }

    /// Precompute everything that depends only on `τ`.
    pub fn at_time(&self, tau: f64) -> Result<KernelSlice> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::NonPositiveTime(tau));
        }
        let n = self.dim();
        let profile = match self.kind {
            KernelKind::EuclideanBackward => Profile::Euclidean,
            KernelKind::SphereSpectral { tol } => match self.model.kind() {
                ModelKind::SphereStatic { radius } => Profile::Sphere { radius, tol },
                _ => unreachable!("validated at construction"),
            },
            KernelKind::Hyperbolic3ClosedForm => Profile::Hyperbolic3,
            KernelKind::Transplant { form } => match form {
                SpaceForm::Flat => Profile::Euclidean,
                SpaceForm::Hyperbolic => Profile::Hyperbolic3,
                SpaceForm::Spherical => Profile::Sphere {
                    radius: 1.0,
                    tol: SPECTRAL_TOL,
                },
            },
            KernelKind::ReducedVolumeDensity => {
                Profile::Reduced(Box::new(ReducedSlice::new(&self.model, tau)?))
            }
        };
        Ok(KernelSlice {
            n,
            tau,
            profile,
            max_distance: self.model.max_distance(tau),
        })
    }

    pub fn eval(&self, d: f64, tau: f64) -> Result<KernelValue> {
        self.at_time(tau)?.eval(d)
    }

    /// `(∂_τ − Δ − tr_g h)Ψ` at a point, using the radial Laplacian
    /// `∂_dd + (∂_d log area) ∂_d`.
    pub fn conjugate_pde_residual(&self, d: f64, tau: f64) -> Result<ResidualSample> {
        if tau < 1e-6 {
            return Err(Error::OutOfDomain(format!(
                "residual audit needs τ ≥ 1e-6, got {tau}"
            )));
        }
        let v = self.eval(d, tau)?;
        let lap = log_laplacian(&self.model, d, tau, &v);
        let relative = v.psi_tau - lap - v.psi_d * v.psi_d - self.trace_h(tau);
        let density = v.density();
        Ok(ResidualSample {
            d,
            tau,
            residual: relative * density,
            density,
            relative,
        })
    }
}

/// `Δψ = ψ_dd + (∂_d log area) ψ_d`, with the `d → 0` limit `n ψ_dd`.
pub(crate) fn log_laplacian(m: &ModelSpacetime, d: f64, tau: f64, v: &KernelValue) -> f64 {
    if d < 1e-7 {
        m.dim() as f64 * v.psi_dd
    } else {
        v.psi_dd + m.log_area_derivative(d, tau) * v.psi_d
    }
}

fn check_transplant(model: &ModelSpacetime, form: SpaceForm) -> Result<()> {
    let n = model.dim();
    match form {
        SpaceForm::Hyperbolic if n != 3 => {
            return Err(Error::InvalidParameter(
                "the hyperbolic profile is available in dimension 3 only".into(),
            ))
        }
        SpaceForm::Spherical if !(2..=3).contains(&n) => {
            return Err(Error::InvalidParameter(
                "the spherical profile is available in dimensions 2 and 3".into(),
            ))
        }
        _ => {}
    }
    if model.is_ricci_flow() {
        return Err(Error::InvalidParameter(
            "transplants are defined on static manifolds".into(),
        ));
    }
    let required = (n as f64 - 1.0) * form.curvature() as f64;
    let (lowest, _) = model.ricci_range(Interval::new(0.0, model.horizon())?);
    if lowest < required - 1e-12 {
        return Err(Error::CurvatureHypothesis {
            required,
            actual: lowest,
        });
    }
    Ok(())
}

/// One point of a conjugate-heat-equation audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub d: f64,
    pub tau: f64,
    /// `(∂_τ − Δ − tr_g h)Ψ`.
    pub residual: f64,
    pub density: f64,
    /// `residual / Ψ`.
    pub relative: f64,
}

#[derive(Debug, Clone)]
enum Profile {
    Euclidean,
    Sphere { radius: f64, tol: f64 },
    Hyperbolic3,
    Reduced(Box<ReducedSlice>),
}

/// A kernel restricted to one time.
#[derive(Debug, Clone)]
pub struct KernelSlice {
    n: usize,
    tau: f64,
    profile: Profile,
    max_distance: f64,
}

impl KernelSlice {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn max_distance(&self) -> f64 {
        self.max_distance
    }

    /// The reduced-distance slice behind a reduced-volume density.
    pub fn reduced(&self) -> Option<&ReducedSlice> {
        match &self.profile {
            Profile::Reduced(slice) => Some(slice),
            _ => None,
        }
    }

    pub fn eval(&self, d: f64) -> Result<KernelValue> {
        if !(d >= 0.0 && d <= self.max_distance * (1.0 + 1e-12)) {
            return Err(Error::OutOfDomain(format!(
                "distance {d} outside [0, {}]",
                self.max_distance
            )));
        }
        let tau = self.tau;
        match &self.profile {
            Profile::Euclidean => Ok(euclidean_backward_kernel(self.n, d, tau)),
            Profile::Sphere { radius, tol } => sphere_kernel(*radius, self.n, d, tau, *tol),
            Profile::Hyperbolic3 => Ok(hyperbolic3_kernel(d, tau)),
            Profile::Reduced(slice) => {
                let r = slice.eval(d);
                let n = self.n as f64;
                Ok(KernelValue {
                    psi: -0.5 * n * (4.0 * PI * tau).ln() - r.ell,
                    psi_d: -r.ell_d,
                    psi_dd: -r.ell_dd,
                    psi_tau: -0.5 * n / tau - r.ell_tau,
                })
            }
        }
    }
}

/// Euclidean backward heat kernel `(4πτ)^{-n/2} e^{-d²/4τ}`.
pub fn euclidean_backward_kernel(n: usize, d: f64, tau: f64) -> KernelValue {
    let n = n as f64;
    KernelValue {
        psi: -0.5 * n * (4.0 * PI * tau).ln() - d * d / (4.0 * tau),
        psi_d: -d / (2.0 * tau),
        psi_dd: -1.0 / (2.0 * tau),
        psi_tau: -0.5 * n / tau + d * d / (4.0 * tau * tau),
    }
}

/// `(log(x/sinh x), first, second derivative)` or the `sin` analogue.
fn log_sinc(x: f64, hyperbolic: bool) -> (f64, f64, f64) {
    let sg = if hyperbolic { -1.0 } else { 1.0 };
    if x < 1e-2 {
        let x2 = x * x;
        let g = sg * x2 / 6.0 + x2 * x2 / 180.0 + sg * x2 * x2 * x2 / 2835.0;
        let g1 = sg * x / 3.0 + x * x2 / 45.0 + sg * 2.0 * x * x2 * x2 / 945.0;
        let g2 = sg / 3.0 + x2 / 15.0 + sg * 2.0 * x2 * x2 / 189.0;
        return (g, g1, g2);
    }
    if hyperbolic {
        let s = x.sinh();
        (
            (x / s).ln(),
            1.0 / x - 1.0 / x.tanh(),
            -1.0 / (x * x) + 1.0 / (s * s),
        )
    } else {
        let s = x.sin();
        (
            (x / s).ln(),
            1.0 / x - 1.0 / x.tan(),
            -1.0 / (x * x) + 1.0 / (s * s),
        )
    }
}

/// Heat kernel of hyperbolic 3-space:
/// `(4πτ)^{-3/2} (d/sinh d) e^{-d²/4τ - τ}`.
pub fn hyperbolic3_kernel(d: f64, tau: f64) -> KernelValue {
    let (g, g1, g2) = log_sinc(d, true);
    KernelValue {
        psi: -1.5 * (4.0 * PI * tau).ln() + g - d * d / (4.0 * tau) - tau,
        psi_d: g1 - d / (2.0 * tau),
        psi_dd: g2 - 1.0 / (2.0 * tau),
        psi_tau: -1.5 / tau + d * d / (4.0 * tau * tau) - 1.0,
    }
}

/// Heat kernel of the round sphere `S^n_{ρ₀}` (`n ∈ {2, 3}`): the spectral sum
/// for `τ/ρ₀²` above a small threshold, the short-time form below it.
pub fn sphere_kernel(radius: f64, n: usize, d: f64, tau: f64, tol: f64) -> Result<KernelValue> {
    let a = tau / (radius * radius);
    let theta = d / radius;
    let short = if n == 2 { S2_SHORT_TIME } else { S3_SHORT_TIME };
    if a >= short {
        return sphere_spectral_kernel(radius, n, d, tau, tol);
    }
    let limit = if n == 2 {
        0.9 * PI
    } else {
        // The antipodal image contributes e^{-π(π-θ)/a} relative.
        PI - 40.0 * a / PI
    };
    if theta > limit {
        return Err(Error::IllConditioned(format!(
            "short-time sphere kernel is not resolved at θ = {theta}, τ/ρ₀² = {a}"
        )));
    }
    let nf = n as f64;
    let (g, g1, g2) = log_sinc(theta, false);
    // S²: half the S³ amplitude factor and e^{a/3}; S³: e^{a}.
    let (amp, growth) = if n == 2 { (0.5, 1.0 / 3.0) } else { (1.0, 1.0) };
    let psi_unit =
        -0.5 * nf * (4.0 * PI * a).ln() + amp * g - theta * theta / (4.0 * a) + growth * a;
    let r2 = radius * radius;
    Ok(KernelValue {
        psi: psi_unit - nf * radius.ln(),
        psi_d: (amp * g1 - theta / (2.0 * a)) / radius,
        psi_dd: (amp * g2 - 1.0 / (2.0 * a)) / r2,
        psi_tau: (-0.5 * nf / a + theta * theta / (4.0 * a * a) + growth) / r2,
    })
}

struct SpectralSums {
    s: f64,
    s_x: f64,
    s_xx: f64,
    s_a: f64,
    abs: f64,
    terms: usize,
}

fn spectral_sums(
    n: usize,
    a: f64,
    x: f64,
    tol: f64,
    tau: f64,
    check_conditioning: bool,
) -> Result<SpectralSums> {
    // S²: Σ (2l+1) e^{-l(l+1)a} P_l(x);  S³: Σ (l+1) e^{-l(l+2)a} U_l(x).
    let (coef, eig, power): (fn(f64) -> f64, fn(f64) -> f64, i32) = if n == 2 {
        (|l| 2.0 * l + 1.0, |l| l * (l + 1.0), 6)
    } else {
        (|l| l + 1.0, |l| l * (l + 2.0), 7)
    };
    let majorant = |l: f64| coef(l) * (-eig(l) * a).exp() * (l + 1.0).powi(power);

    let (mut q0, mut q1) = (1.0, if n == 2 { x } else { 2.0 * x });
    let (mut d0, mut d1) = (0.0, if n == 2 { 1.0 } else { 2.0 });
    let (mut e0, mut e1) = (0.0, 0.0);
    let mut out = SpectralSums {
        s: 0.0,
        s_x: 0.0,
        s_xx: 0.0,
        s_a: 0.0,
        abs: 0.0,
        terms: 0,
    };
    for l in 0..=SPECTRAL_CAP {
        let lf = l as f64;
        let (q, dq, ddq) = match l {
            0 => (q0, d0, e0),
            1 => (q1, d1, e1),
            _ => {
                let (q2, d2, e2) = if n == 2 {
                    let k = lf - 1.0;
                    (
                        ((2.0 * k + 1.0) * x * q1 - k * q0) / (k + 1.0),
                        d0 + (2.0 * k + 1.0) * q1,
                        e0 + (2.0 * k + 1.0) * d1,
                    )
                } else {
                    (
                        2.0 * x * q1 - q0,
                        2.0 * q1 + 2.0 * x * d1 - d0,
                        4.0 * d1 + 2.0 * x * e1 - e0,
                    )
                };
                q0 = q1;
                q1 = q2;
                d0 = d1;
                d1 = d2;
                e0 = e1;
                e1 = e2;
                (q2, d2, e2)
            }
        };
        let t = coef(lf) * (-eig(lf) * a).exp();
        out.s += t * q;
        out.s_x += t * dq;
        out.s_xx += t * ddq;
        out.s_a -= t * eig(lf) * q;
        out.abs += t * q.abs();
        out.terms = l + 1;

        let m = majorant(lf);
        let ratio = majorant(lf + 1.0) / m;
        if l >= 1 && ratio < 1.0 && m * ratio / (1.0 - ratio) <= tol * out.s.abs() {
            let rounding = 4.0 * f64::EPSILON * out.abs * (out.terms as f64).sqrt();
            if check_conditioning && rounding > tol.max(1e-10) * out.s.abs() {
                return Err(Error::IllConditioned(format!(
                    "spectral sum cancels to {:e} from terms of size {:e}",
                    out.s, out.abs
                )));
            }
            return Ok(out);
        }
    }
    // Locate the order the tail bound would have needed.
    let target = tol * out.s.abs().max(f64::MIN_POSITIVE);
    let mut required = SPECTRAL_CAP;
    loop {
        required = required.saturating_mul(2);
        let m = majorant(required as f64);
        if m <= target || required > 1 << 40 {
            break;
        }
    }
    Err(Error::TruncationCap {
        required,
        cap: SPECTRAL_CAP,
        tau,
    })
}

/// Heat kernel of `S^n_{ρ₀}` (`n ∈ {2, 3}`) from its eigenfunction expansion,
/// truncated once the tail bound falls below `tol · Ψ`.
pub fn sphere_spectral_kernel(
    radius: f64,
    n: usize,
    d: f64,
    tau: f64,
    tol: f64,
) -> Result<KernelValue> {
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "spectral sphere kernel needs n ∈ {{2, 3}}, got {n}"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::NonPositiveTime(tau));
    }
    let theta = d / radius;
    if !(0.0..=PI * (1.0 + 1e-12)).contains(&theta) {
        return Err(Error::OutOfDomain(format!(
            "distance {d} outside the sphere of radius {radius}"
        )));
    }
    let theta = theta.min(PI);
    let a = tau / (radius * radius);
    let (sin, cos) = theta.sin_cos();
    let sums = spectral_sums(n, a, cos, tol, tau, true)?;
    if !(sums.s > 0.0) {
        return Err(Error::IllConditioned(format!(
            "spectral sum is not positive ({:e})",
            sums.s
        )));
    }
    let volume = if n == 2 {
        4.0 * PI * radius * radius
    } else {
        2.0 * PI * PI * radius.powi(3)
    };
    let s_theta = -sin * sums.s_x;
    let s_thetatheta = sin * sin * sums.s_xx - cos * sums.s_x;
    let g1 = s_theta / sums.s;
    let r2 = radius * radius;
    Ok(KernelValue {
        psi: (sums.s / volume).ln(),
        psi_d: g1 / radius,
        psi_dd: (s_thetatheta / sums.s - g1 * g1) / r2,
        psi_tau: sums.s_a / sums.s / r2,
    })
}

/// `Ψ` on `S^n_{ρ₀}` from the spectral sum, without the relative-conditioning
/// check: accurate to about `ε · Ψ(pole)` in absolute terms, which is what
/// mass integrals need far from the pole.
pub fn sphere_spectral_density(radius: f64, n: usize, d: f64, tau: f64, tol: f64) -> Result<f64> {
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "spectral sphere kernel needs n ∈ {{2, 3}}, got {n}"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::NonPositiveTime(tau));
    }
    let theta = (d / radius).clamp(0.0, PI);
    let sums = spectral_sums(n, tau / (radius * radius), theta.cos(), tol, tau, false)?;
    let volume = if n == 2 {
        4.0 * PI * radius * radius
    } else {
        2.0 * PI * PI * radius.powi(3)
    };
    Ok(sums.s / volume)
}

/// `log v` and derivatives of the reduced-volume density on a Ricci-flow model.
pub fn reduced_volume_density(m: &ModelSpacetime, d: f64, tau: f64) -> Result<KernelValue> {
    KernelField::reduced_volume_density(m)?.eval(d, tau)
}

/// The heat kernel of a static model: Euclidean, spectral sphere or
/// hyperbolic closed form.
pub fn own_heat_kernel(model: &ModelSpacetime) -> Result<KernelField> {
    match model.kind() {
        ModelKind::EuclideanStatic => KernelField::euclidean(model),
        ModelKind::SphereStatic { .. } => KernelField::sphere_spectral(model),
        ModelKind::Hyperbolic3Static => KernelField::hyperbolic3(model),
        _ => Err(Error::Mismatch(format!(
            "{} is not a static model with a closed-form heat kernel",
            model.label()
        ))),
    }
}

/// Pointwise comparison of a transplanted space-form kernel `Ψ̃` with the
/// model's own heat kernel `Ψ` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransplantComparison {
    pub points: usize,
    /// Grid points with `Ψ̃ < Ψ` beyond rounding.
    pub transplant_below: usize,
    /// Grid points with `Ψ̃ > Ψ` beyond rounding.
    pub transplant_above: usize,
    /// Extremes of `log Ψ̃ − log Ψ`.
    pub min_log_ratio: f64,
    pub max_log_ratio: f64,
}

/// Compares `Ψ̃` and `Ψ` at `n_d × n_tau` points with distances up to
/// `reach` (clipped to 95% of the diameter on compact models) and times in
/// `taus`.
pub fn transplant_comparison(
    model: &ModelSpacetime,
    k: i32,
    reach: f64,
    taus: &[f64],
    n_d: usize,
) -> Result<TransplantComparison> {
    let transplant = KernelField::transplant(k, model)?;
    let own = own_heat_kernel(model)?;
    let mut ratios = Vec::new();
    for &tau in taus {
        let reach = reach.min(0.95 * model.max_distance(tau));
        for j in 0..n_d {
            let d = reach * j as f64 / (n_d.max(2) - 1) as f64;
            ratios.push(transplant.eval(d, tau)?.psi - own.eval(d, tau)?.psi);
        }
    }
    let slack = 1e-12;
    Ok(TransplantComparison {
        points: ratios.len(),
        transplant_below: ratios.iter().filter(|r| **r < -slack).count(),
        transplant_above: ratios.iter().filter(|r| **r > slack).count(),
        min_log_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_log_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
