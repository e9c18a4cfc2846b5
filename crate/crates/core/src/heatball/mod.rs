//! Heatballs `E_r = {ψ + n log r > 0}` of a kernel field and the local
//! mean-value quantities built on them.
//!
//! All space-time integrals are reduced to two dimensions: an outer integral
//! over backward time `τ ∈ (0, τ_sup)` and an inner radial integral over
//! `d ∈ [0, ρ(τ)]` weighted by the area of geodesic spheres. Angular averages
//! of test functions are analytic.

mod test_function;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use test_function::{SpaceTimeOrigin, TestFunction};

use crate::error::{Error, Result};
use crate::kernels::{log_laplacian, KernelField, KernelKind, KernelSlice, KernelValue};
use crate::models::{ModelKind, ModelSpacetime};
use crate::numerics::{
    extrapolate_to_zero, gauss_legendre, pairwise_sum, try_find_root, try_integrate_with,
    Extrapolation, Interval, QuadOptions,
};

/// Default relative tolerance of heatball quadratures.
pub const HEATBALL_TOL: f64 = 1e-10;

/// Number of Gauss–Legendre nodes in `r` for the identity residual.
pub const IDENTITY_NODES: usize = 64;

// Early times are integrated in w = log(τ_sup / 2τ) up to this cutoff. The
// integrand decays at least like e^{-w/2} w², so the neglected tail is far
// below double precision.
const W_MAX: f64 = 80.0;

/// Which expression of `P_{φ,Ψ}(r)` to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PForm {
    /// `∫ [|∇ψ|² − tr h · ψ_(r)] φ`.
    Defining,
    /// `∫ (ψ_t + |∇ψ|²)`, constant `φ` only.
    Alternate,
    /// `∫ (n/2τ + ℓ_τ + |∇ℓ|²)`, constant `φ` and reduced-volume kernels only.
    Reduced,
}

/// The super-level set `{Ψ > r^{-n}}` of a kernel field.
///
/// Slices are balls `d < ρ(τ)` about the pole, because `ψ` is radially
/// decreasing on every model; `ρ` is found per slice by root finding.
#[derive(Debug, Clone, Copy)]
pub struct Heatball {
    kernel: KernelField,
    r: f64,
    level: f64,
    tau_sup: f64,
}

impl Heatball {
    pub fn build(kernel: &KernelField, r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "heatball scale must be positive, got {r}"
            )));
        }
        let level = kernel.dim() as f64 * r.ln();
        let horizon = kernel.model().horizon();
        let center = |tau: f64| -> Result<f64> { Ok(kernel.eval(0.0, tau)?.psi + level) };

        // The set is open, so a slice where ψ_(r) only touches zero is empty;
        // allow for rounding of that zero.
        let at_horizon = center(horizon)?;
        if at_horizon > 1e-13 * (1.0 + level.abs()) {
            return Err(Error::ScaleTooLarge {
                r,
                reason: format!(
                    "the slice at the horizon τ = {horizon} is not empty (ψ_(r) = {at_horizon:e} at the pole)"
                ),
            });
        }

        let guess = (r * r / (4.0 * PI)).min(0.5 * horizon);
        let (mut lo, mut hi) = (guess, guess);
        let mut iterations = 0;
        let mut touches_horizon = false;
        if center(guess)? > 0.0 {
            while center(hi)? > 0.0 {
                if hi >= horizon {
                    touches_horizon = true;
                    break;
                }
                lo = hi;
                hi = (2.0 * hi).min(horizon);
                iterations += 1;
                if iterations > 2000 {
                    return Err(Error::IterationCap {
                        what: "heatball time bracket",
                        iterations,
                    });
                }
            }
        } else {
            while center(lo)? <= 0.0 {
                hi = lo;
                lo *= 0.5;
                iterations += 1;
                if iterations > 2000 || lo == 0.0 {
                    return Err(Error::IterationCap {
                        what: "heatball time bracket",
                        iterations,
                    });
                }
            }
        }
        let tau_sup = if touches_horizon {
            horizon
        } else if lo == hi {
            lo
        } else {
            try_find_root(center, Interval::new(lo, hi)?, 1e-15 * hi)?
        };
        Ok(Self {
            kernel: *kernel,
            r,
            level,
            tau_sup,
        })
    }

    pub fn kernel(&self) -> &KernelField {
        &self.kernel
    }

    pub fn model(&self) -> &ModelSpacetime {
        self.kernel.model()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// `rⁿ`, the normalization of every mean-value quantity.
    pub fn volume_scale(&self) -> f64 {
        self.r.powi(self.dim() as i32)
    }

    pub fn tau_sup(&self) -> f64 {
        self.tau_sup
    }

    /// `ψ_(r) = ψ + n log r`.
    pub fn shifted(&self, v: &KernelValue) -> f64 {
        v.psi + self.level
    }

    pub fn contains(&self, d: f64, tau: f64) -> Result<bool> {
        if !(tau > 0.0 && tau < self.tau_sup) {
            return Ok(false);
        }
        Ok(self.shifted(&self.kernel.eval(d, tau)?) > 0.0)
    }

    /// Radius `ρ(τ)` of the slice at time `τ`; zero outside `(0, τ_sup)` and
    /// the maximal distance when the slice is the whole manifold.
    pub fn slice_radius(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau < self.tau_sup) {
            return Ok(0.0);
        }
        self.radius_on(&self.kernel.at_time(tau)?)
    }

    /// `(τ, ρ(τ))` at `samples` equally spaced interior times.
    pub fn radius_profile(&self, samples: usize) -> Result<Vec<(f64, f64)>> {
        (1..=samples)
            .map(|k| {
                let tau = self.tau_sup * k as f64 / (samples + 1) as f64;
                Ok((tau, self.slice_radius(tau)?))
            })
            .collect()
    }

    fn radius_on(&self, slice: &KernelSlice) -> Result<f64> {
        // Far-field spectral sums may refuse to resolve tiny densities; those
        // points are far outside any heatball.
        let f = |d: f64| -> Result<f64> {
            match slice.eval(d) {
                Ok(v) => Ok(self.shifted(&v)),
                Err(Error::IllConditioned(_)) => Ok(-1.0),
                Err(e) => Err(e),
            }
        };
        if f(0.0)? <= 0.0 {
            return Ok(0.0);
        }
        let tau = slice.tau();
        let d_max = slice.max_distance();
        let n = self.dim() as f64;
        let mut guess = (2.0 * n * tau * (self.r * self.r / (4.0 * PI * tau)).ln()).sqrt();
        if !(guess.is_finite() && guess > 0.0) {
            guess = tau.sqrt();
        }
        let mut lo = 0.0;
        let mut hi = guess.min(d_max);
        let mut iterations = 0;
        while f(hi)? > 0.0 {
            if hi >= d_max {
                return Ok(d_max);
            }
            lo = hi;
            hi = (1.25 * hi).min(d_max);
            iterations += 1;
            if iterations > 4000 {
                return Err(Error::IterationCap {
                    what: "heatball slice bracket",
                    iterations,
                });
            }
        }
        try_find_root(f, Interval::new(lo, hi)?, 4.0 * f64::EPSILON * hi)
    }

    /// `∫_0^{τ_sup} f(τ) dτ`, with substitutions that flatten both
    /// degenerate ends and splits at the kernel's representation switches.
    pub fn time_integral<F>(&self, opts: QuadOptions, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let ts = self.tau_sup;
        let half = 0.5 * ts;
        let breaks: Vec<f64> = self
            .kernel
            .time_breakpoints()
            .into_iter()
            .filter(|b| *b > 0.0 && *b < ts)
            .collect();
        let mut parts = Vec::new();

        // τ = (τ_sup/2) e^{-w} on (0, τ_sup/2].
        let mut cuts = vec![0.0, W_MAX];
        cuts.extend(
            breaks
                .iter()
                .filter(|b| **b < half)
                .map(|b| (half / b).ln())
                .filter(|w| *w < W_MAX),
        );
        sort_dedup(&mut cuts);
        for w in cuts.windows(2) {
            let part = try_integrate_with(
                |w| {
                    let tau = half * (-w).exp();
                    Ok(f(tau)? * tau)
                },
                Interval::new(w[0], w[1])?,
                opts,
            )?;
            parts.push(part.value);
        }

        // τ = τ_sup − (τ_sup/2) v² on [τ_sup/2, τ_sup).
        let mut cuts = vec![0.0, 1.0];
        cuts.extend(
            breaks
                .iter()
                .filter(|b| **b > half)
                .map(|b| ((ts - b) / half).sqrt()),
        );
        sort_dedup(&mut cuts);
        for v in cuts.windows(2) {
            let part = try_integrate_with(
                |v| {
                    let tau = ts - half * v * v;
                    Ok(f(tau)? * 2.0 * half * v)
                },
                Interval::new(v[0], v[1])?,
                opts,
            )?;
            parts.push(part.value);
        }
        Ok(pairwise_sum(&parts))
    }

    /// `∫_{E_r} f dμ dτ` for a radial integrand `f(slice, d, Ψ-value)`.
    ///
    /// `abs_tol` bounds the total error together with `rel_tol`.
    pub fn volume_integral<F>(&self, rel_tol: f64, abs_tol: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(&KernelSlice, f64, &KernelValue) -> Result<f64>,
    {
        let model = *self.model();
        let outer = QuadOptions::absolute(abs_tol).with_rel(rel_tol);
        let inner = QuadOptions::absolute(0.1 * abs_tol / self.tau_sup).with_rel(0.1 * rel_tol);
        self.time_integral(outer, |tau| {
            let slice = self.kernel.at_time(tau)?;
            let rho = self.radius_on(&slice)?;
            if rho <= 0.0 {
                return Ok(0.0);
            }
            let res = try_integrate_with(
                |d| {
                    let v = slice.eval(d)?;
                    Ok(f(&slice, d, &v)? * model.area_unchecked(d, tau))
                },
                Interval::new(0.0, rho)?,
                inner,
            )?;
            Ok(res.value)
        })
    }

    /// `P_{φ,Ψ}(r)` in the requested form.
    pub fn p_value(
        &self,
        phi: &TestFunction,
        origin: &SpaceTimeOrigin,
        form: PForm,
        tol: f64,
    ) -> Result<f64> {
        phi.validate(self.model(), origin)?;
        let constant = match phi {
            TestFunction::Constant { c } => Some(*c),
            _ => None,
        };
        let abs_tol = tol * self.volume_scale() * phi.at_origin(origin).abs().max(1.0);
        let n = self.dim() as f64;
        match form {
            PForm::Defining => self.volume_integral(tol, abs_tol, |slice, d, v| {
                let tau = slice.tau();
                let weight = v.psi_d * v.psi_d - self.kernel.trace_h(tau) * self.shifted(v);
                Ok(weight * phi.spherical_mean(origin, d, origin.s - tau))
            }),
            PForm::Alternate => {
                let c = constant.ok_or_else(|| {
                    Error::Mismatch("the alternate form needs a constant test function".into())
                })?;
                let integral = self
                    .volume_integral(tol, abs_tol, |_, _, v| Ok(v.psi_d * v.psi_d - v.psi_tau))?;
                Ok(c * integral)
            }
            PForm::Reduced => {
                let c = constant.ok_or_else(|| {
                    Error::Mismatch("the reduced form needs a constant test function".into())
                })?;
                if self.kernel.kind() != KernelKind::ReducedVolumeDensity {
                    return Err(Error::Mismatch(
                        "the reduced form needs a reduced-volume density".into(),
                    ));
                }
                let integral = self.volume_integral(tol, abs_tol, |slice, d, _| {
                    let tau = slice.tau();
                    let l = slice
                        .reduced()
                        .expect("reduced-volume slices carry ℓ")
                        .eval(d);
                    Ok(0.5 * n / tau + l.ell_tau + l.ell_d * l.ell_d)
                })?;
                Ok(c * integral)
            }
        }
    }

    /// `∫_{E_r} |∇ψ|²`.
    pub fn gradient_energy(&self, tol: f64) -> Result<f64> {
        self.volume_integral(tol, tol * self.volume_scale(), |_, _, v| {
            Ok(v.psi_d * v.psi_d)
        })
    }

    /// `(n/r) ∫ ∫_{∂E_r(τ)} |∇ψ| dσ dτ`: the `r`-derivative of
    /// [`gradient_energy`](Self::gradient_energy) by the coarea formula.
    pub fn boundary_gradient_flux(&self, tol: f64) -> Result<f64> {
        let model = *self.model();
        let opts = QuadOptions::absolute(tol * self.volume_scale() / self.r).with_rel(tol);
        let integral = self.time_integral(opts, |tau| {
            let slice = self.kernel.at_time(tau)?;
            let rho = self.radius_on(&slice)?;
            if rho <= 0.0 || rho >= slice.max_distance() {
                return Ok(0.0);
            }
            Ok(slice.eval(rho)?.psi_d.abs() * model.area_unchecked(rho, tau))
        })?;
        Ok(self.dim() as f64 / self.r * integral)
    }

    /// `∫_{E_r} dμ dτ`.
    pub fn spacetime_volume(&self, tol: f64) -> Result<f64> {
        self.volume_integral(tol, tol * self.volume_scale(), |_, _, _| Ok(1.0))
    }
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}

/// Builds the heatball of scale `r` and integrates `P_{φ,Ψ}(r)`.
pub fn compute_p(
    kernel: &KernelField,
    r: f64,
    phi: &TestFunction,
    origin: &SpaceTimeOrigin,
    form: PForm,
    tol: f64,
) -> Result<f64> {
    Heatball::build(kernel, r)?.p_value(phi, origin, form, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub r: f64,
    pub p: f64,
    /// `P(r)/rⁿ`.
    pub density: f64,
}

/// Samples of `P(r)/rⁿ` on an increasing grid of scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    points: Vec<DensityPoint>,
}

impl DensityCurve {
    pub fn new(points: Vec<DensityPoint>) -> Result<Self> {
        if points
            .iter()
            .any(|p| !(p.r.is_finite() && p.p.is_finite() && p.density.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "density curve entries must be finite".into(),
            ));
        }
        if points.windows(2).any(|w| w[0].r >= w[1].r) {
            return Err(Error::InvalidParameter(
                "density curve scales must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[DensityPoint] {
        &self.points
    }

    pub fn densities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.density).collect()
    }

    /// Number of consecutive pairs that increase by more than `tol`.
    pub fn increases(&self, tol: f64) -> usize {
        self.points
            .windows(2)
            .filter(|w| w[1].density > w[0].density + tol)
            .count()
    }

    /// Number of consecutive pairs that decrease by more than `tol`.
    pub fn decreases(&self, tol: f64) -> usize {
        self.points
            .windows(2)
            .filter(|w| w[1].density < w[0].density - tol)
            .count()
    }

    /// Largest deviation of any density from `target`.
    pub fn max_deviation(&self, target: f64) -> f64 {
        self.points
            .iter()
            .map(|p| (p.density - target).abs())
            .fold(0.0, f64::max)
    }
}

/// `P(r)/rⁿ` (defining form) on a grid of scales, computed in parallel.
pub fn density_curve(
    kernel: &KernelField,
    phi: &TestFunction,
    origin: &SpaceTimeOrigin,
    r_grid: &[f64],
    tol: f64,
) -> Result<DensityCurve> {
    density_curve_in(kernel, phi, origin, r_grid, PForm::Defining, tol)
}

/// [`density_curve`] in an arbitrary form.
pub fn density_curve_in(
    kernel: &KernelField,
    phi: &TestFunction,
    origin: &SpaceTimeOrigin,
    r_grid: &[f64],
    form: PForm,
    tol: f64,
) -> Result<DensityCurve> {
    let n = kernel.dim() as i32;
    let points = r_grid
        .par_iter()
        .map(|&r| {
            let p = compute_p(kernel, r, phi, origin, form, tol)?;
            Ok(DensityPoint {
                r,
                p,
                density: p / r.powi(n),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DensityCurve::new(points)
}

/// Scales `r_max · 2^{-k}` for `k = levels−1, …, 0`, increasing.
pub fn geometric_grid(r_max: f64, levels: usize) -> Vec<f64> {
    (0..levels)
        .rev()
        .map(|k| r_max * 0.5f64.powi(k as i32))
        .collect()
}

/// `lim_{r→0} P(r)/rⁿ` by polynomial extrapolation in `r²` over a
/// geometric grid below `r_max`.
pub fn density_limit(
    kernel: &KernelField,
    phi: &TestFunction,
    origin: &SpaceTimeOrigin,
    r_max: f64,
    tol: f64,
) -> Result<Extrapolation> {
    let admissible =
        kernel.is_fundamental_solution() || kernel.kind() == KernelKind::ReducedVolumeDensity;
    if !admissible {
        return Err(Error::Mismatch(
            "the density limit needs a heat kernel or a reduced-volume density".into(),
        ));
    }
    let curve = density_curve(kernel, phi, origin, &geometric_grid(r_max, 6), tol)?;
    let samples: Vec<(f64, f64)> = curve.points().iter().map(|p| (p.r, p.density)).collect();
    extrapolate_to_zero(&samples, 3)
}

/// Both sides of the monotonicity identity between two scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityTerms {
    pub r0: f64,
    pub r1: f64,
    /// `P(r1)/r1ⁿ − P(r0)/r0ⁿ`.
    pub lhs: f64,
    /// `−∫ (n/r^{n+1}) ∫_{E_r} Q φ`, with `Q` the kernel's defect from the
    /// conjugate heat equation (zero for exact kernels).
    pub defect: f64,
    /// `−∫ (n/r^{n+1}) ∫_{E_r} ψ_(r) (φ_t − Δφ)`.
    pub source: f64,
}

impl IdentityTerms {
    pub fn rhs(&self) -> f64 {
        self.defect + self.source
    }

    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs()).abs()
    }
}

/// Evaluates [`IdentityTerms`] with a Gauss–Legendre rule in `r` and a
/// heatball quadrature at every node.
pub fn identity_terms(
    kernel: &KernelField,
    phi: &TestFunction,
    origin: &SpaceTimeOrigin,
    r0: f64,
    r1: f64,
    tol: f64,
) -> Result<IdentityTerms> {
    let span = Interval::new(r0, r1)?;
    phi.validate(kernel.model(), origin)?;
    let n = kernel.dim();
    let nf = n as f64;
    let model = *kernel.model();
    let heat_image = phi.heat_image(n);

    let (nodes, weights) = gauss_legendre(IDENTITY_NODES);
    let half = 0.5 * span.width();
    let mid = span.midpoint();
    let terms = nodes
        .par_iter()
        .zip(weights.par_iter())
        .map(|(x, w)| {
            let r = mid + half * x;
            let hb = Heatball::build(kernel, r)?;
            let scale = hb.volume_scale() * phi.at_origin(origin).abs().max(1.0);
            let source =
                hb.volume_integral(tol, tol * scale, |_, _, v| Ok(-hb.shifted(v) * heat_image))?;
            let defect = if kernel.is_exact_solution() {
                0.0
            } else {
                hb.volume_integral(tol, tol * scale, |slice, d, v| {
                    let tau = slice.tau();
                    let q = -(v.psi_tau
                        - log_laplacian(&model, d, tau, v)
                        - v.psi_d * v.psi_d
                        - kernel.trace_h(tau));
                    Ok(-q * phi.spherical_mean(origin, d, origin.s - tau))
                })?
            };
            let factor = half * w * nf / r.powi(n as i32 + 1);
            Ok((factor * defect, factor * source))
        })
        .collect::<Result<Vec<_>>>()?;
    let defect = pairwise_sum(&terms.iter().map(|t| t.0).collect::<Vec<_>>());
    let source = pairwise_sum(&terms.iter().map(|t| t.1).collect::<Vec<_>>());

    let density = |r: f64| -> Result<f64> {
        Ok(compute_p(kernel, r, phi, origin, PForm::Defining, tol)? / r.powi(n as i32))
    };
    let lhs = density(r1)? - density(r0)?;
    Ok(IdentityTerms {
        r0,
        r1,
        lhs,
        defect,
        source,
    })
}

/// Residual of the monotonicity identity for kernels that solve the
/// conjugate heat equation exactly.
pub fn main_identity_residual(
    kernel: &KernelField,
    phi: &TestFunction,
    origin: &SpaceTimeOrigin,
    r0: f64,
    r1: f64,
    tol: f64,
) -> Result<IdentityTerms> {
    if !kernel.is_exact_solution() {
        return Err(Error::Mismatch(
            "the identity residual needs an exact solution of the conjugate heat equation".into(),
        ));
    }
    identity_terms(kernel, phi, origin, r0, r1, tol)
}

/// Outcome of the comparison inequality for subsolution kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCheck {
    pub lhs: f64,
    /// `−∫ (n/r^{n+1}) ∫_{E_r} ψ_(r) (φ_t − Δφ)`.
    pub bound: f64,
    pub holds: bool,
}

/// `P(r1)/r1ⁿ − P(r0)/r0ⁿ ≤ −∫∫ (n/r^{n+1}) ψ_(r)(φ_t − Δφ)` for reduced-volume
/// densities and nonnegative `φ`.
pub fn comparison_inequality(
    kernel: &KernelField,
    phi: &TestFunction,
    origin: &SpaceTimeOrigin,
    r0: f64,
    r1: f64,
    tol: f64,
) -> Result<ComparisonCheck> {
    if kernel.kind() != KernelKind::ReducedVolumeDensity {
        return Err(Error::Mismatch(
            "the comparison inequality is checked for reduced-volume densities".into(),
        ));
    }
    let terms = identity_terms(kernel, phi, origin, r0, r1, tol)?;
    let slack = 1e3 * tol * terms.lhs.abs().max(1.0);
    Ok(ComparisonCheck {
        lhs: terms.lhs,
        bound: terms.source,
        holds: terms.lhs <= terms.source + slack,
    })
}

/// Invariant heat-sphere weight `Ψ ψ_d² / √(ψ_τ² + ψ_d²)` at a boundary point
/// where `Ψ = density`.
pub fn heat_sphere_weight(density: f64, v: &KernelValue) -> f64 {
    density * v.psi_d * v.psi_d / v.psi_tau.hypot(v.psi_d)
}

/// Explicit Euclidean boundary weight on `∂E_r` at distance `d` and backward
/// time `τ`.
pub fn fulks_weight(n: usize, r: f64, d: f64, tau: f64) -> f64 {
    let d2 = d * d;
    let a = d2 - 2.0 * n as f64 * tau;
    r.powi(-(n as i32)) * d2 / (4.0 * d2 * tau * tau + a * a).sqrt()
}

/// Surface mean of a caloric `φ` over the heat sphere `∂E_r` of a heat
/// kernel on a static manifold; equals `φ(y, s)`.
pub fn heat_sphere_mean(
    kernel: &KernelField,
    r: f64,
    phi: &TestFunction,
    origin: &SpaceTimeOrigin,
    tol: f64,
) -> Result<f64> {
    let model = *kernel.model();
    if model.is_ricci_flow() {
        return Err(Error::Mismatch(
            "heat-sphere means need a static model".into(),
        ));
    }
    if !kernel.is_fundamental_solution() {
        return Err(Error::Mismatch(
            "heat-sphere means need a heat kernel".into(),
        ));
    }
    phi.validate(&model, origin)?;
    if !phi.is_caloric(model.dim()) {
        return Err(Error::InvalidParameter(
            "heat-sphere means need a caloric test function".into(),
        ));
    }
    let hb = Heatball::build(kernel, r)?;
    let boundary_density = 1.0 / hb.volume_scale();
    let opts = QuadOptions::absolute(tol * phi.at_origin(origin).abs().max(1.0)).with_rel(tol);
    hb.time_integral(opts, |tau| {
        let slice = kernel.at_time(tau)?;
        let rho = hb.radius_on(&slice)?;
        if rho <= 0.0 {
            return Ok(0.0);
        }
        if rho >= slice.max_distance() {
            return Err(Error::OutOfDomain(format!(
                "heat sphere covers the whole slice at τ = {tau}"
            )));
        }
        let v = slice.eval(rho)?;
        if v.psi_d == 0.0 {
            return Ok(0.0);
        }
        let slope = v.psi_tau / v.psi_d;
        let stretch = (1.0 + slope * slope).sqrt();
        let weight = heat_sphere_weight(boundary_density, &v);
        Ok(phi.spherical_mean(origin, rho, origin.s - tau)
            * weight
            * stretch
            * model.area_unchecked(rho, tau))
    })
}

/// `e^{−f̄} ∫_{f<f̄} (Δf − tr h)` with `f = −log Ψ`.
pub fn entropy_level_integral(kernel: &KernelField, fbar: f64, tol: f64) -> Result<f64> {
    let model = *kernel.model();
    let admissible_model = model.is_compact() || model.kind() == ModelKind::GaussianSoliton;
    if !(kernel.is_fundamental_solution() && admissible_model) {
        return Err(Error::Mismatch(
            "the entropy level integral needs a heat kernel on a compact model or the Gaussian soliton"
                .into(),
        ));
    }
    let threshold = -kernel.eval(0.0, model.horizon())?.psi;
    if fbar >= threshold {
        return Err(Error::ThresholdExceeded {
            level: fbar,
            threshold,
        });
    }
    let r = (fbar / model.dim() as f64).exp();
    let hb = Heatball::build(kernel, r)?;
    let integral = hb.volume_integral(tol, tol * hb.volume_scale(), |slice, d, v| {
        let tau = slice.tau();
        Ok(-log_laplacian(&model, d, tau, v) - kernel.trace_h(tau))
    })?;
    Ok(integral * (-fbar).exp())
}

/// Local mean value with a transplanted space-form kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NiMeanValue {
    pub r: f64,
    /// `r^{-n} ∫_{Ẽ_r} |∇ log Ψ̃|² φ`.
    pub mean: f64,
    /// `φ(y, s)`.
    pub at_origin: f64,
    /// `φ(y, s) ≥ mean` up to a relative slack of `1e-6`.
    pub holds: bool,
}

/// Mean of `φ` against the transplant of the curvature-`k` space-form kernel.
pub fn ni_mean_value_ratio(
    model: &ModelSpacetime,
    k: i32,
    r: f64,
    phi: &TestFunction,
    origin: &SpaceTimeOrigin,
    tol: f64,
) -> Result<NiMeanValue> {
    let kernel = KernelField::transplant(k, model)?;
    if phi.heat_image(model.dim()) < 0.0 {
        return Err(Error::InvalidParameter(
            "the comparison needs a supersolution of the heat equation".into(),
        ));
    }
    let hb = Heatball::build(&kernel, r)?;
    let mean = hb.p_value(phi, origin, PForm::Defining, tol)? / hb.volume_scale();
    let at_origin = phi.at_origin(origin);
    Ok(NiMeanValue {
        r,
        mean,
        at_origin,
        holds: at_origin >= mean - 1e-6 * mean.abs().max(1.0),
    })
}
