//! Reduced geometry on the Ricci-flow models: the L-action in `s = √τ`,
//! radial L-geodesics by shooting, the reduced distance `ℓ = L/(2√τ)`, the
//! reduced-volume density and the reduced volume.
//!
//! Radial paths are stored in the reference coordinate `u`, the distance from
//! the pole in the metric `g_ref` with `g(τ) = metric_scale(τ)² g_ref`. On flat
//! models `u` is the ordinary distance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelSpacetime};
use crate::numerics::{
    find_root, integrate_adaptive, integrate_ode, minimize_path_action, DiscretePath, Interval,
    OdeOptions, PathMinimization, PathOptions,
};

/// Number of cells used when a solved geodesic is sampled into a path.
pub const PATH_SEGMENTS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Short,
    /// Through the antipode (sphere models only).
    Long,
}

/// A solved radial L-geodesic.
#[derive(Debug, Clone)]
pub struct LGeodesicPath {
    pub path: DiscretePath,
    pub d: f64,
    pub tau: f64,
    pub action: f64,
    pub reduced_distance: f64,
    /// `lim_{σ→0} √σ |dγ/dσ|`.
    pub initial_speed: f64,
    pub branch: Branch,
    /// `(σ, √σ |dγ/dσ|)` at every path node with `σ > 0`.
    pub speed_profile: Vec<(f64, f64)>,
}

fn require_reduced(m: &ModelSpacetime) -> Result<()> {
    if m.supports_reduced_geometry() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "reduced geometry needs a Ricci-flow model, got {}",
            m.label()
        )))
    }
}

fn check_time(m: &ModelSpacetime, tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::NonPositiveTime(tau));
    }
    if tau > m.horizon() * (1.0 + 1e-12) {
        return Err(Error::OutOfDomain(format!(
            "τ = {tau} exceeds the horizon {}",
            m.horizon()
        )));
    }
    Ok(())
}

fn vertex_offset(m: &ModelSpacetime) -> Option<f64> {
    match m.kind() {
        ModelKind::ShrinkingSphere { offset } => Some(offset),
        _ => None,
    }
}

/// `∫_{s0}^{s1} metric_scale(s²)² ds`.
fn scale_sq_integral(m: &ModelSpacetime, s0: f64, s1: f64) -> f64 {
    match vertex_offset(m) {
        Some(t0) => ((s1.powi(3) - s0.powi(3)) / 3.0 + t0 * (s1 - s0)) / (1.0 + t0),
        None => s1 - s0,
    }
}

/// `∫_{s0}^{s1} 2 s² R(s²) ds`.
fn curvature_integral(m: &ModelSpacetime, s0: f64, s1: f64) -> f64 {
    let n = m.dim() as f64;
    match vertex_offset(m) {
        Some(t0) if t0 > 0.0 => {
            let q = t0.sqrt();
            n * ((s1 - s0) - q * ((s1 / q).atan() - (s0 / q).atan()))
        }
        Some(_) => n * (s1 - s0),
        None => 0.0,
    }
}

/// Reference-coordinate distance of the antipode, if the model is a sphere.
fn reference_antipode(m: &ModelSpacetime) -> Option<f64> {
    m.sphere_radius(1.0).map(|r| PI * r)
}

/// The L-action `∫ (½|γ'|² + 2 s² R) ds` of a piecewise-linear radial path in
/// the reference coordinate, integrated exactly cell by cell.
pub fn l_action(m: &ModelSpacetime, path: &DiscretePath) -> Result<f64> {
    require_reduced(m)?;
    let (s0, u0) = path.start();
    if s0 != 0.0 || u0 != 0.0 {
        return Err(Error::InvalidParameter(
            "an L-path must start at the basepoint at s = 0".into(),
        ));
    }
    let (s_end, _) = path.end();
    check_time(m, s_end * s_end)?;
    if let Some(limit) = reference_antipode(m) {
        if path.positions().iter().any(|&u| u > 2.0 * limit) {
            return Err(Error::OutOfDomain(
                "path winds past the antipode twice".into(),
            ));
        }
    }
    Ok(path_action_unchecked(m, path))
}

fn path_action_unchecked(m: &ModelSpacetime, path: &DiscretePath) -> f64 {
    let s = path.grid();
    let u = path.positions();
    let mut cells = Vec::with_capacity(s.len() - 1);
    for i in 0..s.len() - 1 {
        let ds = s[i + 1] - s[i];
        let slope = (u[i + 1] - u[i]) / ds;
        cells.push(
            0.5 * slope * slope * scale_sq_integral(m, s[i], s[i + 1])
                + curvature_integral(m, s[i], s[i + 1]),
        );
    }
    crate::numerics::pairwise_sum(&cells)
}

struct Shot {
    end_position: f64,
    kinetic: f64,
    potential: f64,
    trajectory: crate::numerics::Trajectory,
}

// Radial Euler–Lagrange equation in s: (scale² u')' = 0, i.e.
// u'' = −4 s λ(s²) u', carried together with the two action integrals.
fn shoot(m: &ModelSpacetime, speed: f64, s_end: f64, tol: f64) -> Result<Shot> {
    let mm = *m;
    let n = m.dim() as f64;
    let field = move |s: f64, y: &[f64], dy: &mut [f64]| {
        let tau = s * s;
        let lambda = mm.ricci_eigenvalue(tau);
        let scale = mm.metric_scale(tau);
        dy[0] = y[1];
        dy[1] = -4.0 * s * lambda * y[1];
        dy[2] = 0.5 * scale * scale * y[1] * y[1];
        dy[3] = 2.0 * tau * n * lambda;
    };
    let trajectory = integrate_ode(
        field,
        &[0.0, speed, 0.0, 0.0],
        Interval::new(0.0, s_end)?,
        OdeOptions::with_tol(tol),
    )?;
    let end = trajectory.final_state();
    Ok(Shot {
        end_position: end[0],
        kinetic: end[2],
        potential: end[3],
        trajectory,
    })
}

fn check_smooth_origin(m: &ModelSpacetime) -> Result<()> {
    if vertex_offset(m) == Some(0.0) {
        return Err(Error::OutOfDomain(
            "geodesics from the singular vertex exist only as limits; the reduced distance \
             there is the closed form n/2"
                .into(),
        ));
    }
    Ok(())
}

/// Solve for the minimizing radial L-geodesic from the basepoint at `τ = 0`
/// to the point at `g(τ)`-distance `d`.
pub fn solve_l_geodesic(m: &ModelSpacetime, d: f64, tau: f64, tol: f64) -> Result<LGeodesicPath> {
    require_reduced(m)?;
    check_time(m, tau)?;
    m.check_point(d, tau)?;
    let s_end = tau.sqrt();
    let scale_end = m.metric_scale(tau);
    let target = d / scale_end;

    if vertex_offset(m) == Some(0.0) {
        if d > 0.0 {
            check_smooth_origin(m)?;
        }
        // Constant path at the pole.
        let path = DiscretePath::straight(s_end, 0.0, 0.0, PATH_SEGMENTS)?;
        let action = curvature_integral(m, 0.0, s_end);
        let speed_profile = path.grid()[1..].iter().map(|s| (s * s, 0.0)).collect();
        return Ok(LGeodesicPath {
            path,
            d,
            tau,
            action,
            reduced_distance: action / (2.0 * s_end),
            initial_speed: 0.0,
            branch: Branch::Short,
            speed_profile,
        });
    }

    let ode_tol = tol.min(1e-10);
    let short = shoot_to(m, target, s_end, ode_tol)?;
    let mut best = (short, Branch::Short);
    if let Some(antipode) = reference_antipode(m) {
        let long_target = 2.0 * antipode - target;
        if long_target > target {
            let long = shoot_to(m, long_target, s_end, ode_tol)?;
            if long.0 < best.0 .0 {
                best = (long, Branch::Long);
            }
        }
    }
    let ((action, speed, shot), branch) = best;

    let segments = PATH_SEGMENTS;
    let grid: Vec<f64> = (0..=segments)
        .map(|i| s_end * i as f64 / segments as f64)
        .collect();
    let mut positions = Vec::with_capacity(grid.len());
    let mut speed_profile = Vec::with_capacity(segments);
    for &s in &grid {
        let st = shot.trajectory.eval(s);
        positions.push(st[0].max(0.0));
        if s > 0.0 {
            let sigma = s * s;
            speed_profile.push((sigma, 0.5 * m.metric_scale(sigma) * st[1].abs()));
        }
    }
    if let Some(p) = positions.last_mut() {
        *p = match branch {
            Branch::Short => target,
            Branch::Long => shot.end_position,
        };
    }
    let path = DiscretePath::new(grid, positions)?;
    Ok(LGeodesicPath {
        path,
        d,
        tau,
        action,
        reduced_distance: action / (2.0 * s_end),
        initial_speed: 0.5 * m.metric_scale(0.0) * speed,
        branch,
        speed_profile,
    })
}

// Brent's method on the initial speed. Returns (action, speed, shot).
fn shoot_to(m: &ModelSpacetime, target: f64, s_end: f64, tol: f64) -> Result<(f64, f64, Shot)> {
    if target == 0.0 {
        let shot = shoot(m, 0.0, s_end, tol)?;
        return Ok((shot.kinetic + shot.potential, 0.0, shot));
    }
    // The equation is linear in the shot speed; a unit shot fixes the bracket.
    let unit = shoot(m, 1.0, s_end, tol)?;
    if !(unit.end_position > 0.0) {
        return Err(Error::ShootingRange {
            target,
            reachable: unit.end_position,
        });
    }
    let guess = target / unit.end_position;
    let mut hi = 2.0 * guess;
    let mut f_hi = shoot(m, hi, s_end, tol)?.end_position - target;
    let mut expansions = 0;
    while f_hi < 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::ShootingRange {
                target,
                reachable: f_hi + target,
            });
        }
        f_hi = shoot(m, hi, s_end, tol)?.end_position - target;
    }
    let mut failure = None;
    let speed = find_root(
        |v| match shoot(m, v, s_end, tol) {
            Ok(s) => s.end_position - target,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        },
        Interval::new(0.0, hi)?,
        1e-15 * hi,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let speed = speed?;
    let shot = shoot(m, speed, s_end, tol)?;
    // Evaluate the action at the exact endpoint: the shot misses it by at most
    // the root tolerance, and kinetic energy scales with the speed squared.
    let ratio = target / shot.end_position;
    let action = shot.kinetic * ratio * ratio + shot.potential;
    Ok((action, speed, shot))
}

/// `ℓ` and its derivatives at one point. `ell_tau` is taken at a fixed point
/// of the manifold (fixed reference coordinate), not at fixed `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedDistanceValue {
    pub ell: f64,
    pub ell_d: f64,
    pub ell_dd: f64,
    pub ell_tau: f64,
}

/// Reduced distance on one time slice.
///
/// Along radial geodesics the Euler–Lagrange equation is linear in the shot
/// speed, so one unit shot determines `ℓ(·, τ)` exactly: with `u1` the reached
/// reference distance and `K1` the kinetic action of the unit shot,
/// `L(u) = K1 (u/u1)² + L_R(τ)`.
#[derive(Debug, Clone, Copy)]
pub struct ReducedSlice {
    model: ModelSpacetime,
    tau: f64,
    form: SliceForm,
}

#[derive(Debug, Clone, Copy)]
enum SliceForm {
    Flat,
    Vertex,
    Shot {
        // L = quad · u² + potential, with u the reference coordinate.
        quad: f64,
        quad_tau: f64,
        potential: f64,
        potential_tau: f64,
    },
}

impl ReducedSlice {
    pub fn new(m: &ModelSpacetime, tau: f64) -> Result<Self> {
        require_reduced(m)?;
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::NonPositiveTime(tau));
        }
        let form = match m.kind() {
            ModelKind::EuclideanStatic | ModelKind::GaussianSoliton => SliceForm::Flat,
            ModelKind::ShrinkingSphere { offset } if offset == 0.0 => SliceForm::Vertex,
            _ => {
                let s_end = tau.sqrt();
                let unit = shoot(m, 1.0, s_end, 1e-13)?;
                let quad = unit.kinetic / (unit.end_position * unit.end_position);
                // quad = 1/(2 J) with J = ∫ ds / scale(s²)²; dJ/dτ = 1/(2√τ scale(τ)²).
                let scale = m.metric_scale(tau);
                let dj = 1.0 / (2.0 * s_end * scale * scale);
                let quad_tau = -2.0 * quad * quad * dj;
                SliceForm::Shot {
                    quad,
                    quad_tau,
                    potential: unit.potential,
                    potential_tau: s_end * m.scalar_curvature(tau),
                }
            }
        };
        Ok(Self {
            model: *m,
            tau,
            form,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn eval(&self, d: f64) -> ReducedDistanceValue {
        let tau = self.tau;
        match self.form {
            SliceForm::Flat => ReducedDistanceValue {
                ell: d * d / (4.0 * tau),
                ell_d: d / (2.0 * tau),
                ell_dd: 1.0 / (2.0 * tau),
                ell_tau: -d * d / (4.0 * tau * tau),
            },
            SliceForm::Vertex => ReducedDistanceValue {
                ell: 0.5 * self.model.dim() as f64,
                ell_d: 0.0,
                ell_dd: 0.0,
                ell_tau: 0.0,
            },
            SliceForm::Shot {
                quad,
                quad_tau,
                potential,
                potential_tau,
            } => {
                let scale = self.model.metric_scale(tau);
                let u = d / scale;
                let big_l = quad * u * u + potential;
                let sq = tau.sqrt();
                let ell = big_l / (2.0 * sq);
                let l_tau = quad_tau * u * u + potential_tau;
                ReducedDistanceValue {
                    ell,
                    ell_d: quad * u / (sq * scale),
                    ell_dd: quad / (sq * scale * scale),
                    ell_tau: l_tau / (2.0 * sq) - ell / (2.0 * tau),
                }
            }
        }
    }
}

/// Reduced distance `ℓ(d, τ)` from the basepoint at `τ = 0`.
pub fn reduced_distance(m: &ModelSpacetime, d: f64, tau: f64) -> Result<f64> {
    check_time(m, tau)?;
    m.check_point(d, tau)?;
    Ok(ReducedSlice::new(m, tau)?.eval(d).ell)
}

/// `log v = −(n/2) log(4πτ) − ℓ`.
pub fn log_reduced_volume_density(m: &ModelSpacetime, d: f64, tau: f64) -> Result<f64> {
    let ell = reduced_distance(m, d, tau)?;
    Ok(-0.5 * m.dim() as f64 * (4.0 * PI * tau).ln() - ell)
}

/// Reduced volume `Ṽ(τ) = ∫ v dμ_{g(τ)}`.
pub fn reduced_volume(m: &ModelSpacetime, tau: f64, tol: f64) -> Result<f64> {
    check_time(m, tau)?;
    let slice = ReducedSlice::new(m, tau)?;
    let n = m.dim() as f64;
    let norm = (4.0 * PI * tau).powf(-0.5 * n);
    let outer = match m.sphere_radius(tau) {
        Some(r) => PI * r,
        // Gaussian tail beyond 40 standard widths is below 1e-300.
        None => 40.0 * tau.sqrt(),
    };
    let res = integrate_adaptive(
        |d| norm * (-slice.eval(d).ell).exp() * m.area_unchecked(d, tau),
        Interval::new(0.0, outer)?,
        tol,
    )?;
    Ok(res.value)
}

/// Brute-force oracle: minimize the discretized action over radial paths to
/// the point `(d, τ)` starting from the straight path.
pub fn minimize_l_action(
    m: &ModelSpacetime,
    d: f64,
    tau: f64,
    segments: usize,
    tol: f64,
) -> Result<PathMinimization> {
    require_reduced(m)?;
    check_time(m, tau)?;
    m.check_point(d, tau)?;
    let target = d / m.metric_scale(tau);
    let init = DiscretePath::straight(tau.sqrt(), 0.0, target, segments)?;
    minimize_path_action(
        |p| path_action_unchecked(m, p),
        &init,
        PathOptions {
            tol,
            ..PathOptions::default()
        },
    )
}
