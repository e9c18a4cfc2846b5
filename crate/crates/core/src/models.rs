//! Rotationally symmetric model spacetimes with closed-form curvature and
//! volume data.
//!
//! Times are backward times `τ ≥ 0`. Every model is Einstein at each time, so
//! Ricci curvature is a single eigenvalue `λ(τ)` with `Rc = λ g` and
//! `R = n λ`. Distances `d` are measured in `g(τ)` from the pole.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind {
    EuclideanStatic,
    SphereStatic { radius: f64 },
    Hyperbolic3Static,
    ShrinkingSphere { offset: f64 },
    GaussianSoliton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpacetime {
    kind: ModelKind,
    dim: usize,
    horizon: f64,
}

/// Area of the unit sphere `S^{n-1}` in `R^n` (two points when `n = 1`).
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        // |S^{n-1}| = 2π/(n−2) · |S^{n-3}|
        _ => unit_sphere_area(n - 2) * 2.0 * PI / (n as f64 - 2.0),
    }
}

/// Volume of the unit round sphere `S^n`.
pub fn unit_sphere_volume(n: usize) -> f64 {
    unit_sphere_area(n + 1)
}

impl ModelSpacetime {
    pub fn euclidean(dim: usize, horizon: f64) -> Result<Self> {
        Self::new(ModelKind::EuclideanStatic, dim, horizon)
    }

    pub fn gaussian_soliton(dim: usize, horizon: f64) -> Result<Self> {
        Self::new(ModelKind::GaussianSoliton, dim, horizon)
    }

    pub fn sphere(dim: usize, radius: f64, horizon: f64) -> Result<Self> {
        Self::new(ModelKind::SphereStatic { radius }, dim, horizon)
    }

    pub fn hyperbolic3(horizon: f64) -> Result<Self> {
        Self::new(ModelKind::Hyperbolic3Static, 3, horizon)
    }

    pub fn shrinking_sphere(dim: usize, offset: f64, horizon: f64) -> Result<Self> {
        Self::new(ModelKind::ShrinkingSphere { offset }, dim, horizon)
    }

    pub fn new(kind: ModelKind, dim: usize, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        let dims_ok = match kind {
            ModelKind::EuclideanStatic | ModelKind::GaussianSoliton => (1..=3).contains(&dim),
            ModelKind::SphereStatic { radius } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "sphere radius must be positive, got {radius}"
                    )));
                }
                (2..=3).contains(&dim)
            }
            ModelKind::ShrinkingSphere { offset } => {
                if !(offset.is_finite() && offset >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "shrinking-sphere offset must be ≥ 0, got {offset}"
                    )));
                }
                (2..=3).contains(&dim)
            }
            ModelKind::Hyperbolic3Static => dim == 3,
        };
        if !dims_ok {
            return Err(Error::InvalidParameter(format!(
                "dimension {dim} is not supported for {kind:?}"
            )));
        }
        Ok(Self { kind, dim, horizon })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn with_horizon(self, horizon: f64) -> Result<Self> {
        Self::new(self.kind, self.dim, horizon)
    }

    /// True when the metric evolves by backward Ricci flow (`h = −Rc`).
    pub fn is_ricci_flow(&self) -> bool {
        matches!(
            self.kind,
            ModelKind::ShrinkingSphere { .. } | ModelKind::GaussianSoliton
        )
    }

    /// Models on which reduced geometry is defined: Ricci flows plus the
    /// static flat model, which is a trivial Ricci flow.
    pub fn supports_reduced_geometry(&self) -> bool {
        self.is_ricci_flow() || self.kind == ModelKind::EuclideanStatic
    }

    pub fn is_flat(&self) -> bool {
        matches!(
            self.kind,
            ModelKind::EuclideanStatic | ModelKind::GaussianSoliton
        )
    }

    pub fn is_compact(&self) -> bool {
        matches!(
            self.kind,
            ModelKind::SphereStatic { .. } | ModelKind::ShrinkingSphere { .. }
        )
    }

    /// Radius of the round sphere at time `τ`, if the model is a sphere.
    pub fn sphere_radius(&self, tau: f64) -> Option<f64> {
        match self.kind {
            ModelKind::SphereStatic { radius } => Some(radius),
            ModelKind::ShrinkingSphere { offset } => {
                Some((2.0 * (self.dim as f64 - 1.0) * (tau + offset)).sqrt())
            }
            _ => None,
        }
    }

    /// Largest distance from the pole at time `τ` (the antipode on spheres).
    pub fn max_distance(&self, tau: f64) -> f64 {
        self.sphere_radius(tau)
            .map_or(f64::INFINITY, |radius| PI * radius)
    }

    /// Ricci eigenvalue `λ(τ)` with `Rc = λ g`.
    pub fn ricci_eigenvalue(&self, tau: f64) -> f64 {
        match self.kind {
            ModelKind::EuclideanStatic | ModelKind::GaussianSoliton => 0.0,
            ModelKind::SphereStatic { radius } => (self.dim as f64 - 1.0) / (radius * radius),
            ModelKind::Hyperbolic3Static => -2.0,
            ModelKind::ShrinkingSphere { offset } => 1.0 / (2.0 * (tau + offset)),
        }
    }

    pub fn scalar_curvature(&self, tau: f64) -> f64 {
        self.dim as f64 * self.ricci_eigenvalue(tau)
    }

    /// `tr_g h`: `−R` for Ricci flows, zero for static metrics.
    pub fn trace_h(&self, tau: f64) -> f64 {
        if self.is_ricci_flow() {
            -self.scalar_curvature(tau)
        } else {
            0.0
        }
    }

    /// Extreme Ricci eigenvalues over a time interval.
    pub fn ricci_range(&self, iv: Interval) -> (f64, f64) {
        let a = self.ricci_eigenvalue(iv.lo);
        let b = self.ricci_eigenvalue(iv.hi);
        (a.min(b), a.max(b))
    }

    /// `(k, K)` with `−k g ≤ Rc ≤ K g` on the interval, both nonnegative.
    pub fn ricci_bounds(&self, iv: Interval) -> (f64, f64) {
        let (lo, hi) = self.ricci_range(iv);
        ((-lo).max(0.0), hi.max(0.0))
    }

    /// `g(τ) = scale(τ)² · g_ref`.
    pub fn metric_scale(&self, tau: f64) -> f64 {
        match self.kind {
            ModelKind::ShrinkingSphere { offset } => ((tau + offset) / (1.0 + offset)).sqrt(),
            _ => 1.0,
        }
    }

    /// Converts a `g(τ)` distance from the pole to the `g(0)` distance of the
    /// same point.
    pub fn distance_at_origin_time(&self, d: f64, tau: f64) -> f64 {
        match self.kind {
            ModelKind::ShrinkingSphere { offset } => d * (offset / (tau + offset)).sqrt(),
            _ => d,
        }
    }

    /// `d/dτ` of the `g(τ)` distance of a fixed point, divided by that distance.
    pub fn distance_growth_rate(&self, tau: f64) -> f64 {
        match self.kind {
            ModelKind::ShrinkingSphere { offset } => 0.5 / (tau + offset),
            _ => 0.0,
        }
    }

    pub fn check_point(&self, d: f64, tau: f64) -> Result<()> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::NonPositiveTime(tau));
        }
        if !d.is_finite() || d < 0.0 || d > self.max_distance(tau) * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain(format!(
                "distance {d} is outside [0, {}] at τ = {tau}",
                self.max_distance(tau)
            )));
        }
        Ok(())
    }

    /// Area of the geodesic sphere of radius `d` in `g(τ)`.
    pub fn sphere_area(&self, d: f64, tau: f64) -> Result<f64> {
        if d < 0.0 || d > self.max_distance(tau) * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain(format!(
                "distance {d} is outside [0, {}]",
                self.max_distance(tau)
            )));
        }
        Ok(self.area_unchecked(d, tau))
    }

    pub(crate) fn area_unchecked(&self, d: f64, tau: f64) -> f64 {
        let n = self.dim;
        let w = unit_sphere_area(n);
        let warp = match self.kind {
            ModelKind::EuclideanStatic | ModelKind::GaussianSoliton => d,
            ModelKind::Hyperbolic3Static => d.sinh(),
            ModelKind::SphereStatic { .. } | ModelKind::ShrinkingSphere { .. } => {
                let radius = self.sphere_radius(tau).unwrap_or(1.0);
                (radius * (d / radius).sin()).max(0.0)
            }
        };
        w * warp.powi(n as i32 - 1)
    }

    /// `∂_d log(sphere_area)`: the mean curvature of geodesic spheres.
    pub fn log_area_derivative(&self, d: f64, tau: f64) -> f64 {
        let m = self.dim as f64 - 1.0;
        match self.kind {
            ModelKind::EuclideanStatic | ModelKind::GaussianSoliton => m / d,
            ModelKind::Hyperbolic3Static => m / d.tanh(),
            ModelKind::SphereStatic { .. } | ModelKind::ShrinkingSphere { .. } => {
                let radius = self.sphere_radius(tau).unwrap_or(1.0);
                m / (radius * (d / radius).tan())
            }
        }
    }

    /// Total volume of a compact time slice.
    pub fn total_volume(&self, tau: f64) -> Option<f64> {
        self.sphere_radius(tau)
            .map(|radius| unit_sphere_volume(self.dim) * radius.powi(self.dim as i32))
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match self.kind {
            ModelKind::EuclideanStatic => format!("euclidean(n={})", self.dim),
            ModelKind::GaussianSoliton => format!("gaussian-soliton(n={})", self.dim),
            ModelKind::SphereStatic { radius } => {
                format!("sphere(n={}, radius={radius})", self.dim)
            }
            ModelKind::Hyperbolic3Static => "hyperbolic3".to_string(),
            ModelKind::ShrinkingSphere { offset } => {
                format!("shrinking-sphere(n={}, offset={offset})", self.dim)
            }
        }
    }
}
