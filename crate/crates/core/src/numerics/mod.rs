//! Numerical kernel shared by every other module: adaptive quadrature,
//! bracketed root finding, ODE integration with dense output, discrete
//! path-action minimization and extrapolation to zero.
//!
//! Everything here is pure and deterministic. Partial sums are combined with
//! a fixed pairwise tree so results do not depend on evaluation order.

mod extrapolate;
mod ode;
mod path;
mod quadrature;
mod roots;

pub use extrapolate::{extrapolate_to_zero, Extrapolation};
pub use ode::{integrate_ode, OdeOptions, Trajectory};
pub use path::{minimize_path_action, DiscretePath, PathMinimization, PathOptions};
pub use quadrature::{
    gauss_legendre, integrate_adaptive, try_integrate, try_integrate_with, QuadOptions, QuadResult,
};
pub use roots::{find_root, try_find_root};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed, finite interval with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Pairwise (tree) summation with a fixed association order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Default absolute tolerance for scenario quadratures.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
/// Default bracket-width tolerance for root finding.
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
