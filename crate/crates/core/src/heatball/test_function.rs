use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpacetime;

/// The space-time point `(y, s)` a heatball is attached to. A point at
/// distance `d` from `y` and backward time `τ` sits at `t = s − τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeOrigin {
    pub y: Vec<f64>,
    pub s: f64,
}

impl SpaceTimeOrigin {
    pub fn new(y: Vec<f64>, s: f64) -> Self {
        Self { y, s }
    }

    /// The pole of a rotationally symmetric model at time `s`.
    pub fn pole(n: usize, s: f64) -> Self {
        Self { y: vec![0.0; n], s }
    }

    pub fn is_pole(&self) -> bool {
        self.y.iter().all(|v| *v == 0.0)
    }

    fn norm_sq(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum()
    }
}

/// Test functions with closed-form heat image and spherical means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TestFunction {
    Constant {
        c: f64,
    },
    /// `a·x + b` (flat models only).
    CoordinateLinear {
        a: Vec<f64>,
        b: f64,
    },
    /// `|x|² + 2nt` (flat models only).
    RadialCaloric,
    /// `a|x|² + b t + c`; `a` must vanish off flat models.
    RadialPolynomial {
        a: f64,
        b: f64,
        c: f64,
    },
}

impl TestFunction {
    pub fn one() -> Self {
        Self::Constant { c: 1.0 }
    }

    pub fn first_coordinate(n: usize) -> Self {
        let mut a = vec![0.0; n];
        a[0] = 1.0;
        Self::CoordinateLinear { a, b: 0.0 }
    }

    pub fn is_constant_one(&self) -> bool {
        matches!(self, Self::Constant { c } if *c == 1.0)
    }

    /// Checks that the function makes sense on the model and origin.
    pub fn validate(&self, model: &ModelSpacetime, origin: &SpaceTimeOrigin) -> Result<()> {
        let n = model.dim();
        if origin.y.len() != n {
            return Err(Error::InvalidParameter(format!(
                "origin has {} coordinates, model dimension is {n}",
                origin.y.len()
            )));
        }
        if !model.is_flat() && !origin.is_pole() {
            return Err(Error::InvalidParameter(
                "heatballs on curved models are centred at the pole".into(),
            ));
        }
        let needs_flat = match self {
            Self::Constant { .. } => false,
            Self::CoordinateLinear { a, .. } => {
                if a.len() != n {
                    return Err(Error::InvalidParameter(format!(
                        "coordinate-linear test function has {} coefficients, expected {n}",
                        a.len()
                    )));
                }
                true
            }
            Self::RadialCaloric => true,
            Self::RadialPolynomial { a, .. } => *a != 0.0,
        };
        if needs_flat && !model.is_flat() {
            return Err(Error::InvalidParameter(format!(
                "test function {self:?} needs a flat model"
            )));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        let n = x.len() as f64;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            Self::Constant { c } => *c,
            Self::CoordinateLinear { a, b } => a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + b,
            Self::RadialCaloric => r2 + 2.0 * n * t,
            Self::RadialPolynomial { a, b, c } => a * r2 + b * t + c,
        }
    }

    /// `(∂_t − Δ)φ`; constant in space and time for every family.
    pub fn heat_image(&self, n: usize) -> f64 {
        match self {
            Self::Constant { .. } | Self::CoordinateLinear { .. } | Self::RadialCaloric => 0.0,
            Self::RadialPolynomial { a, b, .. } => b - 2.0 * n as f64 * a,
        }
    }

    pub fn is_caloric(&self, n: usize) -> bool {
        self.heat_image(n) == 0.0
    }

    /// Mean of `φ(·, t)` over the geodesic sphere of radius `d` about `y`.
    pub fn spherical_mean(&self, origin: &SpaceTimeOrigin, d: f64, t: f64) -> f64 {
        let n = origin.y.len() as f64;
        match self {
            Self::Constant { c } => *c,
            Self::CoordinateLinear { a, b } => {
                a.iter().zip(&origin.y).map(|(a, y)| a * y).sum::<f64>() + b
            }
            Self::RadialCaloric => origin.norm_sq() + d * d + 2.0 * n * t,
            Self::RadialPolynomial { a, b, c } => a * (origin.norm_sq() + d * d) + b * t + c,
        }
    }

    /// `φ(y, s)`.
    pub fn at_origin(&self, origin: &SpaceTimeOrigin) -> f64 {
        self.value(&origin.y, origin.s)
    }

    /// An upper bound for `|φ|` over points within distance `d_max` of `y`
    /// at times in `[s − τ_max, s]`.
    pub fn sup_abs(&self, origin: &SpaceTimeOrigin, d_max: f64, tau_max: f64) -> f64 {
        let n = origin.y.len() as f64;
        let ny = origin.norm_sq().sqrt();
        let t_abs = origin.s.abs().max((origin.s - tau_max).abs());
        match self {
            Self::Constant { c } => c.abs(),
            Self::CoordinateLinear { a, b } => {
                let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let ay: f64 = a.iter().zip(&origin.y).map(|(a, y)| a * y).sum();
                ay.abs() + na * d_max + b.abs()
            }
            Self::RadialCaloric => (ny + d_max).powi(2) + 2.0 * n * t_abs,
            Self::RadialPolynomial { a, b, c } => {
                a.abs() * (ny + d_max).powi(2) + b.abs() * t_abs + c.abs()
            }
        }
    }
}
