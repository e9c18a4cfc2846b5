use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A radial path sampled on a strictly increasing grid `s_0 < … < s_m`
/// (with `s = √τ`), positions `u_i ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePath {
    s: Vec<f64>,
    u: Vec<f64>,
}

impl DiscretePath {
    pub fn new(s: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if s.len() < 2 || s.len() != u.len() {
            return Err(Error::InvalidParameter(format!(
                "path needs matching grids of length ≥ 2 (got {} and {})",
                s.len(),
                u.len()
            )));
        }
        if s.windows(2).any(|w| !(w[0] < w[1])) || s.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "path grid must be finite and strictly increasing".into(),
            ));
        }
        if u.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "radial positions must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { s, u })
    }

    /// Straight-line path on a uniform grid of `segments` cells over `[0, s_end]`.
    pub fn straight(s_end: f64, u_start: f64, u_end: f64, segments: usize) -> Result<Self> {
        let m = segments.max(1);
        let s: Vec<f64> = (0..=m).map(|i| s_end * i as f64 / m as f64).collect();
        let u = (0..=m)
            .map(|i| {
                let t = i as f64 / m as f64;
                u_start + (u_end - u_start) * t
            })
            .collect();
        Self::new(s, u)
    }

    pub fn grid(&self) -> &[f64] {
        &self.s
    }

    pub fn positions(&self) -> &[f64] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn start(&self) -> (f64, f64) {
        (self.s[0], self.u[0])
    }

    pub fn end(&self) -> (f64, f64) {
        let n = self.s.len() - 1;
        (self.s[n], self.u[n])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    /// Sweeps stop once no node moves by more than `tol·(1 + max|u|)`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Relaxation factor; `None` picks the optimal SOR factor for the grid size.
    pub relaxation: Option<f64>,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_sweeps: 20_000,
            relaxation: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PathMinimization {
    pub path: DiscretePath,
    pub action: f64,
    pub sweeps: usize,
    /// Largest finite-difference action gradient over interior nodes, divided
    /// by the local cell width.
    pub max_gradient: f64,
}

/// Minimize `action` over interior node positions, holding both endpoints
/// fixed. Coordinate Newton steps with finite-difference derivatives,
/// over-relaxed; every accepted move lowers the action.
pub fn minimize_path_action<F>(
    action: F,
    init: &DiscretePath,
    opts: PathOptions,
) -> Result<PathMinimization>
where
    F: Fn(&DiscretePath) -> f64,
{
    let mut path = init.clone();
    let mut value = action(&path);
    if !value.is_finite() {
        return Err(Error::InvalidParameter(
            "action is not finite at the initial path".into(),
        ));
    }
    let m = path.len();
    let omega = opts
        .relaxation
        .unwrap_or_else(|| 2.0 / (1.0 + (std::f64::consts::PI / m as f64).sin()));

    let mut sweeps = 0;
    loop {
        if sweeps >= opts.max_sweeps {
            return Err(Error::IterationCap {
                what: "path action minimizer sweeps",
                iterations: opts.max_sweeps,
            });
        }
        sweeps += 1;
        let scale = 1.0 + path.u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut max_move = 0.0f64;
        for i in 1..m - 1 {
            let u0 = path.u[i];
            let h = 1e-5 * scale;
            path.u[i] = u0 + h;
            let fp = action(&path);
            let (g, c) = if u0 >= h {
                path.u[i] = u0 - h;
                let hm = u0 - path.u[i];
                let fm = action(&path);
                let span = h * hm * (h + hm);
                (
                    (fp * hm * hm - fm * h * h - value * (hm * hm - h * h)) / span,
                    2.0 * (hm * fp + h * fm - (h + hm) * value) / span,
                )
            } else {
                path.u[i] = u0 + 2.0 * h;
                let f2 = action(&path);
                (
                    (-3.0 * value + 4.0 * fp - f2) / (2.0 * h),
                    (value - 2.0 * fp + f2) / (h * h),
                )
            };
            let newton = if c.is_finite() && c > 0.0 {
                -g / c
            } else {
                -g.signum() * h
            };
            let mut accepted = false;
            for step in [omega * newton, newton, 0.5 * newton] {
                let trial = (u0 + step).max(0.0);
                path.u[i] = trial;
                let f = action(&path);
                if f.is_finite() && f <= value {
                    max_move = max_move.max((trial - u0).abs());
                    value = f;
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                path.u[i] = u0;
            }
        }
        if max_move <= opts.tol * scale {
            break;
        }
    }

    let max_gradient = stationarity(&action, &mut path, value);
    Ok(PathMinimization {
        path,
        action: value,
        sweeps,
        max_gradient,
    })
}

fn stationarity<F>(action: &F, path: &mut DiscretePath, value: f64) -> f64
where
    F: Fn(&DiscretePath) -> f64,
{
    let m = path.len();
    let mut worst = 0.0f64;
    for i in 1..m - 1 {
        let u0 = path.u[i];
        let h = 1e-6 * (1.0 + u0.abs());
        if u0 < h {
            continue;
        }
        path.u[i] = u0 + h;
        let fp = action(path);
        path.u[i] = u0 - h;
        let fm = action(path);
        path.u[i] = u0;
        let width = 0.5 * (path.s[i + 1] - path.s[i - 1]);
        let g = (fp - fm) / (2.0 * h) / width;
        if g.is_finite() {
            worst = worst.max(g.abs());
        }
    }
    let _ = value;
    worst
}
