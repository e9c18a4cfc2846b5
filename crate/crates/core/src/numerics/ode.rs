use super::Interval;
use crate::error::{Error, Result};

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_steps: 200_000,
            initial_step: None,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
struct Step {
    start: f64,
    width: f64,
    // Continuous-extension coefficients, five blocks of `dim` values.
    coeffs: Vec<f64>,
}

/// Accepted steps of an integration with 4th-order dense output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    span: Interval,
    steps: Vec<Step>,
    final_state: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn span(&self) -> Interval {
        self.span
    }

    pub fn final_state(&self) -> &[f64] {
        &self.final_state
    }

    /// Step boundaries (including both ends of the span).
    pub fn nodes(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.steps.iter().map(|s| s.start).collect();
        out.push(self.span.hi);
        out
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// State at `s`; `s` is clamped to the span.
    pub fn eval(&self, s: f64) -> Vec<f64> {
        let s = s.clamp(self.span.lo, self.span.hi);
        if s == self.span.hi {
            return self.final_state.clone();
        }
        let idx = match self.steps.binary_search_by(|st| st.start.total_cmp(&s)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let st = &self.steps[idx];
        let theta = (s - st.start) / st.width;
        let theta1 = 1.0 - theta;
        let n = self.dim;
        let c = &st.coeffs;
        (0..n)
            .map(|i| {
                c[i] + theta
                    * (c[n + i]
                        + theta1 * (c[2 * n + i] + theta * (c[3 * n + i] + theta1 * c[4 * n + i])))
            })
            .collect()
    }
}

/// Integrate `y' = field(s, y)` over `span` with an adaptive Dormand–Prince
/// 5(4) scheme. `field(s, y, dy)` writes the derivative into `dy`.
pub fn integrate_ode<F>(
    mut field: F,
    init: &[f64],
    span: Interval,
    opts: OdeOptions,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = init.len();
    let mut y = init.to_vec();
    let mut s = span.lo;
    let end = span.hi;
    let mut steps = Vec::new();

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y1 = vec![0.0; n];

    field(s, &y, &mut k1);
    let mut h = opts
        .initial_step
        .unwrap_or_else(|| initial_step(&y, &k1, span.width(), opts));
    h = h.min(span.width());

    for _ in 0..opts.max_steps {
        if s >= end {
            break;
        }
        let last = s + h >= end;
        if last {
            h = end - s;
        }
        if h <= 16.0 * f64::EPSILON * s.abs().max(span.width()) {
            return Err(Error::StepUnderflow { at: s, step: h });
        }

        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        field(s + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        field(s + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        field(s + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        field(s + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let s_new = if last { end } else { s + h };
        field(s_new, &tmp, &mut k6);
        for i in 0..n {
            y1[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        field(s_new, &y1, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
        }
        let err = if n == 0 { 0.0 } else { (err / n as f64).sqrt() };
        if !err.is_finite() {
            h *= 0.2;
            continue;
        }

        if err <= 1.0 {
            let mut coeffs = vec![0.0; 5 * n];
            for i in 0..n {
                let diff = y1[i] - y[i];
                let bspl = h * k1[i] - diff;
                coeffs[i] = y[i];
                coeffs[n + i] = diff;
                coeffs[2 * n + i] = bspl;
                coeffs[3 * n + i] = diff - h * k7[i] - bspl;
                coeffs[4 * n + i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            steps.push(Step {
                start: s,
                width: h,
                coeffs,
            });
            s = s_new;
            y.copy_from_slice(&y1);
            k1.copy_from_slice(&k7);
            if last {
                return Ok(Trajectory {
                    dim: n,
                    span,
                    steps,
                    final_state: y,
                });
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                0.9 * err.powf(-0.2)
            };
            h *= fac.clamp(0.2, 5.0);
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    Err(Error::IterationCap {
        what: "ode integrator steps",
        iterations: opts.max_steps,
    })
}

fn initial_step(y: &[f64], dy: &[f64], width: f64, opts: OdeOptions) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for (yi, di) in y.iter().zip(dy) {
        let sc = opts.abs_tol + opts.rel_tol * yi.abs();
        d0 = d0.max(yi.abs() / sc);
        d1 = d1.max(di.abs() / sc);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * width
    } else {
        0.01 * d0 / d1
    };
    h.clamp(1e-10 * width, 0.1 * width)
}
