use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub value: f64,
    pub error_estimate: f64,
}

/// Estimate `lim_{r→0} v(r)` for `v` smooth in `r²`.
///
/// Fits a polynomial of degree `order` in `x = r²` through the `order + 1`
/// samples with smallest `r` and evaluates it at zero (Neville's scheme). The
/// error estimate is the change from the degree `order − 1` fit through the
/// next sample set.
pub fn extrapolate_to_zero(samples: &[(f64, f64)], order: usize) -> Result<Extrapolation> {
    if samples.len() < order + 2 {
        return Err(Error::InvalidParameter(format!(
            "extrapolation of order {order} needs at least {} samples, got {}",
            order + 2,
            samples.len()
        )));
    }
    if samples
        .iter()
        .any(|(r, v)| !(r.is_finite() && *r > 0.0 && v.is_finite()))
    {
        return Err(Error::InvalidParameter(
            "extrapolation samples need positive finite r and finite values".into(),
        ));
    }
    let mut pts: Vec<(f64, f64)> = samples.iter().map(|&(r, v)| (r * r, v)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let spread = pts[pts.len() - 1].0;
    for w in pts.windows(2) {
        if (w[1].0 - w[0].0) <= 1e-12 * spread {
            return Err(Error::IllConditioned(format!(
                "extrapolation nodes r² = {:e} and {:e} are not distinct",
                w[0].0, w[1].0
            )));
        }
    }

    let value = neville_at_zero(&pts[..order + 1]);
    let lower = if order == 0 {
        pts[1].1
    } else {
        neville_at_zero(&pts[1..order + 1])
    };
    let shifted = neville_at_zero(&pts[1..order + 2]);
    let error_estimate = (value - lower).abs().max((value - shifted).abs());
    Ok(Extrapolation {
        value,
        error_estimate,
    })
}

fn neville_at_zero(pts: &[(f64, f64)]) -> f64 {
    let mut p: Vec<f64> = pts.iter().map(|v| v.1).collect();
    let n = p.len();
    for k in 1..n {
        for i in 0..n - k {
            let xi = pts[i].0;
            let xk = pts[i + k].0;
            p[i] = (xk * p[i] - xi * p[i + 1]) / (xk - xi);
        }
    }
    p[0]
}
