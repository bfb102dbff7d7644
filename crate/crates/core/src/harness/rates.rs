use serde::{Deserialize, Serialize};

use crate::error::{insufficient, invalid, Result};

/// Least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(insufficient("slope fit needs at least two paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("slope fit needs distinct abscissae"));
    }
    Ok(sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSlopeFit {
    /// Slope of `log(cost)` against `log(eps)`.
    pub slope: f64,
    /// For `q = 2`: slope of `log(cost / log(1/eps)^2)` against `log(eps)`.
    pub log_corrected_slope: Option<f64>,
}

fn is_boundary(q: f64, at: f64) -> bool {
    (q - at).abs() < 1e-12
}

/// Fits the observed cost rate from `(epsilon, mean_cost)` pairs.
pub fn fit_cost_slope(points: &[(f64, f64)], q: f64) -> Result<CostSlopeFit> {
    if points.len() < 4 {
        return Err(insufficient(format!(
            "cost slope fit needs at least 4 grid points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|&(e, c)| !(e > 0.0 && e < 1.0 && c > 0.0))
    {
        return Err(invalid("cost fit needs 0 < epsilon < 1 and positive costs"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let slope = least_squares_slope(&xs, &ys)?;
    let log_corrected_slope = if is_boundary(q, 2.0) {
        let yc: Vec<f64> = points
            .iter()
            .map(|&(e, c)| (c / (1.0 / e).ln().powi(2)).ln())
            .collect();
        Some(least_squares_slope(&xs, &yc)?)
    } else {
        None
    };
    Ok(CostSlopeFit {
        slope,
        log_corrected_slope,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMethod {
    Mc,
    Mlmc,
    MlmcSr,
}

impl RateMethod {
    pub const ALL: [RateMethod; 3] = [RateMethod::Mc, RateMethod::Mlmc, RateMethod::MlmcSr];

    pub fn as_str(&self) -> &'static str {
        match self {
            RateMethod::Mc => "mc",
            RateMethod::Mlmc => "mlmc",
            RateMethod::MlmcSr => "mlmc-sr",
        }
    }
}

/// Asymptotic cost with unit constant. Standard MLMC uses the rate
/// `r = q`, selective refinement `r = q - 1`; at `r = 1` the cost carries a
/// `log(1/eps)^2` factor.
pub fn theoretical_cost(method: RateMethod, q: f64, epsilon: f64) -> Result<f64> {
    if !(q > 0.0) || !(epsilon > 0.0) {
        return Err(invalid("theoretical_cost needs q > 0 and epsilon > 0"));
    }
    let inv = 1.0 / epsilon;
    let mlmc = |r: f64| {
        if is_boundary(r, 1.0) {
            inv.powi(2) * inv.ln().powi(2)
        } else if r < 1.0 {
            inv.powi(2)
        } else {
            inv.powf(1.0 + r)
        }
    };
    Ok(match method {
        RateMethod::Mc => inv.powf(2.0 + q),
        RateMethod::Mlmc => mlmc(q),
        RateMethod::MlmcSr => mlmc(q - 1.0),
    })
}
