use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Power law `value ≈ prefactor · x^exponent` fitted in log-log space.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS of the log misfit.
    pub residual: f64,
    /// Half-width of the 95% confidence interval of the exponent; absent
    /// for two points.
    pub ci95: Option<f64>,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least two points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::Fit(format!("nonpositive or non-finite point {p:?}")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("abscissae must not all coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - icpt - slope * x).powi(2))
        .sum();
    let ci95 = if points.len() > 2 {
        let dof = n - 2.0;
        let se = (sse / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof)
            .map_err(|e| Error::Fit(e.to_string()))?
            .inverse_cdf(0.975);
        Some(t * se)
    } else {
        None
    };
    Ok(RateFit {
        exponent: slope,
        prefactor: icpt.exp(),
        residual: (sse / n).sqrt(),
        ci95,
    })
}
