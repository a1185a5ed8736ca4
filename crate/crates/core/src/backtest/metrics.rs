use serde::{Deserialize, Serialize};

use super::EquityCurve;
use crate::error::{Error, Result};
use crate::sharpestats::SharpeConvention;

/// Cumulative return, Sharpe and maximum drawdown of one value path.
/// `sharpe` is `None` when return variance is zero or there are fewer than
/// two returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub cumulative_return: f64,
    pub sharpe: Option<f64>,
    pub max_drawdown: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveMetrics {
    pub gross: MetricTriple,
    pub net: MetricTriple,
}

pub fn returns(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

pub fn max_drawdown(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &v in values {
        peak = peak.max(v);
        if peak > 0.0 {
            worst = worst.max((peak - v) / peak);
        }
    }
    worst.clamp(0.0, 1.0)
}

/// Mean over sample standard deviation of simple returns, risk-free rate
/// zero, scaled by sqrt(252) under the annualized convention.
pub fn metrics(values: &[f64], convention: SharpeConvention) -> Result<MetricTriple> {
    if values.len() < 2 {
        return Err(Error::contract(format!(
            "metrics need at least 2 values, got {}",
            values.len()
        )));
    }
    let rets = returns(values);
    let sharpe = if rets.len() < 2 {
        None
    } else {
        let n = rets.len() as f64;
        let mean = rets.iter().sum::<f64>() / n;
        let var = rets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        (sd > 0.0 && sd.is_finite()).then(|| mean / sd * convention.annualization())
    };
    Ok(MetricTriple {
        cumulative_return: values[values.len() - 1] / values[0] - 1.0,
        sharpe,
        max_drawdown: max_drawdown(values),
    })
}

/// Both cumulative returns are measured from the first gross mark, the
/// starting capital, so costs booked on the first day still count against
/// the net figure.
pub fn curve_metrics(curve: &EquityCurve, convention: SharpeConvention) -> Result<CurveMetrics> {
    let gross = metrics(&curve.gross, convention)?;
    let mut net = metrics(&curve.net, convention)?;
    net.cumulative_return = curve.net[curve.net.len() - 1] / curve.gross[0] - 1.0;
    Ok(CurveMetrics { gross, net })
}
