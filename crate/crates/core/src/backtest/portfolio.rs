use super::EquityCurve;
use crate::error::{Error, Result};

/// Allocates `weights[i]` of the combined starting value to sleeve `i` at the
/// first date and never rebalances. Ledger entries are rescaled with their
/// sleeve and concatenated.
pub fn portfolio_aggregate(curves: &[EquityCurve], weights: &[f64]) -> Result<EquityCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::contract("portfolio_aggregate: no curves"))?;
    if curves.len() != weights.len() {
        return Err(Error::contract(format!(
            "portfolio_aggregate: {} curves but {} weights",
            curves.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::contract(
            "portfolio_aggregate: weights must be >= 0 and sum to 1",
        ));
    }
    if first.is_empty() {
        return Err(Error::contract("portfolio_aggregate: empty curve"));
    }
    for c in &curves[1..] {
        if c.dates != first.dates {
            return Err(Error::validation(
                "portfolio",
                "sleeve curves are on different date grids",
            ));
        }
    }

    let start: f64 = curves
        .iter()
        .zip(weights)
        .map(|(c, w)| w * c.gross[0])
        .sum();
    let scales: Vec<f64> = curves
        .iter()
        .zip(weights)
        .map(|(c, w)| w * start / c.gross[0])
        .collect();

    let n = first.len();
    let mut gross = vec![0.0; n];
    let mut net = vec![0.0; n];
    let mut ledger = Vec::new();
    for (c, &s) in curves.iter().zip(&scales) {
        if s == 0.0 {
            continue;
        }
        for t in 0..n {
            gross[t] += s * c.gross[t];
            net[t] += s * c.net[t];
        }
        ledger.extend(c.ledger.iter().map(|e| e.scaled(s)));
    }
    Ok(EquityCurve {
        dates: first.dates.clone(),
        gross,
        net,
        ledger,
        bankrupt_on: None,
    })
}
