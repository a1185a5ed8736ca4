//! Replays a decision log against daily prices and produces gross and net
//! equity curves whose difference is exactly the cumulative friction ledger.

mod engine;
mod metrics;
mod portfolio;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::friction::FrictionLedgerEntry;

pub use engine::{
    buy_and_hold, run_backtest, run_backtest_with, BacktestInput, BacktestRun, ExceptionKind,
    ExecutionException, PORTFOLIO_LEDGER_TICKER,
};
pub use metrics::{curve_metrics, max_drawdown, metrics, returns, CurveMetrics, MetricTriple};
pub use portfolio::portfolio_aggregate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityCurve {
    pub dates: Vec<NaiveDate>,
    pub gross: Vec<f64>,
    pub net: Vec<f64>,
    pub ledger: Vec<FrictionLedgerEntry>,
    /// Set when net value hit zero; the curve ends on that date.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bankrupt_on: Option<NaiveDate>,
}

impl EquityCurve {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Cumulative ledger total through each date of the curve.
    pub fn cumulative_costs(&self) -> Vec<f64> {
        let mut per_day = vec![0.0; self.dates.len()];
        for e in &self.ledger {
            if let Ok(i) = self.dates.binary_search(&e.date) {
                per_day[i] += e.total();
            }
        }
        let mut acc = 0.0;
        per_day
            .into_iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect()
    }

    /// Largest relative violation of `gross - net = cumulative ledger`.
    pub fn conservation_error(&self) -> f64 {
        self.cumulative_costs()
            .iter()
            .zip(self.gross.iter().zip(&self.net))
            .map(|(c, (g, n))| ((g - n) - c).abs() / g.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    pub fn final_gross(&self) -> f64 {
        self.gross.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_net(&self) -> f64 {
        self.net.last().copied().unwrap_or(f64::NAN)
    }
}
