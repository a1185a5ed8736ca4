//! Serialized report documents.
//!
//! Every document is `{ "header": ..., "body": ... }`. Only the header holds
//! run-dependent data (timestamp, tool version); the body is a pure function
//! of the inputs, so identical inputs give byte-identical bodies.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backtest::{
    buy_and_hold, curve_metrics, portfolio_aggregate, BacktestRun, CurveMetrics, EquityCurve,
    ExceptionKind, ExecutionException,
};
use crate::datamodel::{PriceSeries, Universe};
use crate::error::Result;
use crate::friction::{
    ledger_sum, FrictionComponent, FrictionLedgerEntry, FrictionSpec, LedgerTotals,
};
use crate::sharpestats::SharpeConvention;

pub const EXECUTION_NOTE: &str =
    "decisions fill at the open of the next bar (plus declared latency); \
each ticker sleeve starts with the full initial capital and sleeves are combined equal-weight \
with no rebalancing";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub generated_at: String,
    pub tool_version: String,
}

impl Header {
    pub fn now() -> Self {
        Header {
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub header: Header,
    pub body: T,
}

impl<T: Serialize> Document<T> {
    pub fn new(body: T) -> Self {
        Document {
            header: Header::now(),
            body,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self).expect("report types serialize") + "\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickerReport {
    /// `None` when the sleeve has fewer than two marks.
    pub metrics: Option<CurveMetrics>,
    pub buy_and_hold: Option<CurveMetrics>,
    pub bankrupt_on: Option<NaiveDate>,
    pub ledger_totals: LedgerTotals,
}

/// The results bundle written by `backtest` and consumed by the protocol
/// evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub manifest_sha256: String,
    pub agent_id: Option<String>,
    pub sharpe_convention: SharpeConvention,
    pub execution_note: String,
    pub window: (NaiveDate, NaiveDate),
    pub initial_capital: f64,
    pub friction: FrictionSpec,
    pub charged_components: BTreeSet<FrictionComponent>,
    pub universe_supplied: bool,
    pub out_of_universe_fills: usize,
    pub out_of_universe_rejections: usize,
    pub fills: usize,
    pub tickers: BTreeMap<String, TickerReport>,
    pub portfolio: CurveMetrics,
    /// Number of portfolio return observations behind the Sharpe ratios.
    pub observations: usize,
    pub portfolio_buy_and_hold: Option<CurveMetrics>,
    pub final_gross: f64,
    pub final_net: f64,
    pub bankrupt_on: Option<NaiveDate>,
    pub ledger_totals: LedgerTotals,
    pub ledger: Vec<FrictionLedgerEntry>,
    pub exceptions: Vec<ExecutionException>,
}

pub struct ReportContext<'a> {
    pub manifest_sha256: String,
    pub agent_id: Option<String>,
    pub prices: &'a BTreeMap<String, PriceSeries>,
    pub universe: &'a Universe,
    pub spec: &'a FrictionSpec,
    pub initial_capital: f64,
    pub convention: SharpeConvention,
    pub window: (NaiveDate, NaiveDate),
}

/// Marks `curve` on `grid`: the starting capital before its first date, its
/// last value after it ends.
fn align(curve: &EquityCurve, grid: &[NaiveDate], start: f64) -> EquityCurve {
    let mut out = EquityCurve {
        dates: grid.to_vec(),
        gross: Vec::with_capacity(grid.len()),
        net: Vec::with_capacity(grid.len()),
        ledger: curve.ledger.clone(),
        bankrupt_on: curve.bankrupt_on,
    };
    let mut i = 0;
    let (mut g, mut n) = (start, start);
    for d in grid {
        while i < curve.len() && curve.dates[i] <= *d {
            g = curve.gross[i];
            n = curve.net[i];
            i += 1;
        }
        out.gross.push(g);
        out.net.push(n);
    }
    out
}

fn metrics_or_none(curve: &EquityCurve, k: SharpeConvention) -> Option<CurveMetrics> {
    curve_metrics(curve, k).ok()
}

pub fn build_backtest_report(run: &BacktestRun, ctx: &ReportContext<'_>) -> Result<BacktestReport> {
    let any_spread = ctx
        .prices
        .values()
        .any(|s| s.bars().iter().any(|b| b.spread > 0.0));

    let mut tickers = BTreeMap::new();
    let mut bh_curves = Vec::new();
    for (ticker, curve) in &run.sleeves {
        let bh = buy_and_hold(&ctx.prices[ticker], ctx.spec, ctx.initial_capital)?;
        bh_curves.push(align(&bh, &run.portfolio.dates, ctx.initial_capital));
        tickers.insert(
            ticker.clone(),
            TickerReport {
                metrics: metrics_or_none(curve, ctx.convention),
                buy_and_hold: metrics_or_none(&bh, ctx.convention),
                bankrupt_on: curve.bankrupt_on,
                ledger_totals: ledger_sum(&curve.ledger),
            },
        );
    }
    let portfolio_buy_and_hold = if bh_curves.is_empty() {
        None
    } else {
        let weights = vec![1.0 / bh_curves.len() as f64; bh_curves.len()];
        metrics_or_none(&portfolio_aggregate(&bh_curves, &weights)?, ctx.convention)
    };

    let p = &run.portfolio;
    let portfolio = curve_metrics(p, ctx.convention)?;
    let rejections = run
        .exceptions
        .iter()
        .filter(|e| e.kind == ExceptionKind::OutOfUniverse)
        .count();
    Ok(BacktestReport {
        manifest_sha256: ctx.manifest_sha256.clone(),
        agent_id: ctx.agent_id.clone(),
        sharpe_convention: ctx.convention,
        execution_note: EXECUTION_NOTE.to_string(),
        window: ctx.window,
        initial_capital: ctx.initial_capital,
        friction: *ctx.spec,
        charged_components: ctx.spec.charged_components(any_spread),
        universe_supplied: ctx.universe.is_supplied(),
        // the engine refuses fills outside the universe; kept explicit so a
        // bundle from another producer is checked the same way
        out_of_universe_fills: 0,
        out_of_universe_rejections: rejections,
        fills: run.fills,
        tickers,
        portfolio,
        observations: p.dates.len().saturating_sub(1),
        portfolio_buy_and_hold,
        final_gross: p.final_gross(),
        final_net: p.final_net(),
        bankrupt_on: p.bankrupt_on,
        ledger_totals: ledger_sum(&p.ledger),
        ledger: p.ledger.clone(),
        exceptions: run.exceptions.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha_of_empty() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn align_fills_before_and_after() {
        let d = |i| NaiveDate::from_ymd_opt(2025, 1, i).unwrap();
        let c = EquityCurve {
            dates: vec![d(2), d(3)],
            gross: vec![10.0, 11.0],
            net: vec![9.0, 10.0],
            ledger: vec![],
            bankrupt_on: None,
        };
        let a = align(&c, &[d(1), d(2), d(3), d(4)], 10.0);
        assert_eq!(a.gross, vec![10.0, 10.0, 11.0, 11.0]);
        assert_eq!(a.net, vec![10.0, 9.0, 10.0, 10.0]);
    }

    #[test]
    fn document_layout() {
        let doc = Document::new(vec![1, 2]);
        let v: serde_json::Value = serde_json::from_str(&doc.to_json().unwrap()).unwrap();
        assert!(v["header"]["generated_at"].is_string());
        assert_eq!(v["body"], serde_json::json!([1, 2]));
    }
}
