//! Converts a plain [`Instance`] into the engine's domain types. Day `n`
//! maps to `BASE + n` calendar days.

use std::collections::BTreeMap;

use alpha_audit::datamodel::{
    Action, DecisionLog, DecisionRecord, PriceBar, PriceSeries, Universe, UniverseMembership,
};
use alpha_audit::friction::FrictionSpec;
use chrono::NaiveDate;

use crate::Instance;

pub fn date(day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 1, 1).unwrap() + chrono::Days::new(day as u64)
}

pub struct EngineCase {
    pub prices: BTreeMap<String, PriceSeries>,
    pub decisions: DecisionLog,
    pub universe: Universe,
    pub spec: FrictionSpec,
    pub capital: f64,
}

pub fn to_engine(inst: &Instance) -> EngineCase {
    let prices = inst
        .series
        .iter()
        .map(|s| {
            let bars = s
                .bars
                .iter()
                .map(|b| PriceBar {
                    date: date(b.day),
                    open: b.open,
                    high: b.open.max(b.close),
                    low: b.open.min(b.close),
                    close: b.close,
                    volume: 1e6,
                    spread: b.spread,
                })
                .collect();
            (
                s.ticker.clone(),
                PriceSeries::new(s.ticker.clone(), bars).unwrap(),
            )
        })
        .collect();

    // alternate between the action and target-weight encodings
    let records = inst
        .decisions
        .iter()
        .map(|d| {
            let (action, target_weight) = match d.target {
                None => (Some(Action::Hold), None),
                Some(1.0) => (Some(Action::Buy), None),
                Some(w) if w == 0.0 && d.day % 2 == 0 => (Some(Action::Sell), None),
                Some(w) => (None, Some(w)),
            };
            DecisionRecord {
                date: date(d.day),
                ticker: d.ticker.clone(),
                action,
                target_weight,
                confidence: None,
                tokens_in: d.tokens_in,
                tokens_out: d.tokens_out,
                latency_ms: 0,
                agent_id: "agent".into(),
                rationale: None,
                round: None,
            }
        })
        .collect();

    let members = inst
        .universe
        .iter()
        .flatten()
        .map(|m| UniverseMembership {
            ticker: m.ticker.clone(),
            intervals: m
                .intervals
                .iter()
                .map(|&(a, b)| (date(a), date(b)))
                .collect(),
            delist_date: m.delist.map(|(d, _)| date(d)),
            delist_recovery: m.delist.map(|(_, r)| r),
        })
        .collect();

    let c = inst.costs;
    EngineCase {
        prices,
        decisions: DecisionLog::new(records).unwrap(),
        universe: Universe::new(members).unwrap(),
        spec: FrictionSpec {
            commission_rate: c.commission,
            kappa: c.kappa,
            beta: c.beta,
            token_price: c.token_price,
            latency_bars: c.latency_bars,
            borrow_rate: c.borrow,
        },
        capital: inst.capital,
    }
}

/// Outcome of running one instance through both the engine and the oracle.
#[derive(Debug, Clone, Copy)]
pub struct Comparison {
    /// Largest relative breach of `gross - net = cumulative ledger` over the
    /// portfolio and every sleeve.
    pub conservation: f64,
    /// Largest relative gap between engine and oracle values.
    pub oracle_gap: f64,
    pub fills_match: bool,
    pub net_le_gross: bool,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn compare(inst: &Instance) -> Comparison {
    use alpha_audit::backtest::{run_backtest, BacktestInput};

    let case = to_engine(inst);
    let run = run_backtest(&BacktestInput {
        prices: &case.prices,
        decisions: &case.decisions,
        trader: None,
        universe: &case.universe,
        spec: &case.spec,
        initial_capital: case.capital,
    })
    .expect("generated instances are valid");
    let oracle = crate::simulate(inst);

    let mut conservation = run.portfolio.conservation_error();
    let mut gap: f64 = 0.0;
    let p = &run.portfolio;
    for t in 0..p.len() {
        gap = gap
            .max(rel(p.gross[t], oracle.gross[t]))
            .max(rel(p.net[t], oracle.net[t]));
    }
    if p.len() < oracle.days.len() && oracle.net[p.len() - 1] > 0.0 {
        // engine truncated on bankruptcy the oracle did not see
        gap = f64::INFINITY;
    }
    for (k, s) in inst.series.iter().enumerate() {
        let curve = &run.sleeves[&s.ticker];
        conservation = conservation.max(curve.conservation_error());
        for t in 0..curve.len() {
            gap = gap
                .max(rel(curve.gross[t], oracle.sleeve_gross[k][t]))
                .max(rel(curve.net[t], oracle.sleeve_net[k][t]));
        }
    }
    Comparison {
        conservation,
        oracle_gap: gap,
        fills_match: run.fills == oracle.fills,
        net_le_gross: p.final_net() <= p.final_gross(),
    }
}
