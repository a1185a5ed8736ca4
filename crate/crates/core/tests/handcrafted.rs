use std::collections::BTreeMap;

use alpha_audit::backtest::{run_backtest, BacktestInput, PORTFOLIO_LEDGER_TICKER};
use alpha_audit::datamodel::{
    Action, DecisionLog, DecisionRecord, PriceBar, PriceSeries, Universe,
};
use alpha_audit::friction::{ledger_sum, FrictionSpec};
use chrono::NaiveDate;

fn d(i: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 3, 3).unwrap() + chrono::Days::new(i)
}

fn series(ticker: &str, open: [f64; 5], close: [f64; 5], spread: f64) -> PriceSeries {
    let bars = (0..5)
        .map(|i| PriceBar {
            date: d(i as u64),
            open: open[i],
            high: open[i].max(close[i]),
            low: open[i].min(close[i]),
            close: close[i],
            volume: 1e5,
            spread,
        })
        .collect();
    PriceSeries::new(ticker, bars).unwrap()
}

fn rec(ticker: &str, day: u64, action: Option<Action>, w: Option<f64>) -> DecisionRecord {
    DecisionRecord {
        date: d(day),
        ticker: ticker.into(),
        action,
        target_weight: w,
        confidence: None,
        tokens_in: 1000,
        tokens_out: 500,
        latency_ms: 800,
        agent_id: "solo".into(),
        rationale: None,
        round: None,
    }
}

/// Two tickers over five days with three trades; the expected values were
/// worked out row by row outside the engine and frozen here.
#[test]
fn two_tickers_five_days_three_trades() {
    let mut prices = BTreeMap::new();
    prices.insert(
        "AAA".to_string(),
        series(
            "AAA",
            [10.0, 10.5, 11.0, 10.8, 11.2],
            [10.2, 10.8, 10.9, 11.1, 11.5],
            0.002,
        ),
    );
    prices.insert(
        "BBB".to_string(),
        series(
            "BBB",
            [50.0, 49.0, 48.5, 49.5, 50.0],
            [49.5, 48.8, 49.2, 49.8, 50.5],
            0.004,
        ),
    );
    let log = DecisionLog::new(vec![
        rec("AAA", 0, Some(Action::Buy), None),
        rec("BBB", 1, Some(Action::Buy), None),
        rec("AAA", 2, None, Some(0.5)),
    ])
    .unwrap();
    let spec = FrictionSpec {
        commission_rate: 0.001,
        kappa: 0.002,
        beta: 1.0,
        token_price: 0.01,
        latency_bars: 0,
        borrow_rate: None,
    };
    let run = run_backtest(&BacktestInput {
        prices: &prices,
        decisions: &log,
        trader: None,
        universe: &Universe::default(),
        spec: &spec,
        initial_capital: 10_000.0,
    })
    .unwrap();

    let gross = [
        10000.0,
        10142.857142857143,
        10262.6411389298,
        10348.028555064637,
        10515.06122838597,
    ];
    let net = [
        9999.985,
        10122.827142857142,
        10217.596138929799,
        10292.657840778922,
        10459.690514100255,
    ];
    let p = &run.portfolio;
    for t in 0..5 {
        assert!(
            (p.gross[t] - gross[t]).abs() < 1e-9 * gross[t],
            "gross day {t}: {}",
            p.gross[t]
        );
        assert!(
            (p.net[t] - net[t]).abs() < 1e-9 * net[t],
            "net day {t}: {}",
            p.net[t]
        );
    }
    assert_eq!(run.fills, 3);
    assert!(run.exceptions.is_empty());

    // AAA entry fill on 10,000: commission 10, half-spread 10, impact 20
    let a = &run.sleeves["AAA"].ledger;
    assert_eq!(a.len(), 2);
    assert!((a[0].commission - 10.0).abs() < 1e-9);
    assert!((a[0].spread_cost - 10.0).abs() < 1e-9);
    assert!((a[0].impact_cost - 20.0).abs() < 1e-9);
    assert!((a[1].total() - 20.65142857142857).abs() < 1e-9);
    assert!((ledger_sum(&run.sleeves["BBB"].ledger).total - 50.0).abs() < 1e-9);

    let tokens: Vec<_> = p
        .ledger
        .iter()
        .filter(|e| e.ticker == PORTFOLIO_LEDGER_TICKER)
        .collect();
    assert_eq!(tokens.len(), 3);
    assert!(tokens.iter().all(|e| (e.token_cost - 0.015).abs() < 1e-12));
    assert!(p.conservation_error() < 1e-12);
}
