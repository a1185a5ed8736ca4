use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::portfolio::portfolio_aggregate;
use super::EquityCurve;
use crate::datamodel::{DecisionLog, DecisionRecord, Instruction, PriceSeries, Universe};
use crate::error::{Error, Result};
use crate::friction::{token_cost, trade_costs, FrictionLedgerEntry, FrictionSpec, TradeFill};
use crate::par::Exec;

/// Ticker label on portfolio-level ledger entries (token cost).
pub const PORTFOLIO_LEDGER_TICKER: &str = "__portfolio__";

pub struct BacktestInput<'a> {
    pub prices: &'a BTreeMap<String, PriceSeries>,
    /// The decision log of the system under test. Every record's tokens are
    /// charged to the portfolio.
    pub decisions: &'a DecisionLog,
    /// Agent whose decisions are executed; may be `None` only for a
    /// single-agent log.
    pub trader: Option<&'a str>,
    pub universe: &'a Universe,
    pub spec: &'a FrictionSpec,
    pub initial_capital: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExceptionKind {
    UnknownTicker,
    DateNotInSeries,
    BeyondSeriesEnd,
    OutOfUniverse,
    ShortWithoutBorrow,
    Delisted,
    Bankrupt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionException {
    pub decision_date: NaiveDate,
    pub ticker: String,
    pub kind: ExceptionKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRun {
    pub sleeves: BTreeMap<String, EquityCurve>,
    pub portfolio: EquityCurve,
    pub exceptions: Vec<ExecutionException>,
    pub fills: usize,
}

struct Pending {
    decision_date: NaiveDate,
    target: f64,
}

struct SleeveRun {
    curve: EquityCurve,
    exceptions: Vec<ExecutionException>,
    fills: usize,
}

pub fn run_backtest(input: &BacktestInput<'_>) -> Result<BacktestRun> {
    run_backtest_with(input, Exec::default())
}

/// Runs one sleeve per priced ticker, each started with the full
/// `initial_capital`, then combines them equal-weight with no rebalancing.
/// Token cost is charged on the portfolio curve only.
pub fn run_backtest_with(input: &BacktestInput<'_>, exec: Exec) -> Result<BacktestRun> {
    if !(input.initial_capital > 0.0) {
        return Err(Error::contract(format!(
            "initial_capital {} must be > 0",
            input.initial_capital
        )));
    }
    input.spec.validate()?;
    if input.prices.is_empty() {
        return Err(Error::contract("no price series supplied"));
    }
    let agents = input.decisions.agents();
    let trader: Option<&str> = match input.trader {
        Some(t) if !agents.contains(t) => {
            return Err(Error::contract(format!(
                "trader {t} has no records in the decision log"
            )))
        }
        Some(t) => Some(t),
        None if agents.len() > 1 => {
            return Err(Error::contract(
                "decision log holds several agents; name the one whose decisions are executed",
            ))
        }
        None => agents.into_iter().next(),
    };
    let trades: Vec<&DecisionRecord> = input
        .decisions
        .records()
        .iter()
        .filter(|r| Some(r.agent_id.as_str()) == trader)
        .collect();

    let grid: Vec<NaiveDate> = input
        .prices
        .values()
        .flat_map(|s| s.bars().iter().map(|b| b.date))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut exceptions = Vec::new();
    for r in &trades {
        if !input.prices.contains_key(&r.ticker) {
            exceptions.push(ExecutionException {
                decision_date: r.date,
                ticker: r.ticker.clone(),
                kind: ExceptionKind::UnknownTicker,
                detail: "no price series for ticker".into(),
            });
        }
    }

    let series: Vec<&PriceSeries> = input.prices.values().collect();
    let runs = exec.map(&series, |s| run_sleeve(input, &trades, s, &grid));

    let mut sleeves = BTreeMap::new();
    let mut padded = Vec::with_capacity(runs.len());
    let mut fills = 0;
    for (s, run) in series.iter().zip(runs) {
        let run = run?;
        fills += run.fills;
        exceptions.extend(run.exceptions);
        padded.push(pad_to(&run.curve, &grid));
        sleeves.insert(s.ticker().to_string(), run.curve);
    }

    let weights = vec![1.0 / padded.len() as f64; padded.len()];
    let mut portfolio = portfolio_aggregate(&padded, &weights)?;
    charge_tokens(&mut portfolio, input);
    truncate_if_bankrupt(&mut portfolio);

    exceptions.sort_by(|a, b| {
        (a.decision_date, a.ticker.as_str(), a.kind).cmp(&(
            b.decision_date,
            b.ticker.as_str(),
            b.kind,
        ))
    });
    Ok(BacktestRun {
        sleeves,
        portfolio,
        exceptions,
        fills,
    })
}

fn run_sleeve(
    input: &BacktestInput<'_>,
    trades: &[&DecisionRecord],
    series: &PriceSeries,
    grid: &[NaiveDate],
) -> Result<SleeveRun> {
    let ticker = series.ticker();
    let bars = series.bars();
    let spec = input.spec;
    let mut exceptions = Vec::new();
    let reject = |exceptions: &mut Vec<ExecutionException>, date, kind, detail: String| {
        exceptions.push(ExecutionException {
            decision_date: date,
            ticker: ticker.to_string(),
            kind,
            detail,
        })
    };

    // decision on bar i executes at the open of bar i + 1 + latency
    let mut pending: Vec<Option<Pending>> = (0..bars.len()).map(|_| None).collect();
    for r in trades.iter().filter(|r| r.ticker == ticker) {
        let Instruction::Target(target) = r.instruction() else {
            continue;
        };
        let Some(i) = series.index_of(r.date) else {
            reject(
                &mut exceptions,
                r.date,
                ExceptionKind::DateNotInSeries,
                "decision date has no bar".into(),
            );
            continue;
        };
        let e = i + 1 + spec.latency_bars;
        if e >= bars.len() {
            reject(
                &mut exceptions,
                r.date,
                ExceptionKind::BeyondSeriesEnd,
                format!("execution bar {} of {} out of range", e, bars.len()),
            );
            continue;
        }
        pending[e] = Some(Pending {
            decision_date: r.date,
            target,
        });
    }

    let membership = input.universe.get(ticker);
    let delisting = membership.and_then(|m| m.delist_date.zip(m.delist_recovery));

    let mut cash = input.initial_capital;
    let mut shares = 0.0_f64;
    let mut cost = 0.0_f64;
    let mut last_close: Option<f64> = None;
    let mut delisted = false;
    let mut fills = 0;
    let mut bar_idx = 0;
    let mut curve = EquityCurve {
        dates: Vec::with_capacity(grid.len()),
        gross: Vec::with_capacity(grid.len()),
        net: Vec::with_capacity(grid.len()),
        ledger: Vec::new(),
        bankrupt_on: None,
    };

    for &date in grid {
        if bar_idx < bars.len() && bars[bar_idx].date == date {
            let bar = &bars[bar_idx];
            if let Some(p) = pending[bar_idx].take() {
                let value = cash - cost + shares * bar.open;
                if delisted {
                    reject(
                        &mut exceptions,
                        p.decision_date,
                        ExceptionKind::Delisted,
                        format!("delisted before {date}"),
                    );
                } else if !input.universe.tradable(ticker, date) {
                    reject(
                        &mut exceptions,
                        p.decision_date,
                        ExceptionKind::OutOfUniverse,
                        format!("not tradable on {date}"),
                    );
                } else if p.target < 0.0 && spec.borrow_rate.is_none() {
                    reject(
                        &mut exceptions,
                        p.decision_date,
                        ExceptionKind::ShortWithoutBorrow,
                        "no borrow_rate declared".into(),
                    );
                } else if value > 0.0 {
                    let dw = p.target - shares * bar.open / value;
                    if dw != 0.0 {
                        let fill = TradeFill {
                            notional: dw.abs() * value,
                            turnover: dw.abs(),
                            spread: bar.spread,
                            portfolio_value: value,
                        };
                        let entry = trade_costs(date, ticker, fill, spec)?;
                        cost += entry.total();
                        curve.ledger.push(entry);
                        let new_shares = p.target * value / bar.open;
                        cash -= (new_shares - shares) * bar.open;
                        shares = new_shares;
                        fills += 1;
                    }
                }
            }
            last_close = Some(bar.close);
            bar_idx += 1;
        }

        if let Some((delist_date, recovery)) = delisting {
            if !delisted && date >= delist_date {
                cash += shares * recovery * last_close.unwrap_or(0.0);
                shares = 0.0;
                delisted = true;
            }
        }

        let mark = last_close.unwrap_or(0.0);
        if shares < 0.0 {
            let mut entry = FrictionLedgerEntry::empty(date, ticker);
            entry.borrow_cost = spec.borrow_rate.unwrap_or(0.0) * shares.abs() * mark;
            cost += entry.borrow_cost;
            curve.ledger.push(entry);
        }

        let gross = cash + shares * mark;
        curve.dates.push(date);
        curve.gross.push(gross);
        curve.net.push(gross - cost);
        if gross - cost <= 0.0 {
            curve.bankrupt_on = Some(date);
            for p in pending[bar_idx..].iter().flatten() {
                reject(
                    &mut exceptions,
                    p.decision_date,
                    ExceptionKind::Bankrupt,
                    format!("sleeve bankrupt on {date}"),
                );
            }
            break;
        }
    }

    Ok(SleeveRun {
        curve,
        exceptions,
        fills,
    })
}

/// Extends a truncated curve to the full grid by freezing its last values.
fn pad_to(curve: &EquityCurve, grid: &[NaiveDate]) -> EquityCurve {
    let mut out = curve.clone();
    let (g, n) = (curve.final_gross(), curve.final_net());
    for &d in &grid[curve.len()..] {
        out.dates.push(d);
        out.gross.push(g);
        out.net.push(n);
    }
    out
}

fn charge_tokens(portfolio: &mut EquityCurve, input: &BacktestInput<'_>) {
    let grid = &portfolio.dates;
    let mut per_day = vec![0.0; grid.len()];
    let mut entries = Vec::new();
    for r in input.decisions.records() {
        let amount = token_cost(r.tokens_in, r.tokens_out, input.spec);
        if amount == 0.0 {
            continue;
        }
        let t = grid.partition_point(|&d| d < r.date).min(grid.len() - 1);
        per_day[t] += amount;
        let mut e = FrictionLedgerEntry::empty(grid[t], PORTFOLIO_LEDGER_TICKER);
        e.token_cost = amount;
        entries.push(e);
    }
    let mut acc = 0.0;
    for (net, charge) in portfolio.net.iter_mut().zip(per_day) {
        acc += charge;
        *net -= acc;
    }
    portfolio.ledger.extend(entries);
}

fn truncate_if_bankrupt(curve: &mut EquityCurve) {
    if let Some(i) = curve.net.iter().position(|&v| v <= 0.0) {
        curve.bankrupt_on = Some(curve.dates[i]);
        curve.dates.truncate(i + 1);
        curve.gross.truncate(i + 1);
        curve.net.truncate(i + 1);
        let end = curve.dates[i];
        curve.ledger.retain(|e| e.date <= end);
    }
}

/// Buy at the first close, hold to the end. The net curve subtracts the
/// one-time entry cost of a full-notional fill at the first bar.
pub fn buy_and_hold(
    series: &PriceSeries,
    spec: &FrictionSpec,
    initial_capital: f64,
) -> Result<EquityCurve> {
    if !(initial_capital > 0.0) {
        return Err(Error::contract(format!(
            "initial_capital {initial_capital} must be > 0"
        )));
    }
    let bars = series.bars();
    let first = &bars[0];
    let fill = TradeFill {
        notional: initial_capital,
        turnover: 1.0,
        spread: first.spread,
        portfolio_value: initial_capital,
    };
    let entry = trade_costs(first.date, series.ticker(), fill, spec)?;
    let entry_cost = entry.total();
    let gross: Vec<f64> = bars
        .iter()
        .map(|b| initial_capital * b.close / first.close)
        .collect();
    let net = gross.iter().map(|g| g - entry_cost).collect();
    Ok(EquityCurve {
        dates: bars.iter().map(|b| b.date).collect(),
        gross,
        net,
        ledger: vec![entry],
        bankrupt_on: None,
    })
}
