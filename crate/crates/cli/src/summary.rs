//! Human-readable renderings. Gross and net figures always appear together.

use std::fmt::Write;

use alpha_audit::backtest::{CurveMetrics, MetricTriple};
use alpha_audit::friction::LedgerTotals;
use alpha_audit::protocol::{ComplianceReport, ProtocolVerdict};
use alpha_audit::report::BacktestReport;

use crate::SharpeUncertainty;

fn pct(x: f64) -> String {
    format!("{:+.2}%", 100.0 * x)
}

fn sr(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.3}"))
}

fn row(out: &mut String, label: &str, m: &CurveMetrics) {
    let (g, n): (&MetricTriple, &MetricTriple) = (&m.gross, &m.net);
    writeln!(
        out,
        "  {label:<12} {:>9} {:>9}  {:>8} {:>8}  {:>7.2}% {:>7.2}%",
        pct(g.cumulative_return),
        pct(n.cumulative_return),
        sr(g.sharpe),
        sr(n.sharpe),
        100.0 * g.max_drawdown,
        100.0 * n.max_drawdown,
    )
    .unwrap();
}

fn ledger(out: &mut String, t: &LedgerTotals) {
    writeln!(
        out,
        "ledger: commission {:.2}  spread {:.2}  impact {:.2}  token {:.2}  borrow {:.2}  total {:.2}",
        t.commission, t.spread_cost, t.impact_cost, t.token_cost, t.borrow_cost, t.total
    )
    .unwrap();
}

pub fn backtest(r: &BacktestReport) -> String {
    let mut out = String::new();
    writeln!(out, "manifest sha256: {}", r.manifest_sha256).unwrap();
    if let Some(a) = &r.agent_id {
        writeln!(out, "agent: {a}").unwrap();
    }
    writeln!(out, "window: {} .. {}", r.window.0, r.window.1).unwrap();
    writeln!(out, "sharpe convention: {}", r.sharpe_convention).unwrap();
    writeln!(out, "execution: {}", r.execution_note).unwrap();
    writeln!(out).unwrap();
    writeln!(
        out,
        "  {:<12} {:>9} {:>9}  {:>8} {:>8}  {:>8} {:>8}",
        "", "CR gross", "CR net", "SR gross", "SR net", "MDD gross", "MDD net"
    )
    .unwrap();
    for (t, tr) in &r.tickers {
        match &tr.metrics {
            Some(m) => row(&mut out, t, m),
            None => writeln!(out, "  {t:<12} fewer than two marks").unwrap(),
        }
    }
    row(&mut out, "portfolio", &r.portfolio);
    if let Some(bh) = &r.portfolio_buy_and_hold {
        row(&mut out, "buy&hold", bh);
    }
    writeln!(out).unwrap();
    writeln!(
        out,
        "final value: gross {:.2}  net {:.2}  (start {:.2})",
        r.final_gross, r.final_net, r.initial_capital
    )
    .unwrap();
    if let Some(d) = r.bankrupt_on {
        writeln!(out, "BANKRUPT on {d}; curve truncated").unwrap();
    }
    ledger(&mut out, &r.ledger_totals);
    let charged: Vec<&str> = r.charged_components.iter().map(|c| c.as_str()).collect();
    writeln!(out, "charged components: {}", charged.join(", ")).unwrap();
    writeln!(
        out,
        "fills: {}  exceptions: {}  universe supplied: {}",
        r.fills,
        r.exceptions.len(),
        r.universe_supplied
    )
    .unwrap();
    out
}

fn verdict_line(out: &mut String, v: &ProtocolVerdict) {
    let level = match v.level {
        alpha_audit::protocol::Level::Full => "full",
        alpha_audit::protocol::Level::Light => "light",
    };
    writeln!(
        out,
        "  {} {:<27} {:<5} {}",
        v.protocol,
        v.protocol.title(),
        level,
        v.status.as_str()
    )
    .unwrap();
    for (k, val) in &v.evidence {
        writeln!(out, "       {k}: {val}").unwrap();
    }
}

pub fn audit(
    c: &ComplianceReport,
    backtest_report: Option<&BacktestReport>,
    sharpe: Option<&SharpeUncertainty>,
) -> String {
    let mut out = String::new();
    let granted = c.granted_tier.map_or("none", |t| t.as_str());
    writeln!(out, "claimed tier: {}", c.claimed_tier).unwrap();
    writeln!(out, "granted tier: {granted}").unwrap();
    if c.overclaim {
        writeln!(
            out,
            "OVERCLAIM: the evidence does not support the claimed tier"
        )
        .unwrap();
    }
    writeln!(out, "permissible language: {}", c.permissible_language).unwrap();
    if !c.caveats.is_empty() {
        writeln!(out, "caveats:").unwrap();
        for cv in &c.caveats {
            writeln!(out, "  {}: {}", cv.protocol, cv.text).unwrap();
        }
    }
    writeln!(out, "ece threshold: {}", c.ece_threshold).unwrap();
    writeln!(out, "sharpe convention: {}", c.sharpe_convention).unwrap();
    if let Some(a) = &c.point_in_time_attestation {
        writeln!(out, "point-in-time attestation: {a}").unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "protocols:").unwrap();
    for v in c.verdicts.iter().chain(&c.light_verdicts) {
        verdict_line(&mut out, v);
    }
    if let Some(s) = sharpe {
        writeln!(out).unwrap();
        writeln!(
            out,
            "net sharpe {:+.3} over T={} ({}): SE {:.4}, {:.0}% CI +/- {:.4}, t {:.3} ({} the 3.0 hurdle)",
            s.sr,
            s.observations,
            s.convention,
            s.standard_error,
            100.0 * s.level,
            s.ci_half_width,
            s.t_stat,
            if s.passes_hurdle { "clears" } else { "below" }
        )
        .unwrap();
    }
    if let Some(r) = backtest_report {
        writeln!(out).unwrap();
        out.push_str(&backtest(r));
    } else {
        writeln!(out, "manifest sha256: {}", c.manifest_sha256).unwrap();
    }
    out
}
