use std::collections::BTreeSet;

use crate::{Costs, Instance, Membership};

/// Output of the reference simulator. Sleeve curves are padded to the full
/// calendar (frozen after bankruptcy); the portfolio curve is not truncated.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub days: Vec<u32>,
    pub sleeve_gross: Vec<Vec<f64>>,
    pub sleeve_net: Vec<Vec<f64>>,
    pub gross: Vec<f64>,
    pub net: Vec<f64>,
    pub fills: usize,
}

fn tradable(universe: &Option<Vec<Membership>>, ticker: &str, day: u32) -> bool {
    let Some(members) = universe.as_ref().filter(|m| !m.is_empty()) else {
        return true;
    };
    let Some(m) = members.iter().find(|m| m.ticker == ticker) else {
        return false;
    };
    let inside = m.intervals.iter().any(|&(a, b)| a <= day && day <= b);
    inside && m.delist.is_none_or(|(d, _)| day <= d)
}

fn sleeve(inst: &Instance, k: usize, days: &[u32], fills: &mut usize) -> (Vec<f64>, Vec<f64>) {
    let s = &inst.series[k];
    let Costs {
        commission,
        kappa,
        beta,
        latency_bars,
        borrow,
        ..
    } = inst.costs;
    let mut pending: Vec<Option<f64>> = vec![None; s.bars.len()];
    for d in inst.decisions.iter().filter(|d| d.ticker == s.ticker) {
        let (Some(w), Some(i)) = (d.target, s.bars.iter().position(|b| b.day == d.day)) else {
            continue;
        };
        if i + 1 + latency_bars < s.bars.len() {
            pending[i + 1 + latency_bars] = Some(w);
        }
    }
    let delist = inst
        .universe
        .as_ref()
        .and_then(|u| u.iter().find(|m| m.ticker == s.ticker))
        .and_then(|m| m.delist);
    let (mut cash, mut shares, mut cost) = (inst.capital, 0.0_f64, 0.0_f64);
    let (mut last_close, mut gone, mut dead) = (None::<f64>, false, false);
    let (mut gross, mut net) = (Vec::new(), Vec::new());
    for &g in days {
        if dead {
            gross.push(*gross.last().unwrap());
            net.push(*net.last().unwrap());
            continue;
        }
        if let Some(j) = s.bars.iter().position(|b| b.day == g) {
            let bar = s.bars[j];
            if let Some(w) = pending[j] {
                let short_ok = w >= 0.0 || borrow.is_some();
                if !gone && short_ok && tradable(&inst.universe, &s.ticker, g) {
                    let value = cash - cost + shares * bar.open;
                    if value > 0.0 {
                        let dw = w - shares * bar.open / value;
                        if dw != 0.0 {
                            let notional = dw.abs() * value;
                            cost += commission * notional
                                + bar.spread / 2.0 * notional
                                + kappa * dw.abs().powf(beta) * value;
                            let new_shares = w * value / bar.open;
                            cash -= (new_shares - shares) * bar.open;
                            shares = new_shares;
                            *fills += 1;
                        }
                    }
                }
            }
            last_close = Some(bar.close);
        }
        if let Some((dd, recovery)) = delist {
            if !gone && g >= dd {
                cash += shares * recovery * last_close.unwrap_or(0.0);
                shares = 0.0;
                gone = true;
            }
        }
        let mark = last_close.unwrap_or(0.0);
        if shares < 0.0 {
            cost += borrow.unwrap_or(0.0) * shares.abs() * mark;
        }
        let gv = cash + shares * mark;
        gross.push(gv);
        net.push(gv - cost);
        if gv - cost <= 0.0 {
            dead = true;
        }
    }
    (gross, net)
}

/// Equal-weight portfolio of one sleeve per series, each sleeve started with
/// the full capital and scaled by 1/n, token costs charged on the portfolio.
pub fn simulate(inst: &Instance) -> OracleRun {
    let days: Vec<u32> = inst
        .series
        .iter()
        .flat_map(|s| s.bars.iter().map(|b| b.day))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = inst.series.len() as f64;
    let mut fills = 0;
    let (mut sleeve_gross, mut sleeve_net) = (Vec::new(), Vec::new());
    for k in 0..inst.series.len() {
        let (g, nv) = sleeve(inst, k, &days, &mut fills);
        sleeve_gross.push(g);
        sleeve_net.push(nv);
    }
    let mut token_by_day = vec![0.0; days.len()];
    for d in &inst.decisions {
        let t = days
            .iter()
            .position(|&g| g >= d.day)
            .unwrap_or(days.len() - 1);
        token_by_day[t] += (d.tokens_in + d.tokens_out) as f64 / 1000.0 * inst.costs.token_price;
    }
    let mut gross = Vec::new();
    let mut net = Vec::new();
    let mut tokens = 0.0;
    for t in 0..days.len() {
        tokens += token_by_day[t];
        gross.push(sleeve_gross.iter().map(|c| c[t] / n).sum::<f64>());
        net.push(sleeve_net.iter().map(|c| c[t] / n).sum::<f64>() - tokens);
    }
    OracleRun {
        days,
        sleeve_gross,
        sleeve_net,
        gross,
        net,
        fills,
    }
}
