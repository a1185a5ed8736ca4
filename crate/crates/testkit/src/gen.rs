use rand::Rng;

use crate::{Bar, Costs, Decision, Instance, Membership, Series};

const TICKERS: [&str; 3] = ["AAA", "BBB", "CCC"];

/// Small random backtest: 1..=3 tickers, 2..=20 calendar days, up to 8
/// decisions. Bars are occasionally missing so calendars differ per ticker.
pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let n_tickers = rng.gen_range(1..=3);
    let n_days = rng.gen_range(2..=20u32);
    let mut series = Vec::new();
    for ticker in TICKERS.iter().take(n_tickers) {
        let mut bars = Vec::new();
        let mut close: f64 = rng.gen_range(5.0..200.0);
        for day in 0..n_days {
            if day > 0 && rng.gen_bool(0.1) {
                continue;
            }
            let open = close * rng.gen_range(0.95..1.05);
            close = open * rng.gen_range(0.93..1.07);
            let spread = if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.0..0.005)
            };
            bars.push(Bar {
                day,
                open,
                close,
                spread,
            });
        }
        series.push(Series {
            ticker: ticker.to_string(),
            bars,
        });
    }

    let costs = Costs {
        commission: rng.gen_range(0.0..0.005),
        kappa: rng.gen_range(0.0..0.01),
        beta: rng.gen_range(0.5..2.0),
        token_price: rng.gen_range(0.0..0.05),
        latency_bars: rng.gen_range(0..=2),
        borrow: if rng.gen_bool(0.5) {
            Some(rng.gen_range(0.0..0.001))
        } else {
            None
        },
    };

    let mut decisions: Vec<Decision> = Vec::new();
    for _ in 0..rng.gen_range(0..=8) {
        let ticker = TICKERS[rng.gen_range(0..n_tickers)].to_string();
        let day = rng.gen_range(0..n_days);
        if decisions.iter().any(|d| d.ticker == ticker && d.day == day) {
            continue;
        }
        let target = match rng.gen_range(0..4) {
            0 => None,
            1 => Some(1.0),
            2 => Some(0.0),
            _ => Some(rng.gen_range(-1.0..1.0)),
        };
        decisions.push(Decision {
            day,
            ticker,
            target,
            tokens_in: rng.gen_range(0..5000),
            tokens_out: rng.gen_range(0..2000),
        });
    }
    decisions.sort_by(|a, b| (a.ticker.as_str(), a.day).cmp(&(b.ticker.as_str(), b.day)));

    let universe = if rng.gen_bool(0.5) {
        let mut members = Vec::new();
        for ticker in TICKERS.iter().take(n_tickers) {
            if rng.gen_bool(0.1) {
                continue;
            }
            let a = rng.gen_range(0..n_days);
            let b = rng.gen_range(a..n_days);
            let mut intervals = vec![(a, b)];
            if b + 2 < n_days && rng.gen_bool(0.3) {
                intervals.push((b + 2, n_days - 1));
            }
            let end = intervals.last().unwrap().1;
            let delist = if rng.gen_bool(0.3) {
                Some((rng.gen_range(end..n_days + 2), rng.gen_range(0.0..=1.0)))
            } else {
                None
            };
            members.push(Membership {
                ticker: ticker.to_string(),
                intervals,
                delist,
            });
        }
        Some(members)
    } else {
        None
    };

    Instance {
        series,
        decisions,
        universe,
        costs,
        capital: rng.gen_range(1_000.0..1_000_000.0),
    }
}
