//! Gross-to-net friction terms and the itemized per-fill ledger.
//!
//! Market costs for a fill that moves a sleeve's weight by `|dw|` at
//! portfolio value `V` and traded notional `N = |dw| V`:
//!
//! - commission: `c * N`
//! - spread: `(s / 2) * N` (half the quoted spread per side)
//! - impact: `kappa * |dw|^beta * V`
//!
//! Token cost is `(tokens_in + tokens_out) / 1000 * token_price` and is booked
//! at portfolio level. Borrow cost is `borrow_rate * short notional` per day.

use std::collections::BTreeSet;
use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The eight canonical cost components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FrictionComponent {
    Commission,
    Spread,
    Slippage,
    MarketImpact,
    Latency,
    Financing,
    Taxes,
    TokenCost,
}

impl FrictionComponent {
    pub const ALL: [FrictionComponent; 8] = [
        FrictionComponent::Commission,
        FrictionComponent::Spread,
        FrictionComponent::Slippage,
        FrictionComponent::MarketImpact,
        FrictionComponent::Latency,
        FrictionComponent::Financing,
        FrictionComponent::Taxes,
        FrictionComponent::TokenCost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FrictionComponent::Commission => "commission",
            FrictionComponent::Spread => "spread",
            FrictionComponent::Slippage => "slippage",
            FrictionComponent::MarketImpact => "market_impact",
            FrictionComponent::Latency => "latency",
            FrictionComponent::Financing => "financing",
            FrictionComponent::Taxes => "taxes",
            FrictionComponent::TokenCost => "token_cost",
        }
    }
}

impl fmt::Display for FrictionComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrictionComponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FrictionComponent::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = FrictionComponent::ALL.iter().map(|c| c.as_str()).collect();
                Error::validation(
                    "friction component",
                    format!(
                        "unknown component `{s}`; expected one of {}",
                        names.join(", ")
                    ),
                )
            })
    }
}

impl TryFrom<String> for FrictionComponent {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FrictionComponent> for String {
    fn from(c: FrictionComponent) -> String {
        c.as_str().to_string()
    }
}

fn default_beta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionSpec {
    pub commission_rate: f64,
    pub kappa: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub token_price: f64,
    pub latency_bars: usize,
    /// Daily rate on short notional. Shorts are rejected when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub borrow_rate: Option<f64>,
}

impl FrictionSpec {
    pub fn zero() -> Self {
        Self {
            commission_rate: 0.0,
            kappa: 0.0,
            beta: 1.0,
            token_price: 0.0,
            latency_bars: 0,
            borrow_rate: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("commission_rate", self.commission_rate),
            ("kappa", self.kappa),
            ("token_price", self.token_price),
            ("borrow_rate", self.borrow_rate.unwrap_or(0.0)),
        ];
        for (name, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(
                    "friction spec",
                    format!("{name} = {v} must be >= 0"),
                ));
            }
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::validation(
                "friction spec",
                format!("beta = {} must be > 0", self.beta),
            ));
        }
        Ok(())
    }

    /// Components this spec actually charges when run through the engine.
    /// Spread is charged only when the price data carries a nonzero spread.
    pub fn charged_components(&self, any_spread: bool) -> BTreeSet<FrictionComponent> {
        let mut out = BTreeSet::new();
        if self.commission_rate > 0.0 {
            out.insert(FrictionComponent::Commission);
        }
        if any_spread {
            out.insert(FrictionComponent::Spread);
        }
        if self.kappa > 0.0 {
            out.insert(FrictionComponent::MarketImpact);
        }
        if self.latency_bars > 0 {
            out.insert(FrictionComponent::Latency);
        }
        if self.borrow_rate.is_some() {
            out.insert(FrictionComponent::Financing);
        }
        if self.token_price > 0.0 {
            out.insert(FrictionComponent::TokenCost);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionLedgerEntry {
    pub date: NaiveDate,
    pub ticker: String,
    pub commission: f64,
    pub spread_cost: f64,
    pub impact_cost: f64,
    pub token_cost: f64,
    pub borrow_cost: f64,
}

impl FrictionLedgerEntry {
    pub fn empty(date: NaiveDate, ticker: impl Into<String>) -> Self {
        Self {
            date,
            ticker: ticker.into(),
            commission: 0.0,
            spread_cost: 0.0,
            impact_cost: 0.0,
            token_cost: 0.0,
            borrow_cost: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.commission + self.spread_cost + self.impact_cost + self.token_cost + self.borrow_cost
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            date: self.date,
            ticker: self.ticker.clone(),
            commission: self.commission * factor,
            spread_cost: self.spread_cost * factor,
            impact_cost: self.impact_cost * factor,
            token_cost: self.token_cost * factor,
            borrow_cost: self.borrow_cost * factor,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.total() == 0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TradeFill {
    /// Traded notional in currency.
    pub notional: f64,
    /// Absolute weight change |dw|.
    pub turnover: f64,
    /// Full spread as a fraction of price.
    pub spread: f64,
    /// Portfolio (sleeve) value at the decision, the impact base.
    pub portfolio_value: f64,
}

/// Commission, spread and impact for one fill.
pub fn trade_costs(
    date: NaiveDate,
    ticker: &str,
    fill: TradeFill,
    spec: &FrictionSpec,
) -> Result<FrictionLedgerEntry> {
    let fields = [
        ("notional", fill.notional),
        ("turnover", fill.turnover),
        ("spread", fill.spread),
        ("portfolio_value", fill.portfolio_value),
    ];
    if let Some((name, v)) = fields.iter().find(|(_, v)| !(*v >= 0.0)) {
        return Err(Error::contract(format!(
            "trade_costs: {name} = {v} must be >= 0"
        )));
    }
    let mut entry = FrictionLedgerEntry::empty(date, ticker);
    if fill.turnover == 0.0 {
        return Ok(entry);
    }
    entry.commission = spec.commission_rate * fill.notional;
    entry.spread_cost = fill.spread / 2.0 * fill.notional;
    entry.impact_cost = spec.kappa * fill.turnover.powf(spec.beta) * fill.portfolio_value;
    Ok(entry)
}

pub fn token_cost(tokens_in: u64, tokens_out: u64, spec: &FrictionSpec) -> f64 {
    (tokens_in + tokens_out) as f64 / 1000.0 * spec.token_price
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub commission: f64,
    pub spread_cost: f64,
    pub impact_cost: f64,
    pub token_cost: f64,
    pub borrow_cost: f64,
    pub total: f64,
}

impl Add for LedgerTotals {
    type Output = LedgerTotals;

    fn add(self, o: LedgerTotals) -> LedgerTotals {
        LedgerTotals {
            commission: self.commission + o.commission,
            spread_cost: self.spread_cost + o.spread_cost,
            impact_cost: self.impact_cost + o.impact_cost,
            token_cost: self.token_cost + o.token_cost,
            borrow_cost: self.borrow_cost + o.borrow_cost,
            total: self.total + o.total,
        }
    }
}

impl Sum for LedgerTotals {
    fn sum<I: Iterator<Item = LedgerTotals>>(iter: I) -> Self {
        iter.fold(LedgerTotals::default(), Add::add)
    }
}

pub fn ledger_sum<'a, I>(entries: I) -> LedgerTotals
where
    I: IntoIterator<Item = &'a FrictionLedgerEntry>,
{
    let mut t = entries
        .into_iter()
        .fold(LedgerTotals::default(), |acc, e| LedgerTotals {
            commission: acc.commission + e.commission,
            spread_cost: acc.spread_cost + e.spread_cost,
            impact_cost: acc.impact_cost + e.impact_cost,
            token_cost: acc.token_cost + e.token_cost,
            borrow_cost: acc.borrow_cost + e.borrow_cost,
            total: 0.0,
        });
    t.total = t.commission + t.spread_cost + t.impact_cost + t.token_cost + t.borrow_cost;
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemCoverage {
    pub name: String,
    pub modeled: BTreeSet<FrictionComponent>,
}

impl SystemCoverage {
    pub fn from_names<S: AsRef<str>>(name: impl Into<String>, modeled: &[S]) -> Result<Self> {
        let modeled = modeled
            .iter()
            .map(|s| s.as_ref().parse())
            .collect::<Result<BTreeSet<_>>>()?;
        Ok(Self {
            name: name.into(),
            modeled,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub system: String,
    /// One flag per entry of [`FrictionComponent::ALL`], in that order.
    pub modeled: [bool; 8],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageMatrix {
    pub components: [FrictionComponent; 8],
    pub rows: Vec<CoverageRow>,
    pub unmodeled_cells: usize,
    pub total_cells: usize,
}

pub fn coverage_matrix(systems: &[SystemCoverage]) -> CoverageMatrix {
    let rows: Vec<CoverageRow> = systems
        .iter()
        .map(|s| CoverageRow {
            system: s.name.clone(),
            modeled: FrictionComponent::ALL.map(|c| s.modeled.contains(&c)),
        })
        .collect();
    let unmodeled = rows.iter().flat_map(|r| r.modeled).filter(|m| !m).count();
    CoverageMatrix {
        components: FrictionComponent::ALL,
        total_cells: rows.len() * 8,
        rows,
        unmodeled_cells: unmodeled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2025, 1, 2).unwrap()
    }

    fn fill(notional: f64, turnover: f64, spread: f64) -> TradeFill {
        TradeFill {
            notional,
            turnover,
            spread,
            portfolio_value: 100_000.0,
        }
    }

    #[test]
    fn commission_and_half_spread() {
        let spec = FrictionSpec {
            commission_rate: 0.001,
            ..FrictionSpec::zero()
        };
        let e = trade_costs(day(), "X", fill(10_000.0, 0.1, 0.001), &spec).unwrap();
        assert!((e.commission - 10.0).abs() < 1e-12);
        assert!((e.spread_cost - 5.0).abs() < 1e-12);
    }

    #[test]
    fn impact_is_power_of_turnover_times_value() {
        let spec = FrictionSpec {
            kappa: 0.01,
            beta: 1.5,
            ..FrictionSpec::zero()
        };
        let e = trade_costs(day(), "X", fill(25_000.0, 0.25, 0.0), &spec).unwrap();
        assert!((e.impact_cost - 0.01 * 0.125 * 100_000.0).abs() < 1e-9);
    }

    #[test]
    fn zero_turnover_costs_nothing() {
        let spec = FrictionSpec {
            commission_rate: 0.01,
            kappa: 0.5,
            beta: 0.5,
            ..FrictionSpec::zero()
        };
        let e = trade_costs(day(), "X", fill(10_000.0, 0.0, 0.02), &spec).unwrap();
        assert!(e.is_zero());
    }

    #[test]
    fn negative_input_is_contract_violation() {
        let e = trade_costs(day(), "X", fill(-1.0, 0.1, 0.0), &FrictionSpec::zero());
        assert!(matches!(e, Err(Error::Contract(_))));
    }

    #[test]
    fn token_costs() {
        let spec = |p| FrictionSpec {
            token_price: p,
            ..FrictionSpec::zero()
        };
        assert!((token_cost(1500, 500, &spec(0.01)) - 0.02).abs() < 1e-15);
        assert_eq!(token_cost(0, 0, &spec(0.01)), 0.0);
        assert!((token_cost(1000, 500, &spec(0.02)) - 0.03).abs() < 1e-15);
    }

    #[test]
    fn ledger_sums() {
        assert_eq!(ledger_sum(&[]), LedgerTotals::default());
        let mut a = FrictionLedgerEntry::empty(day(), "X");
        a.commission = 10.0;
        let mut b = FrictionLedgerEntry::empty(day(), "Y");
        b.commission = 5.0;
        b.borrow_cost = 1.0;
        let t = ledger_sum(&[a, b]);
        assert_eq!(t.commission, 15.0);
        assert_eq!(t.total, 16.0);
    }

    #[test]
    fn five_day_ledger_matches_resummation() {
        let entries: Vec<FrictionLedgerEntry> = (0..5)
            .map(|i| FrictionLedgerEntry {
                date: day() + chrono::Days::new(i),
                ticker: "X".into(),
                commission: 1.25 * i as f64,
                spread_cost: 0.5 + i as f64,
                impact_cost: 0.1 * (i * i) as f64,
                token_cost: 0.02,
                borrow_cost: if i % 2 == 0 { 0.3 } else { 0.0 },
            })
            .collect();
        // independent: field-by-field loop over a flat value list
        let mut brute = 0.0;
        for e in &entries {
            for v in [
                e.commission,
                e.spread_cost,
                e.impact_cost,
                e.token_cost,
                e.borrow_cost,
            ] {
                brute += v;
            }
        }
        assert!((ledger_sum(&entries).total - brute).abs() < 1e-12);
        assert!((brute - 29.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_counts() {
        let all = SystemCoverage {
            name: "full".into(),
            modeled: FrictionComponent::ALL.into_iter().collect(),
        };
        assert_eq!(coverage_matrix(&[all]).unmodeled_cells, 0);
        let one = SystemCoverage::from_names("c", &["commission"]).unwrap();
        let m = coverage_matrix(&[one]);
        assert_eq!((m.unmodeled_cells, m.total_cells), (7, 8));
        let err = SystemCoverage::from_names("bad", &["fees"])
            .unwrap_err()
            .to_string();
        for c in FrictionComponent::ALL {
            assert!(err.contains(c.as_str()));
        }
    }

    fn entry_vec(e: &FrictionLedgerEntry) -> [f64; 5] {
        [
            e.commission,
            e.spread_cost,
            e.impact_cost,
            e.token_cost,
            e.borrow_cost,
        ]
    }

    proptest! {
        #[test]
        fn ledger_sum_is_additive(xs in proptest::collection::vec(0.0f64..100.0, 0..40), split in 0usize..40) {
            let entries: Vec<FrictionLedgerEntry> = xs.iter().map(|&x| FrictionLedgerEntry {
                commission: x, spread_cost: x / 3.0, impact_cost: x * 0.7, token_cost: 0.01, borrow_cost: x / 11.0,
                ..FrictionLedgerEntry::empty(day(), "X")
            }).collect();
            let k = split.min(entries.len());
            let whole = ledger_sum(&entries);
            let parts = ledger_sum(&entries[..k]) + ledger_sum(&entries[k..]);
            prop_assert!((whole.total - parts.total).abs() <= 1e-9 * (1.0 + whole.total));
            prop_assert!((whole.commission - parts.commission).abs() <= 1e-9 * (1.0 + whole.commission));
        }

        #[test]
        fn raising_a_rate_never_lowers_a_component(
            c in 0.0f64..0.01, k in 0.0f64..0.05, b in 0.2f64..3.0, bump in 0.0f64..0.01,
            which in 0usize..3, notional in 0.0f64..1e6, turnover in 0.0f64..2.0, spread in 0.0f64..0.01,
        ) {
            let base = FrictionSpec { commission_rate: c, kappa: k, beta: b, ..FrictionSpec::zero() };
            let mut up = base;
            match which {
                0 => up.commission_rate += bump,
                1 => up.kappa += bump,
                _ => up.token_price += bump,
            }
            let f = TradeFill { notional, turnover, spread, portfolio_value: 1e5 };
            let lo = trade_costs(day(), "X", f, &base).unwrap();
            let hi = trade_costs(day(), "X", f, &up).unwrap();
            for (a, z) in entry_vec(&lo).iter().zip(entry_vec(&hi)) {
                prop_assert!(z >= *a);
            }
            prop_assert!(token_cost(100, 100, &up) >= token_cost(100, 100, &base));
        }

        #[test]
        fn zero_spec_on_spreadless_data_costs_nothing(notional in 0.0f64..1e6, turnover in 0.0f64..2.0) {
            let f = TradeFill { notional, turnover, spread: 0.0, portfolio_value: 1e5 };
            prop_assert!(trade_costs(day(), "X", f, &FrictionSpec::zero()).unwrap().is_zero());
        }
    }
}
