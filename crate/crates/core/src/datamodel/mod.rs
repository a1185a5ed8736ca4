//! Domain types and loaders for the three input formats: price CSVs,
//! line-delimited decision logs, and the TOML manifest.
//!
//! Every type here is validated on construction and immutable afterwards.
//! Optional inputs stay `Option`; nothing is imputed.

mod load;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::friction::{FrictionComponent, FrictionSpec};

pub use load::{
    load_calibration_trials, load_counterfactual_trials, load_decisions, load_manifest,
    load_prices, load_prices_dir, parse_decisions, parse_manifest, parse_prices, write_decisions,
    write_manifest, write_prices,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
    /// Full bid-ask spread as a fraction of price.
    pub spread: f64,
}

impl PriceBar {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| {
            Err(Error::validation(
                "price bar",
                format!("{}: {msg}", self.date),
            ))
        };
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return bad("prices must be finite and > 0");
        }
        if self.low > self.open.min(self.close) {
            return bad("low exceeds min(open, close)");
        }
        if self.high < self.open.max(self.close) {
            return bad("high below max(open, close)");
        }
        if !(self.volume >= 0.0) {
            return bad("volume must be >= 0");
        }
        if !(self.spread >= 0.0) || !self.spread.is_finite() {
            return bad("spread must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    ticker: String,
    bars: Vec<PriceBar>,
}

impl PriceSeries {
    pub fn new(ticker: impl Into<String>, bars: Vec<PriceBar>) -> Result<Self> {
        let ticker = ticker.into();
        if bars.is_empty() {
            return Err(Error::validation(
                "price series",
                format!("{ticker}: no bars"),
            ));
        }
        for bar in &bars {
            bar.validate()?;
        }
        for pair in bars.windows(2) {
            if pair[1].date == pair[0].date {
                return Err(Error::validation(
                    "price series",
                    format!("{ticker}: duplicate date {}", pair[1].date),
                ));
            }
            if pair[1].date < pair[0].date {
                return Err(Error::validation(
                    "price series",
                    format!("{ticker}: dates not increasing at {}", pair[1].date),
                ));
            }
        }
        Ok(Self { ticker, bars })
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn bars(&self) -> &[PriceBar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.bars.binary_search_by_key(&date, |b| b.date).ok()
    }

    /// Bars with `start <= date <= end`, or `None` if nothing is left.
    pub fn clip(&self, start: NaiveDate, end: NaiveDate) -> Option<PriceSeries> {
        let bars: Vec<PriceBar> = self
            .bars
            .iter()
            .filter(|b| b.date >= start && b.date <= end)
            .copied()
            .collect();
        (!bars.is_empty()).then(|| PriceSeries {
            ticker: self.ticker.clone(),
            bars,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Buy,
    Sell,
    Hold,
}

/// What a decision asks the engine to do, after resolving `action` vs
/// `target_weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instruction {
    Hold,
    Target(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRecord {
    pub date: NaiveDate,
    pub ticker: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub latency_ms: u64,
    pub agent_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    /// Debate round, reserved; only token and latency totals are aggregated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
}

impl DecisionRecord {
    pub fn validate(&self) -> Result<()> {
        let ctx = || format!("{} {} {}", self.agent_id, self.ticker, self.date);
        match (self.action, self.target_weight) {
            (Some(_), Some(_)) => {
                return Err(Error::validation(
                    "decision",
                    format!("{}: both action and target_weight present", ctx()),
                ))
            }
            (None, None) => {
                return Err(Error::validation(
                    "decision",
                    format!("{}: neither action nor target_weight present", ctx()),
                ))
            }
            (None, Some(w)) if !(-1.0..=1.0).contains(&w) => {
                return Err(Error::validation(
                    "decision",
                    format!("{}: target_weight {w} outside [-1, 1]", ctx()),
                ))
            }
            _ => {}
        }
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::validation(
                    "decision",
                    format!("{}: confidence {c} outside [0, 1]", ctx()),
                ));
            }
        }
        Ok(())
    }

    /// buy -> full sleeve long, sell -> flat, hold -> no trade; an explicit
    /// target weight is used as given.
    pub fn instruction(&self) -> Instruction {
        match (self.target_weight, self.action) {
            (Some(w), _) => Instruction::Target(w),
            (None, Some(Action::Buy)) => Instruction::Target(1.0),
            (None, Some(Action::Sell)) => Instruction::Target(0.0),
            _ => Instruction::Hold,
        }
    }

    pub fn tokens(&self) -> u64 {
        self.tokens_in + self.tokens_out
    }
}

/// Decision records sorted by `(agent_id, ticker, date)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecisionLog {
    records: Vec<DecisionRecord>,
}

impl DecisionLog {
    pub fn new(mut records: Vec<DecisionRecord>) -> Result<Self> {
        for r in &records {
            r.validate()?;
        }
        records.sort_by(|a, b| {
            (a.agent_id.as_str(), a.ticker.as_str(), a.date).cmp(&(
                b.agent_id.as_str(),
                b.ticker.as_str(),
                b.date,
            ))
        });
        for pair in records.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.agent_id == b.agent_id && a.ticker == b.ticker && a.date == b.date {
                return Err(Error::validation(
                    "decision log",
                    format!(
                        "duplicate record for {} {} {}",
                        a.agent_id, a.ticker, a.date
                    ),
                ));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[DecisionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn agents(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.agent_id.as_str()).collect()
    }

    pub fn for_agent(&self, agent_id: &str) -> DecisionLog {
        DecisionLog {
            records: self
                .records
                .iter()
                .filter(|r| r.agent_id == agent_id)
                .cloned()
                .collect(),
        }
    }

    /// Records of one agent for one ticker, in date order.
    pub fn group(&self, agent_id: &str, ticker: &str) -> &[DecisionRecord] {
        let key = (agent_id, ticker);
        let start = self
            .records
            .partition_point(|r| (r.agent_id.as_str(), r.ticker.as_str()) < key);
        let end = self
            .records
            .partition_point(|r| (r.agent_id.as_str(), r.ticker.as_str()) <= key);
        &self.records[start..end]
    }

    pub fn merge(&self, other: &DecisionLog) -> Result<DecisionLog> {
        let mut all = self.records.clone();
        all.extend(other.records.iter().cloned());
        DecisionLog::new(all)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseMembership {
    pub ticker: String,
    /// Inclusive `[start, end]` tradable intervals.
    pub intervals: Vec<(NaiveDate, NaiveDate)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delist_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delist_recovery: Option<f64>,
}

impl UniverseMembership {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| {
            Err(Error::validation(
                "universe membership",
                format!("{}: {msg}", self.ticker),
            ))
        };
        for &(a, b) in &self.intervals {
            if a > b {
                return bad(format!("interval start {a} after end {b}"));
            }
        }
        for pair in self.intervals.windows(2) {
            if pair[1].0 <= pair[0].1 {
                return bad(format!("intervals overlap or unsorted at {}", pair[1].0));
            }
        }
        match (self.delist_date, self.delist_recovery) {
            (Some(d), Some(r)) => {
                if let Some(&(_, end)) = self.intervals.last() {
                    if d < end {
                        return bad(format!("delist_date {d} before last interval end {end}"));
                    }
                }
                if !(0.0..=1.0).contains(&r) {
                    return bad(format!("delist_recovery {r} outside [0, 1]"));
                }
            }
            (Some(_), None) => return bad("delist_date without delist_recovery".into()),
            (None, Some(_)) => return bad("delist_recovery without delist_date".into()),
            (None, None) => {}
        }
        Ok(())
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        let listed = self.delist_date.is_none_or(|d| date <= d);
        listed && self.intervals.iter().any(|&(a, b)| a <= date && date <= b)
    }
}

/// Point-in-time tradable universe. An empty universe means no membership
/// data was supplied and nothing is enforced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Universe {
    members: BTreeMap<String, UniverseMembership>,
}

impl Universe {
    pub fn new(members: Vec<UniverseMembership>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for m in members {
            m.validate()?;
            let ticker = m.ticker.clone();
            if map.insert(ticker.clone(), m).is_some() {
                return Err(Error::validation(
                    "universe",
                    format!("{ticker} listed more than once"),
                ));
            }
        }
        Ok(Self { members: map })
    }

    pub fn is_supplied(&self) -> bool {
        !self.members.is_empty()
    }

    pub fn get(&self, ticker: &str) -> Option<&UniverseMembership> {
        self.members.get(ticker)
    }

    pub fn tradable(&self, ticker: &str, date: NaiveDate) -> bool {
        if !self.is_supplied() {
            return true;
        }
        self.members.get(ticker).is_some_and(|m| m.contains(date))
    }

    pub fn members(&self) -> impl Iterator<Item = &UniverseMembership> {
        self.members.values()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClaimTier {
    Extractor,
    Prototype,
    Deployable,
    Autonomous,
}

impl ClaimTier {
    pub const ALL: [ClaimTier; 4] = [
        ClaimTier::Extractor,
        ClaimTier::Prototype,
        ClaimTier::Deployable,
        ClaimTier::Autonomous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClaimTier::Extractor => "extractor",
            ClaimTier::Prototype => "prototype",
            ClaimTier::Deployable => "deployable",
            ClaimTier::Autonomous => "autonomous",
        }
    }
}

impl fmt::Display for ClaimTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The audit manifest: model identity and cutoff metadata, the evaluation
/// window, declared frictions, the claim being made, and the universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge_cutoff: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_training_boundary: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_corpus_max_date: Option<NaiveDate>,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    #[serde(default)]
    pub frictions_modeled: BTreeSet<FrictionComponent>,
    #[serde(default)]
    pub frictions_not_applicable: BTreeSet<FrictionComponent>,
    pub claim_tier: ClaimTier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_adjustment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_in_time_attestation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ece_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_capital: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<FrictionSpec>,
    #[serde(default)]
    pub universe: Vec<UniverseMembership>,
}

impl CutoffManifest {
    pub fn validate(&self) -> Result<()> {
        if self.window_start >= self.window_end {
            return Err(Error::validation(
                "manifest",
                format!(
                    "window_start {} must be before window_end {}",
                    self.window_start, self.window_end
                ),
            ));
        }
        if let Some(t) = self.ece_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::validation(
                    "manifest",
                    format!("ece_threshold {t} outside [0, 1]"),
                ));
            }
        }
        if let Some(grid) = &self.rho_grid {
            if let Some(r) = grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(Error::validation(
                    "manifest",
                    format!("rho_grid value {r} outside [0, 1]"),
                ));
            }
        }
        if let Some(c) = self.initial_capital {
            if !(c > 0.0) {
                return Err(Error::validation(
                    "manifest",
                    format!("initial_capital {c} must be > 0"),
                ));
            }
        }
        if let Some(both) = self
            .frictions_modeled
            .intersection(&self.frictions_not_applicable)
            .next()
        {
            return Err(Error::validation(
                "manifest",
                format!("{both} is both modeled and attested not-applicable"),
            ));
        }
        if let Some(spec) = &self.friction {
            spec.validate()?;
        }
        Universe::new(self.universe.clone())?;
        Ok(())
    }

    /// Latest of the knowledge cutoff, post-training boundary and retrieval
    /// corpus date, over those present. `None` without a knowledge cutoff.
    pub fn effective_cutoff(&self) -> Option<NaiveDate> {
        let cutoff = self.knowledge_cutoff?;
        Some(
            [self.post_training_boundary, self.retrieval_corpus_max_date]
                .into_iter()
                .flatten()
                .fold(cutoff, NaiveDate::max),
        )
    }

    pub fn universe(&self) -> Result<Universe> {
        Universe::new(self.universe.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Long,
    Short,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfactualTrial {
    pub trial_id: String,
    pub rho: f64,
    pub baseline_view: View,
    pub updated_view: View,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence_before: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence_after: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_before: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_after: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<String>,
    /// Reserved. Not consumed by any statistic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
}

impl CounterfactualTrial {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::validation(
                "counterfactual trial",
                format!("{}: rho {} outside [0, 1]", self.trial_id, self.rho),
            ));
        }
        for c in [self.confidence_before, self.confidence_after]
            .into_iter()
            .flatten()
        {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::validation(
                    "counterfactual trial",
                    format!("{}: confidence {c} outside [0, 1]", self.trial_id),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn bar(date: &str, close: f64) -> PriceBar {
        PriceBar {
            date: d(date),
            open: close,
            high: close,
            low: close,
            close,
            volume: 0.0,
            spread: 0.0,
        }
    }

    fn record(agent: &str, ticker: &str, date: &str) -> DecisionRecord {
        DecisionRecord {
            date: d(date),
            ticker: ticker.into(),
            action: Some(Action::Hold),
            target_weight: None,
            confidence: None,
            tokens_in: 0,
            tokens_out: 0,
            latency_ms: 0,
            agent_id: agent.into(),
            rationale: None,
            round: None,
        }
    }

    #[test]
    fn series_rejects_duplicates_and_disorder() {
        let dup = PriceSeries::new("X", vec![bar("2025-01-02", 1.0), bar("2025-01-02", 1.0)]);
        assert!(dup.unwrap_err().to_string().contains("duplicate"));
        let back = PriceSeries::new("X", vec![bar("2025-01-03", 1.0), bar("2025-01-02", 1.0)]);
        assert!(back.is_err());
        assert!(PriceSeries::new("X", vec![]).is_err());
    }

    #[test]
    fn bar_invariants() {
        let mut b = bar("2025-01-02", 10.0);
        b.low = 11.0;
        b.high = 12.0;
        let err = b.validate().unwrap_err().to_string();
        assert!(err.contains("2025-01-02"), "{err}");
        let mut b = bar("2025-01-02", 10.0);
        b.spread = -0.1;
        assert!(b.validate().is_err());
    }

    #[test]
    fn instruction_mapping() {
        let mut r = record("a", "X", "2025-01-02");
        assert_eq!(r.instruction(), Instruction::Hold);
        r.action = Some(Action::Buy);
        assert_eq!(r.instruction(), Instruction::Target(1.0));
        r.action = Some(Action::Sell);
        assert_eq!(r.instruction(), Instruction::Target(0.0));
        r.action = None;
        r.target_weight = Some(-0.5);
        assert_eq!(r.instruction(), Instruction::Target(-0.5));
    }

    #[test]
    fn log_groups_and_rejects_duplicates() {
        let log = DecisionLog::new(vec![
            record("b", "X", "2025-01-03"),
            record("a", "Y", "2025-01-02"),
            record("a", "X", "2025-01-05"),
            record("a", "X", "2025-01-02"),
        ])
        .unwrap();
        let g = log.group("a", "X");
        assert_eq!(g.len(), 2);
        assert!(g[0].date < g[1].date);
        assert_eq!(log.group("a", "Z").len(), 0);
        assert_eq!(log.agents().len(), 2);
        assert!(DecisionLog::new(vec![
            record("a", "X", "2025-01-02"),
            record("a", "X", "2025-01-02")
        ])
        .is_err());
    }

    #[test]
    fn membership_rules() {
        let m = UniverseMembership {
            ticker: "X".into(),
            intervals: vec![
                (d("2025-01-01"), d("2025-01-10")),
                (d("2025-02-01"), d("2025-02-10")),
            ],
            delist_date: Some(d("2025-02-05")),
            delist_recovery: Some(0.3),
        };
        m.validate().unwrap_err(); // delist before last interval end
        let m = UniverseMembership {
            delist_date: Some(d("2025-02-10")),
            ..m
        };
        m.validate().unwrap();
        assert!(m.contains(d("2025-01-05")));
        assert!(!m.contains(d("2025-01-15")));
        assert!(m.contains(d("2025-02-10")));
        let overlapping = UniverseMembership {
            ticker: "X".into(),
            intervals: vec![
                (d("2025-01-01"), d("2025-01-10")),
                (d("2025-01-10"), d("2025-01-20")),
            ],
            delist_date: None,
            delist_recovery: None,
        };
        assert!(overlapping.validate().is_err());
        let u = Universe::new(vec![m]).unwrap();
        assert!(!u.tradable("Y", d("2025-01-05")));
        assert!(Universe::default().tradable("Y", d("2025-01-05")));
    }

    #[test]
    fn tier_order() {
        assert!(ClaimTier::Extractor < ClaimTier::Prototype);
        assert!(ClaimTier::Deployable < ClaimTier::Autonomous);
    }
}
