//! Multi-agent disaggregation: how much agents disagree, how alike their
//! action streams are, and whether the ensemble beats its best member net of
//! the extra tokens and latency it spends.
//!
//! Agreement is measured on stances derived from each record, over the
//! `(date, ticker)` cells every compared agent has a record for. The
//! consensus log (`agent_id = "__consensus__"`) is never compared.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::{curve_metrics, EquityCurve};
use crate::datamodel::{Action, DecisionLog, DecisionRecord};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::sharpestats::SharpeConvention;

pub const CONSENSUS_AGENT: &str = "__consensus__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Long,
    Flat,
    Short,
    Hold,
}

impl Stance {
    pub fn of(r: &DecisionRecord) -> Stance {
        match (r.target_weight, r.action) {
            (Some(w), _) if w > 0.0 => Stance::Long,
            (Some(w), _) if w < 0.0 => Stance::Short,
            (Some(_), _) => Stance::Flat,
            (None, Some(Action::Buy)) => Stance::Long,
            (None, Some(Action::Sell)) => Stance::Flat,
            _ => Stance::Hold,
        }
    }
}

type Cell = (NaiveDate, String);

/// Stance per cell for each non-consensus agent.
fn stances(log: &DecisionLog) -> Result<BTreeMap<String, BTreeMap<Cell, Stance>>> {
    let mut out: BTreeMap<String, BTreeMap<Cell, Stance>> = BTreeMap::new();
    for r in log
        .records()
        .iter()
        .filter(|r| r.agent_id != CONSENSUS_AGENT)
    {
        out.entry(r.agent_id.clone())
            .or_default()
            .insert((r.date, r.ticker.clone()), Stance::of(r));
    }
    if out.len() < 2 {
        return Err(Error::contract(format!(
            "disaggregation needs at least 2 agents besides {CONSENSUS_AGENT}, got {}",
            out.len()
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub rate: f64,
    pub cells: usize,
    /// Cells seen by fewer than two agents.
    pub excluded_cells: usize,
}

pub fn disagreement_rate(log: &DecisionLog) -> Result<Disagreement> {
    let by_agent = stances(log)?;
    let mut cells: BTreeMap<&Cell, BTreeSet<Stance>> = BTreeMap::new();
    let mut seen: BTreeMap<&Cell, usize> = BTreeMap::new();
    for m in by_agent.values() {
        for (cell, s) in m {
            cells.entry(cell).or_default().insert(*s);
            *seen.entry(cell).or_default() += 1;
        }
    }
    let (mut n, mut split, mut excluded) = (0usize, 0usize, 0usize);
    for (cell, set) in &cells {
        if seen[cell] < 2 {
            excluded += 1;
            continue;
        }
        n += 1;
        split += (set.len() > 1) as usize;
    }
    if n == 0 {
        return Err(Error::contract("no decision cell is shared by two agents"));
    }
    Ok(Disagreement {
        rate: split as f64 / n as f64,
        cells: n,
        excluded_cells: excluded,
    })
}

/// Pairwise action-agreement fractions. `values[i][j]` is `None` when agents
/// `i` and `j` share no cell; the diagonal is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub agents: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl SimilarityMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.agents.iter().position(|x| x == a)?;
        let j = self.agents.iter().position(|x| x == b)?;
        self.values[i][j]
    }
}

pub fn role_similarity(log: &DecisionLog, exec: Exec) -> Result<SimilarityMatrix> {
    let by_agent = stances(log)?;
    let agents: Vec<&String> = by_agent.keys().collect();
    let n = agents.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let sims = exec.map(&pairs, |&(i, j)| {
        let (a, b) = (&by_agent[agents[i]], &by_agent[agents[j]]);
        let (mut shared, mut agree) = (0usize, 0usize);
        for (cell, s) in a {
            if let Some(t) = b.get(cell) {
                shared += 1;
                agree += (s == t) as usize;
            }
        }
        (shared > 0).then(|| agree as f64 / shared as f64)
    });
    let mut values = vec![vec![None; n]; n];
    for (i, row) in values.iter_mut().enumerate() {
        row[i] = Some(1.0);
    }
    for (&(i, j), s) in pairs.iter().zip(sims) {
        values[i][j] = s;
        values[j][i] = s;
    }
    Ok(SimilarityMatrix {
        agents: agents.into_iter().cloned().collect(),
        values,
    })
}

/// Token and latency totals over a set of decision records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub tokens: u64,
    pub latency_ms: u64,
}

impl Usage {
    pub fn of<'a>(records: impl IntoIterator<Item = &'a DecisionRecord>) -> Usage {
        records.into_iter().fold(Usage::default(), |u, r| Usage {
            tokens: u.tokens + r.tokens(),
            latency_ms: u.latency_ms + r.latency_ms,
        })
    }
}

pub struct SingleAgentRun<'a> {
    pub agent_id: &'a str,
    pub curve: &'a EquityCurve,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiAgentDelta {
    pub multi_net_cr: f64,
    pub best_single_agent: String,
    pub best_single_net_cr: f64,
    pub net_return_delta: f64,
    /// Ensemble usage minus the best single agent's; negative when the
    /// ensemble is cheaper.
    pub coordination_tokens: i64,
    pub coordination_latency_ms: i64,
}

fn net_cr(curve: &EquityCurve) -> Result<f64> {
    Ok(curve_metrics(curve, SharpeConvention::Period)?
        .net
        .cumulative_return)
}

/// Curves must sit on one date grid. A shorter curve is accepted only when
/// it ended in bankruptcy on a prefix of that grid.
fn check_aligned(a: &EquityCurve, b: &EquityCurve, name: &str) -> Result<()> {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let prefix = long.dates.starts_with(&short.dates);
    if prefix && (short.len() == long.len() || short.bankrupt_on.is_some()) {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "equity curve of {name} is not on the multi-agent date grid"
        )))
    }
}

pub fn multiagent_delta(
    multi: &EquityCurve,
    multi_usage: Usage,
    singles: &[SingleAgentRun<'_>],
) -> Result<MultiAgentDelta> {
    if singles.is_empty() {
        return Err(Error::contract(
            "multiagent_delta: no single-agent baseline",
        ));
    }
    let mut best: Option<(&SingleAgentRun, f64)> = None;
    for s in singles {
        check_aligned(multi, s.curve, s.agent_id)?;
        let cr = net_cr(s.curve)?;
        if best.is_none_or(|(_, b)| cr > b) {
            best = Some((s, cr));
        }
    }
    let (best, best_cr) = best.expect("nonempty");
    let multi_cr = net_cr(multi)?;
    Ok(MultiAgentDelta {
        multi_net_cr: multi_cr,
        best_single_agent: best.agent_id.to_string(),
        best_single_net_cr: best_cr,
        net_return_delta: multi_cr - best_cr,
        coordination_tokens: multi_usage.tokens as i64 - best.usage.tokens as i64,
        coordination_latency_ms: multi_usage.latency_ms as i64 - best.usage.latency_ms as i64,
    })
}

/// Everything the multi-agent protocol check looks for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentComparison {
    pub agent_ids: Vec<String>,
    pub disagreement: Disagreement,
    pub role_similarity: SimilarityMatrix,
    pub delta: MultiAgentDelta,
}
