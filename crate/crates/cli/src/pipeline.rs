//! Loading, backtesting and evidence assembly shared by the subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use alpha_audit::backtest::{run_backtest_with, BacktestInput, BacktestRun};
use alpha_audit::calibration::{ece, regime_conditioned_ece, CalibrationTrial};
use alpha_audit::counterfactual::{bias_scores_from_trials, monotonicity_verdict_with};
use alpha_audit::datamodel::{
    load_decisions, load_prices_dir, parse_manifest, Action, CounterfactualTrial, CutoffManifest,
    DecisionLog, DecisionRecord, PriceSeries, Universe,
};
use alpha_audit::disaggregation::{
    disagreement_rate, multiagent_delta, role_similarity, AgentComparison, SingleAgentRun, Usage,
    CONSENSUS_AGENT,
};
use alpha_audit::friction::FrictionSpec;
use alpha_audit::par::Exec;
use alpha_audit::protocol::{CalibrationEvidence, CounterfactualEvidence, DisaggregationEvidence};
use alpha_audit::report::{build_backtest_report, sha256_hex, BacktestReport, ReportContext};
use alpha_audit::sharpestats::SharpeConvention;
use alpha_audit::Error;
use anyhow::{bail, Context, Result};

use crate::args::RunInputs;

pub const DEFAULT_CAPITAL: f64 = 100_000.0;

pub const CORRECTNESS_RULE: &str =
    "decisions with a confidence are scored on the next bar's close-to-close return: \
buy or positive weight is correct iff the return is > 0, sell or negative weight iff it is < 0; \
holds and zero weights are excluded";

pub const CONFIDENCE_SHIFT: &str = "signed mean of confidence_before - confidence_after";

pub struct LoadedManifest {
    pub manifest: CutoffManifest,
    pub sha256: String,
}

pub fn load_manifest(path: &Path) -> Result<LoadedManifest> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let text = String::from_utf8(bytes.clone())
        .with_context(|| format!("manifest {} is not UTF-8", path.display()))?;
    Ok(LoadedManifest {
        manifest: parse_manifest(&text, path)?,
        sha256: sha256_hex(&bytes),
    })
}

pub struct Inputs {
    pub manifest: CutoffManifest,
    pub manifest_sha256: String,
    pub prices: BTreeMap<String, PriceSeries>,
    pub log: DecisionLog,
    pub universe: Universe,
    pub spec: FrictionSpec,
    pub capital: f64,
    pub convention: SharpeConvention,
    /// Agent whose decisions are executed.
    pub agent: String,
}

/// Prices restricted to the manifest window; tickers with no bar inside it
/// are dropped.
fn clip_prices(
    all: BTreeMap<String, PriceSeries>,
    m: &CutoffManifest,
) -> Result<BTreeMap<String, PriceSeries>> {
    let clipped: BTreeMap<_, _> = all
        .into_iter()
        .filter_map(|(t, s)| Some((t, s.clip(m.window_start, m.window_end)?)))
        .collect();
    if clipped.is_empty() {
        bail!(
            "no price bars inside the window {}..{}",
            m.window_start,
            m.window_end
        );
    }
    Ok(clipped)
}

pub fn system_agent(log: &DecisionLog, requested: Option<&str>) -> Result<String> {
    let agents = log.agents();
    if let Some(a) = requested {
        if !agents.contains(a) {
            bail!("agent {a} has no records; agents in log: {agents:?}");
        }
        return Ok(a.to_string());
    }
    if agents.contains(CONSENSUS_AGENT) {
        return Ok(CONSENSUS_AGENT.to_string());
    }
    match agents.len() {
        0 => bail!("decision log is empty"),
        1 => Ok(agents.into_iter().next().unwrap().to_string()),
        _ => bail!("decision log holds agents {agents:?}; choose one with --agent"),
    }
}

pub fn load_inputs(run: &RunInputs) -> Result<Inputs> {
    let LoadedManifest { manifest, sha256 } = load_manifest(&run.manifest)?;
    if !run.prices.is_dir() {
        bail!("prices directory {} does not exist", run.prices.display());
    }
    let prices = clip_prices(load_prices_dir(&run.prices)?, &manifest)?;
    let log = load_decisions(&run.decisions)?;
    let agent = system_agent(&log, run.agent.as_deref())?;
    Ok(Inputs {
        universe: manifest.universe()?,
        spec: manifest.friction.unwrap_or_else(FrictionSpec::zero),
        capital: manifest.initial_capital.unwrap_or(DEFAULT_CAPITAL),
        manifest,
        manifest_sha256: sha256,
        prices,
        log,
        convention: run.k,
        agent,
    })
}

fn backtest_log(inputs: &Inputs, log: &DecisionLog, trader: Option<&str>) -> Result<BacktestRun> {
    Ok(run_backtest_with(
        &BacktestInput {
            prices: &inputs.prices,
            decisions: log,
            trader,
            universe: &inputs.universe,
            spec: &inputs.spec,
            initial_capital: inputs.capital,
        },
        Exec::default(),
    )?)
}

pub fn run_system(inputs: &Inputs) -> Result<(BacktestRun, BacktestReport)> {
    let run = backtest_log(inputs, &inputs.log, Some(&inputs.agent))?;
    let report = build_backtest_report(
        &run,
        &ReportContext {
            manifest_sha256: inputs.manifest_sha256.clone(),
            agent_id: Some(inputs.agent.clone()),
            prices: &inputs.prices,
            universe: &inputs.universe,
            spec: &inputs.spec,
            initial_capital: inputs.capital,
            convention: inputs.convention,
            window: (inputs.manifest.window_start, inputs.manifest.window_end),
        },
    )?;
    Ok((run, report))
}

fn direction(r: &DecisionRecord) -> Option<f64> {
    match (r.target_weight, r.action) {
        (Some(w), _) if w != 0.0 => Some(w.signum()),
        (None, Some(Action::Buy)) => Some(1.0),
        (None, Some(Action::Sell)) => Some(-1.0),
        _ => None,
    }
}

/// Calibration trials from an agent's decisions; see [`CORRECTNESS_RULE`].
pub fn trials_from_decisions(
    log: &DecisionLog,
    agent: &str,
    prices: &BTreeMap<String, PriceSeries>,
) -> Vec<CalibrationTrial> {
    let mut out = Vec::new();
    for r in log.records().iter().filter(|r| r.agent_id == agent) {
        let Some(dir) = direction(r) else { continue };
        let Some(series) = prices.get(&r.ticker) else {
            continue;
        };
        let Some(i) = series.index_of(r.date) else {
            continue;
        };
        let Some(next) = series.bars().get(i + 1) else {
            continue;
        };
        let ret = next.close / series.bars()[i].close - 1.0;
        out.push(CalibrationTrial {
            confidence: r.confidence,
            correct: ret * dir > 0.0,
            regime: None,
            date: Some(r.date),
        });
    }
    out
}

/// `None` when no trial carries a confidence.
pub fn calibration_evidence(
    trials: &[CalibrationTrial],
    bins: usize,
    manifest: Option<&CutoffManifest>,
    rule: &str,
) -> Result<Option<CalibrationEvidence>> {
    if trials.iter().all(|t| t.confidence.is_none()) {
        return Ok(None);
    }
    let r = ece(trials, bins)?;
    let cutoff = manifest.and_then(|m| m.effective_cutoff());
    let out_of_sample = cutoff.is_some_and(|c| {
        trials
            .iter()
            .filter(|t| t.confidence.is_some())
            .all(|t| t.date.is_some_and(|d| d > c))
    });
    let regimes = if trials.iter().all(|t| t.regime.is_some()) {
        regime_conditioned_ece(trials, bins, Exec::default())?
    } else {
        BTreeMap::new()
    };
    Ok(Some(CalibrationEvidence {
        ece: r.ece,
        bins,
        trials: r.n,
        excluded: r.excluded,
        out_of_sample,
        correctness_rule: rule.to_string(),
        regimes,
    }))
}

pub fn counterfactual_evidence(
    trials: &[CounterfactualTrial],
    grid: Option<&[f64]>,
) -> Result<CounterfactualEvidence> {
    let verdict = match monotonicity_verdict_with(trials, grid, Exec::default()) {
        Ok(v) => Some(v),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(CounterfactualEvidence {
        verdict,
        bias_scores: bias_scores_from_trials(trials),
        confidence_shift: CONFIDENCE_SHIFT.to_string(),
    })
}

/// Compares the consensus system with each role agent run on its own.
/// Anything other than a consensus log over at least two role agents is a
/// single-agent system.
pub fn disaggregation_evidence(
    inputs: &Inputs,
    system: &BacktestRun,
) -> Result<DisaggregationEvidence> {
    let roles: Vec<&str> = inputs
        .log
        .agents()
        .into_iter()
        .filter(|a| *a != CONSENSUS_AGENT)
        .collect();
    if inputs.agent != CONSENSUS_AGENT || roles.len() < 2 {
        return Ok(DisaggregationEvidence::SingleAgent);
    }
    let logs: Vec<DecisionLog> = roles.iter().map(|a| inputs.log.for_agent(a)).collect();
    let runs = Exec::default().map(&logs, |l| backtest_log(inputs, l, None));
    let runs: Vec<BacktestRun> = runs.into_iter().collect::<Result<_>>()?;
    let singles: Vec<SingleAgentRun> = roles
        .iter()
        .zip(&runs)
        .zip(&logs)
        .map(|((a, r), l)| SingleAgentRun {
            agent_id: a,
            curve: &r.portfolio,
            usage: Usage::of(l.records()),
        })
        .collect();
    let delta = multiagent_delta(&system.portfolio, Usage::of(inputs.log.records()), &singles)?;
    Ok(DisaggregationEvidence::Compared(AgentComparison {
        agent_ids: roles.iter().map(|a| a.to_string()).collect(),
        disagreement: disagreement_rate(&inputs.log)?,
        role_similarity: role_similarity(&inputs.log, Exec::default())?,
        delta,
    }))
}
