//! Evaluates the six evidence protocols and maps their verdicts to the
//! strongest claim tier the evidence supports.
//!
//! | id | checks |
//! |----|--------|
//! | P1 | temporal integrity: cutoff metadata and a post-cutoff or attested window |
//! | P2 | point-in-time universe supplied, no out-of-universe fills |
//! | P3 | counterfactual response not locked |
//! | P4 | out-of-sample ECE below the declared threshold |
//! | P5 | every friction component charged or attested not applicable |
//! | P6 | multi-agent disaggregation reported |
//!
//! The extractor tier asks for light P1 (model identity disclosed) and light
//! P3 (sector bias scores reported). A verdict other than `pass` never
//! satisfies a requirement.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calibration::RegimeEce;
use crate::counterfactual::{BiasScore, MonotonicityVerdict};
use crate::datamodel::{ClaimTier, CutoffManifest};
use crate::disaggregation::AgentComparison;
use crate::error::{Error, Result};
use crate::friction::FrictionComponent;
use crate::report::BacktestReport;
use crate::sharpestats::SharpeConvention;

pub const DEFAULT_ECE_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProtocolId {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 6] = [
        ProtocolId::P1,
        ProtocolId::P2,
        ProtocolId::P3,
        ProtocolId::P4,
        ProtocolId::P5,
        ProtocolId::P6,
    ];

    /// What a non-passing verdict means for the claim.
    pub fn caveat(self) -> &'static str {
        match self {
            ProtocolId::P1 => "At most historical-backtest evidence",
            ProtocolId::P2 => "Alpha may come from ex-post-filtered universes",
            ProtocolId::P3 => "Recommendations may reflect priors, not information",
            ProtocolId::P4 => "LLM confidence should not control sizing",
            ProtocolId::P5 => "Profits cannot show deployability",
            ProtocolId::P6 => "Debate is not independent-expert aggregation",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ProtocolId::P1 => "temporal integrity",
            ProtocolId::P2 => "dynamic universe",
            ProtocolId::P3 => "counterfactual robustness",
            ProtocolId::P4 => "epistemic calibration",
            ProtocolId::P5 => "realistic implementation",
            ProtocolId::P6 => "multi-agent disaggregation",
        }
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Light,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    InsufficientEvidence,
    NotApplicable,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::InsufficientEvidence => "insufficient_evidence",
            Status::NotApplicable => "not_applicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolVerdict {
    pub protocol: ProtocolId,
    pub level: Level,
    pub status: Status,
    pub evidence: BTreeMap<String, String>,
}

impl ProtocolVerdict {
    fn new(protocol: ProtocolId, level: Level) -> Self {
        ProtocolVerdict {
            protocol,
            level,
            status: Status::InsufficientEvidence,
            evidence: BTreeMap::new(),
        }
    }

    fn note(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.evidence.insert(key.to_string(), value.to_string());
        self
    }

    fn set(&mut self, status: Status) {
        self.status = status;
    }
}

/// One `(protocol, level)` demand of a claim tier.
pub type Requirement = (ProtocolId, Level);

pub fn tier_requirements(tier: ClaimTier) -> BTreeSet<Requirement> {
    use Level::{Full, Light};
    use ProtocolId::*;
    let mut req: BTreeSet<Requirement> = [(P1, Light), (P3, Light)].into();
    if tier >= ClaimTier::Prototype {
        req.extend([(P1, Full), (P2, Full), (P5, Full)]);
    }
    if tier >= ClaimTier::Deployable {
        req.extend([(P3, Full), (P4, Full)]);
    }
    if tier >= ClaimTier::Autonomous {
        req.insert((P6, Full));
    }
    req
}

/// Each tier must demand strictly more than the one below it.
pub fn check_tier_inheritance() -> Result<()> {
    for w in ClaimTier::ALL.windows(2) {
        let (lo, hi) = (tier_requirements(w[0]), tier_requirements(w[1]));
        if !(lo.is_subset(&hi) && lo.len() < hi.len()) {
            return Err(Error::contract(format!(
                "requirements of {} do not strictly contain those of {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

pub fn permissible_language(tier: ClaimTier) -> &'static str {
    match tier {
        ClaimTier::Extractor => {
            "\"improves information extraction\"; \"semantic features have marginal contribution\""
        }
        ClaimTier::Prototype => {
            "\"produces a positive-return trajectory in this window\"; no deployment language"
        }
        ClaimTier::Deployable => "\"retains net return under structural tests\"",
        ClaimTier::Autonomous => "\"retains net return after multi-agent disaggregation\"",
    }
}

pub const NO_CLAIM_LANGUAGE: &str = "no performance claim is supported";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowClass {
    InCutoff,
    PostCutoff,
    Straddling,
}

impl WindowClass {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowClass::InCutoff => "in_cutoff",
            WindowClass::PostCutoff => "post_cutoff",
            WindowClass::Straddling => "straddling",
        }
    }
}

pub fn classify_window(manifest: &CutoffManifest) -> Result<WindowClass> {
    let cutoff: NaiveDate = manifest
        .effective_cutoff()
        .ok_or_else(|| Error::Undefined("manifest has no knowledge_cutoff".into()))?;
    Ok(if manifest.window_start > cutoff {
        WindowClass::PostCutoff
    } else if manifest.window_end <= cutoff {
        WindowClass::InCutoff
    } else {
        WindowClass::Straddling
    })
}

/// Fractional drop from a pre-cutoff metric to its post-cutoff value.
pub fn contamination_delta(pre: f64, post: f64) -> Result<f64> {
    if pre == 0.0 || !pre.is_finite() || !post.is_finite() {
        return Err(Error::Undefined(format!(
            "contamination delta undefined for pre {pre}, post {post}"
        )));
    }
    Ok((pre - post) / pre.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEvidence {
    pub ece: f64,
    pub bins: usize,
    pub trials: usize,
    pub excluded: usize,
    /// Every trial is dated after the effective cutoff.
    pub out_of_sample: bool,
    pub correctness_rule: String,
    #[serde(default)]
    pub regimes: BTreeMap<String, RegimeEce>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualEvidence {
    /// `None` when the trials span fewer than three strengths.
    pub verdict: Option<MonotonicityVerdict>,
    pub bias_scores: BTreeMap<String, BiasScore>,
    pub confidence_shift: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisaggregationEvidence {
    SingleAgent,
    Compared(AgentComparison),
}

/// Inputs to [`evaluate`]; an absent component is `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    pub backtest: Option<BacktestReport>,
    pub calibration: Option<CalibrationEvidence>,
    pub counterfactual: Option<CounterfactualEvidence>,
    pub disaggregation: Option<DisaggregationEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Caveat {
    pub protocol: ProtocolId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub manifest_sha256: String,
    pub claimed_tier: ClaimTier,
    pub granted_tier: Option<ClaimTier>,
    pub overclaim: bool,
    pub verdicts: Vec<ProtocolVerdict>,
    pub light_verdicts: Vec<ProtocolVerdict>,
    pub permissible_language: String,
    pub caveats: Vec<Caveat>,
    pub sharpe_convention: SharpeConvention,
    pub ece_threshold: f64,
    pub point_in_time_attestation: Option<String>,
}

impl ComplianceReport {
    pub fn status(&self, id: ProtocolId, level: Level) -> Option<Status> {
        let list = match level {
            Level::Full => &self.verdicts,
            Level::Light => &self.light_verdicts,
        };
        list.iter().find(|v| v.protocol == id).map(|v| v.status)
    }
}

fn p1_light(m: &CutoffManifest) -> ProtocolVerdict {
    let mut v = ProtocolVerdict::new(ProtocolId::P1, Level::Light);
    match &m.model_id {
        Some(id) => {
            v.note("model_id", id).set(Status::Pass);
        }
        None => {
            v.note("model_id", "missing").set(Status::Fail);
        }
    }
    v
}

fn p1_full(m: &CutoffManifest) -> ProtocolVerdict {
    let mut v = ProtocolVerdict::new(ProtocolId::P1, Level::Full);
    v.note("window", format!("{}..{}", m.window_start, m.window_end));
    let Ok(class) = classify_window(m) else {
        v.note("knowledge_cutoff", "missing");
        return v;
    };
    let cutoff = m.effective_cutoff().expect("classified");
    v.note("effective_cutoff", cutoff)
        .note("window_class", class.as_str());
    let attested = m.point_in_time_attestation.is_some();
    if attested {
        v.note("point_in_time_attestation", "present");
    }
    if m.model_id.is_none() {
        v.note("model_id", "missing").set(Status::Fail);
    } else if class == WindowClass::PostCutoff || attested {
        v.set(Status::Pass);
    } else {
        v.set(Status::Fail);
    }
    v
}

fn bundle_report<'a>(
    m_hash: &str,
    b: &'a EvidenceBundle,
    v: &mut ProtocolVerdict,
) -> Option<&'a BacktestReport> {
    let Some(r) = &b.backtest else {
        v.note("backtest", "absent");
        return None;
    };
    if r.manifest_sha256 != m_hash {
        v.note("backtest", "bundle was produced under a different manifest");
        return None;
    }
    Some(r)
}

fn p2(m_hash: &str, b: &EvidenceBundle) -> ProtocolVerdict {
    let mut v = ProtocolVerdict::new(ProtocolId::P2, Level::Full);
    let Some(r) = bundle_report(m_hash, b, &mut v) else {
        return v;
    };
    v.note("universe_supplied", r.universe_supplied)
        .note("out_of_universe_fills", r.out_of_universe_fills)
        .note("out_of_universe_rejections", r.out_of_universe_rejections);
    let ok = r.universe_supplied && r.out_of_universe_fills == 0;
    v.set(if ok { Status::Pass } else { Status::Fail });
    v
}

fn p3_light(b: &EvidenceBundle) -> ProtocolVerdict {
    let mut v = ProtocolVerdict::new(ProtocolId::P3, Level::Light);
    match &b.counterfactual {
        Some(c) if !c.bias_scores.is_empty() => {
            for (sector, s) in &c.bias_scores {
                v.note(&format!("bias_score.{sector}"), s.pi_s);
            }
            v.set(Status::Pass);
        }
        Some(_) => {
            v.note("bias_scores", "none reported");
        }
        None => {
            v.note("counterfactual", "absent");
        }
    }
    v
}

fn p3_full(b: &EvidenceBundle) -> ProtocolVerdict {
    let mut v = ProtocolVerdict::new(ProtocolId::P3, Level::Full);
    let Some(c) = &b.counterfactual else {
        v.note("counterfactual", "absent");
        return v;
    };
    let Some(verdict) = &c.verdict else {
        v.note("monotonicity", "fewer than 3 evidence strengths");
        return v;
    };
    v.note("flip_axis_monotone", verdict.flip_axis_monotone)
        .note("confidence_axis_monotone", verdict.confidence_axis_monotone)
        .note("position_axis_monotone", verdict.position_axis_monotone)
        .note("locked", verdict.locked)
        .note("confidence_shift", &c.confidence_shift);
    v.set(if verdict.locked {
        Status::Fail
    } else {
        Status::Pass
    });
    v
}

fn p4(b: &EvidenceBundle, threshold: f64) -> ProtocolVerdict {
    let mut v = ProtocolVerdict::new(ProtocolId::P4, Level::Full);
    v.note("ece_threshold", threshold);
    let Some(c) = &b.calibration else {
        v.note("calibration", "absent");
        return v;
    };
    v.note("ece", c.ece)
        .note("bins", c.bins)
        .note("trials", c.trials)
        .note("excluded_without_confidence", c.excluded)
        .note("out_of_sample", c.out_of_sample)
        .note("correctness_rule", &c.correctness_rule);
    for (regime, r) in &c.regimes {
        let low = if r.low_sample { " (low sample)" } else { "" };
        v.note(
            &format!("ece.{regime}"),
            format!("{} n={}{low}", r.ece, r.n),
        );
    }
    v.set(if c.out_of_sample && c.ece < threshold {
        Status::Pass
    } else {
        Status::Fail
    });
    v
}

fn p5(m: &CutoffManifest, m_hash: &str, b: &EvidenceBundle) -> ProtocolVerdict {
    let mut v = ProtocolVerdict::new(ProtocolId::P5, Level::Full);
    let Some(r) = bundle_report(m_hash, b, &mut v) else {
        return v;
    };
    let mut missing = Vec::new();
    for c in FrictionComponent::ALL {
        let state = if m.frictions_not_applicable.contains(&c) {
            "attested not applicable"
        } else if m.frictions_modeled.contains(&c) && r.charged_components.contains(&c) {
            "charged"
        } else if m.frictions_modeled.contains(&c) {
            missing.push(c.as_str());
            "declared but not charged"
        } else {
            missing.push(c.as_str());
            "not modeled"
        };
        v.note(&format!("friction.{}", c.as_str()), state);
    }
    v.note("net_metrics_reported", true)
        .note("net_cumulative_return", r.portfolio.net.cumulative_return)
        .note(
            "gross_cumulative_return",
            r.portfolio.gross.cumulative_return,
        );
    if missing.is_empty() {
        v.set(Status::Pass);
    } else {
        v.note("missing", missing.join(",")).set(Status::Fail);
    }
    v
}

fn p6(b: &EvidenceBundle) -> ProtocolVerdict {
    let mut v = ProtocolVerdict::new(ProtocolId::P6, Level::Full);
    match &b.disaggregation {
        None => {
            v.note("disaggregation", "absent");
        }
        Some(DisaggregationEvidence::SingleAgent) => {
            v.note("disaggregation", "single-agent system")
                .set(Status::NotApplicable);
        }
        Some(DisaggregationEvidence::Compared(c)) => {
            let d = &c.delta;
            v.note("agents", c.agent_ids.join(","))
                .note("disagreement_rate", c.disagreement.rate)
                .note("role_similarity_agents", c.role_similarity.agents.len())
                .note("best_single_agent", &d.best_single_agent)
                .note("net_return_delta", d.net_return_delta)
                .note("coordination_tokens", d.coordination_tokens)
                .note("coordination_latency_ms", d.coordination_latency_ms);
            v.set(Status::Pass);
        }
    }
    v
}

pub fn evaluate(
    manifest: &CutoffManifest,
    manifest_sha256: &str,
    bundle: &EvidenceBundle,
    convention: SharpeConvention,
) -> Result<ComplianceReport> {
    check_tier_inheritance()?;
    let threshold = manifest.ece_threshold.unwrap_or(DEFAULT_ECE_THRESHOLD);

    let verdicts = vec![
        p1_full(manifest),
        p2(manifest_sha256, bundle),
        p3_full(bundle),
        p4(bundle, threshold),
        p5(manifest, manifest_sha256, bundle),
        p6(bundle),
    ];
    let light = vec![p1_light(manifest), p3_light(bundle)];
    debug_assert!(verdicts
        .iter()
        .chain(&light)
        .all(|v| v.status != Status::Pass || !v.evidence.is_empty()));

    let passed: BTreeSet<Requirement> = verdicts
        .iter()
        .chain(&light)
        .filter(|v| v.status == Status::Pass)
        .map(|v| (v.protocol, v.level))
        .collect();
    let granted = ClaimTier::ALL
        .into_iter()
        .rfind(|&t| tier_requirements(t).is_subset(&passed));

    let caveats = verdicts
        .iter()
        .filter(|v| v.status != Status::Pass)
        .map(|v| Caveat {
            protocol: v.protocol,
            text: v.protocol.caveat().to_string(),
        })
        .collect();

    Ok(ComplianceReport {
        manifest_sha256: manifest_sha256.to_string(),
        claimed_tier: manifest.claim_tier,
        granted_tier: granted,
        overclaim: granted.is_none_or(|g| g < manifest.claim_tier),
        verdicts,
        light_verdicts: light,
        permissible_language: granted
            .map_or(NO_CLAIM_LANGUAGE, permissible_language)
            .to_string(),
        caveats,
        sharpe_convention: convention,
        ece_threshold: threshold,
        point_in_time_attestation: manifest.point_in_time_attestation.clone(),
    })
}
