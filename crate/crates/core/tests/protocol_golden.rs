use std::collections::BTreeMap;
use std::path::Path;

use alpha_audit::backtest::{run_backtest, BacktestInput};
use alpha_audit::counterfactual::{bias_scores_from_trials, monotonicity_verdict};
use alpha_audit::datamodel::{
    parse_manifest, Action, ClaimTier, CounterfactualTrial, CutoffManifest, DecisionLog,
    DecisionRecord, PriceBar, PriceSeries, View,
};
use alpha_audit::protocol::{
    classify_window, evaluate, CalibrationEvidence, CounterfactualEvidence, DisaggregationEvidence,
    EvidenceBundle, Level, ProtocolId, Status, WindowClass,
};
use alpha_audit::report::{build_backtest_report, sha256_hex, ReportContext};
use alpha_audit::sharpestats::SharpeConvention;
use chrono::NaiveDate;

const BASE: &str = r#"
model_id = "model-x"
knowledge_cutoff = "2024-06-01"
window_start = "2025-01-01"
window_end = "2025-12-31"
claim_tier = "prototype"
frictions_modeled = ["commission", "spread", "market_impact", "latency", "financing", "token_cost"]
frictions_not_applicable = ["slippage", "taxes"]

[friction]
commission_rate = 0.001
kappa = 0.001
token_price = 0.01
latency_bars = 1
borrow_rate = 0.0001

[[universe]]
ticker = "AAA"
intervals = [["2025-01-01", "2025-12-31"]]
"#;

fn manifest(text: &str) -> CutoffManifest {
    parse_manifest(text, Path::new("test.toml")).unwrap()
}

fn d(i: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 1, 2).unwrap() + chrono::Days::new(i)
}

fn bundle_for(m: &CutoffManifest, text: &str) -> EvidenceBundle {
    let bars = (0..10)
        .map(|i| {
            let p = 100.0 + i as f64;
            PriceBar {
                date: d(i),
                open: p,
                high: p + 1.0,
                low: p - 1.0,
                close: p + 0.5,
                volume: 1e6,
                spread: 0.001,
            }
        })
        .collect();
    let prices: BTreeMap<_, _> =
        [("AAA".to_string(), PriceSeries::new("AAA", bars).unwrap())].into();
    let log = DecisionLog::new(vec![DecisionRecord {
        date: d(1),
        ticker: "AAA".into(),
        action: Some(Action::Buy),
        target_weight: None,
        confidence: Some(0.7),
        tokens_in: 2000,
        tokens_out: 300,
        latency_ms: 900,
        agent_id: "solo".into(),
        rationale: None,
        round: None,
    }])
    .unwrap();
    let universe = m.universe().unwrap();
    let spec = m.friction.unwrap();
    let run = run_backtest(&BacktestInput {
        prices: &prices,
        decisions: &log,
        trader: None,
        universe: &universe,
        spec: &spec,
        initial_capital: 100_000.0,
    })
    .unwrap();
    let report = build_backtest_report(
        &run,
        &ReportContext {
            manifest_sha256: sha256_hex(text.as_bytes()),
            agent_id: Some("solo".into()),
            prices: &prices,
            universe: &universe,
            spec: &spec,
            initial_capital: 100_000.0,
            convention: SharpeConvention::Period,
            window: (m.window_start, m.window_end),
        },
    )
    .unwrap();
    EvidenceBundle {
        backtest: Some(report),
        ..Default::default()
    }
}

fn trials(responsive: bool) -> Vec<CounterfactualTrial> {
    let mut out = Vec::new();
    for (k, rho) in [0.6, 0.75, 1.0].into_iter().enumerate() {
        for i in 0..4 {
            let flips = if responsive { i <= k } else { i == 0 };
            out.push(CounterfactualTrial {
                trial_id: format!("{rho}-{i}"),
                rho,
                baseline_view: View::Long,
                updated_view: if flips { View::Short } else { View::Long },
                confidence_before: None,
                confidence_after: None,
                position_before: None,
                position_after: None,
                sector: Some(if i % 2 == 0 { "tech" } else { "energy" }.into()),
                intensity: None,
            });
        }
    }
    out
}

fn counterfactual(responsive: bool) -> CounterfactualEvidence {
    let ts = trials(responsive);
    CounterfactualEvidence {
        verdict: Some(monotonicity_verdict(&ts, None).unwrap()),
        bias_scores: bias_scores_from_trials(&ts),
        confidence_shift: "signed".into(),
    }
}

fn calibration(ece: f64) -> CalibrationEvidence {
    CalibrationEvidence {
        ece,
        bins: 10,
        trials: 50,
        excluded: 0,
        out_of_sample: true,
        correctness_rule: "test".into(),
        regimes: BTreeMap::new(),
    }
}

#[test]
fn missing_cutoff_deployable_claim_is_downgraded() {
    let text = BASE
        .replace("knowledge_cutoff = \"2024-06-01\"\n", "")
        .replace("prototype", "deployable");
    let m = manifest(&text);
    let mut b = bundle_for(&m, &text);
    b.counterfactual = Some(counterfactual(true));
    b.calibration = Some(calibration(0.02));
    let r = evaluate(
        &m,
        &sha256_hex(text.as_bytes()),
        &b,
        SharpeConvention::Period,
    )
    .unwrap();
    assert_eq!(
        r.status(ProtocolId::P1, Level::Full),
        Some(Status::InsufficientEvidence)
    );
    assert!(r.granted_tier.unwrap() <= ClaimTier::Prototype);
    assert!(r.overclaim);
    assert_eq!(r.caveats[0].text, "At most historical-backtest evidence");
}

#[test]
fn prototype_claim_with_p1_p2_p5_is_granted() {
    let m = manifest(BASE);
    let mut b = bundle_for(&m, BASE);
    b.counterfactual = Some(counterfactual(false));
    let r = evaluate(
        &m,
        &sha256_hex(BASE.as_bytes()),
        &b,
        SharpeConvention::Period,
    )
    .unwrap();
    for p in [ProtocolId::P1, ProtocolId::P2, ProtocolId::P5] {
        assert_eq!(r.status(p, Level::Full), Some(Status::Pass), "{p}: {r:#?}");
    }
    assert_eq!(r.granted_tier, Some(ClaimTier::Prototype));
    assert!(!r.overclaim);
    assert_eq!(
        r.permissible_language,
        "\"produces a positive-return trajectory in this window\"; no deployment language"
    );
}

#[test]
fn autonomous_claim_without_p6_gets_deployable() {
    let text = BASE.replace("prototype", "autonomous");
    let m = manifest(&text);
    let mut b = bundle_for(&m, &text);
    b.counterfactual = Some(counterfactual(true));
    b.calibration = Some(calibration(0.03));
    let hash = sha256_hex(text.as_bytes());
    let r = evaluate(&m, &hash, &b, SharpeConvention::Annualized).unwrap();
    assert_eq!(r.granted_tier, Some(ClaimTier::Deployable));
    assert!(r.overclaim);
    assert_eq!(
        r.permissible_language,
        "\"retains net return under structural tests\""
    );
    assert_eq!(
        r.status(ProtocolId::P6, Level::Full),
        Some(Status::InsufficientEvidence)
    );

    b.disaggregation = Some(DisaggregationEvidence::SingleAgent);
    let r = evaluate(&m, &hash, &b, SharpeConvention::Annualized).unwrap();
    assert_eq!(
        r.status(ProtocolId::P6, Level::Full),
        Some(Status::NotApplicable)
    );
    assert_eq!(r.granted_tier, Some(ClaimTier::Deployable));
    assert_eq!(
        r.caveats.last().unwrap().text,
        "Debate is not independent-expert aggregation"
    );
}

#[test]
fn failing_checks_each_block_their_tier() {
    let text = BASE.replace("prototype", "deployable");
    let m = manifest(&text);
    let hash = sha256_hex(text.as_bytes());
    let mut b = bundle_for(&m, &text);
    b.counterfactual = Some(counterfactual(true));
    b.calibration = Some(calibration(0.25));
    let r = evaluate(&m, &hash, &b, SharpeConvention::Period).unwrap();
    assert_eq!(r.status(ProtocolId::P4, Level::Full), Some(Status::Fail));
    assert_eq!(r.granted_tier, Some(ClaimTier::Prototype));

    // a bundle from another manifest is not evidence
    let r = evaluate(&m, "deadbeef", &b, SharpeConvention::Period).unwrap();
    assert_eq!(
        r.status(ProtocolId::P2, Level::Full),
        Some(Status::InsufficientEvidence)
    );

    // no universe
    let text = BASE.split("[[universe]]").next().unwrap().to_string();
    let m = manifest(&text);
    let b = bundle_for(&m, &text);
    let r = evaluate(
        &m,
        &sha256_hex(text.as_bytes()),
        &b,
        SharpeConvention::Period,
    )
    .unwrap();
    assert_eq!(r.status(ProtocolId::P2, Level::Full), Some(Status::Fail));
    // no bias scores either, so not even the extractor tier
    assert_eq!(r.granted_tier, None);
    assert_eq!(r.permissible_language, "no performance claim is supported");

    // a friction left unmodeled fails P5
    let text = BASE.replace("\"taxes\"", "\"slippage\"").replacen(
        "[\"slippage\", \"slippage\"]",
        "[\"slippage\"]",
        1,
    );
    let m = manifest(&text);
    let b = bundle_for(&m, &text);
    let r = evaluate(
        &m,
        &sha256_hex(text.as_bytes()),
        &b,
        SharpeConvention::Period,
    )
    .unwrap();
    assert_eq!(r.status(ProtocolId::P5, Level::Full), Some(Status::Fail));
}

#[test]
fn granted_tier_never_exceeds_pass_set() {
    // exhaustive over which evidence is present
    let text = BASE.replace("prototype", "autonomous");
    let m = manifest(&text);
    let hash = sha256_hex(text.as_bytes());
    let full = bundle_for(&m, &text);
    for mask in 0..16u32 {
        let b = EvidenceBundle {
            backtest: (mask & 1 != 0).then(|| full.backtest.clone().unwrap()),
            calibration: (mask & 2 != 0).then(|| calibration(0.01)),
            counterfactual: (mask & 4 != 0).then(|| counterfactual(true)),
            disaggregation: (mask & 8 != 0).then_some(DisaggregationEvidence::SingleAgent),
        };
        let r = evaluate(&m, &hash, &b, SharpeConvention::Period).unwrap();
        if let Some(t) = r.granted_tier {
            for (p, level) in alpha_audit::protocol::tier_requirements(t) {
                assert_eq!(r.status(p, level), Some(Status::Pass), "mask {mask}");
            }
        }
        assert!(r
            .verdicts
            .iter()
            .all(|v| v.status != Status::Pass || !v.evidence.is_empty()));
    }
}

#[test]
fn window_classes() {
    let m = manifest(BASE);
    assert_eq!(classify_window(&m).unwrap(), WindowClass::PostCutoff);
    let m = manifest(
        &BASE
            .replace("2025-01-01", "2023-01-01")
            .replace("2025-12-31", "2023-12-31"),
    );
    assert_eq!(classify_window(&m).unwrap(), WindowClass::InCutoff);
    let m = manifest(&BASE.replace(
        "window_start = \"2025-01-01\"",
        "window_start = \"2024-01-01\"",
    ));
    assert_eq!(classify_window(&m).unwrap(), WindowClass::Straddling);
    // a later retrieval corpus moves the effective cutoff
    let m = manifest(&BASE.replace(
        "claim_tier",
        "retrieval_corpus_max_date = \"2025-03-01\"\nclaim_tier",
    ));
    assert_eq!(classify_window(&m).unwrap(), WindowClass::Straddling);
    let m = manifest(&BASE.replace("knowledge_cutoff = \"2024-06-01\"\n", ""));
    assert!(classify_window(&m).is_err());
}

#[test]
fn attestation_rescues_in_cutoff_window() {
    let text = BASE
        .replace("2025-01-01", "2023-01-01")
        .replace("2025-12-31", "2023-12-31");
    let m = manifest(&text);
    let r = evaluate(
        &m,
        "h",
        &EvidenceBundle::default(),
        SharpeConvention::Period,
    )
    .unwrap();
    assert_eq!(r.status(ProtocolId::P1, Level::Full), Some(Status::Fail));
    let text = text.replace(
        "claim_tier",
        "point_in_time_attestation = \"frozen snapshot 2022-12-31\"\nclaim_tier",
    );
    let m = manifest(&text);
    let r = evaluate(
        &m,
        "h",
        &EvidenceBundle::default(),
        SharpeConvention::Period,
    )
    .unwrap();
    assert_eq!(r.status(ProtocolId::P1, Level::Full), Some(Status::Pass));
    assert_eq!(
        r.point_in_time_attestation.as_deref(),
        Some("frozen snapshot 2022-12-31")
    );
}
