//! Subcommand implementations behind the `alpha-audit` binary.
//!
//! Exit codes: 0 success, 1 protocol failure or overclaim (`audit` only),
//! 2 any input or usage error.

pub mod args;
pub mod pipeline;
pub mod summary;

use std::ffi::OsString;
use std::path::Path;

use alpha_audit::datamodel::{load_calibration_trials, load_counterfactual_trials};
use alpha_audit::friction::{coverage_matrix, SystemCoverage};
use alpha_audit::par::Exec;
use alpha_audit::protocol::{evaluate, ComplianceReport, EvidenceBundle};
use alpha_audit::report::{BacktestReport, Document};
use alpha_audit::sharpestats::{
    ci_half_width, half_width_grid, lo_se, t_hurdle, write_grid_csv, zero_coverage_boundary,
    SharpeConvention, SharpeQuery, QUANTILE_METHOD, T_HURDLE,
};
use anyhow::{Context, Result};
use clap::Parser;
use serde::{Deserialize, Serialize};

use args::{
    AuditArgs, BacktestArgs, CalibrateArgs, Cli, Command, CounterfactualArgs, CoverageArgs,
    DisaggregateArgs, SharpeArgs,
};
use pipeline::{
    calibration_evidence, counterfactual_evidence, disaggregation_evidence, load_inputs,
    run_system, trials_from_decisions, CORRECTNESS_RULE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROTOCOL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Parses `argv` and runs the command, returning the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_OK
            }
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Backtest(a) => cmd_backtest(&a),
        Command::Audit(a) => cmd_audit(&a).map(|o| o.exit_code()),
        Command::Sharpe(a) => cmd_sharpe(&a),
        Command::Calibrate(a) => cmd_calibrate(&a),
        Command::Counterfactual(a) => cmd_counterfactual(&a),
        Command::Disaggregate(a) => cmd_disaggregate(&a),
        Command::Coverage(a) => cmd_coverage(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, body: T) -> Result<()> {
    write(path, &Document::new(body).to_json()?)
}

fn cmd_backtest(a: &BacktestArgs) -> Result<i32> {
    let inputs = load_inputs(&a.run)?;
    let (_, report) = run_system(&inputs)?;
    write_json(&a.out.join("backtest.json"), &report)?;
    let text = summary::backtest(&report);
    write(&a.out.join("backtest.txt"), &text)?;
    print!("{text}");
    Ok(EXIT_OK)
}

/// Uncertainty of the portfolio's net Sharpe ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpeUncertainty {
    pub sr: f64,
    pub observations: usize,
    pub convention: SharpeConvention,
    pub level: f64,
    pub standard_error: f64,
    pub ci_half_width: f64,
    /// Hurdle statistic computed on the per-period Sharpe.
    pub t_stat: f64,
    pub passes_hurdle: bool,
    pub quantile_method: String,
}

fn sharpe_uncertainty(
    sr: f64,
    observations: usize,
    convention: SharpeConvention,
    level: f64,
) -> Result<SharpeUncertainty> {
    let q = SharpeQuery::new(sr, observations, convention).with_level(level);
    let hurdle = t_hurdle(sr / convention.annualization(), observations)?;
    Ok(SharpeUncertainty {
        sr,
        observations,
        convention,
        level,
        standard_error: lo_se(&q)?,
        ci_half_width: ci_half_width(&q)?,
        t_stat: hurdle.t_stat,
        passes_hurdle: hurdle.passes,
        quantile_method: QUANTILE_METHOD.to_string(),
    })
}

/// Deterministic body of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditBody {
    pub compliance: ComplianceReport,
    pub sharpe_uncertainty: Option<SharpeUncertainty>,
    pub evidence: EvidenceBundle,
}

pub struct AuditOutcome {
    pub body: AuditBody,
    pub summary: String,
}

impl AuditOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.body.compliance.overclaim {
            EXIT_PROTOCOL
        } else {
            EXIT_OK
        }
    }
}

fn net_sharpe(r: &BacktestReport, level: f64) -> Result<Option<SharpeUncertainty>> {
    match r.portfolio.net.sharpe {
        Some(sr) if r.observations >= 2 => Ok(Some(sharpe_uncertainty(
            sr,
            r.observations,
            r.sharpe_convention,
            level,
        )?)),
        _ => Ok(None),
    }
}

pub fn build_audit(a: &AuditArgs) -> Result<AuditOutcome> {
    let inputs = load_inputs(&a.run)?;
    let (run, report) = run_system(&inputs)?;

    let calibration = match &a.calibration {
        Some(path) => calibration_evidence(
            &load_calibration_trials(path)?,
            a.bins,
            Some(&inputs.manifest),
            "as recorded in the trials file",
        )?,
        None => calibration_evidence(
            &trials_from_decisions(&inputs.log, &inputs.agent, &inputs.prices),
            a.bins,
            Some(&inputs.manifest),
            CORRECTNESS_RULE,
        )?,
    };
    let counterfactual = match &a.counterfactual {
        Some(path) => Some(counterfactual_evidence(
            &load_counterfactual_trials(path)?,
            inputs.manifest.rho_grid.as_deref(),
        )?),
        None => None,
    };
    let disaggregation = Some(disaggregation_evidence(&inputs, &run)?);

    let bundle = EvidenceBundle {
        backtest: Some(report),
        calibration,
        counterfactual,
        disaggregation,
    };
    let compliance = evaluate(
        &inputs.manifest,
        &inputs.manifest_sha256,
        &bundle,
        inputs.convention,
    )?;
    let sharpe = net_sharpe(bundle.backtest.as_ref().unwrap(), a.level)?;
    let summary = summary::audit(&compliance, bundle.backtest.as_ref(), sharpe.as_ref());
    Ok(AuditOutcome {
        body: AuditBody {
            compliance,
            sharpe_uncertainty: sharpe,
            evidence: bundle,
        },
        summary,
    })
}

fn cmd_audit(a: &AuditArgs) -> Result<AuditOutcome> {
    let outcome = build_audit(a)?;
    write_json(&a.out.join("report.json"), &outcome.body)?;
    write(&a.out.join("report.txt"), &outcome.summary)?;
    print!("{}", outcome.summary);
    Ok(outcome)
}

fn cmd_sharpe(a: &SharpeArgs) -> Result<i32> {
    let s = sharpe_uncertainty(a.sr, a.observations, a.k, a.level)?;
    println!("sharpe convention: {}", a.k);
    println!("sr: {}  T: {}  level: {}", a.sr, a.observations, a.level);
    println!("lo standard error: {:.6}", s.standard_error);
    println!(
        "confidence interval: [{:.6}, {:.6}] (half-width {:.6})",
        a.sr - s.ci_half_width,
        a.sr + s.ci_half_width,
        s.ci_half_width
    );
    match zero_coverage_boundary(a.observations, a.k, a.level) {
        Ok(b) => println!("zero-coverage boundary: {b:.6}"),
        Err(e) => println!("zero-coverage boundary: undefined ({e})"),
    }
    println!(
        "t-statistic: {:.6} ({} the {T_HURDLE} hurdle)",
        s.t_stat,
        if s.passes_hurdle { "passes" } else { "fails" }
    );
    println!("quantile method: {QUANTILE_METHOD}");
    if let Some(path) = &a.grid {
        let (srs, ts) = alpha_audit::sharpestats::default_grid_axes();
        let points = half_width_grid(&srs, &ts, a.k, a.level, Exec::default())?;
        let mut buf = Vec::new();
        write_grid_csv(&points, &mut buf)?;
        write(path, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
    }
    Ok(EXIT_OK)
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<i32> {
    let manifest = a
        .manifest
        .as_deref()
        .map(pipeline::load_manifest)
        .transpose()?
        .map(|m| m.manifest);
    let (trials, rule) = match (&a.trials, &a.decisions, &a.prices) {
        (Some(path), _, _) => (
            load_calibration_trials(path)?,
            "as recorded in the trials file",
        ),
        (None, Some(d), Some(p)) => {
            let log = alpha_audit::datamodel::load_decisions(d)?;
            let agent = pipeline::system_agent(&log, a.agent.as_deref())?;
            let prices = alpha_audit::datamodel::load_prices_dir(p)?;
            (
                trials_from_decisions(&log, &agent, &prices),
                CORRECTNESS_RULE,
            )
        }
        _ => anyhow::bail!("give --trials, or --decisions with --prices"),
    };
    let result = alpha_audit::calibration::ece(&trials, a.bins)?;
    let evidence = calibration_evidence(&trials, a.bins, manifest.as_ref(), rule)?;
    println!("ECE (M={}): {:.6}", a.bins, result.ece);
    println!(
        "trials: {}  excluded without confidence: {}",
        result.n, result.excluded
    );
    println!("correctness rule: {rule}");
    println!("bin  count  mean_conf  accuracy");
    for b in &result.bins {
        if let (Some(c), Some(acc)) = (b.mean_confidence, b.accuracy) {
            println!(
                "{:>3}  {:>5}  {:>9.4}  {:>8.4}",
                b.bin_index, b.count, c, acc
            );
        }
    }
    if let Some(e) = &evidence {
        println!("out of sample: {}", e.out_of_sample);
        for (r, v) in &e.regimes {
            let low = if v.low_sample { "  (low sample)" } else { "" };
            println!("regime {r}: ECE {:.6} over {}{low}", v.ece, v.n);
        }
    }
    if let Some(out) = &a.out {
        write_json(out, &(result, evidence))?;
    }
    Ok(EXIT_OK)
}

fn cmd_counterfactual(a: &CounterfactualArgs) -> Result<i32> {
    let trials = load_counterfactual_trials(&a.trials)?;
    let manifest = a
        .manifest
        .as_deref()
        .map(pipeline::load_manifest)
        .transpose()?;
    let grid = manifest.as_ref().and_then(|m| m.manifest.rho_grid.clone());
    let evidence = counterfactual_evidence(&trials, grid.as_deref())?;
    match &evidence.verdict {
        Some(v) => {
            println!("rho      flip_rate");
            for (rho, f) in &v.axis_statistics.flip {
                println!("{rho:<8} {f:.4}");
            }
            println!(
                "monotone: flip {}  confidence {}  position {}",
                v.flip_axis_monotone, v.confidence_axis_monotone, v.position_axis_monotone
            );
            println!("locked: {}", v.locked);
        }
        None => println!("monotonicity undefined: fewer than 3 evidence strengths"),
    }
    println!("confidence shift: {}", evidence.confidence_shift);
    for (sector, b) in &evidence.bias_scores {
        println!("bias {sector}: {:+.4}", b.pi_s);
    }
    if let Some(out) = &a.out {
        write_json(out, &evidence)?;
    }
    Ok(EXIT_OK)
}

fn cmd_disaggregate(a: &DisaggregateArgs) -> Result<i32> {
    let inputs = load_inputs(&a.run)?;
    let (run, _) = run_system(&inputs)?;
    let evidence = disaggregation_evidence(&inputs, &run)?;
    match &evidence {
        alpha_audit::protocol::DisaggregationEvidence::SingleAgent => {
            println!("single-agent system: disaggregation not applicable");
        }
        alpha_audit::protocol::DisaggregationEvidence::Compared(c) => {
            println!("agents: {}", c.agent_ids.join(", "));
            println!(
                "disagreement rate: {:.4} over {} cells ({} excluded)",
                c.disagreement.rate, c.disagreement.cells, c.disagreement.excluded_cells
            );
            println!("role similarity:");
            for (i, a) in c.role_similarity.agents.iter().enumerate() {
                let cells: Vec<String> = c.role_similarity.values[i]
                    .iter()
                    .map(|v| v.map_or_else(|| "  n/a".into(), |x| format!("{x:.3}")))
                    .collect();
                println!("  {a:<16} {}", cells.join(" "));
            }
            let d = &c.delta;
            println!(
                "net CR: multi {:+.4}  best single ({}) {:+.4}  delta {:+.4}",
                d.multi_net_cr, d.best_single_agent, d.best_single_net_cr, d.net_return_delta
            );
            println!(
                "coordination cost: {} tokens, {} ms",
                d.coordination_tokens, d.coordination_latency_ms
            );
        }
    }
    println!("sharpe convention: {}", inputs.convention);
    if let Some(out) = &a.out {
        write_json(out, &evidence)?;
    }
    Ok(EXIT_OK)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemsFile {
    system: Vec<SystemEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemEntry {
    name: String,
    modeled: Vec<String>,
}

pub fn load_systems(path: &Path) -> Result<Vec<SystemCoverage>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: SystemsFile =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    file.system
        .iter()
        .map(|s| SystemCoverage::from_names(s.name.clone(), &s.modeled).map_err(Into::into))
        .collect()
}

fn cmd_coverage(a: &CoverageArgs) -> Result<i32> {
    let m = coverage_matrix(&load_systems(&a.systems)?);
    let names: Vec<&str> = m.components.iter().map(|c| c.as_str()).collect();
    println!("{:<16} {}", "system", names.join(" "));
    for r in &m.rows {
        let flags: Vec<String> = r
            .modeled
            .iter()
            .zip(&names)
            .map(|(f, n)| format!("{:^w$}", if *f { "x" } else { "." }, w = n.len()))
            .collect();
        println!("{:<16} {}", r.system, flags.join(" "));
    }
    println!(
        "unmodeled: {} of {} cells",
        m.unmodeled_cells, m.total_cells
    );
    if let Some(out) = &a.out {
        write_json(out, &m)?;
    }
    Ok(EXIT_OK)
}
