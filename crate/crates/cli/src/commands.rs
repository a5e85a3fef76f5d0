use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pargas_core::block::{parse_block, parse_weights};
use pargas_core::feemarket::{simulate, WorkloadConfig};
use pargas_core::gcm::{gas_report, GcmContext, MechanismId};
use pargas_core::properties::{
    property_matrix, run_fixture_suite, ExpectedTable, FixtureReport, MatrixConfig, MatrixReport,
    PropertyError, PropertyId, Witness,
};
use pargas_core::sampling::SamplerConfig;
use pargas_core::scheduler::{
    greedy_schedule, makespan, optimal_schedule, validate_schedule, SchedulerConfig, Threads,
    DEFAULT_INSTANCE_CAP, HARD_INSTANCE_CAP,
};
use pargas_core::{TxSet, WeightTable};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Cli, Command, Common, Format, Mode};
use crate::render;

pub const INSTANCE_CAP_ENV: &str = "PARGAS_INSTANCE_CAP";
const DEFAULT_THREADS: Threads = Threads::Bounded(2);
const DEFAULT_TRIALS: u64 = 2000;

/// Everything a run was resolved to, echoed at the top of its output.
#[derive(Debug, Serialize)]
pub struct CommandConfig {
    pub subcommand: &'static str,
    pub inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<Threads>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    pub instance_cap: usize,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, Value>,
}

pub struct Output {
    pub body: String,
    /// False when a requested check did not match expectations.
    pub ok: bool,
    pub path: Option<PathBuf>,
}

pub fn instance_cap() -> Result<usize> {
    match std::env::var(INSTANCE_CAP_ENV) {
        Err(_) => Ok(DEFAULT_INSTANCE_CAP),
        Ok(raw) => {
            let cap: usize = raw
                .trim()
                .parse()
                .with_context(|| format!("{INSTANCE_CAP_ENV}={raw:?} is not a count"))?;
            if cap == 0 || cap > HARD_INSTANCE_CAP {
                bail!("{INSTANCE_CAP_ENV} must be between 1 and {HARD_INSTANCE_CAP}, got {cap}");
            }
            Ok(cap)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn format_of(common: &Common, default: Format, allowed: &[Format], sub: &str) -> Result<Format> {
    let f = common.format.unwrap_or(default);
    if !allowed.contains(&f) {
        bail!("`{sub}` does not support --format {:?}", f);
    }
    Ok(f)
}

fn load_block(path: &Path, weights: Option<&PathBuf>) -> Result<(TxSet, WeightTable)> {
    let (txs, mut table) =
        parse_block(&read(path)?).with_context(|| format!("invalid block {}", path.display()))?;
    if let Some(w) = weights {
        table =
            parse_weights(&read(w)?).with_context(|| format!("invalid weights {}", w.display()))?;
    }
    Ok((txs, table))
}

fn base_config(sub: &'static str, common: &Common, format: Format, cap: usize) -> CommandConfig {
    CommandConfig {
        subcommand: sub,
        inputs: Vec::new(),
        mechanism: common.mech,
        threads: common.threads,
        seed: common.seed,
        budget: common.budget,
        format,
        weights: common.weights.as_ref().map(|p| p.display().to_string()),
        instance_cap: cap,
        extra: serde_json::Map::new(),
    }
}

fn emit(config: &CommandConfig, result: Value, human: Option<String>) -> String {
    let echo = serde_json::to_string(config).expect("config serializes");
    match (config.format, human) {
        (Format::Json, _) | (_, None) => {
            let mut s =
                serde_json::to_string_pretty(&json!({ "config": config, "result": result }))
                    .expect("results serialize");
            s.push('\n');
            s
        }
        (Format::Svg, Some(body)) => body,
        (_, Some(body)) => format!("# config: {echo}\n{body}"),
    }
}

pub fn run(cli: Cli) -> Result<Output> {
    let cap = instance_cap()?;
    let common = cli.common;
    let (body, ok) = match cli.command {
        Command::Gas { block } => (gas(&common, &block, cap)?, true),
        Command::Schedule { block, mode } => (schedule(&common, &block, mode, cap)?, true),
        Command::Check {
            all,
            props,
            witness,
        } => check(&common, all, props, witness, cap)?,
        Command::Simulate { workload } => (simulate_cmd(&common, workload, cap)?, true),
    };
    Ok(Output {
        body,
        ok,
        path: common.out,
    })
}

fn gas(common: &Common, block: &Path, cap: usize) -> Result<String> {
    let format = format_of(common, Format::Text, &[Format::Json, Format::Text], "gas")?;
    let mech = common.mech.unwrap_or(MechanismId::Current);
    let threads = common.threads.unwrap_or(DEFAULT_THREADS);
    let (txs, weights) = load_block(block, common.weights.as_ref())?;
    let ctx = GcmContext::new(SchedulerConfig::new(threads).with_cap(cap)).with_weights(weights);
    let report = gas_report(mech, &txs, &ctx)?;
    let mut config = base_config("gas", common, format, cap);
    config.inputs.push(block.display().to_string());
    config.mechanism = Some(mech);
    config.threads = Some(threads);
    let human = render::gas_text(&report, &txs);
    Ok(emit(
        &config,
        serde_json::to_value(&report)?,
        (format == Format::Text).then_some(human),
    ))
}

fn schedule(common: &Common, block: &Path, mode: Mode, cap: usize) -> Result<String> {
    let format = format_of(
        common,
        Format::Text,
        &[Format::Json, Format::Text, Format::Svg],
        "schedule",
    )?;
    let threads = common.threads.unwrap_or(DEFAULT_THREADS);
    let (txs, _) = load_block(block, None)?;
    let cfg = SchedulerConfig::new(threads).with_cap(cap);
    let sched = match mode {
        Mode::Exact => optimal_schedule(&txs, &cfg)?,
        Mode::Greedy => greedy_schedule(&txs, &cfg)?,
    };
    let span = makespan(&sched);
    let validity = validate_schedule(&sched.to_doc(), &txs, &cfg);
    let mut config = base_config("schedule", common, format, cap);
    config.inputs.push(block.display().to_string());
    config.threads = Some(threads);
    config
        .extra
        .insert("mode".into(), serde_json::to_value(mode)?);
    let result = json!({
        "makespan": span,
        "schedule": sched.to_doc(),
        "lanes": sched.lanes(),
        "valid": validity.is_valid(),
    });
    let human = match format {
        Format::Text => Some(render::gantt_text(&sched, &txs, &span)),
        Format::Svg => Some(render::gantt_svg(
            &sched,
            &txs,
            &span,
            &format!("config: {}", serde_json::to_string(&config)?),
        )),
        _ => None,
    };
    Ok(emit(&config, result, human))
}

fn sampler_for(common: &Common) -> SamplerConfig {
    let mut sampler = SamplerConfig::with_seed(common.seed.unwrap_or(0));
    if let Some(t) = common.threads {
        sampler.threads = vec![t];
    }
    sampler
}

/// Fixture suite for `mech`; a mismatch is a failed check, not an error.
fn fixtures_for(mech: MechanismId) -> Result<std::result::Result<FixtureReport, String>> {
    match run_fixture_suite(mech) {
        Ok(r) => Ok(Ok(r)),
        Err(e @ PropertyError::FixtureMismatch(_)) => Ok(Err(e.to_string())),
        Err(e) => Err(e.into()),
    }
}

fn check(
    common: &Common,
    all: bool,
    props: Vec<PropertyId>,
    witness: Option<PathBuf>,
    cap: usize,
) -> Result<(String, bool)> {
    let format = format_of(common, Format::Text, &[Format::Json, Format::Text], "check")?;
    let mut config = base_config("check", common, format, cap);
    if let Some(path) = witness {
        config.inputs.push(path.display().to_string());
        let w = Witness::from_json(&read(&path)?)
            .with_context(|| format!("invalid witness {}", path.display()))?;
        let base = GcmContext::new(SchedulerConfig::new(w.threads).with_cap(cap));
        let outcome = w.replay(&base)?;
        let ok = w.reproduces(&base)?;
        let human = format!(
            "{} {}/{} {}: replayed {:?}, lhs {}, rhs {}\n",
            if ok { "PASS" } else { "FAIL" },
            w.mechanism,
            w.property,
            w.property.name(),
            outcome.verdict,
            outcome
                .lhs
                .as_ref()
                .map(|r| r.to_string())
                .unwrap_or_default(),
            outcome
                .rhs
                .as_ref()
                .map(|r| r.to_string())
                .unwrap_or_default(),
        );
        let result = json!({ "reproduces": ok, "outcome": outcome });
        return Ok((
            emit(&config, result, (format == Format::Text).then_some(human)),
            ok,
        ));
    }

    let mechanisms: Vec<MechanismId> = match (all, common.mech) {
        (true, _) => MechanismId::TABLE.to_vec(),
        (false, Some(m)) => vec![m],
        (false, None) => bail!("`check` needs --all, --mech <id> or --witness <file>"),
    };
    let props = if props.is_empty() || all {
        PropertyId::ALL.to_vec()
    } else {
        props
    };
    let trials = common.budget.unwrap_or(DEFAULT_TRIALS);
    let matrix_cfg = MatrixConfig {
        sampler: sampler_for(common),
        trials,
        mechanisms: mechanisms.clone(),
        properties: props.clone(),
        ..MatrixConfig::default()
    };
    config.mechanism = None;
    config.seed = Some(matrix_cfg.sampler.seed);
    config.budget = Some(trials);
    config
        .extra
        .insert("mechanisms".into(), serde_json::to_value(&mechanisms)?);
    config
        .extra
        .insert("properties".into(), serde_json::to_value(&props)?);
    config
        .extra
        .insert("sampler".into(), serde_json::to_value(&matrix_cfg.sampler)?);

    let mut ok = true;
    let mut human = String::new();
    let mut fixture_json = Vec::new();
    let mut fixture_reports = Vec::new();
    for &mech in &mechanisms {
        match fixtures_for(mech)? {
            Ok(report) => {
                let relevant = report
                    .results
                    .iter()
                    .filter(|r| props.contains(&r.property))
                    .count();
                let _ = writeln!(human, "PASS fixtures {mech}: {relevant} replayed exactly");
                fixture_json
                    .push(json!({ "mechanism": mech, "ok": true, "results": report.results }));
                fixture_reports.push(report);
            }
            Err(msg) => {
                ok = false;
                let _ = writeln!(human, "FAIL fixtures {mech}: {msg}");
                fixture_json.push(json!({ "mechanism": mech, "ok": false, "error": msg }));
            }
        }
    }

    let matrix: MatrixReport = property_matrix(&matrix_cfg)?;
    let reference = ExpectedTable::reference();
    let mut cells = Vec::new();
    for &mech in &mechanisms {
        for &prop in &props {
            let cell = matrix
                .cell(mech, prop)
                .expect("matrix covers requested cells");
            let pass = cell.matches != Some(false);
            ok &= pass;
            let observed = cell.observed.map(|c| c.symbol()).unwrap_or("?");
            let expected = reference
                .cell(mech, prop)
                .map(|c| c.symbol())
                .unwrap_or("-");
            let confirmed: Vec<&str> = fixture_reports
                .iter()
                .filter(|r| r.mechanism == mech)
                .flat_map(|r| r.results.iter())
                .filter(|r| r.property == prop)
                .map(|r| r.fixture)
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let mut line = format!(
                "{} {mech}/{prop} {}: observed {observed}, expected {expected}",
                if pass { "PASS" } else { "FAIL" },
                prop.name()
            );
            if let Some(w) = &cell.witness {
                let _ = write!(line, ", witness from {}", w.source);
            }
            if !confirmed.is_empty() {
                let _ = write!(line, ", confirmed by fixture {}", confirmed.join(", "));
            }
            let _ = writeln!(human, "{line}");
            cells.push(cell.clone());
        }
    }
    if all {
        human.push('\n');
        human.push_str(&matrix.render_text());
    }
    let _ = writeln!(
        human,
        "{}",
        if ok { "check passed" } else { "check FAILED" }
    );
    let result = json!({
        "ok": ok,
        "fixtures": fixture_json,
        "cells": cells,
        "mismatches": matrix.mismatches,
        "refinement": matrix.refinement,
    });
    Ok((
        emit(&config, result, (format == Format::Text).then_some(human)),
        ok,
    ))
}

fn simulate_cmd(common: &Common, workload: Option<PathBuf>, cap: usize) -> Result<String> {
    let format = format_of(
        common,
        Format::Csv,
        &[Format::Json, Format::Csv],
        "simulate",
    )?;
    let mut w = match &workload {
        Some(p) => serde_json::from_str::<WorkloadConfig>(&read(p)?)
            .with_context(|| format!("invalid workload {}", p.display()))?,
        None => WorkloadConfig::default(),
    };
    if let Some(s) = common.seed {
        w.seed = s;
    }
    if let Some(b) = common.budget {
        w.blocks = b;
    }
    if let Some(t) = common.threads {
        w.threads = t;
    }
    let mech = common.mech.unwrap_or(MechanismId::Current);
    let mut ctx = GcmContext::new(SchedulerConfig::new(w.threads).with_cap(cap));
    if let Some(p) = &common.weights {
        ctx.weights =
            parse_weights(&read(p)?).with_context(|| format!("invalid weights {}", p.display()))?;
    }
    let report = simulate(&w, mech, &ctx)?;
    let mut config = base_config("simulate", common, format, cap);
    config.inputs = workload.iter().map(|p| p.display().to_string()).collect();
    config.mechanism = Some(mech);
    config.threads = Some(w.threads);
    config.seed = Some(w.seed);
    config.budget = Some(w.blocks);
    config
        .extra
        .insert("workload".into(), serde_json::to_value(&w)?);
    let last = report.rows.last().map(|r| r.base_fee.clone());
    let result = json!({
        "rows": report.rows,
        "total_fees": report.total_fees,
        "final_base_fee": last,
    });
    Ok(emit(
        &config,
        result,
        (format == Format::Csv).then_some(report.to_csv()),
    ))
}
