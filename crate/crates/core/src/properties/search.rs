//! Randomized falsification, the property matrix and the decomposition cross-check.
//!
//! Sampling is seeded per `(property, trial)`, so every mechanism in a matrix
//! run sees the same instances and results do not depend on thread timing.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fixtures::fixture_witness;
use super::{CheckOutcome, Evaluator, Instance, PropertyError, PropertyId, Verdict, Witness};
use crate::gcm::{GcmContext, MechanismId};
use crate::model::{concatenate, TxSet};
use crate::sampling::{InstanceSampler, SamplerConfig};
use crate::scheduler::{SchedulerConfig, SchedulerKind, Threads};

static REFERENCE_MATRIX: &str = include_str!("../../data/reference_matrix.json");

/// Draw one instance of the shape `prop` quantifies over. Every block the
/// check prices has at most `max_txs` transactions.
pub fn sample_instance(prop: PropertyId, s: &mut InstanceSampler<'_>) -> Instance {
    let max = s.config().max_txs.max(2);
    match prop {
        PropertyId::P1 | PropertyId::P2 | PropertyId::P3 | PropertyId::P6 => {
            let n = s.size(0, max - 1);
            let base = s.tx_set(n);
            let tx1 = s.tx();
            let tx2 = match prop {
                PropertyId::P1 => {
                    let keys = if s.chance(0.75) {
                        s.superset_of(tx1.keys())
                    } else {
                        tx1.keys().clone()
                    };
                    s.tx_with(tx1.time().clone(), keys)
                }
                PropertyId::P2 => {
                    let t = s.time_at_least(tx1.time());
                    s.tx_with(t, tx1.keys().clone())
                }
                PropertyId::P3 => {
                    let t = s.time_at_least(tx1.time());
                    let keys = if s.chance(0.5) {
                        s.superset_of(tx1.keys())
                    } else {
                        tx1.keys().clone()
                    };
                    s.tx_with(t, keys)
                }
                _ => s.tx(),
            };
            Instance::Pair { base, tx1, tx2 }
        }
        PropertyId::P4 => {
            let n = s.size(0, max - 1);
            let base = s.tx_set(n);
            let m = s.size(1, max - n);
            let t2 = s.tx_set(m);
            let mask = rand::Rng::gen_range(s.rng(), 0..(1u64 << m));
            let t1 = t2.subset(mask);
            Instance::Sets { base, t1, t2 }
        }
        PropertyId::P5 => {
            let n = s.size(0, max - 2);
            let base = s.tx_set(n);
            let (tx1, tx2) = (s.tx(), s.tx());
            let id = s.fresh_id();
            let tx3 = concatenate(&tx1, &tx2, id).expect("fresh id");
            Instance::Bundle {
                base,
                tx1,
                tx2,
                tx3,
            }
        }
        PropertyId::P7 => {
            let n = s.size(1, max);
            Instance::Block { block: s.tx_set(n) }
        }
        PropertyId::P8 => {
            let (a, b) = (s.size(0, max - 1), s.size(0, max - 1));
            let t1 = s.tx_set(a);
            let t2 = s.tx_set(b);
            Instance::Estimation { t1, t2, tx: s.tx() }
        }
    }
}

/// The instances one trial evaluates: P6 is tried in both orientations so
/// that exactly one of them (if the makespans differ) meets the premise.
fn trial_instances(prop: PropertyId, s: &mut InstanceSampler<'_>) -> Vec<Instance> {
    let inst = sample_instance(prop, s);
    match (&inst, prop) {
        (Instance::Pair { base, tx1, tx2 }, PropertyId::P6) => {
            let swapped = Instance::Pair {
                base: base.clone(),
                tx1: tx2.clone(),
                tx2: tx1.clone(),
            };
            vec![inst, swapped]
        }
        _ => vec![inst],
    }
}

fn trial_context(base: &GcmContext, threads: Threads) -> GcmContext {
    let mut ctx = base.clone();
    ctx.scheduler = SchedulerConfig {
        threads,
        ..base.scheduler
    };
    ctx.vtable = None;
    ctx
}

fn default_context() -> GcmContext {
    GcmContext::new(SchedulerConfig::new(Threads::Bounded(2)))
}

fn stream(kind: &str, prop: PropertyId) -> String {
    format!("{kind}-{prop}")
}

/// First violation (lowest trial index) within `budget` random trials.
pub fn search_counterexample(
    prop: PropertyId,
    mech: MechanismId,
    sampler: &SamplerConfig,
    budget: u64,
) -> Result<Option<Witness>, PropertyError> {
    search_counterexample_with(prop, mech, sampler, budget, &default_context())
}

pub fn search_counterexample_with(
    prop: PropertyId,
    mech: MechanismId,
    sampler: &SamplerConfig,
    budget: u64,
    base: &GcmContext,
) -> Result<Option<Witness>, PropertyError> {
    let label = stream("search", prop);
    let found = (0..budget.max(1)).into_par_iter().find_map_first(|i| {
        let mut s = InstanceSampler::for_trial(sampler, &label, i);
        let mut ev = Evaluator::new(trial_context(base, s.threads()));
        for inst in trial_instances(prop, &mut s) {
            match ev.check(prop, mech, &inst) {
                Ok(CheckOutcome {
                    witness: Some(mut w),
                    ..
                }) => {
                    w.source = format!("search seed={} trial={i}", sampler.seed);
                    return Some(Ok(w));
                }
                Ok(_) => {}
                Err(e) => return Some(Err(e)),
            }
        }
        None
    });
    found.transpose()
}

/// One cell of the property matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    /// A concrete violation exists.
    Violated,
    /// Held strictly on every sample where the compared objects differed.
    Strict,
    /// Held, not always strictly.
    Weak,
    /// Held with equality on every sample.
    Equal,
    /// Equality property held on every sample.
    Holds,
}

impl Cell {
    pub fn symbol(&self) -> &'static str {
        match self {
            Cell::Violated => "✗",
            Cell::Strict => "<",
            Cell::Weak => "≤",
            Cell::Equal => "=",
            Cell::Holds => "✓",
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl std::str::FromStr for Cell {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "✗" | "x" => Cell::Violated,
            "<" => Cell::Strict,
            "≤" | "<=" => Cell::Weak,
            "=" => Cell::Equal,
            "✓" | "ok" => Cell::Holds,
            _ => return Err(format!("unknown cell symbol `{s}`")),
        })
    }
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// The reference matrix shipped with the crate.
#[derive(Debug, Clone, Deserialize)]
pub struct ExpectedTable {
    pub mechanisms: Vec<MechanismId>,
    pub cells: BTreeMap<PropertyId, Vec<Cell>>,
    /// Complexity notes, documentation only.
    pub poly_time: Vec<String>,
}

impl ExpectedTable {
    pub fn reference() -> ExpectedTable {
        serde_json::from_str(REFERENCE_MATRIX).expect("embedded reference table parses")
    }

    pub fn cell(&self, mech: MechanismId, prop: PropertyId) -> Option<Cell> {
        let col = self.mechanisms.iter().position(|m| *m == mech)?;
        self.cells.get(&prop).map(|row| row[col])
    }

    pub fn poly_time(&self, mech: MechanismId) -> Option<&str> {
        let col = self.mechanisms.iter().position(|m| *m == mech)?;
        self.poly_time.get(col).map(String::as_str)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixConfig {
    pub sampler: SamplerConfig,
    /// Trials per property; each trial is evaluated for every mechanism.
    pub trials: u64,
    pub mechanisms: Vec<MechanismId>,
    #[serde(default = "all_properties")]
    pub properties: Vec<PropertyId>,
    pub scheduler: SchedulerKind,
}

fn all_properties() -> Vec<PropertyId> {
    PropertyId::ALL.to_vec()
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig {
            sampler: SamplerConfig::default(),
            trials: 2000,
            mechanisms: MechanismId::TABLE.to_vec(),
            properties: all_properties(),
            scheduler: SchedulerKind::Exact,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CellReport {
    pub mechanism: Option<MechanismId>,
    pub property: Option<PropertyId>,
    pub observed: Option<Cell>,
    pub expected: Option<Cell>,
    pub matches: Option<bool>,
    /// Evaluations meeting the property's premise.
    pub samples: u64,
    pub not_applicable: u64,
    pub violations: u64,
    pub equal: u64,
    pub strict: u64,
    /// Samples where the compared objects differ, and how many of those were strict.
    pub strict_premise: u64,
    pub strict_premise_strict: u64,
    pub witness: Option<Witness>,
}

impl CellReport {
    fn absorb(&mut self, out: CheckOutcome) {
        match out.verdict {
            Verdict::NotApplicable => {
                self.not_applicable += 1;
                return;
            }
            Verdict::Violated => {
                self.violations += 1;
                if self.witness.is_none() {
                    self.witness = out.witness;
                }
            }
            Verdict::HoldsWithEquality => self.equal += 1,
            Verdict::HoldsStrictly => self.strict += 1,
        }
        self.samples += 1;
        if out.strict_premise {
            self.strict_premise += 1;
            if out.verdict == Verdict::HoldsStrictly {
                self.strict_premise_strict += 1;
            }
        }
    }

    fn classify(&self, prop: PropertyId) -> Cell {
        if self.violations > 0 || self.witness.is_some() {
            Cell::Violated
        } else if prop.is_binary() {
            Cell::Holds
        } else if self.strict_premise > 0 && self.strict_premise_strict == self.strict_premise {
            Cell::Strict
        } else if self.equal == self.samples {
            Cell::Equal
        } else {
            Cell::Weak
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixReport {
    pub header: String,
    pub config: MatrixConfig,
    pub cells: Vec<CellReport>,
    pub mismatches: Vec<String>,
    pub refinement: Option<RefinementReport>,
}

impl MatrixReport {
    pub fn cell(&self, mech: MechanismId, prop: PropertyId) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.mechanism == Some(mech) && c.property == Some(prop))
    }

    pub fn ensure_matches(&self) -> Result<(), PropertyError> {
        if self.mismatches.is_empty() {
            Ok(())
        } else {
            Err(PropertyError::MatrixMismatch(self.mismatches.clone()))
        }
    }

    /// Properties as rows, mechanisms as columns; deviating cells show the
    /// reference symbol in brackets.
    pub fn render_text(&self) -> String {
        let table = ExpectedTable::reference();
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header);
        let _ = writeln!(
            out,
            "seed {}, {} trials per property, max {} transactions, {} keys, times {}..{}, threads {:?}",
            self.config.sampler.seed,
            self.config.trials,
            self.config.sampler.max_txs,
            self.config.sampler.key_pool,
            self.config.sampler.min_time,
            self.config.sampler.max_time,
            self.config
                .sampler
                .threads
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
        );
        let _ = writeln!(out);
        let first = 36;
        let col = 12;
        let _ = write!(out, "{:<first$}", "Property");
        for m in &self.config.mechanisms {
            let _ = write!(out, "{:>col$}", m.label());
        }
        let _ = writeln!(out);
        for p in PropertyId::ALL {
            let _ = write!(out, "{:<first$}", format!("{} ({p})", p.title()));
            for m in &self.config.mechanisms {
                let text = match self.cell(*m, p) {
                    Some(c) => {
                        let obs = c.observed.map(|o| o.symbol()).unwrap_or("?");
                        match (c.matches, c.expected) {
                            (Some(false), Some(e)) => format!("{obs} [{e}]"),
                            _ => obs.to_string(),
                        }
                    }
                    None => "-".to_string(),
                };
                let _ = write!(out, "{:>col$}", text);
            }
            let _ = writeln!(out);
        }
        let _ = write!(out, "{:<first$}", "Poly-time Computable (doc only)");
        for m in &self.config.mechanisms {
            let _ = write!(out, "{:>col$}", table.poly_time(*m).unwrap_or("-"));
        }
        let _ = writeln!(out);
        let _ = writeln!(out);
        if self.mismatches.is_empty() {
            let _ = writeln!(out, "all cells match the reference table");
        } else {
            let _ = writeln!(out, "mismatches: {}", self.mismatches.join(", "));
        }
        if let Some(r) = &self.refinement {
            let _ = writeln!(
                out,
                "weighted area bundling with K1 != K2: {} of {} samples strict; with K1 = K2: {} of {} equal",
                r.distinct_strict, r.distinct_samples, r.same_equal, r.same_samples
            );
        }
        out
    }
}

const MATRIX_HEADER: &str = "Violations (✗) carry concrete, replayable witnesses. \
Every other cell only means no violation was found in the sampled trials; \
its strictness class (<, =, ≤, ✓) is a statistical observation, not a proof.";

/// Regenerate the property matrix and compare it with the reference table.
pub fn property_matrix(config: &MatrixConfig) -> Result<MatrixReport, PropertyError> {
    let mut base = default_context();
    base.scheduler.kind = config.scheduler;
    let reference = ExpectedTable::reference();
    let mechs = &config.mechanisms;
    let mut cells = Vec::new();
    let mut mismatches = Vec::new();

    for &prop in &config.properties {
        let label = stream("matrix", prop);
        let per_trial: Vec<Vec<Vec<CheckOutcome>>> = (0..config.trials.max(1))
            .into_par_iter()
            .map(|i| {
                let mut s = InstanceSampler::for_trial(&config.sampler, &label, i);
                let mut ev = Evaluator::new(trial_context(&base, s.threads()));
                let instances = trial_instances(prop, &mut s);
                mechs
                    .iter()
                    .map(|m| {
                        instances
                            .iter()
                            .map(|inst| {
                                ev.check(prop, *m, inst).map(|mut o| {
                                    if let Some(w) = &mut o.witness {
                                        w.source = format!(
                                            "search seed={} trial={i}",
                                            config.sampler.seed
                                        );
                                    }
                                    o
                                })
                            })
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;

        let mut reports: Vec<CellReport> = mechs
            .iter()
            .map(|m| CellReport {
                mechanism: Some(*m),
                property: Some(prop),
                ..CellReport::default()
            })
            .collect();
        for trial in per_trial {
            for (report, outs) in reports.iter_mut().zip(trial) {
                for o in outs {
                    report.absorb(o);
                }
            }
        }
        for report in &mut reports {
            let mech = report.mechanism.expect("set above");
            if report.witness.is_none() {
                for threads in &config.sampler.threads {
                    let ctx = trial_context(&base, *threads);
                    if let Some(w) = fixture_witness(prop, mech, &ctx)? {
                        report.witness = Some(w);
                        break;
                    }
                }
            }
            let observed = report.classify(prop);
            let expected = reference.cell(mech, prop);
            report.observed = Some(observed);
            report.expected = expected;
            report.matches = expected.map(|e| e == observed);
            if report.matches == Some(false) {
                mismatches.push(format!(
                    "{mech}/{prop}: observed {observed}, expected {}",
                    expected.expect("compared")
                ));
            }
        }
        cells.extend(reports);
    }

    let refinement = if mechs.contains(&MechanismId::WeightedArea)
        && config.properties.contains(&PropertyId::P5)
    {
        Some(weighted_area_bundling_refinement(
            &config.sampler,
            config.trials,
        )?)
    } else {
        None
    };

    Ok(MatrixReport {
        header: MATRIX_HEADER.to_string(),
        config: config.clone(),
        cells,
        mismatches,
        refinement,
    })
}

/// Weighted area bundling split by whether the two parts share their key set:
/// strict when they differ, equality when they coincide.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementReport {
    pub distinct_samples: u64,
    pub distinct_strict: u64,
    pub same_samples: u64,
    pub same_equal: u64,
}

impl RefinementReport {
    pub fn holds(&self) -> bool {
        self.distinct_samples > 0
            && self.distinct_strict == self.distinct_samples
            && self.same_equal == self.same_samples
    }
}

pub fn weighted_area_bundling_refinement(
    sampler: &SamplerConfig,
    budget: u64,
) -> Result<RefinementReport, PropertyError> {
    let base = default_context();
    let rows: Vec<(bool, Verdict)> = (0..budget.max(1))
        .into_par_iter()
        .map(|i| {
            let mut s = InstanceSampler::for_trial(sampler, "refine-wa-bundling", i);
            let mut ev = Evaluator::new(trial_context(&base, s.threads()));
            let inst = sample_instance(PropertyId::P5, &mut s);
            let Instance::Bundle { tx1, tx2, .. } = &inst else {
                unreachable!("P5 samples bundles")
            };
            let distinct = tx1.keys() != tx2.keys();
            let out = ev.check(PropertyId::P5, MechanismId::WeightedArea, &inst)?;
            Ok((distinct, out.verdict))
        })
        .collect::<Result<_, PropertyError>>()?;
    let mut r = RefinementReport {
        distinct_samples: 0,
        distinct_strict: 0,
        same_samples: 0,
        same_equal: 0,
    };
    for (distinct, v) in rows {
        if distinct {
            r.distinct_samples += 1;
            r.distinct_strict += (v == Verdict::HoldsStrictly) as u64;
        } else {
            r.same_samples += 1;
            r.same_equal += (v == Verdict::HoldsWithEquality) as u64;
        }
    }
    Ok(r)
}

/// Observational check that key-time monotonicity splits into key
/// monotonicity followed by time monotonicity through `(t1, K2)`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DecompositionReport {
    pub mechanism: Option<MechanismId>,
    pub trials: u64,
    pub p3_violations: u64,
    pub decomposed: u64,
    pub p1_witnesses: u64,
    pub p2_witnesses: u64,
    pub lifted: u64,
    pub strict_checks: u64,
    pub inconsistencies: Vec<String>,
}

impl DecompositionReport {
    pub fn consistent(&self) -> bool {
        self.inconsistencies.is_empty()
    }
}

pub fn check_lemma_consistency(
    mech: MechanismId,
    sampler: &SamplerConfig,
    budget: u64,
) -> Result<DecompositionReport, PropertyError> {
    check_lemma_consistency_with(mech, sampler, budget, &default_context())
}

/// As [`check_lemma_consistency`], with `v` from `base`'s scheduler.
pub fn check_lemma_consistency_with(
    mech: MechanismId,
    sampler: &SamplerConfig,
    budget: u64,
    base: &GcmContext,
) -> Result<DecompositionReport, PropertyError> {
    let rows: Vec<DecompositionReport> = (0..budget.max(1))
        .into_par_iter()
        .map(|i| decomposition_trial(mech, sampler, base, i))
        .collect::<Result<_, _>>()?;
    let mut report = DecompositionReport {
        mechanism: Some(mech),
        trials: budget.max(1),
        ..DecompositionReport::default()
    };
    for r in rows {
        report.p3_violations += r.p3_violations;
        report.decomposed += r.decomposed;
        report.p1_witnesses += r.p1_witnesses;
        report.p2_witnesses += r.p2_witnesses;
        report.lifted += r.lifted;
        report.strict_checks += r.strict_checks;
        report.inconsistencies.extend(r.inconsistencies);
    }
    Ok(report)
}

fn decomposition_trial(
    mech: MechanismId,
    sampler: &SamplerConfig,
    base: &GcmContext,
    i: u64,
) -> Result<DecompositionReport, PropertyError> {
    let mut s = InstanceSampler::for_trial(sampler, "decomposition", i);
    let mut ev = Evaluator::new(trial_context(base, s.threads()));
    let mut r = DecompositionReport::default();

    let inst = sample_instance(PropertyId::P3, &mut s);
    let Instance::Pair { base: t, tx1, tx2 } = &inst else {
        unreachable!("P3 samples pairs")
    };
    let mid = s.tx_with(tx1.time().clone(), tx2.keys().clone());
    let step1 = Instance::Pair {
        base: t.clone(),
        tx1: tx1.clone(),
        tx2: mid.clone(),
    };
    let step2 = Instance::Pair {
        base: t.clone(),
        tx1: mid,
        tx2: tx2.clone(),
    };
    let o3 = ev.check(PropertyId::P3, mech, &inst)?;
    let o1 = ev.check(PropertyId::P1, mech, &step1)?;
    let o2 = ev.check(PropertyId::P2, mech, &step2)?;
    if o3.verdict == Verdict::Violated {
        r.p3_violations += 1;
        if o1.verdict == Verdict::Violated || o2.verdict == Verdict::Violated {
            r.decomposed += 1;
        } else {
            r.inconsistencies.push(format!(
                "trial {i}: key-time violation with neither step violated"
            ));
        }
    }
    // A step that is strict whenever its endpoints differ, twice, makes the
    // composite strict whenever its endpoints differ.
    let step_strict = |o: &CheckOutcome| !o.strict_premise || o.verdict == Verdict::HoldsStrictly;
    if o3.strict_premise && step_strict(&o1) && step_strict(&o2) {
        r.strict_checks += 1;
        if o3.verdict != Verdict::HoldsStrictly {
            r.inconsistencies.push(format!(
                "trial {i}: both steps strict but key-time is {:?}",
                o3.verdict
            ));
        }
    }

    // Converse: witnesses of either half are key-time witnesses as they stand.
    let mut lift = |prop: PropertyId,
                    inst: &Instance,
                    r: &mut DecompositionReport|
     -> Result<(), PropertyError> {
        let o = ev.check(prop, mech, inst)?;
        if o.verdict != Verdict::Violated {
            return Ok(());
        }
        match prop {
            PropertyId::P1 => r.p1_witnesses += 1,
            _ => r.p2_witnesses += 1,
        }
        let as3 = ev.check(PropertyId::P3, mech, inst)?;
        if as3.verdict == Verdict::Violated && as3.lhs == o.lhs && as3.rhs == o.rhs {
            r.lifted += 1;
        } else {
            r.inconsistencies.push(format!(
                "trial {i}: {prop} witness is not a key-time witness"
            ));
        }
        Ok(())
    };
    lift(PropertyId::P1, &step1, &mut r)?;
    lift(PropertyId::P2, &step2, &mut r)?;
    let own1 = sample_instance(PropertyId::P1, &mut s);
    lift(PropertyId::P1, &own1, &mut r)?;
    let own2 = sample_instance(PropertyId::P2, &mut s);
    lift(PropertyId::P2, &own2, &mut r)?;
    Ok(r)
}

/// Gas of one fixed transaction across many random enclosing blocks.
#[derive(Debug, Clone, Serialize)]
pub struct EasyGasReport {
    pub mechanism: MechanismId,
    pub blocks: u64,
    pub distinct_values: usize,
    pub witness: Option<Witness>,
}

impl EasyGasReport {
    pub fn identical(&self) -> bool {
        self.distinct_values == 1
    }
}

pub fn check_easy_gas_estimation(
    mech: MechanismId,
    sampler: &SamplerConfig,
    blocks: u64,
) -> Result<EasyGasReport, PropertyError> {
    let mut s = InstanceSampler::for_trial(sampler, "easy-gas", 0);
    let mut ev = Evaluator::new(trial_context(&default_context(), s.threads()));
    let max = s.config().max_txs.max(2);
    let tx = s.tx();
    let mut seen: Vec<(TxSet, crate::rational::Gas)> = Vec::new();
    for _ in 0..blocks.max(1) {
        let n = s.size(0, max - 1);
        let others = s.tx_set(n);
        let g = ev.gas(mech, &others.with(&tx)?, &tx)?;
        if !seen.iter().any(|(_, h)| *h == g) {
            seen.push((others, g));
        }
    }
    let witness = if seen.len() > 1 {
        let inst = Instance::Estimation {
            t1: seen[0].0.clone(),
            t2: seen[1].0.clone(),
            tx: tx.clone(),
        };
        let mut w = ev
            .check(PropertyId::P8, mech, &inst)?
            .witness
            .expect("different gas values violate the property");
        w.source = format!("easy-gas seed={}", sampler.seed);
        Some(w)
    } else {
        None
    };
    Ok(EasyGasReport {
        mechanism: mech,
        blocks: blocks.max(1),
        distinct_values: seen.len(),
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SamplerConfig {
        SamplerConfig::with_seed(3)
    }

    #[test]
    fn reference_table_parses() {
        let t = ExpectedTable::reference();
        assert_eq!(t.mechanisms, MechanismId::TABLE.to_vec());
        assert_eq!(t.cell(MechanismId::Xsm, PropertyId::P5), Some(Cell::Strict));
        assert_eq!(t.cell(MechanismId::Esm, PropertyId::P6), Some(Cell::Strict));
        assert_eq!(t.cell(MechanismId::Constant, PropertyId::P1), None);
        assert_eq!(t.poly_time(MechanismId::Shapley), Some("S(v)"));
        let row: Vec<_> = PropertyId::ALL
            .iter()
            .map(|p| t.cell(MechanismId::Current, *p).unwrap().symbol())
            .collect();
        assert_eq!(row, ["=", "<", "≤", "<", "=", "✗", "✗", "✓"]);
    }

    #[test]
    fn search_finds_tpm_estimation_witness() {
        let w = search_counterexample(PropertyId::P8, MechanismId::Tpm, &small(), 1000)
            .unwrap()
            .expect("gas varies with the block");
        assert!(w.reproduces(&default_context()).unwrap());
    }

    #[test]
    fn search_is_deterministic() {
        let a = search_counterexample(PropertyId::P5, MechanismId::Esm, &small(), 500).unwrap();
        let b = search_counterexample(PropertyId::P5, MechanismId::Esm, &small(), 500).unwrap();
        assert!(a.is_some());
        assert_eq!(a, b);
    }

    #[test]
    fn weighted_area_key_monotonicity_has_no_violation() {
        assert!(
            search_counterexample(PropertyId::P1, MechanismId::WeightedArea, &small(), 2000)
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn banzhaf_bundling_never_violated() {
        assert!(
            search_counterexample(PropertyId::P5, MechanismId::Banzhaf, &small(), 300)
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn easy_gas_estimation_by_construction() {
        for m in [
            MechanismId::Current,
            MechanismId::WeightedArea,
            MechanismId::Constant,
        ] {
            let r = check_easy_gas_estimation(m, &small(), 100).unwrap();
            assert!(r.identical(), "{m}");
        }
        let r = check_easy_gas_estimation(MechanismId::Shapley, &small(), 100).unwrap();
        assert!(r.witness.is_some());
    }

    #[test]
    fn decomposition_consistency_for_weighted_area() {
        let r = check_lemma_consistency(MechanismId::WeightedArea, &small(), 300).unwrap();
        assert!(r.consistent(), "{:?}", r.inconsistencies);
        assert_eq!(r.p3_violations, 0);
        assert!(r.strict_checks > 0);
    }

    #[test]
    fn refinement_splits_by_key_sets() {
        let r = weighted_area_bundling_refinement(&small(), 400).unwrap();
        assert!(r.holds(), "{r:?}");
        assert!(r.same_samples > 0);
    }

    #[test]
    fn small_matrix_current_row() {
        let cfg = MatrixConfig {
            sampler: small(),
            trials: 200,
            mechanisms: vec![MechanismId::Current],
            properties: PropertyId::ALL.to_vec(),
            scheduler: SchedulerKind::Exact,
        };
        let report = property_matrix(&cfg).unwrap();
        assert!(report.mismatches.is_empty(), "{:?}", report.mismatches);
        let text = report.render_text();
        assert!(text.contains("Storage Key Monotonicity (P1)"));
    }
}
