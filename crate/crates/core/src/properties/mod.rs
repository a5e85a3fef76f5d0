//! Executable versions of the eight mechanism properties.
//!
//! [`check_property`] evaluates one property on one instance with exact
//! arithmetic. The submodules replay fixed counterexamples, search for new
//! ones at random, regenerate the property matrix and cross-check the
//! decomposition of key-time monotonicity into its two halves.

mod fixtures;
mod search;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::block::{TxDoc, WeightsDoc};
use crate::gcm::{self, GcmContext, GcmError, MechanismId};
use crate::model::{concatenate, ModelError, StorageKey, Transaction, TxSet};
use crate::rational::{Gas, Rational, Time};
use crate::scheduler::{SchedulerConfig, SubsetValueTable, Threads};

pub use fixtures::{fixtures, run_fixture_suite, Fixture, FixtureReport, FixtureResult};
pub use search::{
    check_easy_gas_estimation, check_lemma_consistency, check_lemma_consistency_with,
    property_matrix, sample_instance, search_counterexample, weighted_area_bundling_refinement,
    Cell, CellReport, DecompositionReport, EasyGasReport, ExpectedTable, MatrixConfig,
    MatrixReport, RefinementReport,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PropertyError {
    #[error("malformed instance: {0}")]
    MalformedInstance(String),
    #[error(transparent)]
    Gcm(#[from] GcmError),
    #[error("{0}")]
    FixtureMismatch(Box<FixtureMismatch>),
    #[error("property matrix deviates from the reference in {} cell(s): {}", .0.len(), .0.join(", "))]
    MatrixMismatch(Vec<String>),
}

/// A fixture value that differs from its published number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureMismatch {
    pub fixture: String,
    pub threads: Threads,
    pub label: String,
    pub expected: Rational,
    pub computed: String,
}

impl fmt::Display for FixtureMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fixture {} at {} threads: {} computed {}, expected {}",
            self.fixture, self.threads, self.label, self.computed, self.expected
        )
    }
}

impl From<ModelError> for PropertyError {
    fn from(e: ModelError) -> Self {
        PropertyError::MalformedInstance(e.to_string())
    }
}

impl From<crate::scheduler::ScheduleError> for PropertyError {
    fn from(e: crate::scheduler::ScheduleError) -> Self {
        PropertyError::Gcm(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PropertyId {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
    P8,
}

impl PropertyId {
    pub const ALL: [PropertyId; 8] = [
        PropertyId::P1,
        PropertyId::P2,
        PropertyId::P3,
        PropertyId::P4,
        PropertyId::P5,
        PropertyId::P6,
        PropertyId::P7,
        PropertyId::P8,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PropertyId::P1 => "key_monotonicity",
            PropertyId::P2 => "time_monotonicity",
            PropertyId::P3 => "key_time_monotonicity",
            PropertyId::P4 => "set_inclusion",
            PropertyId::P5 => "bundling",
            PropertyId::P6 => "scheduling_monotonicity",
            PropertyId::P7 => "efficiency",
            PropertyId::P8 => "easy_gas_estimation",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            PropertyId::P1 => "Storage Key Monotonicity",
            PropertyId::P2 => "Time Monotonicity",
            PropertyId::P3 => "Storage Key-Time Monotonicity",
            PropertyId::P4 => "Set Inclusion",
            PropertyId::P5 => "Transaction Bundling",
            PropertyId::P6 => "Scheduling Monotonicity",
            PropertyId::P7 => "Efficiency",
            PropertyId::P8 => "Easy Gas Estimation",
        }
    }

    /// P7 and P8 are equalities: they hold or they do not.
    pub fn is_binary(&self) -> bool {
        matches!(self, PropertyId::P7 | PropertyId::P8)
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for PropertyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        PropertyId::ALL
            .into_iter()
            .find(|p| format!("{p:?}").to_ascii_lowercase() == norm || p.name() == norm)
            .ok_or_else(|| format!("unknown property `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Violated,
    HoldsWithEquality,
    HoldsStrictly,
    NotApplicable,
}

/// The quantified objects of one property instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instance {
    /// `(T, tx1, tx2)` for P1, P2, P3 and P6.
    Pair {
        base: TxSet,
        tx1: Transaction,
        tx2: Transaction,
    },
    /// `(T, T1, T2)` with `T1 ⊆ T2` for P4.
    Sets { base: TxSet, t1: TxSet, t2: TxSet },
    /// `(T, tx1, tx2, tx3)` with `tx3` the concatenation, for P5.
    Bundle {
        base: TxSet,
        tx1: Transaction,
        tx2: Transaction,
        tx3: Transaction,
    },
    /// `T` for P7.
    Block { block: TxSet },
    /// `(T1, T2, tx)` for P8.
    Estimation {
        t1: TxSet,
        t2: TxSet,
        tx: Transaction,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum InstanceDoc {
    Pair {
        base: Vec<TxDoc>,
        tx1: TxDoc,
        tx2: TxDoc,
    },
    Sets {
        base: Vec<TxDoc>,
        t1: Vec<TxDoc>,
        t2: Vec<TxDoc>,
    },
    Bundle {
        base: Vec<TxDoc>,
        tx1: TxDoc,
        tx2: TxDoc,
        tx3: TxDoc,
    },
    Block {
        block: Vec<TxDoc>,
    },
    Estimation {
        t1: Vec<TxDoc>,
        t2: Vec<TxDoc>,
        tx: TxDoc,
    },
}

fn docs(set: &TxSet) -> Vec<TxDoc> {
    set.iter().map(TxDoc::from_tx).collect()
}

fn undoc(list: &[TxDoc]) -> Result<TxSet, ModelError> {
    let mut set = TxSet::new();
    for d in list {
        set.insert(d.to_tx()?)?;
    }
    Ok(set)
}

impl From<&Instance> for InstanceDoc {
    fn from(i: &Instance) -> Self {
        match i {
            Instance::Pair { base, tx1, tx2 } => InstanceDoc::Pair {
                base: docs(base),
                tx1: TxDoc::from_tx(tx1),
                tx2: TxDoc::from_tx(tx2),
            },
            Instance::Sets { base, t1, t2 } => InstanceDoc::Sets {
                base: docs(base),
                t1: docs(t1),
                t2: docs(t2),
            },
            Instance::Bundle {
                base,
                tx1,
                tx2,
                tx3,
            } => InstanceDoc::Bundle {
                base: docs(base),
                tx1: TxDoc::from_tx(tx1),
                tx2: TxDoc::from_tx(tx2),
                tx3: TxDoc::from_tx(tx3),
            },
            Instance::Block { block } => InstanceDoc::Block { block: docs(block) },
            Instance::Estimation { t1, t2, tx } => InstanceDoc::Estimation {
                t1: docs(t1),
                t2: docs(t2),
                tx: TxDoc::from_tx(tx),
            },
        }
    }
}

impl From<Instance> for InstanceDoc {
    fn from(i: Instance) -> Self {
        InstanceDoc::from(&i)
    }
}

impl TryFrom<InstanceDoc> for Instance {
    type Error = ModelError;

    fn try_from(d: InstanceDoc) -> Result<Self, Self::Error> {
        Ok(match d {
            InstanceDoc::Pair { base, tx1, tx2 } => Instance::Pair {
                base: undoc(&base)?,
                tx1: tx1.to_tx()?,
                tx2: tx2.to_tx()?,
            },
            InstanceDoc::Sets { base, t1, t2 } => Instance::Sets {
                base: undoc(&base)?,
                t1: undoc(&t1)?,
                t2: undoc(&t2)?,
            },
            InstanceDoc::Bundle {
                base,
                tx1,
                tx2,
                tx3,
            } => Instance::Bundle {
                base: undoc(&base)?,
                tx1: tx1.to_tx()?,
                tx2: tx2.to_tx()?,
                tx3: tx3.to_tx()?,
            },
            InstanceDoc::Block { block } => Instance::Block {
                block: undoc(&block)?,
            },
            InstanceDoc::Estimation { t1, t2, tx } => Instance::Estimation {
                t1: undoc(&t1)?,
                t2: undoc(&t2)?,
                tx: tx.to_tx()?,
            },
        })
    }
}

impl Serialize for Instance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        InstanceDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Instance::try_from(InstanceDoc::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl Instance {
    pub fn shape(&self) -> &'static str {
        match self {
            Instance::Pair { .. } => "pair",
            Instance::Sets { .. } => "sets",
            Instance::Bundle { .. } => "bundle",
            Instance::Block { .. } => "block",
            Instance::Estimation { .. } => "estimation",
        }
    }

    /// Size of the largest block the check prices.
    pub fn max_block(&self) -> usize {
        match self {
            Instance::Pair { base, .. } => base.len() + 1,
            Instance::Sets { base, t2, .. } => base.len() + t2.len(),
            Instance::Bundle { base, .. } => base.len() + 2,
            Instance::Block { block } => block.len(),
            Instance::Estimation { t1, t2, .. } => t1.len().max(t2.len()) + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub verdict: Verdict,
    pub lhs: Gas,
    pub rhs: Gas,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premise: Option<[Time; 2]>,
}

/// A replayable violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub property: PropertyId,
    pub mechanism: MechanismId,
    pub threads: Threads,
    #[serde(default, skip_serializing_if = "is_unit_weights")]
    pub weights: WeightsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Rational>,
    pub instance: Instance,
    pub expected: Expected,
    #[serde(default)]
    pub source: String,
}

fn is_unit_weights(w: &WeightsDoc) -> bool {
    *w == WeightsDoc::default()
}

impl Witness {
    /// Context the witness was found under, on top of `base` for everything else.
    pub fn context(&self, base: &GcmContext) -> Result<GcmContext, PropertyError> {
        let mut ctx = base.clone();
        ctx.scheduler = SchedulerConfig {
            threads: self.threads,
            ..base.scheduler
        };
        ctx.weights = self.weights.to_table()?;
        if let Some(c) = &self.constant {
            ctx.constant = c.clone();
        }
        ctx.vtable = None;
        Ok(ctx)
    }

    pub fn replay(&self, base: &GcmContext) -> Result<CheckOutcome, PropertyError> {
        check_property(
            self.property,
            self.mechanism,
            &self.instance,
            &self.context(base)?,
        )
    }

    /// Replays to `Violated` with exactly the recorded rationals.
    pub fn reproduces(&self, base: &GcmContext) -> Result<bool, PropertyError> {
        let out = self.replay(base)?;
        Ok(out.verdict == Verdict::Violated
            && out.lhs.as_ref() == Some(&self.expected.lhs)
            && out.rhs.as_ref() == Some(&self.expected.rhs)
            && out.premise == self.expected.premise)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("witnesses always serialize")
    }

    pub fn from_json(s: &str) -> Result<Witness, PropertyError> {
        serde_json::from_str(s).map_err(|e| PropertyError::MalformedInstance(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub property: PropertyId,
    pub mechanism: MechanismId,
    pub verdict: Verdict,
    /// Left and right side of the conclusion, `lhs ≤ rhs` (or `lhs = rhs` for P7/P8).
    pub lhs: Option<Gas>,
    pub rhs: Option<Gas>,
    /// `[v(T ∪ {tx1}), v(T ∪ {tx2})]` for P6.
    pub premise: Option<[Time; 2]>,
    /// The compared objects differ, so a strict variant demands `lhs < rhs`.
    pub strict_premise: bool,
    pub witness: Option<Witness>,
}

type Canonical = Vec<(Rational, Vec<StorageKey>)>;

fn canonical(txs: &TxSet) -> Canonical {
    let mut c: Canonical = txs
        .iter()
        .map(|tx| (tx.time().clone(), tx.keys().iter().cloned().collect()))
        .collect();
    c.sort();
    c
}

/// Gas evaluation with `v` memoized on the `(t, K)` multiset, so that the
/// many overlapping blocks of one instance share makespan computations.
pub struct Evaluator {
    ctx: GcmContext,
    values: HashMap<Canonical, Time>,
    tables: HashMap<TxSet, Arc<SubsetValueTable>>,
}

impl Evaluator {
    pub fn new(ctx: GcmContext) -> Self {
        Evaluator {
            ctx,
            values: HashMap::new(),
            tables: HashMap::new(),
        }
    }

    pub fn context(&self) -> &GcmContext {
        &self.ctx
    }

    pub fn value(&mut self, txs: &TxSet) -> Result<Time, GcmError> {
        let key = canonical(txs);
        if let Some(v) = self.values.get(&key) {
            return Ok(v.clone());
        }
        let v = self.ctx.scheduler.value(txs)?;
        self.values.insert(key, v.clone());
        Ok(v)
    }

    fn table(&mut self, block: &TxSet) -> Result<Arc<SubsetValueTable>, GcmError> {
        if let Some(t) = self.tables.get(block) {
            return Ok(t.clone());
        }
        let cap = self.ctx.scheduler.instance_cap;
        if block.len() > cap {
            return Err(GcmError::InstanceTooLarge {
                size: block.len(),
                cap,
            });
        }
        let t = Arc::new(SubsetValueTable::from_fn(block, |_, sub| self.value(sub))?);
        self.tables.insert(block.clone(), t.clone());
        Ok(t)
    }

    pub fn gas(
        &mut self,
        mech: MechanismId,
        block: &TxSet,
        tx: &Transaction,
    ) -> Result<Gas, GcmError> {
        if !block.get(tx.id()).is_some_and(|t| t == tx) {
            return Err(GcmError::TxNotInSet(tx.id().clone()));
        }
        match mech {
            MechanismId::Current | MechanismId::WeightedArea | MechanismId::Constant => {
                gcm::gas(mech, block, tx, &self.ctx)
            }
            MechanismId::Shapley => {
                let t = self.table(block)?;
                gcm::gas_shapley(
                    block,
                    tx,
                    Some(&t),
                    self.ctx.shapley_formulation,
                    self.ctx.permutation_cap,
                )
            }
            MechanismId::Banzhaf | MechanismId::BanzhafNormalized => {
                let t = self.table(block)?;
                gcm::gas_banzhaf(block, tx, Some(&t), mech == MechanismId::BanzhafNormalized)
            }
            MechanismId::Tpm => gcm::gas_tpm(block, tx, &self.value(block)?),
            MechanismId::Esm => gcm::gas_esm(block, tx, &self.value(block)?),
            MechanismId::Xsm => gcm::gas_xsm(block, tx, &self.value(block)?),
        }
    }

    /// `gas_block(subset)`.
    pub fn block_gas(
        &mut self,
        mech: MechanismId,
        block: &TxSet,
        subset: &TxSet,
    ) -> Result<Gas, GcmError> {
        if !subset.is_subset_of(block) {
            return Err(GcmError::SubsetNotContained);
        }
        let mut total = Rational::zero();
        for tx in subset.iter() {
            total += self.gas(mech, block, tx)?;
        }
        Ok(total)
    }

    pub fn check(
        &mut self,
        prop: PropertyId,
        mech: MechanismId,
        instance: &Instance,
    ) -> Result<CheckOutcome, PropertyError> {
        validate(prop, instance)?;
        let mut premise = None;
        let (lhs, rhs, strict_premise) = match (prop, instance) {
            (PropertyId::P6, Instance::Pair { base, tx1, tx2 }) => {
                let b1 = base.with(tx1)?;
                let b2 = base.with(tx2)?;
                let v1 = self.value(&b1)?;
                let v2 = self.value(&b2)?;
                premise = Some([v1.clone(), v2.clone()]);
                if v1 >= v2 {
                    return Ok(self.outcome(
                        prop,
                        mech,
                        instance,
                        Verdict::NotApplicable,
                        None,
                        None,
                        premise,
                        false,
                    ));
                }
                (self.gas(mech, &b1, tx1)?, self.gas(mech, &b2, tx2)?, true)
            }
            (_, Instance::Pair { base, tx1, tx2 }) => {
                let b1 = base.with(tx1)?;
                let b2 = base.with(tx2)?;
                let g1 = self.gas(mech, &b1, tx1)?;
                let g2 = self.gas(mech, &b2, tx2)?;
                (g1, g2, !tx1.similar(tx2))
            }
            (_, Instance::Sets { base, t1, t2 }) => {
                let b1 = base.union(t1)?;
                let b2 = base.union(t2)?;
                let g1 = self.block_gas(mech, &b1, t1)?;
                let g2 = self.block_gas(mech, &b2, t2)?;
                (g1, g2, t1.len() != t2.len())
            }
            (
                _,
                Instance::Bundle {
                    base,
                    tx1,
                    tx2,
                    tx3,
                },
            ) => {
                let split = base.with(tx1)?.with(tx2)?;
                let joined = base.with(tx3)?;
                let g = self.gas(mech, &split, tx1)? + self.gas(mech, &split, tx2)?;
                (g, self.gas(mech, &joined, tx3)?, true)
            }
            (_, Instance::Block { block }) => {
                let g = self.block_gas(mech, block, block)?;
                (g, self.value(block)?, false)
            }
            (_, Instance::Estimation { t1, t2, tx }) => {
                let b1 = t1.with(tx)?;
                let b2 = t2.with(tx)?;
                (self.gas(mech, &b1, tx)?, self.gas(mech, &b2, tx)?, false)
            }
        };
        let verdict = if prop.is_binary() {
            if lhs == rhs {
                Verdict::HoldsWithEquality
            } else {
                Verdict::Violated
            }
        } else if lhs > rhs {
            Verdict::Violated
        } else if lhs == rhs {
            Verdict::HoldsWithEquality
        } else {
            Verdict::HoldsStrictly
        };
        Ok(self.outcome(
            prop,
            mech,
            instance,
            verdict,
            Some(lhs),
            Some(rhs),
            premise,
            strict_premise,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn outcome(
        &self,
        property: PropertyId,
        mechanism: MechanismId,
        instance: &Instance,
        verdict: Verdict,
        lhs: Option<Gas>,
        rhs: Option<Gas>,
        premise: Option<[Time; 2]>,
        strict_premise: bool,
    ) -> CheckOutcome {
        let witness = match (verdict, &lhs, &rhs) {
            (Verdict::Violated, Some(l), Some(r)) => Some(Witness {
                property,
                mechanism,
                threads: self.ctx.scheduler.threads,
                weights: WeightsDoc::from_table(&self.ctx.weights),
                constant: (mechanism == MechanismId::Constant).then(|| self.ctx.constant.clone()),
                instance: instance.clone(),
                expected: Expected {
                    verdict,
                    lhs: l.clone(),
                    rhs: r.clone(),
                    premise: premise.clone(),
                },
                source: String::new(),
            }),
            _ => None,
        };
        CheckOutcome {
            property,
            mechanism,
            verdict,
            lhs,
            rhs,
            premise,
            strict_premise,
            witness,
        }
    }
}

fn malformed(msg: impl Into<String>) -> PropertyError {
    PropertyError::MalformedInstance(msg.into())
}

fn outside(base: &TxSet, tx: &Transaction, role: &str) -> Result<(), PropertyError> {
    if base.contains(tx.id()) {
        return Err(malformed(format!("{role} `{}` is already in T", tx.id())));
    }
    Ok(())
}

fn validate(prop: PropertyId, instance: &Instance) -> Result<(), PropertyError> {
    use PropertyId::*;
    match (prop, instance) {
        (P1 | P2 | P3 | P6, Instance::Pair { base, tx1, tx2 }) => {
            outside(base, tx1, "tx1")?;
            outside(base, tx2, "tx2")?;
            let ok = match prop {
                P1 => tx1.time() == tx2.time() && tx1.keys().is_subset(tx2.keys()),
                P2 => tx1.time() <= tx2.time() && tx1.keys() == tx2.keys(),
                P3 => tx1.time() <= tx2.time() && tx1.keys().is_subset(tx2.keys()),
                _ => true,
            };
            if !ok {
                return Err(malformed(format!(
                    "tx1 and tx2 do not satisfy the premise of {prop}"
                )));
            }
            Ok(())
        }
        (P4, Instance::Sets { base, t1, t2 }) => {
            if !t1.is_subset_of(t2) {
                return Err(malformed("T1 is not a subset of T2"));
            }
            if !t2.is_disjoint_from(base) {
                return Err(malformed("T2 is not disjoint from T"));
            }
            Ok(())
        }
        (
            P5,
            Instance::Bundle {
                base,
                tx1,
                tx2,
                tx3,
            },
        ) => {
            outside(base, tx1, "tx1")?;
            outside(base, tx2, "tx2")?;
            outside(base, tx3, "tx3")?;
            if tx1.id() == tx2.id() {
                return Err(malformed("tx1 and tx2 share an id"));
            }
            let joined = concatenate(tx1, tx2, format!("{}+{}", tx1.id(), tx2.id()))?;
            if !joined.similar(tx3) {
                return Err(malformed("tx3 is not the concatenation of tx1 and tx2"));
            }
            Ok(())
        }
        (P7, Instance::Block { .. }) => Ok(()),
        (P8, Instance::Estimation { t1, t2, tx }) => {
            outside(t1, tx, "tx")?;
            outside(t2, tx, "tx")
        }
        _ => Err(malformed(format!(
            "{prop} does not take a `{}` instance",
            instance.shape()
        ))),
    }
}

/// Evaluate `prop` for `mech` on `instance` under `ctx`.
pub fn check_property(
    prop: PropertyId,
    mech: MechanismId,
    instance: &Instance,
    ctx: &GcmContext,
) -> Result<CheckOutcome, PropertyError> {
    let mut ctx = ctx.clone();
    ctx.vtable = None;
    Evaluator::new(ctx).check(prop, mech, instance)
}

/// Shorthand for `(t, K)` transactions in fixtures and tests.
pub(crate) fn txn(id: &str, t: i64, keys: &[&str]) -> Transaction {
    Transaction::simple(id, t, keys).expect("valid literal transaction")
}

pub(crate) fn txs(list: &[Transaction]) -> TxSet {
    TxSet::from_txs(list.iter().cloned()).expect("distinct literal ids")
}
