//! Concurrent schedules under the lock-based execution policy.
//!
//! A schedule assigns each transaction one contiguous execution interval.
//! Transactions whose key sets intersect may not overlap, and when the
//! thread count is bounded no more than `n` intervals may be open at once.
//! Which thread runs which transaction is not tracked.
//!
//! [`optimal_makespan`] is the value function `v(T)` used by every
//! block-level gas mechanism.

mod axioms;
mod exact;
mod problem;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{Transaction, TxId, TxSet};
use crate::rational::{Rational, Time};

pub use axioms::{check_scheduler_axioms, Axiom, AxiomReport, AxiomWitness};
use problem::Problem;

/// Default maximum block size for exhaustive computations.
pub const DEFAULT_INSTANCE_CAP: usize = 12;
/// Subset masks are `u64`, the exact solver uses `u32` conflict masks.
pub const HARD_INSTANCE_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("instance of {size} transactions exceeds the cap of {cap}")]
    InstanceTooLarge { size: usize, cap: usize },
    #[error("at least 2 threads are required, got {0}")]
    TooFewThreads(usize),
    #[error("transaction times do not fit a common integer time scale")]
    TimeScaleOverflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Threads {
    Bounded(usize),
    Unbounded,
}

impl Threads {
    pub fn bounded(n: usize) -> Result<Self, ScheduleError> {
        if n < 2 {
            return Err(ScheduleError::TooFewThreads(n));
        }
        Ok(Threads::Bounded(n))
    }

    pub fn limit(&self) -> Option<usize> {
        match self {
            Threads::Bounded(n) => Some(*n),
            Threads::Unbounded => None,
        }
    }
}

impl fmt::Display for Threads {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threads::Bounded(n) => write!(f, "{n}"),
            Threads::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl std::str::FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("unbounded") || s == "inf" {
            return Ok(Threads::Unbounded);
        }
        let n: usize = s
            .parse()
            .map_err(|_| format!("expected a thread count or `unbounded`, got `{s}`"))?;
        Threads::bounded(n).map_err(|e| e.to_string())
    }
}

impl Serialize for Threads {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Threads::Bounded(n) => s.serialize_u64(*n as u64),
            Threads::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Threads {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Threads::bounded(n).map_err(serde::de::Error::custom),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Which scheduler produces `v(T)`. Axiom-dependent claims only hold for `Exact`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    #[default]
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub threads: Threads,
    pub instance_cap: usize,
    #[serde(default)]
    pub kind: SchedulerKind,
}

impl SchedulerConfig {
    pub fn new(threads: Threads) -> Self {
        SchedulerConfig {
            threads,
            instance_cap: DEFAULT_INSTANCE_CAP,
            kind: SchedulerKind::Exact,
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.instance_cap = cap.min(HARD_INSTANCE_CAP);
        self
    }

    pub fn greedy(mut self) -> Self {
        self.kind = SchedulerKind::Greedy;
        self
    }

    /// `v(T)` under the configured scheduler.
    pub fn value(&self, txs: &TxSet) -> Result<Time, ScheduleError> {
        match self.kind {
            SchedulerKind::Exact => optimal_makespan(txs, self),
            SchedulerKind::Greedy => Ok(makespan(&greedy_schedule(txs, self)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub start: Time,
    pub end: Time,
}

/// Start and end instants for each transaction of a block.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schedule {
    slots: BTreeMap<TxId, Slot>,
}

/// The schedule wire format: `{"starts":{"txid": int|"p/q"}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDoc {
    pub starts: BTreeMap<TxId, Time>,
}

impl Schedule {
    /// Schedule from start instants; entries without a matching transaction are dropped.
    pub fn from_starts(starts: &BTreeMap<TxId, Time>, txs: &TxSet) -> Self {
        Schedule {
            slots: starts
                .iter()
                .filter_map(|(id, s)| {
                    txs.get(id).map(|tx| {
                        (
                            id.clone(),
                            Slot {
                                start: s.clone(),
                                end: s + tx.time(),
                            },
                        )
                    })
                })
                .collect(),
        }
    }

    pub fn slots(&self) -> &BTreeMap<TxId, Slot> {
        &self.slots
    }

    pub fn slot(&self, id: &TxId) -> Option<&Slot> {
        self.slots.get(id)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn to_doc(&self) -> ScheduleDoc {
        ScheduleDoc {
            starts: self
                .slots
                .iter()
                .map(|(id, s)| (id.clone(), s.start.clone()))
                .collect(),
        }
    }

    /// Recover a thread assignment (first free lane in start order), for rendering.
    pub fn lanes(&self) -> BTreeMap<TxId, usize> {
        let mut order: Vec<(&TxId, &Slot)> = self.slots.iter().collect();
        order.sort_by(|a, b| a.1.start.cmp(&b.1.start).then(a.0.cmp(b.0)));
        let mut lane_free: Vec<Time> = Vec::new();
        let mut out = BTreeMap::new();
        for (id, slot) in order {
            let lane = match lane_free.iter().position(|f| f <= &slot.start) {
                Some(l) => l,
                None => {
                    lane_free.push(Rational::zero());
                    lane_free.len() - 1
                }
            };
            lane_free[lane] = slot.end.clone();
            out.insert(id.clone(), lane);
        }
        out
    }
}

/// Maximum end instant; zero for an empty schedule.
pub fn makespan(schedule: &Schedule) -> Time {
    schedule
        .slots
        .values()
        .map(|s| s.end.clone())
        .max()
        .unwrap_or_else(Rational::zero)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    ConflictOverlap {
        first: TxId,
        second: TxId,
    },
    ConcurrencyExceeded {
        at: Time,
        running: usize,
        threads: usize,
    },
    MissingTx {
        id: TxId,
    },
    UnknownTx {
        id: TxId,
    },
    NegativeStart {
        id: TxId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.valid
    }
}

pub fn validate_schedule(
    schedule: &ScheduleDoc,
    txs: &TxSet,
    cfg: &SchedulerConfig,
) -> ValidityReport {
    let mut violations = Vec::new();
    for tx in txs.iter() {
        if !schedule.starts.contains_key(tx.id()) {
            violations.push(Violation::MissingTx {
                id: tx.id().clone(),
            });
        }
    }
    for (id, start) in &schedule.starts {
        if !txs.contains(id) {
            violations.push(Violation::UnknownTx { id: id.clone() });
        } else if start.is_negative() {
            violations.push(Violation::NegativeStart { id: id.clone() });
        }
    }
    let placed = Schedule::from_starts(&schedule.starts, txs);
    let entries: Vec<(&Transaction, &Slot)> = placed
        .slots
        .iter()
        .map(|(id, s)| (txs.get(id).expect("filtered by from_starts"), s))
        .collect();
    for (i, (a, sa)) in entries.iter().enumerate() {
        for (b, sb) in &entries[i + 1..] {
            if a.conflicts_with(b) && sa.start < sb.end && sb.start < sa.end {
                violations.push(Violation::ConflictOverlap {
                    first: a.id().clone(),
                    second: b.id().clone(),
                });
            }
        }
    }
    if let Some(n) = cfg.threads.limit() {
        let instants: BTreeSet<&Time> = entries.iter().map(|(_, s)| &s.start).collect();
        for at in instants {
            let running = entries
                .iter()
                .filter(|(_, s)| &s.start <= at && at < &s.end)
                .count();
            if running > n {
                violations.push(Violation::ConcurrencyExceeded {
                    at: at.clone(),
                    running,
                    threads: n,
                });
            }
        }
    }
    ValidityReport {
        valid: violations.is_empty(),
        violations,
    }
}

fn check_cap(txs: &TxSet, cfg: &SchedulerConfig) -> Result<(), ScheduleError> {
    let cap = cfg.instance_cap.min(HARD_INSTANCE_CAP);
    if txs.len() > cap {
        return Err(ScheduleError::InstanceTooLarge {
            size: txs.len(),
            cap,
        });
    }
    Ok(())
}

/// Exact minimum makespan `v(T)` over all valid schedules.
pub fn optimal_makespan(txs: &TxSet, cfg: &SchedulerConfig) -> Result<Time, ScheduleError> {
    check_cap(txs, cfg)?;
    let problem = Problem::build(txs, cfg.threads)?;
    Ok(problem.to_time(exact::solve(&problem).makespan))
}

/// A schedule attaining [`optimal_makespan`]. Ties resolve deterministically.
pub fn optimal_schedule(txs: &TxSet, cfg: &SchedulerConfig) -> Result<Schedule, ScheduleError> {
    check_cap(txs, cfg)?;
    let problem = Problem::build(txs, cfg.threads)?;
    let solution = exact::solve(&problem);
    Ok(problem.schedule(txs, &problem.canonical(&solution.starts)))
}

/// Deterministic list scheduling: longest transaction first (ties by id),
/// starting every eligible transaction at each event instant. No size cap.
pub fn greedy_schedule(txs: &TxSet, cfg: &SchedulerConfig) -> Result<Schedule, ScheduleError> {
    if txs.len() > HARD_INSTANCE_CAP {
        return greedy_schedule_rational(txs, cfg);
    }
    let problem = Problem::build(txs, cfg.threads)?;
    let starts = exact::greedy(&problem);
    Ok(problem.schedule(txs, &starts))
}

/// Same rule as [`greedy_schedule`] in exact rational arithmetic, for blocks
/// larger than the bitmask representation supports.
fn greedy_schedule_rational(txs: &TxSet, cfg: &SchedulerConfig) -> Result<Schedule, ScheduleError> {
    let mut order: Vec<&Transaction> = txs.iter().collect();
    order.sort_by(|a, b| b.time().cmp(a.time()).then(a.id().cmp(b.id())));
    let limit = cfg.threads.limit().unwrap_or(usize::MAX);
    let mut starts: BTreeMap<TxId, Time> = BTreeMap::new();
    let mut running: Vec<(&Transaction, Time)> = Vec::new();
    let mut clock = Rational::zero();
    while starts.len() < txs.len() {
        running.retain(|(_, end)| end > &clock);
        for tx in &order {
            if starts.contains_key(tx.id()) || running.len() >= limit {
                continue;
            }
            if running.iter().any(|(r, _)| r.conflicts_with(tx)) {
                continue;
            }
            starts.insert(tx.id().clone(), clock.clone());
            running.push((tx, &clock + tx.time()));
        }
        if let Some(next) = running.iter().map(|(_, e)| e.clone()).min() {
            clock = next;
        }
    }
    Ok(Schedule::from_starts(&starts, txs))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetValueTable {
    base: TxSet,
    values: Vec<Time>,
}

impl SubsetValueTable {
    /// Build from an arbitrary value function, evaluated once per subset.
    pub fn from_fn<E>(
        base: &TxSet,
        mut value: impl FnMut(u64, &TxSet) -> Result<Time, E>,
    ) -> Result<Self, E> {
        let n = base.len();
        let mut values = Vec::with_capacity(1 << n);
        for mask in 0..(1u64 << n) {
            values.push(value(mask, &base.subset(mask))?);
        }
        Ok(SubsetValueTable {
            base: base.clone(),
            values,
        })
    }

    pub fn base(&self) -> &TxSet {
        &self.base
    }

    pub fn value(&self, mask: u64) -> &Time {
        &self.values[mask as usize]
    }

    pub fn full_mask(&self) -> u64 {
        (1u64 << self.base.len()) - 1
    }

    /// `v(T)` for the whole base set.
    pub fn grand(&self) -> &Time {
        self.value(self.full_mask())
    }

    pub fn values(&self) -> &[Time] {
        &self.values
    }

    /// Bitmask of a subset of the base, if it is one.
    pub fn mask_of(&self, subset: &TxSet) -> Option<u64> {
        let mut mask = 0u64;
        for tx in subset.iter() {
            let i = self.base.index_of(tx.id())?;
            mask |= 1 << i;
        }
        Some(mask)
    }
}

/// `v(S)` for every `S ⊆ T`, evaluated in parallel over subsets.
pub fn subset_value_table(
    txs: &TxSet,
    cfg: &SchedulerConfig,
) -> Result<SubsetValueTable, ScheduleError> {
    check_cap(txs, cfg)?;
    let values: Vec<Time> = match cfg.kind {
        SchedulerKind::Exact => {
            let problem = Problem::build(txs, cfg.threads)?;
            (0..(1u64 << txs.len()))
                .into_par_iter()
                .map(|mask| problem.to_time(exact::solve(&problem.restrict(mask)).makespan))
                .collect()
        }
        SchedulerKind::Greedy => (0..(1u64 << txs.len()))
            .into_par_iter()
            .map(|mask| cfg.value(&txs.subset(mask)))
            .collect::<Result<_, _>>()?,
    };
    Ok(SubsetValueTable {
        base: txs.clone(),
        values,
    })
}
