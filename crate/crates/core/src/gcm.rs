//! Gas computation mechanisms.
//!
//! Every mechanism maps a block `T` and a member `tx` to an exact gas amount.
//! `Current`, `WeightedArea` and `Constant` look at `tx` alone; the others
//! are defined through the makespan function `v` restricted to subsets of `T`
//! and need either the block value `v(T)` or the full table of `v(S)` for
//! every `S ⊆ T`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{Transaction, TxId, TxSet, WeightTable};
use crate::rational::{factorial, Gas, Rational, Time};
use crate::scheduler::{subset_value_table, ScheduleError, SchedulerConfig, SubsetValueTable};

/// Largest block for which the permutation form of Shapley values is enumerated.
pub const DEFAULT_PERMUTATION_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GcmError {
    #[error("transaction `{0}` is not in the block")]
    TxNotInSet(TxId),
    #[error("mechanism requires a subset value table")]
    MissingVTable,
    #[error("subset value table was built for a different block")]
    VTableMismatch,
    #[error("instance of {size} transactions exceeds the cap of {cap}")]
    InstanceTooLarge { size: usize, cap: usize },
    #[error("normalized Banzhaf is undefined: raw values sum to zero while v(T) > 0")]
    NormalizationUndefined,
    #[error("subset is not contained in the block")]
    SubsetNotContained,
    #[error("negative marginal contribution of `{tx}`: the scheduler is not monotone in T")]
    NegativeMarginal { tx: TxId },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismId {
    Current,
    WeightedArea,
    Shapley,
    Banzhaf,
    BanzhafNormalized,
    Tpm,
    Esm,
    Xsm,
    Constant,
}

impl MechanismId {
    pub const ALL: [MechanismId; 9] = [
        MechanismId::Current,
        MechanismId::WeightedArea,
        MechanismId::Shapley,
        MechanismId::Banzhaf,
        MechanismId::BanzhafNormalized,
        MechanismId::Tpm,
        MechanismId::Esm,
        MechanismId::Xsm,
        MechanismId::Constant,
    ];

    /// The seven mechanisms compared in the reference property table.
    pub const TABLE: [MechanismId; 7] = [
        MechanismId::Current,
        MechanismId::WeightedArea,
        MechanismId::Shapley,
        MechanismId::Banzhaf,
        MechanismId::Tpm,
        MechanismId::Esm,
        MechanismId::Xsm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MechanismId::Current => "current",
            MechanismId::WeightedArea => "weighted_area",
            MechanismId::Shapley => "shapley",
            MechanismId::Banzhaf => "banzhaf",
            MechanismId::BanzhafNormalized => "banzhaf_normalized",
            MechanismId::Tpm => "tpm",
            MechanismId::Esm => "esm",
            MechanismId::Xsm => "xsm",
            MechanismId::Constant => "constant",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MechanismId::Current => "Current",
            MechanismId::WeightedArea => "W. Area",
            MechanismId::Shapley => "Shapley",
            MechanismId::Banzhaf => "Banzhaf",
            MechanismId::BanzhafNormalized => "Banzhaf (norm.)",
            MechanismId::Tpm => "TPM",
            MechanismId::Esm => "ESM",
            MechanismId::Xsm => "XSM",
            MechanismId::Constant => "Constant",
        }
    }

    /// Gas depends on the transaction alone.
    pub fn has_easy_gas_estimation(&self) -> bool {
        matches!(
            self,
            MechanismId::Current | MechanismId::WeightedArea | MechanismId::Constant
        )
    }

    pub fn needs_value_table(&self) -> bool {
        matches!(
            self,
            MechanismId::Shapley | MechanismId::Banzhaf | MechanismId::BanzhafNormalized
        )
    }

    pub fn needs_block_value(&self) -> bool {
        !self.has_easy_gas_estimation()
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        let id = match norm.as_str() {
            "current" => MechanismId::Current,
            "weighted_area" | "wa" | "area" => MechanismId::WeightedArea,
            "shapley" => MechanismId::Shapley,
            "banzhaf" => MechanismId::Banzhaf,
            "banzhaf_normalized" | "normalized_banzhaf" => MechanismId::BanzhafNormalized,
            "tpm" => MechanismId::Tpm,
            "esm" => MechanismId::Esm,
            "xsm" => MechanismId::Xsm,
            "constant" => MechanismId::Constant,
            _ => return Err(format!("unknown mechanism `{s}`")),
        };
        Ok(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapleyFormulation {
    /// Average over all orderings of the block.
    Permutation,
    /// Factorial-weighted sum over subsets of the other transactions.
    #[default]
    Subset,
}

#[derive(Debug, Clone)]
pub struct GcmContext {
    pub weights: WeightTable,
    pub scheduler: SchedulerConfig,
    pub vtable: Option<Arc<SubsetValueTable>>,
    pub constant: Rational,
    pub shapley_formulation: ShapleyFormulation,
    /// Weighted area keeps the `t` term in `t · (1 + Σ w_k)` unless this is off.
    pub include_current_term: bool,
    pub permutation_cap: usize,
}

impl GcmContext {
    pub fn new(scheduler: SchedulerConfig) -> Self {
        GcmContext {
            weights: WeightTable::unit(),
            scheduler,
            vtable: None,
            constant: Rational::one(),
            shapley_formulation: ShapleyFormulation::Subset,
            include_current_term: true,
            permutation_cap: DEFAULT_PERMUTATION_CAP,
        }
    }

    pub fn with_weights(mut self, weights: WeightTable) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_vtable(mut self, vtable: Arc<SubsetValueTable>) -> Self {
        self.vtable = Some(vtable);
        self
    }

    /// Copy of the context with a value table for `block` when `mech` needs one.
    pub fn prepared(&self, mech: MechanismId, block: &TxSet) -> Result<GcmContext, GcmError> {
        let mut ctx = self.clone();
        let fits = ctx.vtable.as_ref().is_some_and(|t| t.base() == block);
        if mech.needs_value_table() && !fits {
            ctx.vtable = Some(Arc::new(subset_value_table(block, &ctx.scheduler)?));
        } else if !fits {
            ctx.vtable = None;
        }
        Ok(ctx)
    }

    /// `v(T)`, from the table when it covers `block`.
    pub fn block_value(&self, block: &TxSet) -> Result<Time, GcmError> {
        match &self.vtable {
            Some(t) if t.base() == block => Ok(t.grand().clone()),
            Some(_) => Err(GcmError::VTableMismatch),
            None => Ok(self.scheduler.value(block)?),
        }
    }
}

fn member<'a>(block: &'a TxSet, tx: &Transaction) -> Result<&'a Transaction, GcmError> {
    block
        .get(tx.id())
        .filter(|t| *t == tx)
        .ok_or_else(|| GcmError::TxNotInSet(tx.id().clone()))
}

fn table_for<'a>(
    block: &TxSet,
    vtable: Option<&'a SubsetValueTable>,
) -> Result<&'a SubsetValueTable, GcmError> {
    let table = vtable.ok_or(GcmError::MissingVTable)?;
    if table.base() != block {
        return Err(GcmError::VTableMismatch);
    }
    Ok(table)
}

/// `t`.
pub fn gas_current(block: &TxSet, tx: &Transaction) -> Result<Gas, GcmError> {
    member(block, tx)?;
    Ok(tx.time().clone())
}

/// `t · (1 + Σ_{k ∈ K} w_k)`, or `t · Σ w_k` without the current term.
pub fn gas_weighted_area(
    block: &TxSet,
    tx: &Transaction,
    weights: &WeightTable,
    include_current_term: bool,
) -> Result<Gas, GcmError> {
    member(block, tx)?;
    let area: Rational = tx.keys().iter().map(|k| weights.weight(k)).sum();
    let factor = if include_current_term {
        Rational::one() + area
    } else {
        area
    };
    Ok(tx.time() * &factor)
}

fn marginal(table: &SubsetValueTable, without: u64, bit: u64, tx: &TxId) -> Result<Time, GcmError> {
    let m = table.value(without | bit) - table.value(without);
    if m.is_negative() {
        return Err(GcmError::NegativeMarginal { tx: tx.clone() });
    }
    Ok(m)
}

/// Shapley value of `tx` in the cooperative game `(T, v)`.
pub fn gas_shapley(
    block: &TxSet,
    tx: &Transaction,
    vtable: Option<&SubsetValueTable>,
    formulation: ShapleyFormulation,
    permutation_cap: usize,
) -> Result<Gas, GcmError> {
    member(block, tx)?;
    let table = table_for(block, vtable)?;
    let n = block.len();
    let i = block.index_of(tx.id()).expect("member");
    let bit = 1u64 << i;
    match formulation {
        ShapleyFormulation::Subset => {
            let n_fact = factorial(n);
            let weights: Vec<Rational> = (0..n)
                .map(|s| factorial(s) * factorial(n - s - 1) / &n_fact)
                .collect();
            let others = table.full_mask() & !bit;
            let mut total = Rational::zero();
            let mut s = others;
            loop {
                let m = marginal(table, s, bit, tx.id())?;
                if !m.is_zero() {
                    total += &weights[s.count_ones() as usize] * &m;
                }
                if s == 0 {
                    break;
                }
                s = (s - 1) & others;
            }
            Ok(total)
        }
        ShapleyFormulation::Permutation => {
            if n > permutation_cap {
                return Err(GcmError::InstanceTooLarge {
                    size: n,
                    cap: permutation_cap,
                });
            }
            let mut order: Vec<usize> = (0..n).collect();
            let mut sum = Rational::zero();
            let mut count = 0u64;
            loop {
                let before = order
                    .iter()
                    .take_while(|&&j| j != i)
                    .fold(0u64, |m, &j| m | 1 << j);
                sum += marginal(table, before, bit, tx.id())?;
                count += 1;
                if !next_permutation(&mut order) {
                    break;
                }
            }
            Ok(sum / Rational::from(count))
        }
    }
}

/// Lexicographic successor; `false` once the last permutation is reached.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn banzhaf_raw(table: &SubsetValueTable, i: usize, id: &TxId) -> Result<Gas, GcmError> {
    let n = table.base().len();
    let bit = 1u64 << i;
    let others = table.full_mask() & !bit;
    let mut total = Rational::zero();
    let mut s = others;
    loop {
        total += marginal(table, s, bit, id)?;
        if s == 0 {
            break;
        }
        s = (s - 1) & others;
    }
    Ok(total / Rational::from(1u64 << (n - 1)))
}

/// Banzhaf value of `tx`; `normalized` rescales so the block total is `v(T)`.
pub fn gas_banzhaf(
    block: &TxSet,
    tx: &Transaction,
    vtable: Option<&SubsetValueTable>,
    normalized: bool,
) -> Result<Gas, GcmError> {
    member(block, tx)?;
    let table = table_for(block, vtable)?;
    let i = block.index_of(tx.id()).expect("member");
    let raw = banzhaf_raw(table, i, tx.id())?;
    if !normalized {
        return Ok(raw);
    }
    let mut raw_total = Rational::zero();
    for (j, other) in block.iter().enumerate() {
        raw_total += banzhaf_raw(table, j, other.id())?;
    }
    Ok(raw * normalization_factor(&raw_total, table.grand())?)
}

fn normalization_factor(raw_total: &Rational, grand: &Time) -> Result<Rational, GcmError> {
    if raw_total.is_zero() {
        if grand.is_zero() {
            return Ok(Rational::zero());
        }
        return Err(GcmError::NormalizationUndefined);
    }
    Ok(grand / raw_total)
}

/// `t(tx) / Σ_{tx' ∈ T} t(tx') · v(T)`.
pub fn gas_tpm(block: &TxSet, tx: &Transaction, block_value: &Time) -> Result<Gas, GcmError> {
    member(block, tx)?;
    Ok(tx.time() / &block.total_time() * block_value)
}

/// `v(T) / |T|`.
pub fn gas_esm(block: &TxSet, tx: &Transaction, block_value: &Time) -> Result<Gas, GcmError> {
    member(block, tx)?;
    Ok(block_value / &Rational::from(block.len()))
}

/// `v(T) / 3^{|T|}`.
pub fn gas_xsm(block: &TxSet, tx: &Transaction, block_value: &Time) -> Result<Gas, GcmError> {
    member(block, tx)?;
    Ok(block_value / &Rational::integer(3).pow(block.len() as i32))
}

pub fn gas_constant(block: &TxSet, tx: &Transaction, c: &Rational) -> Result<Gas, GcmError> {
    member(block, tx)?;
    Ok(c.clone())
}

/// `gas_T(tx)` under `mech`. Call [`GcmContext::prepared`] first for table-based
/// mechanisms, or this returns [`GcmError::MissingVTable`].
pub fn gas(
    mech: MechanismId,
    block: &TxSet,
    tx: &Transaction,
    ctx: &GcmContext,
) -> Result<Gas, GcmError> {
    let vtable = ctx.vtable.as_deref();
    match mech {
        MechanismId::Current => gas_current(block, tx),
        MechanismId::WeightedArea => {
            gas_weighted_area(block, tx, &ctx.weights, ctx.include_current_term)
        }
        MechanismId::Shapley => gas_shapley(
            block,
            tx,
            vtable,
            ctx.shapley_formulation,
            ctx.permutation_cap,
        ),
        MechanismId::Banzhaf => gas_banzhaf(block, tx, vtable, false),
        MechanismId::BanzhafNormalized => gas_banzhaf(block, tx, vtable, true),
        MechanismId::Tpm => {
            member(block, tx)?;
            gas_tpm(block, tx, &ctx.block_value(block)?)
        }
        MechanismId::Esm => {
            member(block, tx)?;
            gas_esm(block, tx, &ctx.block_value(block)?)
        }
        MechanismId::Xsm => {
            member(block, tx)?;
            gas_xsm(block, tx, &ctx.block_value(block)?)
        }
        MechanismId::Constant => gas_constant(block, tx, &ctx.constant),
    }
}

/// Gas of every transaction in `block`, sharing one value table / block value.
pub fn gas_all(
    mech: MechanismId,
    block: &TxSet,
    ctx: &GcmContext,
) -> Result<BTreeMap<TxId, Gas>, GcmError> {
    let ctx = ctx.prepared(mech, block)?;
    match mech {
        MechanismId::BanzhafNormalized => {
            let table = table_for(block, ctx.vtable.as_deref())?;
            let raws: Vec<Gas> = block
                .iter()
                .enumerate()
                .map(|(i, tx)| banzhaf_raw(table, i, tx.id()))
                .collect::<Result<_, _>>()?;
            let total: Rational = raws.iter().sum();
            let factor = normalization_factor(&total, table.grand())?;
            Ok(block
                .ids()
                .cloned()
                .zip(raws.into_iter().map(|r| r * &factor))
                .collect())
        }
        MechanismId::Tpm | MechanismId::Esm | MechanismId::Xsm => {
            let v = ctx.block_value(block)?;
            block
                .iter()
                .map(|tx| {
                    let g = match mech {
                        MechanismId::Tpm => gas_tpm(block, tx, &v),
                        MechanismId::Esm => gas_esm(block, tx, &v),
                        _ => gas_xsm(block, tx, &v),
                    }?;
                    Ok((tx.id().clone(), g))
                })
                .collect()
        }
        _ => block
            .iter()
            .map(|tx| Ok((tx.id().clone(), gas(mech, block, tx, &ctx)?)))
            .collect(),
    }
}

/// `gas_T(T') = Σ_{tx ∈ T'} gas_T(tx)` for `T' ⊆ T`.
pub fn block_gas(
    mech: MechanismId,
    block: &TxSet,
    subset: &TxSet,
    ctx: &GcmContext,
) -> Result<Gas, GcmError> {
    if !subset.is_subset_of(block) {
        return Err(GcmError::SubsetNotContained);
    }
    if subset.is_empty() {
        return Ok(Rational::zero());
    }
    let all = gas_all(mech, block, ctx)?;
    Ok(subset.ids().map(|id| &all[id]).sum())
}

/// Gas report wire format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasReport {
    pub mechanism: MechanismId,
    pub block_value: Time,
    pub per_tx: BTreeMap<TxId, Gas>,
    pub total: Gas,
}

pub fn gas_report(
    mech: MechanismId,
    block: &TxSet,
    ctx: &GcmContext,
) -> Result<GasReport, GcmError> {
    let ctx = ctx.prepared(mech, block)?;
    let per_tx = gas_all(mech, block, &ctx)?;
    let total = per_tx.values().sum();
    Ok(GasReport {
        mechanism: mech,
        block_value: ctx.block_value(block)?,
        per_tx,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StorageKey;
    use crate::scheduler::Threads;

    fn tx(id: &str, t: i64, keys: &[&str]) -> Transaction {
        Transaction::simple(id, t, keys).unwrap()
    }

    fn set(txs: &[Transaction]) -> TxSet {
        TxSet::from_txs(txs.iter().cloned()).unwrap()
    }

    fn ctx2() -> GcmContext {
        GcmContext::new(SchedulerConfig::new(Threads::Bounded(2)))
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn table(block: &TxSet) -> SubsetValueTable {
        subset_value_table(block, &SchedulerConfig::new(Threads::Bounded(2))).unwrap()
    }

    #[test]
    fn current_examples() {
        let a = tx("tx", 3, &["k2", "k3"]);
        assert_eq!(
            gas_current(&set(std::slice::from_ref(&a)), &a).unwrap(),
            Rational::integer(3)
        );
        let b = set(&[tx("a", 1, &["k1"]), tx("b", 1, &["k2"])]);
        let r = gas_report(MechanismId::Current, &b, &ctx2()).unwrap();
        assert_eq!(r.total, Rational::integer(2));
        assert_eq!(r.block_value, Rational::one());
        let half = Transaction::new("h", q(7, 2), ["k1".into()]).unwrap();
        assert_eq!(
            gas_current(&set(std::slice::from_ref(&half)), &half).unwrap(),
            q(7, 2)
        );
        assert_eq!(
            gas_current(&b, &a),
            Err(GcmError::TxNotInSet(TxId::new("tx")))
        );
    }

    #[test]
    fn weighted_area_examples() {
        let a = tx("tx", 3, &["k2", "k3"]);
        let w = WeightTable::unit();
        assert_eq!(
            gas_weighted_area(&set(std::slice::from_ref(&a)), &a, &w, true).unwrap(),
            Rational::integer(9)
        );
        let mut m = BTreeMap::new();
        m.insert(StorageKey::new("k1"), q(1, 2));
        let w = WeightTable::new(m, Rational::one()).unwrap();
        let b = tx("b", 4, &["k1"]);
        assert_eq!(
            gas_weighted_area(&set(std::slice::from_ref(&b)), &b, &w, true).unwrap(),
            Rational::integer(6)
        );
        assert_eq!(
            gas_weighted_area(&set(std::slice::from_ref(&b)), &b, &w, false).unwrap(),
            Rational::integer(2)
        );
    }

    #[test]
    fn weighted_area_bundling_is_strict_for_distinct_keys() {
        let w = WeightTable::unit();
        let t1 = tx("a", 1, &["k1"]);
        let t2 = tx("b", 1, &["k2"]);
        let t3 = crate::model::concatenate(&t1, &t2, "c").unwrap();
        let both = set(&[t1.clone(), t2.clone()]);
        let split = gas_weighted_area(&both, &t1, &w, true).unwrap()
            + gas_weighted_area(&both, &t2, &w, true).unwrap();
        let joined = gas_weighted_area(&set(std::slice::from_ref(&t3)), &t3, &w, true).unwrap();
        assert_eq!(split, Rational::integer(4));
        assert_eq!(joined, Rational::integer(6));
        assert!(split < joined);
    }

    #[test]
    fn shapley_scheduling_monotonicity_instances() {
        let b = set(&[
            tx("tx1", 1, &["k1"]),
            tx("tx2", 3, &["k2"]),
            tx("tx3", 2, &["k1"]),
        ]);
        let t = table(&b);
        let tx3 = b.get(&"tx3".into()).unwrap();
        for f in [ShapleyFormulation::Subset, ShapleyFormulation::Permutation] {
            assert_eq!(
                gas_shapley(&b, tx3, Some(&t), f, 8).unwrap(),
                Rational::one()
            );
        }
        let b = set(&[
            tx("tx1", 1, &["k1"]),
            tx("tx2", 3, &["k2"]),
            tx("tx4", 1, &["k2"]),
        ]);
        let t = table(&b);
        let tx4 = b.get(&"tx4".into()).unwrap();
        for f in [ShapleyFormulation::Subset, ShapleyFormulation::Permutation] {
            assert_eq!(gas_shapley(&b, tx4, Some(&t), f, 8).unwrap(), q(5, 6));
        }
    }

    #[test]
    fn shapley_errors_and_singleton() {
        let a = tx("a", 4, &["k1"]);
        let b = set(std::slice::from_ref(&a));
        let t = table(&b);
        assert_eq!(
            gas_shapley(&b, &a, Some(&t), ShapleyFormulation::Subset, 8).unwrap(),
            Rational::integer(4)
        );
        assert_eq!(
            gas_shapley(&b, &a, None, ShapleyFormulation::Subset, 8),
            Err(GcmError::MissingVTable)
        );
        let other = set(&[a.clone(), tx("z", 1, &["k9"])]);
        assert_eq!(
            gas_shapley(&other, &a, Some(&t), ShapleyFormulation::Subset, 8),
            Err(GcmError::VTableMismatch)
        );
        let t2 = table(&other);
        assert_eq!(
            gas_shapley(&other, &a, Some(&t2), ShapleyFormulation::Permutation, 1),
            Err(GcmError::InstanceTooLarge { size: 2, cap: 1 })
        );
    }

    #[test]
    fn banzhaf_inefficiency_instance() {
        let b = set(&[
            tx("tx1", 1, &["k1"]),
            tx("tx2", 1, &["k1"]),
            tx("tx3", 1, &["k2"]),
        ]);
        let r = gas_report(MechanismId::Banzhaf, &b, &ctx2()).unwrap();
        assert_eq!(r.per_tx[&TxId::new("tx1")], q(3, 4));
        assert_eq!(r.per_tx[&TxId::new("tx2")], q(3, 4));
        assert_eq!(r.per_tx[&TxId::new("tx3")], q(1, 4));
        assert_eq!(r.total, q(7, 4));
        assert_eq!(r.block_value, Rational::integer(2));

        let n = gas_report(MechanismId::BanzhafNormalized, &b, &ctx2()).unwrap();
        assert_eq!(n.per_tx[&TxId::new("tx1")], q(3, 4) * q(8, 7));
        assert_eq!(n.per_tx[&TxId::new("tx3")], q(1, 4) * q(8, 7));
        assert_eq!(n.total, Rational::integer(2));
        // Single-transaction path agrees with the batch path.
        let c = ctx2().prepared(MechanismId::BanzhafNormalized, &b).unwrap();
        let t3 = b.get(&"tx3".into()).unwrap();
        assert_eq!(
            gas(MechanismId::BanzhafNormalized, &b, t3, &c).unwrap(),
            q(2, 7)
        );
    }

    #[test]
    fn banzhaf_singleton() {
        let a = tx("a", 3, &["k1"]);
        let b = set(std::slice::from_ref(&a));
        assert_eq!(
            gas_banzhaf(&b, &a, Some(&table(&b)), false).unwrap(),
            Rational::integer(3)
        );
    }

    #[test]
    fn tpm_esm_xsm_examples() {
        let b = set(&[
            tx("tx1", 1, &["k1"]),
            tx("tx2", 3, &["k2"]),
            tx("tx3", 2, &["k1"]),
        ]);
        let tx3 = b.get(&"tx3".into()).unwrap();
        assert_eq!(
            gas_tpm(&b, tx3, &Rational::integer(3)).unwrap(),
            Rational::one()
        );
        let b2 = set(&[
            tx("tx1", 1, &["k1"]),
            tx("tx2", 3, &["k2"]),
            tx("tx4", 1, &["k2"]),
        ]);
        let tx4 = b2.get(&"tx4".into()).unwrap();
        assert_eq!(gas_tpm(&b2, tx4, &Rational::integer(4)).unwrap(), q(4, 5));
        let single = tx("s", 5, &["k1"]);
        let sb = set(std::slice::from_ref(&single));
        assert_eq!(
            gas_tpm(&sb, &single, &Rational::integer(5)).unwrap(),
            Rational::integer(5)
        );

        assert_eq!(
            gas_esm(&b, tx3, &Rational::integer(3)).unwrap(),
            Rational::one()
        );
        let pair = set(&[tx("a", 1, &["k1"]), tx("b", 2, &["k1"])]);
        let pa = pair.get(&"a".into()).unwrap();
        assert_eq!(gas_esm(&pair, pa, &Rational::integer(3)).unwrap(), q(3, 2));
        assert_eq!(
            gas_esm(&sb, &single, &Rational::integer(5)).unwrap(),
            Rational::integer(5)
        );

        let one = set(&[tx("a", 1, &["k1"])]);
        let oa = one.get(&"a".into()).unwrap();
        assert_eq!(gas_xsm(&one, oa, &Rational::one()).unwrap(), q(1, 3));
        let two = set(&[tx("a", 1, &["k1"]), tx("b", 1, &["k2"])]);
        let r = gas_report(MechanismId::Xsm, &two, &ctx2()).unwrap();
        assert_eq!(r.per_tx[&TxId::new("a")], q(1, 9));
        assert_eq!(r.total, q(2, 9));
        assert_eq!(gas_xsm(&b, tx3, &Rational::integer(2)).unwrap(), q(2, 27));
    }

    #[test]
    fn constant_examples() {
        let a = tx("a", 1, &["k1"]);
        let b = tx("b", 7, &["k2"]);
        let blk = set(&[a.clone(), b.clone()]);
        assert_eq!(
            gas_constant(&blk, &a, &Rational::one()).unwrap(),
            Rational::one()
        );
        assert_eq!(gas_constant(&blk, &a, &q(5, 2)).unwrap(), q(5, 2));
        assert_eq!(
            gas_constant(&blk, &a, &q(5, 2)).unwrap(),
            gas_constant(&blk, &b, &q(5, 2)).unwrap()
        );
    }

    #[test]
    fn block_gas_examples() {
        let b = set(&[
            tx("tx1", 1, &["k1"]),
            tx("tx2", 1, &["k1"]),
            tx("tx3", 1, &["k2"]),
        ]);
        assert_eq!(
            block_gas(MechanismId::Shapley, &b, &b, &ctx2()).unwrap(),
            Rational::integer(2)
        );
        assert_eq!(
            block_gas(MechanismId::Banzhaf, &b, &b, &ctx2()).unwrap(),
            q(7, 4)
        );
        assert_eq!(
            block_gas(MechanismId::Shapley, &b, &TxSet::new(), &ctx2()).unwrap(),
            Rational::zero()
        );
        let outside = set(&[tx("zz", 1, &["k1"])]);
        assert_eq!(
            block_gas(MechanismId::Current, &b, &outside, &ctx2()),
            Err(GcmError::SubsetNotContained)
        );
    }

    #[test]
    fn greedy_scheduler_can_be_selected() {
        let b = set(&[tx("a", 1, &["k1"]), tx("b", 2, &["k2"])]);
        let ctx = GcmContext::new(SchedulerConfig::new(Threads::Bounded(2)).greedy());
        assert_eq!(
            block_gas(MechanismId::Esm, &b, &b, &ctx).unwrap(),
            Rational::integer(2)
        );
    }

    #[test]
    fn mechanism_names_round_trip() {
        for m in MechanismId::ALL {
            assert_eq!(m.name().parse::<MechanismId>().unwrap(), m);
        }
        assert!("nope".parse::<MechanismId>().is_err());
    }

    #[test]
    fn permutations_enumerate_factorial_orders() {
        let mut v = vec![0, 1, 2, 3];
        let mut c = 1;
        while next_permutation(&mut v) {
            c += 1;
        }
        assert_eq!(c, 24);
    }
}
