//! Transactions, blocks and storage-key weights.
//!
//! A transaction is nothing more than an execution time and the set of
//! storage keys it locks for that whole duration. Identity is carried
//! separately so that distinct transactions may share a `(t, K)` tuple.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::rational::{Rational, Time};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("transaction `{0}` has an empty key set")]
    EmptyKeySet(TxId),
    #[error("transaction `{0}` has a non-positive execution time")]
    NonPositiveTime(TxId),
    #[error("duplicate transaction id `{0}`")]
    DuplicateId(TxId),
    #[error("storage key `{0}` has a non-positive weight")]
    NonPositiveWeight(StorageKey),
    #[error("malformed document: {0}")]
    MalformedDocument(String),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StorageKey(String);

impl StorageKey {
    pub fn new(label: impl Into<String>) -> Self {
        StorageKey(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StorageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for StorageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for StorageKey {
    fn from(s: &str) -> Self {
        StorageKey::new(s)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(String);

impl TxId {
    pub fn new(label: impl Into<String>) -> Self {
        TxId(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TxId {
    fn from(s: &str) -> Self {
        TxId::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transaction {
    id: TxId,
    time: Time,
    keys: BTreeSet<StorageKey>,
}

impl Transaction {
    pub fn new(
        id: impl Into<TxId>,
        time: Time,
        keys: impl IntoIterator<Item = StorageKey>,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        let keys: BTreeSet<StorageKey> = keys.into_iter().collect();
        if keys.is_empty() {
            return Err(ModelError::EmptyKeySet(id));
        }
        if !time.is_positive() {
            return Err(ModelError::NonPositiveTime(id));
        }
        Ok(Transaction { id, time, keys })
    }

    /// Shorthand for tests and fixtures: integer time, string key labels.
    pub fn simple(id: &str, time: i64, keys: &[&str]) -> Result<Self, ModelError> {
        Transaction::new(
            TxId::new(id),
            Rational::integer(time),
            keys.iter().map(|k| StorageKey::new(*k)),
        )
    }

    pub fn id(&self) -> &TxId {
        &self.id
    }

    pub fn time(&self) -> &Time {
        &self.time
    }

    pub fn keys(&self) -> &BTreeSet<StorageKey> {
        &self.keys
    }

    /// Same `(t, K)` tuple, regardless of identity.
    pub fn similar(&self, other: &Transaction) -> bool {
        self.time == other.time && self.keys == other.keys
    }

    pub fn conflicts_with(&self, other: &Transaction) -> bool {
        !self.keys.is_disjoint(&other.keys)
    }

    /// Copy of this transaction under another id.
    pub fn with_id(&self, id: impl Into<TxId>) -> Transaction {
        Transaction {
            id: id.into(),
            time: self.time.clone(),
            keys: self.keys.clone(),
        }
    }
}

impl From<String> for TxId {
    fn from(s: String) -> Self {
        TxId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    /// `t1 <= t2` and `K1 ⊆ K2`; `similar` when the tuples coincide.
    LessOrSimilar {
        similar: bool,
    },
    Incomparable,
}

/// Whether `tx1 ≲ tx2`.
pub fn dominates(tx1: &Transaction, tx2: &Transaction) -> Dominance {
    if tx1.time <= tx2.time && tx1.keys.is_subset(&tx2.keys) {
        Dominance::LessOrSimilar {
            similar: tx1.similar(tx2),
        }
    } else {
        Dominance::Incomparable
    }
}

/// The atomic sequential composition of two transactions: `(t1 + t2, K1 ∪ K2)`.
pub fn concatenate(
    tx1: &Transaction,
    tx2: &Transaction,
    id: impl Into<TxId>,
) -> Result<Transaction, ModelError> {
    let id = id.into();
    if &id == tx1.id() || &id == tx2.id() {
        return Err(ModelError::DuplicateId(id));
    }
    Ok(Transaction {
        id,
        time: &tx1.time + &tx2.time,
        keys: tx1.keys.union(&tx2.keys).cloned().collect(),
    })
}

/// A block: a finite set of transactions with distinct ids, iterated in id order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct TxSet {
    txs: BTreeMap<TxId, Transaction>,
}

impl TxSet {
    pub fn new() -> Self {
        TxSet::default()
    }

    pub fn from_txs(txs: impl IntoIterator<Item = Transaction>) -> Result<Self, ModelError> {
        let mut set = TxSet::new();
        for tx in txs {
            set.insert(tx)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, tx: Transaction) -> Result<(), ModelError> {
        if self.txs.contains_key(tx.id()) {
            return Err(ModelError::DuplicateId(tx.id().clone()));
        }
        self.txs.insert(tx.id().clone(), tx);
        Ok(())
    }

    /// `self ∪ {tx}`.
    pub fn with(&self, tx: &Transaction) -> Result<TxSet, ModelError> {
        let mut out = self.clone();
        out.insert(tx.clone())?;
        Ok(out)
    }

    /// Disjoint union; fails on a shared id.
    pub fn union(&self, other: &TxSet) -> Result<TxSet, ModelError> {
        let mut out = self.clone();
        for tx in other.iter() {
            out.insert(tx.clone())?;
        }
        Ok(out)
    }

    pub fn remove(&mut self, id: &TxId) -> Option<Transaction> {
        self.txs.remove(id)
    }

    pub fn get(&self, id: &TxId) -> Option<&Transaction> {
        self.txs.get(id)
    }

    pub fn contains(&self, id: &TxId) -> bool {
        self.txs.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Transaction> + Clone {
        self.txs.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &TxId> {
        self.txs.keys()
    }

    /// Position of `id` in the id order, i.e. its bit in subset masks.
    pub fn index_of(&self, id: &TxId) -> Option<usize> {
        self.txs.keys().position(|k| k == id)
    }

    pub fn is_subset_of(&self, other: &TxSet) -> bool {
        self.txs
            .iter()
            .all(|(id, tx)| other.get(id).is_some_and(|o| o == tx))
    }

    pub fn is_disjoint_from(&self, other: &TxSet) -> bool {
        self.txs.keys().all(|id| !other.contains(id))
    }

    /// Subset selected by a bitmask over the id order.
    pub fn subset(&self, mask: u64) -> TxSet {
        TxSet {
            txs: self
                .txs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, (k, v))| (k.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn total_time(&self) -> Time {
        self.iter().map(|tx| tx.time()).sum()
    }

    pub fn keys(&self) -> BTreeSet<StorageKey> {
        self.iter()
            .flat_map(|tx| tx.keys().iter().cloned())
            .collect()
    }
}

impl<'a> IntoIterator for &'a TxSet {
    type Item = &'a Transaction;
    type IntoIter = std::collections::btree_map::Values<'a, TxId, Transaction>;

    fn into_iter(self) -> Self::IntoIter {
        self.txs.values()
    }
}

/// Positive per-key weights with a default for unlisted keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightTable {
    weights: BTreeMap<StorageKey, Rational>,
    default_weight: Rational,
}

impl Default for WeightTable {
    fn default() -> Self {
        WeightTable::unit()
    }
}

impl WeightTable {
    /// Every key weighs 1.
    pub fn unit() -> Self {
        WeightTable {
            weights: BTreeMap::new(),
            default_weight: Rational::one(),
        }
    }

    pub fn new(
        weights: BTreeMap<StorageKey, Rational>,
        default_weight: Rational,
    ) -> Result<Self, ModelError> {
        if let Some((k, _)) = weights.iter().find(|(_, w)| !w.is_positive()) {
            return Err(ModelError::NonPositiveWeight(k.clone()));
        }
        if !default_weight.is_positive() {
            return Err(ModelError::NonPositiveWeight(StorageKey::new("<default>")));
        }
        Ok(WeightTable {
            weights,
            default_weight,
        })
    }

    pub fn weight(&self, key: &StorageKey) -> &Rational {
        self.weights.get(key).unwrap_or(&self.default_weight)
    }

    pub fn explicit(&self) -> &BTreeMap<StorageKey, Rational> {
        &self.weights
    }

    pub fn default_weight(&self) -> &Rational {
        &self.default_weight
    }
}

/// Source of storage keys guaranteed not to collide with user-supplied labels
/// (fresh labels use a `#` prefix that block documents never need).
#[derive(Debug, Default)]
pub struct KeyMinter {
    next: AtomicU64,
}

impl KeyMinter {
    pub fn new() -> Self {
        KeyMinter::default()
    }

    pub fn fresh(&self) -> StorageKey {
        let n = self.next.fetch_add(1, Ordering::Relaxed);
        StorageKey(format!("#fresh{n}"))
    }

    /// A key outside every key set of `txs`.
    pub fn fresh_outside(&self, txs: &TxSet) -> StorageKey {
        let used = txs.keys();
        loop {
            let k = self.fresh();
            if !used.contains(&k) {
                return k;
            }
        }
    }
}
