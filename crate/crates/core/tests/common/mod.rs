#![allow(dead_code)]

use pargas_core::scheduler::{SchedulerConfig, Threads};
use pargas_core::{Rational, StorageKey, Transaction, TxSet};
use proptest::prelude::*;

pub fn tx(id: &str, t: i64, keys: &[&str]) -> Transaction {
    Transaction::simple(id, t, keys).unwrap()
}

pub fn set(txs: Vec<Transaction>) -> TxSet {
    TxSet::from_txs(txs).unwrap()
}

pub fn cfg(n: usize) -> SchedulerConfig {
    SchedulerConfig::new(Threads::bounded(n).unwrap())
}

pub fn four_tx_block() -> TxSet {
    set(vec![
        tx("tx1", 2, &["k2", "k3", "k4", "k5", "k6", "k7", "k8"]),
        tx("tx2", 4, &["k2", "k3"]),
        tx("tx3", 5, &["k4", "k5", "k6"]),
        tx("tx4", 2, &["k7", "k8"]),
    ])
}

/// Blocks of up to `max` transactions with integer times in 1..=max_time over `keys` keys.
pub fn blocks(max: usize, max_time: i64, keys: u32) -> impl Strategy<Value = TxSet> {
    prop::collection::vec((1..=max_time, 1u32..(1 << keys)), 1..=max).prop_map(|raw| {
        let txs = raw.into_iter().enumerate().map(|(i, (t, mask))| {
            let ks = (0..32)
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| StorageKey::new(format!("k{b}")));
            Transaction::new(format!("tx{i}"), Rational::integer(t), ks).unwrap()
        });
        TxSet::from_txs(txs).unwrap()
    })
}

pub fn threads() -> impl Strategy<Value = usize> {
    2usize..=4
}

pub fn int(r: &Rational) -> i64 {
    assert!(r.is_integer(), "{r} is not an integer");
    r.to_string().parse().unwrap()
}
