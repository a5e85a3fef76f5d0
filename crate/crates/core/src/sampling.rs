//! Seeded random instance generation for the property and axiom harnesses.
//!
//! Every trial gets its own generator derived from `(seed, stream, index)`,
//! so trials can run in any order (or in parallel) and still reproduce.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{StorageKey, Transaction, TxId, TxSet};
use crate::rational::{Rational, Time};
use crate::scheduler::Threads;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Upper bound on the size of any block a trial prices.
    pub max_txs: usize,
    /// Number of distinct storage keys; small pools mean many conflicts.
    pub key_pool: usize,
    pub min_time: i64,
    pub max_time: i64,
    pub max_keys_per_tx: usize,
    pub threads: Vec<Threads>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            max_txs: 6,
            key_pool: 6,
            min_time: 1,
            max_time: 5,
            max_keys_per_tx: 3,
            threads: vec![Threads::Bounded(2), Threads::Bounded(3)],
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        SamplerConfig {
            seed,
            ..SamplerConfig::default()
        }
    }
}

pub struct InstanceSampler<'a> {
    cfg: &'a SamplerConfig,
    rng: ChaCha8Rng,
    next_id: usize,
}

impl<'a> InstanceSampler<'a> {
    pub fn for_trial(cfg: &'a SamplerConfig, stream: &str, index: u64) -> Self {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&cfg.seed.to_le_bytes());
        seed[8..16].copy_from_slice(&index.to_le_bytes());
        // FNV-1a of the stream label keeps different cells independent.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in stream.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        seed[16..24].copy_from_slice(&h.to_le_bytes());
        InstanceSampler {
            cfg,
            rng: ChaCha8Rng::from_seed(seed),
            next_id: 0,
        }
    }

    pub fn config(&self) -> &SamplerConfig {
        self.cfg
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn threads(&mut self) -> Threads {
        *self
            .cfg
            .threads
            .choose(&mut self.rng)
            .unwrap_or(&Threads::Bounded(2))
    }

    pub fn fresh_id(&mut self) -> TxId {
        let id = TxId::new(format!("t{:02}", self.next_id));
        self.next_id += 1;
        id
    }

    pub fn key(&mut self) -> StorageKey {
        let k = self.rng.gen_range(1..=self.cfg.key_pool.max(1));
        StorageKey::new(format!("k{k}"))
    }

    pub fn key_set(&mut self) -> BTreeSet<StorageKey> {
        let cap = self.cfg.max_keys_per_tx.clamp(1, self.cfg.key_pool.max(1));
        // Small key sets dominate: P(size = s) halves with each extra key.
        let mut size = 1;
        while size < cap && self.rng.gen_bool(0.45) {
            size += 1;
        }
        let mut keys = BTreeSet::new();
        while keys.len() < size {
            keys.insert(self.key());
        }
        keys
    }

    pub fn time(&mut self) -> Time {
        Rational::integer(self.rng.gen_range(self.cfg.min_time..=self.cfg.max_time))
    }

    pub fn size(&mut self, lo: usize, hi: usize) -> usize {
        if hi <= lo {
            lo
        } else {
            self.rng.gen_range(lo..=hi)
        }
    }

    pub fn tx(&mut self) -> Transaction {
        let id = self.fresh_id();
        let time = self.time();
        let keys = self.key_set();
        Transaction::new(id, time, keys).expect("sampled transactions are valid")
    }

    pub fn tx_with(&mut self, time: Time, keys: BTreeSet<StorageKey>) -> Transaction {
        let id = self.fresh_id();
        Transaction::new(id, time, keys).expect("sampled transactions are valid")
    }

    pub fn tx_set(&mut self, size: usize) -> TxSet {
        TxSet::from_txs((0..size).map(|_| self.tx())).expect("fresh ids are distinct")
    }

    /// `keys` plus up to two keys from the pool it does not already contain.
    pub fn superset_of(&mut self, keys: &BTreeSet<StorageKey>) -> BTreeSet<StorageKey> {
        let mut out = keys.clone();
        let extra = self.size(1, 2);
        let pool = self.cfg.key_pool.max(1);
        let mut tries = 0;
        while out.len() < keys.len() + extra && out.len() < pool && tries < 32 {
            out.insert(self.key());
            tries += 1;
        }
        out
    }

    /// A time `>= t`, strictly larger with high probability.
    pub fn time_at_least(&mut self, t: &Time) -> Time {
        let bump = self.rng.gen_range(0..=self.cfg.max_time.max(1));
        t + &Rational::integer(bump)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }
}
