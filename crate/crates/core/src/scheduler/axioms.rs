//! Randomized checks of the four scheduler axioms:
//! S1 monotone in `T`, S2 monotone under bundling, S3 monotone in `(t, K)`,
//! S4 `v(∅) = 0`.

use rayon::prelude::*;
use serde::Serialize;

use super::{ScheduleError, SchedulerConfig};
use crate::model::{concatenate, TxSet};
use crate::rational::{Rational, Time};
use crate::sampling::{InstanceSampler, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axiom {
    S1,
    S2,
    S3,
    S4,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomWitness {
    pub axiom: Axiom,
    pub trial: u64,
    pub threads: super::Threads,
    pub smaller: String,
    pub larger: String,
    pub smaller_value: Time,
    pub larger_value: Time,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub trials: u64,
    pub checks: [u64; 4],
    pub witnesses: Vec<AxiomWitness>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.witnesses.is_empty()
    }
}

fn describe(txs: &TxSet) -> String {
    txs.iter()
        .map(|tx| {
            let keys: Vec<_> = tx.keys().iter().map(|k| k.as_str()).collect();
            format!("({},{{{}}})", tx.time(), keys.join(","))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Run `trials` structured trials against `sched`, reporting the first
/// witness per axiom (lowest trial index).
pub fn check_scheduler_axioms<F>(sched: F, sampler: &SamplerConfig, trials: u64) -> AxiomReport
where
    F: Fn(&TxSet, &SchedulerConfig) -> Result<Time, ScheduleError> + Sync,
{
    let trials = trials.max(1);
    let per_trial: Vec<(Vec<AxiomWitness>, [u64; 4])> = (0..trials)
        .into_par_iter()
        .map(|i| one_trial(&sched, sampler, i))
        .collect();

    let mut checks = [0u64; 4];
    let mut witnesses: Vec<AxiomWitness> = Vec::new();
    for (found, counts) in per_trial {
        for (c, n) in checks.iter_mut().zip(counts) {
            *c += n;
        }
        for w in found {
            if !witnesses.iter().any(|x| x.axiom == w.axiom) {
                witnesses.push(w);
            }
        }
    }

    let empty_cfg = SchedulerConfig::new(super::Threads::Bounded(2));
    checks[3] += 1;
    match sched(&TxSet::new(), &empty_cfg) {
        Ok(v) if v.is_zero() => {}
        other => witnesses.push(AxiomWitness {
            axiom: Axiom::S4,
            trial: trials,
            threads: empty_cfg.threads,
            smaller: String::new(),
            larger: String::new(),
            smaller_value: Rational::zero(),
            larger_value: other.unwrap_or_else(|_| Rational::integer(-1)),
        }),
    }
    AxiomReport {
        trials,
        checks,
        witnesses,
    }
}

fn one_trial<F>(sched: &F, sampler: &SamplerConfig, index: u64) -> (Vec<AxiomWitness>, [u64; 4])
where
    F: Fn(&TxSet, &SchedulerConfig) -> Result<Time, ScheduleError>,
{
    let mut s = InstanceSampler::for_trial(sampler, "scheduler-axioms", index);
    let cfg = SchedulerConfig::new(s.threads());
    let mut found = Vec::new();
    let mut counts = [0u64; 4];
    let max = sampler.max_txs.max(2);
    let mut record = |axiom: Axiom, small: &TxSet, large: &TxSet, counts: &mut [u64; 4]| {
        counts[axiom as usize] += 1;
        let (Ok(a), Ok(b)) = (sched(small, &cfg), sched(large, &cfg)) else {
            return;
        };
        if a > b {
            found.push(AxiomWitness {
                axiom,
                trial: index,
                threads: cfg.threads,
                smaller: describe(small),
                larger: describe(large),
                smaller_value: a,
                larger_value: b,
            });
        }
    };

    // S1: a random subset of a random superset.
    let big_size = s.size(1, max);
    let big = s.tx_set(big_size);
    let mask = s.rng().next_u64_masked(big_size);
    record(Axiom::S1, &big.subset(mask), &big, &mut counts);

    // S2: T ∪ {tx1, tx2} against T ∪ {tx1 ⊕ tx2}.
    let base_size = s.size(0, max - 2);
    let base = s.tx_set(base_size);
    let (tx1, tx2) = (s.tx(), s.tx());
    let id3 = s.fresh_id();
    let tx3 = concatenate(&tx1, &tx2, id3).expect("fresh id");
    let split = base
        .with(&tx1)
        .and_then(|b| b.with(&tx2))
        .expect("fresh ids");
    let joined = base.with(&tx3).expect("fresh id");
    record(Axiom::S2, &split, &joined, &mut counts);

    // S3: replace tx1 by some tx2 with tx1 ≲ tx2.
    let base_size = s.size(0, max - 1);
    let base = s.tx_set(base_size);
    let small = s.tx();
    let t2 = s.time_at_least(small.time());
    let k2 = if s.chance(0.5) {
        s.superset_of(small.keys())
    } else {
        small.keys().clone()
    };
    let large = s.tx_with(t2, k2);
    record(
        Axiom::S3,
        &base.with(&small).expect("fresh id"),
        &base.with(&large).expect("fresh id"),
        &mut counts,
    );

    (found, counts)
}

trait MaskExt {
    fn next_u64_masked(&mut self, bits: usize) -> u64;
}

impl<R: rand::RngCore> MaskExt for R {
    fn next_u64_masked(&mut self, bits: usize) -> u64 {
        if bits == 0 {
            0
        } else {
            self.next_u64() & ((1u64 << bits) - 1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Transaction;
    use crate::scheduler::{optimal_makespan, Threads};

    #[test]
    fn exact_scheduler_satisfies_axioms() {
        let sampler = SamplerConfig {
            max_txs: 5,
            ..SamplerConfig::with_seed(11)
        };
        let report = check_scheduler_axioms(optimal_makespan, &sampler, 200);
        assert!(report.passed(), "{:?}", report.witnesses);
        assert_eq!(report.checks[0], 200);
        assert_eq!(report.checks[3], 1);
    }

    #[test]
    fn s1_with_disjoint_keys_holds_with_equality() {
        let cfg = SchedulerConfig::new(Threads::Unbounded);
        let a = Transaction::simple("a", 2, &["k1"]).unwrap();
        let b = Transaction::simple("b", 1, &["k2"]).unwrap();
        let small = TxSet::from_txs([a.clone()]).unwrap();
        let large = TxSet::from_txs([a, b]).unwrap();
        assert_eq!(
            optimal_makespan(&small, &cfg).unwrap(),
            optimal_makespan(&large, &cfg).unwrap()
        );
    }

    #[test]
    fn broken_scheduler_is_caught() {
        // Claims an empty block takes time and that adding work shortens it.
        let bogus = |txs: &TxSet, _: &SchedulerConfig| -> Result<Time, ScheduleError> {
            Ok(Rational::integer(10) - Rational::from(txs.len()))
        };
        let report = check_scheduler_axioms(bogus, &SamplerConfig::with_seed(1), 20);
        assert!(!report.passed());
        assert!(report.witnesses.iter().any(|w| w.axiom == Axiom::S1));
        assert!(report.witnesses.iter().any(|w| w.axiom == Axiom::S4));
    }
}
