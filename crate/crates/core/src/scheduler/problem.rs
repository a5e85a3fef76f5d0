//! Integer-tick view of a block used by the solvers.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use super::{Schedule, ScheduleError, Threads};
use crate::model::{TxId, TxSet};
use crate::rational::{Rational, Time};

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    /// Transaction durations in ticks, in id order.
    pub dur: Vec<u64>,
    /// `conflicts[i]` has bit `j` set iff transactions `i` and `j` share a key.
    pub conflicts: Vec<u32>,
    /// Distinct per-key transaction masks (each can run only serially).
    pub key_groups: Vec<u32>,
    /// `None` means unbounded.
    pub threads: Option<usize>,
    /// Ticks per time unit.
    pub scale: BigInt,
}

impl Problem {
    pub fn build(txs: &TxSet, threads: Threads) -> Result<Self, ScheduleError> {
        let scale = txs
            .iter()
            .fold(BigInt::one(), |acc, tx| acc.lcm(tx.time().denom()));
        let mut dur = Vec::with_capacity(txs.len());
        let mut total: u64 = 0;
        for tx in txs.iter() {
            let ticks = (tx.time().numer() * (&scale / tx.time().denom()))
                .to_u64()
                .ok_or(ScheduleError::TimeScaleOverflow)?;
            total = total
                .checked_add(ticks)
                .ok_or(ScheduleError::TimeScaleOverflow)?;
            dur.push(ticks);
        }
        let all: Vec<_> = txs.iter().collect();
        let mut conflicts = vec![0u32; all.len()];
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                if all[i].conflicts_with(all[j]) {
                    conflicts[i] |= 1 << j;
                    conflicts[j] |= 1 << i;
                }
            }
        }
        let mut by_key: BTreeMap<_, u32> = BTreeMap::new();
        for (i, tx) in all.iter().enumerate() {
            for k in tx.keys() {
                *by_key.entry(k).or_default() |= 1 << i;
            }
        }
        let mut key_groups: Vec<u32> = by_key.into_values().collect();
        key_groups.sort_unstable();
        key_groups.dedup();
        Ok(Problem {
            dur,
            conflicts,
            key_groups,
            threads: threads.limit(),
            scale,
        })
    }

    pub fn len(&self) -> usize {
        self.dur.len()
    }

    /// Sub-problem on the transactions selected by `mask`, re-indexed densely.
    pub fn restrict(&self, mask: u64) -> Problem {
        let keep: Vec<usize> = (0..self.len()).filter(|i| mask >> i & 1 == 1).collect();
        let remap = |m: u32| -> u32 {
            keep.iter()
                .enumerate()
                .filter(|(_, &old)| m >> old & 1 == 1)
                .fold(0u32, |acc, (new, _)| acc | 1 << new)
        };
        let mut key_groups: Vec<u32> = self
            .key_groups
            .iter()
            .map(|&g| remap(g))
            .filter(|&g| g != 0)
            .collect();
        key_groups.sort_unstable();
        key_groups.dedup();
        Problem {
            dur: keep.iter().map(|&i| self.dur[i]).collect(),
            conflicts: keep.iter().map(|&i| remap(self.conflicts[i])).collect(),
            key_groups,
            threads: self.threads,
            scale: self.scale.clone(),
        }
    }

    pub fn to_time(&self, ticks: u64) -> Time {
        Rational::from_big(num_rational::BigRational::new(
            BigInt::from(ticks),
            self.scale.clone(),
        ))
    }

    pub fn schedule(&self, txs: &TxSet, starts: &[u64]) -> Schedule {
        let map: BTreeMap<TxId, Time> = txs
            .ids()
            .zip(starts)
            .map(|(id, &s)| (id.clone(), self.to_time(s)))
            .collect();
        Schedule::from_starts(&map, txs)
    }

    fn fits(&self, starts: &[u64], i: usize, at: u64) -> bool {
        let end = at + self.dur[i];
        let overlaps = |j: usize| j != i && starts[j] < end && at < starts[j] + self.dur[j];
        if (0..self.len()).any(|j| self.conflicts[i] >> j & 1 == 1 && overlaps(j)) {
            return false;
        }
        let Some(n) = self.threads else { return true };
        let instants = std::iter::once(at).chain(
            (0..self.len())
                .filter(|&j| overlaps(j) && starts[j] > at)
                .map(|j| starts[j]),
        );
        for t in instants {
            let running = (0..self.len())
                .filter(|&j| j != i && starts[j] <= t && t < starts[j] + self.dur[j])
                .count();
            if running + 1 > n {
                return false;
            }
        }
        true
    }

    /// Move each transaction to its earliest feasible start, never later than
    /// where it was, until nothing moves.
    pub fn compact(&self, starts: &[u64]) -> Vec<u64> {
        let mut s = starts.to_vec();
        loop {
            let mut order: Vec<usize> = (0..self.len()).collect();
            order.sort_by_key(|&i| (s[i], i));
            let mut moved = false;
            for i in order {
                let mut candidates: Vec<u64> = std::iter::once(0)
                    .chain(
                        (0..self.len())
                            .filter(|&j| j != i)
                            .map(|j| s[j] + self.dur[j]),
                    )
                    .filter(|&c| c < s[i])
                    .collect();
                candidates.sort_unstable();
                if let Some(c) = candidates.into_iter().find(|&c| self.fits(&s, i, c)) {
                    s[i] = c;
                    moved = true;
                }
            }
            if !moved {
                return s;
            }
        }
    }

    /// Canonical representative among a schedule and its time reversal, both
    /// compacted: the lexicographically smaller start vector in id order.
    pub fn canonical(&self, starts: &[u64]) -> Vec<u64> {
        let span = (0..self.len())
            .map(|i| starts[i] + self.dur[i])
            .max()
            .unwrap_or(0);
        let mirrored: Vec<u64> = (0..self.len())
            .map(|i| span - starts[i] - self.dur[i])
            .collect();
        let a = self.compact(starts);
        let b = self.compact(&mirrored);
        a.min(b)
    }
}
