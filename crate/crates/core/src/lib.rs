//! Gas computation mechanisms for blocks executed in parallel under
//! lock-based conflict exclusion.
//!
//! * [`model`] and [`block`]: transactions `(t, K)`, blocks, key weights, JSON documents.
//! * [`scheduler`]: schedule validation, the exact makespan `v(T)`, greedy list scheduling.
//! * [`gcm`]: the gas mechanisms (current, weighted area, Shapley, Banzhaf, TPM, ESM, XSM, constant).
//! * [`properties`]: executable mechanism properties, fixed counterexamples, randomized search
//!   and the property matrix.
//! * [`feemarket`]: a posted base-fee market composed with any mechanism.
//!
//! All arithmetic is exact ([`rational::Rational`]).

pub mod block;
pub mod feemarket;
pub mod gcm;
pub mod model;
pub mod properties;
pub mod rational;
pub mod sampling;
pub mod scheduler;

pub use model::{StorageKey, Transaction, TxId, TxSet, WeightTable};
pub use rational::{Gas, Rational, Time};
