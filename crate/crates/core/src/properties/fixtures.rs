//! Hand-computed counterexamples, replayed with their exact published numbers.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{
    txn, txs, Evaluator, FixtureMismatch, Instance, PropertyError, PropertyId, Verdict, Witness,
};
use crate::gcm::{GcmContext, MechanismId};
use crate::model::TxSet;
use crate::rational::Rational;
use crate::scheduler::{SchedulerConfig, Threads};

/// Thread counts every fixture is replayed at; outcomes must agree.
pub const FIXTURE_THREADS: [Threads; 2] = [Threads::Bounded(2), Threads::Bounded(3)];

#[derive(Debug, Clone)]
pub struct Fixture {
    pub id: &'static str,
    pub title: &'static str,
    pub property: PropertyId,
    pub instance: Instance,
    /// Expected labelled values per mechanism the fixture refutes.
    pub expected: Vec<(MechanismId, Vec<(&'static str, Rational)>)>,
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn z(n: i64) -> Rational {
    Rational::integer(n)
}

pub fn fixtures() -> Vec<Fixture> {
    use MechanismId::*;
    vec![
        Fixture {
            id: "F1",
            title: "scheduling monotonicity fails for Shapley, Banzhaf and TPM",
            property: PropertyId::P6,
            instance: Instance::Pair {
                base: txs(&[txn("tx1", 1, &["k1"]), txn("tx2", 3, &["k2"])]),
                tx1: txn("tx3", 2, &["k1"]),
                tx2: txn("tx4", 1, &["k2"]),
            },
            expected: vec![
                (
                    Shapley,
                    vec![("v1", z(3)), ("v2", z(4)), ("lhs", z(1)), ("rhs", q(5, 6))],
                ),
                (
                    Banzhaf,
                    vec![("v1", z(3)), ("v2", z(4)), ("lhs", z(1)), ("rhs", q(3, 4))],
                ),
                (
                    Tpm,
                    vec![("v1", z(3)), ("v2", z(4)), ("lhs", z(1)), ("rhs", q(4, 5))],
                ),
            ],
        },
        Fixture {
            id: "F2",
            title: "Banzhaf is not efficient",
            property: PropertyId::P7,
            instance: Instance::Block {
                block: txs(&[
                    txn("tx1", 1, &["k1"]),
                    txn("tx2", 1, &["k1"]),
                    txn("tx3", 1, &["k2"]),
                ]),
            },
            expected: vec![(
                Banzhaf,
                vec![
                    ("gas(tx1)", q(3, 4)),
                    ("gas(tx2)", q(3, 4)),
                    ("gas(tx3)", q(1, 4)),
                    ("lhs", q(7, 4)),
                    ("rhs", z(2)),
                ],
            )],
        },
        Fixture {
            id: "F3",
            title: "Shapley violates transaction bundling",
            property: PropertyId::P5,
            instance: Instance::Bundle {
                base: txs(&[txn("tx4", 1, &["k1"])]),
                tx1: txn("tx1", 1, &["k2"]),
                tx2: txn("tx2", 1, &["k2"]),
                tx3: txn("tx3", 2, &["k2"]),
            },
            expected: vec![(
                Shapley,
                vec![
                    ("split(tx1)", q(5, 6)),
                    ("split(tx2)", q(5, 6)),
                    ("lhs", q(10, 6)),
                    ("rhs", q(3, 2)),
                ],
            )],
        },
        Fixture {
            id: "F4",
            title: "ESM violates transaction bundling",
            property: PropertyId::P5,
            instance: Instance::Bundle {
                base: txs(&[txn("tx4", 1, &["k1"])]),
                tx1: txn("tx1", 1, &["k1"]),
                tx2: txn("tx2", 1, &["k1"]),
                tx3: txn("tx3", 2, &["k1"]),
            },
            expected: vec![(
                Esm,
                vec![
                    ("split(tx1)", q(3, 3)),
                    ("split(tx2)", q(3, 3)),
                    ("lhs", z(2)),
                    ("rhs", q(3, 2)),
                ],
            )],
        },
        Fixture {
            id: "F5",
            title: "Shapley violates set inclusion",
            property: PropertyId::P4,
            instance: Instance::Sets {
                base: txs(&[txn("tx1", 1, &["k1"])]),
                t1: txs(&[txn("tx2", 1, &["k2"]), txn("tx3", 1, &["k2"])]),
                t2: txs(&[
                    txn("tx2", 1, &["k2"]),
                    txn("tx3", 1, &["k2"]),
                    txn("tx4", 1, &["k1"]),
                ]),
            },
            expected: vec![(
                Shapley,
                vec![
                    ("small(tx2)", q(5, 6)),
                    ("small(tx3)", q(5, 6)),
                    ("large(tx2)", q(12, 24)),
                    ("large(tx3)", q(12, 24)),
                    ("large(tx4)", q(12, 24)),
                    ("lhs", q(10, 6)),
                    ("rhs", q(36, 24)),
                ],
            )],
        },
        Fixture {
            id: "F6",
            title: "Banzhaf violates set inclusion",
            property: PropertyId::P4,
            instance: Instance::Sets {
                base: TxSet::new(),
                t1: txs(&[txn("tx1", 1, &["k1"]), txn("tx2", 1, &["k1"])]),
                t2: txs(&[
                    txn("tx1", 1, &["k1"]),
                    txn("tx2", 1, &["k1"]),
                    txn("tx3", 1, &["k2"]),
                ]),
            },
            expected: vec![(
                Banzhaf,
                vec![
                    ("small(tx1)", z(1)),
                    ("small(tx2)", z(1)),
                    ("large(tx1)", q(3, 4)),
                    ("large(tx2)", q(3, 4)),
                    ("large(tx3)", q(1, 4)),
                    ("lhs", z(2)),
                    ("rhs", q(7, 4)),
                ],
            )],
        },
        Fixture {
            id: "F7",
            title: "XSM violates set inclusion",
            property: PropertyId::P4,
            instance: Instance::Sets {
                base: TxSet::new(),
                t1: txs(&[txn("tx1", 1, &["k1"])]),
                t2: txs(&[txn("tx1", 1, &["k1"]), txn("tx2", 1, &["k2"])]),
            },
            expected: vec![(
                Xsm,
                vec![
                    ("large(tx1)", q(1, 9)),
                    ("large(tx2)", q(1, 9)),
                    ("lhs", q(1, 3)),
                    ("rhs", q(2, 9)),
                ],
            )],
        },
        Fixture {
            id: "F8",
            title: "the current mechanism is not efficient",
            property: PropertyId::P7,
            instance: Instance::Block {
                block: txs(&[txn("tx1", 1, &["k1"]), txn("tx2", 1, &["k2"])]),
            },
            expected: vec![(
                Current,
                vec![
                    ("gas(tx1)", z(1)),
                    ("gas(tx2)", z(1)),
                    ("lhs", z(2)),
                    ("rhs", z(1)),
                ],
            )],
        },
    ]
}

type Labelled = (Verdict, BTreeMap<String, Rational>, Option<Witness>);

/// Every labelled quantity the fixtures refer to, for one mechanism.
pub(crate) fn labelled_values(
    ev: &mut Evaluator,
    prop: PropertyId,
    mech: MechanismId,
    instance: &Instance,
) -> Result<Labelled, PropertyError> {
    let out = ev.check(prop, mech, instance)?;
    let mut values = BTreeMap::new();
    if let Some(l) = &out.lhs {
        values.insert("lhs".to_string(), l.clone());
    }
    if let Some(r) = &out.rhs {
        values.insert("rhs".to_string(), r.clone());
    }
    if let Some([v1, v2]) = &out.premise {
        values.insert("v1".to_string(), v1.clone());
        values.insert("v2".to_string(), v2.clone());
    }
    let mut per_tx = |label: &str, block: &TxSet, members: &TxSet| -> Result<(), PropertyError> {
        for tx in members.iter() {
            let g = ev.gas(mech, block, tx)?;
            values.insert(format!("{label}({})", tx.id()), g);
        }
        Ok(())
    };
    match instance {
        Instance::Block { block } => per_tx("gas", block, block)?,
        Instance::Sets { base, t1, t2 } => {
            per_tx("small", &base.union(t1)?, t1)?;
            per_tx("large", &base.union(t2)?, t2)?;
        }
        Instance::Bundle { base, tx1, tx2, .. } => {
            let split = base.with(tx1)?.with(tx2)?;
            per_tx("split", &split, &txs(&[tx1.clone(), tx2.clone()]))?;
        }
        Instance::Pair { .. } | Instance::Estimation { .. } => {}
    }
    Ok((out.verdict, values, out.witness))
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureResult {
    pub fixture: &'static str,
    pub title: &'static str,
    pub property: PropertyId,
    pub mechanism: MechanismId,
    pub threads: Threads,
    pub verdict: Verdict,
    /// Expected labels with their computed values.
    pub values: BTreeMap<String, Rational>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureReport {
    pub mechanism: MechanismId,
    pub results: Vec<FixtureResult>,
}

fn context(threads: Threads) -> GcmContext {
    GcmContext::new(SchedulerConfig::new(threads))
}

/// Replay every fixture that refutes a property of `mech`, at each thread
/// count in [`FIXTURE_THREADS`], and compare against the published numbers.
pub fn run_fixture_suite(mech: MechanismId) -> Result<FixtureReport, PropertyError> {
    let mut results = Vec::new();
    for fx in fixtures() {
        let Some((_, expected)) = fx.expected.iter().find(|(m, _)| *m == mech) else {
            continue;
        };
        let mut first: Option<BTreeMap<String, Rational>> = None;
        for threads in FIXTURE_THREADS {
            let mut ev = Evaluator::new(context(threads));
            let (verdict, values, _) = labelled_values(&mut ev, fx.property, mech, &fx.instance)?;
            let mismatch = |label: &str, expected: &Rational, computed: String| {
                PropertyError::FixtureMismatch(Box::new(FixtureMismatch {
                    fixture: fx.id.to_string(),
                    threads,
                    label: label.to_string(),
                    expected: expected.clone(),
                    computed,
                }))
            };
            if verdict != Verdict::Violated {
                return Err(mismatch(
                    "verdict",
                    &Rational::zero(),
                    format!("{verdict:?}"),
                ));
            }
            let mut kept = BTreeMap::new();
            for (label, want) in expected {
                let got = values
                    .get(*label)
                    .ok_or_else(|| mismatch(label, want, "missing".into()))?;
                if got != want {
                    return Err(mismatch(label, want, got.to_string()));
                }
                kept.insert(label.to_string(), got.clone());
            }
            match &first {
                Some(prev) if *prev != values => {
                    return Err(mismatch(
                        "threads",
                        &Rational::zero(),
                        "outcome differs".into(),
                    ));
                }
                _ => first = Some(values),
            }
            results.push(FixtureResult {
                fixture: fx.id,
                title: fx.title,
                property: fx.property,
                mechanism: mech,
                threads,
                verdict,
                values: kept,
            });
        }
    }
    Ok(FixtureReport {
        mechanism: mech,
        results,
    })
}

/// A fixture instance that violates `prop` for `mech` under `threads`.
pub(crate) fn fixture_witness(
    prop: PropertyId,
    mech: MechanismId,
    ctx: &GcmContext,
) -> Result<Option<Witness>, PropertyError> {
    for fx in fixtures().into_iter().filter(|f| f.property == prop) {
        let mut ev = Evaluator::new(ctx.clone());
        let out = ev.check(prop, mech, &fx.instance)?;
        if let Some(mut w) = out.witness {
            w.source = format!("fixture {}", fx.id);
            return Ok(Some(w));
        }
    }
    Ok(None)
}
