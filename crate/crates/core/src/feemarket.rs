//! A posted base-fee market composed with any gas mechanism.
//!
//! Users bid a maximum price per unit of gas. The block builder admits bids
//! paying at least the base fee, highest price first, until the next bid
//! would overflow the gas limit. Every included transaction pays
//! `gas · base_fee`, and the base fee then moves toward the gas target.
//!
//! Mechanisms with easy gas estimation know each bid's gas up front. For the
//! others the declared gas is the gas of the transaction alone in an empty
//! block, and the final gas is recomputed once on the built block.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gcm::{gas_all, GcmContext, GcmError, MechanismId};
use crate::model::{Transaction, TxId, TxSet};
use crate::rational::{Gas, Rational, Time};
use crate::sampling::{InstanceSampler, SamplerConfig};
use crate::scheduler::{SchedulerConfig, Threads};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeeMarketError {
    #[error("gas limit must be positive")]
    NonPositiveGasLimit,
    #[error("declared gas of `{0}` is not positive")]
    NonPositiveGas(TxId),
    #[error("max price per gas of `{0}` is negative")]
    NegativePrice(TxId),
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error(transparent)]
    Gcm(#[from] GcmError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bid {
    pub tx: Transaction,
    pub max_price_per_gas: Rational,
    pub declared_gas: Gas,
}

impl Bid {
    /// Bid with gas declared as the gas of `tx` alone.
    pub fn new(
        tx: Transaction,
        max_price_per_gas: Rational,
        mech: MechanismId,
        ctx: &GcmContext,
    ) -> Result<Bid, FeeMarketError> {
        if max_price_per_gas.is_negative() {
            return Err(FeeMarketError::NegativePrice(tx.id().clone()));
        }
        let alone = TxSet::from_txs([tx.clone()]).expect("single transaction");
        let declared_gas = gas_all(mech, &alone, ctx)?
            .remove(tx.id())
            .expect("priced every member");
        if !declared_gas.is_positive() {
            return Err(FeeMarketError::NonPositiveGas(tx.id().clone()));
        }
        Ok(Bid {
            tx,
            max_price_per_gas,
            declared_gas,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseFeeState {
    pub base_fee: Rational,
    pub target_gas: Gas,
    pub adjustment_denominator: u32,
    pub min_base_fee: Rational,
}

impl BaseFeeState {
    pub fn new(base_fee: Rational, target_gas: Gas) -> Self {
        BaseFeeState {
            base_fee,
            target_gas,
            adjustment_denominator: 8,
            min_base_fee: Rational::new(1, 1000),
        }
    }
}

/// `base · (1 + (used − target) / (target · denom))`, floored at the minimum.
pub fn base_fee_update(state: &BaseFeeState, gas_used: &Gas) -> BaseFeeState {
    let denom = Rational::from(state.adjustment_denominator.max(1) as u64);
    let deviation = (gas_used - &state.target_gas) / (&state.target_gas * &denom);
    let next = &state.base_fee * &(Rational::one() + deviation);
    BaseFeeState {
        base_fee: next.max(state.min_base_fee.clone()),
        ..state.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockResult {
    pub included: Vec<TxId>,
    pub per_tx_gas: BTreeMap<TxId, Gas>,
    pub per_tx_fee: BTreeMap<TxId, Rational>,
    /// Final gas minus declared gas; zero for easy-estimation mechanisms.
    pub estimate_gap: BTreeMap<TxId, Gas>,
    pub gas_used: Gas,
    pub gas_limit: Gas,
    pub base_fee: Rational,
    pub makespan: Time,
}

fn priority(a: &Bid, b: &Bid) -> std::cmp::Ordering {
    b.max_price_per_gas
        .cmp(&a.max_price_per_gas)
        .then_with(|| a.tx.id().cmp(b.tx.id()))
}

/// Build one block from `mempool` at the current base fee.
///
/// At most `instance_cap` transactions are included so that the block value
/// stays computable. If the recomputed gas of a block-level mechanism ever
/// exceeds the limit, the lowest-priority transaction is dropped and the gas
/// is recomputed.
pub fn build_block(
    mempool: &[Bid],
    gas_limit: &Gas,
    mech: MechanismId,
    ctx: &GcmContext,
    state: &BaseFeeState,
) -> Result<BlockResult, FeeMarketError> {
    if !gas_limit.is_positive() {
        return Err(FeeMarketError::NonPositiveGasLimit);
    }
    let mut eligible: Vec<&Bid> = mempool
        .iter()
        .filter(|b| b.max_price_per_gas >= state.base_fee)
        .collect();
    eligible.sort_by(|a, b| priority(a, b));

    let cap = ctx.scheduler.instance_cap;
    let mut chosen: Vec<&Bid> = Vec::new();
    let mut declared = Rational::zero();
    for bid in eligible {
        let next = &declared + &bid.declared_gas;
        if next > *gas_limit || chosen.len() >= cap {
            break;
        }
        if chosen.iter().any(|c| c.tx.id() == bid.tx.id()) {
            continue;
        }
        declared = next;
        chosen.push(bid);
    }

    loop {
        let block = TxSet::from_txs(chosen.iter().map(|b| b.tx.clone()))
            .expect("duplicate ids skipped above");
        let per_tx_gas = if mech.has_easy_gas_estimation() {
            chosen
                .iter()
                .map(|b| (b.tx.id().clone(), b.declared_gas.clone()))
                .collect()
        } else {
            gas_all(mech, &block, ctx)?
        };
        let gas_used: Gas = per_tx_gas.values().sum();
        if gas_used > *gas_limit {
            chosen.pop();
            continue;
        }
        let per_tx_fee = per_tx_gas
            .iter()
            .map(|(id, g)| (id.clone(), g * &state.base_fee))
            .collect();
        let estimate_gap = chosen
            .iter()
            .map(|b| {
                let id = b.tx.id().clone();
                let gap = &per_tx_gas[&id] - &b.declared_gas;
                (id, gap)
            })
            .collect();
        let makespan = ctx.scheduler.value(&block).map_err(GcmError::from)?;
        return Ok(BlockResult {
            included: chosen.iter().map(|b| b.tx.id().clone()).collect(),
            per_tx_gas,
            per_tx_fee,
            estimate_gap,
            gas_used,
            gas_limit: gas_limit.clone(),
            base_fee: state.base_fee.clone(),
            makespan,
        });
    }
}

/// Seeded bid stream and market parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub seed: u64,
    pub blocks: u64,
    pub bids_per_block: usize,
    pub min_time: i64,
    pub max_time: i64,
    pub key_pool: usize,
    pub max_keys_per_tx: usize,
    /// Prices are drawn uniformly from `price_min..=price_max` in steps of `1/price_scale`.
    pub price_min: i64,
    pub price_max: i64,
    pub price_scale: i64,
    pub gas_limit: Gas,
    pub target_gas: Gas,
    pub initial_base_fee: Rational,
    pub min_base_fee: Rational,
    pub adjustment_denominator: u32,
    /// Unincluded bids carry over; beyond this size the cheapest are dropped.
    pub mempool_cap: usize,
    pub threads: Threads,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            seed: 0,
            blocks: 100,
            bids_per_block: 6,
            min_time: 1,
            max_time: 5,
            key_pool: 8,
            max_keys_per_tx: 3,
            price_min: 1,
            price_max: 20,
            price_scale: 10,
            gas_limit: Rational::integer(40),
            target_gas: Rational::integer(20),
            initial_base_fee: Rational::one(),
            min_base_fee: Rational::new(1, 1000),
            adjustment_denominator: 8,
            mempool_cap: 64,
            threads: Threads::Bounded(4),
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), FeeMarketError> {
        let bad = |m: &str| Err(FeeMarketError::InvalidWorkload(m.to_string()));
        if self.blocks == 0 {
            return bad("blocks must be at least 1");
        }
        if self.min_time < 1 || self.max_time < self.min_time {
            return bad("times must satisfy 1 <= min_time <= max_time");
        }
        if self.price_scale < 1 || self.price_min < 0 || self.price_max < self.price_min {
            return bad("prices must satisfy 0 <= price_min <= price_max and price_scale >= 1");
        }
        if !self.target_gas.is_positive() || !self.gas_limit.is_positive() {
            return bad("gas target and limit must be positive");
        }
        if !self.initial_base_fee.is_positive() || !self.min_base_fee.is_positive() {
            return bad("base fees must be positive");
        }
        if self.key_pool == 0 || self.max_keys_per_tx == 0 {
            return bad("key pool and keys per transaction must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockRow {
    pub block_index: u64,
    pub base_fee: Rational,
    pub gas_used: Gas,
    pub gas_limit: Gas,
    pub makespan: Time,
    pub included_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimulationReport {
    pub mechanism: MechanismId,
    pub workload: WorkloadConfig,
    pub rows: Vec<BlockRow>,
    pub blocks: Vec<BlockResult>,
    pub total_fees: Rational,
}

impl SimulationReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("block_index,base_fee,gas_used,gas_limit,makespan,included_count\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.block_index, r.base_fee, r.gas_used, r.gas_limit, r.makespan, r.included_count
            );
        }
        out
    }
}

/// Run `workload.blocks` rounds of bid arrival, block building and base-fee update.
pub fn simulate(
    workload: &WorkloadConfig,
    mech: MechanismId,
    base_ctx: &GcmContext,
) -> Result<SimulationReport, FeeMarketError> {
    workload.validate()?;
    let mut ctx = base_ctx.clone();
    ctx.scheduler = SchedulerConfig {
        threads: workload.threads,
        ..base_ctx.scheduler
    };
    ctx.vtable = None;
    let sampler = SamplerConfig {
        seed: workload.seed,
        max_txs: workload.bids_per_block,
        key_pool: workload.key_pool,
        min_time: workload.min_time,
        max_time: workload.max_time,
        max_keys_per_tx: workload.max_keys_per_tx,
        threads: vec![workload.threads],
    };
    let mut state = BaseFeeState {
        base_fee: workload.initial_base_fee.clone(),
        target_gas: workload.target_gas.clone(),
        adjustment_denominator: workload.adjustment_denominator,
        min_base_fee: workload.min_base_fee.clone(),
    };
    let mut mempool: Vec<Bid> = Vec::new();
    let mut rows = Vec::new();
    let mut blocks = Vec::new();
    let mut total_fees = Rational::zero();

    for index in 0..workload.blocks {
        let mut s = InstanceSampler::for_trial(&sampler, "feemarket", index);
        for j in 0..workload.bids_per_block {
            let time = s.time();
            let keys = s.key_set();
            let tx = Transaction::new(format!("b{index}-{j}"), time, keys)
                .expect("sampled transactions are valid");
            let units = s.rng().gen_range(workload.price_min..=workload.price_max);
            let price = Rational::new(units, workload.price_scale);
            mempool.push(Bid::new(tx, price, mech, &ctx)?);
        }
        if mempool.len() > workload.mempool_cap {
            mempool.sort_by(priority);
            mempool.truncate(workload.mempool_cap);
        }

        let result = build_block(&mempool, &workload.gas_limit, mech, &ctx, &state)?;
        mempool.retain(|b| !result.per_tx_gas.contains_key(b.tx.id()));
        total_fees += result.per_tx_fee.values().sum::<Rational>();
        rows.push(BlockRow {
            block_index: index,
            base_fee: state.base_fee.clone(),
            gas_used: result.gas_used.clone(),
            gas_limit: workload.gas_limit.clone(),
            makespan: result.makespan.clone(),
            included_count: result.included.len(),
        });
        state = base_fee_update(&state, &result.gas_used);
        blocks.push(result);
    }

    Ok(SimulationReport {
        mechanism: mech,
        workload: workload.clone(),
        rows,
        blocks,
        total_fees,
    })
}
