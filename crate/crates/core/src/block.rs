//! Block JSON documents.
//!
//! ```json
//! {"transactions":[{"id":"a","time":3,"keys":["k2","k3"]}],
//!  "weights":{"k2":"1/2"},"default_weight":1}
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{ModelError, StorageKey, Transaction, TxId, TxSet, WeightTable};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxDoc {
    pub id: String,
    pub time: Rational,
    pub keys: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDoc {
    pub transactions: Vec<TxDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<String, Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_weight: Option<Rational>,
}

impl TxDoc {
    pub fn from_tx(tx: &Transaction) -> Self {
        TxDoc {
            id: tx.id().to_string(),
            time: tx.time().clone(),
            keys: tx.keys().iter().map(|k| k.to_string()).collect(),
        }
    }

    pub fn to_tx(&self) -> Result<Transaction, ModelError> {
        Transaction::new(
            TxId::new(self.id.clone()),
            self.time.clone(),
            self.keys.iter().map(|k| StorageKey::new(k.clone())),
        )
    }
}

impl BlockDoc {
    pub fn from_parts(txs: &TxSet, weights: &WeightTable) -> Self {
        let default_weight = if weights.default_weight() == &Rational::one() {
            None
        } else {
            Some(weights.default_weight().clone())
        };
        BlockDoc {
            transactions: txs.iter().map(TxDoc::from_tx).collect(),
            weights: weights
                .explicit()
                .iter()
                .map(|(k, w)| (k.to_string(), w.clone()))
                .collect(),
            default_weight,
        }
    }

    pub fn into_parts(self) -> Result<(TxSet, WeightTable), ModelError> {
        let mut set = TxSet::new();
        for doc in &self.transactions {
            set.insert(doc.to_tx()?)?;
        }
        let weights = WeightTable::new(
            self.weights
                .into_iter()
                .map(|(k, w)| (StorageKey::new(k), w))
                .collect(),
            self.default_weight.unwrap_or_else(Rational::one),
        )?;
        Ok((set, weights))
    }
}

pub fn parse_block(document: &str) -> Result<(TxSet, WeightTable), ModelError> {
    let doc: BlockDoc =
        serde_json::from_str(document).map_err(|e| ModelError::MalformedDocument(e.to_string()))?;
    doc.into_parts()
}

pub fn render_block(txs: &TxSet, weights: &WeightTable) -> String {
    serde_json::to_string_pretty(&BlockDoc::from_parts(txs, weights))
        .expect("block documents always serialize")
}

/// Standalone weights document: `{"weights":{...},"default_weight":...}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDoc {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<String, Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_weight: Option<Rational>,
}

impl WeightsDoc {
    pub fn from_table(table: &WeightTable) -> Self {
        let doc = BlockDoc::from_parts(&TxSet::new(), table);
        WeightsDoc {
            weights: doc.weights,
            default_weight: doc.default_weight,
        }
    }

    pub fn to_table(&self) -> Result<WeightTable, ModelError> {
        WeightTable::new(
            self.weights
                .iter()
                .map(|(k, w)| (StorageKey::new(k.clone()), w.clone()))
                .collect(),
            self.default_weight.clone().unwrap_or_else(Rational::one),
        )
    }
}

pub fn parse_weights(document: &str) -> Result<WeightTable, ModelError> {
    let doc: WeightsDoc =
        serde_json::from_str(document).map_err(|e| ModelError::MalformedDocument(e.to_string()))?;
    doc.to_table()
}
