//! Records, files, splits, manifests and configuration.

pub mod config;
pub mod jsonl;
pub mod record;
pub mod split;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tree::Intent;

pub use config::{Backend, PipelineConfig};
pub use jsonl::{file_digest, from_jsonl, read_jsonl, sha256_hex, to_jsonl, write_jsonl};
pub use record::{InstanceRecord, Provenance, RootRecord, SlotRecord, TreeRecord};
pub use split::{mix, split, Split, SplitRatios, SPLIT_NAMES};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitInfo {
    pub size: usize,
    pub intents: BTreeMap<Intent, usize>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub total: usize,
    pub intents: BTreeMap<Intent, usize>,
    pub splits: BTreeMap<String, SplitInfo>,
    pub seed: u64,
    pub config_digest: String,
    pub structure_digest: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

pub fn intent_counts<'a>(records: impl IntoIterator<Item = &'a InstanceRecord>) -> BTreeMap<Intent, usize> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry(r.intent()).or_insert(0) += 1;
    }
    m
}

impl DatasetManifest {
    pub fn new(config: &PipelineConfig, seed: u64) -> Self {
        DatasetManifest {
            total: 0,
            intents: BTreeMap::new(),
            splits: BTreeMap::new(),
            seed,
            config_digest: config.digest(),
            structure_digest: config.structure_digest(),
            notes: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    /// Record a split written with the given digest.
    pub fn add_split(&mut self, name: &str, records: &[InstanceRecord], sha256: String) {
        self.splits.insert(name.to_string(), SplitInfo { size: records.len(), intents: intent_counts(records), sha256 });
        self.total = self.splits.values().map(|s| s.size).sum();
        let mut all = BTreeMap::new();
        for s in self.splits.values() {
            for (k, v) in &s.intents {
                *all.entry(*k).or_insert(0) += v;
            }
        }
        self.intents = all;
    }
}
