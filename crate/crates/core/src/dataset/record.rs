//! The JSONL instance record.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eval::Gold;
use crate::grammar::{SlotLabel, Span};
use crate::instance::Slot;
use crate::lexicon::ClusterId;
use crate::realize::{RealizedPost, Verdict};
use crate::tree::{aggregate_intent, BNode, BinaryIntent, InstanceTree, Intent, Root, SpanPath, SubTree, UNSPECIFIED_TARGET};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub label: SlotLabel,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_end: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootRecord {
    /// `Target`, `HateEntity` or `UnspecifiedTarget`.
    pub kind: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_end: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub intent: Intent,
    pub is_main: bool,
    pub root: RootRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characteristic: Option<SlotRecord>,
    pub slots: Vec<SlotRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub structure: String,
    pub cluster_ids: Vec<ClusterId>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub post: String,
    pub binary_intent: BinaryIntent,
    pub trees: Vec<TreeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<SlotRecord>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_name: Option<String>,
}

const UNSPECIFIED_KIND: &str = "UnspecifiedTarget";

fn located(text: &str, verdict: Option<&Verdict>) -> (String, Option<usize>, Option<usize>) {
    match verdict {
        Some(Verdict::Verbatim { start, end }) => (text.to_string(), Some(*start), Some(*end)),
        Some(Verdict::ClusterEquivalent { matched, start, end }) => (matched.clone(), Some(*start), Some(*end)),
        _ => (text.to_string(), None, None),
    }
}

fn slot_record(slot: &Slot, verdict: Option<&Verdict>) -> SlotRecord {
    let (text, char_start, char_end) = located(&slot.span.text, verdict);
    SlotRecord { label: slot.span.label, text, char_start, char_end, cluster: slot.cluster.clone() }
}

impl InstanceRecord {
    /// Record for `tree`; with a realized post, slot texts and offsets follow
    /// the verdicts (a cluster-equivalent match replaces the requested text).
    pub fn new(tree: &InstanceTree, post: Option<&RealizedPost>, test_name: Option<String>) -> Self {
        let verdicts: BTreeMap<SpanPath, &Verdict> =
            post.map(|p| p.verdicts.iter().map(|v| (v.path, &v.verdict)).collect()).unwrap_or_default();
        let trees = tree
            .subtrees
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let root = match &t.root {
                    Root::Span(slot) => {
                        let (text, char_start, char_end) = located(&slot.span.text, verdicts.get(&SpanPath::Root(i)).copied());
                        RootRecord {
                            kind: slot.span.label.name().to_string(),
                            text,
                            char_start,
                            char_end,
                            cluster: slot.cluster.clone(),
                        }
                    }
                    Root::Unspecified => RootRecord {
                        kind: UNSPECIFIED_KIND.to_string(),
                        text: UNSPECIFIED_TARGET.to_string(),
                        char_start: None,
                        char_end: None,
                        cluster: None,
                    },
                };
                let characteristic = t.root.characteristic().map(|c| {
                    let (text, char_start, char_end) = located(c, verdicts.get(&SpanPath::Characteristic(i)).copied());
                    SlotRecord { label: SlotLabel::ProtectedCharacteristic, text, char_start, char_end, cluster: None }
                });
                let slots = t
                    .attached
                    .iter()
                    .enumerate()
                    .map(|(j, s)| slot_record(s, verdicts.get(&SpanPath::Slot(i, j)).copied()))
                    .collect();
                TreeRecord { intent: t.intent, is_main: t.is_main, root, characteristic, slots }
            })
            .collect();
        InstanceRecord {
            id: tree.id.clone(),
            post: post.map(|p| p.text.clone()).unwrap_or_default(),
            binary_intent: tree.binary,
            trees,
            context: Some(slot_record(&tree.context, verdicts.get(&SpanPath::Context).copied())),
            provenance: Provenance { structure: tree.structure.clone(), cluster_ids: tree_cluster_ids(tree), seed: tree.seed },
            test_name,
        }
    }

    /// Class of the instance: the main tree's intent, else the binary label.
    pub fn intent(&self) -> Intent {
        match self.trees.iter().find(|t| t.is_main) {
            Some(t) => t.intent,
            None if self.binary_intent == BinaryIntent::NotHateful => Intent::NotHateful,
            None => self.trees.iter().map(|t| t.intent).find(|i| i.is_hateful()).unwrap_or(Intent::NotHateful),
        }
    }

    /// Bracketed tree with the binary layer.
    pub fn to_bnode(&self) -> BNode {
        let children = self
            .trees
            .iter()
            .map(|t| {
                let mut kids = Vec::new();
                if let Some(c) = &t.characteristic {
                    kids.push(BNode::slot(c.label.name(), &c.text, vec![]));
                }
                kids.extend(t.slots.iter().map(|s| BNode::slot(s.label.name(), &s.text, vec![])));
                let label = if t.root.kind == UNSPECIFIED_KIND { SlotLabel::Target.name() } else { t.root.kind.as_str() };
                BNode::Intent { name: t.intent.name().to_string(), children: vec![BNode::slot(label, &t.root.text, kids)] }
            })
            .collect();
        BNode::Intent { name: self.binary_intent.name().to_string(), children }
    }

    pub fn to_gold(&self) -> Gold {
        Gold {
            id: self.id.clone(),
            post: self.post.clone(),
            tree: self.to_bnode(),
            intent: self.intent(),
            test_name: self.test_name.clone(),
        }
    }

    /// Rebuild the instance tree. Span provenance beyond text, label and
    /// cluster is not stored and comes back empty.
    pub fn to_tree(&self) -> crate::Result<InstanceTree> {
        let span = |label: SlotLabel, text: &str| -> crate::Result<Span> { Span::new(text, label, self.id.as_str()) };
        let mut subtrees = Vec::with_capacity(self.trees.len());
        for t in &self.trees {
            let root = if t.root.kind == UNSPECIFIED_KIND {
                Root::Unspecified
            } else {
                let label: SlotLabel = t.root.kind.parse()?;
                let mut s = span(label, &t.root.text)?;
                s.characteristic_text = t.characteristic.as_ref().map(|c| c.text.clone());
                Root::Span(Slot::new(s, t.root.cluster.clone()))
            };
            let attached = t
                .slots
                .iter()
                .map(|s| Ok(Slot::new(span(s.label, &s.text)?, s.cluster.clone())))
                .collect::<crate::Result<Vec<_>>>()?;
            subtrees.push(SubTree { root, attached, is_main: t.is_main, intent: t.intent });
        }
        let context = match &self.context {
            Some(c) => Slot::new(span(c.label, &c.text)?, c.cluster.clone()),
            None => Slot::new(span(SlotLabel::NonHatefulContext, "-")?, None),
        };
        let intents: Vec<Intent> = subtrees.iter().map(|t| t.intent).collect();
        let binary = if intents.is_empty() { self.binary_intent } else { aggregate_intent(&intents) };
        Ok(InstanceTree {
            id: self.id.clone(),
            binary,
            subtrees,
            context,
            structure: self.provenance.structure.clone(),
            seed: self.provenance.seed,
        })
    }
}

fn tree_cluster_ids(tree: &InstanceTree) -> Vec<ClusterId> {
    let mut ids: Vec<ClusterId> = tree.context.cluster.iter().cloned().collect();
    for t in &tree.subtrees {
        ids.extend(t.root.slot().and_then(|s| s.cluster.clone()));
        ids.extend(t.attached.iter().filter_map(|s| s.cluster.clone()));
    }
    ids
}
