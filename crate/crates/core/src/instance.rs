//! Flat, cluster-resolved instances produced by the planner.

use serde::{Deserialize, Serialize};

use crate::grammar::{render_signature, SlotBag, Span, StructKind};
use crate::lexicon::ClusterId;

/// A span together with the cluster it was drawn from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub span: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterId>,
}

impl Slot {
    pub fn new(span: Span, cluster: Option<ClusterId>) -> Self {
        Slot { span, cluster }
    }

    pub fn kind(&self) -> StructKind {
        self.span.kind()
    }
}

/// One grammar output before tree construction. The context is kept apart
/// from the main and injected slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatInstance {
    pub id: String,
    pub structure: String,
    pub main: Vec<Slot>,
    pub injected: Vec<Slot>,
    pub context: Slot,
    pub seed: u64,
}

impl FlatInstance {
    pub fn main_kinds(&self) -> Vec<StructKind> {
        self.main.iter().map(Slot::kind).collect()
    }

    pub fn injected_kinds(&self) -> Vec<StructKind> {
        self.injected.iter().map(Slot::kind).collect()
    }

    pub fn signature(&self) -> String {
        render_signature(&self.main_kinds(), &self.injected_kinds())
    }

    /// All spans, context included, as a grammar bag.
    pub fn bag(&self) -> SlotBag {
        let mut spans: Vec<Span> = vec![self.context.span.clone()];
        spans.extend(self.main.iter().chain(&self.injected).map(|s| s.span.clone()));
        SlotBag::new(spans)
    }

    pub fn cluster_ids(&self) -> Vec<ClusterId> {
        std::iter::once(&self.context)
            .chain(&self.main)
            .chain(&self.injected)
            .filter_map(|s| s.cluster.clone())
            .collect()
    }
}
