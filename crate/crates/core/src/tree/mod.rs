//! Hierarchical instance trees: subtrees rooted at targets or hate entities,
//! each carrying a fine intent, under a binary top layer.

pub mod bracket;
pub mod partition;
pub mod policy;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::{SlotLabel, Span, StructKind};
use crate::instance::Slot;

pub use bracket::{parse_bracket, BNode};
pub use partition::partition;
pub use policy::{assign_intent, intent_for_kinds};

/// Literal token used for subtrees without an explicit target.
pub const UNSPECIFIED_TARGET: &str = "<unspecified_target>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Intent {
    NotHateful,
    Dehumanisation,
    Threatening,
    Derogation,
    ProHateCrimes,
}

impl Intent {
    pub const ALL: [Intent; 5] = [
        Intent::NotHateful,
        Intent::Dehumanisation,
        Intent::Threatening,
        Intent::Derogation,
        Intent::ProHateCrimes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Intent::NotHateful => "NotHateful",
            Intent::Dehumanisation => "Dehumanisation",
            Intent::Threatening => "Threatening",
            Intent::Derogation => "Derogation",
            Intent::ProHateCrimes => "ProHateCrimes",
        }
    }

    pub fn is_hateful(self) -> bool {
        self != Intent::NotHateful
    }

    pub fn binary(self) -> BinaryIntent {
        if self.is_hateful() {
            BinaryIntent::Hateful
        } else {
            BinaryIntent::NotHateful
        }
    }

    /// Expression kind that defines a hateful class.
    pub fn defining_kind(self) -> Option<StructKind> {
        match self {
            Intent::NotHateful => None,
            Intent::Dehumanisation => Some(StructKind::D),
            Intent::Threatening => Some(StructKind::Th),
            Intent::Derogation => Some(StructKind::N),
            Intent::ProHateCrimes => Some(StructKind::Sup),
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Intent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let t = t.strip_prefix("IN:").unwrap_or(t);
        Ok(match t {
            "NotHateful" | "Not Hateful" | "nothateful" => Intent::NotHateful,
            "Dehumanisation" | "Dehumanization" | "DehumanisingComparison" => Intent::Dehumanisation,
            "Threatening" | "ThreateningSpeech" | "Threat" => Intent::Threatening,
            "Derogation" | "Derogatory" => Intent::Derogation,
            "ProHateCrimes" | "SupportHateCrimes" => Intent::ProHateCrimes,
            other => return Err(Error::Parse(format!("unknown intent {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinaryIntent {
    Hateful,
    NotHateful,
}

impl BinaryIntent {
    pub fn name(self) -> &'static str {
        match self {
            BinaryIntent::Hateful => "Hateful",
            BinaryIntent::NotHateful => "NotHateful",
        }
    }
}

impl fmt::Display for BinaryIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Hateful iff any fine intent is hateful.
pub fn aggregate_intent(intents: &[Intent]) -> BinaryIntent {
    if intents.iter().any(|i| i.is_hateful()) {
        BinaryIntent::Hateful
    } else {
        BinaryIntent::NotHateful
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Root {
    Span(Slot),
    Unspecified,
}

impl Root {
    pub fn kind(&self) -> Option<StructKind> {
        match self {
            Root::Span(s) => Some(s.kind()),
            Root::Unspecified => None,
        }
    }

    pub fn text(&self) -> &str {
        match self {
            Root::Span(s) => &s.span.text,
            Root::Unspecified => UNSPECIFIED_TARGET,
        }
    }

    pub fn slot(&self) -> Option<&Slot> {
        match self {
            Root::Span(s) => Some(s),
            Root::Unspecified => None,
        }
    }

    pub fn characteristic(&self) -> Option<&str> {
        self.slot().and_then(|s| s.span.characteristic_text.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTree {
    pub root: Root,
    pub attached: Vec<Slot>,
    pub is_main: bool,
    pub intent: Intent,
}

/// At most this many D, Th, N or Sup slots hang under one subtree.
pub const SUBTREE_KIND_CAP: usize = 3;

impl SubTree {
    pub fn new(root: Root, attached: Vec<Slot>, is_main: bool) -> Self {
        let mut t = SubTree { root, attached, is_main, intent: Intent::NotHateful };
        t.intent = assign_intent(&t);
        t
    }

    pub fn attached_kinds(&self) -> Vec<StructKind> {
        self.attached.iter().map(Slot::kind).collect()
    }

    pub fn count(&self, kind: StructKind) -> usize {
        self.attached.iter().filter(|s| s.kind() == kind).count()
    }

    /// Structural constraints every subtree must meet.
    pub fn check(&self) -> std::result::Result<(), String> {
        if let Some(s) = self.attached.iter().find(|s| !s.kind().is_expression()) {
            return Err(format!("{} slot attached below a root", s.kind()));
        }
        for k in StructKind::TRACKED {
            if self.count(k) > SUBTREE_KIND_CAP {
                return Err(format!("{} {} slots in one subtree", self.count(k), k));
            }
        }
        if !self.is_main {
            match self.root.kind() {
                Some(StructKind::Tp) => {
                    if [StructKind::D, StructKind::Th, StructKind::N].iter().any(|k| self.count(*k) > 0) {
                        return Err("hateful expression under an injected protected target".into());
                    }
                }
                Some(StructKind::E) if self.count(StructKind::Sup) > 0 => {
                    return Err("support expression under an injected hate entity".into());
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Spans in this subtree, root first.
    pub fn spans(&self) -> impl Iterator<Item = &Span> {
        self.root.slot().map(|s| &s.span).into_iter().chain(self.attached.iter().map(|s| &s.span))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceTree {
    pub id: String,
    pub binary: BinaryIntent,
    pub subtrees: Vec<SubTree>,
    pub context: Slot,
    pub structure: String,
    pub seed: u64,
}

impl InstanceTree {
    pub fn main(&self) -> Option<&SubTree> {
        self.subtrees.iter().find(|t| t.is_main)
    }

    /// Class of the instance: the main subtree's intent, NotHateful if none.
    pub fn class(&self) -> Intent {
        self.main().map_or(Intent::NotHateful, |t| t.intent)
    }

    pub fn has_injections(&self) -> bool {
        self.subtrees.iter().any(|t| !t.is_main)
    }

    /// Binary intent after dropping every injected subtree.
    pub fn binary_without_injections(&self) -> BinaryIntent {
        let kept: Vec<Intent> = self.subtrees.iter().filter(|t| t.is_main).map(|t| t.intent).collect();
        aggregate_intent(&kept)
    }

    /// Every span the post must contain, context first, then each subtree's
    /// root, characteristic and attached slots.
    pub fn requested(&self) -> Vec<Requested> {
        let mut out = vec![Requested {
            path: SpanPath::Context,
            label: SlotLabel::NonHatefulContext,
            text: self.context.span.text.clone(),
        }];
        for (i, t) in self.subtrees.iter().enumerate() {
            if let Some(r) = t.root.slot() {
                out.push(Requested { path: SpanPath::Root(i), label: r.span.label, text: r.span.text.clone() });
            }
            if let Some(c) = t.root.characteristic() {
                out.push(Requested {
                    path: SpanPath::Characteristic(i),
                    label: SlotLabel::ProtectedCharacteristic,
                    text: c.to_string(),
                });
            }
            for (j, s) in t.attached.iter().enumerate() {
                out.push(Requested { path: SpanPath::Slot(i, j), label: s.span.label, text: s.span.text.clone() });
            }
        }
        out
    }

    /// Top-level bracketed form with the binary layer.
    pub fn to_bracket(&self) -> BNode {
        BNode::Intent {
            name: self.binary.name().to_string(),
            children: self.subtrees.iter().map(subtree_bracket).collect(),
        }
    }
}

fn subtree_bracket(t: &SubTree) -> BNode {
    let mut children = Vec::new();
    if let Some(c) = t.root.characteristic() {
        children.push(BNode::slot(SlotLabel::ProtectedCharacteristic.tag(), c, vec![]));
    }
    for s in &t.attached {
        children.push(BNode::slot(s.span.label.tag(), &s.span.text, vec![]));
    }
    let root_label = match t.root.kind() {
        Some(StructKind::E) => SlotLabel::HateEntity,
        _ => SlotLabel::Target,
    };
    BNode::Intent {
        name: t.intent.name().to_string(),
        children: vec![BNode::slot(root_label.tag(), t.root.text(), children)],
    }
}

/// Location of a span inside an [`InstanceTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpanPath {
    Context,
    Root(usize),
    Characteristic(usize),
    Slot(usize, usize),
}

/// A span the realized post has to contain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requested {
    pub path: SpanPath,
    pub label: SlotLabel,
    pub text: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate_intent(&[Intent::NotHateful, Intent::Dehumanisation]), BinaryIntent::Hateful);
        assert_eq!(aggregate_intent(&[Intent::NotHateful, Intent::NotHateful]), BinaryIntent::NotHateful);
        for i in Intent::ALL {
            assert_eq!(aggregate_intent(&[i]), i.binary());
        }
    }

    #[test]
    fn intent_names_round_trip() {
        for i in Intent::ALL {
            assert_eq!(i.name().parse::<Intent>().unwrap(), i);
            assert_eq!(format!("IN:{i}").parse::<Intent>().unwrap(), i);
        }
        assert_eq!("IN:DehumanisingComparison".parse::<Intent>().unwrap(), Intent::Dehumanisation);
        assert!("IN:Hateful".parse::<Intent>().is_err());
    }
}
