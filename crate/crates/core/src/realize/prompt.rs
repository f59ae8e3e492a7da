//! Prompt construction for drafting, refining and tag repair.

use std::collections::{BTreeMap, BTreeSet};

use crate::client::ChatMessage;
use crate::grammar::{parse_kinds, StructKind};
use crate::tree::{InstanceTree, Root, SubTree};

fn noun(kind: StructKind) -> &'static str {
    match kind {
        StructKind::Sup => "expression of support",
        StructKind::Ns => "stance",
        _ => "opinion",
    }
}

fn quoted_list(t: &SubTree) -> String {
    let items: Vec<String> = t
        .attached
        .iter()
        .filter(|s| s.kind() != StructKind::C)
        .map(|s| format!("the {} \"{}\"", noun(s.kind()), s.span.text))
        .collect();
    match items.len() {
        0 => String::new(),
        1 => items[0].clone(),
        n => format!("{} and {}", items[..n - 1].join(", "), items[n - 1]),
    }
}

fn clause(t: &SubTree, first: bool) -> Option<String> {
    let lead = if first { "Write a post where" } else { "In the same post," };
    let things = quoted_list(t);
    match &t.root {
        Root::Span(slot) => {
            let x = &slot.span.text;
            let relation = if slot.kind() == StructKind::E { "is the subject of" } else { "is target of" };
            let mut s = if things.is_empty() {
                format!("{lead} \"{x}\" is mentioned")
            } else {
                format!("{lead} \"{x}\" {relation} {things}")
            };
            if let Some(group) = slot.span.characteristic_text.as_deref() {
                s.push_str(&format!(" because it belongs to the group \"{group}\""));
            }
            s.push_str(&format!(". \"{x}\" shouldn't occur at the beginning of the post."));
            Some(s)
        }
        Root::Unspecified if things.is_empty() => None,
        Root::Unspecified => {
            let verb = if first { "Write a post with" } else { "In the same post, add" };
            Some(format!("{verb} {things} without naming its target."))
        }
    }
}

/// Instruction naming every span of `tree`, its role and the target-position
/// constraint.
pub fn instruction(tree: &InstanceTree) -> String {
    let mut parts: Vec<String> = Vec::new();
    for t in &tree.subtrees {
        if let Some(c) = clause(t, parts.is_empty()) {
            parts.push(c);
        }
    }
    let context = &tree.context.span.text;
    if parts.is_empty() {
        parts.push(format!("Write a post that includes \"{context}\"."));
    } else {
        parts.push(format!("The post also includes \"{context}\"."));
    }
    parts.join(" ")
}

/// A worked instruction/response pair used as a few-shot example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exemplar {
    pub instruction: String,
    pub response: String,
}

impl Exemplar {
    pub fn new(instruction: impl Into<String>, response: impl Into<String>) -> Self {
        Exemplar { instruction: instruction.into(), response: response.into() }
    }
}

/// Few-shot examples keyed by structure signature.
#[derive(Debug, Clone, Default)]
pub struct ExemplarStore {
    by_signature: BTreeMap<String, Vec<Exemplar>>,
}

fn kind_set(signature: &str) -> BTreeSet<StructKind> {
    signature
        .split('|')
        .flat_map(|part| parse_kinds(part.trim()).unwrap_or_default())
        .collect()
}

fn jaccard(a: &BTreeSet<StructKind>, b: &BTreeSet<StructKind>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

impl ExemplarStore {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The three protected-target shots, filed under every single-expression
    /// protected-target signature.
    pub fn default_shots() -> Self {
        let shots = vec![
            Exemplar::new(
                "Write a post where \"Polish people\" is target of the opinion \"are so nasty\" because it belongs to the group \"Polish\". \"Polish people\" shouldn't occur at the beginning of the post.",
                "Truly, I have been to Poland and there's nothing to see there. Polish people are so nasty as well.",
            ),
            Exemplar::new(
                "Write a post where \"women\" is target of the opinion \"should be shot\" because it belongs to the group \"women\". \"women\" shouldn't occur at the beginning of the post.",
                "Women should be shot? Agreed!",
            ),
            Exemplar::new(
                "Write a post where \"a breastfeeding woman\" is target of the opinion \"can do it at home\" because it belongs to the group \"she\". \"a breastfeeding woman\" shouldn't occur at the beginning of the post.",
                "I don't want to have to be around a breastfeeding woman, if she wants to do that she can do it at home",
            ),
        ];
        let mut store = Self::default();
        for sig in ["T_p D | —", "T_p Th | —", "T_p N | —"] {
            for s in &shots {
                store.add(sig, s.clone());
            }
        }
        store
    }

    pub fn add(&mut self, signature: impl Into<String>, exemplar: Exemplar) {
        self.by_signature.entry(signature.into()).or_default().push(exemplar);
    }

    pub fn is_empty(&self) -> bool {
        self.by_signature.is_empty()
    }

    /// Exemplars for `signature`, or for the stored signature whose kind set
    /// overlaps it most (ties to the first in order). Empty for an empty store.
    pub fn select(&self, signature: &str) -> &[Exemplar] {
        if let Some(v) = self.by_signature.get(signature) {
            return v;
        }
        let want = kind_set(signature);
        let mut best: Option<(&Vec<Exemplar>, f64)> = None;
        for (sig, v) in &self.by_signature {
            let score = jaccard(&want, &kind_set(sig));
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((v, score));
            }
        }
        best.map_or(&[], |(v, _)| v.as_slice())
    }
}

/// Few-shot conversation ending in the instruction for `tree`.
pub fn draft_messages(tree: &InstanceTree, store: &ExemplarStore) -> Vec<ChatMessage> {
    let mut msgs = Vec::new();
    for ex in store.select(&tree.structure) {
        msgs.push(ChatMessage::user(&ex.instruction));
        msgs.push(ChatMessage::assistant(&ex.response));
    }
    msgs.push(ChatMessage::user(instruction(tree)));
    msgs
}

/// History that asks the model to improve its own draft.
pub fn refine_messages(instruction: &str, draft: &str) -> Vec<ChatMessage> {
    vec![ChatMessage::user(instruction), ChatMessage::assistant(draft), ChatMessage::user(instruction)]
}

/// Ask for the missing spans to be inserted with `<span_i>` tags; `i` is the
/// position in `missing`.
pub fn repair_prompt(post: &str, missing: &[&str]) -> String {
    let mut s = format!("Post: {post}\nCopy and integrate all the following phrases in the post verbatim:\n");
    for (i, text) in missing.iter().enumerate() {
        s.push_str(&format!("- <span_{i}> {text} </span_{i}>\n"));
    }
    s.push_str(
        "When inserting the spans in the post, include the corresponding tags to mark start and end. The result should be a single coherent post.",
    );
    s
}
