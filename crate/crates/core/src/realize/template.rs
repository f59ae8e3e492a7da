//! Deterministic offline realizer.

use rand::seq::SliceRandom;

use super::verify::{SpanVerdict, Verdict};
use super::RealizedPost;
use crate::grammar::SlotLabel;
use crate::rng::{derive_seed, rng, stream_id};
use crate::tree::{InstanceTree, Root, SpanPath};

const LEAD_INS: [&str; 8] = [
    "Honestly,",
    "Frankly,",
    "To be clear,",
    "I keep hearing that",
    "Let me say it:",
    "Everyone knows",
    "Apparently",
    "Look,",
];

struct Builder {
    text: String,
    len: usize,
    verdicts: Vec<SpanVerdict>,
}

impl Builder {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.len += s.chars().count();
    }

    fn span(&mut self, path: SpanPath, label: SlotLabel, s: &str) {
        let start = self.len;
        self.push(s);
        self.verdicts.push(SpanVerdict {
            path,
            label,
            requested: s.to_string(),
            verdict: Verdict::Verbatim { start, end: self.len },
        });
    }
}

/// Context sentence followed by one clause per subtree. Every clause opens
/// with a lead-in, so no target starts a sentence; spans are inserted
/// verbatim and their offsets recorded as they are written.
pub fn template_realize(tree: &InstanceTree, seed: u64) -> RealizedPost {
    let mut r = rng(derive_seed(seed, &[stream_id("template"), stream_id(&tree.id)]));
    let mut b = Builder { text: String::new(), len: 0, verdicts: Vec::new() };

    let context = tree.context.span.text.trim_end();
    b.span(SpanPath::Context, SlotLabel::NonHatefulContext, context);
    if !context.ends_with(['.', '!', '?']) {
        b.push(".");
    }

    for (i, t) in tree.subtrees.iter().enumerate() {
        if t.attached.is_empty() && t.root == Root::Unspecified {
            continue;
        }
        let lead = LEAD_INS.choose(&mut r).expect("non-empty lead-ins");
        b.push(" ");
        b.push(lead);
        b.push(" ");
        match &t.root {
            Root::Span(slot) => b.span(SpanPath::Root(i), slot.span.label, &slot.span.text),
            Root::Unspecified => b.push("they"),
        }
        if let Some(c) = t.root.characteristic() {
            b.push(" (");
            b.span(SpanPath::Characteristic(i), SlotLabel::ProtectedCharacteristic, c);
            b.push(")");
        }
        if t.attached.is_empty() {
            b.push(" came up again");
        }
        let n = t.attached.len();
        for (j, s) in t.attached.iter().enumerate() {
            b.push(match j {
                0 => " ",
                _ if j + 1 == n => " and ",
                _ => ", ",
            });
            b.span(SpanPath::Slot(i, j), s.span.label, &s.span.text);
        }
        b.push(".");
    }

    // Verdicts in the order the tree lists its requested spans.
    let order = tree.requested();
    let mut verdicts = Vec::with_capacity(order.len());
    for req in order {
        if let Some(pos) = b.verdicts.iter().position(|v| v.path == req.path) {
            verdicts.push(b.verdicts.swap_remove(pos));
        }
    }
    RealizedPost::new(tree.id.clone(), b.text, verdicts, 0, 0)
}
