use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::tree::{BNode, Intent, UNSPECIFIED_TARGET};

static TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"<unspecified_target>|[\w']+|[^\w\s]").expect("valid token pattern"));

pub fn tokenize(text: &str) -> Vec<&str> {
    TOKEN.find_iter(text).map(|m| m.as_str()).collect()
}

/// (label, token, token position in the post). Slot labels carry `SL:`,
/// intent labels `IN:` with an empty token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Production {
    pub label: String,
    pub token: String,
    pub index: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProductionOptions {
    /// Add one production per intent node.
    pub include_intents: bool,
    /// Drop token positions and count duplicates.
    pub multiset: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProductionSet {
    counts: BTreeMap<Production, usize>,
}

impl ProductionSet {
    pub fn len(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Production, usize)> {
        self.counts.iter().map(|(p, n)| (p, *n))
    }

    fn add(&mut self, p: Production, multiset: bool) {
        let n = self.counts.entry(p).or_insert(0);
        *n = if multiset { *n + 1 } else { 1 };
    }

    fn overlap(&self, other: &ProductionSet) -> usize {
        self.counts.iter().map(|(p, n)| (*n).min(other.counts.get(p).copied().unwrap_or(0))).sum()
    }
}

fn find_tokens(post: &[&str], span: &[&str]) -> Option<usize> {
    if span.is_empty() || span.len() > post.len() {
        return None;
    }
    (0..=post.len() - span.len()).find(|&i| post[i..i + span.len()] == *span)
}

/// Token-level productions of a tree. With `post`, and outside multiset mode,
/// each slot is anchored at the first occurrence of its token sequence in the
/// post.
pub fn productions(tree: &BNode, post: Option<&str>, opts: ProductionOptions) -> ProductionSet {
    let post_tokens: Option<Vec<&str>> = post.filter(|_| !opts.multiset).map(tokenize);
    let mut set = ProductionSet::default();
    tree.walk(&mut |node| match node {
        BNode::Intent { name, .. } => {
            if opts.include_intents {
                set.add(Production { label: format!("IN:{name}"), token: String::new(), index: None }, opts.multiset);
            }
        }
        BNode::Slot { label, text, .. } => {
            let tokens = if text == UNSPECIFIED_TARGET { vec![text.as_str()] } else { tokenize(text) };
            let base = post_tokens.as_deref().and_then(|p| find_tokens(p, &tokens));
            for (k, tok) in tokens.iter().enumerate() {
                let p = Production { label: format!("SL:{label}"), token: tok.to_string(), index: base.map(|b| b + k) };
                set.add(p, opts.multiset);
            }
        }
    });
    set
}

/// Production F1: 1 when both sides are empty, 0 when only one is.
pub fn pf1(predicted: &ProductionSet, gold: &ProductionSet) -> f64 {
    match (predicted.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let hit = predicted.overlap(gold) as f64;
    if hit == 0.0 {
        return 0.0;
    }
    let p = hit / predicted.len() as f64;
    let r = hit / gold.len() as f64;
    2.0 * p * r / (p + r)
}

/// Exact match of production sets.
pub fn ema(predicted: &ProductionSet, gold: &ProductionSet) -> f64 {
    if predicted == gold {
        1.0
    } else {
        0.0
    }
}

/// Index of the predicted tree with the highest PF1 against `gold`; the
/// first wins ties. `None` for no candidates.
pub fn closest_tree(predicted: &[BNode], gold: &BNode, post: Option<&str>, opts: ProductionOptions) -> Option<usize> {
    let g = productions(gold, post, opts);
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in predicted.iter().enumerate() {
        let s = pf1(&productions(t, post, opts), &g);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Intents predicted across one or more trees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolved {
    NotHateful,
    Hateful(BTreeSet<Intent>),
    /// A hateful label without a fine class, or an unknown label.
    Unknown,
}

impl Resolved {
    /// Whether this resolution counts as correct for `gold`.
    pub fn matches(&self, gold: Intent) -> bool {
        match self {
            Resolved::NotHateful => gold == Intent::NotHateful,
            Resolved::Hateful(set) => gold.is_hateful() && set.contains(&gold),
            Resolved::Unknown => false,
        }
    }

    /// Single label for a confusion matrix: the gold label when correct.
    pub fn label_for(&self, gold: Intent) -> Option<Intent> {
        if self.matches(gold) {
            return Some(gold);
        }
        match self {
            Resolved::NotHateful => Some(Intent::NotHateful),
            Resolved::Hateful(set) => set.iter().next().copied(),
            Resolved::Unknown => None,
        }
    }
}

fn top_intents(tree: &BNode, out: &mut Vec<String>) {
    if let BNode::Intent { name, children } = tree {
        let nested: Vec<&BNode> = children.iter().filter(|c| matches!(c, BNode::Intent { .. })).collect();
        if !nested.is_empty() && nested.len() == children.len() {
            for c in nested {
                top_intents(c, out);
            }
        } else {
            out.push(name.clone());
        }
    }
}

/// NotHateful iff every predicted tree is; otherwise the hateful intents
/// present. An intent node whose children are all intents is a binary
/// wrapper and is looked through.
pub fn resolve_intent(trees: &[BNode]) -> Resolved {
    let mut names = Vec::new();
    for t in trees {
        top_intents(t, &mut names);
    }
    if names.is_empty() {
        return Resolved::Unknown;
    }
    let mut hateful = BTreeSet::new();
    for n in &names {
        match n.parse::<Intent>() {
            Ok(Intent::NotHateful) => {}
            Ok(i) => {
                hateful.insert(i);
            }
            Err(_) => return Resolved::Unknown,
        }
    }
    if hateful.is_empty() {
        Resolved::NotHateful
    } else {
        Resolved::Hateful(hateful)
    }
}

/// Micro-averaged F1 over the intent classes. A missing prediction is its own
/// class, so it is a false positive of that class and a false negative of the
/// gold class; with one label per instance this equals accuracy.
pub fn micro_f1(pairs: &[(Intent, Option<Intent>)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
    for (gold, pred) in pairs {
        if Some(*gold) == *pred {
            tp += 1;
        } else {
            fp += 1;
            fne += 1;
        }
    }
    let denom = 2 * tp + fp + fne;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Geometric mean of per-test scores, or the tests that scored zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub value: Option<f64>,
    pub zero_scores: Vec<usize>,
}

pub fn geometric_mean(scores: &[f64]) -> Aggregate {
    let zero_scores: Vec<usize> = scores.iter().enumerate().filter(|(_, s)| **s <= 0.0).map(|(i, _)| i).collect();
    let value = (!scores.is_empty() && zero_scores.is_empty())
        .then(|| (scores.iter().map(|s| s.ln()).sum::<f64>() / scores.len() as f64).exp());
    Aggregate { value, zero_scores }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::parse_bracket;

    #[test]
    fn tokens() {
        assert_eq!(tokenize("Don't go, <unspecified_target>!"), vec!["Don't", "go", ",", "<unspecified_target>", "!"]);
    }

    #[test]
    fn resolve_examples() {
        let t = |s: &str| parse_bracket(s).unwrap();
        let r = resolve_intent(&[t("[IN:NotHateful [SL:Target a]]"), t("[IN:Dehumanisation [SL:Target b]]")]);
        assert!(r.matches(Intent::Dehumanisation));
        let r = resolve_intent(&[t("[IN:NotHateful [SL:Target a]]"), t("[IN:Derogation [SL:Target b]]")]);
        assert!(!r.matches(Intent::NotHateful));
        let wrapped = t("[IN:Hateful [IN:Threatening [SL:Target a]] [IN:NotHateful [SL:Target b]]]");
        assert_eq!(resolve_intent(&[wrapped]), Resolved::Hateful(BTreeSet::from([Intent::Threatening])));
        assert_eq!(resolve_intent(&[t("[IN:Hateful [SL:Target a]]")]), Resolved::Unknown);
        assert_eq!(resolve_intent(&[]), Resolved::Unknown);
    }

    #[test]
    fn geometric_mean_cases() {
        assert!((geometric_mean(&[1.0, 100.0]).value.unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(geometric_mean(&[3.0, 0.0]).value, None);
        assert_eq!(geometric_mean(&[3.0, 0.0]).zero_scores, vec![1]);
        assert_eq!(geometric_mean(&[]).value, None);
    }
}
