//! Splitting a flat instance into a main subtree and non-hateful injected
//! subtrees.

use super::{aggregate_intent, InstanceTree, Root, SubTree, SUBTREE_KIND_CAP};
use crate::error::{Error, Result};
use crate::grammar::{sort_injected, StructKind};
use crate::instance::{FlatInstance, Slot};

const PACK_ORDER: [StructKind; 5] = [StructKind::D, StructKind::Th, StructKind::N, StructKind::Sup, StructKind::Ns];

/// Whether an injected subtree rooted at `root` may take a `kind` slot
/// without turning hateful.
fn accepts(tree: &SubTree, kind: StructKind) -> bool {
    let allowed = match tree.root.kind() {
        Some(StructKind::Tp) => !matches!(kind, StructKind::D | StructKind::Th | StructKind::N),
        Some(StructKind::E) => kind != StructKind::Sup,
        _ => true,
    };
    allowed && (!kind.is_tracked() || tree.count(kind) < SUBTREE_KIND_CAP)
}

/// Pack the injected slots of `instance` into subtrees.
///
/// Injected non-protected targets and hate entities become roots. The number
/// of subtrees is the larger of the root count and the number needed to hold
/// the capped expression kinds three at a time; missing roots get the
/// unspecified-target token. Expressions are dealt round-robin in the order
/// D, Th, N, Sup, Ns, skipping subtrees that cannot take them, and a new
/// unspecified subtree is opened only when none can.
pub fn partition(instance: &FlatInstance) -> Result<InstanceTree> {
    let fail = |reason: String| Error::Packing { id: instance.id.clone(), reason };

    let main_root = instance.main.iter().find(|s| s.kind().is_target());
    let main_extra = instance.main.iter().filter(|s| s.kind().is_target()).count();
    if main_extra > 1 {
        return Err(fail(format!("main tree has {main_extra} targets")));
    }
    let main_attached: Vec<Slot> = instance.main.iter().filter(|s| !s.kind().is_target()).cloned().collect();
    if let Some(s) = main_attached.iter().find(|s| s.kind() == StructKind::C) {
        return Err(fail(format!("context {:?} listed among main slots", s.span.text)));
    }
    let root = main_root.map_or(Root::Unspecified, |s| Root::Span(s.clone()));
    let main = SubTree::new(root, main_attached, true);

    let mut roots: Vec<Slot> = instance.injected.iter().filter(|s| s.kind().is_target()).cloned().collect();
    let mut ordered_roots: Vec<StructKind> = roots.iter().map(Slot::kind).collect();
    sort_injected(&mut ordered_roots);
    roots.sort_by_key(|s| ordered_roots.iter().position(|k| *k == s.kind()));
    let expressions: Vec<Slot> = PACK_ORDER
        .iter()
        .flat_map(|k| instance.injected.iter().filter(move |s| s.kind() == *k).cloned())
        .collect();
    if let Some(s) = instance.injected.iter().find(|s| s.kind() == StructKind::C) {
        return Err(fail(format!("context {:?} listed among injected slots", s.span.text)));
    }

    let capped = expressions.iter().filter(|s| s.kind().is_tracked()).count();
    let mut count = roots.len().max(capped.div_ceil(SUBTREE_KIND_CAP));
    if count == 0 && !expressions.is_empty() {
        count = 1;
    }
    let mut subtrees: Vec<SubTree> = roots
        .into_iter()
        .map(|r| SubTree::new(Root::Span(r), vec![], false))
        .collect();
    while subtrees.len() < count {
        subtrees.push(SubTree::new(Root::Unspecified, vec![], false));
    }

    let mut cursor = 0usize;
    for slot in expressions {
        let kind = slot.kind();
        let n = subtrees.len();
        let pick = (0..n).map(|o| (cursor + o) % n).find(|&i| accepts(&subtrees[i], kind));
        let i = match pick {
            Some(i) => i,
            None => {
                subtrees.push(SubTree::new(Root::Unspecified, vec![], false));
                subtrees.len() - 1
            }
        };
        subtrees[i].attached.push(slot);
        cursor = (i + 1) % subtrees.len();
    }

    let mut all = vec![main];
    for mut t in subtrees {
        t.intent = super::assign_intent(&t);
        all.push(t);
    }
    for t in &all {
        t.check().map_err(&fail)?;
        if !t.is_main && t.intent.is_hateful() {
            return Err(fail(format!("injected subtree rooted at {:?} is {}", t.root.text(), t.intent)));
        }
    }
    let intents: Vec<_> = all.iter().map(|t| t.intent).collect();
    Ok(InstanceTree {
        id: instance.id.clone(),
        binary: aggregate_intent(&intents),
        subtrees: all,
        context: instance.context.clone(),
        structure: instance.signature(),
        seed: instance.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{SlotLabel, Span};
    use crate::tree::Intent;

    fn slot(text: &str, label: SlotLabel) -> Slot {
        Slot::new(Span::new(text, label, "t").unwrap(), None)
    }

    fn tp(text: &str) -> Slot {
        Slot::new(Span::protected_target(text, "group", "t").unwrap(), None)
    }

    fn inst(main: Vec<Slot>, injected: Vec<Slot>) -> FlatInstance {
        FlatInstance {
            id: "x".into(),
            structure: String::new(),
            main,
            injected,
            context: slot("nice weather today", SlotLabel::NonHatefulContext),
            seed: 0,
        }
    }

    fn texts(t: &SubTree) -> Vec<&str> {
        t.attached.iter().map(|s| s.span.text.as_str()).collect()
    }

    #[test]
    fn figure_layout() {
        use SlotLabel::*;
        let i = inst(
            vec![tp("those people"), slot("are rats", DehumanisingComparison)],
            vec![
                slot("n1", NegativeOpinion),
                slot("n2", NegativeOpinion),
                slot("artists", Target),
                slot("s1", SupportHateCrimes),
                slot("s2", SupportHateCrimes),
                slot("th1", ThreateningSpeech),
            ],
        );
        let tree = partition(&i).unwrap();
        assert_eq!(tree.subtrees.len(), 3);
        assert_eq!(tree.subtrees[0].intent, Intent::Dehumanisation);
        assert!(tree.subtrees[0].is_main);
        assert_eq!(tree.subtrees[1].root.text(), "artists");
        assert_eq!(texts(&tree.subtrees[1]), vec!["th1", "n2", "s2"]);
        assert_eq!(tree.subtrees[2].root, Root::Unspecified);
        assert_eq!(texts(&tree.subtrees[2]), vec!["n1", "s1"]);
        assert!(tree.subtrees[1..].iter().all(|t| t.intent == Intent::NotHateful));
        assert_eq!(tree.binary, crate::tree::BinaryIntent::Hateful);
    }

    #[test]
    fn no_injections_single_main_subtree() {
        let i = inst(vec![tp("women"), slot("should be shot", SlotLabel::ThreateningSpeech)], vec![]);
        let tree = partition(&i).unwrap();
        assert_eq!(tree.subtrees.len(), 1);
        assert_eq!(tree.class(), Intent::Threatening);
        assert!(!tree.has_injections());
    }

    #[test]
    fn four_dehumanising_comparisons_need_two_subtrees() {
        let d = |t: &str| slot(t, SlotLabel::DehumanisingComparison);
        let i = inst(
            vec![tp("women"), slot("are awful", SlotLabel::NegativeOpinion)],
            vec![slot("artists", SlotLabel::Target), d("a"), d("b"), d("c"), d("e")],
        );
        let tree = partition(&i).unwrap();
        assert_eq!(tree.subtrees.len(), 3);
        assert_eq!(tree.subtrees[1].count(StructKind::D), 2);
        assert_eq!(tree.subtrees[2].count(StructKind::D), 2);
    }

    #[test]
    fn support_never_under_injected_entity() {
        let i = inst(
            vec![tp("women"), slot("are awful", SlotLabel::NegativeOpinion)],
            vec![slot("the klan", SlotLabel::HateEntity), slot("s", SlotLabel::SupportHateCrimes)],
        );
        let tree = partition(&i).unwrap();
        assert_eq!(tree.subtrees.len(), 3);
        assert_eq!(tree.subtrees[1].count(StructKind::Sup), 0);
        assert_eq!(tree.subtrees[2].root, Root::Unspecified);
        assert_eq!(tree.subtrees[2].count(StructKind::Sup), 1);
    }

    #[test]
    fn targetless_rows_get_an_unspecified_main() {
        let i = inst(vec![slot("are vermin", SlotLabel::DehumanisingComparison)], vec![]);
        let tree = partition(&i).unwrap();
        assert_eq!(tree.subtrees.len(), 1);
        assert!(tree.subtrees[0].is_main);
        assert_eq!(tree.subtrees[0].root, Root::Unspecified);
        assert_eq!(tree.class(), Intent::NotHateful);
    }
}
