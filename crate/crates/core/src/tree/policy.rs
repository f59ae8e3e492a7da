//! Deterministic intent policy.

use super::{Intent, SubTree};
use crate::grammar::StructKind;

/// Intent of a subtree given its root kind (`None` for the unspecified
/// target) and the kinds attached below it.
///
/// Protected targets: a negative stance neutralises everything, otherwise
/// threats win over dehumanisation, which wins over derogation. Support for
/// hate crimes is hateful only below a hate entity. Non-protected and
/// unspecified targets are never hateful.
pub fn intent_for_kinds(root: Option<StructKind>, attached: &[StructKind]) -> Intent {
    let has = |k: StructKind| attached.contains(&k);
    match root {
        Some(StructKind::Tp) => {
            if has(StructKind::Ns) {
                Intent::NotHateful
            } else if has(StructKind::Th) {
                Intent::Threatening
            } else if has(StructKind::D) {
                Intent::Dehumanisation
            } else if has(StructKind::N) {
                Intent::Derogation
            } else {
                Intent::NotHateful
            }
        }
        Some(StructKind::E) => {
            if has(StructKind::Ns) {
                Intent::NotHateful
            } else if has(StructKind::Sup) {
                Intent::ProHateCrimes
            } else {
                Intent::NotHateful
            }
        }
        _ => Intent::NotHateful,
    }
}

pub fn assign_intent(tree: &SubTree) -> Intent {
    intent_for_kinds(tree.root.kind(), &tree.attached_kinds())
}

#[cfg(test)]
mod tests {
    use super::*;
    use StructKind::*;

    #[test]
    fn protected_target_cases() {
        assert_eq!(intent_for_kinds(Some(Tp), &[D]), Intent::Dehumanisation);
        assert_eq!(intent_for_kinds(Some(Tp), &[Th]), Intent::Threatening);
        assert_eq!(intent_for_kinds(Some(Tp), &[N]), Intent::Derogation);
        assert_eq!(intent_for_kinds(Some(Tp), &[D, Ns]), Intent::NotHateful);
        assert_eq!(intent_for_kinds(Some(Tp), &[Sup]), Intent::NotHateful);
        assert_eq!(intent_for_kinds(Some(Tp), &[]), Intent::NotHateful);
    }

    #[test]
    fn precedence_among_hateful_kinds() {
        assert_eq!(intent_for_kinds(Some(Tp), &[N, D, Th]), Intent::Threatening);
        assert_eq!(intent_for_kinds(Some(Tp), &[N, D]), Intent::Dehumanisation);
    }

    #[test]
    fn entity_cases() {
        assert_eq!(intent_for_kinds(Some(E), &[Sup]), Intent::ProHateCrimes);
        assert_eq!(intent_for_kinds(Some(E), &[Sup, Ns]), Intent::NotHateful);
        assert_eq!(intent_for_kinds(Some(E), &[D, Th, N]), Intent::NotHateful);
    }

    #[test]
    fn other_roots_never_hateful() {
        for attached in [&[D][..], &[Th], &[N], &[Sup], &[D, Th, N, Sup]] {
            assert_eq!(intent_for_kinds(Some(Tnp), attached), Intent::NotHateful);
            assert_eq!(intent_for_kinds(None, attached), Intent::NotHateful);
        }
    }
}
