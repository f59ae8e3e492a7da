//! Co-occurrence and class counters shared by planning and verification.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;

use crate::grammar::StructKind;
use crate::tree::Intent;

/// Classes a target of the given kind is expected to occur in equally often.
pub fn supported_classes(kind: StructKind) -> &'static [Intent] {
    match kind {
        StructKind::Tp | StructKind::Tnp => {
            &[Intent::NotHateful, Intent::Dehumanisation, Intent::Threatening, Intent::Derogation]
        }
        StructKind::E => &[Intent::NotHateful, Intent::ProHateCrimes],
        _ => &[],
    }
}

/// Kinds that must be spread evenly over the instances of a hateful class.
pub fn injection_kinds(class: Intent) -> Vec<StructKind> {
    [StructKind::D, StructKind::Th, StructKind::N, StructKind::Ns]
        .into_iter()
        .filter(|k| Some(*k) != class.defining_kind())
        .collect()
}

pub struct Observation<'a, K> {
    pub class: Intent,
    pub targets: &'a [(K, StructKind)],
    /// Tracked expression occurrences; the flag marks main-tree slots.
    pub expressions: &'a [(K, StructKind, bool)],
    pub kinds: &'a BTreeSet<StructKind>,
    pub injected: bool,
}

#[derive(Debug, Clone)]
pub struct Tally<K: Ord + Hash + Clone> {
    pub pairs: HashMap<(K, K), (u64, u64)>,
    pub target_kind: BTreeMap<K, StructKind>,
    pub expr_kind: BTreeMap<K, StructKind>,
    pub classes: BTreeMap<K, BTreeMap<Intent, u64>>,
    pub injections: BTreeMap<Intent, BTreeMap<StructKind, u64>>,
    pub class_totals: BTreeMap<Intent, u64>,
    pub total: u64,
    pub no_injection: u64,
}

impl<K: Ord + Hash + Clone> Default for Tally<K> {
    fn default() -> Self {
        Tally {
            pairs: HashMap::new(),
            target_kind: BTreeMap::new(),
            expr_kind: BTreeMap::new(),
            classes: BTreeMap::new(),
            injections: BTreeMap::new(),
            class_totals: BTreeMap::new(),
            total: 0,
            no_injection: 0,
        }
    }
}

impl<K: Ord + Hash + Clone> Tally<K> {
    pub fn observe(&mut self, obs: &Observation<'_, K>, weight: u64) {
        if weight == 0 {
            return;
        }
        self.total += weight;
        if !obs.injected {
            self.no_injection += weight;
        }
        *self.class_totals.entry(obs.class).or_insert(0) += weight;
        for (k, kind) in obs.expressions.iter().map(|(k, kind, _)| (k, kind)) {
            self.expr_kind.entry(k.clone()).or_insert(*kind);
        }
        for (t, kind) in obs.targets {
            self.target_kind.entry(t.clone()).or_insert(*kind);
            *self.classes.entry(t.clone()).or_default().entry(obs.class).or_insert(0) += weight;
            for (e, _, main) in obs.expressions {
                let entry = self.pairs.entry((t.clone(), e.clone())).or_insert((0, 0));
                if *main {
                    entry.0 += weight;
                } else {
                    entry.1 += weight;
                }
            }
        }
        if obs.class.is_hateful() {
            let row = self.injections.entry(obs.class).or_default();
            for k in injection_kinds(obs.class) {
                let c = row.entry(k).or_insert(0);
                if obs.kinds.contains(&k) {
                    *c += weight;
                }
            }
        }
    }

    /// (m, o) for a pair; zero if never seen.
    pub fn pair(&self, t: &K, e: &K) -> (u64, u64) {
        self.pairs.get(&(t.clone(), e.clone())).copied().unwrap_or((0, 0))
    }

    pub fn targets(&self) -> impl Iterator<Item = (&K, StructKind)> {
        self.target_kind.iter().map(|(k, v)| (k, *v))
    }

    pub fn expressions(&self) -> impl Iterator<Item = (&K, StructKind)> {
        self.expr_kind.iter().map(|(k, v)| (k, *v))
    }

    pub fn class_count(&self, t: &K, class: Intent) -> u64 {
        self.classes.get(t).and_then(|m| m.get(&class)).copied().unwrap_or(0)
    }
}

/// `Some(v)` iff every value equals `v`; `None` for an empty or uneven set.
pub fn uniform(values: impl IntoIterator<Item = u64>) -> Option<u64> {
    let mut it = values.into_iter();
    let first = it.next()?;
    it.all(|v| v == first).then_some(first)
}
