//! Compositional generalisation test suites.
//!
//! A test pairs targets and expressions drawn from seen (selected) or held-out
//! clusters and drops every combination whose cluster pair occurs in the
//! training data.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::{Span, StructKind};
use crate::instance::{FlatInstance, Slot};
use crate::lexicon::cluster::Selection;
use crate::lexicon::{Cluster, ClusterId};
use crate::rng::{derive_seed, rng, stream_id};
use crate::tree::{partition, InstanceTree};

pub use crate::eval::{geometric_mean, Aggregate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Seen,
    HeldOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentFilter {
    HatefulOnly,
    NotHatefulOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralisationTest {
    pub name: String,
    pub target_kind: StructKind,
    pub target_axis: Axis,
    pub expression_kinds: Vec<StructKind>,
    pub expression_axis: Axis,
    /// Add a negative stance to the main tree.
    #[serde(default)]
    pub negative_stance: bool,
    #[serde(default)]
    pub intent_filter: Option<IntentFilter>,
    pub size: usize,
}

/// Default size of a test.
pub const DEFAULT_TEST_SIZE: usize = 1000;

/// The eight preset tests.
pub fn presets(size: usize) -> Vec<GeneralisationTest> {
    use Axis::*;
    use StructKind::*;
    let hateful = [D, Th, N].to_vec();
    let t = |name: &str, target_kind, target_axis, expression_kinds: &Vec<StructKind>, expression_axis, ns: bool, filter| {
        GeneralisationTest {
            name: name.to_string(),
            target_kind,
            target_axis,
            expression_kinds: expression_kinds.clone(),
            expression_axis,
            negative_stance: ns,
            intent_filter: filter,
            size,
        }
    };
    let sup = vec![Sup];
    let h = Some(IntentFilter::HatefulOnly);
    let nh = Some(IntentFilter::NotHatefulOnly);
    vec![
        t("1", Tp, HeldOut, &hateful, Seen, false, h),
        t("2", Tp, Seen, &hateful, HeldOut, false, h),
        t("3", Tp, HeldOut, &hateful, Seen, true, nh),
        t("4", Tp, HeldOut, &hateful, HeldOut, false, h),
        t("1b", E, HeldOut, &sup, Seen, false, h),
        t("2b", E, Seen, &sup, HeldOut, false, h),
        t("3b", E, HeldOut, &hateful, Seen, false, nh),
        t("4b", E, HeldOut, &sup, HeldOut, false, h),
    ]
}

pub fn preset(name: &str, size: usize) -> Option<GeneralisationTest> {
    presets(size).into_iter().find(|t| t.name == name)
}

pub type PairSet = BTreeSet<(ClusterId, ClusterId)>;

/// (target cluster, expression cluster) pairs of one tree; contexts excluded.
pub fn tree_pairs(tree: &InstanceTree) -> PairSet {
    let mut targets = Vec::new();
    let mut expressions = Vec::new();
    for t in &tree.subtrees {
        if let Some(id) = t.root.slot().and_then(|s| s.cluster.as_ref()) {
            targets.push(id.clone());
        }
        for s in &t.attached {
            if let (true, Some(id)) = (s.kind() != StructKind::C, &s.cluster) {
                expressions.push(id.clone());
            }
        }
    }
    targets.iter().flat_map(|t| expressions.iter().map(move |e| (t.clone(), e.clone()))).collect()
}

/// Every cluster pair occurring in a training set.
pub fn training_pairs(trees: &[InstanceTree]) -> PairSet {
    trees.iter().flat_map(tree_pairs).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisjointnessViolation {
    pub instance: String,
    pub pairs: Vec<(ClusterId, ClusterId)>,
}

/// One violation per test instance sharing any cluster pair with training.
pub fn audit_disjointness(test: &[InstanceTree], training: &PairSet) -> Vec<DisjointnessViolation> {
    test.iter()
        .filter_map(|t| {
            let pairs: Vec<_> = tree_pairs(t).into_iter().filter(|p| training.contains(p)).collect();
            (!pairs.is_empty()).then(|| DisjointnessViolation { instance: t.id.clone(), pairs })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltTest {
    pub test: GeneralisationTest,
    pub trees: Vec<InstanceTree>,
    /// Instances requested but not available.
    pub shortfall: usize,
}

fn pool(selection: &Selection, kind: StructKind, axis: Axis) -> &[Cluster] {
    match axis {
        Axis::Seen => selection.selected(kind),
        Axis::HeldOut => selection.held_out(kind),
    }
}

fn members(cluster: &Cluster, kind: StructKind) -> Vec<&Span> {
    cluster.members.iter().filter(|s| s.kind() == kind).collect()
}

/// Above this many candidate pairings, draw at random instead of listing all.
const ENUMERATION_LIMIT: u64 = 200_000;

/// Build one test. Every instance is a distinct (target member, expression
/// member) pairing whose cluster pair is unseen in training; when fewer
/// pairings exist than requested, all of them are emitted and the gap is
/// reported as the shortfall.
pub fn build_test(
    test: &GeneralisationTest,
    selection: &Selection,
    training: &PairSet,
    seed: u64,
) -> Result<BuiltTest> {
    if !test.target_kind.is_target() {
        return Err(Error::Config(format!("test {}: {} is not a target kind", test.name, test.target_kind)));
    }
    if test.expression_kinds.is_empty() || test.expression_kinds.iter().any(|k| !k.is_expression()) {
        return Err(Error::Config(format!("test {}: expression kinds must be expressions", test.name)));
    }
    let contexts = selection.selected(StructKind::C);
    if contexts.is_empty() {
        return Err(Error::Insufficient(format!("test {}: no context clusters", test.name)));
    }
    let stances = selection.selected(StructKind::Ns);
    if test.negative_stance && stances.is_empty() {
        return Err(Error::Insufficient(format!("test {}: no negative-stance clusters", test.name)));
    }
    let seed = derive_seed(seed, &[stream_id("bench"), stream_id(&test.name)]);
    let mut r = rng(seed);

    let targets: Vec<(&Cluster, Vec<&Span>)> = pool(selection, test.target_kind, test.target_axis)
        .iter()
        .map(|c| (c, members(c, test.target_kind)))
        .filter(|(_, m)| !m.is_empty())
        .collect();
    let expressions: Vec<(&Cluster, Vec<&Span>)> = test
        .expression_kinds
        .iter()
        .flat_map(|&k| pool(selection, k, test.expression_axis).iter().map(move |c| (c, members(c, k))))
        .filter(|(_, m)| !m.is_empty())
        .collect();

    // Allowed cluster pairs, with stance clusters pre-drawn so each pair's
    // novelty can be checked in full.
    let mut blocks: Vec<(usize, usize, Option<usize>, u64)> = Vec::new();
    for (ti, (tc, tm)) in targets.iter().enumerate() {
        for (ei, (ec, em)) in expressions.iter().enumerate() {
            if training.contains(&(tc.id.clone(), ec.id.clone())) {
                continue;
            }
            let stance = if test.negative_stance {
                let ok: Vec<usize> =
                    (0..stances.len()).filter(|&s| !training.contains(&(tc.id.clone(), stances[s].id.clone()))).collect();
                match ok.choose(&mut r) {
                    Some(s) => Some(*s),
                    None => continue,
                }
            } else {
                None
            };
            blocks.push((ti, ei, stance, (tm.len() * em.len()) as u64));
        }
    }
    let available: u64 = blocks.iter().map(|b| b.3).sum();
    let want = test.size as u64;

    let mut picks: Vec<(usize, usize, usize)> = Vec::new();
    if available <= ENUMERATION_LIMIT.max(want) {
        for (bi, b) in blocks.iter().enumerate() {
            let (tn, en) = (targets[b.0].1.len(), expressions[b.1].1.len());
            picks.extend((0..tn).flat_map(|a| (0..en).map(move |c| (bi, a, c))));
        }
        picks.shuffle(&mut r);
        picks.truncate(test.size);
    } else {
        let weights: Vec<u64> = blocks.iter().map(|b| b.3).collect();
        let mut seen: HashSet<(usize, usize, usize)> = HashSet::new();
        while picks.len() < test.size {
            let mut x = r.gen_range(0..available);
            let bi = weights.iter().position(|w| if x < *w { true } else { x -= w; false }).expect("weighted pick");
            let b = blocks[bi];
            let key = (bi, r.gen_range(0..targets[b.0].1.len()), r.gen_range(0..expressions[b.1].1.len()));
            if seen.insert(key) {
                picks.push(key);
            }
        }
    }
    let shortfall = test.size.saturating_sub(picks.len());
    if shortfall > 0 {
        warn!("test {}: {} of {} instances available", test.name, picks.len(), test.size);
    }

    let mut trees = Vec::with_capacity(picks.len());
    for (k, (bi, a, c)) in picks.into_iter().enumerate() {
        let (ti, ei, stance, _) = blocks[bi];
        let (tc, tm) = &targets[ti];
        let (ec, em) = &expressions[ei];
        let mut main = vec![Slot::new(tm[a].clone(), Some(tc.id.clone())), Slot::new(em[c].clone(), Some(ec.id.clone()))];
        if let Some(s) = stance {
            let sc = &stances[s];
            let m = &sc.members[r.gen_range(0..sc.members.len())];
            main.push(Slot::new(m.clone(), Some(sc.id.clone())));
        }
        let cc = &contexts[r.gen_range(0..contexts.len())];
        let context = Slot::new(cc.members[r.gen_range(0..cc.members.len())].clone(), Some(cc.id.clone()));
        let mut flat = FlatInstance {
            id: format!("test{}-{k:05}", test.name),
            structure: String::new(),
            main,
            injected: vec![],
            context,
            seed: derive_seed(seed, &[k as u64]),
        };
        flat.structure = flat.signature();
        let tree = partition(&flat)?;
        let keep = match test.intent_filter {
            Some(IntentFilter::HatefulOnly) => tree.class().is_hateful(),
            Some(IntentFilter::NotHatefulOnly) => !tree.class().is_hateful(),
            None => true,
        };
        if keep {
            trees.push(tree);
        }
    }
    let shortfall = shortfall + (test.size - shortfall - trees.len());
    Ok(BuiltTest { test: test.clone(), trees, shortfall })
}

/// Build several tests in parallel.
pub fn build_suite(
    tests: &[GeneralisationTest],
    selection: &Selection,
    training: &PairSet,
    seed: u64,
) -> Result<Vec<BuiltTest>> {
    use rayon::prelude::*;
    tests.par_iter().map(|t| build_test(t, selection, training, seed)).collect()
}

/// Per-test counts and hold-out axes for a manifest.
pub fn suite_summary(built: &[BuiltTest]) -> BTreeMap<String, serde_json::Value> {
    built
        .iter()
        .map(|b| {
            (
                b.test.name.clone(),
                serde_json::json!({
                    "count": b.trees.len(),
                    "shortfall": b.shortfall,
                    "target_kind": b.test.target_kind,
                    "target_axis": b.test.target_axis,
                    "expression_kinds": b.test.expression_kinds,
                    "expression_axis": b.test.expression_axis,
                    "negative_stance": b.test.negative_stance,
                    "intent_filter": b.test.intent_filter,
                }),
            )
        })
        .collect()
}
