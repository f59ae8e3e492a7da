use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use fairgram::dataset::PipelineConfig;
use fairgram::demo::demo_selection;
use fairgram::grammar::StructKind;
use fairgram::lexicon::ClusterId;
use fairgram::planner::{instantiate, plan_inventory, verify_balance, PlannerConfig, StructureRow, Violation};
use fairgram::rng::MemberSampler;
use fairgram::tree::{partition, InstanceTree, Intent};
use proptest::prelude::*;

fn row(main: &str, injected: &str, count: u64) -> StructureRow {
    StructureRow { main: main.into(), injected: injected.into(), count }
}

fn config(clusters: &[(StructKind, usize)], rows: Vec<StructureRow>) -> PlannerConfig {
    PlannerConfig {
        clusters: clusters.iter().copied().chain([(StructKind::C, 2)]).collect(),
        structure: rows,
        no_injection_ratio: 0.7,
        total: None,
    }
}

fn desk_trees() -> (fairgram::planner::Plan, Vec<InstanceTree>) {
    let cfg = PipelineConfig::desk();
    let plan = plan_inventory(&cfg.planner()).unwrap();
    let sel = demo_selection(&cfg.clusters, 2);
    let flat = instantiate(&plan, &sel, cfg.seed).unwrap();
    let trees = flat.iter().map(|f| partition(f).unwrap()).collect();
    (plan, trees)
}

/// Distinct (target cluster, tracked expression cluster) pairs per tree,
/// counted without the library tally.
fn oracle_pairs(trees: &[InstanceTree]) -> HashMap<(ClusterId, ClusterId), u64> {
    let mut out = HashMap::new();
    for t in trees {
        let mut targets = BTreeSet::new();
        let mut exprs = BTreeSet::new();
        for s in &t.subtrees {
            if let Some(slot) = s.root.slot() {
                targets.insert(slot.cluster.clone().unwrap());
            }
            for a in &s.attached {
                if matches!(a.kind(), StructKind::D | StructKind::Th | StructKind::N | StructKind::Sup) {
                    exprs.insert(a.cluster.clone().unwrap());
                }
            }
        }
        for tg in &targets {
            for e in &exprs {
                *out.entry((tg.clone(), e.clone())).or_insert(0) += 1;
            }
        }
    }
    out
}

fn kind_of(id: &ClusterId) -> &str {
    id.0.split('-').next().unwrap()
}

#[test]
fn full_scale_single_row_is_uniform_and_fast() {
    let start = Instant::now();
    let plan = plan_inventory(&PlannerConfig {
        clusters: [(StructKind::Tp, 40), (StructKind::D, 20), (StructKind::C, 20)].into(),
        structure: vec![row("T_p D", "", 12_800)],
        no_injection_ratio: 1.0,
        total: None,
    })
    .unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert_eq!(plan.pair_quotas.len(), 800);
    assert!(plan.pair_quotas.iter().all(|q| q.n == 16));
    assert_eq!(plan.pair_n[&StructKind::Tp], 16);
}

#[test]
fn two_by_two_eight_instances() {
    let mut cfg = config(&[(StructKind::Tp, 2), (StructKind::D, 2)], vec![row("T_p D", "", 8)]);
    cfg.no_injection_ratio = 1.0;
    let plan = plan_inventory(&cfg).unwrap();
    assert_eq!(plan.pair_quotas.len(), 4);
    assert!(plan.pair_quotas.iter().all(|q| q.n == 2));
    assert!(!plan.issues.iter().any(|i| matches!(i, fairgram::planner::Issue::PairImbalance { .. })));
}

#[test]
fn indivisible_row_reports_nearest_counts() {
    let mut cfg = config(&[(StructKind::Tp, 2), (StructKind::D, 2)], vec![row("T_p D", "", 7)]);
    cfg.no_injection_ratio = 1.0;
    let plan = plan_inventory(&cfg).unwrap();
    let text: Vec<String> = plan.issues.iter().map(|i| i.to_string()).collect();
    assert!(text.iter().any(|t| t.contains("use 4 or 8")), "{text:?}");
    assert!(plan.require_feasible().is_err());
}

#[test]
fn desk_plan_is_feasible() {
    let plan = plan_inventory(&PipelineConfig::desk().planner()).unwrap();
    assert!(plan.is_feasible(), "{:?}", plan.issues);
    assert_eq!(plan.total, 1973);
    assert_eq!(plan.no_injection, 1381);
    assert_eq!(plan.pair_n[&StructKind::Tp], 75);
    assert_eq!(plan.pair_n[&StructKind::Tnp], 128);
    assert_eq!(plan.pair_n[&StructKind::E], 40);
    assert_eq!(plan.class_n[&StructKind::Tp], 64);
    assert_eq!(plan.class_n[&StructKind::Tnp], 80);
    assert_eq!(plan.class_n[&StructKind::E], 76);
}

#[test]
fn full_table_is_not_balanced_at_cluster_granularity() {
    let plan = plan_inventory(&PipelineConfig::full().planner()).unwrap();
    assert_eq!(plan.total, 384_800);
    assert!(!plan.is_feasible());
}

#[test]
fn desk_instances_match_brute_force_counts() {
    let start = Instant::now();
    let (plan, trees) = desk_trees();
    let pairs = oracle_pairs(&trees);
    let expected: BTreeMap<&str, u64> =
        [("tp", plan.pair_n[&StructKind::Tp]), ("tgt", plan.pair_n[&StructKind::Tnp]), ("e", plan.pair_n[&StructKind::E])].into();
    // Every selected target/expression pair, including ones never observed.
    let sel = demo_selection(&PipelineConfig::desk().clusters, 2);
    let mut checked = 0;
    for tk in StructKind::TARGETS {
        for t in sel.selected(tk) {
            for ek in StructKind::TRACKED {
                for e in sel.selected(ek) {
                    let n = pairs.get(&(t.id.clone(), e.id.clone())).copied().unwrap_or(0);
                    assert_eq!(n, expected[kind_of(&t.id)], "{} {}", t.id, e.id);
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, (4 + 2 + 2) * 8);

    let mut classes: BTreeMap<ClusterId, BTreeMap<Intent, u64>> = BTreeMap::new();
    for t in &trees {
        let ids: BTreeSet<ClusterId> = t.subtrees.iter().filter_map(|s| s.root.slot()).map(|s| s.cluster.clone().unwrap()).collect();
        for id in ids {
            *classes.entry(id).or_default().entry(t.class()).or_insert(0) += 1;
        }
    }
    for (id, counts) in &classes {
        let want: &[Intent] = if kind_of(id) == "e" {
            &[Intent::NotHateful, Intent::ProHateCrimes]
        } else {
            &[Intent::NotHateful, Intent::Dehumanisation, Intent::Threatening, Intent::Derogation]
        };
        let values: BTreeSet<u64> = want.iter().map(|c| counts.get(c).copied().unwrap_or(0)).collect();
        assert_eq!(values.len(), 1, "{id}: {counts:?}");
    }
    assert_eq!(classes.len(), 8);

    let report = verify_balance(&trees, Some(&plan));
    assert!(report.is_balanced(), "{}", report.table());
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn deleting_one_instance_flags_exactly_its_pairs() {
    let (_, mut trees) = desk_trees();
    let idx = trees.iter().position(|t| t.subtrees.iter().any(|s| s.root.slot().is_some() && !s.attached.is_empty())).unwrap();
    let removed = trees.remove(idx);
    let affected: BTreeSet<(ClusterId, ClusterId)> = oracle_pairs(std::slice::from_ref(&removed)).into_keys().collect();
    assert!(!affected.is_empty());
    let report = verify_balance(&trees, None);
    let flagged: BTreeSet<(ClusterId, ClusterId)> = report
        .violations
        .iter()
        .filter_map(|v| match v {
            Violation::PairCount { target, expression, expected, actual } => {
                assert_eq!(*actual + 1, *expected);
                Some((target.clone(), expression.clone()))
            }
            _ => None,
        })
        .collect();
    assert_eq!(flagged, affected);
}

#[test]
fn empty_dataset_gives_empty_report() {
    let report = verify_balance(&[], None);
    assert!(report.violations.is_empty());
    assert!(report.targets.is_empty());
    assert_eq!(report.total, 0);
}

#[test]
fn instantiation_is_deterministic_and_carries_context() {
    let cfg = PipelineConfig::desk();
    let plan = plan_inventory(&cfg.planner()).unwrap();
    let sel = demo_selection(&cfg.clusters, 0);
    let a = instantiate(&plan, &sel, 5).unwrap();
    let b = instantiate(&plan, &sel, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 1973);
    assert!(a.iter().all(|f| f.context.kind() == StructKind::C));
    assert_ne!(a, instantiate(&plan, &sel, 6).unwrap());
}

#[test]
fn too_few_clusters_is_an_error() {
    let cfg = PipelineConfig::desk();
    let plan = plan_inventory(&cfg.planner()).unwrap();
    let mut small = cfg.clusters.clone();
    small.insert(StructKind::Tp, 2);
    assert!(instantiate(&plan, &demo_selection(&small, 0), 1).is_err());
}

#[test]
fn member_draws() {
    let mut s = MemberSampler::new(20, 9);
    let d: BTreeSet<usize> = (0..16).map(|_| s.draw()).collect();
    assert_eq!(d.len(), 16);
    let mut s = MemberSampler::new(3, 9);
    let d: BTreeSet<usize> = (0..16).map(|_| s.draw()).collect();
    assert_eq!(d.len(), 3);
}

proptest! {
    #[test]
    fn doubling_counts_doubles_pair_counts(tp in 1usize..5, d in 1usize..4, th in 1usize..3, reps in 1u64..4) {
        let clusters = [(StructKind::Tp, tp), (StructKind::D, d), (StructKind::Th, th)];
        let base = config(&clusters, vec![row("T_p D", "", 1), row("T_p Th", "", 1)]);
        let p = plan_inventory(&base).unwrap();
        let counts: Vec<u64> = p.specs.iter().map(|s| s.period(&base.clusters) * reps).collect();
        let make = |k: u64| {
            let mut c = base.clone();
            c.no_injection_ratio = 1.0;
            for (r, n) in c.structure.iter_mut().zip(&counts) {
                r.count = n * k;
            }
            plan_inventory(&c).unwrap()
        };
        let (one, two) = (make(1), make(2));
        prop_assert_eq!(one.pair_quotas.len(), two.pair_quotas.len());
        for (a, b) in one.pair_quotas.iter().zip(&two.pair_quotas) {
            prop_assert_eq!(a.n * 2, b.n);
        }
        for (k, n) in &one.pair_n {
            prop_assert_eq!(two.pair_n[k], n * 2);
        }
    }

    #[test]
    fn full_periods_balance_every_pair(tp in 1usize..5, d in 1usize..5, reps in 1u64..4) {
        let mut cfg = config(&[(StructKind::Tp, tp), (StructKind::D, d)], vec![row("T_p D", "", 1)]);
        cfg.no_injection_ratio = 1.0;
        let period = plan_inventory(&cfg).unwrap().specs[0].period(&cfg.clusters);
        cfg.structure[0].count = period * reps;
        let plan = plan_inventory(&cfg).unwrap();
        let ns: BTreeSet<u64> = plan.pair_quotas.iter().map(|q| q.n).collect();
        prop_assert_eq!(ns.len(), 1);
        prop_assert_eq!(plan.pair_quotas.len(), tp * d);
    }
}
