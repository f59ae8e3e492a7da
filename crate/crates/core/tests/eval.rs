use std::collections::{BTreeMap, BTreeSet};

use fairgram::demo::{demo_selection, random_rows};
use fairgram::eval::{
    closest_tree, ema, evaluate, geometric_mean, micro_f1, pf1, productions, Gold, Prediction, ProductionOptions, Setting,
};
use fairgram::grammar::StructKind;
use fairgram::planner::{instantiate, plan_inventory, PlannerConfig};
use fairgram::realize::template_realize;
use fairgram::tree::{parse_bracket, partition, BNode, Intent};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLD: &str = "[IN:NotHateful [SL:Target Artists [SL:DehumanisingComparison parasites]]]";
const WITH_INTENTS: ProductionOptions = ProductionOptions { include_intents: true, multiset: false };

/// (label, token) pairs by direct recursion, intents included.
fn oracle_set(node: &BNode, out: &mut BTreeSet<(String, String)>) {
    match node {
        BNode::Intent { name, children } => {
            out.insert((format!("IN:{name}"), String::new()));
            children.iter().for_each(|c| oracle_set(c, out));
        }
        BNode::Slot { label, text, children } => {
            for tok in text.split_whitespace() {
                out.insert((format!("SL:{label}"), tok.to_string()));
            }
            children.iter().for_each(|c| oracle_set(c, out));
        }
    }
}

fn oracle_f1(p: &BTreeSet<(String, String)>, g: &BTreeSet<(String, String)>) -> f64 {
    let hit = p.intersection(g).count() as f64;
    let (pr, rc) = (hit / p.len() as f64, hit / g.len() as f64);
    2.0 * pr * rc / (pr + rc)
}

#[test]
fn three_gold_productions_and_partial_credit() {
    let gold = parse_bracket(GOLD).unwrap();
    let post = Some("Artists are parasites");
    let g = productions(&gold, post, WITH_INTENTS);
    assert_eq!(g.len(), 3);
    let partial = BNode::slot("Target", "Artists", vec![BNode::slot("DehumanisingComparison", "parasites", vec![])]);
    let p = productions(&partial, post, WITH_INTENTS);
    assert!((pf1(&p, &g) - 0.8).abs() < 1e-12);

    let (mut os, mut og) = (BTreeSet::new(), BTreeSet::new());
    oracle_set(&partial, &mut os);
    oracle_set(&gold, &mut og);
    assert_eq!(og.len(), 3);
    assert!((oracle_f1(&os, &og) - 0.8).abs() < 1e-12);
    assert_eq!(ema(&p, &g), 0.0);
    assert_eq!(ema(&g, &g), 1.0);
}

fn shuffle_children(tree: &BNode, rng: &mut ChaCha8Rng) -> BNode {
    tree.map_children(&mut |mut kids| {
        kids.shuffle(rng);
        kids
    })
}

#[test]
fn ema_ignores_slot_order_on_random_trees() {
    let clusters: BTreeMap<StructKind, usize> = StructKind::ALL.iter().map(|&k| (k, 2)).collect();
    let plan = plan_inventory(&PlannerConfig {
        clusters: clusters.clone(),
        structure: random_rows(21, 60),
        no_injection_ratio: 0.7,
        total: None,
    })
    .unwrap();
    let flat = instantiate(&plan, &demo_selection(&clusters, 0), 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    for f in flat.iter().take(1000) {
        let tree = partition(f).unwrap();
        let post = template_realize(&tree, f.seed).text;
        let gold = tree.to_bracket();
        let shuffled = shuffle_children(&gold, &mut rng);
        for opts in [WITH_INTENTS, ProductionOptions::default(), ProductionOptions { include_intents: true, multiset: true }] {
            let g = productions(&gold, Some(&post), opts);
            let p = productions(&shuffled, Some(&post), opts);
            assert_eq!(ema(&p, &g), 1.0, "{gold}");
            assert_eq!(pf1(&p, &g), 1.0);
        }
        checked += 1;
    }
    assert_eq!(checked, 1000);
}

#[test]
fn geometric_means_of_reported_scores() {
    let gemma = [60.14, 59.70, 63.18, 57.44, 30.89, 59.16, 64.37, 26.90];
    let llama = [56.03, 58.42, 63.46, 54.17, 30.79, 61.87, 53.72, 29.01];
    // Frozen from an independent log-free product computation.
    let oracle = |xs: &[f64]| xs.iter().product::<f64>().powf(1.0 / xs.len() as f64);
    for (xs, want) in [(&gemma, 50.34), (&llama, 49.03)] {
        let gm = geometric_mean(xs).value.unwrap();
        assert!((gm - want).abs() <= 0.01, "{gm}");
        assert!((gm - oracle(xs)).abs() < 1e-9);
    }
}

#[test]
fn micro_f1_matches_confusion_counts() {
    use Intent::*;
    let pairs = [
        (NotHateful, Some(NotHateful)),
        (Dehumanisation, Some(Threatening)),
        (Threatening, Some(Threatening)),
        (Derogation, None),
        (ProHateCrimes, Some(ProHateCrimes)),
    ];
    // Per-class TP/FP/FN summed by hand: tp 3, fp 2 (Threatening, missing), fn 2.
    assert!((micro_f1(&pairs) - 6.0 / 10.0).abs() < 1e-12);
}

#[test]
fn closest_tree_picks_best_match() {
    let gold = parse_bracket(GOLD).unwrap();
    let cands = [
        parse_bracket("[IN:Derogation [SL:Target painters]]").unwrap(),
        parse_bracket(GOLD).unwrap(),
        parse_bracket("[IN:NotHateful [SL:Target Artists]]").unwrap(),
    ];
    assert_eq!(closest_tree(&cands, &gold, None, WITH_INTENTS), Some(1));
    assert_eq!(closest_tree(&[], &gold, None, WITH_INTENTS), None);
}

#[test]
fn evaluate_perfect_and_missing() {
    let gold = vec![
        Gold {
            id: "a".into(),
            post: "Artists are parasites".into(),
            tree: parse_bracket(GOLD).unwrap(),
            intent: Intent::NotHateful,
            test_name: Some("1".into()),
        },
        Gold {
            id: "b".into(),
            post: "women are rats".into(),
            tree: parse_bracket("[IN:Dehumanisation [SL:Target women [SL:DehumanisingComparison are rats]]]").unwrap(),
            intent: Intent::Dehumanisation,
            test_name: Some("2".into()),
        },
    ];
    let preds: Vec<Prediction> = gold
        .iter()
        .map(|g| Prediction { id: g.id.clone(), intent: Some(g.intent.to_string()), trees: Some(vec![g.tree.to_string()]) })
        .collect();
    let r = evaluate(&gold, &preds, Setting::Icsf, WITH_INTENTS);
    assert_eq!(r.overall.micro_f1, 100.0);
    assert_eq!(r.overall.pf1, Some(100.0));
    assert_eq!(r.overall.ema, Some(100.0));
    assert!((r.aggregate["micro_f1"].value.unwrap() - 100.0).abs() < 1e-9);

    let r = evaluate(&gold, &preds[..1], Setting::Cls, WITH_INTENTS);
    assert_eq!(r.missing, 1);
    assert_eq!(r.overall.micro_f1, 50.0);
    assert_eq!(r.aggregate["micro_f1"].value, None);
    assert_eq!(r.aggregate["micro_f1"].zero_scores, vec![1]);
    assert!(r.table().contains("geo-mean"));
}

proptest! {
    #[test]
    fn geometric_mean_at_most_arithmetic(xs in prop::collection::vec(0.01f64..100.0, 1..12)) {
        let gm = geometric_mean(&xs).value.unwrap();
        let am = xs.iter().sum::<f64>() / xs.len() as f64;
        prop_assert!(gm <= am + 1e-9);
        prop_assert!(gm >= xs.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-9);
    }

    #[test]
    fn pf1_is_symmetric_and_bounded(a in "[a-c]( [a-c]){0,3}", b in "[a-c]( [a-c]){0,3}") {
        let ta = BNode::slot("Target", &a, vec![]);
        let tb = BNode::slot("Target", &b, vec![]);
        let opts = ProductionOptions::default();
        let (pa, pb) = (productions(&ta, None, opts), productions(&tb, None, opts));
        let f = pf1(&pa, &pb);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - pf1(&pb, &pa)).abs() < 1e-12);
    }
}
