use std::collections::BTreeMap;

use fairgram::dataset::PipelineConfig;
use fairgram::demo::{demo_selection, random_rows};
use fairgram::grammar::{SlotLabel, Span, StructKind};
use fairgram::instance::{FlatInstance, Slot};
use fairgram::planner::{instantiate, plan_inventory, PlannerConfig};
use fairgram::tree::{intent_for_kinds, parse_bracket, partition, BinaryIntent, InstanceTree, Intent};
use proptest::prelude::*;

fn slot(text: &str, label: SlotLabel) -> Slot {
    Slot::new(Span::new(text, label, "fixture").unwrap(), None)
}

fn protected(text: &str, characteristic: &str) -> Slot {
    Slot::new(Span::protected_target(text, characteristic, "fixture").unwrap(), None)
}

fn flat(main: Vec<Slot>, injected: Vec<Slot>) -> FlatInstance {
    FlatInstance {
        id: "fixture".into(),
        structure: String::new(),
        main,
        injected,
        context: slot("nice weather today", SlotLabel::NonHatefulContext),
        seed: 0,
    }
}

fn random_trees(seed: u64, n: usize) -> Vec<InstanceTree> {
    let clusters: BTreeMap<StructKind, usize> = StructKind::ALL.iter().map(|&k| (k, 2)).collect();
    let sel = demo_selection(&clusters, 0);
    let mut out = Vec::new();
    let mut round = 0;
    while out.len() < n {
        let plan = plan_inventory(&PlannerConfig {
            clusters: clusters.clone(),
            structure: random_rows(seed + round, 40),
            no_injection_ratio: 0.7,
            total: None,
        })
        .unwrap();
        for f in instantiate(&plan, &sel, seed + round).unwrap() {
            out.push(partition(&f).unwrap());
        }
        round += 1;
    }
    out.truncate(n);
    out
}

#[test]
fn plain_target_with_comparison_is_not_hateful() {
    let t = partition(&flat(
        vec![slot("Artists", SlotLabel::Target), slot("parasites", SlotLabel::DehumanisingComparison)],
        vec![],
    ))
    .unwrap();
    assert_eq!(t.class(), Intent::NotHateful);
    assert_eq!(t.subtrees.len(), 1);
    assert_eq!(t.main().unwrap().root.kind(), Some(StructKind::Tnp));
}

#[test]
fn protected_target_with_threat_is_threatening() {
    let t = partition(&flat(
        vec![protected("The Wang Family", "Taiwanese"), slot("predating on is my pastime", SlotLabel::ThreateningSpeech)],
        vec![],
    ))
    .unwrap();
    assert_eq!(t.class(), Intent::Threatening);
    assert_eq!(t.binary, BinaryIntent::Hateful);
    let text = t.to_bracket().to_string();
    assert!(text.contains("[SL:ProtectedCharacteristic Taiwanese]"), "{text}");
}

#[test]
fn hate_entity_with_support_is_pro_hate_crimes() {
    let t = partition(&flat(
        vec![slot("Despotic", SlotLabel::HateEntity), slot("it's definitely ok for to hate", SlotLabel::SupportHateCrimes)],
        vec![],
    ))
    .unwrap();
    assert_eq!(t.class(), Intent::ProHateCrimes);
}

#[test]
fn precedence_and_negation() {
    use StructKind::*;
    assert_eq!(intent_for_kinds(Some(Tp), &[N, D, Th]), Intent::Threatening);
    assert_eq!(intent_for_kinds(Some(Tp), &[N, D]), Intent::Dehumanisation);
    assert_eq!(intent_for_kinds(Some(Tp), &[Th, Ns]), Intent::NotHateful);
    assert_eq!(intent_for_kinds(Some(E), &[Sup, Ns]), Intent::NotHateful);
    assert_eq!(intent_for_kinds(Some(Tnp), &[Th, D, N]), Intent::NotHateful);
    assert_eq!(intent_for_kinds(None, &[Th, Sup]), Intent::NotHateful);
}

#[test]
fn injected_hateful_material_never_flips_the_instance() {
    let t = partition(&flat(
        vec![slot("artists", SlotLabel::Target), slot("are lovely", SlotLabel::NegativeStance)],
        vec![
            protected("women", "gender"),
            slot("are rats", SlotLabel::DehumanisingComparison),
            slot("should be shot", SlotLabel::ThreateningSpeech),
            slot("the Klan", SlotLabel::HateEntity),
            slot("did nothing wrong", SlotLabel::SupportHateCrimes),
        ],
    ))
    .unwrap();
    assert_eq!(t.binary, BinaryIntent::NotHateful);
    assert!(t.subtrees.iter().filter(|s| !s.is_main).all(|s| s.intent == Intent::NotHateful));
}

#[test]
fn ten_thousand_random_instances_are_injection_neutral() {
    let trees = random_trees(1, 10_000);
    assert_eq!(trees.len(), 10_000);
    let flipped = trees.iter().filter(|t| t.binary != t.binary_without_injections()).count();
    assert_eq!(flipped, 0);
    assert!(trees.iter().any(|t| t.has_injections()));
}

#[test]
fn desk_no_injection_fraction() {
    let cfg = PipelineConfig::desk();
    let plan = plan_inventory(&cfg.planner()).unwrap();
    let flat = instantiate(&plan, &demo_selection(&cfg.clusters, 0), cfg.seed).unwrap();
    let trees: Vec<InstanceTree> = flat.iter().map(|f| partition(f).unwrap()).collect();
    let none = trees.iter().filter(|t| !t.has_injections()).count() as f64;
    assert!((none - 0.7 * trees.len() as f64).abs() <= 1.0, "{none} of {}", trees.len());
}

#[test]
fn brackets_round_trip_for_built_trees() {
    for t in random_trees(7, 500) {
        let b = t.to_bracket();
        assert_eq!(parse_bracket(&b.to_string()).unwrap(), b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_tables_partition_cleanly(seed in 0u64..10_000) {
        let trees = random_trees(seed, 200);
        for t in &trees {
            prop_assert_eq!(t.binary, t.binary_without_injections());
            for s in &t.subtrees {
                prop_assert!(s.check().is_ok());
                if !s.is_main {
                    prop_assert_eq!(s.intent, Intent::NotHateful);
                }
            }
            prop_assert_eq!(t.class() != Intent::NotHateful, t.binary == BinaryIntent::Hateful);
        }
    }
}
