use std::collections::BTreeMap;

use fairgram::demo::{demo_lexicon, demo_spans};
use fairgram::grammar::{SlotLabel, StructKind};
use fairgram::lexicon::{cluster_lexicon, ingest_plead_str, read_clusters, select_clusters, write_clusters, TrigramHasher};

const POSTS: &str = r#"{"id":"1","text":"Artists are parasites","intent":"NotHateful","slots":[{"label":"Target","start":0,"end":7},{"label":"DehumanisingComparison","start":12,"end":21}]}
{"id":"2","text":"immigrants are rats and I had pasta for lunch","intent":"Dehumanisation","target_group":"immigrants","slots":[{"label":"Target","start":0,"end":10},{"label":"ProtectedCharacteristic","text":"immigrants"},{"label":"DehumanisingComparison","start":11,"end":19}]}
{"id":"3","text":"the Klan did nothing wrong","intent":"ProHateCrimes","slots":[{"label":"HateEntity","start":0,"end":8},{"label":"SupportHateCrimes","start":9,"end":26}]}
"#;

#[test]
fn ingested_posts_cluster_by_label() {
    let got = ingest_plead_str(POSTS);
    assert!(got.diagnostics.is_empty(), "{:?}", got.diagnostics);
    assert_eq!(got.records, 3);
    let clusters = cluster_lexicon(&got.spans, 0.5, &TrigramHasher::default()).unwrap();
    for c in &clusters {
        assert!(c.members.iter().all(|m| m.label == c.label));
    }
    let sel = select_clusters(&clusters, &BTreeMap::from([(StructKind::D, 1), (StructKind::E, 1)]));
    assert_eq!(sel.selected(StructKind::D).len(), 1);
    assert_eq!(sel.selected(StructKind::E)[0].members[0].text, "the Klan");
}

#[test]
fn demo_lexicon_reclusters_into_its_own_groups() {
    let counts: BTreeMap<StructKind, usize> = [(StructKind::Tp, 3), (StructKind::E, 2), (StructKind::C, 2)].into();
    let lex = demo_lexicon(&counts, 0);
    let clusters = cluster_lexicon(&demo_spans(&lex), 0.5, &TrigramHasher::default()).unwrap();
    let tp = clusters.iter().filter(|c| c.kind() == StructKind::Tp).count();
    assert_eq!(tp, 3);
    assert!(clusters.iter().all(|c| c.label != SlotLabel::Target || c.id.0.starts_with("tp-")));
}

#[test]
fn clusters_round_trip_through_files() {
    let counts: BTreeMap<StructKind, usize> = [(StructKind::D, 2), (StructKind::Tp, 2)].into();
    let lex = demo_lexicon(&counts, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clusters.jsonl");
    write_clusters(&path, &lex).unwrap();
    assert_eq!(read_clusters(&path).unwrap(), lex);
}
