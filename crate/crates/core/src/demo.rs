//! A small synthetic lexicon for offline runs and tests.

use std::collections::BTreeMap;

use crate::grammar::{Span, StructKind};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::lexicon::{select_clusters, Cluster, ClusterId, Selection};
use crate::planner::StructureRow;
use crate::rng::rng;

const GROUPS: [(&str, &str); 16] = [
    ("immigrants", "immigration status"),
    ("women", "gender"),
    ("Muslims", "religion"),
    ("Jews", "religion"),
    ("gay men", "sexual orientation"),
    ("trans people", "gender identity"),
    ("Black people", "race"),
    ("disabled people", "disability"),
    ("refugees", "immigration status"),
    ("Roma", "ethnicity"),
    ("Polish people", "nationality"),
    ("Asians", "race"),
    ("lesbians", "sexual orientation"),
    ("Hindus", "religion"),
    ("Mexicans", "nationality"),
    ("old people", "age"),
];
const PLAIN_TARGETS: [&str; 10] =
    ["artists", "politicians", "bankers", "landlords", "lawyers", "tourists", "cyclists", "influencers", "journalists", "referees"];
const ENTITIES: [&str; 10] =
    ["the Klan", "the Nazis", "Golden Dawn", "the Proud Boys", "Combat 18", "the Ustasha", "Blood and Honour", "the Hammerskins", "the Iron March crowd", "the Order"];
const ANIMALS: [&str; 10] = ["rats", "parasites", "cockroaches", "vermin", "pigs", "leeches", "snakes", "maggots", "locusts", "lice"];
const THREATS: [&str; 10] =
    ["shot", "hanged", "beaten", "burned out", "run over", "locked up forever", "thrown out", "wiped out", "stabbed", "drowned"];
const ADJECTIVES: [&str; 10] = ["disgusting", "lazy", "stupid", "useless", "filthy", "greedy", "dishonest", "worthless", "pathetic", "arrogant"];
const SUPPORT: [&str; 10] = [
    "did nothing wrong",
    "were right all along",
    "deserve our support",
    "should be praised",
    "are true heroes",
    "had the right idea",
    "should finish the job",
    "are doing god's work",
    "deserve a medal",
    "showed real courage",
];
const STANCES: [&str; 10] = [
    "I don't agree that",
    "it's wrong to say",
    "nobody should claim",
    "I reject the idea that",
    "it's hateful to say",
    "I refuse to believe",
    "shame on anyone saying",
    "it's bigoted to think",
    "I'm tired of hearing that",
    "stop pretending that",
];
const CONTEXTS: [&str; 10] = [
    "the weather is lovely today",
    "I had pasta for lunch",
    "my train was late again",
    "the match last night was great",
    "I finally finished that book",
    "my cat knocked over a plant",
    "the new cafe downtown is nice",
    "I'm learning to play guitar",
    "we went hiking on Sunday",
    "the concert sold out fast",
];
const QUALIFIERS: [&str; 8] = ["northern", "southern", "young", "rich", "local", "foreign", "urban", "rural"];

/// The `k`-th base word of a list, extended with qualifiers past its end.
fn nth(list: &[&str], k: usize) -> String {
    let base = list[k % list.len()];
    match k / list.len() {
        0 => base.to_string(),
        q => format!("{} {base}", QUALIFIERS[(q - 1) % QUALIFIERS.len()]),
    }
}

fn prefix(kind: StructKind) -> &'static str {
    match kind {
        StructKind::Tp => "tp",
        StructKind::Tnp => "tgt",
        StructKind::E => "e",
        StructKind::D => "d",
        StructKind::Th => "th",
        StructKind::N => "n",
        StructKind::Sup => "sup",
        StructKind::Ns => "ns",
        StructKind::C => "c",
    }
}

fn cluster(kind: StructKind, k: usize) -> Cluster {
    let src = |i: usize| format!("demo-{}-{k}-{i}", prefix(kind));
    let plain = |texts: Vec<String>| -> Vec<Span> {
        texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| Span::new(t, kind.label(), src(i)).expect("non-empty demo span"))
            .collect()
    };
    let (id, members) = match kind {
        StructKind::Tp => {
            let c = GROUPS[k % GROUPS.len()].1;
            let group = nth(&GROUPS.map(|x| x.0), k);
            let texts = [group.clone(), format!("those {group}"), format!("all {group}"), format!("the {group} around here")];
            let members = texts
                .into_iter()
                .enumerate()
                .map(|(i, t)| Span::protected_target(t, c, src(i)).expect("demo target").with_group(group.clone()))
                .collect();
            (format!("tp-{k:03}"), members)
        }
        StructKind::Tnp => {
            let x = nth(&PLAIN_TARGETS, k);
            (format!("tgt-{k:03}"), plain(vec![x.clone(), format!("those {x}"), format!("most {x}"), format!("the {x} I know")]))
        }
        StructKind::E => {
            let x = nth(&ENTITIES, k);
            (format!("e-{k:03}"), plain(vec![x.clone(), format!("members of {x}"), format!("{x} and friends"), format!("folks in {x}")]))
        }
        StructKind::D => {
            let x = nth(&ANIMALS, k);
            (format!("d-{k:03}"), plain(vec![format!("are {x}"), format!("are nothing but {x}"), format!("are like {x}"), format!("are just {x}")]))
        }
        StructKind::Th => {
            let x = nth(&THREATS, k);
            (format!("th-{k:03}"), plain(vec![format!("should be {x}"), format!("deserve to be {x}"), format!("ought to be {x}"), format!("must be {x}")]))
        }
        StructKind::N => {
            let x = nth(&ADJECTIVES, k);
            (format!("n-{k:03}"), plain(vec![format!("are {x}"), format!("are so {x}"), format!("are really {x}"), format!("are always {x}")]))
        }
        StructKind::Sup => {
            let x = nth(&SUPPORT, k);
            (format!("sup-{k:03}"), plain(vec![x.clone(), format!("honestly {x}"), format!("truly {x}"), format!("clearly {x}")]))
        }
        StructKind::Ns => {
            let x = nth(&STANCES, k);
            (format!("ns-{k:03}"), plain(vec![x.clone(), format!("honestly, {x}"), format!("frankly {x}"), format!("really, {x}")]))
        }
        StructKind::C => {
            let x = nth(&CONTEXTS, k);
            (format!("c-{k:03}"), plain(vec![x.clone(), format!("by the way, {x}"), format!("anyway, {x}"), format!("also {x}")]))
        }
    };
    Cluster::new(ClusterId(id), kind.label(), members)
}

/// `counts[kind] + held_out` clusters of four members for every kind in
/// `counts`. Cluster order matches id order so selection by size keeps the
/// first `counts[kind]`.
pub fn demo_lexicon(counts: &BTreeMap<StructKind, usize>, held_out: usize) -> Vec<Cluster> {
    let mut out = Vec::new();
    for (&kind, &n) in counts {
        out.extend((0..n + held_out).map(|k| cluster(kind, k)));
    }
    out
}

/// Every span of a lexicon, as ingestion would produce them.
pub fn demo_spans(clusters: &[Cluster]) -> Vec<Span> {
    clusters.iter().flat_map(|c| c.members.iter().cloned()).collect()
}

/// Demo lexicon for `counts`, split into selected and held-out clusters.
pub fn demo_selection(counts: &BTreeMap<StructKind, usize>, held_out: usize) -> Selection {
    select_clusters(&demo_lexicon(counts, held_out), counts)
}

/// A random but valid structure table of `rows` rows whose kinds never
/// repeat more than twice per instance.
pub fn random_rows(seed: u64, rows: usize) -> Vec<StructureRow> {
    use StructKind::*;
    let mut r = rng(seed);
    let roots = [Some(Tp), Some(Tnp), Some(E), None];
    let exprs = [D, Th, N, Sup, Ns];
    let injectable = [Tp, Tnp, E, D, Th, N, Sup, Ns];
    (0..rows)
        .map(|_| {
            let mut main: Vec<StructKind> = roots.choose(&mut r).copied().flatten().into_iter().collect();
            let n = r.gen_range(1..=3);
            main.extend(exprs.choose_multiple(&mut r, n).copied());
            let mut injected = Vec::new();
            if r.gen_bool(0.5) {
                for _ in 0..r.gen_range(1..=4) {
                    let k = *injectable.choose(&mut r).expect("non-empty");
                    if injected.iter().filter(|x| **x == k).count() < 2 {
                        injected.push(k);
                    }
                }
            }
            let join = |ks: &[StructKind]| ks.iter().map(|k| k.symbol()).collect::<Vec<_>>().join(" ");
            StructureRow { main: join(&main), injected: join(&injected), count: r.gen_range(1..=60) }
        })
        .collect()
}
