//! Scoring predictions against gold trees.

pub mod metrics;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::tree::{parse_bracket, BNode, Intent};

pub use metrics::{
    closest_tree, ema, geometric_mean, micro_f1, pf1, productions, resolve_intent, tokenize, Aggregate, Production,
    ProductionOptions, ProductionSet, Resolved,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Cls,
    Icsf,
}

/// One gold instance as seen by the scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gold {
    pub id: String,
    pub post: String,
    pub tree: BNode,
    pub intent: Intent,
    pub test_name: Option<String>,
}

/// A line of a prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub n: usize,
    pub micro_f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pf1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ema: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub setting: Setting,
    pub overall: Scores,
    pub per_test: BTreeMap<String, Scores>,
    /// Geometric means over tests, keyed by metric name.
    pub aggregate: BTreeMap<String, Aggregate>,
    pub missing: usize,
    pub unparseable: usize,
    pub unknown_ids: usize,
}

struct Scored {
    correct_label: (Intent, Option<Intent>),
    pf1: f64,
    ema: f64,
    missing: bool,
    unparseable: usize,
}

fn score_one(gold: &Gold, pred: Option<&Prediction>, setting: Setting, opts: ProductionOptions) -> Scored {
    let mut s = Scored { correct_label: (gold.intent, None), pf1: 0.0, ema: 0.0, missing: pred.is_none(), unparseable: 0 };
    let Some(pred) = pred else { return s };
    match setting {
        Setting::Cls => match pred.intent.as_deref().map(str::parse::<Intent>) {
            Some(Ok(i)) => s.correct_label.1 = Some(i),
            _ => s.unparseable += 1,
        },
        Setting::Icsf => {
            let mut trees = Vec::new();
            for text in pred.trees.iter().flatten() {
                match parse_bracket(text) {
                    Ok(t) => trees.push(t),
                    Err(_) => s.unparseable += 1,
                }
            }
            if trees.is_empty() {
                return s;
            }
            s.correct_label.1 = resolve_intent(&trees).label_for(gold.intent);
            let post = Some(gold.post.as_str());
            if let Some(i) = closest_tree(&trees, &gold.tree, post, opts) {
                let g = productions(&gold.tree, post, opts);
                let p = productions(&trees[i], post, opts);
                s.pf1 = pf1(&p, &g);
                s.ema = ema(&p, &g);
            }
        }
    }
    s
}

fn summarise(rows: &[&Scored], setting: Setting) -> Scores {
    let labels: Vec<(Intent, Option<Intent>)> = rows.iter().map(|r| r.correct_label).collect();
    let n = rows.len();
    let mean = |f: fn(&Scored) -> f64| if n == 0 { 0.0 } else { 100.0 * rows.iter().map(|r| f(r)).sum::<f64>() / n as f64 };
    Scores {
        n,
        micro_f1: 100.0 * micro_f1(&labels),
        pf1: (setting == Setting::Icsf).then(|| mean(|r| r.pf1)),
        ema: (setting == Setting::Icsf).then(|| mean(|r| r.ema)),
    }
}

/// Score `predictions` against `gold`. Missing or unparseable predictions
/// count as wrong. Scores are percentages.
pub fn evaluate(gold: &[Gold], predictions: &[Prediction], setting: Setting, opts: ProductionOptions) -> MetricReport {
    let by_id: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let gold_ids: std::collections::HashSet<&str> = gold.iter().map(|g| g.id.as_str()).collect();
    let unknown_ids = predictions.iter().filter(|p| !gold_ids.contains(p.id.as_str())).count();
    let scored: Vec<Scored> =
        gold.par_iter().map(|g| score_one(g, by_id.get(g.id.as_str()).copied(), setting, opts)).collect();

    let all: Vec<&Scored> = scored.iter().collect();
    let overall = summarise(&all, setting);
    let mut groups: BTreeMap<String, Vec<&Scored>> = BTreeMap::new();
    for (g, s) in gold.iter().zip(&scored) {
        if let Some(t) = &g.test_name {
            groups.entry(t.clone()).or_default().push(s);
        }
    }
    let per_test: BTreeMap<String, Scores> = groups.iter().map(|(k, v)| (k.clone(), summarise(v, setting))).collect();
    let mut aggregate = BTreeMap::new();
    if !per_test.is_empty() {
        let f1: Vec<f64> = per_test.values().map(|s| s.micro_f1).collect();
        aggregate.insert("micro_f1".to_string(), geometric_mean(&f1));
        if setting == Setting::Icsf {
            let p: Vec<f64> = per_test.values().filter_map(|s| s.pf1).collect();
            let e: Vec<f64> = per_test.values().filter_map(|s| s.ema).collect();
            aggregate.insert("pf1".to_string(), geometric_mean(&p));
            aggregate.insert("ema".to_string(), geometric_mean(&e));
        }
    }
    MetricReport {
        setting,
        overall,
        per_test,
        aggregate,
        missing: scored.iter().filter(|s| s.missing).count(),
        unparseable: scored.iter().map(|s| s.unparseable).sum(),
        unknown_ids,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.2}"))
}

impl MetricReport {
    /// Micro F1 / PF1 / EMA table, one row per test plus overall and the
    /// geometric mean.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>6} {:>9} {:>7} {:>7}", "test", "n", "Micro F1", "PF1", "EMA");
        let mut row = |name: &str, sc: &Scores| {
            let _ = writeln!(
                s,
                "{:<10} {:>6} {:>9.2} {:>7} {:>7}",
                name,
                sc.n,
                sc.micro_f1,
                fmt_opt(sc.pf1),
                fmt_opt(sc.ema)
            );
        };
        for (name, sc) in &self.per_test {
            row(name, sc);
        }
        row("overall", &self.overall);
        if !self.aggregate.is_empty() {
            let get = |k: &str| self.aggregate.get(k).and_then(|a| a.value);
            let _ = writeln!(
                s,
                "{:<10} {:>6} {:>9} {:>7} {:>7}",
                "geo-mean",
                "",
                fmt_opt(get("micro_f1")),
                fmt_opt(get("pf1")),
                fmt_opt(get("ema"))
            );
        }
        let _ = writeln!(s, "missing: {}  unparseable: {}  unknown ids: {}", self.missing, self.unparseable, self.unknown_ids);
        s
    }
}
