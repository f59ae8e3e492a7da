//! Balance verification over built trees.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::tally::{injection_kinds, supported_classes, uniform, Observation, Tally};
use super::Plan;
use crate::grammar::StructKind;
use crate::lexicon::ClusterId;
use crate::tree::{InstanceTree, Intent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    PairCount { target: ClusterId, expression: ClusterId, expected: u64, actual: u64 },
    ClassImbalance { target: ClusterId, counts: BTreeMap<Intent, u64> },
    InjectionImbalance { class: Intent, counts: BTreeMap<StructKind, u64> },
    NoInjectionRatio { no_injection: u64, total: u64, ratio: f64 },
    PlanMismatch { quantity: String, expected: u64, actual: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PairCount { target, expression, expected, actual } => {
                write!(f, "({target}, {expression}): expected {expected}, found {actual}")
            }
            Violation::ClassImbalance { target, counts } => write!(f, "{target}: uneven class counts {counts:?}"),
            Violation::InjectionImbalance { class, counts } => write!(f, "{class}: uneven injections {counts:?}"),
            Violation::NoInjectionRatio { no_injection, total, ratio } => {
                write!(f, "{no_injection}/{total} instances without injections, expected ratio {ratio}")
            }
            Violation::PlanMismatch { quantity, expected, actual } => {
                write!(f, "{quantity}: planned {expected}, found {actual}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetRow {
    pub target: ClusterId,
    pub kind: StructKind,
    pub min_pair: u64,
    pub max_pair: u64,
    pub classes: BTreeMap<Intent, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub total: u64,
    pub no_injection: u64,
    pub expression_clusters: BTreeMap<StructKind, usize>,
    pub targets: Vec<TargetRow>,
    pub injections: BTreeMap<Intent, BTreeMap<StructKind, u64>>,
    pub violations: Vec<Violation>,
}

impl BalanceReport {
    pub fn is_balanced(&self) -> bool {
        self.violations.is_empty()
    }

    /// Plain-text summary, one line per target cluster.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "instances: {}  without injections: {}", self.total, self.no_injection);
        let _ = writeln!(s, "{:<24} {:<5} {:>8} {:>8}  classes", "target", "kind", "min", "max");
        for r in &self.targets {
            let classes: Vec<String> = r.classes.iter().map(|(c, n)| format!("{c}={n}")).collect();
            let _ = writeln!(
                s,
                "{:<24} {:<5} {:>8} {:>8}  {}",
                r.target.0,
                r.kind.symbol(),
                r.min_pair,
                r.max_pair,
                classes.join(" ")
            );
        }
        for (class, counts) in &self.injections {
            let parts: Vec<String> = counts.iter().map(|(k, n)| format!("{}={n}", k.symbol())).collect();
            let _ = writeln!(s, "{class}: {}", parts.join(" "));
        }
        if self.violations.is_empty() {
            s.push_str("balanced\n");
        } else {
            for v in &self.violations {
                let _ = writeln!(s, "violation: {v}");
            }
        }
        s
    }
}

/// Most frequent value; the larger one on ties.
fn mode(values: &[u64]) -> u64 {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(*v).or_insert(0) += 1;
    }
    counts.into_iter().max_by_key(|(v, c)| (*c, *v)).map_or(0, |(v, _)| v)
}

/// Recount pair, class and injection balance over `trees`, using the cluster
/// ids recorded on every slot. A pair is expected to reach the count shared
/// by most pairs of its target, or the planned count when a plan is given.
/// With a plan, totals and per-kind shared counts are also compared.
pub fn verify_balance(trees: &[InstanceTree], plan: Option<&Plan>) -> BalanceReport {
    let mut tally: Tally<ClusterId> = Tally::default();
    for tree in trees {
        let mut targets = Vec::new();
        let mut expressions = Vec::new();
        let mut kinds = BTreeSet::new();
        for t in &tree.subtrees {
            if let Some(r) = t.root.slot() {
                kinds.insert(r.kind());
                if let Some(id) = &r.cluster {
                    targets.push((id.clone(), r.kind()));
                }
            }
            for s in &t.attached {
                kinds.insert(s.kind());
                if let (true, Some(id)) = (s.kind().is_tracked(), &s.cluster) {
                    expressions.push((id.clone(), s.kind(), t.is_main));
                }
            }
        }
        let obs = Observation {
            class: tree.class(),
            targets: &targets,
            expressions: &expressions,
            kinds: &kinds,
            injected: tree.has_injections(),
        };
        tally.observe(&obs, 1);
    }

    let mut violations = Vec::new();
    let expressions: Vec<(ClusterId, StructKind)> = tally.expressions().map(|(k, v)| (k.clone(), v)).collect();
    let mut expression_clusters: BTreeMap<StructKind, usize> = BTreeMap::new();
    for (_, k) in &expressions {
        *expression_clusters.entry(*k).or_insert(0) += 1;
    }

    let mut rows = Vec::new();
    let mut class_by_kind: BTreeMap<StructKind, Vec<u64>> = BTreeMap::new();
    for (t, kind) in tally.targets() {
        let ns: Vec<u64> = expressions
            .iter()
            .map(|(e, _)| {
                let (m, o) = tally.pair(t, e);
                m + o
            })
            .collect();
        let min = ns.iter().copied().min().unwrap_or(0);
        let max = ns.iter().copied().max().unwrap_or(0);
        let expected = plan.and_then(|p| p.pair_n.get(&kind).copied()).unwrap_or_else(|| mode(&ns));
        for ((e, _), n) in expressions.iter().zip(&ns) {
            if *n != expected {
                violations.push(Violation::PairCount {
                    target: t.clone(),
                    expression: e.clone(),
                    expected,
                    actual: *n,
                });
            }
        }
        let classes: BTreeMap<Intent, u64> =
            supported_classes(kind).iter().map(|c| (*c, tally.class_count(t, *c))).collect();
        if uniform(classes.values().copied()).is_none() {
            violations.push(Violation::ClassImbalance { target: t.clone(), counts: classes.clone() });
        }
        class_by_kind.entry(kind).or_default().extend(classes.values().copied());
        rows.push(TargetRow { target: t.clone(), kind, min_pair: min, max_pair: max, classes });
    }

    let mut injections = BTreeMap::new();
    for (class, counts) in &tally.injections {
        let full: BTreeMap<StructKind, u64> =
            injection_kinds(*class).into_iter().map(|k| (k, counts.get(&k).copied().unwrap_or(0))).collect();
        if uniform(full.values().copied()).is_none() {
            violations.push(Violation::InjectionImbalance { class: *class, counts: full.clone() });
        }
        injections.insert(*class, full);
    }

    if let Some(plan) = plan {
        let mut check = |quantity: String, expected: u64, actual: u64| {
            if expected != actual {
                violations.push(Violation::PlanMismatch { quantity, expected, actual });
            }
        };
        check("instances".into(), plan.total, tally.total);
        check("instances without injections".into(), plan.no_injection, tally.no_injection);
        for (kind, n) in &plan.class_n {
            let found = class_by_kind.get(kind).and_then(|v| uniform(v.iter().copied())).unwrap_or(0);
            check(format!("{} class count", kind.symbol()), *n, found);
        }
        for (class, n) in &plan.injection_n {
            let found = injections.get(class).and_then(|m| uniform(m.values().copied())).unwrap_or(0);
            check(format!("{class} injection count"), *n, found);
        }
        for kind in StructKind::TRACKED {
            let planned = if plan.specs.iter().any(|s| s.main.contains(&kind) || s.injected.contains(&kind)) {
                plan.clusters.get(&kind).copied().unwrap_or(0)
            } else {
                0
            };
            let seen = expression_clusters.get(&kind).copied().unwrap_or(0);
            check(format!("{} clusters in use", kind.symbol()), planned as u64, seen as u64);
        }
        let expected = plan.no_injection_ratio * tally.total as f64;
        if (tally.no_injection as f64 - expected).abs() > 1.0 {
            violations.push(Violation::NoInjectionRatio {
                no_injection: tally.no_injection,
                total: tally.total,
                ratio: plan.no_injection_ratio,
            });
        }
    }

    BalanceReport {
        total: tally.total,
        no_injection: tally.no_injection,
        expression_clusters,
        targets: rows,
        injections,
        violations,
    }
}
