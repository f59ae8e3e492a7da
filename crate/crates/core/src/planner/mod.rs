//! Structure inventory planning.
//!
//! Every row of the structure table is expanded into instances whose cluster
//! choices follow a fixed digit scheme. For a row, let `A` be the lcm of the
//! cluster counts of the target kinds it contains and `B` the lcm over its
//! tracked expression kinds. Instance `j` takes target cluster `j mod K_T`
//! and expression cluster `(j / A) mod K_x`, shifted by one for every repeat
//! of the same kind. Any `A * B` consecutive instances therefore meet every
//! (target cluster, expression cluster) pair equally often, so a row whose
//! count is a multiple of `A * B` contributes the same amount to every pair.
//! Rows that are not multiples are reported, never rounded.

pub mod balance;
pub mod instantiate;
pub mod tally;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::{parse_kinds, render_signature, StructKind};
use crate::tree::{intent_for_kinds, Intent};
use tally::{injection_kinds, supported_classes, uniform, Observation, Tally};

pub use balance::{verify_balance, BalanceReport, Violation};
pub use instantiate::instantiate;

/// One row of a structure table as written in configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureRow {
    pub main: String,
    #[serde(default)]
    pub injected: String,
    pub count: u64,
}

/// Main and injected kinds of a structure, without the implicit context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub main: Vec<StructKind>,
    pub injected: Vec<StructKind>,
    pub count: u64,
}

/// Main trees hold at most this many slots.
pub const MAX_MAIN_SLOTS: usize = 4;

impl StructureSpec {
    pub fn parse(row: &StructureRow) -> Result<Self> {
        let main_all = parse_kinds(&row.main)?;
        let contexts = main_all.iter().filter(|k| **k == StructKind::C).count();
        if contexts > 1 {
            return Err(Error::Config(format!("row {:?} lists more than one context", row.main)));
        }
        let main: Vec<StructKind> = main_all.into_iter().filter(|k| *k != StructKind::C).collect();
        let injected = parse_kinds(&row.injected)?;
        let spec = StructureSpec { main, injected, count: row.count };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let sig = self.signature();
        if self.count == 0 {
            return Err(Error::Config(format!("{sig}: count must be positive")));
        }
        if self.main.len() > MAX_MAIN_SLOTS {
            return Err(Error::Config(format!("{sig}: more than {MAX_MAIN_SLOTS} main slots")));
        }
        if self.main.iter().filter(|k| k.is_target()).count() > 1 {
            return Err(Error::Config(format!("{sig}: main tree has more than one target")));
        }
        if self.injected.contains(&StructKind::C) {
            return Err(Error::Config(format!("{sig}: context cannot be injected")));
        }
        Ok(())
    }

    pub fn signature(&self) -> String {
        render_signature(&self.main, &self.injected)
    }

    /// Class set by the main tree.
    pub fn class(&self) -> Intent {
        let root = self.main.iter().copied().find(|k| k.is_target());
        let attached: Vec<StructKind> = self.main.iter().copied().filter(|k| !k.is_target()).collect();
        intent_for_kinds(root, &attached)
    }

    fn multiplicity(&self) -> BTreeMap<StructKind, usize> {
        let mut m = BTreeMap::new();
        for k in self.main.iter().chain(&self.injected) {
            *m.entry(*k).or_insert(0) += 1;
        }
        m
    }

    fn lcm_over(&self, clusters: &BTreeMap<StructKind, usize>, pred: impl Fn(StructKind) -> bool) -> u64 {
        self.multiplicity()
            .keys()
            .filter(|k| pred(**k))
            .map(|k| clusters.get(k).copied().unwrap_or(1).max(1) as u64)
            .fold(1, lcm)
    }

    /// Number of consecutive instances after which every cluster pair has
    /// been met equally often.
    pub fn period(&self, clusters: &BTreeMap<StructKind, usize>) -> u64 {
        self.lcm_over(clusters, StructKind::is_target) * self.lcm_over(clusters, StructKind::is_tracked)
    }

    /// Cluster choices of instance `j`, main slots first, each list in spec
    /// order. The context is appended last.
    pub fn assign(&self, j: u64, clusters: &BTreeMap<StructKind, usize>) -> Vec<Assigned> {
        let a = self.lcm_over(clusters, StructKind::is_target);
        let mut seen: BTreeMap<StructKind, usize> = BTreeMap::new();
        let mut pick = |kind: StructKind, main: bool| {
            let k = clusters.get(&kind).copied().unwrap_or(1).max(1) as u64;
            let digit = if kind.is_target() { j % k } else { (j / a) % k };
            let q = seen.entry(kind).or_insert(0);
            let cluster = ((digit + *q as u64) % k) as usize;
            *q += 1;
            Assigned { kind, cluster, main }
        };
        let mut out: Vec<Assigned> = self.main.iter().map(|k| pick(*k, true)).collect();
        out.extend(self.injected.iter().map(|k| pick(*k, false)));
        out.push(pick(StructKind::C, true));
        out
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assigned {
    pub kind: StructKind,
    pub cluster: usize,
    pub main: bool,
}

/// Abstract cluster slot: the `index`-th selected cluster of `kind`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClusterRef {
    pub kind: StructKind,
    pub index: usize,
}

impl fmt::Display for ClusterRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.kind, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairQuota {
    pub target: ClusterRef,
    pub expression: ClusterRef,
    pub n: u64,
    pub m: u64,
    pub o: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassQuota {
    pub target: ClusterRef,
    pub counts: BTreeMap<Intent, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum Issue {
    RowNotDivisible { row: usize, structure: String, count: u64, period: u64, lower: u64, upper: u64 },
    MultiplicityExceedsClusters { row: usize, structure: String, kind: StructKind, multiplicity: usize, clusters: usize },
    PairImbalance { target: ClusterRef, min: u64, max: u64 },
    ClassImbalance { target: ClusterRef, counts: BTreeMap<Intent, u64> },
    InjectionImbalance { class: Intent, counts: BTreeMap<StructKind, u64> },
    NoInjectionRatio { no_injection: u64, total: u64, ratio: f64 },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::RowNotDivisible { row, structure, count, period, lower, upper } => write!(
                f,
                "row {row} ({structure}): count {count} is not a multiple of {period}; use {lower} or {upper}"
            ),
            Issue::MultiplicityExceedsClusters { row, structure, kind, multiplicity, clusters } => write!(
                f,
                "row {row} ({structure}): {multiplicity} {kind} slots but only {clusters} {kind} clusters"
            ),
            Issue::PairImbalance { target, min, max } => {
                write!(f, "{target}: expression co-occurrence ranges from {min} to {max}")
            }
            Issue::ClassImbalance { target, counts } => write!(f, "{target}: uneven class counts {counts:?}"),
            Issue::InjectionImbalance { class, counts } => write!(f, "{class}: uneven injections {counts:?}"),
            Issue::NoInjectionRatio { no_injection, total, ratio } => write!(
                f,
                "{no_injection} of {total} instances carry no injections; expected {:.1}",
                ratio * *total as f64
            ),
        }
    }
}

/// Planner input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Number of selected clusters per kind.
    pub clusters: BTreeMap<StructKind, usize>,
    pub structure: Vec<StructureRow>,
    #[serde(default = "default_ratio")]
    pub no_injection_ratio: f64,
    /// Rescale the table to this many instances.
    #[serde(default)]
    pub total: Option<u64>,
}

pub fn default_ratio() -> f64 {
    0.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub specs: Vec<StructureSpec>,
    pub clusters: BTreeMap<StructKind, usize>,
    pub no_injection_ratio: f64,
    pub total: u64,
    pub no_injection: u64,
    pub pair_quotas: Vec<PairQuota>,
    pub class_quotas: Vec<ClassQuota>,
    /// Co-occurrence count shared by every pair of a target kind, when uniform.
    pub pair_n: BTreeMap<StructKind, u64>,
    /// Per-class count shared by every cluster of a target kind, when uniform.
    pub class_n: BTreeMap<StructKind, u64>,
    /// Per-kind instance count inside each hateful class, when uniform.
    pub injection_n: BTreeMap<Intent, u64>,
    pub issues: Vec<Issue>,
}

impl Plan {
    pub fn is_feasible(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn require_feasible(&self) -> Result<()> {
        if self.issues.is_empty() {
            return Ok(());
        }
        let lines: Vec<String> = self.issues.iter().map(|i| format!("  - {i}")).collect();
        Err(Error::Infeasible(lines.join("\n")))
    }

    pub fn quota(&self, target: ClusterRef, expression: ClusterRef) -> Option<&PairQuota> {
        self.pair_quotas.iter().find(|q| q.target == target && q.expression == expression)
    }
}

/// Expand the structure table, count every cluster pair and report every
/// balance constraint that does not hold.
pub fn plan_inventory(config: &PlannerConfig) -> Result<Plan> {
    if !(0.0..=1.0).contains(&config.no_injection_ratio) {
        return Err(Error::Config(format!("no-injection ratio {} outside [0, 1]", config.no_injection_ratio)));
    }
    if config.structure.is_empty() {
        return Err(Error::Config("empty structure table".into()));
    }
    let mut specs: Vec<StructureSpec> = config.structure.iter().map(StructureSpec::parse).collect::<Result<_>>()?;
    if let Some(total) = config.total {
        let sum: u64 = specs.iter().map(|s| s.count).sum();
        for s in &mut specs {
            let scaled = s.count as u128 * total as u128;
            if !scaled.is_multiple_of(sum as u128) {
                return Err(Error::Config(format!(
                    "{}: {} scaled to a total of {total} is not an integer",
                    s.signature(),
                    s.count
                )));
            }
            s.count = (scaled / sum as u128) as u64;
            if s.count == 0 {
                return Err(Error::Config(format!("{} scales to zero instances", s.signature())));
            }
        }
    }
    let clusters = &config.clusters;
    let mut needed: BTreeSet<StructKind> = BTreeSet::from([StructKind::C]);
    for s in &specs {
        needed.extend(s.main.iter().chain(&s.injected).copied());
    }
    for k in &needed {
        if clusters.get(k).copied().unwrap_or(0) == 0 {
            return Err(Error::Config(format!("no clusters configured for {k}")));
        }
    }

    let mut issues = Vec::new();
    let mut tally: Tally<ClusterRef> = Tally::default();
    for (row, spec) in specs.iter().enumerate() {
        for (kind, r) in spec.multiplicity() {
            let k = clusters[&kind];
            if r > k {
                issues.push(Issue::MultiplicityExceedsClusters {
                    row,
                    structure: spec.signature(),
                    kind,
                    multiplicity: r,
                    clusters: k,
                });
            }
        }
        let has_target = spec.main.iter().chain(&spec.injected).any(|k| k.is_target());
        let period = spec.period(clusters);
        if has_target && spec.count % period != 0 {
            let lower = spec.count / period * period;
            issues.push(Issue::RowNotDivisible {
                row,
                structure: spec.signature(),
                count: spec.count,
                period,
                lower,
                upper: lower + period,
            });
        }
        // Pair, class and injection counts repeat with the period, so one
        // pass over it weighted by the number of repeats is exact.
        let class = spec.class();
        let kinds: BTreeSet<StructKind> = spec.main.iter().chain(&spec.injected).copied().collect();
        let injected = !spec.injected.is_empty();
        let (full, rest) = (spec.count / period, spec.count % period);
        for j in 0..period.min(spec.count) {
            let weight = full + u64::from(j < rest);
            let assigned = spec.assign(j, clusters);
            let targets: Vec<(ClusterRef, StructKind)> = assigned
                .iter()
                .filter(|a| a.kind.is_target())
                .map(|a| (ClusterRef { kind: a.kind, index: a.cluster }, a.kind))
                .collect();
            let expressions: Vec<(ClusterRef, StructKind, bool)> = assigned
                .iter()
                .filter(|a| a.kind.is_tracked())
                .map(|a| (ClusterRef { kind: a.kind, index: a.cluster }, a.kind, a.main))
                .collect();
            tally.observe(&Observation { class, targets: &targets, expressions: &expressions, kinds: &kinds, injected }, weight);
        }
    }

    let target_kinds: BTreeSet<StructKind> = needed.iter().copied().filter(|k| k.is_target()).collect();
    let tracked_kinds: BTreeSet<StructKind> = needed.iter().copied().filter(|k| k.is_tracked()).collect();
    let refs = |kinds: &BTreeSet<StructKind>| -> Vec<ClusterRef> {
        kinds.iter().flat_map(|&kind| (0..clusters[&kind]).map(move |index| ClusterRef { kind, index })).collect()
    };
    let targets = refs(&target_kinds);
    let expressions = refs(&tracked_kinds);

    let mut pair_quotas = Vec::with_capacity(targets.len() * expressions.len());
    let mut per_kind_n: BTreeMap<StructKind, Vec<u64>> = BTreeMap::new();
    for t in &targets {
        let mut ns = Vec::with_capacity(expressions.len());
        for e in &expressions {
            let (m, o) = tally.pair(t, e);
            pair_quotas.push(PairQuota { target: *t, expression: *e, n: m + o, m, o });
            ns.push(m + o);
        }
        if let (Some(min), Some(max)) = (ns.iter().min(), ns.iter().max()) {
            if min != max {
                issues.push(Issue::PairImbalance { target: *t, min: *min, max: *max });
            }
        }
        per_kind_n.entry(t.kind).or_default().extend(ns);
    }
    let pair_n = per_kind_n.into_iter().filter_map(|(k, v)| uniform(v).map(|n| (k, n))).collect();

    let mut class_quotas = Vec::with_capacity(targets.len());
    let mut per_kind_class: BTreeMap<StructKind, Vec<u64>> = BTreeMap::new();
    for t in &targets {
        let counts: BTreeMap<Intent, u64> =
            supported_classes(t.kind).iter().map(|c| (*c, tally.class_count(t, *c))).collect();
        if uniform(counts.values().copied()).is_none() {
            issues.push(Issue::ClassImbalance { target: *t, counts: counts.clone() });
        }
        per_kind_class.entry(t.kind).or_default().extend(counts.values().copied());
        class_quotas.push(ClassQuota { target: *t, counts });
    }
    let class_n = per_kind_class.into_iter().filter_map(|(k, v)| uniform(v).map(|n| (k, n))).collect();

    let mut injection_n = BTreeMap::new();
    for (class, counts) in &tally.injections {
        let full: BTreeMap<StructKind, u64> =
            injection_kinds(*class).into_iter().map(|k| (k, counts.get(&k).copied().unwrap_or(0))).collect();
        match uniform(full.values().copied()) {
            Some(n) => {
                injection_n.insert(*class, n);
            }
            None => issues.push(Issue::InjectionImbalance { class: *class, counts: full }),
        }
    }

    let expected = config.no_injection_ratio * tally.total as f64;
    if (tally.no_injection as f64 - expected).abs() > 1.0 {
        issues.push(Issue::NoInjectionRatio {
            no_injection: tally.no_injection,
            total: tally.total,
            ratio: config.no_injection_ratio,
        });
    }

    Ok(Plan {
        specs,
        clusters: clusters.clone(),
        no_injection_ratio: config.no_injection_ratio,
        total: tally.total,
        no_injection: tally.no_injection,
        pair_quotas,
        class_quotas,
        pair_n,
        class_n,
        injection_n,
        issues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(main: &str, injected: &str, count: u64) -> StructureRow {
        StructureRow { main: main.into(), injected: injected.into(), count }
    }

    fn config(clusters: &[(StructKind, usize)], rows: Vec<StructureRow>) -> PlannerConfig {
        PlannerConfig { clusters: clusters.iter().copied().collect(), structure: rows, no_injection_ratio: 0.7, total: None }
    }

    #[test]
    fn single_pair_gets_the_whole_row() {
        let plan = plan_inventory(&config(&[(StructKind::Tp, 1), (StructKind::D, 1), (StructKind::C, 1)], vec![row("T_p D", "", 5)])).unwrap();
        assert_eq!(plan.pair_quotas.len(), 1);
        assert_eq!(plan.pair_quotas[0].n, 5);
        assert_eq!(plan.pair_quotas[0].m, 5);
    }

    #[test]
    fn indivisible_row_reports_neighbours() {
        let plan = plan_inventory(&config(&[(StructKind::Tp, 2), (StructKind::D, 2), (StructKind::C, 1)], vec![row("T_p D", "", 10)])).unwrap();
        let found = plan.issues.iter().any(|i| {
            matches!(i, Issue::RowNotDivisible { count: 10, period: 4, lower: 8, upper: 12, .. })
        });
        assert!(found, "{:?}", plan.issues);
        assert!(plan.require_feasible().is_err());
    }

    #[test]
    fn missing_cluster_count_is_a_config_error() {
        assert!(plan_inventory(&config(&[(StructKind::Tp, 2), (StructKind::C, 1)], vec![row("T_p D", "", 4)])).is_err());
    }

    #[test]
    fn multiplicity_above_cluster_count() {
        let plan = plan_inventory(&config(
            &[(StructKind::Tp, 1), (StructKind::D, 1), (StructKind::C, 1)],
            vec![row("T_p N", "", 1), row("T_p D", "D D", 1)],
        ));
        assert!(plan.is_err());
        let plan = plan_inventory(&config(
            &[(StructKind::Tp, 1), (StructKind::D, 1), (StructKind::N, 1), (StructKind::C, 1)],
            vec![row("T_p N", "D D", 1)],
        ))
        .unwrap();
        assert!(plan.issues.iter().any(|i| matches!(i, Issue::MultiplicityExceedsClusters { multiplicity: 2, .. })));
    }

    #[test]
    fn context_rows_parse() {
        let s = StructureSpec::parse(&row("T_p C", "", 3)).unwrap();
        assert_eq!(s.main, vec![StructKind::Tp]);
        assert_eq!(s.signature(), "T_p C | —");
        assert_eq!(StructureSpec::parse(&row("C", "", 3)).unwrap().signature(), "C | —");
        assert!(StructureSpec::parse(&row("T_p D N Th Sup", "", 3)).is_err());
        assert!(StructureSpec::parse(&row("T_p D", "", 0)).is_err());
    }

    #[test]
    fn scaling_must_be_integral() {
        let mut c = config(&[(StructKind::Tp, 1), (StructKind::D, 1), (StructKind::C, 1)], vec![row("T_p D", "", 6), row("D", "", 4)]);
        c.total = Some(20);
        let plan = plan_inventory(&c).unwrap();
        assert_eq!(plan.specs[0].count, 12);
        c.total = Some(7);
        assert!(plan_inventory(&c).is_err());
    }
}
