//! Turning a plan into concrete flat instances.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::{Plan, StructureSpec};
use crate::error::{Error, Result};
use crate::grammar::{Span, StructKind};
use crate::instance::{FlatInstance, Slot};
use crate::lexicon::cluster::Selection;
use crate::lexicon::Cluster;
use crate::rng::{derive_seed, MemberSampler};

/// Members of `cluster` that have the requested kind; all members if none do.
fn pool(cluster: &Cluster, kind: StructKind) -> Vec<&Span> {
    let matching: Vec<&Span> = cluster.members.iter().filter(|s| s.kind() == kind).collect();
    if matching.is_empty() {
        cluster.members.iter().collect()
    } else {
        matching
    }
}

fn kind_index(kind: StructKind) -> u64 {
    StructKind::ALL.iter().position(|k| *k == kind).unwrap_or(0) as u64
}

fn row_instances(
    row: usize,
    spec: &StructureSpec,
    plan: &Plan,
    selection: &Selection,
    seed: u64,
) -> Vec<FlatInstance> {
    let structure = spec.signature();
    let mut samplers: HashMap<(StructKind, usize), (MemberSampler, Vec<&Span>, &Cluster)> = HashMap::new();
    let mut out = Vec::with_capacity(spec.count as usize);
    for j in 0..spec.count {
        let mut main = Vec::new();
        let mut injected = Vec::new();
        let mut context = None;
        for a in spec.assign(j, &plan.clusters) {
            let (sampler, members, cluster) = samplers.entry((a.kind, a.cluster)).or_insert_with(|| {
                let cluster = &selection.selected(a.kind)[a.cluster];
                let members = pool(cluster, a.kind);
                let s = derive_seed(seed, &[row as u64, kind_index(a.kind), a.cluster as u64]);
                (MemberSampler::new(members.len(), s), members, cluster)
            });
            let slot = Slot::new(members[sampler.draw()].clone(), Some(cluster.id.clone()));
            match (a.kind, a.main) {
                (StructKind::C, _) => context = Some(slot),
                (_, true) => main.push(slot),
                (_, false) => injected.push(slot),
            }
        }
        out.push(FlatInstance {
            id: format!("r{row:03}-{j:06}"),
            structure: structure.clone(),
            main,
            injected,
            context: context.expect("every assignment carries a context"),
            seed: derive_seed(seed, &[row as u64, j]),
        });
    }
    out
}

/// Draw spans for every instance of a plan. Cluster `i` of a kind is the
/// `i`-th selected cluster of that kind; members are drawn without
/// replacement per cluster and row until the cluster is exhausted.
pub fn instantiate(plan: &Plan, selection: &Selection, seed: u64) -> Result<Vec<FlatInstance>> {
    let mut needed: BTreeMap<StructKind, usize> = BTreeMap::from([(StructKind::C, 1)]);
    for s in &plan.specs {
        for k in s.main.iter().chain(&s.injected) {
            needed.insert(*k, 1);
        }
    }
    for kind in needed.keys() {
        let want = plan.clusters.get(kind).copied().unwrap_or(0);
        let have = selection.selected(*kind).len();
        if have < want {
            return Err(Error::Insufficient(format!("plan uses {want} {kind} clusters, {have} selected")));
        }
    }
    let rows: Vec<Vec<FlatInstance>> = plan
        .specs
        .par_iter()
        .enumerate()
        .map(|(row, spec)| row_instances(row, spec, plan, selection, seed))
        .collect();
    Ok(rows.into_iter().flatten().collect())
}
