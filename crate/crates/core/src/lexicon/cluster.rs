//! Average-linkage agglomerative clustering and cluster selection.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::embed::{cosine_distance, normalize_text, EmbeddingProvider};
use super::{Cluster, ClusterId};
use crate::error::{Error, Result};
use crate::grammar::{SlotLabel, Span, StructKind};

/// Agglomerative clustering over a precomputed distance matrix.
///
/// Repeatedly merges the closest pair of clusters under average linkage and
/// stops once the closest pair is farther apart than `threshold`. Ties go to
/// the pair with the smaller first index, then the smaller second index, where
/// a cluster's index is its smallest member. Returns member lists ordered by
/// their smallest member.
pub fn average_linkage(dist: &[Vec<f64>], threshold: f64) -> Vec<Vec<usize>> {
    let n = dist.len();
    if n == 0 {
        return Vec::new();
    }
    let mut d: Vec<Vec<f64>> = dist.to_vec();
    let mut active = vec![true; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut nn: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); n];

    let nearest = |d: &Vec<Vec<f64>>, active: &[bool], i: usize| -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if j != i && active[j] && d[i][j] < best.0 {
                best = (d[i][j], j);
            }
        }
        best
    };
    for (i, slot) in nn.iter_mut().enumerate() {
        *slot = nearest(&d, &active, i);
    }

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !active[i] || nn[i].1 == usize::MAX {
                continue;
            }
            let (dist, j) = nn[i];
            let key = (dist, i.min(j), i.max(j));
            if best.is_none_or(|b| key.0 < b.0 || (key.0 == b.0 && (key.1, key.2) < (b.1, b.2))) {
                best = Some(key);
            }
        }
        let Some((dist, a, b)) = best else { break };
        if dist > threshold {
            break;
        }
        let (na, nb) = (members[a].len() as f64, members[b].len() as f64);
        for k in 0..n {
            if active[k] && k != a && k != b {
                let merged = (na * d[a][k] + nb * d[b][k]) / (na + nb);
                d[a][k] = merged;
                d[k][a] = merged;
            }
        }
        active[b] = false;
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        members[a].sort_unstable();

        nn[a] = nearest(&d, &active, a);
        for k in 0..n {
            if !active[k] || k == a {
                continue;
            }
            if nn[k].1 == a || nn[k].1 == b {
                nn[k] = nearest(&d, &active, k);
            } else if d[k][a] < nn[k].0 || (d[k][a] == nn[k].0 && a < nn[k].1) {
                nn[k] = (d[k][a], a);
            }
        }
    }

    let mut out: Vec<Vec<usize>> = (0..n).filter(|&i| active[i]).map(|i| members[i].clone()).collect();
    out.sort_by_key(|m| m[0]);
    out
}

fn label_prefix(label: SlotLabel) -> &'static str {
    match label {
        SlotLabel::Target => "tgt",
        SlotLabel::ProtectedCharacteristic => "pc",
        SlotLabel::DehumanisingComparison => "d",
        SlotLabel::ThreateningSpeech => "th",
        SlotLabel::NegativeOpinion => "n",
        SlotLabel::HateEntity => "e",
        SlotLabel::SupportHateCrimes => "sup",
        SlotLabel::NegativeStance => "ns",
        SlotLabel::NonHatefulContext => "c",
    }
}

/// Cluster same-label spans by embedding similarity.
pub fn agglomerative_cluster(
    spans: &[Span],
    threshold: f64,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<Cluster>> {
    if spans.is_empty() {
        return Ok(Vec::new());
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("clustering threshold {threshold} outside (0, 1)")));
    }
    let label = spans[0].label;
    if spans.iter().any(|s| s.label != label) {
        return Err(Error::Config("agglomerative_cluster needs spans of a single label".into()));
    }
    let texts: Vec<String> = spans.iter().map(|s| normalize_text(&s.text)).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let vecs = provider.embed(&refs)?;
    if vecs.iter().any(|v| v.len() != provider.dimension() || v.iter().any(|x| !x.is_finite())) {
        return Err(Error::Config("embedding provider returned malformed vectors".into()));
    }
    let dist: Vec<Vec<f64>> = vecs
        .iter()
        .map(|a| vecs.iter().map(|b| cosine_distance(a, b)).collect())
        .collect();
    let groups = average_linkage(&dist, threshold);
    let prefix = label_prefix(label);
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(k, idx)| {
            Cluster::new(ClusterId(format!("{prefix}-{k:03}")), label, idx.into_iter().map(|i| spans[i].clone()).collect())
        })
        .collect())
}

fn slug(key: &str) -> String {
    let s: String = key
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect();
    s.trim_matches('_').to_string()
}

/// Protected targets are grouped by their annotated group key; spans without
/// a key fall back to embedding clustering.
pub fn group_protected_targets(
    spans: &[Span],
    threshold: f64,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<Cluster>> {
    let mut keyed: BTreeMap<String, Vec<Span>> = BTreeMap::new();
    let mut rest = Vec::new();
    for s in spans {
        match s.group.as_deref().map(str::trim).filter(|g| !g.is_empty()) {
            Some(g) => keyed.entry(slug(g)).or_default().push(s.clone()),
            None => rest.push(s.clone()),
        }
    }
    let mut out: Vec<Cluster> = keyed
        .into_iter()
        .map(|(key, members)| Cluster::new(ClusterId(format!("tp-{key}")), SlotLabel::Target, members))
        .collect();
    out.extend(agglomerative_cluster(&rest, threshold, provider)?);
    Ok(out)
}

/// Cluster a mixed lexicon: protected targets by group, every other label
/// (non-protected targets apart from protected ones) by embedding.
pub fn cluster_lexicon(spans: &[Span], threshold: f64, provider: &dyn EmbeddingProvider) -> Result<Vec<Cluster>> {
    let mut protected = Vec::new();
    let mut by_label: BTreeMap<SlotLabel, Vec<Span>> = BTreeMap::new();
    for s in spans {
        if s.is_protected_target() {
            protected.push(s.clone());
        } else {
            by_label.entry(s.label).or_default().push(s.clone());
        }
    }
    let mut out = group_protected_targets(&protected, threshold, provider)?;
    for c in &mut out {
        if !c.id.0.starts_with("tp-") {
            c.id = ClusterId(format!("tp-{}", c.id.0));
        }
    }
    for list in by_label.values() {
        out.extend(agglomerative_cluster(list, threshold, provider)?);
    }
    Ok(out)
}

/// Clusters per kind to keep for generation.
pub type Quotas = BTreeMap<StructKind, usize>;

/// 40 clusters for protected targets and hate entities, 20 for everything else.
pub fn default_quotas() -> Quotas {
    StructKind::ALL
        .iter()
        .map(|&k| (k, if matches!(k, StructKind::Tp | StructKind::E) { 40 } else { 20 }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub kind: StructKind,
    pub wanted: usize,
    pub available: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Selection {
    /// Selected clusters per kind, largest first.
    pub selected: BTreeMap<StructKind, Vec<Cluster>>,
    /// Clusters left out by the quota, largest first.
    pub held_out: BTreeMap<StructKind, Vec<Cluster>>,
    pub shortfalls: Vec<Shortfall>,
}

impl Selection {
    pub fn selected(&self, kind: StructKind) -> &[Cluster] {
        self.selected.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn held_out(&self, kind: StructKind) -> &[Cluster] {
        self.held_out.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Keep the `quota` largest clusters of each kind (ties by id).
pub fn select_clusters(clusters: &[Cluster], quotas: &Quotas) -> Selection {
    let mut by_kind: BTreeMap<StructKind, Vec<Cluster>> = BTreeMap::new();
    for c in clusters {
        if c.label == SlotLabel::ProtectedCharacteristic {
            continue;
        }
        by_kind.entry(c.kind()).or_default().push(c.clone());
    }
    let mut sel = Selection::default();
    for (kind, mut list) in by_kind {
        list.sort_by(|a, b| b.members.len().cmp(&a.members.len()).then_with(|| a.id.cmp(&b.id)));
        let quota = quotas.get(&kind).copied().unwrap_or(0);
        if list.len() < quota {
            warn!("only {} {} clusters available for a quota of {}", list.len(), kind, quota);
            sel.shortfalls.push(Shortfall { kind, wanted: quota, available: list.len() });
        }
        let rest = list.split_off(quota.min(list.len()));
        if !list.is_empty() {
            sel.selected.insert(kind, list);
        }
        if !rest.is_empty() {
            sel.held_out.insert(kind, rest);
        }
    }
    for (&kind, &quota) in quotas {
        if quota > 0 && !sel.selected.contains_key(&kind) && !sel.shortfalls.iter().any(|s| s.kind == kind) {
            sel.shortfalls.push(Shortfall { kind, wanted: quota, available: 0 });
        }
    }
    sel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::embed::TrigramHasher;

    fn spans(texts: &[&str], label: SlotLabel) -> Vec<Span> {
        texts.iter().enumerate().map(|(i, t)| Span::new(*t, label, format!("s{i}")).unwrap()).collect()
    }

    #[test]
    fn empty_input_gives_no_clusters() {
        assert!(agglomerative_cluster(&[], 0.5, &TrigramHasher::default()).unwrap().is_empty());
    }

    #[test]
    fn singleton() {
        let c = agglomerative_cluster(&spans(&["rats"], SlotLabel::DehumanisingComparison), 0.5, &TrigramHasher::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members.len(), 1);
    }

    #[test]
    fn identical_texts_merge_at_tiny_threshold() {
        let s = spans(&["are parasites", "are parasites"], SlotLabel::DehumanisingComparison);
        let c = agglomerative_cluster(&s, 1e-9, &TrigramHasher::default()).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn rejects_mixed_labels() {
        let mut s = spans(&["a"], SlotLabel::Target);
        s.extend(spans(&["b"], SlotLabel::HateEntity));
        assert!(agglomerative_cluster(&s, 0.5, &TrigramHasher::default()).is_err());
    }

    #[test]
    fn linkage_ties_prefer_smaller_indices() {
        // Three mutually equidistant points: (0, 1) merges first.
        let d = vec![vec![0.0, 0.2, 0.2], vec![0.2, 0.0, 0.2], vec![0.2, 0.2, 0.0]];
        assert_eq!(average_linkage(&d, 0.1), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(average_linkage(&d, 0.2), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn women_group_key() {
        let s: Vec<Span> = ["woman", "she", "her"]
            .iter()
            .map(|t| Span::protected_target(*t, "women", "x").unwrap().with_group("women"))
            .collect();
        let c = group_protected_targets(&s, 0.5, &TrigramHasher::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].id.0, "tp-women");
        assert_eq!(c[0].members.len(), 3);
    }

    #[test]
    fn two_keys_two_clusters() {
        let s = vec![
            Span::protected_target("woman", "women", "a").unwrap().with_group("women"),
            Span::protected_target("migrants", "immigrants", "b").unwrap().with_group("immigrants"),
        ];
        assert_eq!(group_protected_targets(&s, 0.5, &TrigramHasher::default()).unwrap().len(), 2);
    }

    fn sized(id: &str, n: usize) -> Cluster {
        let members = (0..n).map(|i| Span::new(format!("{id} {i}"), SlotLabel::DehumanisingComparison, "x").unwrap()).collect();
        Cluster::new(ClusterId(id.into()), SlotLabel::DehumanisingComparison, members)
    }

    #[test]
    fn selection_takes_largest_first() {
        let clusters: Vec<Cluster> = (0..50).map(|i| sized(&format!("d-{i:03}"), 1 + i % 7)).collect();
        let quotas = Quotas::from([(StructKind::D, 40)]);
        let sel = select_clusters(&clusters, &quotas);
        let picked = sel.selected(StructKind::D);
        assert_eq!(picked.len(), 40);
        assert!(picked.windows(2).all(|w| w[0].members.len() >= w[1].members.len()));
        let min_picked = picked.last().unwrap().members.len();
        assert!(sel.held_out(StructKind::D).iter().all(|c| c.members.len() <= min_picked));
        assert!(sel.shortfalls.is_empty());
    }

    #[test]
    fn quota_zero_and_exact() {
        let clusters: Vec<Cluster> = (0..5).map(|i| sized(&format!("d-{i}"), 2)).collect();
        let none = select_clusters(&clusters, &Quotas::from([(StructKind::D, 0)]));
        assert!(none.selected(StructKind::D).is_empty());
        let all = select_clusters(&clusters, &Quotas::from([(StructKind::D, 5)]));
        let ids: Vec<_> = all.selected(StructKind::D).iter().map(|c| c.id.0.clone()).collect();
        assert_eq!(ids, vec!["d-0", "d-1", "d-2", "d-3", "d-4"]);
    }

    #[test]
    fn shortfall_is_flagged() {
        let clusters: Vec<Cluster> = (0..3).map(|i| sized(&format!("d-{i}"), 2)).collect();
        let sel = select_clusters(&clusters, &Quotas::from([(StructKind::D, 5), (StructKind::Th, 2)]));
        assert_eq!(sel.selected(StructKind::D).len(), 3);
        assert_eq!(sel.shortfalls.len(), 2);
    }
}
