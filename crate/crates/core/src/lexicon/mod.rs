//! Span lexicon: ingestion, clustering, selection and cluster lookups.

pub mod augment;
pub mod cluster;
pub mod embed;
pub mod plead;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::{SlotLabel, Span, StructKind};
use embed::{cosine_distance, normalize_text, EmbeddingProvider};

pub use augment::augment_sparse_slot;
pub use cluster::{
    agglomerative_cluster, average_linkage, cluster_lexicon, default_quotas, group_protected_targets, select_clusters, Quotas,
    Selection, Shortfall,
};
pub use embed::TrigramHasher;
pub use plead::{ingest_plead, ingest_plead_str, Ingested};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub String);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClusterId {
    fn from(s: &str) -> Self {
        ClusterId(s.to_string())
    }
}

/// An equivalence class of same-label spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: ClusterId,
    pub label: SlotLabel,
    pub members: Vec<Span>,
    pub representative: Span,
}

impl Cluster {
    /// Build a cluster; the representative is the longest member, ties broken
    /// lexicographically. Panics on an empty member list.
    pub fn new(id: ClusterId, label: SlotLabel, members: Vec<Span>) -> Self {
        let representative = members
            .iter()
            .min_by(|a, b| {
                b.text.chars().count().cmp(&a.text.chars().count()).then_with(|| a.text.cmp(&b.text))
            })
            .expect("cluster has at least one member")
            .clone();
        Cluster { id, label, members, representative }
    }

    pub fn kind(&self) -> StructKind {
        self.representative.kind()
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Config(format!("cluster {} is empty", self.id)));
        }
        if let Some(s) = self.members.iter().find(|s| s.label != self.label) {
            return Err(Error::Config(format!("cluster {} holds a {} span", self.id, s.label)));
        }
        Ok(())
    }
}

/// Read a cluster store (one cluster per line).
pub fn read_clusters(path: &Path) -> Result<Vec<Cluster>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let c: Cluster = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?;
        c.validate()?;
        out.push(c);
    }
    Ok(out)
}

pub fn write_clusters(path: &Path, clusters: &[Cluster]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for c in clusters {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Maps texts onto clusters for equivalence queries.
pub struct ClusterIndex {
    clusters: Vec<Cluster>,
    members: BTreeMap<(SlotLabel, String), usize>,
    reps: Vec<Vec<f64>>,
    provider: Arc<dyn EmbeddingProvider>,
    threshold: f64,
}

impl ClusterIndex {
    pub fn new(clusters: Vec<Cluster>, provider: Arc<dyn EmbeddingProvider>, threshold: f64) -> Result<Self> {
        let mut members = BTreeMap::new();
        for (i, c) in clusters.iter().enumerate() {
            for m in &c.members {
                members.entry((c.label, normalize_text(&m.text))).or_insert(i);
            }
        }
        let rep_texts: Vec<String> = clusters.iter().map(|c| normalize_text(&c.representative.text)).collect();
        let refs: Vec<&str> = rep_texts.iter().map(String::as_str).collect();
        let reps = provider.embed(&refs)?;
        Ok(ClusterIndex { clusters, members, reps, provider, threshold })
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn get(&self, id: &ClusterId) -> Option<&Cluster> {
        self.clusters.iter().find(|c| &c.id == id)
    }

    /// Cluster containing `text` as a member, else the nearest representative
    /// of the same label within the threshold.
    pub fn locate(&self, text: &str, label: SlotLabel) -> Option<&Cluster> {
        let norm = normalize_text(text);
        if let Some(&i) = self.members.get(&(label, norm.clone())) {
            return Some(&self.clusters[i]);
        }
        let v = self.provider.embed(&[norm.as_str()]).ok()?.pop()?;
        let mut best: Option<(f64, usize)> = None;
        for (i, c) in self.clusters.iter().enumerate() {
            if c.label != label {
                continue;
            }
            let d = cosine_distance(&v, &self.reps[i]);
            if d <= self.threshold && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| &self.clusters[i])
    }

    /// Whether two texts of one label fall into the same cluster.
    pub fn equivalent(&self, a: &str, b: &str, label: SlotLabel) -> bool {
        if normalize_text(a) == normalize_text(b) {
            return true;
        }
        match (self.locate(a, label), self.locate(b, label)) {
            (Some(x), Some(y)) => x.id == y.id,
            _ => false,
        }
    }
}

pub fn cluster_equivalent(a: &str, b: &str, label: SlotLabel, index: &ClusterIndex) -> bool {
    index.equivalent(a, b, label)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn representative_is_longest_then_lexicographic() {
        let l = SlotLabel::NegativeOpinion;
        let m = vec![
            Span::new("bad", l, "a").unwrap(),
            Span::new("awful", l, "b").unwrap(),
            Span::new("nasty", l, "c").unwrap(),
        ];
        assert_eq!(Cluster::new("n-0".into(), l, m).representative.text, "awful");
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let l = SlotLabel::ThreateningSpeech;
        let c = vec![Cluster::new("th-000".into(), l, vec![Span::new("x", l, "s").unwrap()])];
        write_clusters(&path, &c).unwrap();
        assert_eq!(read_clusters(&path).unwrap(), c);
    }

    #[test]
    fn identical_texts_are_equivalent_without_clusters() {
        let idx = ClusterIndex::new(vec![], Arc::new(TrigramHasher::default()), 0.5).unwrap();
        assert!(idx.equivalent("Same", "same", SlotLabel::NegativeOpinion));
        assert!(!idx.equivalent("a", "b", SlotLabel::NegativeOpinion));
    }
}
