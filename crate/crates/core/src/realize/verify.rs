//! Checking that a post contains every requested span.

use serde::{Deserialize, Serialize};

use crate::grammar::SlotLabel;
use crate::lexicon::ClusterIndex;
use crate::tree::{Requested, SpanPath};

use super::tags::TaggedSpan;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Verbatim { start: usize, end: usize },
    ClusterEquivalent { matched: String, start: usize, end: usize },
    Missing,
}

impl Verdict {
    pub fn is_missing(&self) -> bool {
        matches!(self, Verdict::Missing)
    }

    pub fn range(&self) -> Option<(usize, usize)> {
        match self {
            Verdict::Verbatim { start, end } | Verdict::ClusterEquivalent { start, end, .. } => Some((*start, *end)),
            Verdict::Missing => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanVerdict {
    pub path: SpanPath,
    pub label: SlotLabel,
    pub requested: String,
    pub verdict: Verdict,
}

/// Case-folded, whitespace-collapsed chars with the original char index each
/// one came from.
fn folded(text: &str) -> Vec<(char, usize)> {
    let mut out = Vec::new();
    let mut in_space = false;
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if !in_space && !out.is_empty() {
                out.push((' ', i));
            }
            in_space = true;
            continue;
        }
        in_space = false;
        for l in c.to_lowercase() {
            out.push((l, i));
        }
    }
    if out.last().is_some_and(|(c, _)| *c == ' ') {
        out.pop();
    }
    out
}

/// First occurrence of `needle` in `haystack` after case folding and
/// whitespace normalisation that does not start or end inside a word. Returns
/// char offsets into `haystack`.
pub fn find_normalized(haystack: &str, needle: &str) -> Option<(usize, usize)> {
    let hay = folded(haystack);
    let pat: Vec<char> = folded(needle).into_iter().map(|(c, _)| c).collect();
    if pat.is_empty() || pat.len() > hay.len() {
        return None;
    }
    let orig: Vec<char> = haystack.chars().collect();
    let wordy = |c: char| c.is_alphanumeric() || c == '_';
    for s in 0..=hay.len() - pat.len() {
        if hay[s..s + pat.len()].iter().map(|(c, _)| *c).ne(pat.iter().copied()) {
            continue;
        }
        let start = hay[s].1;
        let end = hay[s + pat.len() - 1].1 + 1;
        let left_ok = !wordy(pat[0]) || start == 0 || !wordy(orig[start - 1]);
        let right_ok = !wordy(pat[pat.len() - 1]) || end == orig.len() || !wordy(orig[end]);
        if left_ok && right_ok {
            return Some((start, end));
        }
    }
    None
}

/// Verdict for every requested span. A verbatim match wins; otherwise a
/// tagged candidate in the same cluster as the request counts, preferring the
/// candidate tagged for that request.
pub fn verify_spans(
    post: &str,
    requested: &[Requested],
    candidates: &[(usize, TaggedSpan)],
    index: Option<&ClusterIndex>,
) -> Vec<SpanVerdict> {
    requested
        .iter()
        .enumerate()
        .map(|(ri, r)| {
            let verdict = match find_normalized(post, &r.text) {
                Some((start, end)) => Verdict::Verbatim { start, end },
                None => {
                    let mut ordered: Vec<&TaggedSpan> =
                        candidates.iter().filter(|(i, _)| *i == ri).map(|(_, c)| c).collect();
                    ordered.extend(candidates.iter().filter(|(i, _)| *i != ri).map(|(_, c)| c));
                    ordered
                        .into_iter()
                        .find(|c| index.is_some_and(|ix| ix.equivalent(&c.text, &r.text, r.label)))
                        .map_or(Verdict::Missing, |c| Verdict::ClusterEquivalent {
                            matched: c.text.clone(),
                            start: c.start,
                            end: c.end,
                        })
                }
            };
            SpanVerdict { path: r.path, label: r.label, requested: r.text.clone(), verdict }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalised_search() {
        assert_eq!(find_normalized("Artists are  Parasites!", "are parasites"), Some((8, 22)));
        assert_eq!(find_normalized("pirates", "rat"), None);
        assert_eq!(find_normalized("a rat, a pirate", "rat"), Some((2, 5)));
        assert_eq!(find_normalized("x", ""), None);
        assert_eq!(find_normalized("İstanbul is far", "is far"), Some((9, 15)));
    }
}
