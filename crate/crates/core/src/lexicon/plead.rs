//! Reader for PLEAD-style annotated posts.
//!
//! One JSON object per line. Field names are matched permissively:
//!
//! * post text: `text` or `post`
//! * slot list: `slots`, `spans` or `annotations`
//! * per slot: `label`/`slot`/`type`, `start`/`char_start`/`begin`,
//!   `end`/`char_end`, optional `text`, optional `group`/`target_group`
//! * intent: `intent` or `label`
//!
//! Offsets are character offsets into the post. A slot without offsets is
//! located by its text.

use std::path::Path;

use log::warn;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grammar::{SlotLabel, Span};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    /// Every annotated span, in record then slot order.
    pub spans: Vec<Span>,
    /// Residual non-hateful context spans.
    pub contexts: Vec<Span>,
    /// One line per skipped record.
    pub diagnostics: Vec<String>,
    pub records: usize,
}

struct RawSlot {
    label: SlotLabel,
    start: usize,
    end: usize,
    group: Option<String>,
}

fn field<'a>(obj: &'a Value, names: &[&str]) -> Option<&'a Value> {
    names.iter().find_map(|n| obj.get(*n))
}

fn as_index(v: Option<&Value>) -> Option<usize> {
    v.and_then(Value::as_u64).map(|x| x as usize)
}

fn parse_slot(slot: &Value, chars: &[char]) -> std::result::Result<RawSlot, String> {
    let label_str = field(slot, &["label", "slot", "type"])
        .and_then(Value::as_str)
        .ok_or("slot without a label")?;
    let label: SlotLabel = label_str.parse().map_err(|e: Error| e.to_string())?;
    let text = field(slot, &["text", "span"]).and_then(Value::as_str);
    let (start, end) = match (
        as_index(field(slot, &["start", "char_start", "begin"])),
        as_index(field(slot, &["end", "char_end"])),
    ) {
        (Some(s), Some(e)) => (s, e),
        _ => {
            let text = text.ok_or("slot without offsets or text")?;
            let post: String = chars.iter().collect();
            let byte = post.find(text).ok_or_else(|| format!("slot text {text:?} not in post"))?;
            let s = post[..byte].chars().count();
            (s, s + text.chars().count())
        }
    };
    if start >= end || end > chars.len() {
        return Err(format!("slot offsets {start}..{end} out of range"));
    }
    let group = field(slot, &["group", "target_group", "group_key"])
        .and_then(Value::as_str)
        .map(str::to_string);
    Ok(RawSlot { label, start, end, group })
}

fn gap(a: &RawSlot, b: &RawSlot) -> usize {
    if a.end <= b.start {
        b.start - a.end
    } else { a.start.saturating_sub(b.end) }
}

const TRIM: &[char] = &[',', '.', ';', ':', '!', '?', '-', '"', '\'', '(', ')', '–', '—'];

fn residual(chars: &[char], removed: &[&RawSlot]) -> String {
    let kept: String = chars
        .iter()
        .enumerate()
        .map(|(i, c)| if removed.iter().any(|s| s.start <= i && i < s.end) { ' ' } else { *c })
        .collect();
    let collapsed = kept.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_matches(|c: char| c.is_whitespace() || TRIM.contains(&c)).to_string()
}

fn ingest_record(value: &Value, line: usize, out: &mut Ingested) -> std::result::Result<(), String> {
    let post = field(value, &["text", "post"]).and_then(Value::as_str).ok_or("record without post text")?;
    let chars: Vec<char> = post.chars().collect();
    let id = match field(value, &["id", "post_id"]) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => format!("line{line}"),
    };
    let intent = field(value, &["intent", "label"]).and_then(Value::as_str).unwrap_or("");
    let record_group = field(value, &["target_group", "group"]).and_then(Value::as_str);
    let slots: Vec<RawSlot> = match field(value, &["slots", "spans", "annotations"]) {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items.iter().map(|s| parse_slot(s, &chars)).collect::<std::result::Result<_, _>>()?,
        Some(_) => return Err("slot list is not an array".into()),
    };

    let text_of = |s: &RawSlot| chars[s.start..s.end].iter().collect::<String>().trim().to_string();
    let targets: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].label == SlotLabel::Target).collect();
    let mut characteristic: Vec<Option<usize>> = vec![None; slots.len()];
    for (i, s) in slots.iter().enumerate() {
        if s.label != SlotLabel::ProtectedCharacteristic {
            continue;
        }
        let nearest = targets.iter().copied().min_by_key(|&t| (gap(s, &slots[t]), t));
        if let Some(t) = nearest {
            if characteristic[t].is_none() {
                characteristic[t] = Some(i);
            }
        }
    }

    let mut spans = Vec::with_capacity(slots.len());
    for (i, s) in slots.iter().enumerate() {
        let text = text_of(s);
        if text.is_empty() {
            return Err(format!("slot {i} covers only whitespace"));
        }
        let mut span = Span::new(text, s.label, format!("{id}:{i}")).map_err(|e| e.to_string())?;
        if let Some(pc) = characteristic[i] {
            span.characteristic_text = Some(text_of(&slots[pc]));
        }
        if s.label == SlotLabel::Target {
            span.group = s.group.clone().or_else(|| record_group.map(str::to_string));
        }
        spans.push(span);
    }

    let only_targets = !targets.is_empty()
        && slots.iter().all(|s| matches!(s.label, SlotLabel::Target | SlotLabel::ProtectedCharacteristic));
    let not_hateful = intent.to_ascii_lowercase().replace(['_', ' ', '-'], "").trim_start_matches("in:") == "nothateful";
    if only_targets && not_hateful {
        let removed: Vec<&RawSlot> = slots.iter().collect();
        let rest = residual(&chars, &removed);
        if !rest.is_empty() {
            out.contexts.push(Span::new(rest, SlotLabel::NonHatefulContext, format!("{id}:c")).map_err(|e| e.to_string())?);
        }
    }
    out.spans.extend(spans);
    Ok(())
}

/// Parse PLEAD-style JSONL text. Malformed records are skipped and reported in
/// [`Ingested::diagnostics`].
pub fn ingest_plead_str(input: &str) -> Ingested {
    let mut out = Ingested::default();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.records += 1;
        let result = serde_json::from_str::<Value>(line)
            .map_err(|e| e.to_string())
            .and_then(|v| ingest_record(&v, i + 1, &mut out));
        if let Err(msg) = result {
            let diag = format!("line {}: {msg}", i + 1);
            warn!("skipping record: {diag}");
            out.diagnostics.push(diag);
        }
    }
    out
}

pub fn ingest_plead(path: &Path) -> Result<Ingested> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(ingest_plead_str(&text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_context_of_the_mixed_race_post() {
        let line = r#"{"id":"p1","text":"my friend's little girl is mixed race, I love it when she comes along with us","intent":"NotHateful","slots":[{"label":"Target","start":0,"end":23},{"label":"ProtectedCharacteristic","start":24,"end":37}]}"#;
        let got = ingest_plead_str(line);
        assert!(got.diagnostics.is_empty(), "{:?}", got.diagnostics);
        assert_eq!(got.contexts.len(), 1);
        assert_eq!(got.contexts[0].text, "I love it when she comes along with us");
        assert_eq!(got.spans[0].characteristic_text.as_deref(), Some("is mixed race"));
    }

    #[test]
    fn zero_slots_zero_spans() {
        let got = ingest_plead_str(r#"{"text":"hello there","intent":"NotHateful","slots":[]}"#);
        assert!(got.spans.is_empty());
        assert!(got.contexts.is_empty());
        assert!(got.diagnostics.is_empty());
    }

    #[test]
    fn malformed_lines_are_skipped() {
        let input = "not json\n{\"text\":\"x y\",\"slots\":[{\"label\":\"Bogus\",\"start\":0,\"end\":1}]}\n{\"text\":\"ok\",\"slots\":[]}";
        let got = ingest_plead_str(input);
        assert_eq!(got.records, 3);
        assert_eq!(got.diagnostics.len(), 2);
    }

    #[test]
    fn hateful_posts_yield_no_context() {
        let line = r#"{"post":"Artists are parasites","label":"Dehumanisation","spans":[{"slot":"Target","char_start":0,"char_end":7},{"slot":"DehumanisingComparison","char_start":8,"char_end":21}]}"#;
        let got = ingest_plead_str(line);
        assert_eq!(got.spans.len(), 2);
        assert!(got.contexts.is_empty());
    }
}
