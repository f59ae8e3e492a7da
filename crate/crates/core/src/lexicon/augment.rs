//! Growing sparse slots by asking a generation backend to extend a list.

use std::collections::BTreeSet;

use log::warn;

use super::embed::normalize_text;
use crate::client::{ChatMessage, GenerationClient, SamplingParams};
use crate::grammar::{SlotLabel, Span};

/// Slots with fewer spans than this are augmented.
pub const DEFAULT_SPARSE_FLOOR: usize = 50;

fn describe(label: SlotLabel) -> &'static str {
    match label {
        SlotLabel::Target => "targets of opinions",
        SlotLabel::ProtectedCharacteristic => "protected characteristics",
        SlotLabel::DehumanisingComparison => "dehumanising comparisons",
        SlotLabel::ThreateningSpeech => "threatening expressions",
        SlotLabel::NegativeOpinion => "negative opinions",
        SlotLabel::HateEntity => "hate entities",
        SlotLabel::SupportHateCrimes => "expressions of support for hate crimes",
        SlotLabel::NegativeStance => "negative stance expressions",
        SlotLabel::NonHatefulContext => "neutral sentences",
    }
}

pub fn augment_prompt(existing: &[Span], label: SlotLabel) -> String {
    let mut prompt = format!("Here is a list of {}:\n", describe(label));
    for s in existing {
        prompt.push_str("- ");
        prompt.push_str(&s.text);
        prompt.push('\n');
    }
    prompt.push_str("Complete the list with new items of the same kind, one per line.");
    prompt
}

/// Strip list markers (`-`, `*`, `•`, `1.`, `2)`) and surrounding quotes.
fn clean_line(line: &str) -> String {
    let mut s = line.trim();
    s = s.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = s.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &s[digits..];
        if let Some(r) = rest.strip_prefix(['.', ')', ':']) {
            s = r.trim_start();
        }
    }
    s.trim_matches(['"', '\u{201c}', '\u{201d}']).trim().to_string()
}

/// Ask `client` to extend `existing` and return the novel items as spans.
/// A failed request yields no spans.
pub fn augment_sparse_slot(
    existing: &[Span],
    label: SlotLabel,
    client: &dyn GenerationClient,
    params: &SamplingParams,
) -> Vec<Span> {
    let prompt = augment_prompt(existing, label);
    let reply = match client.complete(&[ChatMessage::user(prompt)], params) {
        Ok(r) => r,
        Err(e) => {
            warn!("augmentation of {label} failed: {e}");
            return Vec::new();
        }
    };
    let mut seen: BTreeSet<String> = existing.iter().map(|s| normalize_text(&s.text)).collect();
    let mut out = Vec::new();
    for line in reply.lines() {
        let text = clean_line(line);
        if text.is_empty() || !seen.insert(normalize_text(&text)) {
            continue;
        }
        if let Ok(span) = Span::new(text, label, format!("augment:{}:{}", label.name(), out.len())) {
            out.push(span);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::{ScriptedClient, UnavailableClient};

    fn existing() -> Vec<Span> {
        ["are rats", "are parasites"]
            .iter()
            .map(|t| Span::new(*t, SlotLabel::DehumanisingComparison, "x").unwrap())
            .collect()
    }

    #[test]
    fn three_novel_lines() {
        let c = ScriptedClient::new(["- are vermin\n2. are cockroaches\n* are leeches"]);
        let got = augment_sparse_slot(&existing(), SlotLabel::DehumanisingComparison, &c, &SamplingParams::default());
        let texts: Vec<_> = got.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["are vermin", "are cockroaches", "are leeches"]);
        let prompt = &c.conversations()[0][0].content;
        assert!(prompt.contains("- are rats"));
    }

    #[test]
    fn echoes_are_dropped() {
        let c = ScriptedClient::new(["- Are Rats\n- are parasites\n- are parasites"]);
        assert!(augment_sparse_slot(&existing(), SlotLabel::DehumanisingComparison, &c, &SamplingParams::default()).is_empty());
    }

    #[test]
    fn empty_output_and_failure() {
        let c = ScriptedClient::new([""]);
        assert!(augment_sparse_slot(&existing(), SlotLabel::DehumanisingComparison, &c, &SamplingParams::default()).is_empty());
        assert!(augment_sparse_slot(&existing(), SlotLabel::DehumanisingComparison, &UnavailableClient, &SamplingParams::default()).is_empty());
    }
}
