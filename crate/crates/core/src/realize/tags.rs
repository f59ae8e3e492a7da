//! Parsing `<span_i> ... </span_i>` markup out of model responses.

use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};

static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<(/?)span_(\d+)>").expect("valid tag pattern"));

/// A tagged region; offsets are char positions in the cleaned text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSpan {
    pub index: usize,
    pub text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tagged {
    pub clean: String,
    pub spans: Vec<TaggedSpan>,
}

/// Strip span tags and return the tagged regions, trimmed of surrounding
/// whitespace. Nested, unclosed or unmatched tags are errors.
pub fn parse_tags(text: &str) -> Result<Tagged> {
    let mut clean = String::with_capacity(text.len());
    let mut clean_chars = 0usize;
    let mut open: Option<(usize, usize)> = None;
    let mut spans = Vec::new();
    let mut last = 0usize;
    for cap in TAG.captures_iter(text) {
        let m = cap.get(0).expect("whole match");
        let piece = &text[last..m.start()];
        clean.push_str(piece);
        clean_chars += piece.chars().count();
        last = m.end();
        let index: usize = cap[2].parse().map_err(|_| Error::Parse(format!("tag index {:?} too large", &cap[2])))?;
        let closing = !cap[1].is_empty();
        match (closing, open) {
            (false, None) => open = Some((index, clean_chars)),
            (false, Some((outer, _))) => {
                return Err(Error::Parse(format!("<span_{index}> nested inside <span_{outer}>")));
            }
            (true, Some((i, start))) if i == index => {
                let raw: Vec<char> = clean.chars().skip(start).collect();
                let lead = raw.iter().take_while(|c| c.is_whitespace()).count();
                let trail = raw.iter().rev().take_while(|c| c.is_whitespace()).count();
                let body: String = raw[lead..raw.len().saturating_sub(trail).max(lead)].iter().collect();
                spans.push(TaggedSpan {
                    index,
                    start: start + lead,
                    end: start + lead + body.chars().count(),
                    text: body,
                });
                open = None;
            }
            (true, Some((i, _))) => return Err(Error::Parse(format!("</span_{index}> closes <span_{i}>"))),
            (true, None) => return Err(Error::Parse(format!("</span_{index}> without opening tag"))),
        }
    }
    if let Some((i, _)) = open {
        return Err(Error::Parse(format!("<span_{i}> is never closed")));
    }
    clean.push_str(&text[last..]);
    Ok(Tagged { clean, spans })
}

/// Wrap each `(start, end)` char range of `text` in `<span_i>` tags, `i` being
/// the position in `ranges`. Ranges must not overlap.
pub fn tag_ranges(text: &str, ranges: &[(usize, usize)]) -> String {
    let mut order: Vec<usize> = (0..ranges.len()).collect();
    order.sort_by_key(|&i| ranges[i]);
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::new();
    let mut pos = 0;
    for i in order {
        let (s, e) = ranges[i];
        out.extend(&chars[pos..s]);
        out.push_str(&format!("<span_{i}>"));
        out.extend(&chars[s..e]);
        out.push_str(&format!("</span_{i}>"));
        pos = e;
    }
    out.extend(&chars[pos..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_tags() {
        let t = parse_tags("I think <span_0> they </span_0> <span_1>are rats</span_1>!").unwrap();
        assert_eq!(t.clean, "I think  they  are rats!");
        assert_eq!(t.spans.len(), 2);
        let s = &t.spans[1];
        assert_eq!(s.index, 1);
        let got: String = t.clean.chars().skip(s.start).take(s.end - s.start).collect();
        assert_eq!(got, "are rats");
        assert_eq!(t.spans[0].text, "they");
    }

    #[test]
    fn malformed_tags_rejected() {
        for bad in ["<span_0>a", "a</span_0>", "<span_0><span_1>a</span_1></span_0>", "<span_0>a</span_1>"] {
            assert!(parse_tags(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn untagged_text_passes_through() {
        let t = parse_tags("plain text, é").unwrap();
        assert_eq!(t.clean, "plain text, é");
        assert!(t.spans.is_empty());
    }

    #[test]
    fn tagging_round_trip_with_multibyte_text() {
        let text = "Ça va: les réfugiés sont des rats, vraiment";
        let ranges = [(29, 33), (8, 21)];
        let tagged = tag_ranges(text, &ranges);
        let parsed = parse_tags(&tagged).unwrap();
        assert_eq!(parsed.clean, text);
        let mut got: Vec<(usize, usize, usize)> = parsed.spans.iter().map(|s| (s.index, s.start, s.end)).collect();
        got.sort();
        assert_eq!(got, vec![(0, 29, 33), (1, 8, 21)]);
    }
}
