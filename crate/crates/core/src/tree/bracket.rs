//! Bracketed tree text: `[IN:Intent [SL:Label span words [SL:Child ...]]]`.
//!
//! Literal `[`, `]` and `\` inside span text are written as `\[`, `\]` and
//! `\\`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BNode {
    /// `[IN:name ...]`; `name` excludes the prefix.
    Intent { name: String, children: Vec<BNode> },
    /// `[SL:label text ...]`; `label` excludes the prefix.
    Slot { label: String, text: String, children: Vec<BNode> },
}

impl BNode {
    /// Build a slot node; `label` may carry the `SL:` prefix.
    pub fn slot(label: impl AsRef<str>, text: &str, children: Vec<BNode>) -> BNode {
        let label = label.as_ref();
        BNode::Slot {
            label: label.strip_prefix("SL:").unwrap_or(label).to_string(),
            text: text.to_string(),
            children,
        }
    }

    pub fn children(&self) -> &[BNode] {
        match self {
            BNode::Intent { children, .. } | BNode::Slot { children, .. } => children,
        }
    }

    /// Visit this node and all descendants in pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a BNode)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Rebuild the tree, letting `f` reorder the children of every node.
    pub fn map_children(&self, f: &mut dyn FnMut(Vec<BNode>) -> Vec<BNode>) -> BNode {
        match self {
            BNode::Intent { name, children } => {
                let kids = children.iter().map(|c| c.map_children(f)).collect();
                BNode::Intent { name: name.clone(), children: f(kids) }
            }
            BNode::Slot { label, text, children } => {
                let kids = children.iter().map(|c| c.map_children(f)).collect();
                BNode::Slot { label: label.clone(), text: text.clone(), children: f(kids) }
            }
        }
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if matches!(c, '[' | ']' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

impl fmt::Display for BNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BNode::Intent { name, children } => {
                write!(f, "[IN:{name}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str("]")
            }
            BNode::Slot { label, text, children } => {
                write!(f, "[SL:{label}")?;
                if !text.is_empty() {
                    write!(f, " {}", escape(text))?;
                }
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str("]")
            }
        }
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at offset {} in {:?}", self.pos, self.src))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn word(&mut self) -> Result<String> {
        let mut w = String::new();
        while let Some(&c) = self.chars.get(self.pos) {
            match c {
                '\\' => {
                    let next = *self.chars.get(self.pos + 1).ok_or_else(|| self.err("dangling escape"))?;
                    w.push(next);
                    self.pos += 2;
                }
                '[' | ']' => break,
                c if c.is_whitespace() => break,
                c => {
                    w.push(c);
                    self.pos += 1;
                }
            }
        }
        Ok(w)
    }

    fn node(&mut self) -> Result<BNode> {
        if self.chars.get(self.pos) != Some(&'[') {
            return Err(self.err("expected '['"));
        }
        self.pos += 1;
        let head = self.word()?;
        let (is_intent, name) = if let Some(n) = head.strip_prefix("IN:") {
            (true, n.to_string())
        } else if let Some(n) = head.strip_prefix("SL:") {
            (false, n.to_string())
        } else {
            return Err(self.err(&format!("node label {head:?} lacks IN: or SL:")));
        };
        if name.is_empty() {
            return Err(self.err("empty node label"));
        }
        let mut words: Vec<String> = Vec::new();
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            match self.chars.get(self.pos) {
                None => return Err(self.err("unclosed '['")),
                Some(']') => {
                    self.pos += 1;
                    break;
                }
                Some('[') => children.push(self.node()?),
                Some(_) => words.push(self.word()?),
            }
        }
        if is_intent {
            if !words.is_empty() {
                return Err(self.err(&format!("text {:?} directly under IN:{name}", words.join(" "))));
            }
            Ok(BNode::Intent { name, children })
        } else {
            Ok(BNode::Slot { label: name, text: words.join(" "), children })
        }
    }
}

/// Parse every top-level tree in `text`.
pub fn parse_forest(text: &str) -> Result<Vec<BNode>> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0, src: text };
    let mut out = Vec::new();
    loop {
        p.skip_ws();
        if p.pos >= p.chars.len() {
            break;
        }
        out.push(p.node()?);
    }
    Ok(out)
}

/// Parse exactly one tree.
pub fn parse_bracket(text: &str) -> Result<BNode> {
    let mut trees = parse_forest(text)?;
    match trees.len() {
        1 => Ok(trees.remove(0)),
        n => Err(Error::Parse(format!("expected one tree, found {n}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const JOOS: &str = "[IN:Hateful [IN:Dehumanisation [SL:Target joos [SL:ProtectedCharacteristic joos] [SL:DehumanisingComparison rat creatures]]]]";

    #[test]
    fn round_trip_nested_example() {
        let t = parse_bracket(JOOS).unwrap();
        assert_eq!(t.to_string(), JOOS);
    }

    #[test]
    fn flat_example_parses() {
        let t = parse_bracket("[IN:NotHateful [SL:Target Artists] [SL:DehumanisingComparison are parasites]]").unwrap();
        match t {
            BNode::Intent { name, children } => {
                assert_eq!(name, "NotHateful");
                assert_eq!(children.len(), 2);
                assert_eq!(children[1], BNode::slot("DehumanisingComparison", "are parasites", vec![]));
            }
            _ => panic!("expected intent"),
        }
    }

    #[test]
    fn escapes_round_trip() {
        let t = BNode::Intent {
            name: "NotHateful".into(),
            children: vec![BNode::slot("SL:Target", r"a [b] c\d", vec![])],
        };
        let s = t.to_string();
        assert_eq!(s, r"[IN:NotHateful [SL:Target a \[b\] c\\d]]");
        assert_eq!(parse_bracket(&s).unwrap(), t);
    }

    #[test]
    fn malformed_inputs() {
        for bad in ["", "[IN:X", "[Target x]", "[IN:X words]", "[SL:T a] [SL:T b]", "[SL:T a\\"] {
            assert!(parse_bracket(bad).is_err(), "{bad:?}");
        }
        assert_eq!(parse_forest("[SL:T a] [SL:T b]").unwrap().len(), 2);
    }
}
