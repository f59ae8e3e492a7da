//! The hate-speech grammar over slot-labelled spans.
//!
//! Terminals are [`Span`]s. The start symbol expands into exactly one
//! non-hateful context followed by a run of targets/entities (`W`) and a run
//! of expressions (`P`):
//!
//! ```text
//! S -> C P | C W | C W P
//! W -> ε | T W | E W
//! P -> ε | D P | Th P | N P | Sup P | Ns P
//! ```
//!
//! The support-for-hate-crimes slot is called `Sup` so that it never clashes
//! with the start symbol.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slot labels of the policy ontology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SlotLabel {
    Target,
    ProtectedCharacteristic,
    DehumanisingComparison,
    ThreateningSpeech,
    NegativeOpinion,
    HateEntity,
    SupportHateCrimes,
    NegativeStance,
    NonHatefulContext,
}

impl SlotLabel {
    pub const ALL: [SlotLabel; 9] = [
        SlotLabel::Target,
        SlotLabel::ProtectedCharacteristic,
        SlotLabel::DehumanisingComparison,
        SlotLabel::ThreateningSpeech,
        SlotLabel::NegativeOpinion,
        SlotLabel::HateEntity,
        SlotLabel::SupportHateCrimes,
        SlotLabel::NegativeStance,
        SlotLabel::NonHatefulContext,
    ];

    /// Expression labels that hang below a target or entity.
    pub const EXPRESSIONS: [SlotLabel; 5] = [
        SlotLabel::DehumanisingComparison,
        SlotLabel::ThreateningSpeech,
        SlotLabel::NegativeOpinion,
        SlotLabel::SupportHateCrimes,
        SlotLabel::NegativeStance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SlotLabel::Target => "Target",
            SlotLabel::ProtectedCharacteristic => "ProtectedCharacteristic",
            SlotLabel::DehumanisingComparison => "DehumanisingComparison",
            SlotLabel::ThreateningSpeech => "ThreateningSpeech",
            SlotLabel::NegativeOpinion => "NegativeOpinion",
            SlotLabel::HateEntity => "HateEntity",
            SlotLabel::SupportHateCrimes => "SupportHateCrimes",
            SlotLabel::NegativeStance => "NegativeStance",
            SlotLabel::NonHatefulContext => "NonHatefulContext",
        }
    }

    /// Bracketed-tree tag, e.g. `SL:Target`.
    pub fn tag(self) -> String {
        format!("SL:{}", self.name())
    }

    /// Grammar symbol the label expands from.
    pub fn symbol(self) -> NonTerminal {
        match self {
            SlotLabel::Target | SlotLabel::ProtectedCharacteristic => NonTerminal::T,
            SlotLabel::DehumanisingComparison => NonTerminal::D,
            SlotLabel::ThreateningSpeech => NonTerminal::Th,
            SlotLabel::NegativeOpinion => NonTerminal::N,
            SlotLabel::HateEntity => NonTerminal::E,
            SlotLabel::SupportHateCrimes => NonTerminal::Sup,
            SlotLabel::NegativeStance => NonTerminal::Ns,
            SlotLabel::NonHatefulContext => NonTerminal::C,
        }
    }

    pub fn is_expression(self) -> bool {
        Self::EXPRESSIONS.contains(&self)
    }
}

impl fmt::Display for SlotLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SlotLabel {
    type Err = Error;

    /// Accepts the canonical names, `SL:` tags, grammar symbols and a few
    /// spellings seen in annotation exports.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .trim_start_matches("SL:")
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let label = match key.as_str() {
            "target" | "t" => SlotLabel::Target,
            "protectedcharacteristic" | "characteristic" | "pc" => {
                SlotLabel::ProtectedCharacteristic
            }
            "dehumanisingcomparison" | "dehumanizingcomparison" | "d" => {
                SlotLabel::DehumanisingComparison
            }
            "threateningspeech" | "threat" | "th" => SlotLabel::ThreateningSpeech,
            "negativeopinion" | "derogatoryopinion" | "derogation" | "n" => {
                SlotLabel::NegativeOpinion
            }
            "hateentity" | "e" => SlotLabel::HateEntity,
            "supporthatecrimes" | "supportofhatecrimes" | "support" | "sup" | "s" => {
                SlotLabel::SupportHateCrimes
            }
            "negativestance" | "ns" => SlotLabel::NegativeStance,
            "nonhatefulcontext" | "context" | "c" => SlotLabel::NonHatefulContext,
            _ => return Err(Error::Parse(format!("unknown slot label {s:?}"))),
        };
        Ok(label)
    }
}

/// A slot-labelled text fragment: a terminal of the grammar.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub text: String,
    pub label: SlotLabel,
    pub source_id: String,
    /// Protected characteristic of a protected target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characteristic_text: Option<String>,
    /// Annotated target group, used to group protected targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl Span {
    pub fn new(text: impl Into<String>, label: SlotLabel, source_id: impl Into<String>) -> Result<Self> {
        let span = Span {
            text: text.into(),
            label,
            source_id: source_id.into(),
            characteristic_text: None,
            group: None,
        };
        span.validate()?;
        Ok(span)
    }

    pub fn protected_target(
        text: impl Into<String>,
        characteristic: impl Into<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let mut span = Span::new(text, SlotLabel::Target, source_id)?;
        span.characteristic_text = Some(characteristic.into());
        span.validate()?;
        Ok(span)
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::InvalidSpan(format!("{}: empty text", self.source_id)));
        }
        if self.characteristic_text.is_some() && self.label != SlotLabel::Target {
            return Err(Error::InvalidSpan(format!(
                "{}: characteristic on a {} span",
                self.source_id, self.label
            )));
        }
        Ok(())
    }

    pub fn is_protected_target(&self) -> bool {
        self.label == SlotLabel::Target && self.characteristic_text.is_some()
    }

    pub fn kind(&self) -> StructKind {
        StructKind::of(self)
    }
}

/// Slot kinds used for structure accounting. Targets split into protected
/// (`T_p`) and non-protected (`T_np`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StructKind {
    #[serde(rename = "T_p")]
    Tp,
    #[serde(rename = "T_np")]
    Tnp,
    E,
    D,
    Th,
    N,
    Sup,
    Ns,
    C,
}

impl StructKind {
    pub const ALL: [StructKind; 9] = [
        StructKind::Tp,
        StructKind::Tnp,
        StructKind::E,
        StructKind::D,
        StructKind::Th,
        StructKind::N,
        StructKind::Sup,
        StructKind::Ns,
        StructKind::C,
    ];
    /// Kinds that root a subtree.
    pub const TARGETS: [StructKind; 3] = [StructKind::Tp, StructKind::Tnp, StructKind::E];
    /// Expression kinds whose co-occurrence with every target is balanced.
    pub const TRACKED: [StructKind; 4] = [StructKind::D, StructKind::Th, StructKind::N, StructKind::Sup];

    pub fn of(span: &Span) -> StructKind {
        match span.label {
            SlotLabel::Target if span.characteristic_text.is_some() => StructKind::Tp,
            SlotLabel::Target | SlotLabel::ProtectedCharacteristic => StructKind::Tnp,
            SlotLabel::HateEntity => StructKind::E,
            SlotLabel::DehumanisingComparison => StructKind::D,
            SlotLabel::ThreateningSpeech => StructKind::Th,
            SlotLabel::NegativeOpinion => StructKind::N,
            SlotLabel::SupportHateCrimes => StructKind::Sup,
            SlotLabel::NegativeStance => StructKind::Ns,
            SlotLabel::NonHatefulContext => StructKind::C,
        }
    }

    pub fn label(self) -> SlotLabel {
        match self {
            StructKind::Tp | StructKind::Tnp => SlotLabel::Target,
            StructKind::E => SlotLabel::HateEntity,
            StructKind::D => SlotLabel::DehumanisingComparison,
            StructKind::Th => SlotLabel::ThreateningSpeech,
            StructKind::N => SlotLabel::NegativeOpinion,
            StructKind::Sup => SlotLabel::SupportHateCrimes,
            StructKind::Ns => SlotLabel::NegativeStance,
            StructKind::C => SlotLabel::NonHatefulContext,
        }
    }

    pub fn is_target(self) -> bool {
        Self::TARGETS.contains(&self)
    }

    pub fn is_tracked(self) -> bool {
        Self::TRACKED.contains(&self)
    }

    pub fn is_expression(self) -> bool {
        self.label().is_expression()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            StructKind::Tp => "T_p",
            StructKind::Tnp => "T_np",
            StructKind::E => "E",
            StructKind::D => "D",
            StructKind::Th => "Th",
            StructKind::N => "N",
            StructKind::Sup => "Sup",
            StructKind::Ns => "Ns",
            StructKind::C => "C",
        }
    }

    /// Position in a main-tree signature: roots first.
    fn main_rank(self) -> u8 {
        match self {
            StructKind::Tp => 0,
            StructKind::Tnp => 1,
            StructKind::E => 2,
            StructKind::D => 3,
            StructKind::N => 4,
            StructKind::Ns => 5,
            StructKind::Sup => 6,
            StructKind::Th => 7,
            StructKind::C => 8,
        }
    }

    /// Position in an injected-slot signature.
    fn injected_rank(self) -> u8 {
        match self {
            StructKind::Tp => 0,
            StructKind::D => 1,
            StructKind::E => 2,
            StructKind::N => 3,
            StructKind::Ns => 4,
            StructKind::Tnp => 5,
            StructKind::Sup => 6,
            StructKind::Th => 7,
            StructKind::C => 8,
        }
    }
}

impl fmt::Display for StructKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for StructKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().replace(['{', '}', '$'], "").as_str() {
            "T_p" | "Tp" => StructKind::Tp,
            "T_np" | "Tnp" => StructKind::Tnp,
            "E" => StructKind::E,
            "D" => StructKind::D,
            "Th" | "T_h" => StructKind::Th,
            "N" => StructKind::N,
            "Sup" | "S" => StructKind::Sup,
            "Ns" | "N_s" => StructKind::Ns,
            "C" => StructKind::C,
            other => return Err(Error::Parse(format!("unknown structure symbol {other:?}"))),
        };
        Ok(kind)
    }
}

/// Sort kinds into main-tree signature order.
pub fn sort_main(kinds: &mut [StructKind]) {
    kinds.sort_by_key(|k| k.main_rank());
}

/// Sort kinds into injected-signature order.
pub fn sort_injected(kinds: &mut [StructKind]) {
    kinds.sort_by_key(|k| k.injected_rank());
}

/// Render a main/injected pair as a canonical structure string.
///
/// The context is implicit in every instance; it is only written out when the
/// main tree carries no expression.
pub fn render_signature(main: &[StructKind], injected: &[StructKind]) -> String {
    let has_expression = main.iter().any(|k| k.is_expression());
    let mut main: Vec<StructKind> = main
        .iter()
        .copied()
        .filter(|k| *k != StructKind::C || !has_expression)
        .collect();
    if !has_expression && !main.contains(&StructKind::C) {
        main.push(StructKind::C);
    }
    sort_main(&mut main);
    let mut injected = injected.to_vec();
    sort_injected(&mut injected);
    let join = |ks: &[StructKind]| ks.iter().map(|k| k.symbol()).collect::<Vec<_>>().join(" ");
    let inj = if injected.is_empty() { "—".to_string() } else { join(&injected) };
    format!("{} | {}", join(&main), inj)
}

/// Parse a space-separated list of structure symbols.
pub fn parse_kinds(s: &str) -> Result<Vec<StructKind>> {
    let s = s.trim();
    if s.is_empty() || s == "—" || s == "-" {
        return Ok(Vec::new());
    }
    s.split_whitespace().map(str::parse).collect()
}

/// Flat multiset of spans for one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotBag {
    counts: BTreeMap<SlotLabel, usize>,
    spans: Vec<Span>,
}

impl SlotBag {
    pub fn new(spans: Vec<Span>) -> Self {
        let mut counts = BTreeMap::new();
        for s in &spans {
            *counts.entry(s.label).or_insert(0) += 1;
        }
        SlotBag { counts, spans }
    }

    pub fn count(&self, label: SlotLabel) -> usize {
        self.counts.get(&label).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<SlotLabel, usize> {
        &self.counts
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn is_consistent(&self) -> bool {
        SlotBag::new(self.spans.clone()).counts == self.counts
    }
}

/// Grammar symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NonTerminal {
    S,
    W,
    P,
    C,
    T,
    E,
    D,
    Th,
    N,
    Sup,
    Ns,
}

impl NonTerminal {
    /// Right-hand sides of the structural productions.
    pub fn productions(self) -> &'static [&'static [NonTerminal]] {
        use NonTerminal::*;
        match self {
            S => &[&[C, P], &[C, W], &[C, W, P]],
            W => &[&[], &[T, W], &[E, W]],
            P => &[&[], &[D, P], &[Th, P], &[N, P], &[Sup, P], &[Ns, P]],
            _ => &[],
        }
    }

    pub fn is_preterminal(self) -> bool {
        self.productions().is_empty()
    }
}

/// One rule application. For pre-terminals (`N_t -> t`) the production index
/// is the position of the emitted span in [`Derivation::leaves`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleApp {
    pub lhs: NonTerminal,
    pub production: usize,
}

/// Leftmost derivation of a slot bag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub rules: Vec<RuleApp>,
    pub leaves: Vec<Span>,
}

/// Why a bag is not in the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    MissingContext,
    MultipleContexts,
}

impl Rejection {
    pub fn reason(self) -> &'static str {
        match self {
            Rejection::MissingContext => "missing-context",
            Rejection::MultipleContexts => "multiple-contexts",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.reason())
    }
}

const P_ORDER: [(SlotLabel, usize); 5] = [
    (SlotLabel::DehumanisingComparison, 1),
    (SlotLabel::ThreateningSpeech, 2),
    (SlotLabel::NegativeOpinion, 3),
    (SlotLabel::SupportHateCrimes, 4),
    (SlotLabel::NegativeStance, 5),
];

/// Derive a bag from the start symbol. Targets are expanded before entities
/// and expressions in the order D, Th, N, Sup, Ns; ties keep bag order.
pub fn derive(bag: &SlotBag) -> std::result::Result<Derivation, Rejection> {
    let contexts: Vec<&Span> = bag.spans().iter().filter(|s| s.label == SlotLabel::NonHatefulContext).collect();
    match contexts.len() {
        0 => return Err(Rejection::MissingContext),
        1 => {}
        _ => return Err(Rejection::MultipleContexts),
    }
    let of = |pred: &dyn Fn(SlotLabel) -> bool| -> Vec<&Span> {
        bag.spans().iter().filter(|s| pred(s.label)).collect()
    };
    let targets = of(&|l| l.symbol() == NonTerminal::T);
    let entities = of(&|l| l == SlotLabel::HateEntity);
    let mut expressions: Vec<(usize, &Span)> = Vec::new();
    for (label, prod) in P_ORDER {
        expressions.extend(of(&|l| l == label).into_iter().map(|s| (prod, s)));
    }

    let mut rules = Vec::new();
    let mut leaves: Vec<Span> = Vec::new();
    let leaf = |rules: &mut Vec<RuleApp>, leaves: &mut Vec<Span>, lhs: NonTerminal, span: &Span| {
        rules.push(RuleApp { lhs, production: leaves.len() });
        leaves.push(span.clone());
    };

    let has_w = !targets.is_empty() || !entities.is_empty();
    let has_p = !expressions.is_empty();
    let start = match (has_w, has_p) {
        (true, true) => 2,
        (true, false) => 1,
        (false, _) => 0,
    };
    rules.push(RuleApp { lhs: NonTerminal::S, production: start });
    leaf(&mut rules, &mut leaves, NonTerminal::C, contexts[0]);
    if has_w {
        for t in &targets {
            rules.push(RuleApp { lhs: NonTerminal::W, production: 1 });
            leaf(&mut rules, &mut leaves, NonTerminal::T, t);
        }
        for e in &entities {
            rules.push(RuleApp { lhs: NonTerminal::W, production: 2 });
            leaf(&mut rules, &mut leaves, NonTerminal::E, e);
        }
        rules.push(RuleApp { lhs: NonTerminal::W, production: 0 });
    }
    if start != 1 {
        for (prod, s) in &expressions {
            rules.push(RuleApp { lhs: NonTerminal::P, production: *prod });
            leaf(&mut rules, &mut leaves, s.label.symbol(), s);
        }
        rules.push(RuleApp { lhs: NonTerminal::P, production: 0 });
    }
    Ok(Derivation { rules, leaves })
}

impl Derivation {
    /// Replay the rules as a leftmost derivation from `S` and return the
    /// emitted leaves in order.
    pub fn replay(&self) -> Result<Vec<Span>> {
        let mut stack = vec![NonTerminal::S];
        let mut out = Vec::new();
        let mut rules = self.rules.iter();
        while let Some(top) = stack.pop() {
            let app = rules
                .next()
                .ok_or_else(|| Error::Derivation(format!("ran out of rules expanding {top:?}")))?;
            if app.lhs != top {
                return Err(Error::Derivation(format!("expected {top:?}, rule rewrites {:?}", app.lhs)));
            }
            if top.is_preterminal() {
                let span = self
                    .leaves
                    .get(app.production)
                    .ok_or_else(|| Error::Derivation(format!("leaf {} out of range", app.production)))?;
                if span.label.symbol() != top {
                    return Err(Error::Derivation(format!("{top:?} cannot emit a {} span", span.label)));
                }
                out.push(span.clone());
            } else {
                let rhs = top
                    .productions()
                    .get(app.production)
                    .ok_or_else(|| Error::Derivation(format!("{top:?} has no production {}", app.production)))?;
                stack.extend(rhs.iter().rev());
            }
        }
        if rules.next().is_some() {
            return Err(Error::Derivation("rules left over after the derivation closed".into()));
        }
        Ok(out)
    }
}

/// Flat instance with main/injected designation, ready for a signature.
#[derive(Debug, Clone, Copy)]
pub struct DesignatedBag<'a> {
    pub main: &'a [Span],
    pub injected: &'a [Span],
}

/// Canonical structure string, e.g. `T_p D | N N T_np Sup Sup Th`.
pub fn structure_signature(bag: DesignatedBag<'_>) -> String {
    let main: Vec<StructKind> = bag.main.iter().map(StructKind::of).collect();
    let injected: Vec<StructKind> = bag.injected.iter().map(StructKind::of).collect();
    render_signature(&main, &injected)
}
