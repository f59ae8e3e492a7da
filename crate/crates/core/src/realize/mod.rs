//! Turning instance trees into posts.
//!
//! The remote path drafts a post from a few-shot prompt, asks the model to
//! improve it by repeating the instruction, and then runs up to
//! `max_rounds` tag-repair rounds for spans still missing. The template path
//! is offline and deterministic.

pub mod prompt;
pub mod tags;
pub mod template;
pub mod verify;

use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::client::{ChatMessage, GenerationClient, SamplingParams};
use crate::error::{Error, Result};
use crate::lexicon::ClusterIndex;
use crate::tree::InstanceTree;

pub use prompt::{draft_messages, instruction, refine_messages, repair_prompt, Exemplar, ExemplarStore};
pub use tags::{parse_tags, tag_ranges, Tagged, TaggedSpan};
pub use template::template_realize;
pub use verify::{find_normalized, verify_spans, SpanVerdict, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizedPost {
    pub id: String,
    pub text: String,
    pub verdicts: Vec<SpanVerdict>,
    /// Repair rounds run.
    pub rounds: u32,
    /// Refine or repair calls that failed and were passed over.
    pub skipped: u32,
    pub status: Status,
}

impl RealizedPost {
    pub fn new(id: String, text: String, verdicts: Vec<SpanVerdict>, rounds: u32, skipped: u32) -> Self {
        let status = if verdicts.iter().any(|v| v.verdict.is_missing()) { Status::Incomplete } else { Status::Complete };
        RealizedPost { id, text, verdicts, rounds, skipped, status }
    }

    pub fn is_complete(&self) -> bool {
        self.status == Status::Complete
    }

    pub fn missing(&self) -> impl Iterator<Item = &SpanVerdict> {
        self.verdicts.iter().filter(|v| v.verdict.is_missing())
    }
}

/// Result of a refinement call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refined {
    pub text: String,
    pub skipped: bool,
}

/// Ask the client to improve `draft`; on failure the draft comes back with
/// the skip flag set.
pub fn refine(instruction: &str, draft: &str, client: &dyn GenerationClient, params: &SamplingParams) -> Refined {
    match client.complete(&refine_messages(instruction, draft), params) {
        Ok(text) if !text.trim().is_empty() => Refined { text: text.trim().to_string(), skipped: false },
        Ok(_) => Refined { text: draft.to_string(), skipped: true },
        Err(e) => {
            warn!("refinement skipped: {e}");
            Refined { text: draft.to_string(), skipped: true }
        }
    }
}

/// One tag-repair call. Returns the cleaned post and the tagged regions, each
/// keyed by its position in `missing`.
pub fn repair_missing_spans(
    post: &str,
    missing: &[&str],
    client: &dyn GenerationClient,
    params: &SamplingParams,
) -> Result<Tagged> {
    if missing.is_empty() {
        return Err(Error::Config("repair requested with no missing spans".into()));
    }
    let reply = client.complete(&[ChatMessage::user(repair_prompt(post, missing))], params)?;
    parse_tags(reply.trim())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizeSettings {
    pub max_rounds: u32,
    pub max_in_flight: usize,
    pub retries: u32,
    pub sampling: SamplingParams,
}

impl Default for RealizeSettings {
    fn default() -> Self {
        RealizeSettings { max_rounds: 2, max_in_flight: 4, retries: 2, sampling: SamplingParams::default() }
    }
}

/// Model-backed realizer.
pub struct Realizer {
    pub client: Arc<dyn GenerationClient>,
    pub exemplars: ExemplarStore,
    pub index: Option<Arc<ClusterIndex>>,
    pub settings: RealizeSettings,
}

impl Realizer {
    /// Draft, refine and repair one tree. Fails only if the draft call fails.
    pub fn realize(&self, tree: &InstanceTree) -> Result<RealizedPost> {
        let params = &self.settings.sampling;
        let client = self.client.as_ref();
        let instr = instruction(tree);
        let draft = client.complete(&draft_messages(tree, &self.exemplars), params)?;
        if draft.trim().is_empty() {
            return Err(Error::Client("empty draft".into()));
        }
        let refined = refine(&instr, draft.trim(), client, params);
        let mut skipped = u32::from(refined.skipped);
        let mut text = refined.text;
        let requested = tree.requested();
        let index = self.index.as_deref();
        let mut candidates: Vec<(usize, TaggedSpan)> = Vec::new();
        let mut verdicts = verify_spans(&text, &requested, &candidates, index);
        let mut rounds = 0;
        while rounds < self.settings.max_rounds && verdicts.iter().any(|v| v.verdict.is_missing()) {
            rounds += 1;
            let missing_idx: Vec<usize> =
                verdicts.iter().enumerate().filter(|(_, v)| v.verdict.is_missing()).map(|(i, _)| i).collect();
            let missing: Vec<&str> = missing_idx.iter().map(|&i| requested[i].text.as_str()).collect();
            match repair_missing_spans(&text, &missing, client, params) {
                Ok(tagged) => {
                    text = tagged.clean;
                    candidates = tagged
                        .spans
                        .into_iter()
                        .filter_map(|s| missing_idx.get(s.index).map(|&ri| (ri, s)))
                        .collect();
                    verdicts = verify_spans(&text, &requested, &candidates, index);
                }
                Err(e) => {
                    debug!("{}: repair round {rounds} discarded: {e}", tree.id);
                    skipped += 1;
                }
            }
        }
        Ok(RealizedPost::new(tree.id.clone(), text, verdicts, rounds, skipped))
    }

    fn realize_with_retries(&self, tree: &InstanceTree) -> Result<RealizedPost> {
        let mut attempt = 0;
        loop {
            match self.realize(tree) {
                Ok(p) => return Ok(p),
                Err(e) if attempt < self.settings.retries => {
                    warn!("{}: attempt {} failed: {e}", tree.id, attempt + 1);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Realize every tree with at most `max_in_flight` concurrent jobs.
    /// Results keep the input order.
    pub fn realize_batch(&self, trees: &[InstanceTree]) -> Result<Vec<Result<RealizedPost>>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.settings.max_in_flight.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(pool.install(|| trees.par_iter().map(|t| self.realize_with_retries(t)).collect()))
    }
}

/// Template-realize every tree.
pub fn template_batch(trees: &[InstanceTree], seed: u64) -> Vec<RealizedPost> {
    trees.par_iter().map(|t| template_realize(t, seed)).collect()
}
