//! Pipeline configuration (TOML).
//!
//! ```toml
//! seed = 13
//! no_injection_ratio = 0.7
//! # total = 2000            # optional rescaling of the structure table
//!
//! [clusters]                # selected clusters per kind
//! T_p = 4
//! D = 2
//!
//! [lexicon]
//! threshold = 0.5           # average-linkage cut
//! sparse_floor = 50         # augment labels with fewer spans
//!
//! [realize]
//! backend = "template"      # or "remote"
//! max_rounds = 2
//! max_in_flight = 4
//! retries = 2
//! temperature = 0.8
//! top_p = 0.95
//! # cache_dir = "cache"
//! # [realize.http]
//! # endpoint = "https://host/v1/chat/completions"
//! # model = "name"
//! # token_env = "GENERATION_API_TOKEN"
//!
//! [split]
//! train = 0.8
//! dev = 0.1
//! test = 0.1
//!
//! [bench]
//! size = 50
//!
//! [[structure]]
//! main = "T_p D"
//! injected = ""
//! count = 96
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::jsonl::sha256_hex;
use super::split::SplitRatios;
use crate::bench::GeneralisationTest;
use crate::client::{HttpSettings, SamplingParams};
use crate::error::{Error, Result};
use crate::grammar::StructKind;
use crate::planner::{default_ratio, PlannerConfig, StructureRow};
use crate::realize::RealizeSettings;

pub const DESK_CONFIG: &str = include_str!("../../configs/desk.toml");
pub const FULL_CONFIG: &str = include_str!("../../configs/full.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconSettings {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_floor")]
    pub sparse_floor: usize,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_floor() -> usize {
    crate::lexicon::augment::DEFAULT_SPARSE_FLOOR
}

impl Default for LexiconSettings {
    fn default() -> Self {
        LexiconSettings { threshold: default_threshold(), sparse_floor: default_floor() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Template,
    Remote,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "template" => Ok(Backend::Template),
            "remote" => Ok(Backend::Remote),
            _ => Err(Error::Config(format!("unknown backend {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizeConfig {
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_rounds")]
    pub max_rounds: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub http: Option<HttpSettings>,
}

fn default_rounds() -> u32 {
    2
}
fn default_in_flight() -> usize {
    4
}
fn default_retries() -> u32 {
    2
}
fn default_temperature() -> f64 {
    SamplingParams::default().temperature
}
fn default_top_p() -> f64 {
    SamplingParams::default().top_p
}

impl Default for RealizeConfig {
    fn default() -> Self {
        RealizeConfig {
            backend: Backend::Template,
            max_rounds: default_rounds(),
            max_in_flight: default_in_flight(),
            retries: default_retries(),
            temperature: default_temperature(),
            top_p: default_top_p(),
            cache_dir: None,
            http: None,
        }
    }
}

impl RealizeConfig {
    pub fn settings(&self) -> RealizeSettings {
        RealizeSettings {
            max_rounds: self.max_rounds,
            max_in_flight: self.max_in_flight,
            retries: self.retries,
            sampling: SamplingParams { temperature: self.temperature, top_p: self.top_p },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSettings {
    #[serde(default = "default_bench_size")]
    pub size: usize,
    /// Replaces the preset tests when given.
    #[serde(default)]
    pub tests: Option<Vec<GeneralisationTest>>,
}

fn default_bench_size() -> usize {
    crate::bench::DEFAULT_TEST_SIZE
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings { size: default_bench_size(), tests: None }
    }
}

impl BenchSettings {
    pub fn tests(&self) -> Vec<GeneralisationTest> {
        self.tests.clone().unwrap_or_else(|| crate::bench::presets(self.size))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ratio")]
    pub no_injection_ratio: f64,
    #[serde(default)]
    pub total: Option<u64>,
    pub clusters: BTreeMap<StructKind, usize>,
    #[serde(default)]
    pub lexicon: LexiconSettings,
    #[serde(default)]
    pub realize: RealizeConfig,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default)]
    pub bench: BenchSettings,
    pub structure: Vec<StructureRow>,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn desk() -> Self {
        Self::from_toml_str(DESK_CONFIG).expect("shipped desk config is valid")
    }

    pub fn full() -> Self {
        Self::from_toml_str(FULL_CONFIG).expect("shipped full config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if !(0.0..=1.0).contains(&self.no_injection_ratio) {
            return Err(Error::Config(format!("no_injection_ratio {} outside [0, 1]", self.no_injection_ratio)));
        }
        if !(self.lexicon.threshold > 0.0 && self.lexicon.threshold < 1.0) {
            return Err(Error::Config(format!("lexicon threshold {} outside (0, 1)", self.lexicon.threshold)));
        }
        if self.realize.backend == Backend::Remote && self.realize.http.is_none() {
            return Err(Error::Config("remote backend needs [realize.http]".into()));
        }
        if self.structure.is_empty() {
            return Err(Error::Config("no [[structure]] rows".into()));
        }
        Ok(())
    }

    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            clusters: self.clusters.clone(),
            structure: self.structure.clone(),
            no_injection_ratio: self.no_injection_ratio,
            total: self.total,
        }
    }

    /// Digest of the whole configuration.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serialises"))
    }

    /// Digest of the structure table alone.
    pub fn structure_digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(&self.structure).expect("rows serialise"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_parse() {
        let d = PipelineConfig::desk();
        assert_eq!(d.clusters[&StructKind::Tp], 4);
        assert_eq!(d.structure.iter().map(|r| r.count).sum::<u64>(), 1973);
        let p = PipelineConfig::full();
        assert_eq!(p.clusters[&StructKind::E], 40);
        assert_eq!(p.structure.len(), 108);
    }

    #[test]
    fn bad_ratios_rejected() {
        let text = DESK_CONFIG.replace("train = 0.8", "train = 0.7");
        assert!(PipelineConfig::from_toml_str(&text).is_err());
        let text = DESK_CONFIG.replace("seed = 13", "seed = 13\nbogus = 1");
        assert!(PipelineConfig::from_toml_str(&text).is_err());
    }
}
