//! Declarative experiment and mining configuration files.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisOptions, FdrFamily};
use crate::error::{Error, Result};
use crate::gateway::{ChatBackend, Gateway, HttpBackend, ModelEndpoint, OfflineBackend, ResponseCache, RetryPolicy, StubBackend, StubScript};
use crate::lexicon::LexiconOptions;
use crate::miner::{DEFAULT_ALIGNMENT_K, DEFAULT_TRIAGE_THRESHOLD};
use crate::model::Condition;
use crate::runner::{Grouping, Pooling, RunOptions};
use crate::stats::{HcVariant, TwoSidedMethod};
use crate::strategy::{AxiomListRenderer, Component, CueRenderer, PromptMode, StrategySpec, TableRenderer, BASELINE_ID};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// OpenAI-compatible chat completions over HTTP.
    #[default]
    Http,
    /// Scripted responses, for tests and dry runs.
    Stub { script: PathBuf },
}

/// A preset/composed id such as `"sAX+BW"`, or an explicit component list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategyRef {
    Id(String),
    Components { components: Vec<String> },
}

impl StrategyRef {
    pub fn resolve(&self) -> Result<StrategySpec> {
        match self {
            StrategyRef::Id(id) => StrategySpec::from_id(id),
            StrategyRef::Components { components } => {
                let parts = components.iter().map(|c| Component::parse(c)).collect::<Result<Vec<_>>>()?;
                StrategySpec::compose(&parts)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub bootstrap: u64,
}

fn default_groupings() -> Vec<Grouping> {
    Grouping::ALL.to_vec()
}
fn default_alpha() -> f64 {
    0.05
}
fn default_resamples() -> usize {
    10_000
}
fn default_lexicon_strategy() -> String {
    "sAX+BW".into()
}
fn default_baseline() -> String {
    BASELINE_ID.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_groupings")]
    pub groupings: Vec<Grouping>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub fdr_family: FdrFamily,
    #[serde(default)]
    pub pooling: Pooling,
    #[serde(default = "default_baseline")]
    pub baseline: String,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default)]
    pub hc_variant: HcVariant,
    #[serde(default)]
    pub two_sided_method: TwoSidedMethod,
    /// Strategy whose biased responses feed the lexicon analysis.
    #[serde(default = "default_lexicon_strategy")]
    pub lexicon_strategy: String,
    #[serde(default)]
    pub codebook: Option<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all analysis fields have defaults")
    }
}

fn default_runs() -> u32 {
    5
}
fn default_workers() -> usize {
    4
}
fn default_source() -> Condition {
    Condition::Biased
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub endpoints: Vec<ModelEndpoint>,
    pub strategies: Vec<StrategyRef>,
    #[serde(default = "default_runs")]
    pub runs_per_condition: u32,
    #[serde(default)]
    pub mode: PromptMode,
    pub seeds: Seeds,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_source")]
    pub elicitation_source: Condition,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// JSON map of pair_id to cue text for oracle-cue strategies; shared axioms otherwise.
    #[serde(default)]
    pub cue_table: Option<PathBuf>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn must_exist(what: &str, p: &Path) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} `{}` does not exist", p.display())))
    }
}

fn resolve_backend(base: &Path, backend: &mut BackendConfig) -> Result<()> {
    if let BackendConfig::Stub { script } = backend {
        resolve(base, script);
        must_exist("stub script", script)?;
    }
    Ok(())
}

fn check_endpoint(ep: &ModelEndpoint) -> Result<()> {
    ep.sampling.validate().map_err(|m| Error::Config(format!("endpoint `{}`: {m}", ep.model_id)))?;
    if ep.model_id.trim().is_empty() {
        return Err(Error::Config("endpoint with empty model_id".into()));
    }
    Ok(())
}

/// Builds a gateway; replay-only mode never touches a live backend.
pub fn build_gateway(backend: &BackendConfig, cache_dir: Option<&Path>, retry: RetryPolicy, replay_only: bool) -> Result<Gateway> {
    let live: Arc<dyn ChatBackend> = if replay_only {
        Arc::new(OfflineBackend)
    } else {
        match backend {
            BackendConfig::Http => Arc::new(HttpBackend),
            BackendConfig::Stub { script } => Arc::new(StubBackend::new(StubScript::load(script)?)),
        }
    };
    let mut gw = Gateway::new(live).with_retry(retry).replay_only(replay_only);
    match cache_dir {
        Some(dir) => gw = gw.with_cache(ResponseCache::open(dir)?),
        None if replay_only => return Err(Error::Config("replay-only mode needs a cache_dir".into())),
        None => {}
    }
    Ok(gw)
}

impl RunConfig {
    /// Parses, resolves relative paths against the file's directory and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: RunConfig = read_config(path)?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.resolve_paths(&base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        resolve(base, &mut self.dataset);
        resolve(base, &mut self.output_dir);
        for p in [&mut self.cache_dir, &mut self.cue_table, &mut self.analysis.codebook, &mut self.analysis.labels].into_iter().flatten() {
            resolve(base, p);
        }
        resolve_backend(base, &mut self.backend)
    }

    pub fn validate(&self) -> Result<()> {
        must_exist("dataset", &self.dataset)?;
        for (what, p) in [("cue table", &self.cue_table), ("codebook", &self.analysis.codebook), ("label file", &self.analysis.labels)] {
            if let Some(p) = p {
                must_exist(what, p)?;
            }
        }
        if self.endpoints.is_empty() {
            return Err(Error::Config("no endpoints configured".into()));
        }
        let mut ids = HashSet::new();
        for ep in &self.endpoints {
            check_endpoint(ep)?;
            if !ids.insert(ep.model_id.as_str()) {
                return Err(Error::Config(format!("duplicate endpoint `{}`", ep.model_id)));
            }
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies configured".into()));
        }
        self.strategy_specs()?;
        if self.runs_per_condition == 0 {
            return Err(Error::Config("runs_per_condition must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        let a = &self.analysis;
        if !(a.alpha > 0.0 && a.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", a.alpha)));
        }
        if a.groupings.is_empty() {
            return Err(Error::Config("no analysis groupings".into()));
        }
        if a.bootstrap_resamples == 0 {
            return Err(Error::Config("bootstrap_resamples must be positive".into()));
        }
        Ok(())
    }

    pub fn strategy_specs(&self) -> Result<Vec<StrategySpec>> {
        let specs = self.strategies.iter().map(StrategyRef::resolve).collect::<Result<Vec<_>>>()?;
        let mut seen = HashSet::new();
        for s in &specs {
            if !seen.insert(s.id.clone()) {
                return Err(Error::Config(format!("strategy `{}` listed twice", s.id)));
            }
        }
        Ok(specs)
    }

    pub fn run_options(&self, resume: bool) -> RunOptions {
        RunOptions {
            runs_per_condition: self.runs_per_condition,
            mode: self.mode,
            workers: self.workers,
            elicitation_source: self.elicitation_source,
            resume,
        }
    }

    pub fn analysis_options(&self) -> Result<AnalysisOptions> {
        Ok(AnalysisOptions {
            groupings: self.analysis.groupings.clone(),
            alpha: self.analysis.alpha,
            fdr_family: self.analysis.fdr_family,
            pooling: self.analysis.pooling,
            baseline_id: self.analysis.baseline.clone(),
            strategy_order: self.strategy_specs()?.into_iter().map(|s| s.id).collect(),
        })
    }

    pub fn lexicon_options(&self) -> LexiconOptions {
        LexiconOptions {
            alpha: self.analysis.alpha,
            hc_variant: self.analysis.hc_variant,
            two_sided: self.analysis.two_sided_method,
            ..LexiconOptions::default()
        }
    }

    pub fn gateway(&self, replay_only: bool) -> Result<Gateway> {
        build_gateway(&self.backend, self.cache_dir.as_deref(), self.retry, replay_only)
    }

    pub fn cue_renderer(&self) -> Result<Box<dyn CueRenderer>> {
        Ok(match &self.cue_table {
            None => Box::new(AxiomListRenderer),
            Some(p) => {
                let cues: BTreeMap<String, String> = read_config(p)?;
                Box::new(TableRenderer { cues })
            }
        })
    }
}

fn default_threshold() -> f64 {
    DEFAULT_TRIAGE_THRESHOLD
}
fn default_k() -> usize {
    DEFAULT_ALIGNMENT_K
}
fn default_mine_workers() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MineConfig {
    /// JSON lines of `{prompt_id, text}`.
    pub corpus: PathBuf,
    /// `prompt_id,score` CSV or a JSON object.
    pub scores: PathBuf,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub judge: ModelEndpoint,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Judge prompt templates; built-in defaults when absent.
    #[serde(default)]
    pub prompts: Option<PathBuf>,
    #[serde(default)]
    pub review: Option<PathBuf>,
    pub references: PathBuf,
    #[serde(default)]
    pub alignment_review: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_mine_workers")]
    pub workers: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    pub output_dir: PathBuf,
}

impl MineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: MineConfig = read_config(path)?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        resolve(&base, &mut cfg.corpus);
        resolve(&base, &mut cfg.scores);
        resolve(&base, &mut cfg.references);
        resolve(&base, &mut cfg.output_dir);
        for p in [&mut cfg.cache_dir, &mut cfg.prompts, &mut cfg.review, &mut cfg.alignment_review].into_iter().flatten() {
            resolve(&base, p);
        }
        resolve_backend(&base, &mut cfg.backend)?;
        must_exist("corpus", &cfg.corpus)?;
        must_exist("score file", &cfg.scores)?;
        must_exist("reference cues", &cfg.references)?;
        for (what, p) in [("judge prompts", &cfg.prompts), ("review file", &cfg.review), ("alignment review", &cfg.alignment_review)] {
            if let Some(p) = p {
                must_exist(what, p)?;
            }
        }
        check_endpoint(&cfg.judge)?;
        if !(0.0..=1.0).contains(&cfg.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", cfg.threshold)));
        }
        if cfg.k == 0 || cfg.workers == 0 {
            return Err(Error::Config("k and workers must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn gateway(&self, replay_only: bool) -> Result<Gateway> {
        build_gateway(&self.backend, self.cache_dir.as_deref(), self.retry, replay_only)
    }
}
