//! Paired-dilemma evaluation of prompt-induced bias sensitivity.
//!
//! The crate covers the whole pipeline: dataset loading and Horn-clause
//! verification, prompt composition, a cached chat gateway, the experiment
//! runner, statistics, report tables, lexicon coding and corpus mining.

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod error;
pub mod gateway;
pub mod horn;
pub mod labels;
pub mod lexicon;
pub mod miner;
pub mod model;
pub mod report;
pub mod runner;
pub mod stats;
pub mod strategy;

pub use analysis::{analyze_sensitivity, write_analysis, AnalysisOptions, FdrFamily, SensitivityAnalysis};
pub use config::{MineConfig, RunConfig};
pub use dataset::{load_dataset, parse_dataset};
pub use error::{Error, Result};
pub use gateway::{Gateway, ModelEndpoint};
pub use horn::{solve, verify_pair, PairVerification, ProofResult};
pub use model::{BiasType, ComplexityTier, Condition, Decision, Dilemma, DilemmaPair, TrialRecord};
pub use report::{ExportFormat, HeatmapCell, HeatmapTable};
pub use runner::{run_experiment, CompletenessReport, Experiment, Grouping, Pooling, RunOptions};
pub use stats::{FeatureEffect, StatResult};
pub use strategy::{compose_prompt, PromptBundle, StrategySpec, BASELINE_ID};
