use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cuebench_core::analysis::{analyze_sensitivity, ensure_tiers, write_analysis};
use cuebench_core::config::{MineConfig, RunConfig};
use cuebench_core::dataset::{load_dataset, save_dataset};
use cuebench_core::horn::{assign_tiers, verify_pair};
use cuebench_core::labels::{analyze_labels, load_labels, write_labels, LabelOptions};
use cuebench_core::lexicon::{analyze_features, lexicon_documents, write_lexicon, Codebook};
use cuebench_core::miner::{
    load_alignment_review, load_corpus, load_references, load_review, load_scores, run_mining, summary_lines,
    write_mining, Judge, JudgePrompts, MiningInputs,
};
use cuebench_core::report::{export, load_table, ExportFormat};
use cuebench_core::runner::{read_archive, run_experiment, Experiment};
use cuebench_core::stats::{bootstrap_mean_ci, selftest as stats_selftest};
use cuebench_core::strategy::presets_json;
use cuebench_core::{Error, Result};
use tracing::info;

use crate::{AnalyzeArgs, LexiconArgs, MineArgs, RunArgs};

pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.json";

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn validate(dataset: &Path) -> Result<()> {
    let pairs = load_dataset(dataset)?;
    let mut bad = Vec::new();
    for pair in &pairs {
        let v = verify_pair(pair)?;
        info!(pair = %v.pair_id, unbiased_steps = v.unbiased_steps, biased_steps = v.biased_steps, "verified");
        if !v.consistent {
            bad.push(format!("{}: {}", v.pair_id, v.diagnostics.join("; ")));
        }
    }
    if !bad.is_empty() {
        return Err(Error::Contract(format!("{} of {} pairs inconsistent: {}", bad.len(), pairs.len(), bad.join(" | "))));
    }
    println!("{} pairs consistent", pairs.len());
    Ok(())
}

pub fn tier(dataset: &Path, output: Option<&Path>) -> Result<()> {
    let pairs = load_dataset(dataset)?;
    match output {
        Some(out) => {
            save_dataset(out, &ensure_tiers(&pairs)?)?;
            println!("wrote {}", out.display());
        }
        None => {
            for (id, tier) in assign_tiers(&pairs)? {
                println!("{id}\t{}", tier.as_str());
            }
        }
    }
    Ok(())
}

pub fn run(args: &RunArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(d) = &args.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(d) = &args.cache_dir {
        cfg.cache_dir = Some(d.clone());
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.validate()?;

    let pairs = load_dataset(&cfg.dataset)?;
    let strategies = cfg.strategy_specs()?;
    let gateway = cfg.gateway(args.replay_only)?;
    let renderer = cfg.cue_renderer()?;
    let exp = Experiment {
        pairs: &pairs,
        strategies: &strategies,
        endpoints: &cfg.endpoints,
        gateway: &gateway,
        cue_renderer: renderer.as_ref(),
        options: cfg.run_options(args.resume),
    };
    let report = run_experiment(&exp, &cfg.output_dir)?;
    write(&cfg.output_dir.join(EFFECTIVE_CONFIG_FILE), &serde_json::to_string_pretty(&cfg)?)?;
    println!(
        "{} trials ({} new), {} elicitations, {} errors, complete: {}",
        report.trials_in_archive, report.new_trials, report.elicitations_in_archive, report.errors, report.complete
    );
    if args.replay_only && report.errors > 0 {
        return Err(Error::Contract(format!(
            "replay incomplete: {} call(s) had no usable cached response (see {})",
            report.errors,
            cfg.output_dir.join("errors.jsonl").display()
        )));
    }
    Ok(())
}

fn archive_dir(cfg: &RunConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone().unwrap_or_else(|| cfg.output_dir.clone())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let archive = archive_dir(&cfg, &args.archive);
    let out = args.output_dir.clone().unwrap_or_else(|| archive.join("analysis"));
    let records = read_archive(&archive)?;
    let pairs = load_dataset(&cfg.dataset)?;
    let analysis = analyze_sensitivity(&records, &pairs, &cfg.analysis_options()?)?;
    for path in write_analysis(&analysis, &out)? {
        println!("wrote {}", path.display());
    }
    if let Some(labels) = args.labels.as_ref().or(cfg.analysis.labels.as_ref()) {
        let mut opts = LabelOptions::new(cfg.seeds.bootstrap);
        opts.resamples = cfg.analysis.bootstrap_resamples;
        opts.baseline_id = cfg.analysis.baseline.clone();
        let result = analyze_labels(&load_labels(labels)?, &opts)?;
        write_labels(&result, &out)?;
        println!(
            "labels: agreement {:.1}%, kappa {}",
            result.agreement.percent_agreement * 100.0,
            result.agreement.kappa.map_or("NA".into(), |k| format!("{k:.3}"))
        );
    }
    Ok(())
}

pub fn lexicon(args: &LexiconArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let codebook_path = args
        .codebook
        .clone()
        .or_else(|| cfg.analysis.codebook.clone())
        .ok_or_else(|| Error::Config("no codebook given (set analysis.codebook or pass --codebook)".into()))?;
    let strategy = args.strategy.clone().unwrap_or_else(|| cfg.analysis.lexicon_strategy.clone());
    let archive = archive_dir(&cfg, &args.archive);
    let out = args.output_dir.clone().unwrap_or_else(|| archive.join("analysis"));

    let codebook = Codebook::load(&codebook_path)?;
    let compiled = codebook.compile()?;
    let records = read_archive(&archive)?;
    let pairs = load_dataset(&cfg.dataset)?;
    let (sensitive, other) = lexicon_documents(&records, &pairs, &strategy)?;
    info!(sensitive = sensitive.len(), other = other.len(), "lexicon documents");
    let analysis = analyze_features(&sensitive, &other, &compiled, &cfg.lexicon_options())?;
    write_lexicon(&analysis, &codebook, &out)?;
    println!(
        "{} effects, {} degenerate cells; wrote {}",
        analysis.effects.len(),
        analysis.degenerate.len(),
        out.join("fig5_lexicon.csv").display()
    );
    Ok(())
}

pub fn mine(args: &MineArgs) -> Result<()> {
    let mut cfg = MineConfig::load(&args.config)?;
    if let Some(d) = &args.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(d) = &args.cache_dir {
        cfg.cache_dir = Some(d.clone());
    }
    let corpus = load_corpus(&cfg.corpus)?;
    let scores = load_scores(&cfg.scores)?;
    let references = load_references(&cfg.references)?;
    let review = cfg.review.as_ref().map(load_review).transpose()?.unwrap_or_default();
    let alignment_review: BTreeMap<String, bool> =
        cfg.alignment_review.as_ref().map(load_alignment_review).transpose()?.unwrap_or_default();
    let prompts = cfg.prompts.as_ref().map(JudgePrompts::load).transpose()?.unwrap_or_default();

    let gateway = cfg.gateway(args.replay_only)?;
    let judge = Judge { gateway: &gateway, endpoint: &cfg.judge, prompts: &prompts, workers: cfg.workers };
    let inputs = MiningInputs {
        corpus: &corpus,
        scores: &scores,
        threshold: cfg.threshold,
        review: &review,
        references: &references,
        alignment_review: &alignment_review,
        k: cfg.k,
    };
    let report = run_mining(&inputs, &judge)?;
    write_mining(&report, &cfg.output_dir)?;
    write(&cfg.output_dir.join(EFFECTIVE_CONFIG_FILE), &serde_json::to_string_pretty(&cfg)?)?;
    for line in summary_lines(&report) {
        println!("{line}");
    }
    Ok(())
}

pub fn report(from: &Path, format: ExportFormat, out: &Path) -> Result<()> {
    let mut sources: Vec<PathBuf> = fs::read_dir(from)
        .map_err(|e| Error::io(from, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("fig") && name.ends_with(".json") && !name.starts_with("fig5") && !name.starts_with("fig7")
        })
        .collect();
    sources.sort();
    if sources.is_empty() {
        return Err(Error::Data(format!("no saved tables in {}", from.display())));
    }
    for src in sources {
        let table = load_table(&src)?;
        let ext = match format {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
        };
        let path = out.join(format!("{}.{ext}", table.file_stem()));
        export(&table, format, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn selftest() -> Result<()> {
    let checks = stats_selftest();
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if failed > 0 {
        return Err(Error::Contract(format!("{failed} of {} statistical self-checks failed", checks.len())));
    }
    Ok(())
}

pub fn bootstrap(values: &[f64], resamples: usize, seed: u64) -> Result<()> {
    let ci = bootstrap_mean_ci(values, resamples, seed, 0.95)?;
    println!("{}", serde_json::to_string(&ci)?);
    Ok(())
}

pub fn presets() -> Result<()> {
    println!("{}", presets_json()?);
    Ok(())
}
