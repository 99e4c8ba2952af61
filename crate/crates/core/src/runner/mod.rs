//! Factorial experiment execution, decision parsing and flip-based sensitivity.

mod archive;
mod decision;
mod sensitivity;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Gateway, ModelEndpoint};
use crate::model::{Condition, Decision, DilemmaPair, TrialRecord};
use crate::strategy::{
    build_elicitation_prompt, compose_prompt_with_mode, parse_best_practices, AxiomMode, CueRenderer, PromptMode,
    StrategySpec,
};

pub use archive::{
    read_archive, read_elicitations, read_jsonl, read_trials, ElicitationRecord, JsonlAppender, TrialError,
    COMPLETENESS_FILE, ELICITATIONS_FILE, ERRORS_FILE, TRIALS_FILE,
};
pub use decision::{parse_decision, DECISION_MARKER};
pub use sensitivity::{
    aggregate_sensitivity, compute_sensitivity, group_order, pair_info, GroupSample, Grouping, PairInfo,
    PairSensitivity, Pooling,
};

pub const OPEN_ENDED_REASON: &str = "open-ended: decision comes from human labels";
pub const ELICITATION_FAILED: &str = "elicitation failed";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub runs_per_condition: u32,
    pub mode: PromptMode,
    pub workers: usize,
    /// Which variant the two-step strategies elicit best practices from.
    pub elicitation_source: Condition,
    pub resume: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            runs_per_condition: 5,
            mode: PromptMode::Closed,
            workers: 4,
            elicitation_source: Condition::Biased,
            resume: false,
        }
    }
}

pub struct Experiment<'a> {
    pub pairs: &'a [DilemmaPair],
    pub strategies: &'a [StrategySpec],
    pub endpoints: &'a [ModelEndpoint],
    pub gateway: &'a Gateway,
    pub cue_renderer: &'a dyn CueRenderer,
    pub options: RunOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub expected_trials: u64,
    pub expected_elicitations: u64,
    pub trials_in_archive: u64,
    pub elicitations_in_archive: u64,
    pub new_trials: u64,
    pub new_elicitations: u64,
    pub skipped_jobs: u64,
    pub failed_jobs: u64,
    pub errors: u64,
    pub invalid_decisions: u64,
    pub invalid_by_reason: BTreeMap<String, u64>,
    /// Share of archived decisions that parsed to an option.
    pub validity_rate: Option<f64>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub complete: bool,
}

/// Number of decision trials for a full grid.
pub fn expected_trial_count(models: u64, strategies: u64, pairs: u64, runs: u64) -> u64 {
    models * strategies * pairs * 2 * runs
}

#[derive(Debug, Clone, Copy)]
struct Job {
    model: usize,
    strategy: usize,
    pair: usize,
    run: u32,
}

#[derive(Default)]
struct JobOutput {
    elicitation: Option<ElicitationRecord>,
    trials: Vec<TrialRecord>,
    errors: Vec<TrialError>,
}

const CONDITIONS: [Condition; 2] = [Condition::Unbiased, Condition::Biased];

impl Experiment<'_> {
    fn error(&self, job: Job, stage: &str, err: &Error) -> TrialError {
        TrialError {
            model_id: self.endpoints[job.model].model_id.clone(),
            strategy_id: self.strategies[job.strategy].id.clone(),
            pair_id: self.pairs[job.pair].pair_id.clone(),
            run_index: job.run,
            stage: stage.to_string(),
            kind: err.kind().to_string(),
            message: err.to_string(),
        }
    }

    fn execute(&self, job: Job, need: &[Condition], need_elicitation: bool) -> JobOutput {
        let endpoint = &self.endpoints[job.model];
        let strategy = &self.strategies[job.strategy];
        let pair = &self.pairs[job.pair];
        let mut out = JobOutput::default();

        // `failed_elicitation` holds the timestamp of an elicitation whose output had no cues.
        let mut cues: Option<String> = None;
        let mut failed_elicitation: Option<String> = None;
        match strategy.axiom_mode {
            AxiomMode::TwoStep => {
                let source = pair.dilemma(self.options.elicitation_source);
                let exchange = build_elicitation_prompt(source)
                    .and_then(|b| self.gateway.complete(endpoint, &b, job.run).map_err(Error::from));
                let exchange = match exchange {
                    Ok(x) => x,
                    Err(e) => {
                        out.errors.push(self.error(job, "elicitation", &e));
                        return out;
                    }
                };
                let parsed = parse_best_practices(&exchange.response.text);
                let record = ElicitationRecord {
                    model_id: endpoint.model_id.clone(),
                    strategy_id: strategy.id.clone(),
                    pair_id: pair.pair_id.clone(),
                    run_index: job.run,
                    source_condition: self.options.elicitation_source,
                    raw_text: exchange.response.text.clone(),
                    cues: parsed.as_ref().ok().cloned(),
                    error: parsed.as_ref().err().map(|e| e.to_string()),
                    prompt_tokens: exchange.response.prompt_tokens,
                    completion_tokens: exchange.response.completion_tokens,
                    timestamp: exchange.timestamp.clone(),
                };
                match parsed {
                    Ok(c) => cues = Some(c),
                    Err(_) => failed_elicitation = Some(exchange.timestamp),
                }
                if need_elicitation {
                    out.elicitation = Some(record);
                }
            }
            AxiomMode::Probeax => match self.cue_renderer.render(pair) {
                Ok(c) => cues = Some(c),
                Err(e) => {
                    out.errors.push(self.error(job, "cues", &e));
                    return out;
                }
            },
            AxiomMode::None | AxiomMode::SaxInline => {}
        }

        let mut trials = Vec::new();
        for &condition in need {
            let base = TrialRecord {
                model_id: endpoint.model_id.clone(),
                strategy_id: strategy.id.clone(),
                pair_id: pair.pair_id.clone(),
                condition,
                run_index: job.run,
                raw_text: String::new(),
                decision: Decision::invalid(ELICITATION_FAILED),
                elicited_cues: None,
                prompt_tokens: 0,
                completion_tokens: 0,
                timestamp: String::new(),
            };
            if let Some(ts) = &failed_elicitation {
                trials.push(TrialRecord { timestamp: ts.clone(), ..base });
                continue;
            }
            let bundle = compose_prompt_with_mode(strategy, pair.dilemma(condition), cues.as_deref(), self.options.mode);
            let exchange = bundle.and_then(|b| self.gateway.complete(endpoint, &b, job.run).map_err(Error::from));
            match exchange {
                Ok(x) => {
                    let decision = match self.options.mode {
                        PromptMode::Closed => parse_decision(&x.response.text),
                        PromptMode::OpenEnded => Decision::invalid(OPEN_ENDED_REASON),
                    };
                    trials.push(TrialRecord {
                        raw_text: x.response.text,
                        decision,
                        elicited_cues: if strategy.axiom_mode == AxiomMode::TwoStep { cues.clone() } else { None },
                        prompt_tokens: x.response.prompt_tokens,
                        completion_tokens: x.response.completion_tokens,
                        timestamp: x.timestamp,
                        ..base
                    });
                }
                Err(e) => out.errors.push(self.error(job, &format!("decision/{condition}"), &e)),
            }
        }
        // A job is archived whole or not at all, so resume never sees half a pair.
        if out.errors.is_empty() {
            out.trials = trials;
        }
        out
    }
}

/// Runs every (model, strategy, pair, run) job and appends results to the
/// archive in `out_dir`. Output order follows job order regardless of worker count.
pub fn run_experiment(exp: &Experiment<'_>, out_dir: &Path) -> Result<CompletenessReport> {
    let opts = exp.options;
    if opts.runs_per_condition == 0 {
        return Err(Error::Config("runs_per_condition must be positive".into()));
    }
    let mut pair_ids = HashSet::new();
    for p in exp.pairs {
        if !pair_ids.insert(&p.pair_id) {
            return Err(Error::DuplicatePair(p.pair_id.clone()));
        }
    }
    let mut strategy_ids = HashSet::new();
    for s in exp.strategies {
        if !strategy_ids.insert(&s.id) {
            return Err(Error::Config(format!("strategy `{}` listed twice", s.id)));
        }
    }
    let mut model_ids = HashSet::new();
    for e in exp.endpoints {
        if !model_ids.insert(&e.model_id) {
            return Err(Error::Config(format!("model `{}` listed twice", e.model_id)));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let trials_path = out_dir.join(TRIALS_FILE);

    let existing: Vec<TrialRecord> = if trials_path.exists() {
        let recs = read_trials(&trials_path)?;
        if !recs.is_empty() && !opts.resume {
            return Err(Error::Config(format!("archive {} already has trials; pass --resume to continue it", trials_path.display())));
        }
        recs
    } else {
        Vec::new()
    };
    let existing_elicitations = read_elicitations(out_dir)?;
    let done: HashSet<_> = existing.iter().map(TrialRecord::key).collect();
    let done_elicitations: HashSet<_> = existing_elicitations
        .iter()
        .map(|e| (e.model_id.clone(), e.strategy_id.clone(), e.pair_id.clone(), e.run_index))
        .collect();

    let mut jobs = Vec::new();
    let mut skipped = 0u64;
    for model in 0..exp.endpoints.len() {
        for strategy in 0..exp.strategies.len() {
            for pair in 0..exp.pairs.len() {
                for run in 0..opts.runs_per_condition {
                    let job = Job { model, strategy, pair, run };
                    let need = missing_conditions(exp, job, &done);
                    if need.is_empty() {
                        skipped += 1;
                    } else {
                        jobs.push((job, need));
                    }
                }
            }
        }
    }

    let mut trials_out = JsonlAppender::open(&trials_path)?;
    let mut elicit_out = JsonlAppender::open(out_dir.join(ELICITATIONS_FILE))?;
    let mut errors_out = JsonlAppender::open(out_dir.join(ERRORS_FILE))?;
    let (mut new_trials, mut new_elicitations, mut failed_jobs, mut n_errors) = (0u64, 0u64, 0u64, 0u64);

    let next = AtomicUsize::new(0);
    let workers = opts.workers.max(1).min(jobs.len().max(1));
    let total = jobs.len();
    let write_result: Result<()> = std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, JobOutput)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let jobs = &jobs;
            let next = &next;
            let done_elicitations = &done_elicitations;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((job, need)) = jobs.get(i) else { break };
                let key = (
                    exp.endpoints[job.model].model_id.clone(),
                    exp.strategies[job.strategy].id.clone(),
                    exp.pairs[job.pair].pair_id.clone(),
                    job.run,
                );
                let output = exp.execute(*job, need, !done_elicitations.contains(&key));
                if tx.send((i, output)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending: BTreeMap<usize, JobOutput> = BTreeMap::new();
        let mut cursor = 0usize;
        for (i, output) in rx {
            pending.insert(i, output);
            while let Some(output) = pending.remove(&cursor) {
                if let Some(e) = &output.elicitation {
                    elicit_out.append(e)?;
                    new_elicitations += 1;
                }
                for t in &output.trials {
                    trials_out.append(t)?;
                }
                new_trials += output.trials.len() as u64;
                if !output.errors.is_empty() {
                    failed_jobs += 1;
                }
                for e in &output.errors {
                    tracing::warn!(pair = %e.pair_id, stage = %e.stage, "{}", e.message);
                    errors_out.append(e)?;
                }
                n_errors += output.errors.len() as u64;
                cursor += 1;
                if cursor.is_multiple_of(500) {
                    tracing::info!("{cursor}/{total} jobs finished");
                }
            }
        }
        trials_out.flush()?;
        elicit_out.flush()?;
        errors_out.flush()
    });
    write_result?;

    let archive = read_trials(&trials_path)?;
    let elicitations = read_elicitations(out_dir)?;
    let report = completeness(exp, &archive, &elicitations, new_trials, new_elicitations, skipped, failed_jobs, n_errors);
    let path = out_dir.join(COMPLETENESS_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

fn missing_conditions(exp: &Experiment<'_>, job: Job, done: &HashSet<crate::model::TrialKey>) -> Vec<Condition> {
    CONDITIONS
        .into_iter()
        .filter(|&c| {
            !done.contains(&(
                exp.endpoints[job.model].model_id.clone(),
                exp.strategies[job.strategy].id.clone(),
                exp.pairs[job.pair].pair_id.clone(),
                c,
                job.run,
            ))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn completeness(
    exp: &Experiment<'_>,
    archive: &[TrialRecord],
    elicitations: &[ElicitationRecord],
    new_trials: u64,
    new_elicitations: u64,
    skipped_jobs: u64,
    failed_jobs: u64,
    errors: u64,
) -> CompletenessReport {
    let runs = exp.options.runs_per_condition as u64;
    let models = exp.endpoints.len() as u64;
    let pairs = exp.pairs.len() as u64;
    let two_step = exp.strategies.iter().filter(|s| s.axiom_mode == AxiomMode::TwoStep).count() as u64;
    let expected_trials = expected_trial_count(models, exp.strategies.len() as u64, pairs, runs);
    let expected_elicitations = models * two_step * pairs * runs;
    let mut invalid_by_reason = BTreeMap::new();
    for t in archive {
        if let Decision::Invalid(r) = &t.decision {
            *invalid_by_reason.entry(r.clone()).or_insert(0u64) += 1;
        }
    }
    let invalid: u64 = invalid_by_reason.values().sum();
    let n = archive.len() as u64;
    CompletenessReport {
        expected_trials,
        expected_elicitations,
        trials_in_archive: n,
        elicitations_in_archive: elicitations.len() as u64,
        new_trials,
        new_elicitations,
        skipped_jobs,
        failed_jobs,
        errors,
        invalid_decisions: invalid,
        invalid_by_reason,
        validity_rate: (n > 0).then(|| (n - invalid) as f64 / n as f64),
        prompt_tokens: archive.iter().map(|t| t.prompt_tokens).sum::<u64>() + elicitations.iter().map(|e| e.prompt_tokens).sum::<u64>(),
        completion_tokens: archive.iter().map(|t| t.completion_tokens).sum::<u64>()
            + elicitations.iter().map(|e| e.completion_tokens).sum::<u64>(),
        complete: n == expected_trials && elicitations.len() as u64 == expected_elicitations,
    }
}
