//! Runs an experiment plan: tasks x strategies x models, resumably.

mod records;

pub use records::{
    completed_triples, latest_per_triple, load_records, CandidateRecord, ExperimentRecord,
    LoadedRecords, RecordStatus, RecordWriter, RecordsError, StageRecord, Triple, VerdictRecord,
    RECORD_VERSION,
};

use crate::corpus::{
    enumerate_tasks, load_corpus, sample_snippets, validate_targets, CorpusError, Layout,
    LoadReport, SnippetSet, TargetMap, TranslationTask,
};
use crate::ir::{ParserRegistry, BUILTIN_PARSER_ID};
use crate::judge::{Judge, JudgeError, Limits, Toolchain, Verdict};
use crate::model::{
    CacheKey, Mode, ModelClient, ModelConfig, ModelError, ResponseCache, Transport,
};
use crate::postprocess::extract_code;
use crate::prompt::{ExemplarBank, PromptRenderer, PromptStrategy, TemplateSet};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::time::Instant;

pub const PLAN_FILE: &str = "plan.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const LOG_FILE: &str = "log.txt";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub root: PathBuf,
    #[serde(default)]
    pub layout: Layout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampling {
    pub per_language: usize,
    pub seed: u64,
}

fn default_parser() -> String {
    BUILTIN_PARSER_ID.to_string()
}

fn default_workers() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub run_id: String,
    pub dataset: DatasetSpec,
    pub sampling: Sampling,
    pub targets: TargetMap,
    pub strategies: Vec<PromptStrategy>,
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplars_dir: Option<PathBuf>,
    #[serde(default = "default_parser")]
    pub parser: String,
    /// Per-language overrides of the default toolchains.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub toolchains: Vec<Toolchain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sandbox_root: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_workers")]
    pub max_in_flight: usize,
}

/// Fields that only affect how a run executes, not what it computes.
const EXECUTION_FIELDS: &[&str] = &[
    "mode",
    "cache_dir",
    "sandbox_root",
    "workers",
    "max_in_flight",
];

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Validation(m));
        let id_ok = !self.run_id.is_empty()
            && self
                .run_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            && !self.run_id.starts_with('.');
        if !id_ok {
            return bad(format!(
                "run_id `{}` must be non-empty and use only [A-Za-z0-9._-]",
                self.run_id
            ));
        }
        if self.sampling.per_language == 0 {
            return bad("sampling.per_language must be positive".into());
        }
        if self.targets.values().all(BTreeSet::is_empty) {
            return bad("targets map is empty".into());
        }
        validate_targets(&self.targets).map_err(RunError::Corpus)?;
        if self.strategies.is_empty() {
            return bad("no strategies listed".into());
        }
        let unique: BTreeSet<_> = self.strategies.iter().collect();
        if unique.len() != self.strategies.len() {
            return bad("strategies listed more than once".into());
        }
        if self.models.is_empty() {
            return bad("no models listed".into());
        }
        let mut ids = BTreeSet::new();
        for m in &self.models {
            m.validate().map_err(|e| RunError::Validation(e.to_string()))?;
            if !ids.insert(&m.model_id) {
                return bad(format!("model `{}` listed more than once", m.model_id));
            }
        }
        self.limits
            .validate()
            .map_err(|e| RunError::Validation(e.to_string()))?;
        for tc in &self.toolchains {
            tc.validate()
                .map_err(|e| RunError::Validation(e.to_string()))?;
        }
        if self.mode != Mode::Live && self.cache_dir.is_none() {
            return bad(format!("{} mode needs cache_dir", self.mode));
        }
        if self.workers == 0 || self.max_in_flight == 0 {
            return bad("workers and max_in_flight must be positive".into());
        }
        let parsers = ParserRegistry::default();
        for src in self.targets.keys() {
            if !parsers.has(*src, &self.parser) {
                return bad(format!("no parser `{}` for {src}", self.parser));
            }
        }
        Ok(())
    }

    /// The plan as JSON without execution-only fields. Two plans with the
    /// same identity describe the same experiment.
    pub fn identity(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("plan serializes");
        if let Some(obj) = v.as_object_mut() {
            for f in EXECUTION_FIELDS {
                obj.remove(*f);
            }
        }
        v
    }

    pub fn run_dir(&self, results_root: &Path) -> PathBuf {
        results_root.join(&self.run_id)
    }

    /// Default toolchains with the plan's overrides applied.
    pub fn effective_toolchains(&self) -> Vec<Toolchain> {
        let mut map: BTreeMap<_, _> = Toolchain::defaults()
            .into_iter()
            .map(|t| (t.language, t))
            .collect();
        for t in &self.toolchains {
            map.insert(t.language, t.clone());
        }
        map.into_values().collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid plan: {0}")]
    Validation(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Records(#[from] RecordsError),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} describes a different experiment; use a new run_id")]
    PlanMismatch { path: PathBuf },
    #[error("replay cache miss for {unit}: {digest}")]
    CacheMiss { unit: String, digest: CacheKey },
    #[error("infrastructure error: {0}")]
    Infrastructure(String),
}

impl RunError {
    /// Process exit code: 1 validation, 2 infrastructure, 3 cache miss.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) | RunError::Corpus(_) | RunError::PlanMismatch { .. } => 1,
            RunError::CacheMiss { .. } => 3,
            RunError::Records(_) | RunError::Io { .. } | RunError::Infrastructure(_) => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Sampled snippets and the task list a plan expands to.
#[derive(Debug, Clone)]
pub struct PreparedPlan {
    pub load_report: LoadReport,
    pub snippets: SnippetSet,
    pub tasks: Vec<TranslationTask>,
}

impl PreparedPlan {
    pub fn unit_count(&self, plan: &ExperimentPlan) -> usize {
        self.tasks.len() * plan.strategies.len() * plan.models.len()
    }

    /// All work units in canonical order.
    pub fn units(&self, plan: &ExperimentPlan) -> Vec<Triple> {
        let mut units = Vec::with_capacity(self.unit_count(plan));
        for task in &self.tasks {
            for strategy in &plan.strategies {
                for model in &plan.models {
                    units.push(Triple {
                        task: task.clone(),
                        strategy: strategy.clone(),
                        model_id: model.model_id.clone(),
                    });
                }
            }
        }
        units.sort();
        units
    }
}

/// Loads the corpus, draws the sample and enumerates tasks. The same sample
/// serves every strategy and model in the plan.
pub fn prepare(plan: &ExperimentPlan) -> Result<PreparedPlan, RunError> {
    let corpus = load_corpus(&plan.dataset.root, plan.dataset.layout)?;
    let snippets = sample_snippets(&corpus, plan.sampling.per_language, plan.sampling.seed)?;
    let snippets = SnippetSet {
        dataset: snippets.dataset,
        snippets: snippets
            .snippets
            .into_iter()
            .filter(|s| plan.targets.contains_key(&s.language))
            .collect(),
    };
    let tasks = enumerate_tasks(&snippets, &plan.targets)?;
    Ok(PreparedPlan {
        load_report: corpus.report,
        snippets,
        tasks,
    })
}

/// Everything a run needs besides the plan.
pub struct Engine {
    pub client: ModelClient,
    pub judge: Judge,
    pub renderer: PromptRenderer,
    pub parsers: ParserRegistry,
}

impl Engine {
    /// Builds the client, judge (probing toolchains) and renderer a plan asks for.
    pub fn from_plan(plan: &ExperimentPlan, transport: Arc<dyn Transport>) -> Result<Engine, RunError> {
        let cache = plan.cache_dir.as_ref().map(ResponseCache::new);
        let client = ModelClient::new(transport, cache, plan.mode, plan.max_in_flight)
            .map_err(|e| RunError::Validation(e.to_string()))?;
        let judge = Judge::new(
            plan.effective_toolchains(),
            plan.limits.clone(),
            plan.sandbox_root.clone(),
        )
        .map_err(|e| match e {
            JudgeError::Infrastructure(m) => RunError::Infrastructure(m),
            other => RunError::Validation(other.to_string()),
        })?;
        let templates = match &plan.templates_dir {
            Some(dir) => TemplateSet::load_dir(dir),
            None => Ok(TemplateSet::bundled()),
        }
        .map_err(|e| RunError::Validation(e.to_string()))?;
        let bank = match &plan.exemplars_dir {
            Some(dir) => ExemplarBank::load_dir(dir),
            None => Ok(ExemplarBank::bundled()),
        }
        .map_err(|e| RunError::Validation(e.to_string()))?;
        Ok(Engine {
            client,
            judge,
            renderer: PromptRenderer::new(templates, bank),
            parsers: ParserRegistry::default(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Stop after writing this many new records (simulates an interrupted run).
    pub stop_after: Option<usize>,
    /// Attempts for infrastructure failures in the judge.
    pub infra_attempts: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            stop_after: None,
            infra_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub run_id: String,
    pub expected: usize,
    pub already_complete: usize,
    pub written: usize,
    pub incomplete: usize,
    pub interrupted: bool,
}

/// Appends timestamped lines to `log.txt` and mirrors them to tracing.
pub struct RunLog {
    file: Mutex<fs::File>,
}

impl RunLog {
    pub fn open(path: &Path) -> Result<RunLog, RunError> {
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        Ok(RunLog {
            file: Mutex::new(file),
        })
    }

    pub fn info(&self, msg: &str) {
        tracing::info!("{msg}");
        self.write("INFO", msg);
    }

    pub fn warn(&self, msg: &str) {
        tracing::warn!("{msg}");
        self.write("WARN", msg);
    }

    fn write(&self, level: &str, msg: &str) {
        let mut f = self.file.lock().unwrap();
        let _ = writeln!(f, "{} {level} {msg}", now_rfc3339());
    }
}

/// Plan plus what the records file says is already done.
#[derive(Debug)]
pub struct ResumeState {
    pub plan: ExperimentPlan,
    pub records: Vec<ExperimentRecord>,
    pub completed: BTreeSet<Triple>,
    pub truncated_tail: Option<String>,
    pub valid_len: u64,
}

/// Reads `plan.json` and `records.jsonl` of an existing run. A partial final
/// record line is ignored and reported in `truncated_tail`.
pub fn resume(run_id: &str, results_root: &Path) -> Result<ResumeState, RunError> {
    let dir = results_root.join(run_id);
    let plan_path = dir.join(PLAN_FILE);
    let text = fs::read_to_string(&plan_path).map_err(io_err(&plan_path))?;
    let plan: ExperimentPlan = serde_json::from_str(&text)
        .map_err(|e| RunError::Validation(format!("{}: {e}", plan_path.display())))?;
    let loaded = load_records(&dir.join(RECORDS_FILE))?;
    let completed = completed_triples(&loaded.records);
    Ok(ResumeState {
        plan,
        records: loaded.records,
        completed,
        truncated_tail: loaded.truncated_tail,
        valid_len: loaded.valid_len,
    })
}

fn write_plan_file(plan: &ExperimentPlan, dir: &Path) -> Result<(), RunError> {
    let path = dir.join(PLAN_FILE);
    if path.exists() {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let existing: ExperimentPlan =
            serde_json::from_str(&text).map_err(|_| RunError::PlanMismatch { path: path.clone() })?;
        if existing.identity() != plan.identity() {
            return Err(RunError::PlanMismatch { path });
        }
        return Ok(());
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    let mut body = serde_json::to_string_pretty(plan).expect("plan serializes");
    body.push('\n');
    tmp.write_all(body.as_bytes()).map_err(io_err(&path))?;
    tmp.persist(&path)
        .map_err(|e| RunError::Io {
            path: path.clone(),
            source: e.error,
        })?;
    Ok(())
}

enum Outcome {
    Record(Box<ExperimentRecord>),
    Fatal(RunError),
}

/// Executes every pending unit of `plan`, appending records under
/// `results_root/<run_id>/`. Already-complete units are skipped.
pub fn run_experiment(
    plan: &ExperimentPlan,
    results_root: &Path,
    engine: &Engine,
    opts: &RunOptions,
) -> Result<RunSummary, RunError> {
    plan.validate()?;
    let prepared = prepare(plan)?;
    let dir = plan.run_dir(results_root);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_plan_file(plan, &dir)?;
    let log = RunLog::open(&dir.join(LOG_FILE))?;

    let loaded = load_records(&dir.join(RECORDS_FILE))?;
    if let Some(tail) = &loaded.truncated_tail {
        log.warn(&format!(
            "ignored partial final record line ({} bytes)",
            tail.len()
        ));
    }
    for s in &prepared.load_report.skipped {
        log.info(&format!("skipped {}: {}", s.path.display(), s.reason));
    }
    let completed = completed_triples(&loaded.records);
    let units = prepared.units(plan);
    let expected = units.len();
    let pending: Vec<Triple> = units
        .into_iter()
        .filter(|u| !completed.contains(u))
        .collect();
    let already_complete = expected - pending.len();
    log.info(&format!(
        "run {} mode={} units={expected} complete={already_complete} pending={}",
        plan.run_id,
        plan.mode,
        pending.len()
    ));

    let mut writer = RecordWriter::open(&dir.join(RECORDS_FILE), loaded.valid_len)?;
    let models: BTreeMap<&str, &ModelConfig> = plan
        .models
        .iter()
        .map(|m| (m.model_id.as_str(), m))
        .collect();

    let next = AtomicUsize::new(0);
    let cancel = AtomicBool::new(false);
    let mut written = 0;
    let mut incomplete = 0;
    let mut interrupted = false;
    let mut fatal: Option<RunError> = None;

    std::thread::scope(|scope| -> Result<(), RunError> {
        let (tx, rx) = mpsc::sync_channel::<Outcome>(plan.workers * 2);
        for _ in 0..plan.workers.min(pending.len()) {
            let tx = tx.clone();
            let (next, cancel, pending, prepared, models, log) =
                (&next, &cancel, &pending, &prepared, &models, &log);
            scope.spawn(move || loop {
                if cancel.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(unit) = pending.get(i) else { break };
                let model = models[unit.model_id.as_str()];
                let outcome = execute_unit(plan, prepared, engine, model, unit, opts, log);
                if tx.send(outcome).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for outcome in rx {
            if interrupted || fatal.is_some() {
                continue;
            }
            match outcome {
                Outcome::Record(rec) => {
                    writer.append(&rec)?;
                    written += 1;
                    if !rec.is_complete() {
                        incomplete += 1;
                    }
                    if opts.stop_after.is_some_and(|n| written >= n) {
                        interrupted = true;
                        cancel.store(true, Ordering::SeqCst);
                    }
                }
                Outcome::Fatal(e) => {
                    log.warn(&format!("aborting: {e}"));
                    fatal = Some(e);
                    cancel.store(true, Ordering::SeqCst);
                }
            }
        }
        Ok(())
    })?;

    if let Some(e) = fatal {
        return Err(e);
    }
    log.info(&format!(
        "run {} wrote {written} records ({incomplete} incomplete){}",
        plan.run_id,
        if interrupted { ", stopped early" } else { "" }
    ));
    Ok(RunSummary {
        run_id: plan.run_id.clone(),
        expected,
        already_complete,
        written,
        incomplete,
        interrupted,
    })
}

fn execute_unit(
    plan: &ExperimentPlan,
    prepared: &PreparedPlan,
    engine: &Engine,
    model: &ModelConfig,
    unit: &Triple,
    opts: &RunOptions,
    log: &RunLog,
) -> Outcome {
    let mut record = ExperimentRecord {
        v: RECORD_VERSION,
        run_id: plan.run_id.clone(),
        task: unit.task.clone(),
        strategy: unit.strategy.clone(),
        model_id: unit.model_id.clone(),
        stages: Vec::new(),
        candidate: None,
        verdict: None,
        status: RecordStatus::Incomplete,
        error: None,
        judge_wall_ms: 0,
        created_at: String::new(),
    };
    let label = format!("{} {} {}", unit.task, unit.strategy, unit.model_id);
    let fail = |mut record: ExperimentRecord, msg: String| {
        log.warn(&format!("incomplete {label}: {msg}"));
        record.error = Some(msg);
        record.created_at = now_rfc3339();
        Outcome::Record(Box::new(record))
    };

    let Some(snippet) = prepared.snippets.resolve(&unit.task) else {
        return fail(record, "snippet not in sample".into());
    };
    let local_ast = if PromptRenderer::needs_local_ast(&unit.strategy) {
        match engine
            .parsers
            .extract_ast(&snippet.source, snippet.language, &plan.parser)
        {
            Ok(ast) => Some(ast),
            Err(e) => return fail(record, format!("ast: {e}")),
        }
    } else {
        None
    };
    let prompt_plan = match engine.renderer.render(
        &unit.strategy,
        &unit.task,
        &snippet.source,
        local_ast.as_ref(),
    ) {
        Ok(p) => p,
        Err(e) => return fail(record, format!("render: {e}")),
    };

    let live = engine.client.mode() == Mode::Live;
    let mut previous: Option<String> = None;
    for stage in &prompt_plan.stages {
        let prompt = match &previous {
            None => stage.rendered_text.clone(),
            Some(payload) => stage.with_ir_payload(payload),
        };
        let start = Instant::now();
        let response = match engine.client.complete(model, &prompt) {
            Ok(r) => r,
            Err(ModelError::CacheMiss { digest }) => {
                return Outcome::Fatal(RunError::CacheMiss {
                    unit: label.clone(),
                    digest,
                })
            }
            Err(e) => return fail(record, format!("model: {e}")),
        };
        record.stages.push(StageRecord {
            template_id: stage.template_id.clone(),
            prompt_digest: sha256_hex(&prompt),
            response_digest: response.digest.clone(),
            response_text: live.then(|| response.text.clone()),
            wall_ms: start.elapsed().as_millis() as u64,
        });
        previous = Some(response.text);
    }

    let raw = previous.unwrap_or_default();
    let candidate = extract_code(&raw, unit.task.target_lang);
    let start = Instant::now();
    let mut attempt = 0;
    let verdict: Verdict = loop {
        attempt += 1;
        match engine
            .judge
            .judge(&candidate.text, unit.task.target_lang, &snippet.tests)
        {
            Ok(v) => break v,
            Err(e) if attempt < opts.infra_attempts.max(1) => {
                log.warn(&format!("retrying judge for {label}: {e}"));
            }
            Err(e) => {
                record.candidate = Some(CandidateRecord {
                    code: candidate.text,
                    extraction_path: candidate.extraction_path,
                    rules_applied: candidate.rules_applied,
                });
                return fail(record, format!("judge: {e}"));
            }
        }
    };
    record.judge_wall_ms = start.elapsed().as_millis() as u64;
    if !verdict.is_success() {
        log.info(&format!(
            "{label}: {} {}",
            verdict.kind,
            verdict.detail.lines().next().unwrap_or("")
        ));
    }
    record.candidate = Some(CandidateRecord {
        code: candidate.text,
        extraction_path: candidate.extraction_path,
        rules_applied: candidate.rules_applied,
    });
    record.verdict = Some(VerdictRecord {
        kind: verdict.kind,
        detail_digest: sha256_hex(&verdict.detail),
        failing_test: verdict.failing_test,
    });
    record.status = RecordStatus::Complete;
    record.created_at = now_rfc3339();
    Outcome::Record(Box::new(record))
}

/// Re-judges stored candidates with `judge`, e.g. after a limits change.
/// Returns one record per triple; records without a candidate pass through.
pub fn rejudge(
    prepared: &PreparedPlan,
    records: Vec<ExperimentRecord>,
    judge: &Judge,
) -> Result<Vec<ExperimentRecord>, RunError> {
    let mut out = Vec::new();
    for mut rec in latest_per_triple(records) {
        let (Some(candidate), Some(snippet)) =
            (rec.candidate.as_ref(), prepared.snippets.resolve(&rec.task))
        else {
            out.push(rec);
            continue;
        };
        let start = Instant::now();
        let verdict = judge
            .judge(&candidate.code, rec.task.target_lang, &snippet.tests)
            .map_err(|e| RunError::Infrastructure(e.to_string()))?;
        rec.judge_wall_ms = start.elapsed().as_millis() as u64;
        rec.verdict = Some(VerdictRecord {
            kind: verdict.kind,
            detail_digest: sha256_hex(&verdict.detail),
            failing_test: verdict.failing_test,
        });
        rec.status = RecordStatus::Complete;
        rec.error = None;
        rec.created_at = now_rfc3339();
        out.push(rec);
    }
    Ok(out)
}

/// Reads a plan from TOML (or JSON for `.json` files). Relative paths in the
/// plan are resolved against the file's directory.
pub fn load_plan(path: &Path) -> Result<ExperimentPlan, RunError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |e: String| RunError::Validation(format!("{}: {e}", path.display()));
    let mut plan: ExperimentPlan = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))?
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    resolve(&mut plan.dataset.root);
    for p in [
        &mut plan.cache_dir,
        &mut plan.templates_dir,
        &mut plan.exemplars_dir,
        &mut plan.sandbox_root,
    ]
    .into_iter()
    .flatten()
    {
        resolve(p);
    }
    Ok(plan)
}
