use clap::{Args, Parser, Subcommand};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use transbench::corpus::{load_corpus, Layout};
use transbench::ir::{ParserRegistry, BUILTIN_PARSER_ID};
use transbench::judge::{probe_toolchains, Toolchain};
use transbench::model::{
    CacheKey, HttpTransport, Mode, OfflineTransport, ResponseCache, Transport,
};
use transbench::orchestrator::{
    self, latest_per_triple, load_plan, load_records, prepare, resume, run_experiment,
    Engine, ExperimentPlan, RecordWriter, RunError, RunOptions, RECORDS_FILE,
};
use transbench::postprocess::extract_code;
use transbench::prompt::PromptStrategy;
use transbench::report::{self, Aggregation, Format};
use transbench::Language;

#[derive(Parser)]
#[command(name = "transbench", version, about = "LLM code translation experiment harness")]
struct Cli {
    /// Experiment plan (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads, overriding the plan.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// live, replay or record, overriding the plan.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ResultsArg {
    /// Directory holding one subdirectory per run.
    #[arg(long, default_value = "runs")]
    results: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and print snippet counts.
    Ingest {
        root: PathBuf,
        #[arg(long, default_value = "flat-v1")]
        layout: String,
    },
    /// Validate the plan, write plan.json and print task counts.
    Plan {
        #[command(flatten)]
        results: ResultsArg,
    },
    /// Execute the plan, resuming any earlier progress.
    Run {
        #[command(flatten)]
        results: ResultsArg,
        /// Resume this run from its stored plan instead of --config.
        #[arg(long)]
        resume: Option<String>,
        /// Stop after writing this many new records.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Re-judge stored candidates with the current limits and toolchains.
    Judge {
        #[command(flatten)]
        results: ResultsArg,
        run_id: String,
        /// Output file; defaults to records.rejudged.jsonl in the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        strict_compare: bool,
    },
    /// Aggregate records into success-rate tables.
    Report {
        /// records.jsonl files or run directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "model_id,strategy,dataset")]
        group_by: String,
        #[arg(long, default_value = "micro")]
        aggregation: String,
        #[arg(long, default_value = "markdown")]
        format: String,
        /// Add a delta column against this strategy.
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Intermediate-representation tools.
    Ir {
        #[command(subcommand)]
        command: IrCommand,
    },
    /// Extract the candidate program from a model response.
    Postprocess {
        #[arg(long)]
        lang: Language,
        /// Response file, or `-` for stdin.
        file: PathBuf,
    },
    /// Report which toolchains are installed.
    Probe,
    /// Response cache tools.
    Cache {
        #[command(subcommand)]
        command: CacheCommand,
    },
}

#[derive(Subcommand)]
enum IrCommand {
    /// Print the flattened AST of a source file.
    Extract {
        #[arg(long)]
        lang: Language,
        #[arg(long, default_value = BUILTIN_PARSER_ID)]
        parser: String,
        file: PathBuf,
    },
}

#[derive(Subcommand)]
enum CacheCommand {
    /// List entries, or print one entry.
    Inspect { dir: PathBuf, key: Option<String> },
    /// Check that every entry hashes to its file name.
    Verify { dir: PathBuf },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn validation(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

fn infra(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("TRANSBENCH_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn plan_from_cli(cli: &Cli) -> Result<ExperimentPlan, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| validation("--config <file> is required"))?;
    let mut plan = load_plan(path)?;
    apply_overrides(cli, &mut plan);
    Ok(plan)
}

fn apply_overrides(cli: &Cli, plan: &mut ExperimentPlan) {
    if let Some(w) = cli.workers {
        plan.workers = w;
    }
    if let Some(m) = cli.mode {
        plan.mode = m;
    }
}

fn transport_for(mode: Mode) -> Arc<dyn Transport> {
    match mode {
        Mode::Replay => Arc::new(OfflineTransport::default()),
        Mode::Live | Mode::Record => Arc::new(HttpTransport),
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| infra(format!("stdin: {e}")))?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Ingest { root, layout } => {
            let layout: Layout = layout.parse().map_err(validation)?;
            let corpus = load_corpus(root, layout).map_err(validation)?;
            println!("dataset {}", corpus.dataset);
            for (lang, n) in corpus.count_by_language() {
                println!("{lang}\t{n}");
            }
            for s in &corpus.report.skipped {
                println!("skipped {}: {}", s.path.display(), s.reason);
            }
            Ok(())
        }
        Command::Plan { results } => {
            let plan = plan_from_cli(&cli)?;
            plan.validate()?;
            let prepared = prepare(&plan)?;
            let dir = plan.run_dir(&results.results);
            std::fs::create_dir_all(&dir).map_err(|e| infra(format!("{}: {e}", dir.display())))?;
            let path = dir.join(orchestrator::PLAN_FILE);
            let body = serde_json::to_string_pretty(&plan).expect("plan serializes");
            std::fs::write(&path, body + "\n")
                .map_err(|e| infra(format!("{}: {e}", path.display())))?;
            let calls: usize = prepared.tasks.len()
                * plan.models.len()
                * plan.strategies.iter().map(|s| s.stage_count()).sum::<usize>();
            println!("plan      {}", path.display());
            println!("snippets  {}", prepared.snippets.len());
            println!("tasks     {}", prepared.tasks.len());
            println!("units     {}", prepared.unit_count(&plan));
            println!("calls     {calls}");
            Ok(())
        }
        Command::Run {
            results,
            resume: resume_id,
            stop_after,
        } => {
            let plan = match resume_id {
                Some(id) => {
                    let mut plan = resume(id, &results.results)?.plan;
                    apply_overrides(&cli, &mut plan);
                    plan
                }
                None => plan_from_cli(&cli)?,
            };
            plan.validate()?;
            let engine = Engine::from_plan(&plan, transport_for(plan.mode))?;
            let opts = RunOptions {
                stop_after: *stop_after,
                ..RunOptions::default()
            };
            let summary = run_experiment(&plan, &results.results, &engine, &opts)?;
            println!(
                "run {}: {} units, {} already complete, {} written ({} incomplete), {} model calls{}",
                summary.run_id,
                summary.expected,
                summary.already_complete,
                summary.written,
                summary.incomplete,
                engine.client.call_count(),
                if summary.interrupted { ", stopped early" } else { "" }
            );
            Ok(())
        }
        Command::Judge {
            results,
            run_id,
            out,
            strict_compare,
        } => {
            let state = resume(run_id, &results.results)?;
            let mut plan = state.plan;
            if let Some(cfg) = &cli.config {
                let fresh = load_plan(cfg)?;
                plan.limits = fresh.limits;
                plan.toolchains = fresh.toolchains;
            }
            plan.limits.strict_compare |= strict_compare;
            let prepared = prepare(&plan)?;
            let judge = transbench::judge::Judge::new(
                plan.effective_toolchains(),
                plan.limits.clone(),
                plan.sandbox_root.clone(),
            )
            .map_err(validation)?;
            let rejudged = orchestrator::rejudge(&prepared, state.records, &judge)?;
            let out = out
                .clone()
                .unwrap_or_else(|| plan.run_dir(&results.results).join("records.rejudged.jsonl"));
            if out.exists() {
                std::fs::remove_file(&out).map_err(|e| infra(format!("{}: {e}", out.display())))?;
            }
            let mut w = RecordWriter::open(&out, 0).map_err(infra)?;
            for r in &rejudged {
                w.append(r).map_err(infra)?;
            }
            println!("re-judged {} records into {}", rejudged.len(), out.display());
            Ok(())
        }
        Command::Report {
            inputs,
            group_by,
            aggregation,
            format,
            baseline,
            out,
        } => {
            let fields = report::parse_group_spec(group_by).map_err(validation)?;
            let aggregation: Aggregation = aggregation.parse().map_err(validation)?;
            let format: Format = format.parse().map_err(validation)?;
            let mut records = Vec::new();
            for input in inputs {
                let path = if input.is_dir() {
                    input.join(RECORDS_FILE)
                } else {
                    input.clone()
                };
                let loaded = load_records(&path).map_err(validation)?;
                if loaded.truncated_tail.is_some() {
                    eprintln!("warning: ignored partial final line in {}", path.display());
                }
                records.extend(loaded.records);
            }
            let records = latest_per_triple(records);
            let mut table =
                report::success_rate(&records, &fields, aggregation).map_err(validation)?;
            if let Some(b) = baseline {
                let b: PromptStrategy = b.parse().map_err(validation)?;
                table = report::delta_vs_baseline(table, &b).map_err(validation)?;
            }
            match out {
                Some(path) => report::emit_to_file(&table, format, path).map_err(infra)?,
                None => print!("{}", report::emit(&table, format)),
            }
            Ok(())
        }
        Command::Ir {
            command: IrCommand::Extract { lang, parser, file },
        } => {
            let source = read_input(file)?;
            let ast = ParserRegistry::default()
                .extract_ast(&source, *lang, parser)
                .map_err(validation)?;
            println!("{}", ast.text);
            Ok(())
        }
        Command::Postprocess { lang, file } => {
            let raw = read_input(file)?;
            let candidate = extract_code(&raw, *lang);
            eprintln!(
                "extraction: {:?}; rules: {:?}",
                candidate.extraction_path, candidate.rules_applied
            );
            print!("{}", candidate.text);
            Ok(())
        }
        Command::Probe => {
            let toolchains = match &cli.config {
                Some(_) => plan_from_cli(&cli)?.effective_toolchains(),
                None => Toolchain::defaults(),
            };
            for (lang, version) in probe_toolchains(&toolchains) {
                match version {
                    Some(v) => println!("{lang}\tavailable\t{v}"),
                    None => println!("{lang}\tmissing"),
                }
            }
            Ok(())
        }
        Command::Cache { command } => match command {
            CacheCommand::Inspect { dir, key } => {
                let cache = ResponseCache::new(dir);
                match key {
                    None => {
                        for k in cache.keys().map_err(infra)? {
                            println!("{k}");
                        }
                    }
                    Some(k) => {
                        let key = CacheKey::parse(k)
                            .ok_or_else(|| validation(format!("`{k}` is not a cache key")))?;
                        let entry = cache
                            .get(&key)
                            .map_err(infra)?
                            .ok_or_else(|| validation(format!("no entry {key}")))?;
                        println!(
                            "{}",
                            serde_json::to_string_pretty(&entry).expect("entry serializes")
                        );
                    }
                }
                Ok(())
            }
            CacheCommand::Verify { dir } => {
                let cache = ResponseCache::new(dir);
                let bad = cache.verify().map_err(infra)?;
                let total = cache.keys().map_err(infra)?.len();
                for (k, why) in &bad {
                    println!("bad {k}: {why}");
                }
                println!("{} entries, {} bad", total, bad.len());
                if bad.is_empty() {
                    Ok(())
                } else {
                    Err(validation("cache verification failed"))
                }
            }
        },
    }
}
