//! Operator CLI: data ingestion, single-question runs, batch Hits@1
//! evaluation, and memory inspection. Thin glue over the library; see the
//! crate examples for programmatic use.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use tkgqa::config::{BackendKind, Config};
use tkgqa::controller::{Engine, SharedPool};
use tkgqa::embedding::{Embedder, HashEmbedder, HttpEmbedder};
use tkgqa::eval::{load_questions, run_eval};
use tkgqa::memory::{ExperienceDraft, ExperiencePool};
use tkgqa::reasoner::{HttpBackend, RawBackend, Reasoner, ScriptedBackend};
use tkgqa::store::Tkg;
use tkgqa::trace::build_trace;

#[derive(Parser)]
#[command(name = "tkgqa", about = "Temporal knowledge-graph question answering")]
struct Cli {
    /// TSV quadruple file.
    #[arg(long, global = true)]
    tkg: Option<PathBuf>,
    /// Relation alias file (relation<TAB>alias).
    #[arg(long, global = true)]
    aliases: Option<PathBuf>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Experience memory JSONL file (loaded if present, persisted after runs).
    #[arg(long, global = true)]
    memory: Option<PathBuf>,
    /// Reasoner backend.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    /// Scripted-backend rules file.
    #[arg(long, global = true)]
    script: Option<PathBuf>,
    /// Chat-completion endpoint for the http backend.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Model name for the http backend.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Write the trace JSON here.
    #[arg(long, global = true)]
    trace_out: Option<PathBuf>,
    /// Cold-start exemplar JSONL merged into memory before running.
    #[arg(long, global = true)]
    seed_fixture: Option<PathBuf>,
    /// Ablation: answer on a single-node tree (no decomposition).
    #[arg(long, global = true)]
    no_tree: bool,
    /// Ablation: bypass the experience memory entirely.
    #[arg(long, global = true)]
    no_memory: bool,
    /// Ablation: disable graph-based path expansion.
    #[arg(long, global = true)]
    no_graph_retrieval: bool,
    /// Ablation: disable embedding-based fact retrieval.
    #[arg(long, global = true)]
    no_embed_retrieval: bool,
    /// Worker threads for eval.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Scripted,
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Load a TSV quadruple file and print index statistics.
    Ingest,
    /// Answer one question end to end.
    Ask { question: String },
    /// Run a JSONL question file and report Hits@1.
    Eval {
        questions: PathBuf,
        /// Write the full JSON report here.
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
    /// Inspect or compact the experience memory.
    Memory {
        #[command(subcommand)]
        action: MemoryAction,
    },
}

#[derive(Subcommand)]
enum MemoryAction {
    /// Print records (id, kind, type, hits).
    List,
    /// Print buffer occupancy and the type histogram.
    Stats,
    /// Run one adaptation round and persist.
    Compact,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type AnyError = Box<dyn std::error::Error>;

fn run(cli: Cli) -> Result<(), AnyError> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    config.ablations.no_tree |= cli.no_tree;
    config.ablations.no_memory |= cli.no_memory;
    config.ablations.no_graph_retrieval |= cli.no_graph_retrieval;
    config.ablations.no_embed_retrieval |= cli.no_embed_retrieval;
    if let Some(b) = cli.backend {
        config.backend.kind = match b {
            BackendArg::Scripted => BackendKind::Scripted,
            BackendArg::Http => BackendKind::Http,
        };
    }
    if let Some(s) = &cli.script {
        config.backend.rules = Some(s.clone());
    }
    if let Some(e) = &cli.endpoint {
        config.backend.endpoint = Some(e.clone());
    }
    if let Some(m) = &cli.model {
        config.backend.model = Some(m.clone());
    }
    if let Some(t) = &cli.tkg {
        config.paths.tkg = Some(t.clone());
    }
    if let Some(a) = &cli.aliases {
        config.paths.aliases = Some(a.clone());
    }
    if let Some(m) = &cli.memory {
        config.paths.memory = Some(m.clone());
    }

    match &cli.command {
        Command::Ingest => cmd_ingest(&config),
        Command::Ask { question } => cmd_ask(&cli, &config, question),
        Command::Eval { questions, report_out } => {
            cmd_eval(&cli, &config, questions, report_out.as_deref())
        }
        Command::Memory { action } => cmd_memory(&config, action),
    }
}

fn load_tkg(config: &Config) -> Result<Tkg, AnyError> {
    let path = config
        .paths
        .tkg
        .as_ref()
        .ok_or("no TKG file: pass --tkg or set paths.tkg in the config")?;
    let mut tkg = Tkg::load_tsv(BufReader::new(File::open(path)?))?;
    if let Some(aliases) = &config.paths.aliases {
        tkg.load_aliases(BufReader::new(File::open(aliases)?))?;
    }
    Ok(tkg)
}

fn build_embedder(config: &Config) -> Arc<dyn Embedder> {
    match &config.embedding.endpoint {
        Some(url) => Arc::new(HttpEmbedder::new(url.clone(), config.embedding.dimension)),
        None => Arc::new(HashEmbedder),
    }
}

fn build_backend(config: &Config) -> Result<Arc<dyn RawBackend>, AnyError> {
    match config.backend.kind {
        BackendKind::Scripted => Ok(match &config.backend.rules {
            Some(path) => Arc::new(ScriptedBackend::from_rules_file(path)?),
            None => Arc::new(ScriptedBackend::fallback_only()),
        }),
        BackendKind::Http => {
            let endpoint = std::env::var("TKGQA_ENDPOINT")
                .ok()
                .or_else(|| config.backend.endpoint.clone())
                .ok_or("http backend needs --endpoint or TKGQA_ENDPOINT")?;
            let model = config.backend.model.clone().unwrap_or_else(|| "default".to_string());
            Ok(Arc::new(HttpBackend::with_config(endpoint, model, &config.backend)))
        }
    }
}

fn load_pool(cli: &Cli, config: &Config, embedder: Arc<dyn Embedder>) -> Result<SharedPool, AnyError> {
    let mut pool = match &config.paths.memory {
        Some(path) if path.exists() => ExperiencePool::load(
            BufReader::new(File::open(path)?),
            config.memory.clone(),
            embedder.clone(),
        )?,
        _ => ExperiencePool::new(config.memory.clone(), embedder.clone()),
    };
    let cold = cli.seed_fixture.clone().or_else(|| config.paths.cold_start.clone());
    if let Some(path) = cold {
        if path.exists() {
            let seeded = ExperiencePool::load(
                BufReader::new(File::open(&path)?),
                config.memory.clone(),
                embedder,
            )?;
            for r in seeded.records() {
                pool.write_back(ExperienceDraft {
                    kind: r.kind,
                    question_text: r.question_text.clone(),
                    indicator_text: r.indicator_text.clone(),
                    primary_type: r.primary_type,
                    payload: r.payload.clone(),
                    outcome: r.outcome,
                });
            }
        }
    }
    Ok(SharedPool::new(pool))
}

fn persist_pool(config: &Config, pool: &SharedPool) -> Result<(), AnyError> {
    if let Some(path) = &config.paths.memory {
        let mut file = File::create(path)?;
        pool.with(|p| p.persist(&mut file))?;
        file.flush()?;
    }
    Ok(())
}

fn cmd_ingest(config: &Config) -> Result<(), AnyError> {
    let tkg = load_tkg(config)?;
    let [years, months, days] = tkg.granularity_histogram();
    println!("entities:  {}", tkg.entity_count());
    println!("relations: {}", tkg.relation_count());
    println!("facts:     {}", tkg.facts().len());
    println!("granularity: year={years} month={months} day={days}");
    Ok(())
}

fn cmd_ask(cli: &Cli, config: &Config, question: &str) -> Result<(), AnyError> {
    let tkg = Arc::new(load_tkg(config)?);
    let embedder = build_embedder(config);
    let backend = build_backend(config)?;
    let pool = load_pool(cli, config, embedder.clone())?;
    let engine = Engine::new(tkg, embedder, config.clone());
    let reasoner = Reasoner::new(backend);

    let started = std::time::Instant::now();
    let (answer, trajectory) = engine.answer_question(question, &pool, &reasoner)?;
    let elapsed = started.elapsed().as_millis() as u64;

    println!("answer: {}", answer.values().join(", "));
    if !answer.sufficient {
        println!("note: evidence flagged insufficient; answer is best-effort");
    }
    println!("rationale: {}", answer.rationale);
    if let Some(out) = &cli.trace_out {
        let trace = build_trace(&trajectory, reasoner.backend_name(), config.ablations, Some(elapsed));
        std::fs::write(out, tkgqa::trace::to_canonical_string(&trace))?;
        println!("trace: {}", out.display());
    }
    persist_pool(config, &pool)?;
    Ok(())
}

fn cmd_eval(
    cli: &Cli,
    config: &Config,
    questions_path: &std::path::Path,
    report_out: Option<&std::path::Path>,
) -> Result<(), AnyError> {
    let questions = load_questions(BufReader::new(File::open(questions_path)?))?;
    let tkg = Arc::new(load_tkg(config)?);
    let embedder = build_embedder(config);
    let backend = build_backend(config)?;
    let pool = load_pool(cli, config, embedder.clone())?;
    let engine = Engine::new(tkg, embedder, config.clone());

    let report = run_eval(&engine, backend, &pool, &questions, cli.jobs);
    print!("{}", report.render());
    if let Some(out) = report_out {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    }
    if let Some(out) = &cli.trace_out {
        let traces: Vec<&serde_json::Value> =
            report.outcomes.iter().map(|o| &o.trace).collect();
        std::fs::write(out, serde_json::to_string_pretty(&traces)?)?;
    }
    persist_pool(config, &pool)?;
    Ok(())
}

fn cmd_memory(config: &Config, action: &MemoryAction) -> Result<(), AnyError> {
    let path = config
        .paths
        .memory
        .as_ref()
        .ok_or("no memory file: pass --memory")?;
    let embedder = build_embedder(config);
    if !path.exists() {
        return Err(format!("memory file {} does not exist", path.display()).into());
    }
    let mut pool = ExperiencePool::load(
        BufReader::new(File::open(path)?),
        config.memory.clone(),
        embedder,
    )?;
    match action {
        MemoryAction::List => {
            for r in pool.records() {
                println!(
                    "{:>6}  {:<10}  {:<12}  hits={:<4}  {}",
                    r.id,
                    format!("{:?}", r.kind),
                    r.primary_type.label(),
                    r.hit_count,
                    r.question_text
                );
            }
        }
        MemoryAction::Stats => {
            println!("records: {}", pool.len());
            println!(
                "buffer:  {}/{}",
                pool.buffer_len(),
                pool.config().buffer_capacity
            );
            let mut histogram = std::collections::BTreeMap::new();
            for r in pool.records() {
                *histogram.entry(r.primary_type.label()).or_insert(0usize) += 1;
            }
            for (t, n) in histogram {
                println!("  {t}: {n}");
            }
        }
        MemoryAction::Compact => {
            let decay = pool.config().decay;
            let min_keep = pool.config().min_keep;
            let pruned = pool.adapt(decay, min_keep);
            let mut file = File::create(path)?;
            pool.persist(&mut file)?;
            println!("pruned {pruned} buffer entries");
        }
    }
    Ok(())
}
