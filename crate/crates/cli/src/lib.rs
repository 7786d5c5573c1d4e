//! The `qep` command line: narrate plans, ask questions, validate the
//! shipped data and run the HTTP service.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 environment
//! error (database, TTS or data files).

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use qep_core::answer_generator::PipelineError;
use qep_core::definition_index::{build_index, parse_corpus, tokens};
use qep_core::lexicon::Lexicon;
use qep_core::plan_ingest::{fetch_plan_text, DatabaseConnection, DEFAULT_STATEMENT_TIMEOUT};
use qep_core::question_processor::{cross_validate, train_classifier, DEFAULT_ALPHA};
use qep_core::{
    IngestError, InvertedIndex, NBModel, NarrateResponse, PlanContext, PlanSource, QaEngine, QuestionCategory,
    TemplateSet, TrainingSet, TtsConfig,
};
use qep_service::{ServiceConfig, DEFAULT_PORT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ENV: i32 = 3;

pub const ENV_TEMPLATES: &str = "NEURON_TEMPLATES";
pub const ENV_CORPUS: &str = "NEURON_CORPUS";
pub const ENV_TRAINING: &str = "NEURON_TRAINING";

#[derive(Parser, Debug)]
#[command(name = "qep", version, about = "Narrate PostgreSQL query plans and answer questions about them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the numbered steps of a plan
    Narrate {
        #[command(flatten)]
        plan: PlanArgs,
        /// Print the same JSON document the HTTP service returns
        #[arg(long)]
        json: bool,
    },
    /// Answer one question about a plan
    Ask {
        #[command(flatten)]
        plan: PlanArgs,
        question: String,
        /// Directory for a cached classifier model
        #[arg(long, value_name = "DIR")]
        model_cache: Option<PathBuf>,
    },
    /// Run the HTTP service
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// UI assets served under /
        #[arg(long, value_name = "DIR")]
        static_dir: Option<PathBuf>,
        /// Allowed CORS origin; repeat for several (default: any)
        #[arg(long = "cors-origin", value_name = "ORIGIN")]
        cors_origins: Vec<String>,
        /// Idle minutes before a session expires
        #[arg(long, default_value_t = 30)]
        session_ttl_mins: u64,
    },
    /// Checks on the definition corpus and training questions
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Subcommand, Debug)]
enum CorpusAction {
    /// Validate the corpus, training file and templates
    Validate,
}

#[derive(Args, Debug)]
struct PlanArgs {
    /// EXPLAIN (FORMAT JSON) output to read
    #[arg(long, value_name = "FILE", conflicts_with_all = ["dsn", "sql"])]
    file: Option<PathBuf>,
    /// PostgreSQL connection string
    #[arg(long, requires = "sql")]
    dsn: Option<String>,
    /// Statement to EXPLAIN
    #[arg(long, requires = "dsn")]
    sql: Option<String>,
    /// EXPLAIN without ANALYZE (no runtime statistics)
    #[arg(long)]
    no_analyze: bool,
    /// Statement timeout in seconds for live plans
    #[arg(long, value_name = "SECS")]
    timeout: Option<u64>,
}

/// A failure with its exit code and the message printed to stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn env(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_ENV,
            message: message.into(),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::ConnectionFailure(_) => Failure::env(e.to_string()),
            _ => Failure::input(e.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Ingest(e) => e.into(),
            PipelineError::Tree(e) => Failure::input(e.to_string()),
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "qep: {}", f.message);
            f.code
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    let write_err = |e: std::io::Error| Failure::env(format!("cannot write output: {e}"));
    match command {
        Command::Narrate { plan, json } => {
            let templates = load_templates()?;
            let ctx = load_plan(&plan, &templates)?;
            let text = if json {
                NarrateResponse::new(&ctx).to_body()
            } else {
                ctx.script.to_text()
            };
            out.write_all(text.as_bytes()).map_err(write_err)
        }
        Command::Ask {
            plan,
            question,
            model_cache,
        } => {
            let engine = load_engine(model_cache.as_deref())?;
            let ctx = load_plan(&plan, &engine.templates)?;
            match engine.reply(&question, &ctx) {
                Ok(answer) => writeln!(out, "{}", answer.text).map_err(write_err),
                Err((_, text, _)) => Err(Failure::input(text)),
            }
        }
        Command::Serve {
            port,
            host,
            static_dir,
            cors_origins,
            session_ttl_mins,
        } => {
            let _ = tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
                )
                .with_writer(std::io::stderr)
                .try_init();
            let engine = load_engine(None)?;
            let config = ServiceConfig {
                session_ttl: Duration::from_secs(session_ttl_mins.max(1) * 60),
                statement_timeout: DEFAULT_STATEMENT_TIMEOUT,
                tts: TtsConfig::from_env(),
                cors_origins,
                static_dir,
            };
            qep_service::serve_blocking(SocketAddr::new(host, port), engine, config)
                .map_err(|e| Failure::env(format!("server error: {e}")))
        }
        Command::Corpus {
            action: CorpusAction::Validate,
        } => validate(out),
    }
}

fn read_override(var: &str) -> Result<Option<String>, Failure> {
    match std::env::var_os(var) {
        Some(path) if !path.is_empty() => std::fs::read_to_string(&path)
            .map(Some)
            .map_err(|e| Failure::env(format!("{var}={}: {e}", Path::new(&path).display()))),
        _ => Ok(None),
    }
}

fn load_templates() -> Result<TemplateSet, Failure> {
    match read_override(ENV_TEMPLATES)? {
        Some(text) => TemplateSet::parse(&text).map_err(|e| Failure::env(format!("{ENV_TEMPLATES}: {e}"))),
        None => Ok(TemplateSet::shipped()),
    }
}

fn load_index() -> Result<InvertedIndex, Failure> {
    match read_override(ENV_CORPUS)? {
        Some(text) => parse_corpus(&text)
            .and_then(build_index)
            .map_err(|e| Failure::env(format!("{ENV_CORPUS}: {e}"))),
        None => Ok(InvertedIndex::shipped()),
    }
}

fn training_text() -> Result<Option<String>, Failure> {
    read_override(ENV_TRAINING)
}

fn load_training(text: Option<&str>) -> Result<TrainingSet, Failure> {
    match text {
        Some(text) => TrainingSet::parse(text).map_err(|e| Failure::env(format!("{ENV_TRAINING}: {e}"))),
        None => Ok(TrainingSet::shipped()),
    }
}

/// Trains the classifier, reusing a model cached under `cache` for the
/// same training text.
fn load_model(cache: Option<&Path>) -> Result<NBModel, Failure> {
    let text = training_text()?;
    let train = || {
        let data = load_training(text.as_deref())?;
        train_classifier(&data, DEFAULT_ALPHA).map_err(|e| Failure::env(format!("training: {e}")))
    };
    let Some(dir) = cache else { return train() };
    let source = text.as_deref().unwrap_or(qep_core::question_processor::DEFAULT_TRAINING);
    let digest = hex::encode(Sha256::digest(source.as_bytes()));
    let path = dir.join(format!("model-{}.json", &digest[..16]));
    if let Some(model) = std::fs::read(&path)
        .ok()
        .and_then(|b| serde_json::from_slice::<NBModel>(&b).ok())
    {
        return Ok(model);
    }
    let model = train()?;
    let json = serde_json::to_vec(&model).expect("model serializes");
    std::fs::create_dir_all(dir)
        .and_then(|()| std::fs::write(&path, json))
        .map_err(|e| Failure::env(format!("model cache {}: {e}", path.display())))?;
    Ok(model)
}

fn load_engine(model_cache: Option<&Path>) -> Result<QaEngine, Failure> {
    Ok(QaEngine::new(load_model(model_cache)?, load_index()?, load_templates()?))
}

fn load_plan(args: &PlanArgs, templates: &TemplateSet) -> Result<PlanContext, Failure> {
    if let Some(path) = &args.file {
        let bytes = std::fs::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Failure::input(format!("{}: not UTF-8 text", path.display())))?;
        return Ok(PlanContext::from_json_text(text, PlanSource::File, templates)?);
    }
    let (Some(dsn), Some(sql)) = (&args.dsn, &args.sql) else {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "give --file, or --dsn with --sql".into(),
        });
    };
    let timeout = args.timeout.map_or(DEFAULT_STATEMENT_TIMEOUT, Duration::from_secs);
    let mut conn = DatabaseConnection::connect(dsn)?.with_statement_timeout(timeout);
    let text = fetch_plan_text(&mut conn, sql, !args.no_analyze)?;
    Ok(PlanContext::from_json_text(text, PlanSource::LiveDatabase, templates)?)
}

fn validate(out: &mut dyn Write) -> Result<(), Failure> {
    let mut problems = Vec::new();
    let templates = load_templates()?;
    let index = load_index()?;
    let lex = Lexicon::shipped();
    for doc in index.docs() {
        let mut query: Vec<String> = Vec::new();
        for t in tokens(&doc.term, lex) {
            if !query.contains(&t) {
                query.push(t);
            }
        }
        let ranked = index.search(&query);
        let top = ranked.first().map_or(0.0, |r| r.1);
        let own = ranked.iter().find(|(id, _)| *id == doc.doc_id).map(|r| r.1);
        if own != Some(top) || top == 0.0 {
            problems.push(format!("corpus entry \"{}\" does not rank first for its own term", doc.term));
        }
    }
    let text = training_text()?;
    let data = load_training(text.as_deref())?;
    for c in QuestionCategory::ALL {
        if data.count(c) == 0 {
            problems.push(format!("no training questions for category {c}"));
        }
    }
    let accuracy = if problems.is_empty() {
        cross_validate(&data, 5, DEFAULT_ALPHA).map_err(|e| Failure::input(e.to_string()))?
    } else {
        0.0
    };
    let report = format!(
        "templates: {} entries\ncorpus: {} entries\ntraining: {} questions, 5-fold accuracy {:.3}\n",
        templates.len(),
        index.docs().len(),
        data.examples.len(),
        accuracy
    );
    out.write_all(report.as_bytes())
        .map_err(|e| Failure::env(e.to_string()))?;
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::input(problems.join("\n")))
    }
}
