//! The `stexquiz` command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use stexquiz_core::prompt::{GenerationRequest, MasterPromptTemplate};
use stexquiz_core::question::{
    from_document, grade, ReviewStatus, StudentResponse, DEFAULT_POINTS,
};
use stexquiz_core::stex::SourceDocument;
use stexquiz_core::survey::{aggregate, parse_responses_jsonl, SurveyItem};
use stexquiz_core::validate::{validate_document, Verdict};
use stexquiz_gateway::{
    LiveBackend, LiveConfig, LlmBackend, RecordingBackend, ReplayBackend, ReplayStore,
    SessionOptions,
};

use crate::config::{BackendMode, PartialSettings, Settings};
use crate::service::{App, ReviewAction};
use crate::store::{Clock, Store};

#[derive(Debug, Parser)]
#[command(
    name = "stexquiz",
    version,
    about = "Generate, validate and review quiz questions grounded in sTeX course material"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML config file. Defaults to ./stexquiz.toml when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Record store directory.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Replay store directory.
    #[arg(long, global = true)]
    pub replay: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendMode>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub max_output_tokens: Option<u32>,
    /// Do not offer the search tool to the model.
    #[arg(long, global = true)]
    pub no_search_tool: bool,
    /// Prompt template file instead of the built-in one.
    #[arg(long, global = true)]
    pub template: Option<PathBuf>,
    /// Timestamp for stored records (RFC 3339) instead of the clock.
    #[arg(long, global = true)]
    pub fixed_time: Option<String>,
}

impl GlobalArgs {
    fn partial(&self) -> PartialSettings {
        PartialSettings {
            store: self.store.clone(),
            replay: self.replay.clone(),
            backend: self.backend,
            model: self.model.clone(),
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            search_tool: self.no_search_tool.then_some(false),
            listen: None,
            template: self.template.clone(),
            fixed_time: self.fixed_time.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a corpus manifest, build its knowledge graph and store it.
    Ingest { manifest: PathBuf },
    /// Look up symbols by name or URI substring.
    Symbols {
        #[arg(default_value = "")]
        query: String,
        #[arg(long)]
        corpus: Option<String>,
    },
    /// Run the generation pipeline for a request file.
    Generate {
        #[arg(long)]
        request: PathBuf,
        #[arg(long)]
        corpus: Option<String>,
    },
    /// Validate every problem in an sTeX file. Exits 1 if any fails.
    Validate {
        file: PathBuf,
        #[arg(long)]
        request: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<String>,
    },
    /// Grade a response (JSON, e.g. '{"selected":[0,2]}') against a stored
    /// draft or the first problem of a file.
    Grade {
        /// Draft id, or a .tex file with --file.
        target: String,
        #[arg(long)]
        response: String,
        #[arg(long)]
        file: bool,
    },
    /// List stored drafts.
    Drafts {
        #[arg(long)]
        status: Option<String>,
    },
    /// Accept, reject or edit a draft.
    Review {
        id: String,
        #[arg(long)]
        status: String,
        /// File with the edited problem, for status `edited`.
        #[arg(long)]
        edited: Option<PathBuf>,
    },
    #[command(subcommand)]
    Survey(SurveyCommand),
    /// Aggregate survey results, from the store or from files.
    Report {
        /// JSONL survey items (question_id, qtype, topic).
        #[arg(long, requires = "responses")]
        questions: Option<PathBuf>,
        /// JSONL expert responses.
        #[arg(long, requires = "questions")]
        responses: Option<PathBuf>,
        #[arg(long)]
        csv: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SurveyCommand {
    /// Print survey instruments as JSONL; all accepted or edited drafts
    /// when no id is given.
    Export { ids: Vec<String> },
    /// Store expert responses from a JSONL file.
    Import { responses: PathBuf },
}

/// Flags, then environment, then config file.
pub fn settings(global: &GlobalArgs, listen: Option<String>) -> anyhow::Result<Settings> {
    let env = PartialSettings::from_env(|k| std::env::var(k).ok())?;
    let file_path = global
        .config
        .clone()
        .or_else(|| std::env::var("STEXQUIZ_CONFIG").ok().map(PathBuf::from))
        .or_else(|| Some(PathBuf::from("stexquiz.toml")).filter(|p| p.exists()));
    let file = match file_path {
        Some(p) => PartialSettings::from_file(&p)?,
        None => PartialSettings::default(),
    };
    let mut flags = global.partial();
    flags.listen = listen;
    Ok(Settings::resolve(flags.or(env).or(file)))
}

pub fn backend(settings: &Settings) -> anyhow::Result<Arc<dyn LlmBackend>> {
    let live = || -> anyhow::Result<LiveBackend> {
        let mut config = LiveConfig::from_env()?;
        config.model = settings.model.clone();
        Ok(LiveBackend::new(config)?)
    };
    Ok(match settings.backend {
        BackendMode::Replay => Arc::new(ReplayBackend::new(ReplayStore::new(&settings.replay))),
        BackendMode::Live => Arc::new(live()?),
        BackendMode::Record => Arc::new(RecordingBackend::new(
            live()?,
            ReplayStore::new(&settings.replay),
        )),
    })
}

pub fn open_app(settings: &Settings) -> anyhow::Result<App> {
    let clock = match &settings.fixed_time {
        Some(t) => Clock::Fixed(
            chrono::DateTime::parse_from_rfc3339(t)
                .with_context(|| format!("fixed time `{t}`"))?
                .with_timezone(&chrono::Utc),
        ),
        None => Clock::System,
    };
    let template = match &settings.template {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| p.display().to_string())?;
            let version = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            MasterPromptTemplate::parse(&text, &format!("file:{version}"))?
        }
        None => MasterPromptTemplate::default(),
    };
    let options = SessionOptions {
        params: settings.chat_params(),
        search_tool: settings.search_tool,
    };
    let store = Store::open(&settings.store, clock)?;
    Ok(App::open(store, backend(settings)?, template, options)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    serde_json::from_str(&text).with_context(|| path.display().to_string())
}

fn print_json(out: &mut dyn Write, value: &impl serde::Serialize) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn parse_status(s: &str) -> anyhow::Result<ReviewStatus> {
    Ok(match s.to_ascii_lowercase().as_str() {
        "draft" => ReviewStatus::Draft,
        "accepted" => ReviewStatus::Accepted,
        "rejected" => ReviewStatus::Rejected,
        "edited" => ReviewStatus::Edited,
        other => bail!("unknown review status `{other}`"),
    })
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    let listen = match &cli.command {
        Command::Serve { listen } => listen.clone(),
        _ => None,
    };
    let settings = settings(&cli.global, listen)?;

    // commands that need no store
    match &cli.command {
        Command::Grade {
            target,
            response,
            file: true,
        } => {
            let text = std::fs::read_to_string(target).with_context(|| target.clone())?;
            let extracted = from_document(&SourceDocument::generated(target.clone(), text))?;
            let q = extracted
                .questions
                .first()
                .context("file holds no valid question")?;
            let response: StudentResponse = serde_json::from_str(response).context("response")?;
            print_json(out, &grade(q, &response, DEFAULT_POINTS)?)?;
            return Ok(0);
        }
        Command::Report {
            questions: Some(q),
            responses: Some(r),
            csv,
        } => {
            let items: Vec<SurveyItem> = std::fs::read_to_string(q)
                .with_context(|| q.display().to_string())?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect::<Result<_, _>>()
                .with_context(|| q.display().to_string())?;
            let responses = parse_responses_jsonl(
                &std::fs::read_to_string(r).with_context(|| r.display().to_string())?,
            )?;
            let report = aggregate(&responses, &items)?;
            if *csv {
                write!(out, "{}", report.to_csv())?;
            } else {
                print_json(out, &report)?;
            }
            return Ok(0);
        }
        _ => {}
    }

    let app = open_app(&settings)?;
    match cli.command {
        Command::Ingest { manifest } => print_json(out, &app.ingest_corpus(&manifest)?)?,
        Command::Symbols { query, corpus } => {
            print_json(out, &app.symbols(corpus.as_deref(), &query)?)?
        }
        Command::Generate { request, corpus } => {
            let request: GenerationRequest = read_json(&request)?;
            print_json(out, &app.generate(&request, corpus.as_deref())?)?;
        }
        Command::Validate {
            file,
            request,
            corpus,
        } => {
            let (_, graph) = app.graph(corpus.as_deref())?;
            let request: Option<GenerationRequest> = request.map(|p| read_json(&p)).transpose()?;
            let text =
                std::fs::read_to_string(&file).with_context(|| file.display().to_string())?;
            let doc_id = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let reports = validate_document(
                &SourceDocument::generated(doc_id, text),
                &graph,
                request.as_ref(),
            );
            print_json(out, &reports)?;
            if reports.iter().any(|r| r.verdict == Verdict::Fail) {
                return Ok(1);
            }
        }
        Command::Grade {
            target, response, ..
        } => {
            let response: StudentResponse = serde_json::from_str(&response).context("response")?;
            print_json(out, &app.grade(&target, &response)?)?;
        }
        Command::Drafts { status } => {
            let status = status.as_deref().map(parse_status).transpose()?;
            print_json(out, &app.list_drafts(status)?)?;
        }
        Command::Review { id, status, edited } => {
            let edited_source = edited
                .map(|p| std::fs::read_to_string(&p).with_context(|| p.display().to_string()))
                .transpose()?;
            let action = ReviewAction {
                status: parse_status(&status)?,
                edited_source,
            };
            app.set_review_status(&id, &action)?;
            print_json(out, &app.draft_view(&id)?)?;
        }
        Command::Survey(SurveyCommand::Export { ids }) => {
            let ids = if ids.is_empty() {
                let mut all = app.list_drafts(Some(ReviewStatus::Accepted))?;
                all.extend(app.list_drafts(Some(ReviewStatus::Edited))?);
                all.sort_by(|a, b| a.id.cmp(&b.id));
                all.into_iter().map(|d| d.id).collect()
            } else {
                ids
            };
            for id in ids {
                writeln!(
                    out,
                    "{}",
                    serde_json::to_string(&app.survey_instrument(&id)?)?
                )?;
            }
        }
        Command::Survey(SurveyCommand::Import { responses }) => {
            let text = std::fs::read_to_string(&responses)
                .with_context(|| responses.display().to_string())?;
            let parsed = parse_responses_jsonl(&text)?;
            for r in &parsed {
                app.submit_response(r)?;
            }
            writeln!(out, "imported {} responses", parsed.len())?;
        }
        Command::Report { csv, .. } => {
            let report = app.aggregate_report()?;
            if csv {
                write!(out, "{}", report.to_csv())?;
            } else {
                print_json(out, &report)?;
            }
        }
        Command::Serve { .. } => {
            let runtime = tokio::runtime::Runtime::new()?;
            let app = Arc::new(app);
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&settings.listen)
                    .await
                    .with_context(|| format!("bind {}", settings.listen))?;
                eprintln!("listening on {}", listener.local_addr()?);
                axum::serve(listener, crate::http::router(app)).await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(0)
}
