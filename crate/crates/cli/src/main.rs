mod http;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crowdwrite_core::doc::{export, ExportFormat, DEFAULT_PAGE_HEIGHT};
use crowdwrite_core::service::{read_log, replay, ApiRequest, Service, ServiceConfig};
use crowdwrite_core::sim::{fixture_paper_scale, Runner, Transcript};
use crowdwrite_core::{classify_metrics, DocId, Role};

/// Crowd editing server and tools. Every flag can also be set through an
/// environment variable named `CROWDWRITE_` plus the flag name in capitals.
#[derive(Parser)]
#[command(name = "crowdwrite", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP server.
    Serve {
        #[arg(long, env = "CROWDWRITE_HOST", default_value = "127.0.0.1")]
        host: String,
        /// Port to listen on; 0 picks a free one.
        #[arg(long, env = "CROWDWRITE_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "CROWDWRITE_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, env = "CROWDWRITE_PAGE_HEIGHT", default_value_t = DEFAULT_PAGE_HEIGHT)]
        page_height: usize,
    },
    /// Rebuild server state from a log file.
    Replay {
        log: PathBuf,
        /// Print only the state digest.
        #[arg(long)]
        digest: bool,
    },
    /// Print a document from the log in a data directory.
    Export {
        doc_id: String,
        #[arg(long, value_enum, env = "CROWDWRITE_FORMAT", default_value = "structured")]
        format: Format,
        #[arg(long, env = "CROWDWRITE_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
    },
    /// Print workflow counters for a document.
    Metrics {
        doc_id: String,
        #[arg(long, env = "CROWDWRITE_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
    },
    /// Create a document from an outline file and a JSON list of task
    /// templates, appending to the log in the data directory.
    Seed {
        outline: PathBuf,
        tasks: PathBuf,
        #[arg(long, env = "CROWDWRITE_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, env = "CROWDWRITE_AUTHOR", default_value = "author")]
        author: String,
        #[arg(long, env = "CROWDWRITE_RNG_SEED")]
        rng_seed: Option<u64>,
    },
    /// Transcript tools.
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    /// Run a transcript against a fresh in-memory server.
    Run {
        transcript: PathBuf,
        /// Print only the final digest.
        #[arg(long)]
        digest: bool,
    },
    /// Write the paper-scale fixture transcript.
    FixturePaperScale {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Structured,
    Plain,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Serve { host, port, data_dir, page_height } => serve(&host, port, data_dir, page_height),
        Command::Replay { log, digest } => {
            let events = read_log(&log).with_context(|| format!("reading {}", log.display()))?;
            let state = replay(&events)?;
            if digest {
                println!("{}", state.digest());
            } else {
                let summary = json!({
                    "events": events.len(),
                    "last_seq": state.last_seq(),
                    "documents": state.docs().keys().collect::<Vec<_>>(),
                    "digest": state.digest(),
                });
                println!("{}", serde_json::to_string_pretty(&summary)?);
            }
            Ok(())
        }
        Command::Export { doc_id, format, data_dir } => {
            let service = open(&data_dir)?;
            let doc_id = DocId::from(doc_id.as_str());
            let bytes = service.inspect(|s| {
                s.doc(&doc_id).map(|d| {
                    let format = match format {
                        Format::Structured => ExportFormat::Structured,
                        Format::Plain => ExportFormat::Plain,
                    };
                    export(&d.tree, format)
                })
            });
            let bytes = bytes.map_err(|e| anyhow::anyhow!("{}", e.message))?;
            println!("{}", String::from_utf8(bytes)?.trim_end());
            Ok(())
        }
        Command::Metrics { doc_id, data_dir } => {
            let service = open(&data_dir)?;
            let doc_id = DocId::from(doc_id.as_str());
            if service.inspect(|s| s.doc(&doc_id).is_err()) {
                bail!("unknown document {doc_id}");
            }
            let events: Vec<_> = service.events().into_iter().filter(|e| e.doc_id == doc_id).collect();
            let metrics = classify_metrics(&events)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
            Ok(())
        }
        Command::Seed { outline, tasks, data_dir, author, rng_seed } => {
            let outline = std::fs::read_to_string(&outline).with_context(|| format!("reading {}", outline.display()))?;
            let tasks: Value = serde_json::from_str(
                &std::fs::read_to_string(&tasks).with_context(|| format!("reading {}", tasks.display()))?,
            )
            .context("task file must be a JSON list of templates")?;
            let service = open(&data_dir)?;
            let token = service.open_session(author.as_str().into(), Role::Author, None).map_err(|e| anyhow::anyhow!("{}", e.message))?;
            let mut body = json!({ "seed_outline": outline, "tasks": tasks });
            if let Some(seed) = rng_seed {
                body["rng_seed"] = json!(seed);
            }
            let resp = service.handle(ApiRequest::post("/documents", body).with_token(token));
            if !resp.is_success() {
                bail!("{}", resp.body);
            }
            println!("{}", serde_json::to_string_pretty(&resp.body)?);
            Ok(())
        }
        Command::Sim { command: SimCommand::Run { transcript, digest } } => {
            let text = std::fs::read_to_string(&transcript).with_context(|| format!("reading {}", transcript.display()))?;
            let transcript = Transcript::from_jsonl(&text)?;
            let report = Runner::run(&Service::in_memory(), &transcript)?;
            if digest {
                println!("{}", report.final_digest);
            } else {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
            Ok(())
        }
        Command::Sim { command: SimCommand::FixturePaperScale { out } } => {
            std::fs::write(&out, fixture_paper_scale().to_jsonl()).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
    }
}

fn open(data_dir: &Path) -> Result<Service> {
    let config = ServiceConfig { data_dir: Some(data_dir.to_owned()), ..ServiceConfig::default() };
    Service::open(config).with_context(|| format!("opening {}", data_dir.display()))
}

#[tokio::main]
async fn serve(host: &str, port: u16, data_dir: PathBuf, page_height: usize) -> Result<()> {
    let config = ServiceConfig { page_height, data_dir: Some(data_dir.clone()) };
    let service = tokio::task::spawn_blocking(move || Service::open(config))
        .await?
        .with_context(|| format!("opening {}", data_dir.display()))?;
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, http::router(Arc::new(service))).await?;
    Ok(())
}
