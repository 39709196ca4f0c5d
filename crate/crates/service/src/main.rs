use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use litnav_core::bkg::build_bkg;
use litnav_core::corpus::CorpusStore;
use litnav_core::embed::{embed_corpus, StubEmbedder};
use litnav_core::mining::{fit_topics, MiningParams};
use litnav_core::querylang::{parse_query, render_query, search};
use litnav_service::{parts_from_config, serve, AppState, ServiceConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "litnav", version, about = "Conversational literature exploration over a bibliographic knowledge graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service (configured through LITNAV_* variables).
    Serve {
        /// Overrides LITNAV_PORT.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Ingest a JSON Lines corpus and print its statistics.
    Ingest { corpus: PathBuf },
    /// Print the uids matching a query, newest first.
    Search {
        corpus: PathBuf,
        query: String,
        /// Also print year and title.
        #[arg(long)]
        long: bool,
    },
    /// Parse a query and print its canonical form.
    Render { query: String },
    /// Print the knowledge graph of a corpus as JSON.
    Graph { corpus: PathBuf },
    /// Fit topics with the built-in embedder and print a summary as JSON.
    Topics {
        corpus: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0.10)]
        outlier_threshold: f64,
    },
}

fn load(path: &Path) -> Result<CorpusStore, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    CorpusStore::ingest_reader(BufReader::new(file)).map_err(|e| format!("{}: {e}", path.display()))
}

fn print_json(value: &impl serde::Serialize) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    writeln!(std::io::stdout(), "{text}").map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Serve { port } => {
            let mut config = ServiceConfig::from_env().map_err(|e| e.to_string())?;
            if let Some(port) = port {
                config.port = port;
            }
            let parts = parts_from_config(&config).map_err(|e| e.to_string())?;
            let app = AppState::open(config, parts).map_err(|e| e.to_string())?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime.block_on(serve(app)).map_err(|e| e.to_string())
        }
        Command::Ingest { corpus } => print_json(load(&corpus)?.stats()),
        Command::Search { corpus, query, long } => {
            let store = load(&corpus)?;
            let q = parse_query(&query).map_err(|e| format!("{e}\n  {query}\n  {:>width$}", "^", width = e.position()))?;
            let mut out = std::io::stdout().lock();
            for uid in search(&q, &store) {
                let line = match (long, store.get(&uid)) {
                    (true, Some(r)) => format!("{uid}\t{}\t{}", r.year, r.title),
                    _ => uid,
                };
                writeln!(out, "{line}").map_err(|e| e.to_string())?;
            }
            Ok(())
        }
        Command::Render { query } => {
            let q = parse_query(&query).map_err(|e| format!("{e}\n  {query}\n  {:>width$}", "^", width = e.position()))?;
            println!("{}", render_query(&q));
            Ok(())
        }
        Command::Graph { corpus } => print_json(&build_bkg(&load(&corpus)?).dump()),
        Command::Topics { corpus, k, outlier_threshold } => {
            let store = load(&corpus)?;
            let params = MiningParams { k, outlier_threshold, ..MiningParams::default() };
            let embedded = embed_corpus(&StubEmbedder, &store, 32).map_err(|e| e.to_string())?;
            let mut model = fit_topics(embedded.index.entries(), &params).map_err(|e| e.to_string())?;
            model.attach_terms(&store, params.m_terms);
            let topics: Vec<_> = (0..model.k)
                .map(|t| {
                    let terms: Vec<&str> = model.terms[t].iter().map(|r| r.item.as_str()).collect();
                    json!({ "id": t, "size": model.sizes[t], "terms": terms })
                })
                .collect();
            print_json(&json!({
                "papers": model.paper_count(),
                "skipped": embedded.skipped,
                "outliers": model.outlier_count,
                "converged": model.converged,
                "topics": topics,
            }))
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
