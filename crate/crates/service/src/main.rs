use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chartwise_core::eval::{convert_corpus, run_benchmark, write_corpus, BenchmarkOptions, BenchmarkReport, JudgeConfig};
use chartwise_core::gateway::{run_with_progress, Gateway, ProgressConfig};
use chartwise_core::nav::{coalesce, shortest_path, Cursor};
use chartwise_core::pipeline::{ChartContext, PipelineError, UserQuery};
use chartwise_core::tree::render_tree_text;
use chartwise_service::{router, AppState, Config, GatewayMode, ServiceError};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "chartwise", version, about = "Screen-reader friendly question answering over charts")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "CHARTWISE_CONFIG")]
    config: Option<PathBuf>,
    /// Answer model calls from a recorded transcript.
    #[arg(long, global = true, conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Call the live provider and record every exchange.
    #[arg(long, global = true)]
    record: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print a chart's navigation tree.
    Tree {
        chart: String,
        /// Deepest level to print.
        #[arg(long, default_value_t = 4)]
        level: usize,
    },
    /// Answer one question about a chart.
    Ask {
        chart: String,
        question: String,
        /// Address of the focused node.
        #[arg(long, default_value = "1")]
        cursor: String,
        /// Move the cursor for navigation questions instead of reading directions.
        #[arg(long)]
        auto: bool,
    },
    /// Print the key presses between two nodes.
    Nav { chart: String, from: String, to: String },
    /// Run the benchmark over the test split.
    Eval {
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Score only answerable questions.
        #[arg(long)]
        answerable_only: bool,
        /// Skip the judge; classification metrics only.
        #[arg(long)]
        no_judge: bool,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        /// Write per-item results as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Convert an annotated CSV into the JSONL corpus format.
    ConvertCorpus { input: PathBuf, output: PathBuf },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        addr: Option<String>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn mode(cli: &Cli) -> GatewayMode {
    match (&cli.replay, &cli.record) {
        (Some(p), _) => GatewayMode::Replay(p.clone()),
        (None, Some(p)) => GatewayMode::Record(p.clone()),
        (None, None) => GatewayMode::Live,
    }
}

fn chart<'a>(charts: &'a HashMap<String, ChartContext>, id: &str) -> Result<&'a ChartContext, ServiceError> {
    charts.get(id).ok_or_else(|| {
        let mut known: Vec<&str> = charts.keys().map(String::as_str).collect();
        known.sort_unstable();
        ServiceError::Config(format!("unknown chart `{id}`; known: {}", known.join(", ")))
    })
}

fn run(cli: Cli) -> Result<(), ServiceError> {
    let config = Config::load(cli.config.as_deref())?;
    let gateway_mode = mode(&cli);
    match cli.command {
        Command::Tree { chart: id, level } => {
            let charts = config.load_charts()?;
            print!("{}", render_tree_text(&chart(&charts, &id)?.tree, level));
        }
        Command::Nav { chart: id, from, to } => {
            let charts = config.load_charts()?;
            let moves = shortest_path(&chart(&charts, &id)?.tree, &from, &to).map_err(|e| ServiceError::Config(e.to_string()))?;
            println!("{}", coalesce(&moves).spoken);
        }
        Command::Ask {
            chart: id,
            question,
            cursor,
            auto,
        } => {
            let charts = config.load_charts()?;
            let c = chart(&charts, &id)?;
            let pipeline = config.pipeline(config.gateway(&gateway_mode)?)?;
            let mut start = Cursor::at_root("cli");
            start.address = cursor;
            let q = UserQuery::new(question, start);
            let progress = ProgressConfig {
                interval: config.service_options().progress_interval,
            };
            let answer = run_with_progress(
                progress,
                |ev| eprintln!("{}", ev.message),
                |r: &Result<_, PipelineError>| r.as_ref().err().map(ToString::to_string),
                || pipeline.answer(c, &q, auto),
            )
            .map_err(|e| ServiceError::Config(e.to_string()))?;
            println!("{}", answer.spoken());
            for s in &answer.suggestions {
                println!("Suggestion: {s}");
            }
            if let Some(m) = answer.navigation.as_ref().and_then(|n| n.moved_to.as_ref()) {
                println!("Cursor: {}", m.address);
            }
        }
        Command::Eval {
            ratio,
            seed,
            answerable_only,
            no_judge,
            parallelism,
            report,
        } => {
            let mut config = config;
            config.split_ratio = ratio.unwrap_or(config.split_ratio);
            config.split_seed = seed.unwrap_or(config.split_seed);
            let charts = config.load_charts()?;
            let (test, validation) = config.split()?;
            let pipeline = config.pipeline(config.gateway(&gateway_mode)?)?;
            let judge = if no_judge { JudgeConfig::disabled() } else { JudgeConfig::from_validation(&validation, 2) };
            let options = BenchmarkOptions {
                parallelism,
                auto_traverse: false,
            };
            let mut result = run_benchmark(&test, &pipeline, &charts, &judge, options);
            if answerable_only {
                result = result.answerable_only();
            }
            print_report(&result, pipeline.gateway());
            if let Some(path) = report {
                let text = serde_json::to_string_pretty(&result).map_err(|e| ServiceError::Config(e.to_string()))?;
                std::fs::write(&path, text)?;
            }
        }
        Command::ConvertCorpus { input, output } => convert(&input, &output)?,
        Command::Serve { addr } => {
            let charts = config.load_charts()?;
            let pipeline = Arc::new(config.pipeline(config.gateway(&gateway_mode)?)?);
            let state = AppState::new(charts, pipeline, config.service_options())?;
            let addr = addr.unwrap_or_else(|| config.service.addr.clone());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr).await?;
                tracing::info!("listening on {addr}");
                eprintln!("listening on {}", listener.local_addr()?);
                axum::serve(listener, router(state)).await
            })?;
        }
    }
    Ok(())
}

fn print_report(report: &BenchmarkReport, gateway: &Gateway) {
    print!("{}", report.to_table());
    for item in report.errors() {
        eprintln!("{}: {}", item.id, item.error.as_deref().unwrap_or_default());
    }
    if let Some(p) = gateway.transcript_path() {
        eprintln!("transcript: {}", p.display());
    }
}

fn convert(input: &Path, output: &Path) -> Result<(), ServiceError> {
    let text = std::fs::read_to_string(input)?;
    let items = convert_corpus(&text).map_err(|e| ServiceError::Config(e.to_string()))?;
    let file = std::fs::File::create(output)?;
    write_corpus(&items, std::io::BufWriter::new(file)).map_err(|e| ServiceError::Config(e.to_string()))?;
    eprintln!("wrote {} items to {}", items.len(), output.display());
    Ok(())
}
