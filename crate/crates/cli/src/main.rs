use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use clueboard_client::{Client, Method};
use clueboard_core::changepoint::ChangePointArray;
use clueboard_core::engine::{DatasetMeta, Engine, EngineConfig, ExpandRequest, RefineRequest};
use clueboard_core::expand::{Direction, ExpansionResult};
use clueboard_core::monitor::AlertReport;
use clueboard_core::refine::{RefineResult, Selection};
use clueboard_core::scenario::{generate_scenario, ScenarioSpec};
use clueboard_core::store::ScenarioKind;
use clueboard_core::verify::verify_dataset;
use clueboard_core::{Clue, SeriesKey, TimeRange};
use clueboard_server::{Service, ServiceConfig};

mod render;

#[derive(Parser)]
#[command(name = "clueboard", version, about = "Root-cause investigation over telemetry and a knowledge graph")]
struct Cli {
    /// Print the raw JSON response instead of a text rendering.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
    /// Write a seeded synthetic dataset and its graph.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::ReservationLeak)]
        kind: Kind,
    },
    /// Anomaly alerts, or the change points of one series with --key.
    Detect {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        key: Option<SeriesKey>,
        #[command(flatten)]
        window: Window,
    },
    /// Recommend related clues in one direction or all five.
    Expand {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        clue: SeriesKey,
        #[arg(long, value_enum)]
        direction: DirArg,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        budget_ms: Option<u64>,
        #[command(flatten)]
        window: Window,
    },
    /// Search filter combinations with the strongest trends.
    Refine {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        clue: SeriesKey,
        /// `Filter` for all options or `Filter=a|b`; repeatable.
        #[arg(long = "select", required = true)]
        select: Vec<String>,
        #[command(flatten)]
        window: Window,
    },
    /// Write a session document.
    Export {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        session: String,
        /// File to write instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle checks against a dataset; fails if any check fails.
    Verify {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    ReservationLeak,
    NodeDrain,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Graph document; defaults to the dataset's graph.json.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Directory for persisted sessions and uploaded graphs.
    #[arg(long)]
    state_dir: Option<PathBuf>,
}

/// A running service, or a dataset to serve in-process.
#[derive(Args)]
struct Target {
    #[arg(long, env = "CLUEBOARD_SERVER", conflicts_with = "dataset")]
    server: Option<String>,
    #[arg(long, required_unless_present = "server")]
    dataset: Option<PathBuf>,
    #[arg(long, requires = "dataset")]
    graph: Option<PathBuf>,
    #[arg(long, requires = "dataset")]
    state_dir: Option<PathBuf>,
}

#[derive(Args)]
struct Window {
    /// Window start, epoch seconds; defaults to the dataset start.
    #[arg(long)]
    from: Option<i64>,
    /// Window end, epoch seconds; defaults to the dataset end.
    #[arg(long)]
    to: Option<i64>,
}

#[derive(Clone, Copy, PartialEq, Debug, ValueEnum)]
enum DirArg {
    Up,
    Down,
    Left,
    Right,
    In,
    All,
}

impl DirArg {
    fn direction(self) -> Option<Direction> {
        Some(match self {
            DirArg::Up => Direction::Up,
            DirArg::Down => Direction::Down,
            DirArg::Left => Direction::Left,
            DirArg::Right => Direction::Right,
            DirArg::In => Direction::In,
            DirArg::All => return None,
        })
    }
}

fn parse_selection(items: &[String]) -> Result<Selection> {
    let mut selection = Selection::new();
    for item in items {
        let (filter, options) = match item.split_once('=') {
            Some((f, opts)) => (f, opts.split('|').map(str::to_string).collect()),
            None => (item.as_str(), Vec::new()),
        };
        if filter.is_empty() {
            bail!("empty filter in --select {item:?}");
        }
        if selection.insert(filter.to_string(), options).is_some() {
            bail!("filter {filter} selected twice");
        }
    }
    Ok(selection)
}

impl Target {
    async fn connect(&self) -> Result<Client> {
        if let Some(url) = &self.server {
            return Ok(Client::new(url.clone()));
        }
        let dataset = self.dataset.clone().expect("clap requires --dataset without --server");
        let config = ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 0)),
            dataset,
            graph: self.graph.clone(),
            state_dir: self.state_dir.clone(),
            engine: EngineConfig::default(),
        };
        let addr = Service::bind(&config).await?.spawn();
        Ok(Client::new(format!("http://{addr}")))
    }
}

impl Window {
    fn query(&self) -> Vec<(&'static str, String)> {
        let mut q = Vec::new();
        if let Some(f) = self.from {
            q.push(("from", f.to_string()));
        }
        if let Some(t) = self.to {
            q.push(("to", t.to_string()));
        }
        q
    }

    async fn resolve(&self, client: &Client) -> Result<TimeRange> {
        let meta: DatasetMeta = client.meta().await?;
        Ok(TimeRange::new(self.from.unwrap_or(meta.window.start), self.to.unwrap_or(meta.window.end))?)
    }
}

struct Output {
    json: bool,
}

impl Output {
    /// Raw body with --json, otherwise the text rendering.
    fn emit<T: serde::de::DeserializeOwned>(&self, body: &[u8], text: impl FnOnce(T) -> String) -> Result<()> {
        let mut out = std::io::stdout().lock();
        if self.json {
            out.write_all(body)?;
        } else {
            let value: T = serde_json::from_slice(body).context("decoding service response")?;
            out.write_all(text(value).as_bytes())?;
        }
        Ok(())
    }
}

async fn run(cli: Cli) -> Result<bool> {
    let out = Output { json: cli.json };
    match cli.command {
        Command::Serve { data, bind } => {
            let config = ServiceConfig {
                bind,
                dataset: data.dataset,
                graph: data.graph,
                state_dir: data.state_dir,
                engine: EngineConfig::default(),
            };
            let service = Service::bind(&config).await?;
            eprintln!("listening on http://{}", service.local_addr());
            service
                .run_until(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
        }
        Command::Generate { seed, out: dir, kind } => {
            let spec = ScenarioSpec {
                kind: match kind {
                    Kind::ReservationLeak => ScenarioKind::ReservationLeak,
                    Kind::NodeDrain => ScenarioKind::NodeDrain,
                },
                ..ScenarioSpec::default()
            };
            let truth = generate_scenario(seed, &spec, &dir)?;
            let body = clueboard_core::json::to_canonical_bytes(&truth)?;
            out.emit(&body, render::ground_truth)?;
        }
        Command::Detect { target, key, window } => {
            let client = target.connect().await?;
            let mut q = window.query();
            match key {
                Some(key) => {
                    q.push(("key", key.to_string()));
                    let body = client.raw(Method::GET, "/changepoints", &q, None).await?;
                    out.emit(&body, |cps: ChangePointArray| render::changepoints(&key, &cps))?;
                }
                None => {
                    let body = client.raw(Method::GET, "/alerts", &q, None).await?;
                    out.emit(&body, |r: AlertReport| render::alerts(&r))?;
                }
            }
        }
        Command::Expand { target, clue, direction, k, budget_ms, window } => {
            let client = target.connect().await?;
            let clue = Clue::new(clue, window.resolve(&client).await?);
            match direction.direction() {
                Some(direction) => {
                    let req = ExpandRequest { clue, direction, k, budget_ms };
                    let body = client.raw(Method::POST, "/expand", &[], Some(serde_json::to_vec(&req)?)).await?;
                    out.emit(&body, |r: ExpansionResult| render::expansion(&r))?;
                }
                None => {
                    let req = serde_json::json!({ "clue": clue, "k": k, "budget_ms": budget_ms });
                    let body = client.raw(Method::POST, "/expand/all", &[], Some(serde_json::to_vec(&req)?)).await?;
                    out.emit(&body, |rs: Vec<ExpansionResult>| rs.iter().map(render::expansion).collect::<Vec<_>>().join("\n"))?;
                }
            }
        }
        Command::Refine { target, clue, select, window } => {
            let selection = parse_selection(&select)?;
            let client = target.connect().await?;
            let req = RefineRequest {
                clue: Clue::new(clue, window.resolve(&client).await?),
                selection,
                config: None,
            };
            let body = client.raw(Method::POST, "/refine", &[], Some(serde_json::to_vec(&req)?)).await?;
            out.emit(&body, |r: RefineResult| render::refinement(&r))?;
        }
        Command::Export { target, session, out: file } => {
            let client = target.connect().await?;
            let body = client.export(&session).await?;
            match file {
                Some(path) => std::fs::write(&path, &body).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().lock().write_all(&body)?,
            }
        }
        Command::Verify { dataset, graph } => {
            let engine = Engine::load(&dataset, graph.as_deref(), EngineConfig::default())?;
            let report = verify_dataset(engine.store(), engine.graph());
            let body = clueboard_core::json::to_canonical_bytes(&report)?;
            out.emit(&body, |r: clueboard_core::verify::VerifyReport| {
                r.checks.iter().map(|c| c.line() + "\n").collect()
            })?;
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selections_parse() {
        let s = parse_selection(&["OSType".into(), "ErrorCode=A|B".into()]).unwrap();
        assert_eq!(s["OSType"], Vec::<String>::new());
        assert_eq!(s["ErrorCode"], vec!["A", "B"]);
        assert!(parse_selection(&["=x".into()]).is_err());
        assert!(parse_selection(&["A".into(), "A=x".into()]).is_err());
    }

    #[test]
    fn all_is_a_direction() {
        assert_eq!(DirArg::from_str("all", false).unwrap().direction(), None);
        assert_eq!(DirArg::from_str("in", false).unwrap().direction(), Some(Direction::In));
        assert!(DirArg::from_str("sideways", false).is_err());
    }

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
