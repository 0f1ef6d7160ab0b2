use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use jade_core::board::{validate_board, Severity, ValidationReport};
use jade_core::bundled::{validate_dir, DataSet};
use jade_core::engine::{
    events_from_ndjson, events_to_ndjson, replay, EndCondition, FirstTeamMethod, GameConfig, GameContext, GameEvent,
    GameState,
};
use jade_core::sim::{simulate, AgentKind, AgentPolicy};
use jade_service::store;
use jade_service::SessionManager;

#[derive(Debug, Parser)]
#[command(name = "jade", version, about = "Rules engine, simulator and session server for the JADE board game")]
struct Cli {
    /// Data tree with catalog.toml, boards/ and software/ (bundled data if omitted).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Agent {
    Random,
    Greedy,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the catalog, every board and every software board.
    Validate,
    /// Play headless games and print a balance report.
    Simulate {
        #[arg(long, default_value = "lime")]
        board: String,
        #[arg(long, default_value_t = 100)]
        games: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        rounds: u32,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=4))]
        teams: u8,
        #[arg(long, value_enum, default_value_t = Agent::Random)]
        agent: Agent,
        /// Chance that a judging team accepts each point.
        #[arg(long, default_value_t = 0.7)]
        accept: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the session server.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
        /// Where session files are kept and restored from.
        #[arg(long)]
        sessions_dir: Option<PathBuf>,
        /// Force this dice seed on every new session.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the game events of a session file (or event log) as NDJSON.
    ExportLog {
        path: PathBuf,
        /// Replay the log and fail if it does not reproduce itself.
        #[arg(long)]
        verify: bool,
    },
    /// Replay a session file (or event log) and print the score sheets.
    ExportSheet {
        path: PathBuf,
        #[arg(long)]
        team: Option<String>,
    },
}

/// Failures that map to exit code 1; everything else is a usage error.
#[derive(Debug)]
struct Failed;

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("validation failed")
    }
}

impl std::error::Error for Failed {}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Failed>() => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate => validate(cli.data_dir.as_deref()),
        Command::Simulate {
            board,
            games,
            seed,
            rounds,
            teams,
            agent,
            accept,
            output,
        } => {
            let data = load_data(cli.data_dir.as_deref())?;
            let ctx = GameContext::from_data(&data, &board).ok_or_else(|| anyhow!("unknown board `{board}`"))?;
            let mut config = GameConfig::new(board, data.software.iter().map(|s| s.id.clone()).collect());
            config.end_condition = EndCondition::RoundLimit(rounds);
            config.first_team_method = FirstTeamMethod::Auto;
            let policy = AgentPolicy {
                kind: match agent {
                    Agent::Random => AgentKind::Random,
                    Agent::Greedy => AgentKind::GreedyCoverage,
                },
                accept_probability: accept,
                ..AgentPolicy::default()
            };
            let agents = vec![policy; teams as usize];
            let report = simulate(&ctx, &config, &agents, games, seed)?;
            let json = report.to_json();
            match output {
                Some(path) => std::fs::write(&path, json + "\n").with_context(|| path.display().to_string())?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Serve {
            listen,
            sessions_dir,
            seed,
        } => {
            let data = load_data(cli.data_dir.as_deref())?;
            let mut manager = SessionManager::new(data, sessions_dir);
            if let Some(seed) = seed {
                manager = manager.with_seed(seed);
            }
            for line in manager.restore_all() {
                tracing::warn!("{line}");
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(jade_service::serve(Arc::new(manager), &listen))?;
            Ok(())
        }
        Command::ExportLog { path, verify } => {
            let (events, board) = read_events(&path)?;
            if verify {
                let data = load_data(cli.data_dir.as_deref())?;
                let game = replay_events(&data, &board, &events)?;
                if events_to_ndjson(game.events()) != events_to_ndjson(&events) {
                    eprintln!("{}: replay does not reproduce the log", path.display());
                    return Err(Failed.into());
                }
            }
            print!("{}", events_to_ndjson(&events));
            Ok(())
        }
        Command::ExportSheet { path, team } => {
            let (events, board) = read_events(&path)?;
            let data = load_data(cli.data_dir.as_deref())?;
            let game = replay_events(&data, &board, &events)?;
            let sheets = game
                .teams()
                .iter()
                .filter(|t| team.as_deref().is_none_or(|id| t.id.as_str() == id))
                .map(|t| game.export_score_sheet(&t.id))
                .collect::<Result<Vec<_>, _>>()?;
            if sheets.is_empty() {
                bail!("no team `{}` in this game", team.unwrap_or_default());
            }
            let out = serde_json::json!({"sheets": sheets, "standings": game.standings()});
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
    }
}

fn load_data(dir: Option<&Path>) -> Result<DataSet> {
    match dir {
        Some(d) => DataSet::load_dir(d).map_err(|e| anyhow!(e)),
        None => Ok(DataSet::bundled()),
    }
}

fn validate(dir: Option<&Path>) -> Result<()> {
    let report = match dir {
        Some(d) => validate_dir(d).map_err(|e| anyhow!(e))?,
        None => {
            let data = DataSet::bundled();
            let mut report = ValidationReport::new();
            for b in &data.boards {
                report.merge(validate_board(b, &data.catalog));
            }
            for s in &data.software {
                if let Err(e) = s.validate() {
                    report.error("content", e.to_string());
                }
            }
            report
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    let errors = report.findings.iter().filter(|f| f.severity == Severity::Error).count();
    if errors > 0 {
        eprintln!("{errors} error(s)");
        return Err(Failed.into());
    }
    Ok(())
}

/// Reads game events from a session file or a bare event log. Returns them
/// with the board id recorded in the first event.
fn read_events(path: &Path) -> Result<(Vec<GameEvent>, String)> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let first = text.lines().next().unwrap_or_default();
    let events = if first.contains("\"record\":\"session\"") {
        let (loaded, _) = store::load(path)?;
        loaded.envelopes.iter().filter_map(|e| e.event()).collect()
    } else {
        events_from_ndjson(&text).with_context(|| path.display().to_string())?
    };
    let board = match events.first().map(|e| &e.body) {
        Some(jade_core::engine::EventBody::GameCreated { config, .. }) => config.board.clone(),
        _ => bail!("{}: the log does not start with GameCreated", path.display()),
    };
    Ok((events, board))
}

fn replay_events(data: &DataSet, board: &str, events: &[GameEvent]) -> Result<GameState> {
    let ctx = GameContext::from_data(data, board).ok_or_else(|| anyhow!("unknown board `{board}`"))?;
    replay(events, ctx).map_err(|e| {
        eprintln!("replay failed: {e}");
        Failed.into()
    })
}
