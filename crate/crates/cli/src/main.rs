use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(
    name = "agreements",
    version,
    about = "Run and inspect net-native agreement paths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API until Ctrl-C.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, env = "AE_DB", default_value = "db.json")]
        db: PathBuf,
        /// Event log; defaults to `<db stem>.events.jsonl` next to the store.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Comma-separated path names to mount (default: all).
        #[arg(long, value_delimiter = ',')]
        paths: Vec<String>,
        #[arg(long, default_value_t = 1)]
        id_seed: u64,
        /// Stamp envelopes from a deterministic clock instead of wall time.
        #[arg(long)]
        fixed_clock: bool,
    },
    /// Drive a demo flow through the HTTP API into the store.
    Seed {
        #[arg(long, value_enum)]
        demo: Demo,
        #[arg(long, env = "AE_DB", default_value = "db.json")]
        db: PathBuf,
        /// Stop halfway (scarce: awaiting the author; tsc: in dispute).
        #[arg(long)]
        partial: bool,
        #[arg(long, default_value_t = 1)]
        id_seed: u64,
    },
    /// Print one agreement, or every agreement of a path, as JSON.
    Inspect {
        path: String,
        id: Option<String>,
        #[arg(long, env = "AE_DB", default_value = "db.json")]
        db: PathBuf,
    },
    /// Rebuild a store from an event log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        db_out: PathBuf,
        /// Fail unless the rebuilt store is byte-identical to this one.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        id_seed: u64,
    },
    /// Print structural findings for the mounted paths.
    Lint {
        #[arg(long, value_delimiter = ',')]
        paths: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Demo {
    Scarce,
    Tsc,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.command {
        Command::Serve { .. } => tracing::Level::INFO,
        _ => tracing::Level::WARN,
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .init();
    let result = match cli.command {
        Command::Serve {
            bind,
            db,
            log,
            paths,
            id_seed,
            fixed_clock,
        } => commands::serve(bind, db, log, &paths, id_seed, fixed_clock),
        Command::Seed {
            demo,
            db,
            partial,
            id_seed,
        } => commands::seed(demo, db, partial, id_seed),
        Command::Inspect { path, id, db } => commands::inspect(&path, id.as_deref(), &db),
        Command::Replay {
            log,
            db_out,
            compare,
            id_seed,
        } => commands::replay(&log, &db_out, compare.as_deref(), id_seed),
        Command::Lint { paths } => commands::lint(&paths),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
