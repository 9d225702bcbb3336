//! Command-line front end.

pub mod config;
pub mod output;
pub mod run;

use std::io::{IsTerminal, Read};
use std::path::PathBuf;

use clap::Parser;
use serde_json::{json, Value};

pub use config::{parse_config, read_config, Command, RunConfig};
pub use output::{emit_series, Manifest};
pub use run::{run, RunOutcome};

use crate::error::{Error, Result};
use crate::overlap::EngineChoice;

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "SPINFADE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "spinfade", version, about = "Overlap and leakage of Dicke states in inhomogeneous fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file (`-` or absent: standard input when it is not a terminal)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overrides the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, overrides the config
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// oracle | dephasing | general | auto
    #[arg(long, global = true)]
    pub engine: Option<EngineChoice>,
    /// Worker threads, 0 = one per core
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

fn read_text(path: Option<&PathBuf>) -> Result<String> {
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p).map_err(|e| Error::io(p, e)),
        _ => {
            let mut stdin = std::io::stdin();
            if path.is_none() && stdin.is_terminal() {
                return Ok(String::new());
            }
            let mut s = String::new();
            stdin.read_to_string(&mut s).map_err(|e| Error::io("<stdin>", e))?;
            Ok(s)
        }
    }
}

fn threads(cli: &Cli) -> Result<usize> {
    if let Some(n) = cli.threads {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(0),
    }
}

/// Config after flag overrides, resolved.
pub fn load(cli: &Cli) -> Result<RunConfig> {
    let text = read_text(cli.config.as_ref())?;
    let mut cfg = read_config(&text, Some(cli.command))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(e) = cli.engine {
        cfg.engine = e;
    }
    cfg.resolve()
}

fn execute(cli: &Cli) -> Result<RunOutcome> {
    let cfg = load(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads(cli)?)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| run(&cfg))
}

/// JSON object describing `e`, as written to standard error.
pub fn diagnostic(e: &Error) -> Value {
    let mut d = json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() });
    let m = d.as_object_mut().expect("object");
    match e {
        Error::ConfigSyntax { line, column, .. } => {
            m.insert("line".into(), json!(line));
            m.insert("column".into(), json!(column));
        }
        Error::ConfigSemantic { key, .. } => {
            m.insert("key".into(), json!(key));
        }
        Error::Io { path, .. } => {
            m.insert("path".into(), json!(path));
        }
        Error::NotFound { searched_to, .. } => {
            m.insert("searched_to".into(), json!(searched_to));
        }
        Error::ResourceLimit { estimate, limit, .. } => {
            m.insert("estimate".into(), json!(estimate));
            m.insert("limit".into(), json!(limit));
        }
        _ => {}
    }
    d
}

/// Runs the CLI and returns the process exit status.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            println!("{}", serde_json::to_string(&outcome).expect("outcome serializes"));
            0
        }
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            e.exit_code()
        }
    }
}
