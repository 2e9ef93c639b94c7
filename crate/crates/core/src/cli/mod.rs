//! The `canon-gnn` command line.
//!
//! Every subcommand's options can also come from a TOML file given with
//! `--config`: top-level keys apply to all subcommands, a `[subcommand]`
//! table overrides them. Precedence is flag, then file, then built-in default,
//! and the effective values are echoed into the report.

mod commands;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::Error;

pub use commands::{
    CanonizeArgs, DistanceArgs, EncodeArgs, GenCslArgs, GenPairsArgs, IsotestArgs, ProbeArgs, TrainArgs,
    ValidateArgs,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_WITNESSES: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "canon-gnn", version, about = "Canonical and label-based positional encodings for graph networks")]
pub struct Cli {
    /// TOML file with option values; explicit flags win over it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel sections. Results do not depend on it.
    #[arg(long, global = true, env = "CANON_GNN_THREADS")]
    pub threads: Option<usize>,

    /// Print the effective configuration to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Canonical order and certificate of each graph.
    Canonize(CanonizeArgs),
    /// One-hot GC or UGC positional encodings.
    Encode(EncodeArgs),
    /// Check that a labelled dataset admits a consistent UGC.
    ValidateUgc(ValidateArgs),
    /// Alignment distance between two graphs of a dataset.
    Distance(DistanceArgs),
    /// Exact isomorphism plus a WL test with optional positional encoding.
    Isotest(IsotestArgs),
    /// Write a CSL benchmark dataset.
    GenCsl(GenCslArgs),
    /// Write WL-hard pairs, rank-shift counterexamples or the three-triangle pair.
    GenPairs(GenPairsArgs),
    /// Train a message-passing classifier on one fold of a dataset.
    Train(TrainArgs),
    /// Measure GC versus UGC stability on counterexample pairs.
    ProbeStability(ProbeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Canonize(_) => "canonize",
            Command::Encode(_) => "encode",
            Command::ValidateUgc(_) => "validate-ugc",
            Command::Distance(_) => "distance",
            Command::Isotest(_) => "isotest",
            Command::GenCsl(_) => "gen-csl",
            Command::GenPairs(_) => "gen-pairs",
            Command::Train(_) => "train",
            Command::ProbeStability(_) => "probe-stability",
        }
    }
}

/// Failure of a subcommand, mapped onto an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(Error::Io(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Option values from `--config` for one subcommand: top-level keys and
/// the keys of its own `[subcommand]` table.
#[derive(Debug, Default)]
pub struct FileConfig {
    shared: Map<String, Value>,
    section: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: &Path, command: &str) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, command).map_err(|e| match e {
            CliError::Usage(m) => usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, command: &str) -> CliResult<Self> {
        let table: toml::Table = text.parse().map_err(|e| usage(format!("invalid TOML: {e}")))?;
        let mut cfg = FileConfig::default();
        for (k, v) in table {
            match v {
                toml::Value::Table(t) if k == command => {
                    cfg.section = t.into_iter().map(|(k, v)| (k.replace('-', "_"), toml_to_json(v))).collect();
                }
                toml::Value::Table(_) => {}
                v => {
                    cfg.shared.insert(k.replace('-', "_"), toml_to_json(v));
                }
            }
        }
        Ok(cfg)
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.section.get(key).or_else(|| self.shared.get(key))
    }
}

fn toml_to_json(v: toml::Value) -> Value {
    match v {
        toml::Value::String(s) => Value::String(s),
        toml::Value::Integer(i) => Value::from(i),
        toml::Value::Float(f) => Value::from(f),
        toml::Value::Boolean(b) => Value::Bool(b),
        toml::Value::Datetime(d) => Value::String(d.to_string()),
        toml::Value::Array(a) => Value::Array(a.into_iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => Value::Object(t.into_iter().map(|(k, v)| (k, toml_to_json(v))).collect()),
    }
}

/// Option structs whose unset fields can be filled from a file and defaults.
pub trait Layered: Serialize + DeserializeOwned {
    fn defaults() -> Self;
}

/// `flag > file > default`, field by field. Unset flags are `None` (or
/// `false` for switches). Keys in the subcommand's own table must name an
/// option; top-level keys that do not apply are ignored.
pub fn resolve<T: Layered>(flags: &T, file: &FileConfig) -> CliResult<T> {
    let as_object = |v: serde_json::Result<Value>| match v {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => unreachable!("option structs serialize to objects"),
        Err(e) => Err(usage(e.to_string())),
    };
    let mut merged = as_object(serde_json::to_value(flags))?;
    let defaults = as_object(serde_json::to_value(T::defaults()))?;
    if let Some(k) = file.section.keys().find(|k| !merged.contains_key(*k)) {
        return Err(usage(format!("unknown config key `{k}`")));
    }
    for (k, v) in merged.iter_mut() {
        if matches!(v, Value::Null | Value::Bool(false)) {
            if let Some(f) = file.get(k) {
                *v = f.clone();
            }
        }
        if v.is_null() {
            if let Some(d) = defaults.get(k) {
                *v = d.clone();
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("config: {e}")))
}

/// The JSON document every subcommand reports.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: Option<u64>,
    pub config: &'a C,
    pub result: R,
}

impl<'a, C: Serialize, R: Serialize> Envelope<'a, C, R> {
    pub fn new(command: &'a str, seed: Option<u64>, config: &'a C, result: R) -> Self {
        Envelope {
            tool: "canon-gnn",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            result,
        }
    }

    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// Writes to `path`, or to stdout when no path is given.
pub(crate) fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e}");
            EXIT_DOMAIN
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os())
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| usage(format!("cannot configure threads: {e}")))?;
    }
    let name = cli.command.name();
    let file = match &cli.config {
        Some(p) => FileConfig::load(p, name)?,
        None => FileConfig::default(),
    };
    let ctx = commands::Context {
        file,
        verbose: cli.verbose,
        command: name,
    };
    match &cli.command {
        Command::Canonize(a) => commands::canonize(&ctx, a),
        Command::Encode(a) => commands::encode(&ctx, a),
        Command::ValidateUgc(a) => commands::validate(&ctx, a),
        Command::Distance(a) => commands::distance(&ctx, a),
        Command::Isotest(a) => commands::isotest(&ctx, a),
        Command::GenCsl(a) => commands::gen_csl(&ctx, a),
        Command::GenPairs(a) => commands::gen_pairs(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::ProbeStability(a) => commands::probe(&ctx, a),
    }
}
