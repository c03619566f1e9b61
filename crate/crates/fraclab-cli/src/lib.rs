//! Command-line driver for `fraclab`: JSON configs in, JSON reports and CSV
//! tables out.
//!
//! Exit status: 0 when every asserted check passes, 1 when a check fails or
//! the computation errors (the report is still written), 2 for an invalid
//! config, 3 for I/O failures.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use commands::{Command, Ctx};
pub use error::CliError;
use error::{io, schema};
use report::{ensure_writable, write_atomic, Report, Status};

/// Seed of the randomized checks when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommandKind {
    MlEval,
    FuncalcVerify,
    Solve,
    Dini,
    Symbol,
    Hormander,
    Rstudy,
    Counterexample,
    Sweep,
}

impl CommandKind {
    pub const ALL: [CommandKind; 9] = [
        Self::MlEval,
        Self::FuncalcVerify,
        Self::Solve,
        Self::Dini,
        Self::Symbol,
        Self::Hormander,
        Self::Rstudy,
        Self::Counterexample,
        Self::Sweep,
    ];

    /// Name as typed on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Self::MlEval => "ml eval",
            Self::FuncalcVerify => "funcalc verify",
            Self::Solve => "solve",
            Self::Dini => "dini",
            Self::Symbol => "symbol",
            Self::Hormander => "hormander",
            Self::Rstudy => "rstudy",
            Self::Counterexample => "counterexample",
            Self::Sweep => "sweep",
        }
    }

    /// Stem of the report file and its CSV companions.
    pub fn stem(self) -> String {
        self.name().replace(' ', "_")
    }

    /// Accepts `ml eval`, `ml_eval` and `ml-eval`.
    pub fn parse(s: &str) -> Option<Self> {
        let norm = s.trim().replace(['_', '-'], " ");
        Self::ALL.into_iter().find(|k| k.name() == norm)
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { out: PathBuf::from("out"), seed: DEFAULT_SEED, jobs: 1 }
    }
}

/// Reads a config file. A missing or unreadable file is an I/O failure,
/// malformed JSON a schema violation.
pub fn load_config(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io(path.display(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

macro_rules! dispatch {
    ($kind:expr, $f:ident, $($arg:expr),*) => {
        match $kind {
            CommandKind::MlEval => $f::<commands::ml::MlEval>($($arg),*),
            CommandKind::FuncalcVerify => $f::<commands::funcalc::FuncalcVerify>($($arg),*),
            CommandKind::Solve => $f::<commands::solve::Solve>($($arg),*),
            CommandKind::Dini => $f::<commands::reglab::Dini>($($arg),*),
            CommandKind::Symbol => $f::<commands::reglab::Symbol>($($arg),*),
            CommandKind::Hormander => $f::<commands::reglab::Hormander>($($arg),*),
            CommandKind::Rstudy => $f::<commands::reglab::RStudy>($($arg),*),
            CommandKind::Counterexample => $f::<commands::counterexample::Counterexample>($($arg),*),
            CommandKind::Sweep => $f::<commands::sweep::Sweep>($($arg),*),
        }
    };
}

fn parse_typed<C: Command>(config: Option<Value>) -> Result<C::Config, CliError> {
    match config {
        None => Ok(C::Config::default()),
        Some(v) => serde_json::from_value(v).map_err(schema),
    }
}

fn resolve_typed<C: Command>(config: Option<Value>) -> Result<Value, CliError> {
    let cfg = parse_typed::<C>(config)?;
    C::validate(&cfg)?;
    Ok(commands::to_value(&cfg))
}

/// Parses and validates a config, filling in defaults; `None` yields the
/// default config of the command.
pub fn resolve_config(kind: CommandKind, config: Option<Value>) -> Result<Value, CliError> {
    dispatch!(kind, resolve_typed, config)
}

fn run_typed<C: Command>(kind: CommandKind, config: Option<Value>, opts: &RunOptions) -> Result<Status, CliError> {
    if opts.jobs == 0 {
        return Err(schema("--jobs must be at least 1"));
    }
    let cfg = parse_typed::<C>(config)?;
    C::validate(&cfg)?;
    ensure_writable(&opts.out)?;
    let mut report = Report::new(kind.name(), opts.seed, commands::to_value(&cfg));
    let ctx = Ctx { seed: opts.seed, jobs: opts.jobs, out: &opts.out };
    let stem = kind.stem();
    match C::compute(&cfg, &ctx) {
        Ok(outcome) => {
            report.status = if outcome.checks.iter().all(|c| c.passed) { Status::Ok } else { Status::CheckFailed };
            report.checks = outcome.checks;
            report.result = outcome.result;
            for (suffix, table) in &outcome.tables {
                let name = format!("{stem}_{suffix}.csv");
                table.write(&opts.out.join(&name))?;
                report.files.push(name);
            }
        }
        Err(CliError::Numeric(msg)) => {
            report.status = Status::Error;
            report.error = Some(msg);
        }
        Err(e) => return Err(e),
    }
    write_atomic(&opts.out.join(format!("{stem}.json")), &report.to_json())?;
    Ok(report.status)
}

/// Runs one command and writes `<out>/<command>.json` plus its CSV files.
pub fn run_command(kind: CommandKind, config: Option<Value>, opts: &RunOptions) -> Result<Status, CliError> {
    dispatch!(kind, run_typed, kind, config, opts)
}

/// `run_command` folded into an exit status, with errors on stderr.
pub fn run(kind: CommandKind, config_path: Option<&Path>, opts: &RunOptions) -> i32 {
    let res = config_path
        .map(load_config)
        .transpose()
        .and_then(|cfg| run_command(kind, cfg, opts));
    match res {
        Ok(status) => {
            if status != Status::Ok {
                eprintln!("fraclab {kind}: {status:?}; see {}", opts.out.join(format!("{}.json", kind.stem())).display());
            }
            status.exit_code()
        }
        Err(e) => {
            eprintln!("fraclab {kind}: {e}");
            e.exit_code()
        }
    }
}
