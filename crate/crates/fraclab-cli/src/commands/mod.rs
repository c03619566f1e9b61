//! One module per subcommand. Each owns its config schema, validates it
//! before anything is computed and returns checks, a JSON result and CSV
//! tables.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;
use crate::report::{Check, Table};

pub mod counterexample;
pub mod funcalc;
pub mod ml;
pub mod reglab;
pub mod solve;
pub mod sweep;

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub result: Value,
    pub checks: Vec<Check>,
    /// `(file suffix, table)`; written as `<command>_<suffix>.csv`.
    pub tables: Vec<(String, Table)>,
}

impl Outcome {
    pub fn new(result: impl Serialize) -> Self {
        Self { result: to_value(result), checks: Vec::new(), tables: Vec::new() }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn table(&mut self, suffix: &str, t: Table) {
        self.tables.push((suffix.to_string(), t));
    }
}

pub(crate) fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("results serialize to JSON")
}

pub struct Ctx<'a> {
    pub seed: u64,
    pub jobs: usize,
    pub out: &'a Path,
}

pub trait Command {
    type Config: Serialize + DeserializeOwned + Default;

    /// Range checks and model building that must succeed before the output
    /// directory is touched. Errors here are schema violations.
    fn validate(cfg: &Self::Config) -> Result<(), CliError>;

    fn compute(cfg: &Self::Config, ctx: &Ctx) -> Result<Outcome, CliError>;
}
