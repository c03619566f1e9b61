//! `sweep`: runs one command over a grid of config overrides, each run in
//! its own subdirectory, fanned out over `--jobs` workers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{Command, Ctx, Outcome};
use crate::error::CliError;
use crate::report::{Check, Status};
use crate::{resolve_config, run_command, CommandKind, RunOptions};

/// One swept key. `key` is a dotted path into the config, e.g.
/// `problem.alpha` or `modulus.beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub key: String,
    pub values: Vec<Value>,
}

/// An explicitly listed run; its config is merged over `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedRun {
    pub name: String,
    pub config: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub command: String,
    /// Config shared by every run; `null` means the command defaults.
    #[serde(default)]
    pub base: Value,
    /// Cartesian product of these axes, run as `run_000`, `run_001`, ...
    #[serde(default)]
    pub vary: Vec<Axis>,
    #[serde(default)]
    pub runs: Vec<NamedRun>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            command: "dini".into(),
            base: Value::Null,
            vary: vec![Axis { key: "modulus.beta".into(), values: vec![0.1.into(), 0.25.into(), 0.6.into(), 1.0.into()] }],
            runs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
struct Plan {
    name: String,
    overrides: Value,
    config: Value,
}

#[derive(Debug, Serialize)]
struct RunRow {
    name: String,
    overrides: Value,
    status: Option<Status>,
    exit_code: i32,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct SweepResult {
    command: String,
    runs: Vec<RunRow>,
}

fn set_path(root: &mut Value, key: &str, v: Value) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Schema(format!("sweep key {key:?} has an empty segment")));
    }
    for (i, part) in parts.iter().enumerate() {
        if cur.is_null() {
            *cur = Value::Object(Map::new());
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Schema(format!("sweep key {key:?}: {part:?} is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), v);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split yields at least one segment")
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

impl SweepConfig {
    fn kind(&self) -> Result<CommandKind, CliError> {
        match CommandKind::parse(&self.command) {
            Some(CommandKind::Sweep) => Err(CliError::Schema("a sweep cannot run another sweep".into())),
            Some(k) => Ok(k),
            None => Err(CliError::Schema(format!("unknown command {:?}", self.command))),
        }
    }

    /// Every run with its fully resolved config. The base is resolved first
    /// so overrides land on a complete config.
    fn plan(&self) -> Result<(CommandKind, Vec<Plan>), CliError> {
        let kind = self.kind()?;
        if self.vary.is_empty() && self.runs.is_empty() {
            return Err(CliError::Schema("sweep needs at least one axis in vary or one entry in runs".into()));
        }
        let base = if self.base.is_null() { None } else { Some(self.base.clone()) };
        let base = resolve_config(kind, base)?;
        let mut plans = Vec::new();
        if !self.vary.is_empty() {
            if let Some(a) = self.vary.iter().find(|a| a.values.is_empty()) {
                return Err(CliError::Schema(format!("sweep axis {:?} has no values", a.key)));
            }
            let total: usize = self.vary.iter().map(|a| a.values.len()).product();
            for idx in 0..total {
                let mut rem = idx;
                let mut cfg = base.clone();
                let mut ov = Map::new();
                // last axis varies fastest
                let mut picks = vec![0; self.vary.len()];
                for (j, a) in self.vary.iter().enumerate().rev() {
                    picks[j] = rem % a.values.len();
                    rem /= a.values.len();
                }
                for (a, &k) in self.vary.iter().zip(&picks) {
                    set_path(&mut cfg, &a.key, a.values[k].clone())?;
                    ov.insert(a.key.clone(), a.values[k].clone());
                }
                plans.push(Plan { name: format!("run_{idx:03}"), overrides: Value::Object(ov), config: cfg });
            }
        }
        for r in &self.runs {
            if r.name.is_empty() || r.name.contains(['/', '\\']) || r.name == "." || r.name == ".." {
                return Err(CliError::Schema(format!("run name {:?} is not a plain directory name", r.name)));
            }
            let mut cfg = base.clone();
            merge(&mut cfg, &r.config);
            plans.push(Plan { name: r.name.clone(), overrides: r.config.clone(), config: cfg });
        }
        let mut names: Vec<&str> = plans.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Schema(format!("duplicate run name {:?}", w[0])));
        }
        for p in &mut plans {
            p.config = resolve_config(kind, Some(p.config.clone()))
                .map_err(|e| CliError::Schema(format!("run {}: {e}", p.name)))?;
        }
        Ok((kind, plans))
    }
}

pub struct Sweep;

impl Command for Sweep {
    type Config = SweepConfig;

    fn validate(cfg: &SweepConfig) -> Result<(), CliError> {
        cfg.plan().map(|_| ())
    }

    fn compute(cfg: &SweepConfig, ctx: &Ctx) -> Result<Outcome, CliError> {
        let (kind, plans) = cfg.plan()?;
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<Status, CliError>>>> = Mutex::new((0..plans.len()).map(|_| None).collect());
        let workers = ctx.jobs.clamp(1, plans.len().max(1));
        std::thread::scope(|sc| {
            for _ in 0..workers {
                sc.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(p) = plans.get(i) else { break };
                    // every run gets the same seed so results do not depend
                    // on the schedule
                    let opts = RunOptions { out: ctx.out.join(&p.name), seed: ctx.seed, jobs: 1 };
                    let r = run_command(kind, Some(p.config.clone()), &opts);
                    slots.lock().expect("sweep slot lock")[i] = Some(r);
                });
            }
        });
        let slots = slots.into_inner().expect("sweep slot lock");
        let mut out = Outcome::default();
        let mut rows = Vec::new();
        for (p, r) in plans.into_iter().zip(slots) {
            let r = r.expect("every planned run finishes");
            let (status, exit_code, error) = match r {
                Ok(s) => (Some(s), s.exit_code(), None),
                Err(e) => (None, e.exit_code(), Some(e.to_string())),
            };
            out.check(Check::holds(format!("{}_ok", p.name), exit_code == 0));
            rows.push(RunRow { name: p.name, overrides: p.overrides, status, exit_code, error });
        }
        out.result = super::to_value(SweepResult { command: kind.name().into(), runs: rows });
        Ok(out)
    }
}
