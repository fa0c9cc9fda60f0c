//! TOML configuration with strict keys and dotted `key=value` overrides.
//!
//! Top-level keys describe the benchmark experiment; `[[methods]]` lists the
//! method configs; `[sparse]` and `[tune]` configure their subcommands.
//!
//! ```toml
//! objective = "ackley"
//! dims = [10]
//! trials = 10
//!
//! [[methods]]
//! method = "pgho"
//! eta0 = 1.0
//! ```
//!
//! Overrides address nested values by dotted path, with array indices as
//! numbers: `trials=3`, `methods.0.eta0=0.5`, `sparse.seeds=[4,5]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::harness::{ExperimentSpec, TuneSpec};
use crate::optimizers::{Method, RunConfig};
use crate::sparse::SparseSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub objective: String,
    /// The first entry is the dimension for single-dimension subcommands.
    pub dims: Vec<usize>,
    pub trials: u64,
    pub budget: u64,
    pub success_threshold: f64,
    pub master_seed: u64,
    pub strict_errors: bool,
    pub checkpoints: Vec<u64>,
    pub methods: Vec<RunConfig>,
    pub sparse: SparseSpec,
    pub tune: TuneSpec,
}

/// Benchmark defaults: PGH-GD with `ε = 1`, `T = 200`, `K = 4`, cosine step
/// size from 1.0 down to 0.005, classical GH with the same settings, and
/// random search.
pub fn default_methods() -> Vec<RunConfig> {
    let pgho = RunConfig {
        method: Method::Pgho,
        homotopy_steps: 200,
        samples: 4,
        eta0: 1.0,
        eta_min: 0.005,
        ..RunConfig::default()
    };
    let gh = RunConfig {
        method: Method::Gh,
        ..pgho.clone()
    };
    let prs = RunConfig {
        method: Method::Prs,
        ..RunConfig::default()
    };
    vec![pgho, gh, prs]
}

impl Default for Config {
    fn default() -> Self {
        Self {
            objective: "ackley".into(),
            dims: vec![10],
            trials: 10,
            budget: 200_000,
            success_threshold: 5e-2,
            master_seed: 0,
            strict_errors: false,
            checkpoints: Vec::new(),
            methods: default_methods(),
            sparse: SparseSpec::default(),
            tune: TuneSpec::default(),
        }
    }
}

impl Config {
    /// Layers `text` over the defaults, applies `overrides` in order, then
    /// deserializes.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let file: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid TOML: {e}")))?;
        let mut table = Table::try_from(Config::default()).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut table, file);
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Config = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Config("dims must list at least one dimension".into()));
        }
        let seeds = [self.master_seed, self.tune.seed]
            .into_iter()
            .chain(self.methods.iter().chain(&self.sparse.methods).map(|m| m.seed))
            .chain(self.sparse.seeds.iter().copied());
        for seed in seeds {
            if seed > i64::MAX as u64 {
                return Err(Error::Config(format!("seed {seed} exceeds the TOML integer range")));
            }
        }
        self.experiment(self.dims[0]).validate()?;
        self.sparse.validate()
    }

    pub fn experiment(&self, dim: usize) -> ExperimentSpec {
        ExperimentSpec {
            objective: self.objective.clone(),
            dim,
            methods: self.methods.clone(),
            trials: self.trials,
            budget: self.budget,
            success_threshold: self.success_threshold,
            master_seed: self.master_seed,
            strict_errors: self.strict_errors,
            checkpoints: self.checkpoints.clone(),
        }
    }
}

/// Deep-merges tables; any other value, arrays included, replaces wholesale.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets `key=value` in the raw table. Missing tables along the path are
/// created, so unknown keys surface as deserialization errors naming them.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{key}`")));
    }
    let value = parse_value(raw.trim());
    let mut slot = table
        .entry(parts[0].to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    for part in &parts[1..] {
        slot = match slot {
            Value::Table(t) => t.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new())),
            Value::Array(a) => {
                let i: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("`{part}` in `{key}` is not an array index")))?;
                let len = a.len();
                a.get_mut(i)
                    .ok_or_else(|| Error::Config(format!("index {i} in `{key}` is out of range (len {len})")))?
            }
            _ => return Err(Error::Config(format!("`{key}` descends into a non-table value"))),
        };
    }
    *slot = value;
    Ok(())
}
