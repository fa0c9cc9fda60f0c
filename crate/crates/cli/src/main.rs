//! `pgho`: run benchmark, dimension-scan, convergence, sparse-recovery,
//! verification and tuning experiments and write their data files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pgho::config::Config;
use pgho::harness::{self, Format, Results, TOOL_VERSION};
use pgho::optimizers::Method;
use pgho::{sparse, verify, Error};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "pgho", version, about = "Soft-min Gaussian homotopy optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dotted `key=value` override, applied after the config file. Repeatable.
    #[arg(long = "override", short = 'o', global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, env = "PGHO_OUT_DIR", default_value = "results")]
    out: PathBuf,
    /// Replaces `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for trial-level parallelism; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Success rate and evaluations-to-success per method.
    Bench,
    /// Success rate across the configured `dims`.
    Dims,
    /// Median and interquartile best-f curves at `checkpoints`.
    Curves,
    /// Regularization path on generated sparse-recovery problems.
    Sparse,
    /// Quadrature and estimator checks; exits nonzero if any fails.
    Verify {
        #[arg(long, default_value_t = pgho::smoothing::quadrature::DEFAULT_NODES)]
        nodes: usize,
    },
    /// Grid search over step size and homotopy length for the first homotopy method.
    Tune,
    /// Re-runs the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bench => "bench",
            Command::Dims => "dims",
            Command::Curves => "curves",
            Command::Sparse => "sparse",
            Command::Verify { .. } => "verify",
            Command::Tune => "tune",
            Command::Replay { .. } => "replay",
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidConfig(_)
            | Error::UnknownObjective(_)
            | Error::InvalidDimension { .. }
            | Error::InfeasibleShape(_)
            | Error::BudgetTooSmall { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn resolve_config(common: &Common) -> Result<Config, Failure> {
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("master_seed={seed}"));
    }
    let config = match &common.config {
        Some(path) => Config::load(path, &overrides)?,
        None => Config::from_toml_str("", &overrides)?,
    };
    Ok(config)
}

fn write_output(common: &Common, name: &str, results: &Results<'_>, config: &Config) -> Result<PathBuf, Failure> {
    let path = common.out.join(format!("{name}.{}", ext(common.format)));
    harness::export_results(results, config, &path, common.format).map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(path)
}

fn write_manifest(common: &Common, command: &Command, config: &Config, outputs: &[PathBuf]) -> Result<(), Failure> {
    let nodes = match command {
        Command::Verify { nodes } => Some(*nodes),
        _ => None,
    };
    let manifest = json!({
        "tool": TOOL_VERSION,
        "command": command.name(),
        "format": ext(common.format),
        "nodes": nodes,
        "master_seed": config.master_seed,
        "sparse_seeds": config.sparse.seeds,
        "tune_seed": config.tune.seed,
        "config": config.to_toml_string()?,
        "outputs": outputs.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    let path = common.out.join(format!("{}.manifest.json", command.name()));
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Runtime(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn print_stats(stats: &harness::AggregateStats) {
    println!("{} d={}", stats.objective, stats.dim);
    for m in &stats.methods {
        let mean = m.mean_evals_success.map_or("N".to_string(), |v| format!("{v:.0}"));
        println!(
            "  {:<9} success {:>3}/{:<3} errors {:<2} mean evals {:>8}",
            m.method, m.successes, m.trials, m.errors, mean
        );
    }
}

fn run(command: &Command, common: &Common, config: &Config) -> Result<ExitCode, Failure> {
    fs::create_dir_all(&common.out)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", common.out.display())))?;
    let name = command.name();
    let mut code = ExitCode::SUCCESS;
    let outputs = match command {
        Command::Bench => {
            let stats = harness::run_experiment(&config.experiment(config.dims[0]))?;
            print_stats(&stats);
            vec![write_output(common, name, &Results::Stats(&[stats]), config)?]
        }
        Command::Dims => {
            let rows = harness::success_vs_dimension(&config.experiment(config.dims[0]), &config.dims)?;
            for r in &rows {
                println!("{} d={:<3} {:<9} success rate {:.2}", r.objective, r.dim, r.method, r.success_rate);
            }
            vec![write_output(common, name, &Results::Dims(&rows), config)?]
        }
        Command::Curves => {
            if config.checkpoints.is_empty() {
                return Err(Failure::Config("curves requires a non-empty `checkpoints` list".into()));
            }
            let spec = config.experiment(config.dims[0]);
            let curves = harness::convergence_curves(&spec, &config.checkpoints)?;
            for c in &curves {
                let last = c.median.last().copied().flatten();
                println!("{:<9} final median best f {}", c.method, last.map_or("N".into(), |v| format!("{v:.3e}")));
            }
            vec![write_output(common, name, &Results::Curves(&curves), config)?]
        }
        Command::Sparse => {
            let records = sparse::run_sparse_experiment(&config.sparse)?;
            for label in config.sparse.methods.iter().map(|m| m.label()) {
                let path = sparse::mean_path(&records, &label);
                let best = path.iter().map(|e| e.objective).fold(f64::INFINITY, f64::min);
                println!("{label:<9} lowest mean final objective {best:.4e}");
            }
            vec![write_output(common, name, &Results::Path(&records), config)?]
        }
        Command::Verify { nodes } => {
            let report = verify::verify_suite(*nodes)?;
            print!("{report}");
            if !report.all_passed() {
                code = ExitCode::from(2);
            }
            let path = common.out.join(format!("{name}.json"));
            let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
            fs::write(&path, text + "\n").map_err(|e| Failure::Runtime(e.to_string()))?;
            vec![path]
        }
        Command::Tune => {
            let method = config
                .methods
                .iter()
                .find(|m| matches!(m.method, Method::Pgho | Method::Gh))
                .ok_or_else(|| Failure::Config("tune needs a pgho or gh method".into()))?;
            let report = harness::tune(&config.experiment(config.dims[0]), method, &config.tune)?;
            println!(
                "best eta0 {} homotopy_steps {}",
                report.best.eta0, report.best.homotopy_steps
            );
            vec![write_output(common, name, &Results::Tune(&report), config)?]
        }
        Command::Replay { .. } => unreachable!("replay is resolved before dispatch"),
    };
    write_manifest(common, command, config, &outputs)?;
    Ok(code)
}

/// Reads a manifest back into the command, format and config it recorded.
fn load_manifest(path: &Path) -> Result<(Command, Format, Config), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("invalid manifest: {e}")))?;
    let field = |k: &str| doc.get(k).ok_or_else(|| Failure::Config(format!("manifest lacks `{k}`")));
    let config_text = field("config")?
        .as_str()
        .ok_or_else(|| Failure::Config("manifest `config` is not a string".into()))?;
    let config = Config::from_toml_str(config_text, &[])?;
    let format: Format = field("format")?.as_str().unwrap_or_default().parse()?;
    let command = match field("command")?.as_str().unwrap_or_default() {
        "bench" => Command::Bench,
        "dims" => Command::Dims,
        "curves" => Command::Curves,
        "sparse" => Command::Sparse,
        "tune" => Command::Tune,
        "verify" => Command::Verify {
            nodes: field("nodes")?
                .as_u64()
                .ok_or_else(|| Failure::Config("manifest `nodes` missing".into()))? as usize,
        },
        other => return Err(Failure::Config(format!("manifest records unknown command `{other}`"))),
    };
    Ok((command, format, config))
}

fn main_inner(cli: Cli) -> Result<ExitCode, Failure> {
    let (command, common, config) = match &cli.command {
        Command::Replay { manifest } => {
            let (command, format, config) = load_manifest(manifest)?;
            (command, Common { format, ..cli.common.clone() }, config)
        }
        other => (other.clone(), cli.common.clone(), resolve_config(&cli.common)?),
    };
    match common.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::Config(format!("cannot start {n} workers: {e}")))?;
            pool.install(|| run(&command, &common, &config))
        }
        None => run(&command, &common, &config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(cli) {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
