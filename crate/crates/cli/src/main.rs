use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use autoblock::autoblock::{autoblock, AutoblockConfig, AutoblockTrace};
use autoblock::bench::{run_suite, BenchOptions, SUITES};
use autoblock::diagnostics::{efficiency_report, EfficiencyReport};
use autoblock::example_models::{self, plan_with_blocks, CATALOG};
use autoblock::sampler::SamplerStats;
use autoblock::{run_mcmc, AutoblockError, ModelError, ModelGraph, SamplerPlan};
use clap::{Parser, Subcommand};
use serde::Serialize;

/// Directory for benchmark reports when `--out` is not given.
const REPORT_DIR_VAR: &str = "AUTOBLOCK_REPORT_DIR";

#[derive(Parser)]
#[command(name = "autoblock", version, about = "Adaptive MCMC with automated parameter blocking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one sampling plan and write the chain and its efficiency report.
    Run {
        #[arg(long)]
        model: PathBuf,
        /// `all-scalar`, `all-blocked`, or a JSON file listing blocks of slot names.
        #[arg(long, default_value = "all-scalar")]
        plan: String,
        #[arg(long, default_value_t = 10_000)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Chain CSV path; the report goes next to it with a `.json` extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for the most efficient blocking.
    Autoblock {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated cut heights.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 10)]
        max_outer: usize,
        #[arg(long, default_value_t = 0.5)]
        discard: f64,
        /// Score candidates concurrently; runtime comparisons become unreliable.
        #[arg(long)]
        parallel: bool,
        /// Trace JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Also write a chain of the final plan, sampled with `--seed`.
        #[arg(long)]
        chain_out: Option<PathBuf>,
    },
    /// Compare sampling schemes on a named suite. Without a suite, lists them.
    Benchmark {
        suite: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        iterations: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        max_outer: usize,
        /// Chains per scheme, run in rotation; rows average over them.
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        replicates: u64,
        /// Output directory; defaults to $AUTOBLOCK_REPORT_DIR, then `reports`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect the bundled example models.
    Examples {
        #[command(subcommand)]
        action: ExamplesAction,
    },
}

#[derive(Subcommand)]
enum ExamplesAction {
    List,
    /// Print or write an example's model JSON.
    Export {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Model(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Model(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn to_json(&self) -> String {
        let (kind, message) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Model(m) => ("model", m),
            CliError::Runtime(m) => ("runtime", m),
        };
        serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<AutoblockError> for CliError {
    fn from(e: AutoblockError) -> Self {
        match e {
            AutoblockError::Model(e) => e.into(),
            AutoblockError::Plan(e) => CliError::Model(e.to_string()),
            AutoblockError::Config(m) => CliError::Usage(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn load_model(path: &Path) -> Result<ModelGraph, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Model(format!("{}: {e}", path.display())))?;
    Ok(ModelGraph::from_json(&text)?)
}

fn parse_plan(spec: &str, graph: &ModelGraph) -> Result<SamplerPlan, CliError> {
    let d = graph.dim();
    match spec {
        "all-scalar" => Ok(SamplerPlan::all_scalar(d)),
        "all-blocked" => Ok(SamplerPlan::all_blocked(d)),
        path => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("plan {path}: {e}")))?;
            let blocks: Vec<Vec<String>> =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("plan {path}: {e}")))?;
            plan_with_blocks(graph.slot_names(), &blocks).map_err(|e| CliError::Model(e.to_string()))
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Serialize)]
struct RunReport<'a> {
    model: String,
    iterations: usize,
    seed: u64,
    plan: Vec<Vec<String>>,
    efficiency: &'a EfficiencyReport,
    samplers: &'a [SamplerStats],
}

fn chain_csv(chain: &autoblock::ChainMatrix) -> Result<Vec<u8>, CliError> {
    let mut csv = Vec::new();
    chain.write_csv(&mut csv).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(csv)
}

fn cmd_run(model: &Path, plan: &str, iterations: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let mut graph = load_model(model)?;
    let plan = parse_plan(plan, &graph)?;
    if iterations == 0 {
        return Err(CliError::Usage("iterations must be positive".into()));
    }
    let chain = run_mcmc(&mut graph, &plan, iterations, seed)?;
    write_file(out, &chain_csv(&chain)?)?;
    // Reports need enough samples for the autocorrelation fit.
    let efficiency = efficiency_report(&chain).map_err(|e| CliError::Usage(e.to_string()))?;
    let report = RunReport {
        model: model.display().to_string(),
        iterations,
        seed,
        plan: plan.named_groups(graph.slot_names()),
        efficiency: &efficiency,
        samplers: &chain.sampler_stats,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&sidecar(out), json.as_bytes())
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("grid value `{s}`: {e}"))))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_autoblock(
    model: &Path,
    iterations: usize,
    seed: u64,
    grid: Option<&str>,
    max_outer: usize,
    discard: f64,
    parallel: bool,
    out: &Path,
    chain_out: Option<&Path>,
) -> Result<(), CliError> {
    let graph = load_model(model)?;
    let mut config = AutoblockConfig { iterations, seed, max_outer, discard, parallel, ..Default::default() };
    if let Some(g) = grid {
        config.grid = parse_grid(g)?;
    }
    let trace: AutoblockTrace = autoblock(&graph, &config)?;
    for sweep in &trace.sweeps {
        let sel = sweep.selection();
        eprintln!(
            "sweep {}: {} candidates, selected height {} with efficiency {:.4}",
            sweep.index,
            sweep.candidates.len(),
            sweep.selected_height,
            sel.report.overall_efficiency
        );
    }
    let json = serde_json::to_string_pretty(&trace).expect("trace serializes");
    write_file(out, json.as_bytes())?;
    if let Some(path) = chain_out {
        let mut graph = graph;
        let chain = run_mcmc(&mut graph, &trace.final_plan, iterations, seed)?;
        write_file(path, &chain_csv(&chain)?)?;
    }
    Ok(())
}

fn cmd_benchmark(
    suite: Option<&str>,
    iterations: usize,
    seed: u64,
    max_outer: usize,
    replicates: usize,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let Some(suite) = suite.filter(|s| !s.is_empty()) else {
        let mut stdout = io::stdout().lock();
        for (name, about) in SUITES {
            writeln!(stdout, "{name:<18} {about}").map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        return Ok(());
    };
    if !SUITES.iter().any(|(s, _)| *s == suite) {
        return Err(CliError::Usage(format!("unknown suite `{suite}`; run `autoblock benchmark` to list suites")));
    }
    let dir = out
        .or_else(|| std::env::var_os(REPORT_DIR_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("reports"));
    let options = BenchOptions {
        iterations,
        seed,
        replicates,
        autoblock: AutoblockConfig { iterations, seed, max_outer, ..Default::default() },
    };
    let report = run_suite(suite, &options)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&dir.join(format!("{suite}.json")), json.as_bytes())?;
    if !report.rows.is_empty() {
        write_file(&dir.join(format!("{suite}-rows.csv")), report.rows_csv().as_bytes())?;
    }
    if !report.curves.is_empty() {
        write_file(&dir.join(format!("{suite}-curves.csv")), report.curves_csv().as_bytes())?;
    }
    for row in report.rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("{} / {}: {}", row.model, row.scheme.label(), row.status);
    }
    Ok(())
}

fn cmd_examples(action: ExamplesAction) -> Result<(), CliError> {
    match action {
        ExamplesAction::List => {
            let mut stdout = io::stdout().lock();
            for name in CATALOG {
                writeln!(stdout, "{name}").map_err(|e| CliError::Runtime(e.to_string()))?;
            }
            Ok(())
        }
        ExamplesAction::Export { name, out } => {
            let example =
                example_models::by_name(&name).ok_or_else(|| CliError::Usage(format!("unknown example `{name}`")))?;
            let json = example.spec.to_json() + "\n";
            match out {
                Some(path) => write_file(&path, json.as_bytes()),
                None => io::stdout().write_all(json.as_bytes()).map_err(|e| CliError::Runtime(e.to_string())),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { model, plan, iterations, seed, out } => cmd_run(&model, &plan, iterations, seed, &out),
        Command::Autoblock { model, iterations, seed, grid, max_outer, discard, parallel, out, chain_out } => {
            cmd_autoblock(&model, iterations, seed, grid.as_deref(), max_outer, discard, parallel, &out, chain_out.as_deref())
        }
        Command::Benchmark { suite, iterations, seed, max_outer, replicates, out } => {
            cmd_benchmark(suite.as_deref(), iterations, seed, max_outer, replicates as usize, out)
        }
        Command::Examples { action } => cmd_examples(action),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.code());
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code())
        }
    }
}
