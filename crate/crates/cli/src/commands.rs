//! Argument definitions and command handlers.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use canoise_core::indep_tests::{run_test, Method, TestConfig};
use canoise_core::inference::{infer_potential_cause, CriterionConfig};
use canoise_core::scm::presets::preset_by_name;
use canoise_core::scm::{Dataset, ModelSpecFile};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::benchmark::{self, BenchmarkConfig};
use crate::report::{Report, Results};
use crate::table1::{self, Table1Config};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCONCLUSIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_WRITE: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn write(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_WRITE,
            message: message.into(),
        }
    }
}

impl From<canoise_core::Error> for CliError {
    fn from(e: canoise_core::Error) -> Self {
        CliError::input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "canoise", version, about = "Conditionally additive noise causal inference")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "CANOISE_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset from a preset or a model-spec file.
    Generate(GenerateArgs),
    /// Run a single independence test.
    Test(TestArgs),
    /// Decide whether x is a potential cause of y.
    Infer(InferArgs),
    /// Reproduce the four-example independence table.
    #[command(name = "reproduce-table1")]
    ReproduceTable1(Table1Args),
    /// Decision rates over many simulated datasets.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub preset: Option<String>,
    /// Model-spec file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(short = 'n', long = "rows")]
    pub n: usize,
    /// Defaults to the seed in the model-spec file, else 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also write hidden columns (flagged in the header comment).
    #[arg(long)]
    pub include_hidden: bool,
    /// Write the model-spec text of the generating model here.
    #[arg(long)]
    pub emit_spec: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct CommonTestArgs {
    #[arg(long, default_value = "cv")]
    pub method: String,
    #[arg(long, default_value_t = 0.01)]
    pub level: f64,
    #[arg(long, default_value_t = 199)]
    pub n_perm: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rows per conditioning stratum.
    #[arg(long, default_value_t = 20)]
    pub stratum_size: usize,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(short)]
    pub x: String,
    #[arg(short)]
    pub y: String,
    /// Conditioning columns.
    #[arg(long, value_delimiter = ',')]
    pub given: Vec<String>,
    #[command(flatten)]
    pub common: CommonTestArgs,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(short)]
    pub x: String,
    #[arg(short)]
    pub y: String,
    /// Candidate conditioning columns.
    #[arg(long, value_delimiter = ',')]
    pub pool: Vec<String>,
    #[command(flatten)]
    pub common: CommonTestArgs,
    #[arg(long, default_value_t = 3)]
    pub max_witness: usize,
    #[arg(long, default_value_t = 8)]
    pub max_pool: usize,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(short = 'n', long = "rows", default_value_t = 20000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0.01)]
    pub level: f64,
    #[arg(long, default_value_t = 199)]
    pub n_perm: usize,
    #[arg(long, default_value = "cv")]
    pub method: String,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// TOML benchmark configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

fn parse_method(s: &str, allow_hsic: bool) -> Result<Method, CliError> {
    let m: Method = s.parse()?;
    if m == Method::Hsic && !allow_hsic {
        return Err(CliError::input("method must be cv or nrr"));
    }
    Ok(m)
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let f = File::open(path).map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))?;
    Dataset::read_csv(f).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn finish(mut report: Report, start: Instant, out: Option<&Path>) -> Result<(), CliError> {
    report.timing.elapsed_ms = start.elapsed().as_millis() as u64;
    report.emit(out)
}

pub fn generate(a: &GenerateArgs) -> Result<i32, CliError> {
    let spec = match (&a.preset, &a.spec) {
        (Some(name), _) => preset_by_name(name)?.spec,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
            ModelSpecFile::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(CliError::input("either --preset or --spec is required")),
    };
    let seed = a.seed.or(spec.seed).unwrap_or(0);
    let full = spec.model.sample(a.n, seed)?;
    let ds = if a.include_hidden { full } else { full.observed_view() };
    let f = File::create(&a.out).map_err(|e| CliError::write(format!("cannot create {}: {e}", a.out.display())))?;
    ds.write_csv(BufWriter::new(f))
        .map_err(|e| CliError::write(format!("cannot write {}: {e}", a.out.display())))?;
    if let Some(p) = &a.emit_spec {
        fs::write(p, spec.to_text()).map_err(|e| CliError::write(format!("cannot write {}: {e}", p.display())))?;
    }
    println!(
        "wrote {} rows x {} columns to {} (seed {seed})",
        ds.n_rows(),
        ds.columns().len(),
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn test_config(c: &CommonTestArgs) -> TestConfig {
    TestConfig {
        level: c.level,
        n_perm: c.n_perm,
        seed: c.seed,
        stratum_size: c.stratum_size,
        ..TestConfig::default()
    }
}

pub fn test(a: &TestArgs, argv: &[String]) -> Result<i32, CliError> {
    let start = Instant::now();
    let method = parse_method(&a.common.method, true)?;
    let ds = load_dataset(&a.data)?;
    let given: Vec<&str> = a.given.iter().map(String::as_str).collect();
    let cfg = test_config(&a.common);
    let v = run_test(method, &ds, &a.y, &a.x, &given, &cfg)?;
    eprintln!(
        "{:?} test of {} against {} given [{}]: statistic {:.6e}, p = {:.4} -> {}",
        method,
        a.y,
        a.x,
        given.join(","),
        v.statistic,
        v.p_value,
        if v.independent { "independent" } else { "dependent" }
    );
    let config = json!({ "method": method, "x": a.x, "y": a.y, "given": a.given, "test": cfg });
    let report = Report::new("test", argv, config, vec![cfg.seed], Results::Verdict(v));
    finish(report, start, a.out.as_deref())?;
    Ok(EXIT_OK)
}

pub fn infer(a: &InferArgs, argv: &[String]) -> Result<i32, CliError> {
    let start = Instant::now();
    let method = parse_method(&a.common.method, false)?;
    let ds = load_dataset(&a.data)?;
    let pool: Vec<&str> = a.pool.iter().map(String::as_str).collect();
    let cfg = CriterionConfig {
        method,
        level: a.common.level,
        n_perm: a.common.n_perm,
        max_pool_size: a.max_pool,
        max_witness_size: a.max_witness,
        seed: a.common.seed,
        test: TestConfig {
            stratum_size: a.common.stratum_size,
            ..TestConfig::default()
        },
    };
    let config = json!({ "x": a.x, "y": a.y, "pool": a.pool, "criterion": cfg });
    match infer_potential_cause(&ds, &a.x, &a.y, &pool, &cfg) {
        Ok(d) => {
            let code = if d.is_potential_cause() { EXIT_OK } else { EXIT_INCONCLUSIVE };
            match &d.witness_set {
                Some(w) => eprintln!("{} is a potential cause of {} (witness set [{}])", a.x, a.y, w.join(",")),
                None => eprintln!("inconclusive for {} -> {}", a.x, a.y),
            }
            let report = Report::new("infer", argv, config, vec![cfg.seed], Results::Decision(d));
            finish(report, start, a.out.as_deref())?;
            Ok(code)
        }
        Err(e) => {
            if a.out.is_some() {
                let report = Report::new(
                    "infer",
                    argv,
                    config,
                    vec![cfg.seed],
                    Results::InferenceFailure {
                        error: e.error.to_string(),
                        evidence: e.evidence.clone(),
                    },
                );
                finish(report, start, a.out.as_deref())?;
            }
            Err(CliError::input(e.to_string()))
        }
    }
}

pub fn reproduce_table1(a: &Table1Args, argv: &[String]) -> Result<i32, CliError> {
    let start = Instant::now();
    let cfg = Table1Config {
        n: a.n,
        seeds: a.seeds,
        level: a.level,
        n_perm: a.n_perm,
        method: parse_method(&a.method, false)?,
        base_seed: a.base_seed,
    };
    if cfg.seeds == 0 {
        return Err(CliError::input("need at least one seed"));
    }
    let r = table1::reproduce_table1(&cfg)?;
    print!("{}", table1::render(&r));
    let code = if r.all_match { EXIT_OK } else { EXIT_INCONCLUSIVE };
    let report = Report::new(
        "reproduce-table1",
        argv,
        serde_json::to_value(&cfg).expect("config serializes"),
        cfg.seed_list(),
        Results::Table1(r),
    );
    if let Some(out) = &a.out {
        finish(report, start, Some(out))?;
    }
    Ok(code)
}

pub fn benchmark(a: &BenchmarkArgs, argv: &[String]) -> Result<i32, CliError> {
    let start = Instant::now();
    let text = fs::read_to_string(&a.config)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", a.config.display())))?;
    let cfg = BenchmarkConfig::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", a.config.display())))?;
    let r = benchmark::run_benchmark(&cfg)?;
    print!("{}", benchmark::render(&r));
    let seeds = (0..cfg.seeds as u64).map(|k| cfg.base_seed + k).collect();
    let report = Report::new(
        "benchmark",
        argv,
        serde_json::to_value(&cfg).expect("config serializes"),
        seeds,
        Results::Benchmark(r),
    );
    if let Some(out) = &a.out {
        finish(report, start, Some(out))?;
    }
    Ok(EXIT_OK)
}

/// Runs a parsed command line; `argv` is echoed into reports.
pub fn run(cli: &Cli, argv: &[String]) -> i32 {
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_INPUT;
        }
        // Fails only if a pool already exists, in which case it is reused.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let res = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Test(a) => test(a, argv),
        Command::Infer(a) => infer(a, argv),
        Command::ReproduceTable1(a) => reproduce_table1(a, argv),
        Command::Benchmark(a) => benchmark(a, argv),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
