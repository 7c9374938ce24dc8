use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowbp_core::fpras::FprasError;
use flowbp_core::generate::{generate, GenError, GenParams, Optimum, DEFAULT_GENERATION_BUDGET};
use flowbp_core::report::{self, RunError, SolveOptions};
use flowbp_core::selftest::run_selftest;
use flowbp_core::{emit_dimacs, from_json, parse_dimacs, parse_epsilon, to_json, FlowNetwork, FprasOptions, Rounds};
use serde::Serialize;
use serde_json::json;

const ERROR_SCHEMA: &str = "flowbp.error.v1";

#[derive(Parser)]
#[command(name = "flowbp", version, about = "Min-cost flow by min-sum belief propagation")]
struct Cli {
    /// Worker threads for message updates.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Progress messages on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run message passing and report the estimate.
    Solve {
        #[command(flatten)]
        input: InputArgs,
        /// Round count, or `auto` for the convergence bound.
        #[arg(long, default_value = "auto", value_parser = parse_iters)]
        iters: Rounds,
        /// Write every round's messages as JSON lines to this file.
        #[arg(long, value_name = "FILE")]
        dump_messages: Option<PathBuf>,
        /// Re-anchor messages each round (beliefs shift by constants).
        #[arg(long)]
        normalize: bool,
    },
    /// Decide whether the optimum is unique.
    CheckUnique {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Randomized (1+ε)-approximation by perturbation and decimation.
    Approx {
        #[command(flatten)]
        input: InputArgs,
        /// ε in (0, 1) as `p/q` or a decimal.
        #[arg(long)]
        epsilon: String,
        #[arg(long, env = "FLOWBP_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = flowbp_core::fpras::DEFAULT_RESTART_BUDGET)]
        restart_budget: u32,
    },
    /// Generate a random feasible instance.
    Gen(GenArgs),
    /// Check the engine against the built-in oracles.
    Selftest {
        /// Small batches only.
        #[arg(long)]
        quick: bool,
    },
    /// Time message passing on generated instances of growing size.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "4,6,8")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        cmax: i64,
        #[arg(long, env = "FLOWBP_SEED", default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct InputArgs {
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Instance format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    arcs: usize,
    #[arg(long, default_value_t = 8)]
    cmax: i64,
    #[arg(long, default_value_t = 4)]
    capmax: i64,
    #[arg(long, env = "FLOWBP_SEED", default_value_t = 0)]
    seed: u64,
    /// Resample until the optimum is unique.
    #[arg(long, conflicts_with = "multi_optimum")]
    ensure_unique: bool,
    /// Resample until several optima exist.
    #[arg(long)]
    multi_optimum: bool,
    /// Convex piecewise costs with this many pieces, e.g. `2-3` (JSON only).
    #[arg(long, value_parser = parse_pieces)]
    pieces: Option<(usize, usize)>,
    #[arg(long, value_enum, default_value = "dimacs")]
    format: Format,
    #[arg(long, default_value_t = DEFAULT_GENERATION_BUDGET)]
    budget: u32,
    /// Write here instead of stdout.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dimacs,
    Json,
}

fn parse_iters(s: &str) -> Result<Rounds, String> {
    if s == "auto" {
        return Ok(Rounds::Auto);
    }
    match s.parse::<u64>() {
        Ok(n) if n > 0 => Ok(Rounds::Fixed(n)),
        _ => Err("expected a positive integer or `auto`".into()),
    }
}

fn parse_pieces(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s.split_once('-').unwrap_or((s, s));
    match (lo.parse(), hi.parse()) {
        (Ok(lo), Ok(hi)) if 1 <= lo && lo <= hi => Ok((lo, hi)),
        _ => Err("expected `k` or `lo-hi` with 1 <= lo <= hi".into()),
    }
}

/// A failure with its exit code and machine-readable kind.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(code: u8, kind: &'static str, message: impl ToString) -> Self {
        Failure { code, kind, message: message.to_string() }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Infeasible => Failure::new(2, "infeasible", "infeasible"),
            RunError::Fpras(FprasError::RestartBudgetExceeded { .. }) => Failure::new(4, "restart-budget", e),
            RunError::Fpras(FprasError::BadEpsilon(_)) => Failure::new(1, "usage", e),
            other => Failure::new(1, "error", other),
        }
    }
}

impl From<GenError> for Failure {
    fn from(e: GenError) -> Self {
        match e {
            GenError::TooFewArcs { .. } | GenError::BadParameter(_) => Failure::new(1, "usage", e),
            other => Failure::new(1, "error", other),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            return fail(Failure::new(1, "usage", message.trim_end()));
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => fail(f),
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    schema: &'static str,
    error: &'static str,
    message: &'a str,
}

#[derive(Serialize)]
struct SelftestBody<'a> {
    schema: &'static str,
    passed: bool,
    suites: &'a [flowbp_core::selftest::SuiteResult],
}

fn fail(f: Failure) -> ExitCode {
    emit(&ErrorBody { schema: ERROR_SCHEMA, error: f.kind, message: &f.message });
    ExitCode::from(f.code)
}

/// Pretty JSON on stdout; a closed pipe is not an error worth reporting.
fn emit<T: Serialize>(value: &T) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn log(cli: &Cli, msg: impl AsRef<str>) {
    if cli.verbose {
        eprintln!("flowbp: {}", msg.as_ref());
    }
}

fn read_instance(args: &InputArgs) -> Result<FlowNetwork, Failure> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| Failure::new(1, "io", format!("{}: {e}", args.input.display())))?;
    let format = args.format.unwrap_or_else(|| infer_format(&args.input));
    let parsed = match format {
        Format::Dimacs => parse_dimacs(&text),
        Format::Json => from_json(&text),
    };
    parsed.map_err(|e| Failure::new(3, "parse", e))
}

fn infer_format(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Dimacs,
    }
}

fn execute(cli: &Cli) -> Result<ExitCode, Failure> {
    let threads = cli.threads.max(1);
    let report = match &cli.command {
        Command::Solve { input, iters, dump_messages, normalize } => {
            let net = read_instance(input)?;
            log(cli, format!("solving {} nodes, {} arcs", net.node_count(), net.arc_count()));
            let options = SolveOptions { rounds: *iters, threads, normalize: *normalize };
            match dump_messages {
                None => report::solve(&net, options, &mut |_| {})?,
                Some(path) => {
                    use std::io::Write;
                    let file = std::fs::File::create(path)
                        .map_err(|e| Failure::new(1, "io", format!("{}: {e}", path.display())))?;
                    let mut out = std::io::BufWriter::new(file);
                    let mut io_error = None;
                    let r = report::solve(&net, options, &mut |state| {
                        if io_error.is_none() {
                            if let Err(e) = writeln!(out, "{}", state.to_json()) {
                                io_error = Some(e);
                            }
                        }
                    })?;
                    if let Some(e) = io_error.or_else(|| out.flush().err()) {
                        return Err(Failure::new(1, "io", format!("{}: {e}", path.display())));
                    }
                    r
                }
            }
        }
        Command::CheckUnique { input } => report::check_unique(&read_instance(input)?, threads)?,
        Command::Approx { input, epsilon, seed, restart_budget } => {
            let eps = parse_epsilon(epsilon).map_err(|e| Failure::new(1, "usage", e))?;
            let net = read_instance(input)?;
            log(cli, format!("approximating with epsilon {eps}, seed {seed}"));
            report::approx(&net, &eps, *seed, FprasOptions { restart_budget: *restart_budget, threads })?
        }
        Command::Gen(args) => return gen(args),
        Command::Selftest { quick } => {
            let results = run_selftest(*quick);
            let passed = results.iter().all(|r| r.passed);
            for r in &results {
                log(cli, format!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.name));
            }
            emit(&SelftestBody { schema: "flowbp.selftest.v1", passed, suites: &results });
            return Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::Bench { sizes, cmax, seed } => return bench(sizes, *cmax, *seed, threads),
    };
    log(cli, format!("done in {} ms", report.wall_time_ms));
    emit(&report);
    Ok(ExitCode::SUCCESS)
}

fn gen(args: &GenArgs) -> Result<ExitCode, Failure> {
    let optimum = match (args.ensure_unique, args.multi_optimum) {
        (true, _) => Optimum::Unique,
        (_, true) => Optimum::Multiple,
        _ => Optimum::Any,
    };
    let params = GenParams {
        optimum,
        pieces: args.pieces.map(|(lo, hi)| lo..=hi),
        budget: args.budget,
        ..GenParams::new(args.nodes, args.arcs, args.cmax, args.capmax, args.seed)
    };
    let net = generate(&params)?;
    let text = match args.format {
        Format::Dimacs => emit_dimacs(&net).map_err(|e| Failure::new(1, "usage", format!("{e}; use --format json")))?,
        Format::Json => to_json(&net) + "\n",
    };
    match &args.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::new(1, "io", format!("{}: {e}", path.display())))?,
        None => {
            use std::io::Write;
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(sizes: &[usize], cmax: i64, seed: u64, threads: usize) -> Result<ExitCode, Failure> {
    let mut runs = Vec::new();
    for &n in sizes {
        let net = generate(&GenParams { optimum: Optimum::Unique, ..GenParams::new(n, n + n / 2, cmax, 4, seed) })?;
        let started = Instant::now();
        let r = report::solve(&net, SolveOptions { threads, ..SolveOptions::default() }, &mut |_| {})?;
        let ms = started.elapsed().as_secs_f64() * 1e3;
        runs.push(json!({ "nodes": n, "arcs": net.arc_count(), "rounds": r.rounds_used, "ms": ms }));
    }
    emit(&json!({ "schema": "flowbp.bench.v1", "threads": threads, "runs": runs }));
    Ok(ExitCode::SUCCESS)
}
