//! Command-line front end: `gen`, `solve`, `bench` and `selftest`.
//!
//! Exit codes are 0 on success, 1 for usage and input errors, 2 when a solve
//! breaks down numerically (the partial trace is still written) or a self-test
//! check fails.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Instance, ProblemKind, TraceFile, TraceFooter, TraceFormat};
use crate::objective::{estimate_step_eta, SmoothObjective};
use crate::region::DecomposedRegion;
use crate::solver::{uafw_solve, ufw_solve, SolveResult, StepRule, UfwConfig};
use crate::synth::{gen_matrix_instance, gen_trend_instance, MatrixGenSpec, TrendGenSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Default `(tol_G, tol_H²)` for trend filtering.
pub const TREND_TOLERANCE: f64 = 1e-4;
/// Default `(tol_G, tol_H²)` for matrix completion.
pub const MATRIX_TOLERANCE: f64 = 3e-3;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Parser, Debug)]
#[command(name = "ufw", version, about = "Frank-Wolfe solvers over a subspace plus a bounded set")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic instance file.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Solve an instance and write its convergence trace.
    Solve(SolveArgs),
    /// Run a grid of instances and solvers and write a results table.
    Bench(BenchArgs),
    /// Quick internal consistency checks.
    Selftest,
}

#[derive(Subcommand, Debug)]
pub enum GenKind {
    /// Piecewise-signal regression with a trend-filter constraint.
    Trend {
        #[arg(long = "N")]
        big_n: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        r: usize,
        /// Signal-to-noise ratio; `inf` for noiseless data.
        #[arg(long, default_value_t = 1.0)]
        snr: f64,
        #[arg(long, default_value_t = 5)]
        pieces: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Matrix completion with column-space side information.
    Matrix {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        r1: usize,
        #[arg(long, default_value_t = 5.0)]
        snr: f64,
        #[arg(long)]
        nnzr: f64,
        #[arg(long = "delta-rel", default_value_t = 0.5)]
        delta_rel: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
pub enum SolverKind {
    /// uFW with the `2/(k+2)` rule.
    #[value(name = "ufw-simple")]
    UfwSimple,
    /// uFW with exact line search.
    #[value(name = "ufw-linesearch")]
    UfwLinesearch,
    /// Away-step uFW; polyhedral regions only.
    #[value(name = "uafw")]
    Uafw,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::UfwSimple => "ufw-simple",
            SolverKind::UfwLinesearch => "ufw-linesearch",
            SolverKind::Uafw => "uafw",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TraceFormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Instance file, or an inline spec such as
    /// `trend:N=1000,n=500,r=1,snr=1,seed=7`.
    #[arg(long)]
    pub instance: String,
    #[arg(long, value_enum, default_value_t = SolverKind::UfwSimple)]
    pub solver: SolverKind,
    #[arg(long = "tol-g")]
    pub tol_g: Option<f64>,
    #[arg(long = "tol-h2")]
    pub tol_h2: Option<f64>,
    #[arg(long = "max-iters", default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Gradient step-size; defaults to the objective's own estimate.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(short, long, default_value = "trace.csv")]
    pub output: PathBuf,
    #[arg(long = "trace-format", value_enum, default_value_t = TraceFormatArg::Csv)]
    pub trace_format: TraceFormatArg,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// One grid cell as an inline spec; repeat for more cells.
    #[arg(long = "cell", required = true)]
    pub cells: Vec<String>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ufw-simple,ufw-linesearch,uafw")]
    pub solvers: Vec<SolverKind>,
    #[arg(long = "max-iters", default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Iteration cap of the high-accuracy reference solve.
    #[arg(long = "reference-max-iters", default_value_t = 1_000_000)]
    pub reference_max_iters: usize,
    /// Directory for cached reference values, keyed by instance hash.
    #[arg(long = "cache-dir")]
    pub cache_dir: Option<PathBuf>,
    /// Directory for per-cell trace files.
    #[arg(long = "trace-dir")]
    pub trace_dir: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Entry point used by the binary. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Gen { kind } => cmd_gen(kind),
        Command::Solve(args) => cmd_solve(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Selftest => return cmd_selftest(),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e @ Error::NumericalFailure { .. }) => {
            eprintln!("error: {e}");
            EXIT_NUMERICAL
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn cmd_gen(kind: GenKind) -> Result<()> {
    let (inst, output) = match kind {
        GenKind::Trend {
            big_n,
            n,
            r,
            snr,
            pieces,
            seed,
            output,
        } => {
            let spec = TrendGenSpec {
                big_n,
                n,
                r,
                snr,
                pieces,
                seed,
            };
            (Instance::Trend(gen_trend_instance(&spec)?), output)
        }
        GenKind::Matrix {
            m,
            n,
            r,
            r1,
            snr,
            nnzr,
            delta_rel,
            seed,
            output,
        } => {
            let spec = MatrixGenSpec {
                m,
                n,
                r,
                r1,
                snr,
                nnzr,
                delta_rel,
                seed,
            };
            (Instance::Matrix(gen_matrix_instance(&spec)?), output)
        }
    };
    inst.write(&output)?;
    println!("wrote {} instance ({}) to {}", inst.problem(), inst.sizes(), output.display());
    Ok(())
}

/// Parse `trend:N=..,n=..,r=..,snr=..,seed=..[,pieces=..]` or
/// `matrix:m=..,n=..,r=..,r1=..,snr=..,nnzr=..,delta_rel=..,seed=..`.
pub fn parse_inline_spec(text: &str) -> Result<InlineSpec> {
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("inline spec {text:?} has no problem prefix")))?;
    let mut fields = HashMap::new();
    for part in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("expected key=value, got {part:?}")))?;
        fields.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    let take = |fields: &mut HashMap<String, String>, key: &str| -> Result<Option<String>> {
        Ok(fields.remove(key))
    };
    fn num<T: std::str::FromStr>(key: &str, v: Option<String>, default: Option<T>) -> Result<T> {
        match v {
            Some(s) => s
                .parse()
                .map_err(|_| Error::invalid(format!("bad value {s:?} for {key}"))),
            None => default.ok_or_else(|| Error::invalid(format!("inline spec is missing {key}"))),
        }
    }
    let spec = match kind {
        "trend" => {
            let spec = TrendGenSpec {
                big_n: num("N", take(&mut fields, "N")?, None)?,
                n: num("n", take(&mut fields, "n")?, None)?,
                r: num("r", take(&mut fields, "r")?, Some(1))?,
                snr: num("snr", take(&mut fields, "snr")?, Some(1.0))?,
                pieces: num("pieces", take(&mut fields, "pieces")?, Some(5))?,
                seed: num("seed", take(&mut fields, "seed")?, Some(0))?,
            };
            spec.validate()?;
            InlineSpec::Trend(spec)
        }
        "matrix" => {
            let spec = MatrixGenSpec {
                m: num("m", take(&mut fields, "m")?, None)?,
                n: num("n", take(&mut fields, "n")?, None)?,
                r: num("r", take(&mut fields, "r")?, None)?,
                r1: num("r1", take(&mut fields, "r1")?, None)?,
                snr: num("snr", take(&mut fields, "snr")?, Some(5.0))?,
                nnzr: num("nnzr", take(&mut fields, "nnzr")?, None)?,
                delta_rel: num("delta_rel", take(&mut fields, "delta_rel")?, Some(0.5))?,
                seed: num("seed", take(&mut fields, "seed")?, Some(0))?,
            };
            spec.validate()?;
            InlineSpec::Matrix(spec)
        }
        other => return Err(Error::invalid(format!("unknown problem kind {other:?}"))),
    };
    if let Some(key) = fields.keys().next() {
        return Err(Error::invalid(format!("unknown inline spec key {key:?}")));
    }
    Ok(spec)
}

#[derive(Clone, Debug, PartialEq)]
pub enum InlineSpec {
    Trend(TrendGenSpec),
    Matrix(MatrixGenSpec),
}

impl InlineSpec {
    pub fn problem(&self) -> ProblemKind {
        match self {
            InlineSpec::Trend(_) => ProblemKind::Trend,
            InlineSpec::Matrix(_) => ProblemKind::Matrix,
        }
    }

    pub fn generate(&self) -> Result<Instance> {
        Ok(match self {
            InlineSpec::Trend(s) => Instance::Trend(gen_trend_instance(s)?),
            InlineSpec::Matrix(s) => Instance::Matrix(gen_matrix_instance(s)?),
        })
    }
}

fn is_inline(text: &str) -> bool {
    text.starts_with("trend:") || text.starts_with("matrix:")
}

fn reject_away_steps_on_matrix(problem: ProblemKind, solver: SolverKind) -> Result<()> {
    if problem == ProblemKind::Matrix && solver == SolverKind::Uafw {
        return Err(Error::UnsupportedRegion(
            "uafw needs a polyhedral feasible set; the nuclear-norm ball is not a polytope, use ufw-simple or ufw-linesearch"
                .into(),
        ));
    }
    Ok(())
}

/// Knobs shared by `solve`, `bench` and the test harness.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    pub solver: SolverKind,
    pub tol_g: Option<f64>,
    pub tol_h2: Option<f64>,
    pub max_iters: usize,
    pub eta: Option<f64>,
    pub record_trace: bool,
}

impl SolveOptions {
    pub fn new(solver: SolverKind) -> Self {
        Self {
            solver,
            tol_g: None,
            tol_h2: None,
            max_iters: DEFAULT_MAX_ITERS,
            eta: None,
            record_trace: true,
        }
    }

    pub fn with_tolerances(mut self, tol_g: f64, tol_h2: f64) -> Self {
        self.tol_g = Some(tol_g);
        self.tol_h2 = Some(tol_h2);
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    /// The solver configuration this resolves to for `inst`.
    pub fn config_for<O: SmoothObjective + ?Sized>(&self, problem: ProblemKind, objective: &O) -> Result<UfwConfig> {
        let default_tol = match problem {
            ProblemKind::Trend => TREND_TOLERANCE,
            ProblemKind::Matrix => MATRIX_TOLERANCE,
        };
        let eta = match self.eta {
            Some(eta) => eta,
            None => estimate_step_eta(objective)?,
        };
        let rule = match self.solver {
            SolverKind::UfwSimple => StepRule::Simple,
            _ => StepRule::LineSearch,
        };
        let cfg = UfwConfig::new(eta)
            .with_step_rule(rule)
            .with_max_iters(self.max_iters)
            .with_tolerances(self.tol_g.unwrap_or(default_tol), self.tol_h2.unwrap_or(default_tol))
            .with_trace(self.record_trace);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Solve `inst` from the region's default start.
pub fn solve_instance(inst: &Instance, opts: &SolveOptions) -> Result<(SolveResult, UfwConfig)> {
    reject_away_steps_on_matrix(inst.problem(), opts.solver)?;
    match inst {
        Instance::Trend(t) => run_solver(&t.objective()?, &t.region()?, inst.problem(), opts),
        Instance::Matrix(m) => run_solver(&m.objective()?, &m.region()?, inst.problem(), opts),
    }
}

fn run_solver<O, R>(objective: &O, region: &R, problem: ProblemKind, opts: &SolveOptions) -> Result<(SolveResult, UfwConfig)>
where
    O: SmoothObjective,
    R: DecomposedRegion,
{
    let cfg = opts.config_for(problem, objective)?;
    let x0 = region.default_start();
    let res = match opts.solver {
        SolverKind::Uafw => uafw_solve(objective, region, &x0, &cfg)?,
        _ => ufw_solve(objective, region, &x0, &cfg)?,
    };
    Ok((res, cfg))
}

fn load_instance(text: &str) -> Result<Instance> {
    if is_inline(text) {
        parse_inline_spec(text)?.generate()
    } else {
        Instance::read(text)
    }
}

fn summary_line(solver: SolverKind, res: &SolveResult) -> String {
    format!(
        "{} {} {:e} {:e} {:e} {}",
        solver.name(),
        res.iterations,
        res.best_f,
        res.final_g,
        res.final_h,
        res.termination_reason
    )
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    if is_inline(&args.instance) {
        reject_away_steps_on_matrix(parse_inline_spec(&args.instance)?.problem(), args.solver)?;
    }
    let inst = load_instance(&args.instance)?;
    reject_away_steps_on_matrix(inst.problem(), args.solver)?;
    let opts = SolveOptions {
        solver: args.solver,
        tol_g: args.tol_g,
        tol_h2: args.tol_h2,
        max_iters: args.max_iters,
        eta: args.eta,
        record_trace: true,
    };
    let format = match args.trace_format {
        TraceFormatArg::Csv => TraceFormat::Csv,
        TraceFormatArg::Json => TraceFormat::Json,
    };
    let start = Instant::now();
    let outcome = solve_instance(&inst, &opts);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok((res, cfg)) => {
            write_trace(&args.output, format, &res, &cfg, inst.seed(), wall_ms)?;
            println!("{}", summary_line(args.solver, &res));
            Ok(())
        }
        Err(Error::NumericalFailure { reason, partial }) => {
            if let Some(p) = &partial {
                let cfg = json_or_null(&opts);
                let trace = TraceFile {
                    rows: p.trace.clone(),
                    footer: TraceFooter {
                        config: cfg,
                        seed: Some(inst.seed()),
                        termination_reason: format!("NumericalFailure: {reason}"),
                        wall_ms,
                    },
                };
                trace.write(&args.output, format)?;
            }
            Err(Error::NumericalFailure { reason, partial })
        }
        Err(e) => Err(e),
    }
}

fn json_or_null<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn write_trace(
    path: &Path,
    format: TraceFormat,
    res: &SolveResult,
    cfg: &UfwConfig,
    seed: u64,
    wall_ms: f64,
) -> Result<()> {
    TraceFile {
        rows: res.trace.clone(),
        footer: TraceFooter {
            config: json_or_null(cfg),
            seed: Some(seed),
            termination_reason: res.termination_reason.to_string(),
            wall_ms,
        },
    }
    .write(path, format)
}

/// Settings of the high-accuracy solve whose value serves as `f*`.
///
/// Polyhedral instances use uAFW, whose linear rate reaches the rounding floor
/// quickly; a strict `<` test against zero tolerance could never fire, so the
/// tolerance is `1e-13`. Other instances use line-searched uFW at `1e-10`.
pub fn reference_options(problem: ProblemKind, max_iters: usize) -> SolveOptions {
    match problem {
        ProblemKind::Trend => SolveOptions::new(SolverKind::Uafw).with_tolerances(1e-13, 1e-13),
        ProblemKind::Matrix => SolveOptions::new(SolverKind::UfwLinesearch).with_tolerances(1e-10, 1e-10),
    }
    .with_max_iters(max_iters)
    .without_trace()
}

impl SolveOptions {
    fn without_trace(mut self) -> Self {
        self.record_trace = false;
        self
    }
}

#[derive(Serialize, Deserialize)]
struct CachedReference {
    f_star: f64,
    iterations: usize,
    termination_reason: String,
}

/// Reference values keyed by instance content hash, optionally persisted.
pub struct ReferenceCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, f64>>,
    max_iters: usize,
}

impl ReferenceCache {
    pub fn new(dir: Option<PathBuf>, max_iters: usize) -> Self {
        Self {
            dir,
            memory: Mutex::new(HashMap::new()),
            max_iters,
        }
    }

    /// `f*` for `inst`, solving on a miss.
    pub fn f_star(&self, inst: &Instance) -> Result<f64> {
        let hash = inst.content_hash()?;
        if let Some(v) = self.memory.lock().expect("cache lock").get(&hash) {
            return Ok(*v);
        }
        let file = self.dir.as_ref().map(|d| d.join(format!("{hash}.json")));
        if let Some(f) = &file {
            if let Ok(text) = std::fs::read_to_string(f) {
                if let Ok(c) = serde_json::from_str::<CachedReference>(&text) {
                    self.memory.lock().expect("cache lock").insert(hash, c.f_star);
                    return Ok(c.f_star);
                }
            }
        }
        let (res, _) = solve_instance(inst, &reference_options(inst.problem(), self.max_iters))?;
        if let Some(f) = &file {
            if let Some(parent) = f.parent() {
                std::fs::create_dir_all(parent)?;
            }
            let entry = CachedReference {
                f_star: res.best_f,
                iterations: res.iterations,
                termination_reason: res.termination_reason.to_string(),
            };
            std::fs::write(f, serde_json::to_string_pretty(&entry)?)?;
        }
        self.memory.lock().expect("cache lock").insert(hash, res.best_f);
        Ok(res.best_f)
    }
}

/// `(f − f*) / max(1, |f*|)`.
pub fn relative_gap(f: f64, f_star: f64) -> f64 {
    (f - f_star) / f_star.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub problem: ProblemKind,
    pub sizes: String,
    pub solver: String,
    pub iters: Option<usize>,
    pub best_f: f64,
    /// `Err` holds the failure message for the cell.
    pub rel_gap: std::result::Result<f64, String>,
    pub wall_ms: f64,
}

pub const BENCH_HEADER: &str = "problem,sizes,solver,iters,best_f,rel_gap_vs_reference,wall_ms";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        let gap = match &self.rel_gap {
            Ok(g) => format!("{g:e}"),
            Err(msg) => format!("failed: {}", msg.replace([',', '\n'], ";")),
        };
        let iters = self.iters.map_or(String::new(), |i| i.to_string());
        format!(
            "{},{},{},{},{:e},{},{:.3}",
            self.problem, self.sizes, self.solver, iters, self.best_f, gap, self.wall_ms
        )
    }
}

/// Thread count for bench cells: `UFW_THREADS` if set, else rayon's default.
pub fn bench_threads() -> usize {
    std::env::var("UFW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Run every `(cell, solver)` pair. One row per reference solve (gap 0 by
/// definition) and one per solver; failures are recorded in the row.
pub fn run_bench(
    cells: &[InlineSpec],
    solvers: &[SolverKind],
    max_iters: usize,
    cache: &ReferenceCache,
    trace_dir: Option<&Path>,
) -> Result<Vec<BenchRow>> {
    use rayon::prelude::*;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(bench_threads())
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir)?;
    }
    let per_cell: Vec<Vec<BenchRow>> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(ci, cell)| bench_cell(ci, cell, solvers, max_iters, cache, trace_dir))
            .collect()
    });
    Ok(per_cell.into_iter().flatten().collect())
}

fn bench_cell(
    ci: usize,
    cell: &InlineSpec,
    solvers: &[SolverKind],
    max_iters: usize,
    cache: &ReferenceCache,
    trace_dir: Option<&Path>,
) -> Vec<BenchRow> {
    let problem = cell.problem();
    let failed = |solver: &str, sizes: String, msg: String| BenchRow {
        problem,
        sizes,
        solver: solver.into(),
        iters: None,
        best_f: f64::NAN,
        rel_gap: Err(msg),
        wall_ms: 0.0,
    };
    let inst = match cell.generate() {
        Ok(i) => i,
        Err(e) => return vec![failed("reference", String::new(), e.to_string())],
    };
    let sizes = inst.sizes();
    let start = Instant::now();
    let f_star = cache.f_star(&inst);
    let mut rows = vec![match &f_star {
        Ok(f) => BenchRow {
            problem,
            sizes: sizes.clone(),
            solver: "reference".into(),
            iters: None,
            best_f: *f,
            rel_gap: Ok(relative_gap(*f, *f)),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        },
        Err(e) => failed("reference", sizes.clone(), e.to_string()),
    }];
    for &solver in solvers {
        let opts = SolveOptions::new(solver).with_max_iters(max_iters);
        let start = Instant::now();
        let outcome = solve_instance(&inst, &opts);
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        rows.push(match outcome {
            Ok((res, cfg)) => {
                if let Some(dir) = trace_dir {
                    let path = dir.join(format!("cell{ci}_{}.csv", solver.name()));
                    if let Err(e) = write_trace(&path, TraceFormat::Csv, &res, &cfg, inst.seed(), wall_ms) {
                        eprintln!("warning: could not write {}: {e}", path.display());
                    }
                }
                BenchRow {
                    problem,
                    sizes: sizes.clone(),
                    solver: solver.name().into(),
                    iters: Some(res.iterations),
                    best_f: res.best_f,
                    rel_gap: f_star
                        .as_ref()
                        .map(|f| relative_gap(res.best_f, *f))
                        .map_err(|e| format!("no reference: {e}")),
                    wall_ms,
                }
            }
            Err(e) => BenchRow {
                wall_ms,
                ..failed(solver.name(), sizes.clone(), e.to_string())
            },
        });
    }
    rows
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let cells = args
        .cells
        .iter()
        .map(|c| parse_inline_spec(c))
        .collect::<Result<Vec<_>>>()?;
    let cache = ReferenceCache::new(args.cache_dir.clone(), args.reference_max_iters);
    let rows = run_bench(&cells, &args.solvers, args.max_iters, &cache, args.trace_dir.as_deref())?;
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for row in &rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    std::fs::write(&args.output, out)?;
    println!("wrote {} rows to {}", rows.len(), args.output.display());
    Ok(())
}

/// Small, fast versions of the library's core checks.
pub fn selftest_checks() -> Vec<(&'static str, bool)> {
    use crate::nucnorm::{lmo_nucnorm, nuclear_norm, GenNucNormRegion};
    use crate::region::min_over_vertices;
    use crate::rng::SplitMix64;
    use crate::trendfilter::{verify_hl_identity, TrendFilterRegion};
    use nalgebra::DMatrix;

    let mut checks = Vec::new();

    let hl = (2..=12).all(|n| (1..=3.min(n - 1)).all(|i| verify_hl_identity(n, i)));
    checks.push(("difference/summation identity", hl));

    let trend_lmo = (|| -> Result<bool> {
        let mut g = SplitMix64::new(1);
        for (n, r) in [(6, 1), (8, 2), (10, 3)] {
            let region = TrendFilterRegion::new(n, r, 1.0)?;
            let verts = region.enumerate_vertices()?;
            for _ in 0..10 {
                let c = g.normal_vec(n);
                let s = region.lmo(&c)?;
                let (_, best) = min_over_vertices(&c, &verts).expect("vertices");
                if (crate::linalg::dot(&c, &s.point) - best).abs() > 1e-9 * (1.0 + best.abs()) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    })()
    .unwrap_or(false);
    checks.push(("trend-filter oracle vs enumeration", trend_lmo));

    let nuc_lmo = (|| -> Result<bool> {
        let mut g = SplitMix64::new(2);
        let region = GenNucNormRegion::identity(6, 5, 1.5)?;
        let c = DMatrix::from_vec(6, 5, g.normal_vec(30));
        let x = lmo_nucnorm(&region, &c)?;
        let sigma = crate::linalg::svd(&c).s[0];
        Ok((c.dot(&x) + 1.5 * sigma).abs() <= 1e-7 * (1.0 + sigma) && nuclear_norm(&x) <= 1.5 * (1.0 + 1e-8))
    })()
    .unwrap_or(false);
    checks.push(("nuclear-norm oracle duality", nuc_lmo));

    let solve = (|| -> Result<bool> {
        let inst = parse_inline_spec("trend:N=60,n=30,r=1,snr=5,seed=3")?.generate()?;
        let (res, _) = solve_instance(&inst, &SolveOptions::new(SolverKind::Uafw))?;
        let f_star = ReferenceCache::new(None, 200_000).f_star(&inst)?;
        Ok(res.termination_reason == crate::TerminationReason::GapTolerance
            && relative_gap(res.best_f, f_star) <= 1e-3)
    })()
    .unwrap_or(false);
    checks.push(("small trend solve reaches tolerance", solve));

    checks
}

fn cmd_selftest() -> i32 {
    let checks = selftest_checks();
    for (name, ok) in &checks {
        println!("{} {name}", if *ok { "PASS" } else { "FAIL" });
    }
    if checks.iter().all(|(_, ok)| *ok) {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}
