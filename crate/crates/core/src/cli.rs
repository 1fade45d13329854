//! The `spo` command-line tool: single solves, benchmark sweeps, point checks
//! and instance generation.
//!
//! Exit codes are stable: see [`EXIT_OK`] and friends.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, BdReport, CqReport, SoscReport};
use crate::apps::{self, Instance};
use crate::error::SpoError;
use crate::kkt::{self, OperatorKind};
use crate::model::{self, Family, PrimalDualPoint, SolveReport, SpoProblem, DEFAULT_ACTIVE_TOL};
use crate::ncp::NcpKind;
use crate::newton::{self, NewtonOptions};
use crate::presolve;
use crate::serde_dense;

pub const EXIT_OK: i32 = 0;
/// The solver stopped without meeting the termination test.
pub const EXIT_NOT_CONVERGED: i32 = 2;
/// Bad command line or invalid parameters.
pub const EXIT_USAGE: i32 = 64;
/// Input data malformed or with mismatched dimensions.
pub const EXIT_DATA: i32 = 65;
/// Input file missing or unreadable.
pub const EXIT_NO_INPUT: i32 = 66;
/// Output could not be written.
pub const EXIT_CANT_CREATE: i32 = 73;
/// Any other internal failure.
pub const EXIT_SOFTWARE: i32 = 70;

pub const REPORT_SCHEMA: &str = "v1";

const LONG_ABOUT: &str = "\
Lagrange-Newton solvers for min f(x) + rho*||x||_0 subject to g(x) <= 0, h(x) = 0.

Problems are given either as an instance JSON file or as FAMILY:PARAMS, e.g.
  sensing:n=64,m=32,p=4,s=8,seed=1   portfolio:n=50   logistic:n=50,m=200,s=10

rho is used exactly as given. The squared-penalty reformulation corresponds to
the penalty rho/2 in its y-terms; no rescaling is applied.

Exit codes: 0 converged / success, 2 not converged, 64 usage, 65 bad data or
dimension mismatch, 66 missing input, 70 internal error, 73 cannot write output.";

#[derive(Debug, Parser)]
#[command(name = "spo", version, about = "Lagrange-Newton solvers for l0-penalized programs", long_about = LONG_ABOUT)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Presolve with the l1 surrogate, then run one Newton solve.
    Solve(SolveArgs),
    /// Sweep a family over a rho grid and seeds; write CSV and an SVG chart.
    Bench(BenchArgs),
    /// Evaluate constraint qualifications, SOSC, BD-regularity and stationarity at a point.
    Check(CheckArgs),
    /// Generate an instance file.
    Gen(GenArgs),
}

#[derive(Debug, Args, Clone)]
struct NewtonArgs {
    /// Operator: full, red or comp (comp splits x = x+ - x- when x is free).
    #[arg(long, default_value = "full")]
    op: OperatorKind,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Support threshold for ||x||_0 and the termination test.
    #[arg(long, default_value_t = model::DEFAULT_DELTA)]
    delta: f64,
    /// NCP function: fb or min.
    #[arg(long, default_value = "fb")]
    ncp: NcpKind,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Instance file or FAMILY:PARAMS.
    #[arg(long)]
    problem: String,
    /// Overrides the instance's rho.
    #[arg(long)]
    rho: Option<f64>,
    #[command(flatten)]
    newton: NewtonArgs,
    /// Largest accepted Newton step norm; unbounded by default.
    #[arg(long, default_value_t = f64::INFINITY)]
    step_safety: f64,
    /// Directory for report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also print the report JSON to stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    family: Family,
    /// Generator parameters, e.g. n=64,m=32,p=4,s=8.
    #[arg(long, default_value = "")]
    params: String,
    /// Comma-separated rho values.
    #[arg(long, default_value = "0.1,0.5,1,2,3,4,5", value_delimiter = ',')]
    rho_list: Vec<f64>,
    /// Instances per rho.
    #[arg(long, default_value_t = 20)]
    runs: u64,
    /// Run r uses seed seed_base + r.
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Comma-separated operators.
    #[arg(long, default_value = "full,red,comp", value_delimiter = ',')]
    ops: Vec<OperatorKind>,
    /// Worker threads; each solve is single-threaded.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = model::DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value = "fb")]
    ncp: NcpKind,
    /// Step bound; unbounded by default for sweeps.
    #[arg(long, default_value_t = f64::INFINITY)]
    step_safety: f64,
    /// Write wall_ms as 0 so that outputs are byte-identical across runs.
    #[arg(long)]
    no_wall_time: bool,
    /// Skip the per-run report JSON files.
    #[arg(long)]
    no_reports: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    rho: Option<f64>,
    /// Point file: a solve report, a primal-dual point, or a bare array x.
    #[arg(long)]
    point: PathBuf,
    /// Any of licq, sosc, bd, sstat.
    #[arg(long, default_value = "licq,sosc,bd,sstat", value_delimiter = ',')]
    checks: Vec<CheckKind>,
    #[arg(long, default_value_t = model::DEFAULT_DELTA)]
    delta: f64,
    /// Operator whose BD-regularity is checked.
    #[arg(long, default_value = "full")]
    op: OperatorKind,
    #[arg(long, default_value = "fb")]
    ncp: NcpKind,
    /// Cap on the number of B-subdifferential elements enumerated.
    #[arg(long, default_value_t = 4096)]
    bd_cap: usize,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// portfolio, sensing or logistic.
    family_pos: Option<Family>,
    /// key=value parameters (seed=N allowed).
    params_pos: Vec<String>,
    #[arg(long = "family")]
    family: Option<Family>,
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Output file; defaults to <instance_id>.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum CheckKind {
    Licq,
    Sosc,
    Bd,
    Sstat,
}

/// A CLI failure with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Output { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Spo(#[from] SpoError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input { .. } => EXIT_NO_INPUT,
            CliError::Output { .. } => EXIT_CANT_CREATE,
            CliError::Spo(e) => match e {
                SpoError::InvalidArgument(_) => EXIT_USAGE,
                SpoError::DimensionMismatch { .. } | SpoError::Parse { .. } | SpoError::Json(_) => EXIT_DATA,
                SpoError::Io(_) => EXIT_NO_INPUT,
                _ => EXIT_SOFTWARE,
            },
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Entry point used by the binary; returns the process exit code.
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
        Command::Solve(a) => cmd_solve(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Check(a) => cmd_check(&a),
        Command::Gen(a) => cmd_gen(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("spo: {e}");
            e.exit_code()
        }
    }
}

// ---------------------------------------------------------------- problems

/// Where a problem comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    File(PathBuf),
    Generated { family: Family, params: BTreeMap<String, String> },
}

/// Splits `key=value` tokens separated by commas or whitespace.
pub fn parse_params(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for tok in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| usage(format!("parameter '{tok}' is not key=value")))?;
        if out.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(usage(format!("parameter '{k}' given twice")));
        }
    }
    Ok(out)
}

/// `FAMILY:PARAMS` (optionally prefixed by `family:`) or a file path.
pub fn parse_problem_spec(spec: &str) -> Result<ProblemSource, CliError> {
    let body = spec.strip_prefix("family:").unwrap_or(spec);
    if let Some((head, rest)) = body.split_once(':') {
        if let Ok(family) = head.parse::<Family>() {
            return Ok(ProblemSource::Generated { family, params: parse_params(rest)? });
        }
    } else if let Ok(family) = body.parse::<Family>() {
        if !Path::new(spec).exists() {
            return Ok(ProblemSource::Generated { family, params: BTreeMap::new() });
        }
    }
    if spec.starts_with("family:") {
        return Err(usage(format!("unknown family in '{spec}'")));
    }
    Ok(ProblemSource::File(PathBuf::from(spec)))
}

struct ParamReader {
    params: BTreeMap<String, String>,
}

impl ParamReader {
    fn take<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        match self.params.remove(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| usage(format!("parameter {key}={v} is not valid"))),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        match self.params.keys().next() {
            None => Ok(()),
            Some(k) => Err(usage(format!("unknown parameter '{k}'"))),
        }
    }
}

/// Generates an instance; `seed` in `params` wins over `default_seed`.
///
/// Defaults: portfolio n=50; sensing n=64, m=32, p=4, s=8; logistic n=50,
/// m=200, s=10; seed 0; rho 1.
pub fn generate(family: Family, params: &BTreeMap<String, String>, default_seed: u64) -> Result<Instance, CliError> {
    let mut r = ParamReader { params: params.clone() };
    let seed = r.take("seed", default_seed)?;
    let rho: f64 = r.take("rho", 1.0)?;
    let mut inst = match family {
        Family::Portfolio => {
            let n = r.take("n", 50)?;
            Instance::Portfolio(apps::gen_portfolio(n, seed)?)
        }
        Family::Sensing => {
            let (n, m, p, s) = (r.take("n", 64)?, r.take("m", 32)?, r.take("p", 4)?, r.take("s", 8)?);
            Instance::Sensing(apps::gen_sensing(n, m, p, s, seed)?)
        }
        Family::Logistic => {
            let (n, m, s) = (r.take("n", 50)?, r.take("m", 200)?, r.take("s", 10)?);
            Instance::Logistic(apps::gen_logistic(n, m, s, seed)?)
        }
        other => return Err(usage(format!("family '{other}' has no generator; pass an instance file"))),
    };
    r.finish()?;
    inst.set_rho(rho);
    inst.normalize()?;
    Ok(inst)
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Input { path: path.to_path_buf(), source })
}

/// Loads or generates the instance and applies a rho override.
pub fn load_instance(spec: &str, rho: Option<f64>) -> Result<Instance, CliError> {
    let mut inst = match parse_problem_spec(spec)? {
        ProblemSource::File(path) => Instance::from_json(&read_input(&path)?)?,
        ProblemSource::Generated { family, params } => generate(family, &params, 0)?,
    };
    if let Some(rho) = rho {
        inst.set_rho(rho);
        inst.normalize()?;
    }
    Ok(inst)
}

// ------------------------------------------------------------------ reports

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PresolveSummary {
    #[serde(with = "serde_dense::float")]
    pub objective: f64,
    pub l0: usize,
    #[serde(with = "serde_dense::vector")]
    pub x0: DVector<f64>,
}

/// Versioned report of one solve; every CSV row is derived from one of these.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub instance_id: String,
    pub family: Family,
    pub seed: Option<u64>,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub rho: f64,
    pub op: OperatorKind,
    pub options: NewtonOptions,
    /// `x = x⁺ − x⁻` lift applied for the complementary operator.
    pub split_variables: bool,
    pub presolve: PresolveSummary,
    pub result: SolveReport,
    pub wall_ms: u64,
}

/// One row of `runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_id: String,
    pub family: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub rho: f64,
    pub op: String,
    pub status: String,
    pub iters: usize,
    pub f0_obj: f64,
    pub final_obj: f64,
    pub l0_before: usize,
    pub l0_after: usize,
    pub wall_ms: u64,
}

impl RunRecord {
    pub fn from_report(r: &RunReport) -> Self {
        Self {
            instance_id: r.instance_id.clone(),
            family: r.family.to_string(),
            n: r.n,
            m: r.m,
            p: r.p,
            rho: r.rho,
            op: r.op.to_string(),
            status: r.result.status.to_string(),
            iters: r.result.iterations,
            f0_obj: r.presolve.objective,
            final_obj: r.result.objective,
            l0_before: r.presolve.l0,
            l0_after: r.result.l0_count,
            wall_ms: r.wall_ms,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == model::SolveStatus::Converged.as_str()
    }
}

/// Presolve shared by all operators of one instance.
pub struct Prepared {
    pub instance_id: String,
    pub seed: Option<u64>,
    pub problem: SpoProblem,
    pub presolve: PresolveSummary,
}

pub fn prepare(inst: &Instance, delta: f64) -> Result<Prepared, SpoError> {
    let problem = apps::build_spo(inst)?;
    let x0 = presolve::presolve_l1(&problem)?;
    Ok(Prepared {
        instance_id: inst.instance_id()?,
        seed: inst.seed(),
        presolve: PresolveSummary {
            objective: model::eval_spo_objective(&problem, &x0, delta)?,
            l0: model::l0_norm(&x0, delta),
            x0,
        },
        problem,
    })
}

pub fn run_one(prep: &Prepared, opts: &NewtonOptions) -> Result<RunReport, SpoError> {
    let start = Instant::now();
    let result = newton::solve_auto(&prep.problem, &prep.presolve.x0, opts)?;
    let wall_ms = start.elapsed().as_millis() as u64;
    let pb = &prep.problem;
    Ok(RunReport {
        schema: REPORT_SCHEMA.to_string(),
        instance_id: prep.instance_id.clone(),
        family: pb.family(),
        seed: prep.seed,
        n: pb.n(),
        m: pb.m(),
        p: pb.p(),
        rho: pb.rho(),
        op: opts.kind,
        options: *opts,
        split_variables: result.split_variables,
        presolve: prep.presolve.clone(),
        result,
        wall_ms,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Output { path: path.to_path_buf(), source })
}

fn to_json_pretty<T: Serialize>(v: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(v).map_err(SpoError::from)?)
}

fn newton_options(a: &NewtonArgs, step_safety: f64) -> Result<NewtonOptions, CliError> {
    let opts = NewtonOptions {
        max_iter: a.max_iter,
        eps: a.eps,
        delta: a.delta,
        step_safety,
        ncp: a.ncp,
        kind: a.op,
    };
    opts.validate()?;
    Ok(opts)
}

// -------------------------------------------------------------------- solve

fn cmd_solve(a: &SolveArgs) -> Result<i32, CliError> {
    let opts = newton_options(&a.newton, a.step_safety)?;
    let inst = load_instance(&a.problem, a.rho)?;
    let prep = prepare(&inst, opts.delta)?;
    let report = run_one(&prep, &opts)?;
    let json = to_json_pretty(&report)?;
    if let Some(dir) = &a.out {
        write_file(&dir.join("report.json"), &json)?;
    }
    println!("{}", summary_line(&report));
    if a.json {
        println!("{json}");
    }
    Ok(if report.result.converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

pub fn summary_line(r: &RunReport) -> String {
    format!(
        "{} {} rho={} {}{}: F {:.6} -> {:.6}, l0 {} -> {}, {} iterations, residual {:.3e}",
        r.instance_id,
        r.family,
        r.rho,
        r.op,
        if r.split_variables { " (split)" } else { "" },
        r.presolve.objective,
        r.result.objective,
        r.presolve.l0,
        r.result.l0_count,
        r.result.iterations,
        r.result.final_residual(),
    ) + &format!(" [{}]", r.result.status)
}

// -------------------------------------------------------------------- bench

/// Aggregate over one `(ρ, operator)` cell. Failed runs count towards the
/// failure rate and are excluded from the objective and iteration means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub family: String,
    pub rho: f64,
    pub op: String,
    pub runs: usize,
    pub converged: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub mean_f0_obj: f64,
    pub mean_final_obj: f64,
    pub mean_iters: f64,
    pub mean_l0_before: f64,
    pub mean_l0_after: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

/// `errors` holds `(ρ, operator)` pairs of runs that raised an error instead
/// of producing a report; they count as failures.
pub fn aggregate(
    family: Family,
    rhos: &[f64],
    ops: &[OperatorKind],
    records: &[RunRecord],
    errors: &[(f64, OperatorKind)],
) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &rho in rhos {
        for &op in ops {
            let cell: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.rho == rho && r.op == op.short_name())
                .collect();
            let errored = errors.iter().filter(|(r, o)| *r == rho && *o == op).count();
            let ok: Vec<&&RunRecord> = cell.iter().filter(|r| r.converged()).collect();
            let runs = cell.len() + errored;
            let failures = runs - ok.len();
            rows.push(AggregateRow {
                family: family.to_string(),
                rho,
                op: op.to_string(),
                runs,
                converged: ok.len(),
                failures,
                failure_rate: if runs == 0 { f64::NAN } else { failures as f64 / runs as f64 },
                mean_f0_obj: mean(cell.iter().map(|r| r.f0_obj)),
                mean_final_obj: mean(ok.iter().map(|r| r.final_obj)),
                mean_iters: mean(ok.iter().map(|r| r.iters as f64)),
                mean_l0_before: mean(cell.iter().map(|r| r.l0_before as f64)),
                mean_l0_after: mean(ok.iter().map(|r| r.l0_after as f64)),
            });
        }
    }
    rows
}

fn csv_string<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Spo(SpoError::InvalidArgument(e.to_string())))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Spo(SpoError::InvalidArgument(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Everything produced by a sweep, in canonical order.
pub struct BenchOutput {
    pub reports: Vec<RunReport>,
    pub records: Vec<RunRecord>,
    pub errors: Vec<BenchError>,
    pub aggregate: Vec<AggregateRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchError {
    pub rho: f64,
    pub seed: u64,
    pub op: String,
    pub message: String,
}

/// Settings of a sweep; see `spo bench --help`.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub family: Family,
    pub params: BTreeMap<String, String>,
    pub rhos: Vec<f64>,
    pub runs: u64,
    pub seed_base: u64,
    pub ops: Vec<OperatorKind>,
    pub jobs: usize,
    pub options: NewtonOptions,
    pub wall_time: bool,
}

/// Runs the sweep, parallel over instances. Individual failures are
/// recorded, never propagated.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchOutput, CliError> {
    if cfg.params.contains_key("seed") || cfg.params.contains_key("rho") {
        return Err(usage("seed and rho are set by --seed-base and --rho-list"));
    }
    if cfg.rhos.is_empty() || cfg.ops.is_empty() || cfg.runs == 0 {
        return Err(usage("need at least one rho, one operator and one run"));
    }
    // Validate parameters once up front so that typos are usage errors.
    generate(cfg.family, &cfg.params, cfg.seed_base)?;
    cfg.options.validate()?;

    let tasks: Vec<(f64, u64)> = cfg
        .rhos
        .iter()
        .flat_map(|&rho| (0..cfg.runs).map(move |r| (rho, cfg.seed_base + r)))
        .collect();
    let work = |&(rho, seed): &(f64, u64)| -> Vec<Result<RunReport, BenchError>> {
        let fail = |op: &str, e: &dyn std::fmt::Display| BenchError {
            rho,
            seed,
            op: op.to_string(),
            message: e.to_string(),
        };
        let prepared = generate(cfg.family, &cfg.params, seed)
            .map_err(|e| e.to_string())
            .and_then(|mut inst| {
                inst.set_rho(rho);
                prepare(&inst, cfg.options.delta).map_err(|e| e.to_string())
            });
        match prepared {
            Err(e) => cfg.ops.iter().map(|op| Err(fail(op.short_name(), &e))).collect(),
            Ok(prep) => cfg
                .ops
                .iter()
                .map(|&op| {
                    let opts = NewtonOptions { kind: op, ..cfg.options };
                    run_one(&prep, &opts)
                        .map(|mut r| {
                            if !cfg.wall_time {
                                r.wall_ms = 0;
                            }
                            r
                        })
                        .map_err(|e| fail(op.short_name(), &e))
                })
                .collect(),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| CliError::Spo(SpoError::InvalidArgument(e.to_string())))?;
    let results: Vec<Vec<Result<RunReport, BenchError>>> = pool.install(|| tasks.par_iter().map(work).collect());

    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for r in results.into_iter().flatten() {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => errors.push(e),
        }
    }
    let rho_rank = |rho: f64| cfg.rhos.iter().position(|&r| r == rho).unwrap_or(usize::MAX);
    let op_rank = |op: OperatorKind| cfg.ops.iter().position(|&o| o == op).unwrap_or(usize::MAX);
    reports.sort_by(|a, b| {
        (rho_rank(a.rho), &a.instance_id, op_rank(a.op)).cmp(&(rho_rank(b.rho), &b.instance_id, op_rank(b.op)))
    });
    errors.sort_by(|a, b| (rho_rank(a.rho), a.seed, &a.op).cmp(&(rho_rank(b.rho), b.seed, &b.op)));

    let records: Vec<RunRecord> = reports.iter().map(RunRecord::from_report).collect();
    let error_cells: Vec<(f64, OperatorKind)> = errors
        .iter()
        .filter_map(|e| e.op.parse().ok().map(|op| (e.rho, op)))
        .collect();
    let aggregate = aggregate(cfg.family, &cfg.rhos, &cfg.ops, &records, &error_cells);
    Ok(BenchOutput { reports, records, errors, aggregate })
}

fn cmd_bench(a: &BenchArgs) -> Result<i32, CliError> {
    let cfg = BenchConfig {
        family: a.family,
        params: parse_params(&a.params)?,
        rhos: a.rho_list.clone(),
        runs: a.runs,
        seed_base: a.seed_base,
        ops: a.ops.clone(),
        jobs: a.jobs,
        options: NewtonOptions {
            max_iter: a.max_iter,
            eps: a.eps,
            delta: a.delta,
            step_safety: a.step_safety,
            ncp: a.ncp,
            kind: OperatorKind::Full,
        },
        wall_time: !a.no_wall_time,
    };
    let out = run_bench(&cfg)?;
    write_file(&a.out.join("runs.csv"), &csv_string(&out.records)?)?;
    write_file(&a.out.join("aggregate.csv"), &csv_string(&out.aggregate)?)?;
    write_file(&a.out.join("chart.svg"), &render_svg(&out.aggregate))?;
    if !out.errors.is_empty() {
        write_file(&a.out.join("errors.csv"), &csv_string(&out.errors)?)?;
    }
    if !a.no_reports {
        for r in &out.reports {
            let name = format!("{}-{}.json", r.instance_id, r.op);
            write_file(&a.out.join("reports").join(name), &to_json_pretty(r)?)?;
        }
    }
    for row in &out.aggregate {
        println!(
            "rho={:<5} {:<4} converged {:>3}/{:<3} mean F {:>12.6} (presolve {:>12.6}) mean iters {:>6.1}",
            row.rho, row.op, row.converged, row.runs, row.mean_final_obj, row.mean_f0_obj, row.mean_iters
        );
    }
    if !out.errors.is_empty() {
        eprintln!("spo: {} runs raised errors; see errors.csv", out.errors.len());
    }
    Ok(EXIT_OK)
}

/// Line chart of mean target value against ρ, one series per operator plus
/// the presolve mean. Output depends only on the rows.
pub fn render_svg(rows: &[AggregateRow]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const L: f64 = 70.0;
    const R: f64 = 120.0;
    const T: f64 = 30.0;
    const B: f64 = 50.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#7f7f7f"];

    let mut rhos: Vec<f64> = Vec::new();
    for r in rows {
        if !rhos.contains(&r.rho) {
            rhos.push(r.rho);
        }
    }
    let mut ops: Vec<String> = Vec::new();
    for r in rows {
        if !ops.contains(&r.op) {
            ops.push(r.op.clone());
        }
    }
    let mut series: Vec<(String, Vec<(f64, f64)>)> = ops
        .iter()
        .map(|op| {
            let pts = rows
                .iter()
                .filter(|r| &r.op == op && r.mean_final_obj.is_finite())
                .map(|r| (r.rho, r.mean_final_obj))
                .collect();
            (op.clone(), pts)
        })
        .collect();
    let presolve: Vec<(f64, f64)> = rhos
        .iter()
        .filter_map(|&rho| {
            rows.iter()
                .find(|r| r.rho == rho && r.mean_f0_obj.is_finite())
                .map(|r| (rho, r.mean_f0_obj))
        })
        .collect();
    series.push(("presolve".to_string(), presolve));

    let xs = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0));
    let ys = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1));
    let (xmin, xmax) = bounds(xs);
    let (ymin, ymax) = bounds(ys.chain(std::iter::once(0.0)));
    let px = |x: f64| L + (x - xmin) / (xmax - xmin) * (W - L - R);
    let py = |y: f64| H - B - (y - ymin) / (ymax - ymin) * (H - T - B);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="18" text-anchor="middle">mean f(x) + rho*||x||_0 over successful runs</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<path d="M{:.1} {:.1} V{:.1} H{:.1}" fill="none" stroke="black"/>"#,
        L,
        T,
        H - B,
        W - R
    );
    for k in 0..=4 {
        let y = ymin + (ymax - ymin) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, L - 6.0, py(y) + 4.0, tick(y));
    }
    for &rho in &rhos {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(rho), H - B + 16.0, tick(rho));
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">rho</text>"#, (L + W - R) / 2.0, H - 12.0);
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = if name == "presolve" { COLORS[3] } else { COLORS[k % 3] };
        let dash = if name == "presolve" { r#" stroke-dasharray="5 4""# } else { "" };
        if !pts.is_empty() {
            let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#, d.join(" "));
            for &(x, y) in pts {
                let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, px(x), py(y));
            }
        }
        let ly = T + 10.0 + 18.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/>"#, W - R + 10.0, W - R + 30.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{name}</text>"#, W - R + 36.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

// -------------------------------------------------------------------- check

/// Point file contents; missing multiplier blocks default to `y = e` and zeros.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PointFile {
    Report { result: SolveReport },
    Point(PartialPoint),
    Bare(Vec<f64>),
}

#[derive(Debug, Deserialize)]
struct PartialPoint {
    x: Vec<f64>,
    y: Option<Vec<f64>>,
    lambda: Option<Vec<f64>>,
    mu: Option<Vec<f64>>,
    gamma: Option<Vec<f64>>,
}

/// Reads a point for `problem`; dimension mismatches are errors.
pub fn load_point(text: &str, problem: &SpoProblem) -> Result<PrimalDualPoint, SpoError> {
    let (n, m, p) = (problem.n(), problem.m(), problem.p());
    let point = match serde_json::from_str::<PointFile>(text)? {
        PointFile::Report { result } => result.final_point,
        PointFile::Point(pp) => {
            let x = DVector::from_vec(pp.x);
            let or = |v: Option<Vec<f64>>, len: usize, fill: f64| v.map(DVector::from_vec).unwrap_or_else(|| DVector::from_element(len, fill));
            PrimalDualPoint {
                y: or(pp.y, x.len(), 1.0),
                lambda: or(pp.lambda, m, 0.0),
                mu: or(pp.mu, p, 0.0),
                gamma: or(pp.gamma, x.len(), 0.0),
                x,
                sigma: None,
            }
        }
        PointFile::Bare(x) => {
            let x = DVector::from_vec(x);
            PrimalDualPoint {
                y: DVector::from_element(x.len(), 1.0),
                gamma: DVector::zeros(x.len()),
                lambda: DVector::zeros(m),
                mu: DVector::zeros(p),
                x,
                sigma: None,
            }
        }
    };
    if point.x.len() != n {
        return Err(SpoError::DimensionMismatch { what: "point x", expected: n, got: point.x.len() });
    }
    point.check_dims(problem)?;
    Ok(point)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema: String,
    pub instance_id: String,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub licq: Option<CqReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sosc: Option<SoscReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bd: Option<BdReport>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float", default)]
    pub sstat: Option<f64>,
}

mod opt_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "crate::serde_dense::float")] f64);

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(Wrap).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

fn cmd_check(a: &CheckArgs) -> Result<i32, CliError> {
    let inst = load_instance(&a.problem, a.rho)?;
    let problem = apps::build_spo(&inst)?;
    let point = load_point(&read_input(&a.point)?, &problem)?;
    let has = |k| a.checks.contains(&k);
    let report = CheckReport {
        schema: REPORT_SCHEMA.to_string(),
        instance_id: inst.instance_id()?,
        delta: a.delta,
        licq: if has(CheckKind::Licq) {
            Some(analysis::check_sp_licq(&problem, &point.x, a.delta, DEFAULT_ACTIVE_TOL)?)
        } else {
            None
        },
        sosc: if has(CheckKind::Sosc) {
            Some(analysis::check_strong_sp_sosc(&problem, &point.x, &point.lambda, &point.mu, a.delta)?)
        } else {
            None
        },
        bd: if has(CheckKind::Bd) {
            if a.op == OperatorKind::Complementary && !problem.nonneg() {
                return Err(usage("bd for comp needs a problem with x >= 0"));
            }
            Some(analysis::check_bd_regularity(&problem, &point, a.op, a.ncp, a.bd_cap)?)
        } else {
            None
        },
        sstat: if has(CheckKind::Sstat) {
            Some(kkt::s_stationarity_residual(&problem, &point.x, &point.lambda, &point.mu, a.delta, a.ncp)?)
        } else {
            None
        },
    };
    println!("{}", to_json_pretty(&report)?);
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------- gen

fn cmd_gen(a: &GenArgs) -> Result<i32, CliError> {
    let family = match (a.family_pos, a.family) {
        (Some(_), Some(_)) => return Err(usage("family given twice")),
        (Some(f), None) | (None, Some(f)) => f,
        (None, None) => return Err(usage("missing family")),
    };
    let mut text = a.params_pos.join(",");
    if let Some(p) = &a.params {
        text.push(',');
        text.push_str(p);
    }
    let mut params = parse_params(&text)?;
    if let Some(seed) = a.seed {
        if params.insert("seed".into(), seed.to_string()).is_some() {
            return Err(usage("seed given twice"));
        }
    }
    if let Some(rho) = a.rho {
        if params.insert("rho".into(), rho.to_string()).is_some() {
            return Err(usage("rho given twice"));
        }
    }
    let inst = generate(family, &params, 0)?;
    let id = inst.instance_id()?;
    let path = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("{id}.json")));
    write_file(&path, &inst.to_json()?)?;
    println!("{id} {}", path.display());
    Ok(EXIT_OK)
}
