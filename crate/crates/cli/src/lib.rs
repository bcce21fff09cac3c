//! Benchmark harness: builds an instance, runs a set of solvers, and writes
//! one convergence-trace CSV per solver plus a summary table.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pdbfw_core::{
    generate_synthetic, normalize_rows, read_libsvm, solve, solve_baseline, solve_trace,
    BaselineConfig, BaselineKind, ConvergenceTrace, DualStepRule, Error as CoreError, LossModel,
    MatrixQuadraticLoss, ParseOptions, Regularizer, SolverConfig, SparseDesignMatrix,
    SyntheticKind, SyntheticProblem, SyntheticSpec, TraceConfig, TraceRecord,
};

pub const SOLVERS: [&str; 4] = ["pdbfw", "fw", "acc_pgd", "svrg"];
pub const TRACE_HEADER: [&str; 7] = ["iter", "seconds", "primal", "dual", "gap", "flops", "support"];
pub const GAP_THRESHOLDS: [f64; 3] = [1e-2, 1e-4, 1e-6];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn failure(msg: impl Into<String>) -> CliError {
    CliError::Failure(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "pdbfw", version, about = "Primal-dual block Frank-Wolfe benchmark harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run solvers on one instance and write traces.
    Run(RunArgs),
    /// Tabulate traces written by `run`.
    Compare {
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SyntheticArg {
    #[value(alias = "sparse_regression")]
    SparseRegression,
    #[value(alias = "trace_sensing")]
    TraceSensing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstraintArg {
    L1,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    #[value(alias = "smooth_hinge")]
    SmoothHinge,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DeltaRuleArg {
    Spectral,
    Theory,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// LIBSVM file to load.
    #[arg(long, conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Pin the column count of a loaded file.
    #[arg(long, requires = "data")]
    pub n_cols: Option<usize>,
    /// Keep loaded rows unnormalized.
    #[arg(long, requires = "data")]
    pub raw: bool,
    #[arg(long, value_enum)]
    pub synthetic: Option<SyntheticArg>,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub d: usize,
    /// Target columns for trace sensing.
    #[arg(long, default_value_t = 50)]
    pub c: usize,
    /// Support size or rank of the ground truth.
    #[arg(long, alias = "rank", default_value_t = 10)]
    pub sparsity: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, value_enum)]
    pub constraint: Option<ConstraintArg>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long, default_value_t = 300.0)]
    pub lambda: f64,
    /// Ridge strength; 10/n when omitted.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Comma-separated names, each optionally `name:max_iters`.
    #[arg(long, default_value = "pdbfw")]
    pub solvers: String,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = DeltaRuleArg::Spectral)]
    pub delta_rule: DeltaRuleArg,
    /// Fixed dual step; overrides `--delta-rule`.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub gap_tol: f64,
    /// Per-solver wall-clock cap in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write measured seconds into the trace CSVs.
    #[arg(long)]
    pub wall_clock: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    File { path: PathBuf, n_cols: Option<usize>, normalize: bool },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    L1,
    Trace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRequest {
    pub name: String,
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub problem: Problem,
    pub constraint: Constraint,
    pub loss: LossArg,
    pub lambda: f64,
    pub mu: Option<f64>,
    pub solvers: Vec<SolverRequest>,
    pub s: Option<usize>,
    pub k: Option<usize>,
    pub delta: DualStepRule,
    pub max_iters: usize,
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub wall_clock: bool,
}

pub fn parse_solvers(list: &str) -> Result<Vec<SolverRequest>, CliError> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, iters) = match item.split_once(':') {
            Some((name, it)) => {
                let it: usize = it
                    .parse()
                    .map_err(|_| usage(format!("bad iteration override in {item:?}")))?;
                (name, Some(it))
            }
            None => (item, None),
        };
        if !SOLVERS.contains(&name) {
            return Err(usage(format!(
                "unknown solver {name:?}; valid solvers: {}",
                SOLVERS.join(", ")
            )));
        }
        if out.iter().any(|r: &SolverRequest| r.name == name) {
            return Err(usage(format!("solver {name:?} listed twice")));
        }
        out.push(SolverRequest { name: name.to_string(), max_iters: iters });
    }
    if out.is_empty() {
        return Err(usage(format!("no solvers given; valid solvers: {}", SOLVERS.join(", "))));
    }
    Ok(out)
}

impl RunSpec {
    pub fn from_args(args: &RunArgs) -> Result<Self, CliError> {
        let problem = match (&args.data, args.synthetic) {
            (Some(path), None) => Problem::File {
                path: path.clone(),
                n_cols: args.n_cols,
                normalize: !args.raw,
            },
            (None, Some(kind)) => Problem::Synthetic(SyntheticSpec {
                kind: match kind {
                    SyntheticArg::SparseRegression => SyntheticKind::SparseRegression,
                    SyntheticArg::TraceSensing => SyntheticKind::TraceSensing,
                },
                n: args.n,
                d: args.d,
                c: args.c,
                sparsity_or_rank: args.sparsity,
                noise: args.noise,
                seed: args.seed,
            }),
            (Some(_), Some(_)) => return Err(usage("--data and --synthetic are mutually exclusive")),
            (None, None) => return Err(usage("one of --data or --synthetic is required")),
        };
        let trace_data = matches!(&problem, Problem::Synthetic(s) if s.kind == SyntheticKind::TraceSensing);
        let constraint = match (args.constraint, trace_data) {
            (None, true) | (Some(ConstraintArg::Trace), true) => Constraint::Trace,
            (None, false) | (Some(ConstraintArg::L1), false) => Constraint::L1,
            (Some(ConstraintArg::Trace), false) => {
                return Err(usage("the trace constraint needs --synthetic trace-sensing"))
            }
            (Some(ConstraintArg::L1), true) => {
                return Err(usage("trace-sensing targets need the trace constraint"))
            }
        };
        let loss = args.loss.unwrap_or(match problem {
            Problem::File { .. } => LossArg::SmoothHinge,
            Problem::Synthetic(_) => LossArg::Quadratic,
        });
        let solvers = parse_solvers(&args.solvers)?;
        if constraint == Constraint::Trace {
            if loss != LossArg::Quadratic {
                return Err(usage("the trace constraint supports only the quadratic loss"));
            }
            if let Some(r) = solvers.iter().find(|r| r.name != "pdbfw") {
                return Err(usage(format!("solver {:?} does not support the trace constraint", r.name)));
            }
        }
        if !(args.lambda > 0.0) || !args.lambda.is_finite() {
            return Err(usage(format!("--lambda must be positive, got {}", args.lambda)));
        }
        if let Some(mu) = args.mu {
            if !(mu > 0.0) || !mu.is_finite() {
                return Err(usage(format!("--mu must be positive, got {mu}")));
            }
        }
        let delta = match (args.delta, args.delta_rule) {
            (Some(v), _) => DualStepRule::Fixed(v),
            (None, DeltaRuleArg::Spectral) => DualStepRule::Spectral,
            (None, DeltaRuleArg::Theory) => DualStepRule::Theory,
        };
        let time_limit = match args.time_limit {
            Some(t) if !(t > 0.0) || !t.is_finite() => {
                return Err(usage(format!("--time-limit must be positive, got {t}")))
            }
            Some(t) => Some(Duration::from_secs_f64(t)),
            None => None,
        };
        Ok(RunSpec {
            problem,
            constraint,
            loss,
            lambda: args.lambda,
            mu: args.mu,
            solvers,
            s: args.s,
            k: args.k,
            delta,
            max_iters: args.max_iters,
            gap_tol: args.gap_tol,
            time_limit,
            seed: args.seed,
            output_dir: args.out.clone(),
            wall_clock: args.wall_clock,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSummary {
    pub name: String,
    pub iterations: usize,
    pub final_primal: f64,
    pub final_dual: f64,
    pub final_gap: f64,
    pub seconds: f64,
    pub flops: u64,
}

enum Instance {
    Vector { a: SparseDesignMatrix, targets: Vec<f64> },
    Matrix { a: SparseDesignMatrix, targets: pdbfw_core::DMatrix<f64> },
}

fn build_instance(spec: &RunSpec) -> Result<Instance, CliError> {
    match &spec.problem {
        Problem::File { path, n_cols, normalize } => {
            let opts = ParseOptions { n_cols: *n_cols, ..Default::default() };
            let ds = read_libsvm(path, opts).map_err(|e| match e {
                CoreError::Io(err) => usage(format!("cannot read {}: {err}", path.display())),
                other => usage(format!("{}: {other}", path.display())),
            })?;
            let ds = if *normalize { normalize_rows(&ds) } else { ds };
            log::info!("loaded {}: n={} d={} nnz={}", ds.meta.name, ds.meta.n, ds.meta.d, ds.meta.nnz);
            Ok(Instance::Vector { a: ds.a, targets: ds.labels })
        }
        Problem::Synthetic(s) => match generate_synthetic(s).map_err(|e| usage(e.to_string()))? {
            SyntheticProblem::SparseRegression(p) => {
                Ok(Instance::Vector { a: p.dataset.a, targets: p.dataset.labels })
            }
            SyntheticProblem::TraceSensing(p) => Ok(Instance::Matrix { a: p.a, targets: p.targets }),
        },
    }
}

fn solver_failure(name: &str, e: CoreError) -> CliError {
    match e {
        CoreError::Config(_) | CoreError::InvalidArgument(_) | CoreError::DimensionMismatch { .. } => {
            usage(format!("{name}: {e}"))
        }
        other => failure(format!("{name}: {other}")),
    }
}

/// Runs every requested solver and writes `trace_<solver>.csv` and
/// `summary.tsv` into the output directory.
pub fn run(spec: &RunSpec) -> Result<Vec<SolverSummary>, CliError> {
    let instance = build_instance(spec)?;
    let n = match &instance {
        Instance::Vector { a, .. } | Instance::Matrix { a, .. } => a.n_rows(),
    };
    let mu = spec.mu.unwrap_or(10.0 / n as f64);
    let reg = Regularizer::ridge(mu).map_err(|e| usage(e.to_string()))?;
    fs::create_dir_all(&spec.output_dir)
        .map_err(|e| failure(format!("cannot create {}: {e}", spec.output_dir.display())))?;
    let mut summaries = Vec::new();
    for req in &spec.solvers {
        let iters = req.max_iters.unwrap_or(spec.max_iters);
        let start = Instant::now();
        let trace = match &instance {
            Instance::Vector { a, targets } => {
                let loss = match spec.loss {
                    LossArg::SmoothHinge => LossModel::smooth_hinge(targets.clone()),
                    LossArg::Quadratic => LossModel::quadratic(targets.clone()),
                }
                .map_err(|e| usage(e.to_string()))?;
                run_vector(spec, &req.name, iters, a, &loss, &reg)?
            }
            Instance::Matrix { a, targets } => {
                let loss = MatrixQuadraticLoss::new(targets.clone()).map_err(|e| usage(e.to_string()))?;
                let mut cfg = TraceConfig::new(spec.lambda, spec.s.unwrap_or(a.n_cols().min(targets.ncols())));
                cfg.k = spec.k;
                cfg.delta = spec.delta;
                cfg.max_iters = iters;
                cfg.gap_tol = spec.gap_tol;
                cfg.time_limit = spec.time_limit;
                cfg.seed = spec.seed;
                solve_trace(a, &loss, &reg, &cfg).map_err(|e| solver_failure(&req.name, e))?.trace
            }
        };
        let seconds = start.elapsed().as_secs_f64();
        let last = trace.last().ok_or_else(|| failure(format!("{}: empty trace", req.name)))?;
        summaries.push(SolverSummary {
            name: req.name.clone(),
            iterations: last.iter,
            final_primal: last.primal,
            final_dual: last.dual,
            final_gap: last.gap,
            seconds,
            flops: last.flops,
        });
        let path = spec.output_dir.join(format!("trace_{}.csv", req.name));
        write_trace(&path, &trace, spec.wall_clock)?;
        log::info!("{}: {} iterations, gap {:e}", req.name, last.iter, last.gap);
    }
    write_summary(&spec.output_dir.join("summary.tsv"), &summaries)?;
    Ok(summaries)
}

fn run_vector(
    spec: &RunSpec,
    name: &str,
    iters: usize,
    a: &SparseDesignMatrix,
    loss: &LossModel,
    reg: &Regularizer,
) -> Result<ConvergenceTrace, CliError> {
    if name == "pdbfw" {
        let mut cfg = SolverConfig::new(spec.lambda, spec.s.unwrap_or(a.n_cols()));
        cfg.k = spec.k;
        cfg.delta = spec.delta;
        cfg.max_iters = iters;
        cfg.gap_tol = spec.gap_tol;
        cfg.time_limit = spec.time_limit;
        return Ok(solve(a, loss, reg, &cfg).map_err(|e| solver_failure(name, e))?.trace);
    }
    let kind = match name {
        "fw" => BaselineKind::FrankWolfe,
        "acc_pgd" => BaselineKind::AccPgd,
        "svrg" => BaselineKind::Svrg,
        other => return Err(usage(format!("unknown solver {other:?}"))),
    };
    let mut cfg = BaselineConfig::new(kind, spec.lambda);
    cfg.max_iters = iters;
    cfg.gap_tol = spec.gap_tol;
    cfg.seed = spec.seed;
    cfg.time_limit = spec.time_limit;
    Ok(solve_baseline(a, loss, reg, &cfg).map_err(|e| solver_failure(name, e))?.trace)
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> CliError {
    failure(format!("{}: {e}", path.display()))
}

pub fn write_trace(path: &Path, trace: &ConvergenceTrace, wall_clock: bool) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_failure(path, e))?;
    w.write_record(TRACE_HEADER).map_err(|e| io_failure(path, e))?;
    for r in trace.records() {
        let seconds = if wall_clock { r.seconds } else { 0.0 };
        w.write_record([
            r.iter.to_string(),
            seconds.to_string(),
            r.primal.to_string(),
            r.dual.to_string(),
            r.gap.to_string(),
            r.flops.to_string(),
            r.support.to_string(),
        ])
        .map_err(|e| io_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

fn write_summary(path: &Path, rows: &[SolverSummary]) -> Result<(), CliError> {
    let mut text = String::from("solver\titerations\tfinal_primal\tfinal_dual\tfinal_gap\tseconds\tflops\n");
    for r in rows {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\n",
            r.name, r.iterations, r.final_primal, r.final_dual, r.final_gap, r.seconds, r.flops
        ));
    }
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, CliError> {
    let bad = |msg: String| failure(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = k + 2;
        let field = |i: usize| -> Result<&str, CliError> {
            rec.get(i).ok_or_else(|| bad(format!("line {line}: missing column {}", TRACE_HEADER[i])))
        };
        let float = |i: usize| -> Result<f64, CliError> {
            field(i)?
                .parse()
                .map_err(|_| bad(format!("line {line}: bad {} value", TRACE_HEADER[i])))
        };
        let int = |i: usize| -> Result<u64, CliError> {
            field(i)?
                .parse()
                .map_err(|_| bad(format!("line {line}: bad {} value", TRACE_HEADER[i])))
        };
        out.push(TraceRecord {
            iter: int(0)? as usize,
            seconds: float(1)?,
            primal: float(2)?,
            dual: float(3)?,
            gap: float(4)?,
            flops: int(5)?,
            support: int(6)? as usize,
        });
    }
    if out.is_empty() {
        return Err(bad("no records".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub solver: String,
    /// First record reaching each gap threshold.
    pub reached: Vec<Option<(usize, f64)>>,
    pub final_primal: f64,
    pub final_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub p_star: f64,
    pub rows: Vec<ComparisonRow>,
}

fn relative_error(primal: f64, p_star: f64) -> f64 {
    (primal - p_star) / p_star.abs().max(f64::MIN_POSITIVE)
}

/// Reads every `trace_*.csv` in `dir`, tabulates time-to-gap, and writes
/// `relative_error.csv` against the best primal value across solvers.
pub fn compare(dir: &Path) -> Result<Comparison, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| failure(format!("{}: {e}", dir.display())))?;
    let mut traces = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| failure(e.to_string()))?.path();
        let name = path.file_name().and_then(|f| f.to_str()).unwrap_or_default();
        if let Some(solver) = name.strip_prefix("trace_").and_then(|s| s.strip_suffix(".csv")) {
            traces.insert(solver.to_string(), read_trace(&path)?);
        }
    }
    if traces.is_empty() {
        return Err(failure(format!("{}: no trace_*.csv files", dir.display())));
    }
    let p_star = traces
        .values()
        .flatten()
        .map(|r| r.primal)
        .fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    let mut series = String::from("solver,iter,seconds,flops,rel_error\n");
    for (solver, recs) in &traces {
        let reached = GAP_THRESHOLDS
            .iter()
            .map(|&t| recs.iter().find(|r| r.gap <= t).map(|r| (r.iter, r.seconds)))
            .collect();
        for r in recs {
            series.push_str(&format!(
                "{solver},{},{},{},{}\n",
                r.iter,
                r.seconds,
                r.flops,
                relative_error(r.primal, p_star)
            ));
        }
        let last = recs.last().expect("non-empty");
        rows.push(ComparisonRow {
            solver: solver.clone(),
            reached,
            final_primal: last.primal,
            final_rel_error: relative_error(last.primal, p_star),
        });
    }
    let out = dir.join("relative_error.csv");
    fs::write(&out, series).map_err(|e| io_failure(&out, e))?;
    Ok(Comparison { p_star, rows })
}

impl Comparison {
    pub fn render(&self) -> String {
        let mut text = format!("P* = {}\n", self.p_star);
        text.push_str("solver");
        for t in GAP_THRESHOLDS {
            text.push_str(&format!("\tgap<={t:e}"));
        }
        text.push_str("\tfinal_primal\trel_error\n");
        for row in &self.rows {
            text.push_str(&row.solver);
            for cell in &row.reached {
                match cell {
                    Some((iter, secs)) => text.push_str(&format!("\t{secs:.4}s (iter {iter})")),
                    None => text.push_str("\t—"),
                }
            }
            text.push_str(&format!("\t{}\t{:e}\n", row.final_primal, row.final_rel_error));
        }
        text
    }
}
