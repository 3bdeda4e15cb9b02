//! Command-line front end.
//!
//! Every subcommand takes the solver flags; a JSON file passed with
//! `--config` supplies defaults under the same (kebab-case) names, and flags
//! given on the command line win. Exit codes: 0 success, 1 bad
//! configuration, 2 failure while running.

mod output;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Deserialize;

use crate::diagnostics::{self, ClassifyTolerances, Rect};
use crate::problem::{corpus, corpus_names, corpus_problem, Problem};
use crate::solvers::{self, Basis, LineSearch, Method, SolverConfig};
use crate::Error;

pub use output::{summary_json, trace_csv, RunSummary};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Comma-separated reals.
#[derive(Debug, Clone, PartialEq)]
pub struct RealList(pub Vec<f64>);

impl FromStr for RealList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(RealList)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    NqnSe,
    LmM,
    General,
    Newton,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::NqnSe => Method::NqnSe,
            MethodArg::LmM => Method::LmM,
            MethodArg::General => Method::General,
            MethodArg::Newton => Method::NewtonBaseline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LineSearchArg {
    Halving,
    BetaGrid,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Standard,
    Eigen,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    /// JSON file with defaults for any of these flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub problem: Option<String>,
    #[arg(long, value_enum, global = true)]
    pub method: Option<MethodArg>,
    /// Starting point, comma-separated
    #[arg(long, allow_hyphen_values = true, global = true)]
    pub x0: Option<RealList>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Accept tau >= 1
    #[arg(long, global = true)]
    pub allow_large_tau: bool,
    /// Fixed delta ladder, comma-separated (random when absent)
    #[arg(long, allow_hyphen_values = true, global = true)]
    pub deltas: Option<RealList>,
    #[arg(long, value_enum, global = true)]
    pub line_search: Option<LineSearchArg>,
    /// Backtracking ratio for beta-grid (random when absent)
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Gate threshold for hybrid
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Reject steps landing where |det JF| <= eps
    #[arg(long, global = true)]
    pub det_eps: Option<f64>,
    #[arg(long, global = true)]
    pub q: Option<f64>,
    #[arg(long, value_enum, global = true)]
    pub basis: Option<BasisArg>,
    #[arg(long, global = true)]
    pub tol_root: Option<f64>,
    #[arg(long, global = true)]
    pub tol_crit: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "qnsolve", version, about = "Regularised Newton-type solvers for F(x) = 0")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one solve; writes trace.csv and summary.json to --out
    Solve,
    /// Every corpus problem with each of the selected methods
    Suite(MethodsArg),
    /// Basin-of-attraction grid for a 2-D problem
    Basin(BasinArgs),
    /// Saddle-escape Monte Carlo
    McSaddle(McArgs),
    /// Convergence order estimates
    Rate(RateArgs),
    /// Run seeded starts and audit every trace
    Check(CheckArgs),
}

#[derive(Debug, Clone, Args)]
struct MethodsArg {
    /// Methods to run (defaults to --method, else all)
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,
}

#[derive(Debug, Clone, Args)]
struct BasinArgs {
    /// x_min,x_max,y_min,y_max
    #[arg(long, allow_hyphen_values = true)]
    rect: Option<RealList>,
    /// nx or nx,ny
    #[arg(long)]
    res: Option<RealList>,
}

#[derive(Debug, Clone, Args)]
struct McArgs {
    #[arg(long, allow_hyphen_values = true)]
    center: Option<RealList>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct RateArgs {
    #[command(flatten)]
    methods: MethodsArg,
    /// Problems to run, comma-separated
    #[arg(long, value_delimiter = ',')]
    problems: Vec<String>,
}

#[derive(Debug, Clone, Args)]
struct CheckArgs {
    #[command(flatten)]
    methods: MethodsArg,
    /// Random starts per problem and method
    #[arg(long, default_value_t = 20)]
    starts: usize,
    /// Starts are drawn from [-w, w]^m
    #[arg(long, default_value_t = 3.0)]
    half_width: f64,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub problem: Option<String>,
    pub method: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub tau: Option<f64>,
    pub allow_large_tau: Option<bool>,
    pub deltas: Option<Vec<f64>>,
    pub line_search: Option<String>,
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    pub det_eps: Option<f64>,
    pub q: Option<f64>,
    pub basis: Option<String>,
    pub tol_root: Option<f64>,
    pub tol_crit: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub rect: Option<Vec<f64>>,
    pub res: Option<Vec<usize>>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub trials: Option<usize>,
}

fn parse_enum<T: ValueEnum>(field: &str, s: &str) -> CliResult<T> {
    T::from_str(s, false).map_err(|_| {
        let options: Vec<String> = T::value_variants()
            .iter()
            .filter_map(|v| v.to_possible_value().map(|p| p.get_name().to_string()))
            .collect();
        CliError::Config(format!("{field}: unknown value `{s}` (expected one of {})", options.join(", ")))
    })
}

/// Flags merged over the config file.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub problem: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub solver: SolverConfig,
    /// Whether the method was chosen explicitly.
    pub method_given: bool,
    pub out: Option<PathBuf>,
    pub rect: Option<Vec<f64>>,
    pub res: Option<Vec<usize>>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub trials: Option<usize>,
}

impl CliConfig {
    pub fn from_args(args: &SolverArgs) -> CliResult<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
                serde_json::from_str::<FileConfig>(&text)
                    .map_err(|e| CliError::Config(format!("parsing {}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        Self::merge(args, file)
    }

    pub fn merge(args: &SolverArgs, file: FileConfig) -> CliResult<Self> {
        let method = match (args.method, &file.method) {
            (Some(m), _) => Some(m),
            (None, Some(s)) => Some(parse_enum::<MethodArg>("method", s)?),
            (None, None) => None,
        };
        let line_search = match (args.line_search, &file.line_search) {
            (Some(l), _) => l,
            (None, Some(s)) => parse_enum::<LineSearchArg>("line-search", s)?,
            (None, None) => LineSearchArg::Halving,
        };
        let basis = match (args.basis, &file.basis) {
            (Some(b), _) => b,
            (None, Some(s)) => parse_enum::<BasisArg>("basis", s)?,
            (None, None) => BasisArg::Standard,
        };
        let beta = args.beta.or(file.beta);
        let eta = args.eta.or(file.eta);
        let line_search = match line_search {
            LineSearchArg::Halving => {
                if beta.is_some() {
                    return Err(config_err("beta: only used with --line-search beta-grid or hybrid"));
                }
                LineSearch::Halving
            }
            LineSearchArg::BetaGrid => LineSearch::BetaGrid(beta),
            LineSearchArg::Hybrid => {
                let eta = eta.ok_or_else(|| config_err("eta: required by --line-search hybrid"))?;
                let inner = match beta {
                    Some(b) => LineSearch::BetaGrid(Some(b)),
                    None => LineSearch::Halving,
                };
                LineSearch::Hybrid { eta, inner: Box::new(inner) }
            }
        };
        if eta.is_some() && !matches!(line_search, LineSearch::Hybrid { .. }) {
            return Err(config_err("eta: only used with --line-search hybrid"));
        }
        let d = SolverConfig::default();
        let solver = SolverConfig {
            method: method.map(Method::from).unwrap_or(d.method),
            deltas: args.deltas.clone().map(|l| l.0).or(file.deltas),
            tau: args.tau.or(file.tau).unwrap_or(d.tau),
            allow_large_tau: args.allow_large_tau || file.allow_large_tau.unwrap_or(false),
            line_search,
            det_guard: args.det_eps.or(file.det_eps),
            q: args.q.or(file.q).unwrap_or(d.q),
            basis: match basis {
                BasisArg::Standard => Basis::Standard,
                BasisArg::Eigen => Basis::EigenOfA,
            },
            tol_root: args.tol_root.or(file.tol_root).unwrap_or(d.tol_root),
            tol_crit: args.tol_crit.or(file.tol_crit).unwrap_or(d.tol_crit),
            max_iter: args.max_iter.or(file.max_iter).unwrap_or(d.max_iter),
            rng_seed: args.seed.or(file.seed).unwrap_or(d.rng_seed),
            ..d
        };
        Ok(CliConfig {
            problem: args.problem.clone().or(file.problem),
            x0: args.x0.clone().map(|l| l.0).or(file.x0),
            solver,
            method_given: method.is_some(),
            out: args.out.clone().or(file.out),
            rect: file.rect,
            res: file.res,
            center: file.center,
            radius: file.radius,
            trials: file.trials,
        })
    }

    fn problem(&self, default: Option<&str>) -> CliResult<Problem> {
        let name = self
            .problem
            .as_deref()
            .or(default)
            .ok_or_else(|| config_err("problem: required (see --problem)"))?;
        corpus_problem(name).ok_or_else(|| {
            CliError::Config(format!("problem: unknown `{name}` (available: {})", corpus_names().join(", ")))
        })
    }

    fn validated_solver(&self, problem: &Problem) -> CliResult<SolverConfig> {
        self.solver.validate(problem).map_err(config_err)?;
        Ok(self.solver.clone())
    }

    fn methods(&self, listed: &[MethodArg], default: &[Method]) -> Vec<Method> {
        if !listed.is_empty() {
            listed.iter().map(|m| Method::from(*m)).collect()
        } else if self.method_given {
            vec![self.solver.method]
        } else {
            default.to_vec()
        }
    }
}

fn point(field: &str, values: &[f64], problem: &Problem) -> CliResult<DVector<f64>> {
    if values.len() != problem.domain_dim() {
        return Err(CliError::Config(format!(
            "{field}: `{}` takes {} coordinates, got {}",
            problem.name(),
            problem.domain_dim(),
            values.len()
        )));
    }
    Ok(DVector::from_column_slice(values))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| runtime_err(format!("creating {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| runtime_err(format!("writing {}: {e}", path.display())))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable output");
    s.push('\n');
    s
}

/// Parses `argv` (program name first), runs the subcommand, and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let mut stdout = String::new();
    let result = CliConfig::from_args(&cli.solver).and_then(|cfg| dispatch(&cli.command, &cfg, &mut stdout));
    print!("{stdout}");
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command, cfg: &CliConfig, out: &mut String) -> CliResult<()> {
    match command {
        Command::Solve => cmd_solve(cfg, out),
        Command::Suite(m) => cmd_suite(cfg, &m.methods, out),
        Command::Basin(b) => cmd_basin(cfg, b, out),
        Command::McSaddle(m) => cmd_mc(cfg, m, out),
        Command::Rate(r) => cmd_rate(cfg, r, out),
        Command::Check(c) => cmd_check(cfg, c, out),
    }
}

fn cmd_solve(cfg: &CliConfig, out: &mut String) -> CliResult<()> {
    let problem = cfg.problem(None)?;
    let solver = cfg.validated_solver(&problem)?;
    let x0 = match &cfg.x0 {
        Some(v) => point("x0", v, &problem)?,
        None => problem.default_start(),
    };
    let resolved = solver.resolve(&problem).map_err(config_err)?;
    let run = solvers::solve_resolved(&problem, &resolved, &x0).map_err(runtime_err)?;
    let summary = RunSummary::new(&problem, &resolved, &run);
    let summary_text = summary_json(&summary);
    if let Some(dir) = &cfg.out {
        write_file(dir, "trace.csv", &trace_csv(&run, problem.domain_dim()))?;
        write_file(dir, "summary.json", &summary_text)?;
    }
    out.push_str(&summary_text);
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn cmd_suite(cfg: &CliConfig, listed: &[MethodArg], out: &mut String) -> CliResult<()> {
    let methods = cfg.methods(
        listed,
        &[Method::NqnSe, Method::LmM, Method::General, Method::NewtonBaseline],
    );
    let mut csv = String::from("problem,method,termination,iterations,final_norm_f,order\n");
    writeln!(out, "{:<14} {:<8} {:<18} {:>6} {:>12} {:>7}", "problem", "method", "termination", "iters", "||F||", "order").unwrap();
    for problem in corpus() {
        for &method in &methods {
            let solver = SolverConfig { method, ..cfg.solver.clone() };
            let (term, iters, norm, order) = match solver.resolve(&problem) {
                Err(e) => (format!("skipped ({e})"), String::new(), String::new(), None),
                Ok(resolved) => match solvers::solve_resolved(&problem, &resolved, &problem.default_start()) {
                    Ok(run) => (
                        run.termination.as_str().to_string(),
                        run.trace.len().to_string(),
                        format!("{:e}", run.trace.last().map_or(f64::NAN, |r| r.f_val.sqrt())),
                        run.order_estimate,
                    ),
                    Err(e) => (format!("error ({e})"), String::new(), String::new(), None),
                },
            };
            let short = term.split(' ').next().unwrap_or("").to_string();
            writeln!(
                out,
                "{:<14} {:<8} {:<18} {:>6} {:>12} {:>7}",
                problem.name(),
                method.cli_name(),
                short,
                iters,
                norm,
                fmt_opt(order)
            )
            .unwrap();
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                problem.name(),
                method.cli_name(),
                short,
                iters,
                norm,
                order.map_or(String::new(), |o| o.to_string())
            )
            .unwrap();
        }
    }
    if let Some(dir) = &cfg.out {
        write_file(dir, "suite.csv", &csv)?;
    }
    Ok(())
}

fn cmd_basin(cfg: &CliConfig, args: &BasinArgs, out: &mut String) -> CliResult<()> {
    let problem = cfg.problem(Some("cubic2d"))?;
    let solver = cfg.validated_solver(&problem)?;
    let rect = args.rect.clone().map(|l| l.0).or(cfg.rect.clone()).unwrap_or(vec![-2.0, 2.0, -2.0, 2.0]);
    if rect.len() != 4 {
        return Err(config_err("rect: expected x_min,x_max,y_min,y_max"));
    }
    let rect = Rect::new(rect[0], rect[1], rect[2], rect[3]).map_err(config_err)?;
    let res: Vec<usize> = match &args.res {
        Some(l) => l
            .0
            .iter()
            .map(|v| if v.fract() == 0.0 && *v >= 1.0 { Ok(*v as usize) } else { Err(config_err("res: expected positive integers")) })
            .collect::<CliResult<_>>()?,
        None => cfg.res.clone().unwrap_or(vec![201]),
    };
    let (nx, ny) = match res.as_slice() {
        [n] => (*n, *n),
        [nx, ny] => (*nx, *ny),
        _ => return Err(config_err("res: expected nx or nx,ny")),
    };
    if nx == 0 || ny == 0 {
        return Err(config_err("res: must be positive"));
    }
    let dir = cfg.out.as_ref().ok_or_else(|| config_err("out: basin needs an output directory"))?;
    let grid = diagnostics::basin_grid(&problem, rect, nx, ny, &solver, problem.known_roots()).map_err(|e| match e {
        Error::InvalidInput(_) | Error::InvalidConfig { .. } => config_err(e),
        e => runtime_err(e),
    })?;
    write_file(dir, "basin.pgm", &grid.to_pgm())?;
    write_file(dir, "basin.csv", &grid.to_csv())?;
    let unconverged = grid.root_index.iter().filter(|&&r| r < 0).count();
    out.push_str(&json(&serde_json::json!({
        "problem": problem.name(),
        "method": solver.method.cli_name(),
        "nx": nx,
        "ny": ny,
        "rect": [rect.x_min, rect.x_max, rect.y_min, rect.y_max],
        "root_counts": grid.counts(),
        "unconverged": unconverged,
        "seed": solver.rng_seed,
    })));
    Ok(())
}

fn cmd_mc(cfg: &CliConfig, args: &McArgs, out: &mut String) -> CliResult<()> {
    let problem = cfg.problem(Some("saddle1d"))?;
    let solver = cfg.validated_solver(&problem)?;
    let center = match args.center.clone().map(|l| l.0).or(cfg.center.clone()) {
        Some(c) => point("center", &c, &problem)?,
        None => DVector::zeros(problem.domain_dim()),
    };
    let radius = args.radius.or(cfg.radius).unwrap_or(0.05);
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(config_err("radius: must be a non-negative real"));
    }
    let trials = args.trials.or(cfg.trials).unwrap_or(100);
    if trials == 0 {
        return Err(config_err("trials: must be positive"));
    }
    let summary = diagnostics::saddle_escape_mc(&problem, &center, radius, trials, &solver).map_err(runtime_err)?;
    let text = json(&serde_json::json!({
        "problem": problem.name(),
        "method": solver.method.cli_name(),
        "center": center.as_slice(),
        "radius": radius,
        "summary": summary,
    }));
    if let Some(dir) = &cfg.out {
        write_file(dir, "mc_saddle.json", &text)?;
    }
    out.push_str(&text);
    Ok(())
}

fn cmd_rate(cfg: &CliConfig, args: &RateArgs, out: &mut String) -> CliResult<()> {
    let methods = cfg.methods(&args.methods.methods, &[Method::NqnSe, Method::LmM]);
    let names: Vec<String> = if !args.problems.is_empty() {
        args.problems.clone()
    } else if let Some(p) = &cfg.problem {
        vec![p.clone()]
    } else {
        vec!["quad1d".into(), "cubic2d".into(), "circles2d".into()]
    };
    let mut rows = Vec::new();
    writeln!(out, "{:<14} {:<8} {:<18} {:>7}", "problem", "method", "termination", "order").unwrap();
    for name in &names {
        let problem = corpus_problem(name)
            .ok_or_else(|| CliError::Config(format!("problems: unknown `{name}`")))?;
        let x0 = match &cfg.x0 {
            Some(v) => point("x0", v, &problem)?,
            None => problem.default_start(),
        };
        for &method in &methods {
            let solver = SolverConfig { method, ..cfg.solver.clone() };
            let resolved = solver.resolve(&problem).map_err(config_err)?;
            let run = solvers::solve_resolved(&problem, &resolved, &x0).map_err(runtime_err)?;
            writeln!(
                out,
                "{:<14} {:<8} {:<18} {:>7}",
                problem.name(),
                method.cli_name(),
                run.termination.as_str(),
                fmt_opt(run.order_estimate)
            )
            .unwrap();
            rows.push(serde_json::json!({
                "problem": problem.name(),
                "method": method.cli_name(),
                "termination": run.termination,
                "order_estimate": run.order_estimate,
            }));
        }
    }
    if let Some(dir) = &cfg.out {
        write_file(dir, "rates.json", &json(&serde_json::json!({ "seed": cfg.solver.rng_seed, "runs": rows })))?;
    }
    Ok(())
}

fn cmd_check(cfg: &CliConfig, args: &CheckArgs, out: &mut String) -> CliResult<()> {
    let methods = cfg.methods(&args.methods.methods, &[Method::NqnSe, Method::LmM, Method::General]);
    if !(args.half_width > 0.0 && args.half_width.is_finite()) {
        return Err(config_err("half-width: must be positive"));
    }
    let problems = match &cfg.problem {
        Some(_) => vec![cfg.problem(None)?],
        None => corpus(),
    };
    let tols = ClassifyTolerances {
        tol_root: cfg.solver.tol_root,
        tol_crit: 2.0 * diagnostics::criticality_bound(cfg.solver.tol_crit),
        ..Default::default()
    };
    let mut failures = 0usize;
    for problem in &problems {
        let starts = diagnostics::random_starts(problem, args.starts, args.half_width, cfg.solver.rng_seed);
        for &method in &methods {
            let mut violations = Vec::new();
            let mut outcomes = std::collections::BTreeMap::<String, usize>::new();
            for (i, x0) in starts.iter().enumerate() {
                let solver = SolverConfig {
                    method,
                    rng_seed: cfg.solver.rng_seed.wrapping_add(i as u64),
                    ..cfg.solver.clone()
                };
                let resolved = match solver.resolve(problem) {
                    Ok(r) => r,
                    Err(e) => {
                        violations.push(format!("config: {e}"));
                        break;
                    }
                };
                let run = solvers::solve_resolved(problem, &resolved, x0).map_err(runtime_err)?;
                let class = match run.termination {
                    solvers::Termination::RootFound | solvers::Termination::CriticalNonRoot => {
                        diagnostics::classify_limit(problem, &run.final_point(), &tols)
                            .map(|r| format!("{:?}", r.class))
                            .unwrap_or_else(|_| run.termination.as_str().to_string())
                    }
                    t => t.as_str().to_string(),
                };
                *outcomes.entry(class).or_default() += 1;
                for v in diagnostics::audit_run(problem, &resolved, &run).map_err(runtime_err)? {
                    violations.push(format!("start {i}: {v}"));
                }
            }
            let status = if violations.is_empty() { "PASS" } else { "FAIL" };
            let summary: Vec<String> = outcomes.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(out, "{status} {} {} [{}]", problem.name(), method.cli_name(), summary.join(" ")).unwrap();
            for v in violations.iter().take(5) {
                writeln!(out, "    {v}").unwrap();
            }
            if !violations.is_empty() {
                failures += 1;
            }
        }
    }
    if failures > 0 {
        return Err(CliError::Runtime(format!("{failures} problem/method pairs violated an invariant")));
    }
    Ok(())
}
