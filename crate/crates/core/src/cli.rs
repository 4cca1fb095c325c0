//! Command-line front end: `solve` and `sweep`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cutting_set::robust_cutting_set;
use crate::error::{InstanceError, SolveError};
use crate::pooling::{build_dual_counterpart, build_pq, load_instance, PerturbationMode, PoolingInstance};
use crate::qcqp::QcqpProblem;
use crate::rsbb::{solve_rsbb, SolveConfig, Termination};
use crate::toy::toy_problem;
use crate::trace::{ConvergenceTrace, TraceEvent};
use crate::uncertainty::{robust_counterpart, SetKind, UncertaintySet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_LIMIT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

pub const DATA_DIR_ENV: &str = "RSBB_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "rsbb", version, about = "Robust spatial branch-and-bound for bilinear problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance under one uncertainty set.
    Solve(SolveArgs),
    /// Solve a grid of instances, set kinds and sizes.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Branch-and-bound with per-node robust cuts.
    Rsbb,
    /// Cutting-set loop around global sampled solves.
    Cutting,
    /// Deterministic dual counterpart solved globally.
    Dual,
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Seconds.
    #[arg(long, default_value_t = 3600.0)]
    pub time_limit: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_nodes: usize,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
}

impl SolverFlags {
    pub fn config(&self) -> SolveConfig {
        SolveConfig {
            tol: self.tol,
            epsilon: self.epsilon,
            delta: self.delta,
            max_nodes: self.max_nodes,
            time_limit: Some(self.time_limit),
            ..SolveConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Built-in name (`toy`), data-directory name, or path to a JSON file.
    #[arg(long)]
    pub instance: String,
    #[arg(long, value_enum, default_value_t = Method::Rsbb)]
    pub method: Method,
    #[arg(long = "set", default_value = "box")]
    pub set_kind: SetKind,
    #[arg(long, default_value_t = 0.0)]
    pub size: f64,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long = "instance", required = true, num_args = 1.., value_delimiter = ',')]
    pub instances: Vec<String>,
    #[arg(long, value_enum, default_value_t = Method::Rsbb)]
    pub method: Method,
    #[arg(long = "set", num_args = 1.., value_delimiter = ',', default_value = "box,ellipsoidal,polyhedral")]
    pub set_kinds: Vec<SetKind>,
    #[arg(long = "size", num_args = 1.., value_delimiter = ',', default_value = "0.05,0.1,0.15,0.2,0.25,0.3")]
    pub sizes: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub solver: SolverFlags,
}

/// Problem source resolved from `--instance`.
#[derive(Debug, Clone)]
pub enum Instance {
    Toy,
    Pooling(PoolingInstance),
}

impl Instance {
    pub fn name(&self) -> String {
        match self {
            Instance::Toy => "toy".into(),
            Instance::Pooling(p) => p.name.clone(),
        }
    }

    pub fn problem(&self) -> QcqpProblem {
        match self {
            Instance::Toy => toy_problem(),
            Instance::Pooling(p) => build_pq(p, PerturbationMode::Equal).problem,
        }
    }

    pub fn dual_counterpart(&self, set: &UncertaintySet) -> Result<QcqpProblem, SolveError> {
        Ok(match self {
            Instance::Toy => robust_counterpart(&toy_problem(), set)?,
            Instance::Pooling(p) => build_dual_counterpart(p, PerturbationMode::Equal, set)?,
        })
    }
}

/// Directory searched for named instances.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("data"))
}

pub fn resolve_instance(name: &str) -> Result<Instance, InstanceError> {
    if name == "toy" {
        return Ok(Instance::Toy);
    }
    let direct = Path::new(name);
    let path = if direct.is_file() {
        direct.to_path_buf()
    } else {
        data_dir().join(format!("{name}.json"))
    };
    if !path.is_file() {
        return Err(InstanceError::Invalid {
            path: name.into(),
            message: format!("no such instance (looked for {})", path.display()),
        });
    }
    Ok(Instance::Pooling(load_instance(&path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub instance: String,
    pub method: Method,
    pub set: SetKind,
    pub size: f64,
    pub objective: Option<f64>,
    pub lb: Option<f64>,
    pub gap: Option<f64>,
    pub nodes_explored: usize,
    pub cut_rounds: usize,
    pub samples_added: usize,
    pub wall_ms: f64,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub variables: BTreeMap<String, f64>,
}

impl RunResult {
    pub fn exit_code(&self) -> i32 {
        match self.termination {
            Termination::Optimal => EXIT_OK,
            Termination::TimeLimit | Termination::NodeLimit => EXIT_LIMIT,
            Termination::RobustInfeasible => EXIT_INFEASIBLE,
        }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn named_point(problem: &QcqpProblem, point: Option<&[f64]>) -> BTreeMap<String, f64> {
    point
        .map(|p| {
            problem
                .names
                .iter()
                .zip(p)
                .map(|(n, &v)| (n.clone(), v))
                .collect()
        })
        .unwrap_or_default()
}

/// Run one method and return its summary and trace.
pub fn run(
    instance: &Instance,
    method: Method,
    set: &UncertaintySet,
    config: &SolveConfig,
) -> Result<(RunResult, ConvergenceTrace), SolveError> {
    let start = Instant::now();
    let base = RunResult {
        instance: instance.name(),
        method,
        set: set.kind,
        size: set.size,
        objective: None,
        lb: None,
        gap: None,
        nodes_explored: 0,
        cut_rounds: 0,
        samples_added: 0,
        wall_ms: 0.0,
        termination: Termination::Optimal,
        error: None,
        variables: BTreeMap::new(),
    };
    match method {
        Method::Rsbb | Method::Dual => {
            let (problem, solve_set) = if method == Method::Dual {
                (instance.dual_counterpart(set)?, UncertaintySet::nominal())
            } else {
                (instance.problem(), *set)
            };
            let sol = solve_rsbb(&problem, &solve_set, config)?;
            let mut variables = named_point(&problem, sol.point.as_deref());
            variables.retain(|k, _| !k.starts_with("rho_t["));
            let result = RunResult {
                objective: finite(sol.objective),
                lb: finite(sol.lb),
                gap: finite(sol.gap),
                nodes_explored: sol.nodes_explored,
                cut_rounds: sol.cut_rounds,
                samples_added: sol.samples_added,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                termination: sol.termination,
                variables,
                ..base
            };
            Ok((result, sol.trace))
        }
        Method::Cutting => {
            let problem = instance.problem();
            let res = match robust_cutting_set(&problem, set, config.delta, true, config) {
                Ok(r) => r,
                Err(SolveError::RobustInfeasible) => {
                    let result = RunResult {
                        termination: Termination::RobustInfeasible,
                        wall_ms: start.elapsed().as_secs_f64() * 1e3,
                        ..base
                    };
                    return Ok((result, ConvergenceTrace::default()));
                }
                Err(e) => return Err(e),
            };
            let mut trace = ConvergenceTrace::default();
            let t = start.elapsed().as_secs_f64() * 1e3;
            for r in &res.rounds {
                trace.push(t, TraceEvent::CutAdded, f64::INFINITY, r.objective_after.min(res.objective), None, Some(r.round));
            }
            trace.push(t, TraceEvent::IncumbentUpdated, res.objective, res.objective, None, None);
            let result = RunResult {
                objective: Some(res.objective),
                lb: Some(res.objective),
                gap: Some(0.0),
                nodes_explored: res.inner_nodes,
                cut_rounds: res.rounds.len(),
                samples_added: res.store.added(),
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                variables: named_point(&problem, Some(&res.point)),
                ..base
            };
            Ok((result, trace))
        }
    }
}

fn cell_stem(r: &RunResult) -> String {
    let method = match r.method {
        Method::Rsbb => "rsbb",
        Method::Cutting => "cutting",
        Method::Dual => "dual",
    };
    format!("{}_{}_{}_{}", r.instance, method, r.set, r.size)
}

fn write_outputs(out: &Path, result: &RunResult, trace: &ConvergenceTrace) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    let stem = cell_stem(result);
    let json = serde_json::to_string_pretty(result).map_err(std::io::Error::other)?;
    std::fs::write(out.join(format!("{stem}.json")), json + "\n")?;
    let file = std::fs::File::create(out.join(format!("{stem}.trace.csv")))?;
    trace.write_csv(file).map_err(std::io::Error::other)?;
    Ok(())
}

pub fn cmd_solve(args: &SolveArgs) -> i32 {
    let set = match UncertaintySet::new(args.set_kind, args.size) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let instance = match resolve_instance(&args.instance) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match run(&instance, args.method, &set, &args.solver.config()) {
        Ok((result, trace)) => {
            if let Err(e) = write_outputs(&args.solver.out, &result, &trace) {
                eprintln!("error: cannot write results: {e}");
                return EXIT_USAGE;
            }
            println!("{}", serde_json::to_string_pretty(&result).expect("serializable"));
            result.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                SolveError::RobustInfeasible => EXIT_INFEASIBLE,
                SolveError::CutRoundLimit(_) => EXIT_LIMIT,
                _ => EXIT_USAGE,
            }
        }
    }
}

/// One sweep cell; failures are kept as results with an error message.
fn sweep_cell(instance: &Instance, method: Method, set: UncertaintySet, config: &SolveConfig) -> (RunResult, ConvergenceTrace) {
    let start = Instant::now();
    match run(instance, method, &set, config) {
        Ok(r) => r,
        Err(e) => (
            RunResult {
                instance: instance.name(),
                method,
                set: set.kind,
                size: set.size,
                objective: None,
                lb: None,
                gap: None,
                nodes_explored: 0,
                cut_rounds: 0,
                samples_added: 0,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                termination: Termination::RobustInfeasible,
                error: Some(e.to_string()),
                variables: BTreeMap::new(),
            },
            ConvergenceTrace::default(),
        ),
    }
}

/// Run every cell, with up to `jobs` worker threads. Results keep cell order.
pub fn run_sweep(
    instances: &[Instance],
    method: Method,
    kinds: &[SetKind],
    sizes: &[f64],
    config: &SolveConfig,
    jobs: usize,
) -> Vec<(RunResult, ConvergenceTrace)> {
    let mut cells = Vec::new();
    for (ii, _) in instances.iter().enumerate() {
        for &kind in kinds {
            let mut all_sizes = vec![0.0];
            all_sizes.extend(sizes.iter().copied().filter(|&s| s != 0.0));
            for size in all_sizes {
                cells.push((ii, UncertaintySet { kind, size }));
            }
        }
    }
    let slots: Vec<Mutex<Option<(RunResult, ConvergenceTrace)>>> =
        cells.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(cells.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(ii, set)) = cells.get(k) else { break };
                let r = sweep_cell(&instances[ii], method, set, config);
                *slots[k].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every cell ran"))
        .collect()
}

/// Long-form CSV of every cell.
pub fn results_csv(results: &[RunResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance", "method", "set", "size", "objective", "lb", "gap", "nodes_explored",
        "cut_rounds", "samples_added", "wall_ms", "termination", "error",
    ])
    .expect("in-memory write");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in results {
        w.write_record([
            r.instance.clone(),
            format!("{:?}", r.method).to_lowercase(),
            r.set.to_string(),
            r.size.to_string(),
            opt(r.objective),
            opt(r.lb),
            opt(r.gap),
            r.nodes_explored.to_string(),
            r.cut_rounds.to_string(),
            r.samples_added.to_string(),
            format!("{:.3}", r.wall_ms),
            format!("{:?}", r.termination),
            r.error.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Wide tables: one row per instance, one column per (set, size). `value`
/// picks the cell entry given the cell and the instance's nominal result.
fn wide_table(
    results: &[RunResult],
    kinds: &[SetKind],
    sizes: &[f64],
    value: impl Fn(&RunResult, Option<&RunResult>) -> String,
) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["instance".to_string()];
    for k in kinds {
        for s in sizes {
            header.push(format!("{k}_{s}"));
        }
    }
    w.write_record(&header).expect("in-memory write");
    let mut names: Vec<&str> = Vec::new();
    for r in results {
        if !names.contains(&r.instance.as_str()) {
            names.push(&r.instance);
        }
    }
    for name in names {
        let mut row = vec![name.to_string()];
        for &k in kinds {
            let nominal = results
                .iter()
                .find(|r| r.instance == name && r.set == k && r.size == 0.0);
            for &s in sizes {
                let cell = results
                    .iter()
                    .find(|r| r.instance == name && r.set == k && r.size == s);
                row.push(cell.map(|c| value(c, nominal)).unwrap_or_default());
            }
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Nodes explored per cell.
pub fn nodes_table(results: &[RunResult], kinds: &[SetKind], sizes: &[f64]) -> String {
    wide_table(results, kinds, sizes, |c, _| {
        let mut s = c.nodes_explored.to_string();
        if c.termination != Termination::Optimal {
            s.push('*');
        }
        s
    })
}

/// Percentage objective increase over the nominal cell.
pub fn increase_table(results: &[RunResult], kinds: &[SetKind], sizes: &[f64]) -> String {
    wide_table(results, kinds, sizes, |c, nominal| {
        match (c.objective, nominal.and_then(|n| n.objective)) {
            (Some(v), Some(n)) if n != 0.0 => format!("{:.2}", objective_increase(n, v)),
            _ => String::new(),
        }
    })
}

/// `(robust - nominal) / |nominal| × 100`.
pub fn objective_increase(nominal: f64, robust: f64) -> f64 {
    (robust - nominal) / nominal.abs() * 100.0
}

pub fn cmd_sweep(args: &SweepArgs) -> i32 {
    let mut instances = Vec::new();
    for name in &args.instances {
        match resolve_instance(name) {
            Ok(i) => instances.push(i),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    if let Some(bad) = args.sizes.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        eprintln!("error: invalid size {bad}");
        return EXIT_USAGE;
    }
    let config = args.solver.config();
    let cells = run_sweep(&instances, args.method, &args.set_kinds, &args.sizes, &config, args.jobs);
    let out = &args.solver.out;
    let mut sizes = vec![0.0];
    sizes.extend(args.sizes.iter().copied().filter(|&s| s != 0.0));
    let write = || -> std::io::Result<()> {
        for (r, t) in &cells {
            write_outputs(out, r, t)?;
        }
        let results: Vec<RunResult> = cells.iter().map(|(r, _)| r.clone()).collect();
        std::fs::write(out.join("sweep.csv"), results_csv(&results))?;
        std::fs::write(out.join("nodes.csv"), nodes_table(&results, &args.set_kinds, &sizes))?;
        std::fs::write(
            out.join("objective_increase.csv"),
            increase_table(&results, &args.set_kinds, &sizes),
        )?;
        Ok(())
    };
    if let Err(e) = write() {
        eprintln!("error: cannot write results: {e}");
        return EXIT_USAGE;
    }
    for (r, _) in &cells {
        println!(
            "{:<10} {:<11} {:<5} {:>14} {:>6} nodes  {:?}{}",
            r.instance,
            r.set,
            r.size,
            r.objective.map_or("-".into(), |v| format!("{v:.4}")),
            r.nodes_explored,
            r.termination,
            r.error.as_deref().map_or(String::new(), |e| format!("  ({e})")),
        );
    }
    let failed = cells.iter().any(|(r, _)| r.error.is_some());
    if failed {
        EXIT_LIMIT
    } else {
        EXIT_OK
    }
}

/// Parse arguments and dispatch; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}
