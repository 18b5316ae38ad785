//! Benchmark driver: turns a parsed [`RunConfig`](crate::config::RunConfig)
//! into problems, schedules, runs, and CSV artifacts, and implements the
//! `run`/`sweep`/`check`/`spectrum` subcommands of the CLI.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algorithms::{
    derive_params, run, AdomParams, Algorithm, DiagnosticsMode, DiagnosticsSummary, RunError,
    RunSettings, Trace, TraceRow,
};
use crate::config::{
    AlgorithmKind, InnerKind, NetworkSection, OracleKind, OracleSection, RunConfig, Topology,
};
use crate::network::{
    geometric_graph, laplacian_gossip, load_temporal_edge_list, ring_graph, star_graph,
    complete_graph, NetworkError, NetworkSchedule, SpectralBounds,
};
use crate::oracle::{
    load_libsvm, synth_classification, InnerSolver, OracleError, OracleMode, Problem,
    QuadraticProblem,
};
use crate::stacked::{project, StackedVector};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace csv: {0}")]
    Csv(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("could not hit target chi {target}: best {achieved:.2} at radius {radius:.4}")]
    ChiTarget {
        target: f64,
        achieved: f64,
        radius: f64,
    },
}

// ---------------------------------------------------------------------------
// Problem and schedule construction

pub fn build_problem(cfg: &OracleSection) -> Result<Problem, BenchError> {
    if cfg.kind != OracleKind::LogisticLibsvm && cfg.target_kappa < 1.0 {
        return Err(BenchError::BadConfig(format!(
            "target_kappa must be >= 1, got {}",
            cfg.target_kappa
        )));
    }
    match cfg.kind {
        OracleKind::Quadratic => Ok(Problem::Quadratic(QuadraticProblem::random(
            cfg.n,
            cfg.d,
            cfg.mu,
            cfg.mu * cfg.target_kappa,
            cfg.seed,
        ))),
        OracleKind::LogisticSynthetic => Ok(Problem::Logistic(synth_classification(
            cfg.n,
            cfg.m,
            cfg.d,
            cfg.seed,
            cfg.target_kappa,
        ))),
        OracleKind::LogisticLibsvm => {
            let path = cfg.dataset.as_deref().expect("validated at parse time");
            let r = cfg.r.unwrap_or(1e-2);
            Ok(Problem::Logistic(load_libsvm(path, cfg.n, cfg.d, r)?))
        }
    }
}

/// Bisects the connection radius of a seeded random geometric graph until its
/// condition number chi = lambda_max / lambda_min_plus lands within 15% of
/// `target`. chi is a step function of the radius (edges appear discretely),
/// so bisection may stall between plateaus; in that case neighbouring seeds
/// are tried and the closest miss is reported as an error.
pub fn radius_for_chi(n: usize, target: f64, seed: u64) -> Result<(f64, f64), BenchError> {
    let mut best = (f64::NAN, f64::INFINITY);
    for attempt in 0..8u64 {
        let s = seed.wrapping_add(attempt);
        let measure = |r: f64| -> Result<f64, BenchError> {
            Ok(laplacian_gossip(&geometric_graph(n, r, s), 1)?
                .bounds()
                .chi())
        };
        let (mut lo, mut hi) = (0.0f64, 1.6f64);
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            let chi = measure(mid)?;
            if (chi - target).abs() < (best.1 - target).abs() {
                best = (mid, chi);
            }
            if (chi - target).abs() <= 0.15 * target {
                return Ok((mid, chi));
            }
            // chi shrinks as the graph gets denser
            if chi > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Err(BenchError::ChiTarget {
        target,
        achieved: best.1,
        radius: best.0,
    })
}

pub fn build_schedule(cfg: &NetworkSection, n: usize, d: usize) -> Result<NetworkSchedule, BenchError> {
    let radius = match cfg.target_chi {
        Some(target) => radius_for_chi(n, target, cfg.seed)?.0,
        None => cfg.radius,
    };
    match cfg.topology {
        Topology::Complete => Ok(NetworkSchedule::static_graph(laplacian_gossip(
            &complete_graph(n),
            d,
        )?)),
        Topology::Geometric => Ok(NetworkSchedule::static_graph(laplacian_gossip(
            &geometric_graph(n, radius, cfg.seed),
            d,
        )?)),
        Topology::RingStar => {
            let ring = laplacian_gossip(&ring_graph(n)?, d)?;
            let star = laplacian_gossip(&star_graph(n)?, d)?;
            Ok(NetworkSchedule::alternating(ring, star, cfg.switch_period))
        }
        Topology::CyclicGeometric => {
            let mut ops = Vec::with_capacity(cfg.num_graphs);
            for i in 0..cfg.num_graphs as u64 {
                let g = geometric_graph(n, radius, cfg.seed.wrapping_add(i));
                ops.push(laplacian_gossip(&g, d)?);
            }
            Ok(NetworkSchedule::cyclic(ops, cfg.switch_period))
        }
        Topology::File => {
            let path = cfg.file.as_deref().expect("validated at parse time");
            let graphs = load_temporal_edge_list(path)?;
            Ok(crate::network::schedule_from_graphs(&graphs, d)?)
        }
    }
}

fn oracle_mode(cfg: &RunConfig) -> OracleMode {
    match cfg.algorithm.inner {
        InnerKind::Exact => OracleMode::Exact,
        InnerKind::Gd => OracleMode::Inexact {
            inner: InnerSolver::Gd,
            t_inner: if cfg.algorithm.t_inner == 0 { 1 } else { cfg.algorithm.t_inner },
        },
        InnerKind::Agd => OracleMode::Inexact {
            inner: InnerSolver::Agd,
            t_inner: if cfg.algorithm.t_inner == 0 { 3 } else { cfg.algorithm.t_inner },
        },
    }
}

fn algorithm_of(kind: &AlgorithmKind) -> Algorithm {
    match kind {
        AlgorithmKind::Adom => Algorithm::Adom,
        AlgorithmKind::Pngd => Algorithm::Pngd,
        AlgorithmKind::Dgd => Algorithm::Dgd,
    }
}

pub fn algorithm_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Adom => "adom",
        Algorithm::Pngd => "pngd",
        Algorithm::Dgd => "dgd",
    }
}

/// Outcome of one configured run, with enough context to print or summarize.
pub struct Execution {
    pub trace: Trace,
    pub params: AdomParams,
    pub bounds: SpectralBounds,
    pub kappa: f64,
}

pub fn execute(cfg: &RunConfig) -> Result<Execution, BenchError> {
    let problem = build_problem(&cfg.oracle)?;
    let spec = problem.spec();
    let schedule = build_schedule(&cfg.network, spec.n, spec.d)?;
    let bounds = schedule.bounds();

    // The projected method ignores the gossip schedule: it averages exactly,
    // which is a projector with both extreme eigenvalues equal to one.
    let param_bounds = match cfg.algorithm.kind {
        AlgorithmKind::Pngd => SpectralBounds::new(1.0, 1.0),
        _ => bounds,
    };
    let mut params = derive_params(&spec, &param_bounds)?;
    if let Some(v) = cfg.algorithm.alpha {
        params.alpha = v;
    }
    if let Some(v) = cfg.algorithm.eta {
        params.eta = v;
    }
    if let Some(v) = cfg.algorithm.theta {
        params.theta = v;
    }
    if let Some(v) = cfg.algorithm.sigma {
        params.sigma = v;
    }
    if let Some(v) = cfg.algorithm.tau {
        params.tau = v;
    }

    let gamma = if cfg.algorithm.dgd_step > 0.0 {
        cfg.algorithm.dgd_step
    } else {
        1.0 / spec.l_smooth
    };
    let settings = RunSettings::new(cfg.run.iterations)
        .with_diagnostics(cfg.run.diagnostics)
        .with_dgd_step(gamma);
    let trace = run(
        algorithm_of(&cfg.algorithm.kind),
        &problem,
        &schedule,
        oracle_mode(cfg),
        &params,
        &settings,
    )?;
    Ok(Execution {
        trace,
        params,
        bounds,
        kappa: spec.kappa(),
    })
}

// ---------------------------------------------------------------------------
// CSV artifacts

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_trace_csv(trace: &Trace) -> String {
    let mut out = String::from("iter,comm_rounds,dist_sq,consensus_err,func_gap,lyapunov\n");
    for r in &trace.rows {
        let lyap = r.lyapunov.map(fmt_f64).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iter,
            r.comm_rounds,
            fmt_f64(r.dist_sq),
            fmt_f64(r.consensus_err),
            fmt_f64(r.func_gap),
            lyap
        ));
    }
    out
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>, BenchError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| BenchError::Csv("empty".into()))?;
    if header != "iter,comm_rounds,dist_sq,consensus_err,func_gap,lyapunov" {
        return Err(BenchError::Csv(format!("unexpected header `{header}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(BenchError::Csv(format!("line {}: expected 6 columns", i + 2)));
        }
        let field = |j: usize| -> Result<f64, BenchError> {
            cols[j]
                .parse()
                .map_err(|_| BenchError::Csv(format!("line {}: bad number `{}`", i + 2, cols[j])))
        };
        rows.push(TraceRow {
            iter: cols[0]
                .parse()
                .map_err(|_| BenchError::Csv(format!("line {}: bad iter", i + 2)))?,
            comm_rounds: cols[1]
                .parse()
                .map_err(|_| BenchError::Csv(format!("line {}: bad comm_rounds", i + 2)))?,
            dist_sq: field(2)?,
            consensus_err: field(3)?,
            func_gap: field(4)?,
            lyapunov: if cols[5].is_empty() { None } else { Some(field(5)?) },
        });
    }
    Ok(rows)
}

pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<(), BenchError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, format_trace_csv(trace))?;
    Ok(())
}

/// One row of a sweep summary: convergence cost of an algorithm at a grid
/// point. `iters_to_eps`/`comm_to_eps` are `None` when the threshold was not
/// reached (or the cell failed outright).
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub kappa: f64,
    pub chi: f64,
    pub algorithm: Algorithm,
    pub iters_to_eps: Option<usize>,
    pub comm_to_eps: Option<u64>,
    pub fitted_slope: Option<f64>,
    pub theory_slope: f64,
    pub error: Option<String>,
}

pub fn format_summary_csv(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("kappa,chi,algorithm,iters_to_1e-6,comm_to_1e-6,fitted_slope,theory_slope\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(r.kappa),
            fmt_f64(r.chi),
            algorithm_name(r.algorithm),
            r.iters_to_eps.map(|v| v.to_string()).unwrap_or_default(),
            r.comm_to_eps.map(|v| v.to_string()).unwrap_or_default(),
            r.fitted_slope.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.theory_slope),
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Subcommands

/// Applies command-line overrides onto a parsed config.
pub fn apply_overrides(cfg: &mut RunConfig, seed: Option<u64>, steps: Option<usize>) {
    if let Some(s) = seed {
        cfg.oracle.seed = s;
        cfg.network.seed = s;
    }
    if let Some(k) = steps {
        cfg.run.iterations = k;
    }
}

pub fn cli_run(cfg: &RunConfig, out_dir: Option<&Path>, quiet: bool) -> Result<Execution, BenchError> {
    let exec = execute(cfg)?;
    let trace_path: Option<PathBuf> = match (out_dir, &cfg.run.output) {
        (Some(dir), _) => Some(dir.join(format!("{}-trace.csv", cfg.name))),
        (None, Some(path)) => Some(path.clone()),
        (None, None) => None,
    };
    if let Some(path) = &trace_path {
        write_trace_csv(path, &exec.trace)?;
    }
    if !quiet {
        let last = exec.trace.rows.last().expect("run always records a row");
        let to = cfg.run.iterations;
        let from = (to / 10).max(1).min(to);
        let slope = exec.trace.fitted_slope(from, to);
        println!("run `{}`: {} iterations, kappa={:.4}, chi={:.4}", cfg.name, to, exec.kappa, exec.bounds.chi());
        println!("  final dist_sq     = {:.6e}", last.dist_sq);
        println!("  final func_gap    = {:.6e}", last.func_gap);
        println!("  final consensus   = {:.6e}", last.consensus_err);
        match slope {
            Some(s) => println!("  fitted slope      = {s:.6e} (theory {:.6e})", exec.trace.theory_slope),
            None => println!("  fitted slope      = n/a (theory {:.6e})", exec.trace.theory_slope),
        }
        if let Some(d) = &exec.trace.diagnostics {
            println!(
                "  worst slacks: descent {:.2e}, error-feedback {:.2e}, contraction {:.2e}",
                d.worst_descent, d.worst_error_feedback, d.worst_contraction
            );
        }
        if let Some(path) = &trace_path {
            println!("  trace written to {}", path.display());
        }
    }
    Ok(exec)
}

/// Runs the grid: the cartesian product of `grid.kappa` and `grid.chi`
/// (falling back to the base config's values when a list is empty). A failed
/// cell is recorded with its error and the sweep continues.
pub fn cli_sweep(cfg: &RunConfig, out_dir: Option<&Path>, quiet: bool) -> Result<Vec<SweepRow>, BenchError> {
    let kappas = match cfg.grid.as_ref().map(|g| g.kappa.clone()) {
        Some(v) if !v.is_empty() => v,
        _ => vec![cfg.oracle.target_kappa],
    };
    let chis = match cfg.grid.as_ref().map(|g| g.chi.clone()) {
        Some(v) if !v.is_empty() => v,
        _ => vec![f64::NAN],
    };
    let mut rows = Vec::new();
    for &kappa in &kappas {
        for &chi in &chis {
            let mut cell = cfg.clone();
            cell.oracle.target_kappa = kappa;
            if chi.is_finite() {
                cell.network.topology = Topology::Geometric;
                cell.network.target_chi = Some(chi);
            }
            let algorithm = algorithm_of(&cell.algorithm.kind);
            let row = match execute(&cell) {
                Ok(exec) => {
                    let reached = exec.trace.iters_to(cfg.run.eps);
                    let to = cell.run.iterations;
                    let from = (to / 10).max(1).min(to);
                    SweepRow {
                        kappa: exec.kappa,
                        chi: exec.bounds.chi(),
                        algorithm,
                        iters_to_eps: reached.map(|(i, _)| i),
                        comm_to_eps: reached.map(|(_, c)| c),
                        fitted_slope: exec.trace.fitted_slope(from, to),
                        theory_slope: exec.trace.theory_slope,
                        error: None,
                    }
                }
                Err(err) => SweepRow {
                    kappa,
                    chi,
                    algorithm,
                    iters_to_eps: None,
                    comm_to_eps: None,
                    fitted_slope: None,
                    theory_slope: f64::NAN,
                    error: Some(err.to_string()),
                },
            };
            if !quiet {
                match &row.error {
                    None => println!(
                        "sweep kappa={kappa:.1} chi={:.2}: iters_to_eps={:?} comm={:?} slope={:?}",
                        row.chi, row.iters_to_eps, row.comm_to_eps, row.fitted_slope
                    ),
                    Some(e) => eprintln!("sweep kappa={kappa:.1} chi={chi:.1}: FAILED: {e}"),
                }
            }
            rows.push(row);
        }
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}-summary.csv", cfg.name));
        std::fs::write(&path, format_summary_csv(&rows))?;
        if !quiet {
            println!("summary written to {}", path.display());
        }
    }
    Ok(rows)
}

/// Aggregate outcome of the self-check suite.
#[derive(Debug)]
pub struct CheckReport {
    pub instances: usize,
    pub failures: Vec<(usize, String)>,
    pub worst: DiagnosticsSummary,
    pub compression_worst: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.compression_worst <= 1e-10
    }

    pub fn print(&self, quiet: bool) {
        if quiet && self.passed() {
            return;
        }
        println!(
            "check: {}/{} instances clean",
            self.instances - self.failures.len(),
            self.instances
        );
        println!(
            "  worst slacks: descent {:.2e}, error-feedback {:.2e}, contraction {:.2e}, ghost {:.2e}, drift {:.2e}",
            self.worst.worst_descent,
            self.worst.worst_error_feedback,
            self.worst.worst_contraction,
            self.worst.worst_ghost_residual,
            self.worst.worst_subspace_drift
        );
        println!("  gossip compression worst relative slack: {:.2e}", self.compression_worst);
        for (i, err) in &self.failures {
            println!("  instance {i}: {err}");
        }
    }
}

/// Worst relative slack of the single-round compression inequality
/// |sigma W z - z|^2 <= (1 - sigma lambda_min_plus) |z|^2 over random
/// consensus-orthogonal inputs, graphs, and admissible sigma.
pub fn compression_worst_slack(samples: usize, seed: u64) -> Result<f64, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let n = rng.gen_range(2..=12);
        let d = rng.gen_range(1..=4);
        let radius = rng.gen_range(0.0..1.2);
        let g = geometric_graph(n, radius, rng.gen());
        let w = laplacian_gossip(&g, d)?;
        let bounds = w.bounds();
        let sigma = rng.gen_range(0.0..1.0) / bounds.lambda_max;
        let flat: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z = project(&StackedVector::from_flat(n, d, flat));
        let wz = w.apply(&z).expect("shapes agree");
        let lhs = z.axpy(-sigma, &wz).norm_sq(); // |z - sigma W z|^2
        let rhs = (1.0 - sigma * bounds.lambda_min_plus) * z.norm_sq();
        let slack = (lhs - rhs) / z.norm_sq().max(1e-300);
        worst = worst.max(slack);
    }
    Ok(worst)
}

/// Runs `instances` random small quadratic instances with inequality enforcement
/// on, plus a randomized compression-inequality harness. `theta_scale != 1`
/// deliberately breaks the dual step size so the checks must fire; it exists
/// as a negative control for the checker itself.
pub fn cli_check(
    instances: usize,
    steps: usize,
    seed: u64,
    theta_scale: f64,
    quiet: bool,
) -> Result<CheckReport, BenchError> {
    let mut failures = Vec::new();
    let mut worst = DiagnosticsSummary::default();
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let n = rng.gen_range(2..=20);
        let d = rng.gen_range(1..=5);
        let mu = rng.gen_range(0.5..2.0);
        let kappa = 10f64.powf(rng.gen_range(0.0..2.0));
        let problem = Problem::Quadratic(QuadraticProblem::random(n, d, mu, mu * kappa, rng.gen()));
        let radius = rng.gen_range(0.2..1.0);
        let schedule = if rng.gen_bool(0.5) {
            NetworkSchedule::static_graph(laplacian_gossip(&geometric_graph(n, radius, rng.gen()), d)?)
        } else {
            let a = laplacian_gossip(&geometric_graph(n, radius, rng.gen()), d)?;
            let b = laplacian_gossip(&geometric_graph(n, radius, rng.gen()), d)?;
            NetworkSchedule::alternating(a, b, rng.gen_range(1..=5))
        };
        let mut params = derive_params(&problem.spec(), &schedule.bounds())?;
        params.theta *= theta_scale;
        let settings = RunSettings::new(steps).with_diagnostics(DiagnosticsMode::Enforce);
        match run(Algorithm::Adom, &problem, &schedule, OracleMode::Exact, &params, &settings) {
            Ok(trace) => {
                if let Some(d) = trace.diagnostics {
                    worst.worst_descent = worst.worst_descent.max(d.worst_descent);
                    worst.worst_error_feedback =
                        worst.worst_error_feedback.max(d.worst_error_feedback);
                    worst.worst_contraction = worst.worst_contraction.max(d.worst_contraction);
                    worst.worst_ghost_residual =
                        worst.worst_ghost_residual.max(d.worst_ghost_residual);
                    worst.worst_subspace_drift =
                        worst.worst_subspace_drift.max(d.worst_subspace_drift);
                }
            }
            Err(err) => failures.push((i, err.to_string())),
        }
    }
    let compression_worst = compression_worst_slack(1000, seed ^ 0xc0ffee)?;
    let report = CheckReport {
        instances,
        failures,
        worst,
        compression_worst,
    };
    report.print(quiet);
    Ok(report)
}

/// Prints the spectral summary of the configured network: per-slot bounds and
/// the schedule-wide conservative envelope.
pub fn cli_spectrum(cfg: &RunConfig, quiet: bool) -> Result<SpectralBounds, BenchError> {
    let schedule = build_schedule(&cfg.network, cfg.oracle.n, 1)?;
    let bounds = schedule.bounds();
    if !quiet {
        let mut out = std::io::stdout().lock();
        for (i, op) in schedule.operators().iter().enumerate() {
            let b = op.bounds();
            writeln!(
                out,
                "graph {i}: lambda_max = {:.12}, lambda_min_plus = {:.12}, chi = {:.6}",
                b.lambda_max,
                b.lambda_min_plus,
                b.chi()
            )?;
        }
        writeln!(
            out,
            "schedule: lambda_max = {:.12}, lambda_min_plus = {:.12}, chi = {:.6}",
            bounds.lambda_max,
            bounds.lambda_min_plus,
            bounds.chi()
        )?;
    }
    Ok(bounds)
}
