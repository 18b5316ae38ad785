//! Optimization loops and per-iteration diagnostics.
//!
//! The main loop tracks the dual iterates (z, z_f) in the zero-sum subspace
//! plus the error-feedback memory m, and can assert the descent,
//! error-feedback and Lyapunov-contraction inequalities at every step when
//! run with an exact oracle on a quadratic instance.

use thiserror::Error;

use crate::network::{GossipOperator, NetworkError, NetworkSchedule, SpectralBounds};
use crate::oracle::{DualOracle, OracleError, OracleMode, OracleSpec, Problem};
use crate::stacked::{p_seminorm_sq, project, ShapeError, StackedVector};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("non-positive modulus or spectral bound: {0}")]
    BadParameter(&'static str),
    #[error("{inequality} violated at step {step}: slack {slack:.3e}")]
    DiagnosticViolation {
        step: usize,
        inequality: &'static str,
        slack: f64,
    },
    #[error("non-finite metric at step {0}")]
    NonFinite(usize),
}

/// Step sizes and momentum of the accelerated dual loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdomParams {
    pub alpha: f64,
    pub eta: f64,
    pub theta: f64,
    pub sigma: f64,
    pub tau: f64,
}

impl AdomParams {
    /// Geometric contraction factor of the Lyapunov function under the
    /// derived parameters: 1 - (lambda_min+/(7 lambda_max)) sqrt(mu/L).
    pub fn contraction_factor(&self) -> f64 {
        1.0 - self.tau
    }
}

/// The five parameter formulas of the convergence theorem.
pub fn derive_params(spec: &OracleSpec, bounds: &SpectralBounds) -> Result<AdomParams, RunError> {
    if !(spec.mu > 0.0 && spec.l_smooth >= spec.mu) {
        return Err(RunError::BadParameter("need 0 < mu <= L"));
    }
    if !(bounds.lambda_min_plus > 0.0 && bounds.lambda_max >= bounds.lambda_min_plus) {
        return Err(RunError::BadParameter("need 0 < lambda_min_plus <= lambda_max"));
    }
    let (mu, l) = (spec.mu, spec.l_smooth);
    let (lmax, lmin) = (bounds.lambda_max, bounds.lambda_min_plus);
    Ok(AdomParams {
        alpha: 1.0 / (2.0 * l),
        eta: 2.0 * lmin * (mu * l).sqrt() / (7.0 * lmax),
        theta: mu / lmax,
        sigma: 1.0 / lmax,
        tau: lmin / (7.0 * lmax) * (mu / l).sqrt(),
    })
}

/// Dual iterates of the accelerated loop. z and z_f stay in the zero-sum
/// subspace; m is unrestricted.
#[derive(Debug, Clone)]
pub struct AdomState {
    pub z: StackedVector,
    pub z_f: StackedVector,
    pub m: StackedVector,
    pub k: usize,
}

impl AdomState {
    /// z0 = 0, m0 = 0, z_f0 = z0.
    pub fn zeros(n: usize, d: usize) -> Self {
        let z = StackedVector::zeros(n, d);
        Self {
            z_f: z.clone(),
            m: z.clone(),
            z,
            k: 0,
        }
    }

    pub fn from_initial(z0: StackedVector, m0: StackedVector) -> Self {
        Self {
            z_f: z0.clone(),
            z: z0,
            m: m0,
            k: 0,
        }
    }

    pub fn momentum_point(&self, params: &AdomParams) -> StackedVector {
        self.z.scale(params.tau).axpy(1.0 - params.tau, &self.z_f)
    }

    /// Uncompressed virtual iterate z + P m used by the error-feedback
    /// analysis.
    pub fn ghost(&self) -> StackedVector {
        self.z.add(&project(&self.m))
    }
}

/// Quantities produced inside one step that the trace and the diagnostics
/// both consume.
pub struct StepRecord {
    pub z_g: StackedVector,
    pub grad: StackedVector,
}

/// One iteration of the accelerated loop: two gossip rounds, one dual
/// gradient.
pub fn adom_step(
    state: &AdomState,
    params: &AdomParams,
    w_k: &GossipOperator,
    oracle: &mut DualOracle,
) -> Result<(AdomState, StepRecord), RunError> {
    let z_g = state.momentum_point(params);
    let grad = oracle.dual_gradient(&z_g)?;
    let next = adom_advance(state, params, w_k, &z_g, &grad)?;
    Ok((next, StepRecord { z_g, grad }))
}

/// The post-gradient part of one accelerated step (lines after the dual
/// oracle call): the error-feedback update and both gossip rounds.
fn adom_advance(
    state: &AdomState,
    params: &AdomParams,
    w_k: &GossipOperator,
    z_g: &StackedVector,
    grad: &StackedVector,
) -> Result<AdomState, RunError> {
    let m_shift = state.m.axpy(-params.eta, grad);
    let delta = w_k.apply(&m_shift)?.scale(params.sigma);
    let m = m_shift.sub(&delta);
    let z = state
        .z
        .axpy(params.eta * params.alpha, &z_g.sub(&state.z))
        .add(&delta);
    let z_f = z_g.axpy(-params.theta, &w_k.apply(grad)?);
    Ok(AdomState {
        z,
        z_f,
        m,
        k: state.k + 1,
    })
}

/// Dual iterates of the projected Nesterov loop (no memory vector).
#[derive(Debug, Clone)]
pub struct PngdState {
    pub z: StackedVector,
    pub z_f: StackedVector,
    pub k: usize,
}

impl PngdState {
    pub fn zeros(n: usize, d: usize) -> Self {
        let z = StackedVector::zeros(n, d);
        Self {
            z_f: z.clone(),
            z,
            k: 0,
        }
    }
}

/// One iteration of projected Nesterov descent. Uses full averaging (the
/// projector), so it costs no decentralized communication rounds but is not
/// implementable over a network.
pub fn pngd_step(
    state: &PngdState,
    params: &AdomParams,
    oracle: &mut DualOracle,
) -> Result<(PngdState, StepRecord), RunError> {
    let z_g = state.z.scale(params.tau).axpy(1.0 - params.tau, &state.z_f);
    let grad = oracle.dual_gradient(&z_g)?;
    let pg = project(&grad);
    let z = state
        .z
        .axpy(params.eta * params.alpha, &z_g.sub(&state.z))
        .axpy(-params.eta, &pg);
    let z_f = z_g.axpy(-params.theta, &pg);
    Ok((
        PngdState {
            z,
            z_f,
            k: state.k + 1,
        },
        StepRecord { z_g, grad },
    ))
}

/// Primal decentralized gradient baseline:
/// x <- x - W(k) x - gamma grad F(x). One gradient, one gossip round.
pub fn decentralized_gd_step(
    x: &StackedVector,
    step_size: f64,
    w_k: &GossipOperator,
    problem: &Problem,
) -> Result<StackedVector, RunError> {
    let grad = problem.lifted_gradient(x)?;
    let mixed = x.sub(&w_k.apply(x)?);
    Ok(mixed.axpy(-step_size, &grad))
}

/// LHS - RHS of the descent inequality
/// F*(z_f^{k+1}) <= F*(z_g^k) - (theta lambda_min+/2) |grad F*(z_g^k)|_P^2.
pub fn check_descent(
    z_g: &StackedVector,
    z_f_next: &StackedVector,
    grad: &StackedVector,
    params: &AdomParams,
    bounds: &SpectralBounds,
    oracle: &DualOracle,
) -> Result<f64, RunError> {
    let lhs = oracle.dual_value(z_f_next)?;
    let rhs = oracle.dual_value(z_g)?
        - 0.5 * params.theta * bounds.lambda_min_plus * p_seminorm_sq(grad);
    Ok(lhs - rhs)
}

/// LHS - RHS of the error-feedback bound
/// |m^{k+1}|_P^2 <= (1 - sigma lambda_min+/2)|m^k|_P^2
///                + (2 eta^2/(sigma lambda_min+)) |grad F*(z_g^k)|_P^2.
pub fn check_error_feedback(
    m_before: &StackedVector,
    m_after: &StackedVector,
    grad: &StackedVector,
    params: &AdomParams,
    bounds: &SpectralBounds,
) -> f64 {
    let sl = params.sigma * bounds.lambda_min_plus;
    let rhs = (1.0 - 0.5 * sl) * p_seminorm_sq(m_before)
        + 2.0 * params.eta * params.eta / sl * p_seminorm_sq(grad);
    p_seminorm_sq(m_after) - rhs
}

/// Psi^k = |zhat - z*|^2 + (2 eta (1 - eta alpha)/tau)(F*(z_f) - F*(z*))
///       + 6 |m|_P^2. Quadratic problems with known z* only.
pub fn lyapunov(
    state: &AdomState,
    params: &AdomParams,
    oracle: &DualOracle,
    z_star: &StackedVector,
) -> Result<f64, RunError> {
    let ghost = state.ghost();
    let gap = oracle.dual_value(&state.z_f)? - oracle.dual_value(z_star)?;
    let coeff = 2.0 * params.eta * (1.0 - params.eta * params.alpha) / params.tau;
    Ok(ghost.sub(z_star).norm_sq() + coeff * gap + 6.0 * p_seminorm_sq(&state.m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Adom,
    Pngd,
    Dgd,
}

impl Algorithm {
    /// Decentralized communication rounds per iteration. PNGD's full
    /// averaging is not a decentralized round and counts zero.
    pub fn comm_per_iter(&self) -> u64 {
        match self {
            Algorithm::Adom => 2,
            Algorithm::Pngd => 0,
            Algorithm::Dgd => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticsMode {
    /// No inequality checks.
    Off,
    /// Record worst slacks without failing; the only sound choice with
    /// inexact oracles.
    Observe,
    /// Fail the run on the first violated inequality.
    Enforce,
}

/// Per-iteration metric row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub comm_rounds: u64,
    pub dist_sq: f64,
    pub consensus_err: f64,
    pub func_gap: f64,
    pub lyapunov: Option<f64>,
}

/// Worst observed slack per inequality over a run. Slacks are LHS - RHS, so
/// negative values mean the inequality held with margin.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiagnosticsSummary {
    pub worst_descent: f64,
    pub worst_error_feedback: f64,
    /// Psi^{k+1} - (1 - tau) Psi^k, relative to Psi^k.
    pub worst_contraction: f64,
    pub worst_ghost_residual: f64,
    pub worst_subspace_drift: f64,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub rows: Vec<TraceRow>,
    /// ln of the proven per-step contraction factor, for slope comparison.
    pub theory_slope: f64,
    pub diagnostics: Option<DiagnosticsSummary>,
}

impl Trace {
    /// OLS slope of ln(dist_sq) over iterations in [from, to], skipping
    /// non-positive values.
    pub fn fitted_slope(&self, from: usize, to: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.iter >= from && r.iter <= to && r.dist_sq > 0.0)
            .map(|r| (r.iter as f64, r.dist_sq.ln()))
            .collect();
        ols_slope(&pts)
    }

    /// First iteration (and its communication count) at which dist_sq drops
    /// to `eps` or below.
    pub fn iters_to(&self, eps: f64) -> Option<(usize, u64)> {
        self.rows
            .iter()
            .find(|r| r.dist_sq <= eps)
            .map(|r| (r.iter, r.comm_rounds))
    }

    /// Best-so-far minimum of dist_sq up to each communication budget.
    pub fn best_within_comm(&self, comm_budget: u64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.comm_rounds <= comm_budget)
            .map(|r| r.dist_sq)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }
}

pub fn ols_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub struct RunSettings {
    pub iters: usize,
    pub diagnostics: DiagnosticsMode,
    /// Step size for the DGD baseline; ignored by the dual methods.
    pub dgd_step_size: f64,
}

impl RunSettings {
    pub fn new(iters: usize) -> Self {
        Self {
            iters,
            diagnostics: DiagnosticsMode::Off,
            dgd_step_size: 0.0,
        }
    }

    pub fn with_diagnostics(mut self, mode: DiagnosticsMode) -> Self {
        self.diagnostics = mode;
        self
    }

    pub fn with_dgd_step(mut self, gamma: f64) -> Self {
        self.dgd_step_size = gamma;
        self
    }
}

const DESCENT_TOL: f64 = 1e-9;
const ERROR_FEEDBACK_TOL: f64 = 1e-9;
const CONTRACTION_TOL: f64 = 1e-9;

/// Executes `iters` steps and records one metric row per step, including the
/// initial one. The traced distance is |grad F*(z_g^k) - x*|^2 with x*
/// replicated across blocks (its inexact surrogate when the oracle is
/// inexact), plus consensus error and function gap at the block average.
pub fn run(
    algorithm: Algorithm,
    problem: &Problem,
    schedule: &NetworkSchedule,
    oracle_mode: OracleMode,
    params: &AdomParams,
    settings: &RunSettings,
) -> Result<Trace, RunError> {
    let spec = problem.spec();
    let (n, d) = (spec.n, spec.d);
    let bounds = schedule.bounds();
    let x_star = problem.reference_minimizer(1e-12, 5_000_000);
    let x_star_repl = StackedVector::replicate(n, &x_star);
    let f_star = problem.lifted_value(&x_star_repl)?;
    let quad = problem.as_quadratic();
    let z_star = quad.map(|q| q.z_star());
    let theory_slope = match algorithm {
        Algorithm::Dgd => f64::NEG_INFINITY,
        _ => params.contraction_factor().ln(),
    };

    let mut rows = Vec::with_capacity(settings.iters + 1);
    let mut diag = DiagnosticsSummary::default();
    let diag_active = settings.diagnostics != DiagnosticsMode::Off
        && matches!(oracle_mode, OracleMode::Exact)
        && z_star.is_some();
    let enforce = settings.diagnostics == DiagnosticsMode::Enforce && diag_active;

    let record = |rows: &mut Vec<TraceRow>,
                      iter: usize,
                      comm: u64,
                      point: &StackedVector,
                      psi: Option<f64>|
     -> Result<(), RunError> {
        let dist_sq = point.sub(&x_star_repl).norm_sq();
        let consensus_err = p_seminorm_sq(point);
        let mean = point.block_mean();
        let func_gap = problem.lifted_value(&StackedVector::replicate(n, &mean))? - f_star;
        let row = TraceRow {
            iter,
            comm_rounds: comm,
            dist_sq,
            consensus_err,
            func_gap,
            lyapunov: psi,
        };
        if !(dist_sq.is_finite() && consensus_err.is_finite() && func_gap.is_finite()) {
            return Err(RunError::NonFinite(iter));
        }
        rows.push(row);
        Ok(())
    };

    match algorithm {
        Algorithm::Adom => {
            let mut oracle = DualOracle::new(problem, oracle_mode)?;
            let mut state = AdomState::zeros(n, d);
            let mut psi_prev: Option<f64> = None;
            // The potential is assembled from differences of O(1) dual values
            // weighted by 2*eta*(1-eta*alpha)/tau, so its absolute roundoff
            // floor is eps times that scale. A relative contraction claim at
            // CONTRACTION_TOL is only decidable while the potential exceeds
            // floor/CONTRACTION_TOL; past that point the trajectory has
            // converged beyond what f64 can certify and the check is skipped.
            let mut psi_check_floor = f64::INFINITY;
            for k in 0..=settings.iters {
                let w_k = schedule.at(k)?;
                let psi = match (&z_star, diag_active || quad.is_some()) {
                    (Some(zs), true) if matches!(oracle_mode, OracleMode::Exact) => {
                        Some(lyapunov(&state, params, &oracle, zs)?)
                    }
                    _ => None,
                };
                if diag_active {
                    if let (Some(psi0), Some(zs), true) =
                        (psi, &z_star, psi_check_floor.is_infinite())
                    {
                        let weight = 2.0 * params.eta * (1.0 - params.eta * params.alpha)
                            / params.tau;
                        let scale =
                            1.0 + psi0 + weight * (1.0 + oracle.dual_value(zs)?.abs());
                        psi_check_floor = f64::EPSILON * scale / CONTRACTION_TOL;
                    }
                    if let (Some(p_now), Some(p_prev)) = (psi, psi_prev) {
                        let excess = if p_prev > psi_check_floor {
                            (p_now - params.contraction_factor() * p_prev) / p_prev
                        } else {
                            0.0
                        };
                        diag.worst_contraction = diag.worst_contraction.max(excess);
                        if enforce && excess > CONTRACTION_TOL {
                            return Err(RunError::DiagnosticViolation {
                                step: k,
                                inequality: "potential contraction",
                                slack: excess,
                            });
                        }
                    }
                    let drift = state.z.sub(&project(&state.z)).norm()
                        / (1.0 + state.z.norm());
                    diag.worst_subspace_drift = diag.worst_subspace_drift.max(drift);
                    if enforce && drift > 1e-8 {
                        return Err(RunError::DiagnosticViolation {
                            step: k,
                            inequality: "subspace preservation",
                            slack: drift,
                        });
                    }
                }
                psi_prev = psi;
                let z_g = state.momentum_point(params);
                let grad = oracle.dual_gradient(&z_g)?;
                record(&mut rows, k, 2 * k as u64, &grad, psi)?;
                if k == settings.iters {
                    break;
                }
                let next = adom_advance(&state, params, w_k, &z_g, &grad)?;
                let rec = StepRecord { z_g, grad };
                if diag_active {
                    let slack = check_descent(
                        &rec.z_g, &next.z_f, &rec.grad, params, &bounds, &oracle,
                    )?;
                    let dscale = DESCENT_TOL * oracle.dual_value(&rec.z_g)?.abs().max(1.0);
                    diag.worst_descent = diag.worst_descent.max(slack);
                    if enforce && slack > dscale {
                        return Err(RunError::DiagnosticViolation {
                            step: k,
                            inequality: "dual descent",
                            slack,
                        });
                    }
                    let ef = check_error_feedback(&state.m, &next.m, &rec.grad, params, &bounds);
                    let escale = ERROR_FEEDBACK_TOL
                        * (1.0 + p_seminorm_sq(&state.m) + p_seminorm_sq(&rec.grad));
                    diag.worst_error_feedback = diag.worst_error_feedback.max(ef);
                    if enforce && ef > escale {
                        return Err(RunError::DiagnosticViolation {
                            step: k,
                            inequality: "error-feedback decay",
                            slack: ef,
                        });
                    }
                    // ghost recursion: zhat^{k+1} = zhat^k + eta alpha (z_g - z) - eta P grad
                    let want = state
                        .ghost()
                        .axpy(params.eta * params.alpha, &rec.z_g.sub(&state.z))
                        .axpy(-params.eta, &project(&rec.grad));
                    let resid =
                        next.ghost().sub(&want).norm() / (1.0 + state.ghost().norm());
                    diag.worst_ghost_residual = diag.worst_ghost_residual.max(resid);
                    if enforce && resid > 1e-10 {
                        return Err(RunError::DiagnosticViolation {
                            step: k,
                            inequality: "ghost recursion",
                            slack: resid,
                        });
                    }
                }
                state = next;
            }
        }
        Algorithm::Pngd => {
            let mut oracle = DualOracle::new(problem, oracle_mode)?;
            let mut state = PngdState::zeros(n, d);
            for k in 0..=settings.iters {
                let (next, rec) = pngd_step(&state, params, &mut oracle)?;
                record(&mut rows, k, 0, &rec.grad, None)?;
                if k == settings.iters {
                    break;
                }
                state = next;
            }
        }
        Algorithm::Dgd => {
            let mut x = StackedVector::zeros(n, d);
            for k in 0..=settings.iters {
                record(&mut rows, k, algorithm.comm_per_iter() * k as u64, &x, None)?;
                if k == settings.iters {
                    break;
                }
                let w_k = schedule.at(k)?;
                x = decentralized_gd_step(&x, settings.dgd_step_size, w_k, problem)?;
            }
        }
    }

    Ok(Trace {
        algorithm,
        rows,
        theory_slope,
        diagnostics: diag_active.then_some(diag),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{
        complete_graph, geometric_graph, laplacian_gossip, GossipOperator, NetworkSchedule,
    };
    use crate::oracle::{InnerSolver, QuadraticProblem};

    fn identity_problem(n: usize, d: usize) -> Problem {
        Problem::Quadratic(QuadraticProblem::identity(n, d))
    }

    #[test]
    fn derive_params_degenerate_case() {
        let spec = OracleSpec {
            mu: 1.0,
            l_smooth: 1.0,
            n: 2,
            d: 1,
        };
        let bounds = SpectralBounds::new(1.0, 1.0);
        let p = derive_params(&spec, &bounds).unwrap();
        assert_eq!(p.alpha, 0.5);
        assert!((p.eta - 2.0 / 7.0).abs() <= 1e-15);
        assert_eq!(p.theta, 1.0);
        assert_eq!(p.sigma, 1.0);
        assert!((p.tau - 1.0 / 7.0).abs() <= 1e-15);
    }

    #[test]
    fn derive_params_kappa_100() {
        let spec = OracleSpec {
            mu: 1.0,
            l_smooth: 100.0,
            n: 2,
            d: 1,
        };
        let bounds = SpectralBounds::new(1.0, 1.0);
        let p = derive_params(&spec, &bounds).unwrap();
        assert!((p.tau - 1.0 / 70.0).abs() <= 1e-15);
        assert!((p.contraction_factor() - (1.0 - 1.0 / 70.0)).abs() <= 1e-15);
    }

    #[test]
    fn derive_params_saturates_preconditions() {
        let spec = OracleSpec {
            mu: 0.3,
            l_smooth: 7.0,
            n: 4,
            d: 2,
        };
        let bounds = SpectralBounds::new(1.0, 0.2);
        let p = derive_params(&spec, &bounds).unwrap();
        assert!((p.theta - spec.mu / bounds.lambda_max).abs() <= 1e-15);
        assert!((p.sigma - 1.0 / bounds.lambda_max).abs() <= 1e-15);
    }

    #[test]
    fn derive_params_rejects_bad_inputs() {
        let bounds = SpectralBounds::new(1.0, 0.5);
        let bad = OracleSpec {
            mu: 0.0,
            l_smooth: 1.0,
            n: 1,
            d: 1,
        };
        assert!(derive_params(&bad, &bounds).is_err());
    }

    /// The spec's scalar hand trace on two nodes: one step from z0=(1,-1).
    #[test]
    fn hand_trace_one_step() {
        let problem = identity_problem(2, 1);
        let base = vec![1.0, -1.0, -1.0, 1.0]; // unnormalized path Laplacian
        let w = GossipOperator::from_base(2, 1, base, SpectralBounds::new(2.0, 2.0));
        let spec = problem.spec();
        let params = derive_params(&spec, &w.bounds()).unwrap();
        assert_eq!(params.alpha, 0.5);
        assert!((params.eta - 2.0 / 7.0).abs() <= 1e-15);
        assert_eq!(params.theta, 0.5);
        assert_eq!(params.sigma, 0.5);
        assert!((params.tau - 1.0 / 7.0).abs() <= 1e-15);

        let z0 = StackedVector::from_blocks(&[vec![1.0], vec![-1.0]]);
        let state = AdomState::from_initial(z0, StackedVector::zeros(2, 1));
        let mut oracle = DualOracle::exact(&problem).unwrap();
        let (next, _) = adom_step(&state, &params, &w, &mut oracle).unwrap();
        assert!(next.m.norm() <= 1e-15);
        assert!((next.z.block(0)[0] - 5.0 / 7.0).abs() <= 1e-14);
        assert!((next.z.block(1)[0] + 5.0 / 7.0).abs() <= 1e-14);
        assert!(next.z_f.norm() <= 1e-14);

        // Lyapunov on the traced iterates contracts by at least 6/7
        let z_star = StackedVector::zeros(2, 1);
        let psi0 = lyapunov(&state, &params, &oracle, &z_star).unwrap();
        let psi1 = lyapunov(&next, &params, &oracle, &z_star).unwrap();
        assert!((psi0 - 38.0 / 7.0).abs() <= 1e-12);
        assert!(psi1 <= (6.0 / 7.0) * psi0 + 1e-12);
    }

    #[test]
    fn stationary_at_optimum() {
        let q = QuadraticProblem::random(3, 2, 0.5, 3.0, 5);
        let z_star = q.z_star();
        let problem = Problem::Quadratic(q);
        let w = laplacian_gossip(&complete_graph(3), 2).unwrap();
        let params = derive_params(&problem.spec(), &w.bounds()).unwrap();
        let state = AdomState::from_initial(z_star.clone(), StackedVector::zeros(3, 2));
        let mut oracle = DualOracle::exact(&problem).unwrap();
        let mut s = state;
        for _ in 0..50 {
            let (next, rec) = adom_step(&s, &params, &w, &mut oracle).unwrap();
            assert!(p_seminorm_sq(&rec.grad) <= 1e-18);
            s = next;
        }
        assert!(s.z.sub(&z_star).norm() <= 1e-9);
        // The potential is a difference of O(1) dual values, so its floor at
        // the optimum is roundoff, not zero.
        let psi = lyapunov(&s, &params, &oracle, &z_star).unwrap();
        assert!(psi.abs() <= 1e-12, "psi = {psi:e}");
    }

    #[test]
    fn pngd_stationary_at_optimum() {
        let q = QuadraticProblem::random(3, 2, 0.5, 3.0, 6);
        let z_star = q.z_star();
        let problem = Problem::Quadratic(q);
        let params =
            derive_params(&problem.spec(), &SpectralBounds::new(1.0, 1.0)).unwrap();
        let mut state = PngdState {
            z: z_star.clone(),
            z_f: z_star.clone(),
            k: 0,
        };
        let mut oracle = DualOracle::exact(&problem).unwrap();
        for _ in 0..20 {
            let (next, _) = pngd_step(&state, &params, &mut oracle).unwrap();
            state = next;
        }
        assert!(state.z.sub(&z_star).norm() <= 1e-12 * (1.0 + z_star.norm()));
    }

    #[test]
    fn adom_reduces_to_pngd_under_dense_projector() {
        for seed in 0..10u64 {
            let q = QuadraticProblem::random(4, 2, 0.5, 4.0, 700 + seed);
            let problem = Problem::Quadratic(q);
            let spec = problem.spec();
            let lambda = 1.0 + (seed as f64) * 0.35;
            let w = GossipOperator::scaled_projector(4, 2, lambda);
            let adom_params = derive_params(&spec, &w.bounds()).unwrap();
            let pngd_params =
                derive_params(&spec, &SpectralBounds::new(1.0, 1.0)).unwrap();

            let mut a_state = AdomState::zeros(4, 2);
            let mut p_state = PngdState::zeros(4, 2);
            let mut a_oracle = DualOracle::exact(&problem).unwrap();
            let mut p_oracle = DualOracle::exact(&problem).unwrap();
            for _ in 0..100 {
                let (na, _) = adom_step(&a_state, &adom_params, &w, &mut a_oracle).unwrap();
                let (np, _) = pngd_step(&p_state, &pngd_params, &mut p_oracle).unwrap();
                a_state = na;
                p_state = np;
                let err = a_state.z.sub(&p_state.z).norm();
                assert!(err <= 1e-10 * (1.0 + p_state.z.norm()), "seed={seed}");
                // memory keeps zero projection under the dense projector
                assert!(p_seminorm_sq(&a_state.m) <= 1e-20);
            }
        }
    }

    #[test]
    fn inequality_checks_hold_on_random_runs() {
        for seed in 0..20u64 {
            let n = 3 + (seed as usize % 6);
            let q = QuadraticProblem::random(n, 2, 0.4, 3.5, 900 + seed);
            let problem = Problem::Quadratic(q);
            let g0 = geometric_graph(n, 0.5, seed);
            let g1 = geometric_graph(n, 0.5, seed + 1000);
            let sched = NetworkSchedule::alternating(
                laplacian_gossip(&g0, 2).unwrap(),
                laplacian_gossip(&g1, 2).unwrap(),
                3,
            );
            let params = derive_params(&problem.spec(), &sched.bounds()).unwrap();
            let trace = run(
                Algorithm::Adom,
                &problem,
                &sched,
                OracleMode::Exact,
                &params,
                &RunSettings::new(60).with_diagnostics(DiagnosticsMode::Enforce),
            )
            .unwrap();
            let d = trace.diagnostics.unwrap();
            assert!(d.worst_contraction <= CONTRACTION_TOL, "seed={seed}");
            assert!(d.worst_ghost_residual <= 1e-10, "seed={seed}");
        }
    }

    #[test]
    fn descent_check_fires_with_oversized_theta() {
        // adversarial: theta far above mu/lambda_max on a stiff instance
        let q = QuadraticProblem::random(4, 2, 0.05, 5.0, 1234);
        let problem = Problem::Quadratic(q);
        let g = geometric_graph(4, 0.4, 3);
        let sched = NetworkSchedule::static_graph(laplacian_gossip(&g, 2).unwrap());
        let mut params = derive_params(&problem.spec(), &sched.bounds()).unwrap();
        params.theta *= 50.0;
        let err = run(
            Algorithm::Adom,
            &problem,
            &sched,
            OracleMode::Exact,
            &params,
            &RunSettings::new(200).with_diagnostics(DiagnosticsMode::Enforce),
        )
        .unwrap_err();
        match err {
            RunError::DiagnosticViolation { inequality, .. } => {
                assert!(
                    inequality.contains("descent") || inequality.contains("contraction"),
                    "{inequality}"
                );
            }
            other => panic!("expected diagnostic violation, got {other}"),
        }
    }

    #[test]
    fn zero_iterations_single_row() {
        let problem = identity_problem(3, 1);
        let sched =
            NetworkSchedule::static_graph(laplacian_gossip(&complete_graph(3), 1).unwrap());
        let params = derive_params(&problem.spec(), &sched.bounds()).unwrap();
        let trace = run(
            Algorithm::Adom,
            &problem,
            &sched,
            OracleMode::Exact,
            &params,
            &RunSettings::new(0),
        )
        .unwrap();
        assert_eq!(trace.rows.len(), 1);
        assert_eq!(trace.rows[0].comm_rounds, 0);
    }

    #[test]
    fn comm_accounting() {
        let q = QuadraticProblem::random(4, 2, 0.5, 2.0, 77);
        let problem = Problem::Quadratic(q);
        let sched =
            NetworkSchedule::static_graph(laplacian_gossip(&complete_graph(4), 2).unwrap());
        let params = derive_params(&problem.spec(), &sched.bounds()).unwrap();
        for (alg, per) in [
            (Algorithm::Adom, 2u64),
            (Algorithm::Pngd, 0),
            (Algorithm::Dgd, 1),
        ] {
            let trace = run(
                alg,
                &problem,
                &sched,
                OracleMode::Exact,
                &params,
                &RunSettings::new(10).with_dgd_step(0.1),
            )
            .unwrap();
            for row in &trace.rows {
                assert_eq!(row.comm_rounds, per * row.iter as u64);
            }
        }
    }

    #[test]
    fn deterministic_traces() {
        let problem = Problem::Logistic(crate::oracle::synth_classification(5, 6, 3, 9, 20.0));
        let g = geometric_graph(5, 0.5, 2);
        let sched = NetworkSchedule::static_graph(laplacian_gossip(&g, 3).unwrap());
        let params = derive_params(&problem.spec(), &sched.bounds()).unwrap();
        let mode = OracleMode::Inexact {
            inner: InnerSolver::Gd,
            t_inner: 1,
        };
        let a = run(Algorithm::Adom, &problem, &sched, mode, &params, &RunSettings::new(40))
            .unwrap();
        let b = run(Algorithm::Adom, &problem, &sched, mode, &params, &RunSettings::new(40))
            .unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn dgd_pure_gossip_contracts_consensus_error() {
        // gamma = 0 reduces DGD to gossip averaging of the state
        let problem = identity_problem(5, 1);
        let g = geometric_graph(5, 0.6, 4);
        let w = laplacian_gossip(&g, 1).unwrap();
        let b = w.bounds();
        let mut x = StackedVector::from_blocks(&[
            vec![1.0],
            vec![-2.0],
            vec![0.5],
            vec![3.0],
            vec![-2.5],
        ]);
        for _ in 0..20 {
            let before = p_seminorm_sq(&x);
            x = decentralized_gd_step(&x, 0.0, &w, &problem).unwrap();
            let after = p_seminorm_sq(&x);
            let factor = 1.0 - b.lambda_min_plus / b.lambda_max;
            assert!(after <= factor * factor * before + 1e-12 * (1.0 + before));
        }
    }

    #[test]
    fn dgd_slower_than_adom_on_conditioned_instance() {
        let q = QuadraticProblem::random(6, 2, 0.1, 10.0, 55); // kappa = 100
        let problem = Problem::Quadratic(q);
        let g = geometric_graph(6, 0.5, 12);
        let sched = NetworkSchedule::static_graph(laplacian_gossip(&g, 2).unwrap());
        let params = derive_params(&problem.spec(), &sched.bounds()).unwrap();
        let adom = run(
            Algorithm::Adom,
            &problem,
            &sched,
            OracleMode::Exact,
            &params,
            &RunSettings::new(3000),
        )
        .unwrap();
        let gamma = 0.5 / (problem.spec().l_smooth);
        let dgd = run(
            Algorithm::Dgd,
            &problem,
            &sched,
            OracleMode::Exact,
            &params,
            &RunSettings::new(3000).with_dgd_step(gamma),
        )
        .unwrap();
        let eps = 1e-6;
        let adom_iters = adom.iters_to(eps).map(|(i, _)| i);
        let dgd_iters = dgd.iters_to(eps).map(|(i, _)| i);
        match (adom_iters, dgd_iters) {
            (Some(a), Some(d)) => assert!(a < d, "adom {a} vs dgd {d}"),
            (Some(_), None) => {} // DGD never reached the tolerance
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn subspace_preservation_over_long_run() {
        let q = QuadraticProblem::random(5, 2, 0.3, 3.0, 66);
        let problem = Problem::Quadratic(q);
        let g = geometric_graph(5, 0.5, 8);
        let sched = NetworkSchedule::static_graph(laplacian_gossip(&g, 2).unwrap());
        let params = derive_params(&problem.spec(), &sched.bounds()).unwrap();
        let trace = run(
            Algorithm::Adom,
            &problem,
            &sched,
            OracleMode::Exact,
            &params,
            &RunSettings::new(500).with_diagnostics(DiagnosticsMode::Enforce),
        )
        .unwrap();
        assert!(trace.diagnostics.unwrap().worst_subspace_drift <= 1e-8);
    }

    #[test]
    fn theorem_rate_on_complete_graph() {
        // kappa = 100, chi = 1: fitted slope at least as steep as the proven rate
        let q = QuadraticProblem::random(5, 3, 0.1, 10.0, 321);
        let problem = Problem::Quadratic(q);
        let sched =
            NetworkSchedule::static_graph(laplacian_gossip(&complete_graph(5), 3).unwrap());
        let params = derive_params(&problem.spec(), &sched.bounds()).unwrap();
        let trace = run(
            Algorithm::Adom,
            &problem,
            &sched,
            OracleMode::Exact,
            &params,
            &RunSettings::new(500),
        )
        .unwrap();
        let slope = trace.fitted_slope(50, 500).unwrap();
        let theory = (1.0f64 - 0.1 / 7.0).ln();
        assert!(slope <= theory + 1e-3, "slope={slope} theory={theory}");
    }
}
