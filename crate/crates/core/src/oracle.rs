//! The lifted objective F(x) = sum_i f_i(x_i), its gradients, and the dual
//! oracle grad F*(z) = argmin_x F(x) - <x, z>.
//!
//! Quadratics admit a closed-form dual oracle and a closed-form conjugate
//! value; logistic regression uses a warm-started inner solver.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::stacked::{ShapeError, StackedVector};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("exact dual oracle is only available for quadratic problems")]
    ExactUnavailable,
    #[error("dual value is only available for quadratic problems")]
    DualValueUnavailable,
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Strong-convexity and smoothness moduli shared by all local functions.
#[derive(Debug, Clone, Copy)]
pub struct OracleSpec {
    pub mu: f64,
    pub l_smooth: f64,
    pub n: usize,
    pub d: usize,
}

impl OracleSpec {
    pub fn kappa(&self) -> f64 {
        self.l_smooth / self.mu
    }
}

/// Per node i: f_i(x) = x'A_i x / 2 - b_i'x with A_i symmetric positive
/// definite. The inverse is kept as a Cholesky factor.
pub struct QuadraticProblem {
    a: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
    chol: Vec<Cholesky<f64, nalgebra::Dyn>>,
    spec: OracleSpec,
}

impl QuadraticProblem {
    pub fn new(a: Vec<DMatrix<f64>>, b: Vec<DVector<f64>>) -> Self {
        assert!(!a.is_empty() && a.len() == b.len());
        let d = a[0].nrows();
        let (mut mu, mut l) = (f64::INFINITY, 0.0f64);
        let mut chol = Vec::with_capacity(a.len());
        for (ai, bi) in a.iter().zip(&b) {
            assert_eq!(ai.nrows(), d);
            assert_eq!(ai.ncols(), d);
            assert_eq!(bi.len(), d);
            let eig = SymmetricEigen::new(ai.clone());
            for v in eig.eigenvalues.iter() {
                assert!(*v > 0.0, "A_i must be positive definite");
                mu = mu.min(*v);
                l = l.max(*v);
            }
            chol.push(Cholesky::new(ai.clone()).expect("A_i must be positive definite"));
        }
        let spec = OracleSpec {
            mu,
            l_smooth: l,
            n: a.len(),
            d,
        };
        Self { a, b, chol, spec }
    }

    /// A_i = I, b_i = 0 on every node.
    pub fn identity(n: usize, d: usize) -> Self {
        Self::new(
            (0..n).map(|_| DMatrix::identity(d, d)).collect(),
            (0..n).map(|_| DVector::zeros(d)).collect(),
        )
    }

    /// Random instance with per-node eigenvalues spanning [mu, l] exactly,
    /// rotated by a random orthogonal basis.
    pub fn random(n: usize, d: usize, mu: f64, l: f64, seed: u64) -> Self {
        assert!(0.0 < mu && mu <= l);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for _ in 0..n {
            let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let q = g.qr().q();
            // eigenvalues hit both ends of [mu, l] so the global moduli are exact
            let evals: Vec<f64> = (0..d)
                .map(|i| match i {
                    0 => mu,
                    _ if i == d - 1 && d > 1 => l,
                    _ => rng.gen_range(mu..=l),
                })
                .collect();
            let lam = DMatrix::from_diagonal(&DVector::from_vec(evals));
            let ai = &q * lam * q.transpose();
            let ai = (&ai + ai.transpose()) * 0.5;
            a.push(ai);
            b.push(DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0)));
        }
        Self::new(a, b)
    }

    pub fn spec(&self) -> OracleSpec {
        self.spec
    }

    /// Global minimizer of sum_i f_i: solves (sum A_i) x = sum b_i.
    pub fn x_star(&self) -> Vec<f64> {
        let d = self.spec.d;
        let mut asum = DMatrix::zeros(d, d);
        let mut bsum = DVector::zeros(d);
        for (ai, bi) in self.a.iter().zip(&self.b) {
            asum += ai;
            bsum += bi;
        }
        let x = Cholesky::new(asum).expect("sum of SPD matrices").solve(&bsum);
        x.iter().copied().collect()
    }

    /// Dual optimum: z*_i = A_i x* - b_i, which lies in the zero-sum subspace.
    pub fn z_star(&self) -> StackedVector {
        let x = DVector::from_vec(self.x_star());
        let blocks: Vec<Vec<f64>> = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(ai, bi)| (ai * &x - bi).iter().copied().collect())
            .collect();
        StackedVector::from_blocks(&blocks)
    }

    fn block_dv(v: &StackedVector, i: usize) -> DVector<f64> {
        DVector::from_column_slice(v.block(i))
    }

    /// F*(z) = sum_i (z_i + b_i)' A_i^{-1} (z_i + b_i) / 2.
    pub fn dual_value(&self, z: &StackedVector) -> f64 {
        let mut total = 0.0;
        for i in 0..self.spec.n {
            let rhs = Self::block_dv(z, i) + &self.b[i];
            let sol = self.chol[i].solve(&rhs);
            total += 0.5 * rhs.dot(&sol);
        }
        total
    }

    /// Exact blockwise argmin: grad F*(z)_i = A_i^{-1}(z_i + b_i).
    pub fn exact_dual_gradient(&self, z: &StackedVector) -> StackedVector {
        let blocks: Vec<Vec<f64>> = (0..self.spec.n)
            .map(|i| {
                let rhs = Self::block_dv(z, i) + &self.b[i];
                self.chol[i].solve(&rhs).iter().copied().collect()
            })
            .collect();
        StackedVector::from_blocks(&blocks)
    }
}

/// log(1 + exp(u)) without overflow.
fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Per node i: f_i(x) = (1/m) sum_j log(1 + exp(-b_ij a_ij'x)) + r/2 |x|^2.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    /// features[i][j] is the j-th sample on node i, dense of dimension d
    features: Vec<Vec<Vec<f64>>>,
    labels: Vec<Vec<f64>>,
    r: f64,
    spec: OracleSpec,
}

impl LogisticProblem {
    pub fn new(features: Vec<Vec<Vec<f64>>>, labels: Vec<Vec<f64>>, r: f64) -> Self {
        assert!(r > 0.0);
        assert_eq!(features.len(), labels.len());
        let n = features.len();
        assert!(n >= 1);
        let m = features[0].len();
        assert!(m >= 1);
        let d = features[0][0].len();
        for (fi, li) in features.iter().zip(&labels) {
            assert_eq!(fi.len(), m, "equal samples per node");
            assert_eq!(li.len(), m);
            for (f, l) in fi.iter().zip(li) {
                assert_eq!(f.len(), d);
                assert!(*l == 1.0 || *l == -1.0, "labels must be +/-1");
            }
        }
        let l_smooth = r + Self::data_smoothness(&features);
        let spec = OracleSpec {
            mu: r,
            l_smooth,
            n,
            d,
        };
        Self {
            features,
            labels,
            r,
            spec,
        }
    }

    /// Smoothness of the data term: upper bound max_i (1/m) sum_j |a_ij|^2/4.
    fn data_smoothness(features: &[Vec<Vec<f64>>]) -> f64 {
        features
            .iter()
            .map(|fi| {
                fi.iter()
                    .map(|a| a.iter().map(|v| v * v).sum::<f64>() / 4.0)
                    .sum::<f64>()
                    / fi.len() as f64
            })
            .fold(0.0, f64::max)
    }

    pub fn spec(&self) -> OracleSpec {
        self.spec
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn samples_per_node(&self) -> usize {
        self.features[0].len()
    }

    fn node_value(&self, i: usize, x: &[f64]) -> f64 {
        let m = self.features[i].len() as f64;
        let mut loss = 0.0;
        for (a, b) in self.features[i].iter().zip(&self.labels[i]) {
            let margin: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>() * b;
            loss += log1p_exp(-margin);
        }
        loss / m + 0.5 * self.r * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn node_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let m = self.features[i].len() as f64;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.r * xi;
        }
        for (a, b) in self.features[i].iter().zip(&self.labels[i]) {
            let margin: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>() * b;
            let coeff = -b * sigmoid(-margin) / m;
            for (o, ai) in out.iter_mut().zip(a) {
                *o += coeff * ai;
            }
        }
    }
}

/// Synthetic two-class Gaussian data with the regularizer chosen so that the
/// smoothness upper bound yields exactly `target_kappa`.
pub fn synth_classification(
    n: usize,
    m: usize,
    d: usize,
    seed: u64,
    target_kappa: f64,
) -> LogisticProblem {
    assert!(n >= 1 && m >= 1 && d >= 1);
    assert!(target_kappa > 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (d as f64).sqrt();
    let mean: Vec<f64> = (0..d).map(|_| scale).collect();
    let mut features = vec![Vec::with_capacity(m); n];
    let mut labels = vec![Vec::with_capacity(m); n];
    for node in 0..n {
        for _ in 0..m {
            let label: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let a: Vec<f64> = mean
                .iter()
                .map(|mu| label * mu + rng.sample::<f64, _>(StandardNormal))
                .collect();
            features[node].push(a);
            labels[node].push(label);
        }
    }
    let l_data = LogisticProblem::data_smoothness(&features);
    let r = l_data / (target_kappa - 1.0);
    LogisticProblem::new(features, labels, r)
}

/// Parses the sparse `label idx:val` text format. Labels +1/1 map to +1 and
/// -1/0/2 map to -1; 1-based feature indices above `d_pad` are dropped.
/// Samples are dealt round-robin across `n` nodes; the surplus beyond an
/// equal per-node count is discarded. `r` sets the regularizer.
pub fn load_libsvm(
    path: &std::path::Path,
    n: usize,
    d_pad: usize,
    r: f64,
) -> Result<LogisticProblem, OracleError> {
    let text = std::fs::read_to_string(path)?;
    let mut samples: Vec<(Vec<f64>, f64)> = Vec::new();
    let pname = path.display().to_string();
    let malformed = |line: usize, reason: String| OracleError::Malformed {
        path: pname.clone(),
        line,
        reason,
    };
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label_tok = parts.next().unwrap();
        let label_val: f64 = label_tok
            .parse()
            .map_err(|_| malformed(lineno + 1, format!("bad label `{label_tok}`")))?;
        let label = match label_val {
            v if v == 1.0 => 1.0,
            v if v == -1.0 || v == 0.0 || v == 2.0 => -1.0,
            v => return Err(malformed(lineno + 1, format!("unmapped label {v}"))),
        };
        let mut dense = vec![0.0; d_pad];
        for tok in parts {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| malformed(lineno + 1, format!("bad feature `{tok}`")))?;
            let idx: usize = idx_s
                .parse()
                .map_err(|_| malformed(lineno + 1, format!("bad index `{idx_s}`")))?;
            let val: f64 = val_s
                .parse()
                .map_err(|_| malformed(lineno + 1, format!("bad value `{val_s}`")))?;
            if idx == 0 {
                return Err(malformed(lineno + 1, "feature indices are 1-based".into()));
            }
            if idx <= d_pad {
                dense[idx - 1] = val;
            }
        }
        samples.push((dense, label));
    }
    if samples.is_empty() {
        return Err(malformed(0, "no samples".into()));
    }
    let m = samples.len() / n;
    if m == 0 {
        return Err(malformed(0, format!("fewer samples than nodes ({n})")));
    }
    let mut features = vec![Vec::with_capacity(m); n];
    let mut labels = vec![Vec::with_capacity(m); n];
    for (s, (a, b)) in samples.into_iter().take(n * m).enumerate() {
        features[s % n].push(a);
        labels[s % n].push(b);
    }
    Ok(LogisticProblem::new(features, labels, r))
}

/// A lifted problem instance: the carrier for F, grad F, and the dual oracle.
pub enum Problem {
    Quadratic(QuadraticProblem),
    Logistic(LogisticProblem),
}

impl Problem {
    pub fn spec(&self) -> OracleSpec {
        match self {
            Problem::Quadratic(q) => q.spec(),
            Problem::Logistic(l) => l.spec(),
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticProblem> {
        match self {
            Problem::Quadratic(q) => Some(q),
            _ => None,
        }
    }

    fn check_shape(&self, x: &StackedVector) -> Result<(), ShapeError> {
        let s = self.spec();
        if x.n() != s.n || x.d() != s.d {
            return Err(ShapeError::Mismatch {
                n_a: s.n,
                d_a: s.d,
                n_b: x.n(),
                d_b: x.d(),
            });
        }
        Ok(())
    }

    /// F(x) = sum_i f_i(x_i).
    pub fn lifted_value(&self, x: &StackedVector) -> Result<f64, OracleError> {
        self.check_shape(x)?;
        let total = match self {
            Problem::Quadratic(q) => (0..x.n())
                .map(|i| {
                    let xi = DVector::from_column_slice(x.block(i));
                    0.5 * xi.dot(&(&q.a[i] * &xi)) - q.b[i].dot(&xi)
                })
                .sum(),
            Problem::Logistic(l) => (0..x.n()).map(|i| l.node_value(i, x.block(i))).sum(),
        };
        Ok(total)
    }

    /// Block i of the result is grad f_i(x_i).
    pub fn lifted_gradient(&self, x: &StackedVector) -> Result<StackedVector, OracleError> {
        self.check_shape(x)?;
        let mut out = StackedVector::zeros(x.n(), x.d());
        match self {
            Problem::Quadratic(q) => {
                for i in 0..x.n() {
                    let xi = DVector::from_column_slice(x.block(i));
                    let g = &q.a[i] * &xi - &q.b[i];
                    out.block_mut(i).copy_from_slice(g.as_slice());
                }
            }
            Problem::Logistic(l) => {
                let mut buf = vec![0.0; x.d()];
                for i in 0..x.n() {
                    l.node_gradient(i, x.block(i), &mut buf);
                    out.block_mut(i).copy_from_slice(&buf);
                }
            }
        }
        Ok(out)
    }

    /// Minimizer of the flat problem sum_i f_i(x) by accelerated gradient
    /// descent on the aggregate, run to `grad_tol` on the aggregate gradient
    /// norm. Centralized reference solve for metrics.
    pub fn reference_minimizer(&self, grad_tol: f64, max_iters: usize) -> Vec<f64> {
        if let Problem::Quadratic(q) = self {
            return q.x_star();
        }
        let s = self.spec();
        let (nmu, nl) = (s.mu * s.n as f64, s.l_smooth * s.n as f64);
        let beta = ((nl / nmu).sqrt() - 1.0) / ((nl / nmu).sqrt() + 1.0);
        let aggregate_grad = |x: &[f64], out: &mut [f64]| {
            let xs = StackedVector::replicate(s.n, x);
            let g = self.lifted_gradient(&xs).expect("consistent shapes");
            for o in out.iter_mut() {
                *o = 0.0;
            }
            for i in 0..s.n {
                for (o, gi) in out.iter_mut().zip(g.block(i)) {
                    *o += gi;
                }
            }
        };
        let mut x = vec![0.0; s.d];
        let mut y = x.clone();
        let mut g = vec![0.0; s.d];
        for _ in 0..max_iters {
            aggregate_grad(&y, &mut g);
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm <= grad_tol {
                return y;
            }
            let x_next: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - gi / nl).collect();
            for ((yi, xn), xo) in y.iter_mut().zip(&x_next).zip(&x) {
                *yi = xn + beta * (xn - xo);
            }
            x = x_next;
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    Gd,
    Agd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Exact,
    Inexact { inner: InnerSolver, t_inner: usize },
}

/// Evaluator of grad F*(z). Inexact mode runs T inner steps on
/// x -> F(x) - <x, z> warm-started from the previous answer, so an oracle is
/// owned by exactly one run.
pub struct DualOracle<'a> {
    problem: &'a Problem,
    mode: OracleMode,
    cache: Option<StackedVector>,
}

impl<'a> DualOracle<'a> {
    pub fn new(problem: &'a Problem, mode: OracleMode) -> Result<Self, OracleError> {
        if matches!(mode, OracleMode::Exact) && problem.as_quadratic().is_none() {
            return Err(OracleError::ExactUnavailable);
        }
        Ok(Self {
            problem,
            mode,
            cache: None,
        })
    }

    pub fn exact(problem: &'a Problem) -> Result<Self, OracleError> {
        Self::new(problem, OracleMode::Exact)
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn spec(&self) -> OracleSpec {
        self.problem.spec()
    }

    /// F*(z), quadratics only.
    pub fn dual_value(&self, z: &StackedVector) -> Result<f64, OracleError> {
        self.problem.check_shape(z)?;
        self.problem
            .as_quadratic()
            .map(|q| q.dual_value(z))
            .ok_or(OracleError::DualValueUnavailable)
    }

    /// grad F*(z) = argmin_x F(x) - <x, z>, exact or inexact per mode.
    pub fn dual_gradient(&mut self, z: &StackedVector) -> Result<StackedVector, OracleError> {
        self.problem.check_shape(z)?;
        match self.mode {
            OracleMode::Exact => {
                let q = self.problem.as_quadratic().ok_or(OracleError::ExactUnavailable)?;
                Ok(q.exact_dual_gradient(z))
            }
            OracleMode::Inexact { inner, t_inner } => {
                let s = self.problem.spec();
                let start = self
                    .cache
                    .take()
                    .unwrap_or_else(|| StackedVector::zeros(s.n, s.d));
                let result = self.inner_solve(z, start, inner, t_inner)?;
                self.cache = Some(result.clone());
                Ok(result)
            }
        }
    }

    fn inner_solve(
        &self,
        z: &StackedVector,
        x0: StackedVector,
        inner: InnerSolver,
        t: usize,
    ) -> Result<StackedVector, OracleError> {
        let s = self.problem.spec();
        let step = 1.0 / s.l_smooth;
        let mut x = x0;
        match inner {
            InnerSolver::Gd => {
                for _ in 0..t {
                    let g = self.problem.lifted_gradient(&x)?.sub(z);
                    x = x.axpy(-step, &g);
                }
            }
            InnerSolver::Agd => {
                let sk = s.kappa().sqrt();
                let beta = (sk - 1.0) / (sk + 1.0);
                let mut y = x.clone();
                for _ in 0..t {
                    let g = self.problem.lifted_gradient(&y)?.sub(z);
                    let x_next = y.axpy(-step, &g);
                    y = x_next.axpy(beta, &x_next.sub(&x));
                    x = x_next;
                }
            }
        }
        Ok(x)
    }
}
