//! Time-varying graphs, Laplacian gossip operators, and their spectral bounds.
//!
//! One application of a gossip operator is one decentralized communication
//! round: each node's output block is a linear combination of its own and its
//! neighbors' blocks only.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::stacked::{ShapeError, StackedVector};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("graph must have at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("graph is disconnected; gossip operator would have zero spectral gap")]
    Disconnected,
    #[error("power iteration did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("schedule has no gossip operator for step {0}")]
    ScheduleGap(usize),
    #[error("edge list line {line}: {reason}")]
    BadEdgeList { line: usize, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Undirected simple graph on nodes 0..n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>, // i < j, sorted, deduplicated
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        assert!(n >= 1);
        let set: BTreeSet<(usize, usize)> = edges
            .into_iter()
            .map(|(i, j)| {
                assert!(i != j, "self-loop at node {i}");
                assert!(i < n && j < n, "edge ({i},{j}) out of range n={n}");
                (i.min(j), i.max(j))
            })
            .collect();
        Self {
            n,
            edges: set.into_iter().collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 1 {
            return true;
        }
        components(self.n, &self.edges).len() == 1
    }
}

/// Connected components in order of discovery (BFS from ascending node ids).
fn components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// Samples n points uniformly on the unit square, connects pairs closer than
/// `radius`, then repairs connectivity by joining consecutive components (in
/// discovery order) through their closest cross-component point pair.
pub fn geometric_graph(n: usize, radius: f64, seed: u64) -> Graph {
    assert!(n >= 2, "geometric graph needs n >= 2");
    assert!(radius >= 0.0, "radius must be nonnegative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
        .collect();
    let dist = |a: usize, b: usize| -> f64 {
        let (dx, dy) = (points[a].0 - points[b].0, points[a].1 - points[b].1);
        (dx * dx + dy * dy).sqrt()
    };
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if dist(i, j) < radius {
                edges.push((i, j));
            }
        }
    }
    let comps = components(n, &edges);
    for win in comps.windows(2) {
        let (a, b) = (&win[0], &win[1]);
        let mut best = (a[0], b[0]);
        let mut best_d = f64::INFINITY;
        for &u in a {
            for &v in b {
                let d = dist(u, v);
                if d < best_d {
                    best_d = d;
                    best = (u, v);
                }
            }
        }
        edges.push((best.0.min(best.1), best.0.max(best.1)));
    }
    Graph::new(n, edges)
}

pub fn ring_graph(n: usize) -> Result<Graph, NetworkError> {
    if n < 3 {
        return Err(NetworkError::TooFewNodes { min: 3, got: n });
    }
    Ok(Graph::new(n, (0..n).map(|i| (i, (i + 1) % n))))
}

pub fn star_graph(n: usize) -> Result<Graph, NetworkError> {
    if n < 2 {
        return Err(NetworkError::TooFewNodes { min: 2, got: n });
    }
    Ok(Graph::new(n, (1..n).map(|i| (0, i))))
}

pub fn complete_graph(n: usize) -> Graph {
    assert!(n >= 2);
    Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
}

/// Spectral bounds on the nonzero spectrum of a gossip operator, and the
/// network condition number chi = lambda_max / lambda_min_plus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub lambda_max: f64,
    pub lambda_min_plus: f64,
}

impl SpectralBounds {
    pub fn new(lambda_max: f64, lambda_min_plus: f64) -> Self {
        assert!(
            0.0 < lambda_min_plus && lambda_min_plus <= lambda_max * (1.0 + 1e-12),
            "need 0 < lambda_min_plus <= lambda_max, got {lambda_min_plus} / {lambda_max}"
        );
        Self {
            lambda_max,
            lambda_min_plus: lambda_min_plus.min(lambda_max),
        }
    }

    pub fn chi(&self) -> f64 {
        self.lambda_max / self.lambda_min_plus
    }

    /// Union bound over a set of operators: max of lambda_max, min of
    /// lambda_min_plus.
    pub fn dominate(&self, other: &SpectralBounds) -> SpectralBounds {
        SpectralBounds::new(
            self.lambda_max.max(other.lambda_max),
            self.lambda_min_plus.min(other.lambda_min_plus),
        )
    }
}

/// The time-k gossip matrix, stored as a dense symmetric n x n base matrix
/// acting per coordinate on stacked vectors.
#[derive(Debug, Clone)]
pub struct GossipOperator {
    n: usize,
    d: usize,
    base: Vec<f64>, // row-major n x n
    bounds: SpectralBounds,
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 100_000;

impl GossipOperator {
    /// Builds an operator from an explicit symmetric base matrix with known
    /// bounds. Used for the dense-projector reduction and in tests.
    pub fn from_base(n: usize, d: usize, base: Vec<f64>, bounds: SpectralBounds) -> Self {
        assert_eq!(base.len(), n * n);
        Self { n, d, base, bounds }
    }

    /// lambda * P as a gossip operator (dense projector; not decentralized,
    /// used for the PNGD reduction).
    pub fn scaled_projector(n: usize, d: usize, lambda: f64) -> Self {
        assert!(lambda > 0.0);
        let mut base = vec![-lambda / n as f64; n * n];
        for i in 0..n {
            base[i * n + i] += lambda;
        }
        Self::from_base(n, d, base, SpectralBounds::new(lambda, lambda))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn bounds(&self) -> SpectralBounds {
        self.bounds
    }

    /// y_i = sum_j W_ij x_j applied to each of the d coordinates.
    pub fn apply(&self, v: &StackedVector) -> Result<StackedVector, ShapeError> {
        if v.n() != self.n || v.d() != self.d {
            return Err(ShapeError::Mismatch {
                n_a: self.n,
                d_a: self.d,
                n_b: v.n(),
                d_b: v.d(),
            });
        }
        let mut out = StackedVector::zeros(self.n, self.d);
        for i in 0..self.n {
            let row = &self.base[i * self.n..(i + 1) * self.n];
            let oi = out.block_mut(i);
            for (j, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    for (o, x) in oi.iter_mut().zip(v.block(j)) {
                        *o += w * x;
                    }
                }
            }
        }
        Ok(out)
    }

    /// <v, Wv> — used by the step diagnostics only.
    pub fn weighted_seminorm_sq(&self, v: &StackedVector) -> Result<f64, ShapeError> {
        Ok(self.apply(v)?.dot(v))
    }

    fn base_matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let row = &self.base[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(x).map(|(w, v)| w * v).sum();
        }
    }
}

fn subtract_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in x {
        *v -= mean;
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
    norm
}

/// Power iteration for the top eigenvalue of a symmetric PSD matvec restricted
/// to the zero-mean subspace; converges when the eigenresidual drops below
/// `POWER_TOL * max(1, theta)`.
fn power_top<F: Fn(&[f64], &mut [f64])>(
    n: usize,
    matvec: F,
    seed: u64,
) -> Result<f64, NetworkError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    subtract_mean(&mut x);
    if normalize(&mut x) == 0.0 {
        return Ok(0.0);
    }
    let mut y = vec![0.0; n];
    for _ in 0..POWER_MAX_ITERS {
        matvec(&x, &mut y);
        subtract_mean(&mut y);
        let theta: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let resid: f64 = y
            .iter()
            .zip(&x)
            .map(|(yi, xi)| (yi - theta * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        if resid <= POWER_TOL * theta.abs().max(1.0) {
            return Ok(theta);
        }
        if normalize(&mut y) == 0.0 {
            // matrix annihilates the subspace
            return Ok(0.0);
        }
        std::mem::swap(&mut x, &mut y);
    }
    Err(NetworkError::NonConvergence(POWER_MAX_ITERS))
}

/// Largest eigenvalue of a symmetric PSD base matrix whose kernel contains the
/// consensus direction.
fn lambda_max_of(n: usize, matvec: impl Fn(&[f64], &mut [f64])) -> Result<f64, NetworkError> {
    power_top(n, matvec, 0x5eed)
}

/// Spectral bounds of an operator via power iteration with a single deflation:
/// lambda_max on the base matrix, then lambda_min_plus = lambda_max - top
/// eigenvalue of (lambda_max I - W) on the zero-mean subspace.
pub fn spectral_bounds(w: &GossipOperator) -> Result<SpectralBounds, NetworkError> {
    let n = w.n;
    let lambda_max = lambda_max_of(n, |x, y| w.base_matvec(x, y))?;
    let shifted_top = power_top(
        n,
        |x, y| {
            w.base_matvec(x, y);
            for i in 0..n {
                y[i] = lambda_max * x[i] - y[i];
            }
        },
        0x5eed + 1,
    )?;
    let lambda_min_plus = (lambda_max - shifted_top).max(0.0);
    if lambda_min_plus <= 0.0 {
        return Err(NetworkError::Disconnected);
    }
    Ok(SpectralBounds::new(lambda_max, lambda_min_plus))
}

/// Laplacian of a connected graph divided by its largest eigenvalue, so that
/// lambda_max = 1 exactly.
pub fn laplacian_gossip(g: &Graph, d: usize) -> Result<GossipOperator, NetworkError> {
    if !g.is_connected() {
        return Err(NetworkError::Disconnected);
    }
    let n = g.n();
    let mut lap = vec![0.0; n * n];
    for &(i, j) in g.edges() {
        lap[i * n + j] -= 1.0;
        lap[j * n + i] -= 1.0;
        lap[i * n + i] += 1.0;
        lap[j * n + j] += 1.0;
    }
    let top = lambda_max_of(n, |x, y| {
        for i in 0..n {
            y[i] = lap[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    })?;
    for v in &mut lap {
        *v /= top;
    }
    let mut op = GossipOperator {
        n,
        d,
        base: lap,
        bounds: SpectralBounds::new(1.0, 1.0), // placeholder until measured
    };
    op.bounds = spectral_bounds(&op)?;
    // normalization makes the top eigenvalue 1 up to power-iteration tolerance
    op.bounds.lambda_max = 1.0;
    Ok(op)
}

/// Rule producing the gossip operator for each time step, with schedule-global
/// spectral bounds.
#[derive(Debug, Clone)]
pub struct NetworkSchedule {
    operators: Vec<GossipOperator>,
    switch_period: usize,
    /// None => cyclic over `operators`; Some(len) => FromFile of fixed length,
    /// erroring past the end.
    fixed_len: Option<usize>,
    bounds: SpectralBounds,
}

impl NetworkSchedule {
    pub fn static_graph(op: GossipOperator) -> Self {
        let bounds = op.bounds();
        Self {
            operators: vec![op],
            switch_period: 1,
            fixed_len: None,
            bounds,
        }
    }

    /// Cycles through the operators, holding each for `switch_period` steps.
    pub fn cyclic(operators: Vec<GossipOperator>, switch_period: usize) -> Self {
        assert!(!operators.is_empty());
        assert!(switch_period >= 1);
        let bounds = operators
            .iter()
            .map(|o| o.bounds())
            .reduce(|a, b| a.dominate(&b))
            .unwrap();
        Self {
            operators,
            switch_period,
            fixed_len: None,
            bounds,
        }
    }

    pub fn alternating(a: GossipOperator, b: GossipOperator, switch_period: usize) -> Self {
        Self::cyclic(vec![a, b], switch_period)
    }

    /// One operator per step k = 0..len; steps beyond the file are errors.
    pub fn from_operator_sequence(operators: Vec<GossipOperator>) -> Self {
        assert!(!operators.is_empty());
        let len = operators.len();
        let bounds = operators
            .iter()
            .map(|o| o.bounds())
            .reduce(|a, b| a.dominate(&b))
            .unwrap();
        Self {
            operators,
            switch_period: 1,
            fixed_len: Some(len),
            bounds,
        }
    }

    pub fn bounds(&self) -> SpectralBounds {
        self.bounds
    }

    pub fn operators(&self) -> &[GossipOperator] {
        &self.operators
    }

    pub fn at(&self, k: usize) -> Result<&GossipOperator, NetworkError> {
        match self.fixed_len {
            Some(len) => self.operators.get(k).ok_or(NetworkError::ScheduleGap(len)),
            None => {
                let idx = (k / self.switch_period) % self.operators.len();
                Ok(&self.operators[idx])
            }
        }
    }
}

/// Parses a temporal edge list: one `k i j` record per line, `#` comments,
/// every step 0..=K present. Returns one graph per step.
pub fn parse_temporal_edge_list(text: &str) -> Result<Vec<Graph>, NetworkError> {
    let mut records: Vec<(usize, usize, usize)> = Vec::new();
    let mut n = 0usize;
    let mut max_k = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut field = |name: &str| -> Result<usize, NetworkError> {
            parts
                .next()
                .ok_or_else(|| NetworkError::BadEdgeList {
                    line: lineno + 1,
                    reason: format!("missing field `{name}`"),
                })?
                .parse()
                .map_err(|_| NetworkError::BadEdgeList {
                    line: lineno + 1,
                    reason: format!("field `{name}` is not a nonnegative integer"),
                })
        };
        let (k, i, j) = (field("k")?, field("i")?, field("j")?);
        if i == j {
            return Err(NetworkError::BadEdgeList {
                line: lineno + 1,
                reason: format!("self-loop at node {i}"),
            });
        }
        n = n.max(i + 1).max(j + 1);
        max_k = max_k.max(k);
        records.push((k, i, j));
    }
    if records.is_empty() {
        return Err(NetworkError::BadEdgeList {
            line: 0,
            reason: "no edge records".into(),
        });
    }
    let mut per_step: Vec<Vec<(usize, usize)>> = vec![Vec::new(); max_k + 1];
    for (k, i, j) in records {
        per_step[k].push((i, j));
    }
    if let Some(gap) = per_step.iter().position(|e| e.is_empty()) {
        return Err(NetworkError::ScheduleGap(gap));
    }
    Ok(per_step.into_iter().map(|e| Graph::new(n, e)).collect())
}

pub fn load_temporal_edge_list(path: &Path) -> Result<Vec<Graph>, NetworkError> {
    let text = std::fs::read_to_string(path)?;
    parse_temporal_edge_list(&text)
}

/// Writes graphs in the same `k i j` format.
pub fn format_temporal_edge_list(graphs: &[Graph]) -> String {
    let mut out = String::from("# temporal edge list: k i j\n");
    for (k, g) in graphs.iter().enumerate() {
        for &(i, j) in g.edges() {
            writeln!(out, "{k} {i} {j}").unwrap();
        }
    }
    out
}

/// Builds a FromFile schedule out of per-step graphs.
pub fn schedule_from_graphs(graphs: &[Graph], d: usize) -> Result<NetworkSchedule, NetworkError> {
    let ops = graphs
        .iter()
        .map(|g| laplacian_gossip(g, d))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NetworkSchedule::from_operator_sequence(ops))
}
