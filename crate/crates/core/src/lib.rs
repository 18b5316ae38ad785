//! Accelerated dual-oracle decentralized optimization over time-varying
//! gossip networks, with the network machinery, oracles, and diagnostics
//! needed to benchmark it.
//!
//! The crate is organized around five pieces:
//!
//! - [`stacked`]: block vectors in (R^d)^V and the consensus projector;
//! - [`network`]: time-varying graphs, Laplacian gossip operators, and their
//!   spectral bounds;
//! - [`oracle`]: the lifted objective, its gradients, and the dual oracle
//!   (exact for quadratics, warm-started inner solver for logistic loss);
//! - [`algorithms`]: the optimization loops, parameter derivation, and
//!   per-iteration inequality diagnostics;
//! - [`bench`] and [`config`]: the configuration-driven experiment runner
//!   behind the `adom-bench` CLI.

pub mod algorithms;
pub mod bench;
pub mod config;
pub mod network;
pub mod oracle;
pub mod stacked;

pub use algorithms::{
    adom_step, derive_params, lyapunov, pngd_step, run, AdomParams, AdomState, Algorithm,
    DiagnosticsMode, RunSettings, Trace, TraceRow,
};
pub use network::{
    geometric_graph, laplacian_gossip, ring_graph, spectral_bounds, star_graph, GossipOperator,
    Graph, NetworkSchedule, SpectralBounds,
};
pub use oracle::{
    load_libsvm, synth_classification, DualOracle, InnerSolver, LogisticProblem, OracleMode,
    OracleSpec, Problem, QuadraticProblem,
};
pub use stacked::{p_seminorm_sq, project, StackedVector};
