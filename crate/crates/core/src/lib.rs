//! Generalized Bregman ADMM.
//!
//! Solves `min f(x) + g(z) s.t. A x + B z = c` by alternating
//! Bregman-augmented subproblems, with two front-ends:
//!
//! * [`transport`]: the mass transportation LP, by BADMM with the generalized
//!   KL divergence (closed-form multiplicative updates) or by Euclidean ADMM
//!   (simplex projections);
//! * [`logistic`]: sparse logistic regression by linearized BADMM.
//!
//! [`framework`] holds the abstract engine and the convergence diagnostics
//! (optimality residual, Lyapunov distance, step-size bound, ergodic bound).
//!
//! ```
//! use badmm::{transport, SolverConfig, TransportProblem, uniform_cost_matrix};
//!
//! let cost = uniform_cost_matrix(4, 4, 1).unwrap();
//! let problem = TransportProblem::assignment(cost).unwrap();
//! let out = transport::solve(&problem, &SolverConfig::default()).unwrap();
//! assert!(out.objective() >= 0.0);
//! ```

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod divergence;
pub mod error;
mod fastmath;
pub mod framework;
pub mod io;
pub mod linalg;
pub mod logistic;
pub mod oracle;
pub mod problem;
pub mod projection;
pub mod trace;
pub mod transport;

pub use config::{Schedule, SolverConfig, StepParams, Variant};
pub use divergence::{DivergenceKind, DivergenceSpec};
pub use error::{Error, Result};
pub use framework::{KktPoint, SplitDims, SplitProblem, SplitState};
pub use linalg::{frobenius_norm, Matrix, Vector};
pub use problem::{uniform_cost_matrix, IterateState, TransportProblem};
pub use trace::{TerminationReason, Trace, TraceRecord};
