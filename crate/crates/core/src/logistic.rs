//! Sparse logistic regression by linearized Bregman ADMM:
//!
//! ```text
//! min h(x) + lambda ||z||_1   s.t.  x = z
//! h(x) = 1/N sum_s ln(1 + exp(-y_s <w_s, x>))
//! ```
//!
//! `h` is replaced by its linearization at `x_t` plus a quadratic proximal
//! term, so the x-update is a closed form; the z-update is soft-thresholding.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::StepParams;
use crate::divergence::DivergenceSpec;
use crate::error::{Error, Result};
use crate::framework::{SplitDims, SplitProblem, SplitState};
use crate::linalg::{Matrix, Vector};
use crate::trace::{TerminationReason, Trace, TraceRecord};

/// Power-iteration steps used by [`lipschitz_bound`].
pub const POWER_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticProblem {
    features: Matrix,
    labels: Vector,
    lambda: f64,
}

impl LogisticProblem {
    /// `features` is `N x d`, one sample per row; labels must be `+-1`.
    pub fn new(features: Matrix, labels: Vector, lambda: f64) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::LengthMismatch {
                expected: features.rows(),
                actual: labels.len(),
            });
        }
        if let Some(i) = labels.iter().position(|&l| l != 1.0 && l != -1.0) {
            return Err(Error::Domain(format!(
                "label {i} = {} is not +1 or -1",
                labels[i]
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
                reason: "must be nonnegative and finite",
            });
        }
        Ok(LogisticProblem {
            features,
            labels,
            lambda,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &Vector {
        &self.labels
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn samples(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        LogisticProblem::new(self.features.clone(), self.labels.clone(), lambda)
    }

    /// `h(x) + lambda ||z||_1`.
    pub fn composite(&self, x: &Vector, z: &Vector) -> Result<f64> {
        Ok(logistic_value(self, x)? + self.lambda * z.norm1())
    }
}

/// `ln(1 + exp(-m))` without overflow.
#[inline]
fn softplus_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// `1 / (1 + exp(m))`.
#[inline]
fn sigmoid_neg(m: f64) -> f64 {
    if m > 0.0 {
        let e = (-m).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + m.exp())
    }
}

fn check_dim(problem: &LogisticProblem, x: &Vector) -> Result<()> {
    if x.len() == problem.dim() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: problem.dim(),
            actual: x.len(),
        })
    }
}

pub fn logistic_value(problem: &LogisticProblem, x: &Vector) -> Result<f64> {
    check_dim(problem, x)?;
    let margins = problem.features.matvec(x.as_slice())?;
    let total: f64 = margins
        .iter()
        .zip(problem.labels.iter())
        .map(|(m, y)| softplus_neg(y * m))
        .sum();
    Ok(total / problem.samples() as f64)
}

/// `(h(x), grad h(x))`, with `grad h(x) = -1/N sum_s y_s w_s / (1 + exp(y_s <w_s, x>))`.
pub fn logistic_value_grad(problem: &LogisticProblem, x: &Vector) -> Result<(f64, Vector)> {
    check_dim(problem, x)?;
    let n = problem.samples() as f64;
    let margins = problem.features.matvec(x.as_slice())?;
    let mut value = 0.0;
    let mut weights = Vec::with_capacity(margins.len());
    for (m, y) in margins.iter().zip(problem.labels.iter()) {
        let ym = y * m;
        value += softplus_neg(ym);
        weights.push(-y * sigmoid_neg(ym) / n);
    }
    let grad = problem.features.matvec_t(&weights)?;
    Ok((value / n, Vector::new(grad)?))
}

/// Upper bound `lambda_max(W'W) / (4N)` on the Lipschitz constant of
/// `grad h`, by [`POWER_ITERATIONS`] steps of power iteration from the all-ones
/// vector.
pub fn lipschitz_bound(problem: &LogisticProblem) -> f64 {
    let d = problem.dim();
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut eig = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let wv = problem.features.matvec(&v).expect("dims fixed");
        let wtwv = problem.features.matvec_t(&wv).expect("dims fixed");
        let norm = wtwv.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        eig = norm;
        for (vi, wi) in v.iter_mut().zip(&wtwv) {
            *vi = wi / norm;
        }
    }
    eig / (4.0 * problem.samples() as f64)
}

/// `x+ = (rho z - y - grad h(x) + rho_x x) / (rho + rho_x)`, the minimizer of
/// `<grad h(x), u - x> + <y, u - z> + rho/2 ||u - z||^2 + rho_x/2 ||u - x||^2`.
pub fn linearized_x_update(
    problem: &LogisticProblem,
    state: &SplitState,
    rho: f64,
    rho_x: f64,
) -> Result<Vector> {
    let denom = rho + rho_x;
    if !(denom > 0.0) || rho < 0.0 || rho_x < 0.0 {
        return Err(Error::InvalidParameter {
            name: "rho + rho_x",
            value: denom,
            reason: "must be positive",
        });
    }
    let (_, grad) = logistic_value_grad(problem, &state.x)?;
    Vector::new(
        (0..problem.dim())
            .map(|i| (rho * state.z[i] - state.y[i] - grad[i] + rho_x * state.x[i]) / denom)
            .collect(),
    )
}

/// `sign(v) max(|v| - kappa, 0)`.
pub fn soft_threshold(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

/// `z+ = soft_threshold(x+ + y / rho, lambda / rho)` elementwise.
pub fn soft_threshold_z_update(x_new: &Vector, y: &Vector, rho: f64, lambda: f64) -> Result<Vector> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "must be positive",
        });
    }
    if x_new.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x_new.len(),
            actual: y.len(),
        });
    }
    let kappa = lambda / rho;
    Vector::new(
        x_new
            .iter()
            .zip(y.iter())
            .map(|(x, yy)| soft_threshold(x + yy / rho, kappa))
            .collect(),
    )
}

/// The logistic split as a [`SplitProblem`]: `A = I`, `B = -I`, `c = 0`,
/// every divergence squared Euclidean.
#[derive(Debug, Clone)]
pub struct LogisticSplit {
    problem: LogisticProblem,
}

impl LogisticSplit {
    pub fn new(problem: LogisticProblem) -> Self {
        LogisticSplit { problem }
    }

    pub fn problem(&self) -> &LogisticProblem {
        &self.problem
    }
}

impl SplitProblem for LogisticSplit {
    fn dims(&self) -> SplitDims {
        let d = self.problem.dim();
        SplitDims { n1: d, n2: d, m: d }
    }

    fn f_value(&self, x: &Vector) -> f64 {
        logistic_value(&self.problem, x).unwrap_or(f64::NAN)
    }

    fn g_value(&self, z: &Vector) -> f64 {
        self.problem.lambda * z.norm1()
    }

    fn constraint_residual(&self, x: &Vector, z: &Vector) -> Result<Vector> {
        x.sub(z)
    }

    fn coupling_x(&self, x: &Vector) -> Result<Vector> {
        Ok(x.neg())
    }

    fn coupling_z(&self, z: &Vector) -> Result<Vector> {
        Ok(z.neg())
    }

    fn coupling_divergence(&self) -> DivergenceSpec {
        DivergenceSpec::squared_euclidean()
    }

    fn prox_divergence_x(&self) -> DivergenceSpec {
        DivergenceSpec::squared_euclidean()
    }

    fn prox_divergence_z(&self) -> DivergenceSpec {
        DivergenceSpec::squared_euclidean()
    }

    fn solve_x(&self, state: &SplitState, params: &StepParams) -> Result<Vector> {
        linearized_x_update(&self.problem, state, params.rho, params.rho_x)
    }

    fn solve_z(&self, x_new: &Vector, state: &SplitState, params: &StepParams) -> Result<Vector> {
        let z = soft_threshold_z_update(x_new, &state.y, params.rho, self.problem.lambda)?;
        if params.rho_z == 0.0 {
            return Ok(z);
        }
        // With a quadratic proximal term the prox argument is the weighted mean.
        let denom = params.rho + params.rho_z;
        let kappa = self.problem.lambda / denom;
        Vector::new(
            (0..x_new.len())
                .map(|i| {
                    let v = (params.rho * x_new[i] + state.y[i] + params.rho_z * state.z[i]) / denom;
                    soft_threshold(v, kappa)
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticConfig {
    pub rho: f64,
    /// `tau = tau_ratio * rho`.
    pub tau_ratio: f64,
    /// `None` uses [`lipschitz_bound`].
    pub rho_x: Option<f64>,
    pub max_iters: usize,
    /// Stop once `max(||x - z||_2, rho ||z+ - z||_2)` is at most this.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            rho: 1.0,
            tau_ratio: 1.0,
            rho_x: None,
            max_iters: 20_000,
            tol: 1e-9,
        }
    }
}

impl LogisticConfig {
    pub fn step_params(&self, problem: &LogisticProblem) -> Result<StepParams> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: self.rho,
                reason: "must be positive and finite",
            });
        }
        if !(self.tau_ratio > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tau_ratio",
                value: self.tau_ratio,
                reason: "must be positive",
            });
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        let rho_x = self.rho_x.unwrap_or_else(|| lipschitz_bound(problem));
        if !(rho_x >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "rho_x",
                value: rho_x,
                reason: "must be nonnegative",
            });
        }
        Ok(StepParams {
            rho: self.rho,
            tau: self.tau_ratio * self.rho,
            rho_x,
            rho_z: 0.0,
            gamma: crate::config::DEFAULT_GAMMA,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LogisticOutcome {
    pub state: SplitState,
    pub trace: Trace,
    pub reason: TerminationReason,
    pub params: StepParams,
}

impl LogisticOutcome {
    /// `||x - z||_inf` at termination.
    pub fn consensus_gap(&self) -> f64 {
        self.state
            .x
            .iter()
            .zip(self.state.z.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.objective)
    }
}

/// Runs linearized BADMM from `x = z = y = 0`. The trace objective is
/// `h(x_t) + lambda ||z_t||_1`.
pub fn solve(problem: &LogisticProblem, config: &LogisticConfig) -> Result<LogisticOutcome> {
    let params = config.step_params(problem)?;
    let split = LogisticSplit::new(problem.clone());
    let d = problem.dim();
    let mut state = SplitState::new(Vector::zeros(d), Vector::zeros(d), Vector::zeros(d));
    let mut trace = Trace::new();
    let mut reason = TerminationReason::IterationLimit;
    let start = Instant::now();
    for _ in 0..config.max_iters {
        let next = crate::framework::iterate(&split, &state, &params)?;
        let r_residual = crate::framework::residual_r(&split, &state, &next, &params)?;
        let primal = next.x.sub(&next.z)?.norm2();
        let dual = params.rho * next.z.sub(&state.z)?.norm2();
        trace.push(TraceRecord {
            iter: next.t,
            elapsed_sec: start.elapsed().as_secs_f64(),
            objective: problem.composite(&next.x, &next.z)?,
            primal_residual: primal,
            dual_residual: dual,
            r_residual,
        })?;
        state = next;
        if primal.max(dual) <= config.tol {
            reason = TerminationReason::Converged;
            break;
        }
    }
    Ok(LogisticOutcome {
        state,
        trace,
        reason,
        params,
    })
}

/// Synthetic instance: standard normal features, a sparse ground truth with
/// `max(1, d / 5)` nonzero entries of magnitude 2, and labels drawn from the
/// logistic model. Deterministic in `seed` (ChaCha8).
pub fn synthetic(samples: usize, dim: usize, lambda: f64, seed: u64) -> Result<LogisticProblem> {
    if samples == 0 || dim == 0 {
        return Err(Error::EmptyShape {
            rows: samples,
            cols: dim,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<f64> = (0..samples * dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let features = Matrix::new(samples, dim, features)?;
    let support = (dim / 5).max(1);
    let truth: Vec<f64> = (0..dim)
        .map(|i| {
            if i < support {
                if rng.random::<bool>() {
                    2.0
                } else {
                    -2.0
                }
            } else {
                0.0
            }
        })
        .collect();
    let margins = features.matvec(&truth)?;
    let labels: Vec<f64> = margins
        .iter()
        .map(|&m| {
            let p = 1.0 / (1.0 + (-m).exp());
            if rng.random::<f64>() < p {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    LogisticProblem::new(features, Vector::new(labels)?, lambda)
}
