//! Generalized Bregman ADMM over an abstract split problem
//!
//! ```text
//! min f(x) + g(z)   s.t.  A x + B z = c,  x in X,  z in Z
//! ```
//!
//! One sweep performs, in this order,
//!
//! ```text
//! x+ = argmin_x f(x) + <y, A x + B z - c> + rho B_phi(c - A x, B z) + rho_x B_phix(x, x_t)
//! z+ = argmin_z g(z) + <y, A x+ + B z - c> + rho B_phi(B z, c - A x+) + rho_z B_phiz(z, z_t)
//! y+ = y + tau (A x+ + B z+ - c)
//! ```
//!
//! The subproblem solvers are supplied by each front-end. This module also
//! evaluates the convergence diagnostics: the optimality residual `R(t+1)`,
//! the Lyapunov distance `D(w*, w_t)`, the admissible dual step size, and the
//! constant of the ergodic objective bound.

use nalgebra::{DMatrix, DVector};

use crate::config::StepParams;
use crate::divergence::DivergenceSpec;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitDims {
    /// Length of `x`.
    pub n1: usize,
    /// Length of `z`.
    pub n2: usize,
    /// Number of coupling constraints.
    pub m: usize,
}

/// Iterate `(x_t, z_t, y_t)` of a split problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitState {
    pub x: Vector,
    pub z: Vector,
    pub y: Vector,
    pub t: usize,
}

impl SplitState {
    pub fn new(x: Vector, z: Vector, y: Vector) -> Self {
        SplitState { x, z, y, t: 0 }
    }

    fn check_dims(&self, dims: SplitDims) -> Result<()> {
        for (expected, actual) in [
            (dims.n1, self.x.len()),
            (dims.n2, self.z.len()),
            (dims.m, self.y.len()),
        ] {
            if expected != actual {
                return Err(Error::LengthMismatch { expected, actual });
            }
        }
        Ok(())
    }

    /// Largest absolute change in any of `x`, `z`, `y`.
    pub fn max_abs_diff(&self, other: &SplitState) -> f64 {
        let d = |a: &Vector, b: &Vector| {
            a.iter()
                .zip(b.iter())
                .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
        };
        d(&self.x, &other.x)
            .max(d(&self.z, &other.z))
            .max(d(&self.y, &other.y))
    }
}

/// The operation family a front-end provides to the engine.
///
/// `coupling_x(x)` and `coupling_z(z)` are the two arguments the coupling
/// divergence `B_phi` sees: `c - A x` and `B z` respectively, expressed in
/// whatever coordinates the front-end's generator `phi` lives in. Their
/// difference must equal `-(A x + B z - c)` up to that change of
/// coordinates.
pub trait SplitProblem {
    fn dims(&self) -> SplitDims;

    fn f_value(&self, x: &Vector) -> f64;

    fn g_value(&self, z: &Vector) -> f64;

    /// `A x + B z - c`.
    fn constraint_residual(&self, x: &Vector, z: &Vector) -> Result<Vector>;

    fn coupling_x(&self, x: &Vector) -> Result<Vector>;

    fn coupling_z(&self, z: &Vector) -> Result<Vector>;

    fn coupling_divergence(&self) -> DivergenceSpec;

    fn prox_divergence_x(&self) -> DivergenceSpec;

    fn prox_divergence_z(&self) -> DivergenceSpec;

    /// Minimizer of the x-subproblem at `state`.
    fn solve_x(&self, state: &SplitState, params: &StepParams) -> Result<Vector>;

    /// Minimizer of the z-subproblem given the fresh `x_new`.
    fn solve_z(&self, x_new: &Vector, state: &SplitState, params: &StepParams) -> Result<Vector>;
}

/// A primal-dual point satisfying the KKT conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub x_star: Vector,
    pub z_star: Vector,
    pub y_star: Vector,
}

/// Feasibility tolerance of [`KktPoint::new`].
pub const KKT_FEASIBILITY_TOL: f64 = 1e-8;

impl KktPoint {
    /// Checks `||A x* + B z* - c||_inf <= 1e-8`.
    pub fn new<P: SplitProblem + ?Sized>(
        problem: &P,
        x_star: Vector,
        z_star: Vector,
        y_star: Vector,
    ) -> Result<Self> {
        let r = problem.constraint_residual(&x_star, &z_star)?;
        let worst = r.norm_inf();
        if worst > KKT_FEASIBILITY_TOL {
            return Err(Error::InvalidParameter {
                name: "constraint_residual",
                value: worst,
                reason: "reference point is not feasible",
            });
        }
        Ok(KktPoint {
            x_star,
            z_star,
            y_star,
        })
    }

    pub fn from_state<P: SplitProblem + ?Sized>(problem: &P, state: &SplitState) -> Result<Self> {
        KktPoint::new(problem, state.x.clone(), state.z.clone(), state.y.clone())
    }
}

/// One sweep: x-update, then z-update with the new x, then the dual step.
pub fn iterate<P: SplitProblem + ?Sized>(
    problem: &P,
    state: &SplitState,
    params: &StepParams,
) -> Result<SplitState> {
    state.check_dims(problem.dims())?;
    let x = problem.solve_x(state, params)?;
    let z = problem.solve_z(&x, state, params)?;
    let r = problem.constraint_residual(&x, &z)?;
    let y = state.y.axpy(params.tau, &r)?;
    Ok(SplitState {
        x,
        z,
        y,
        t: state.t + 1,
    })
}

/// `R(t+1) = (rho_x/rho) B_x(x+, x) + (rho_z/rho) B_z(z+, z)
///           + B_phi(c - A x+, B z) + gamma ||A x+ + B z+ - c||^2`.
pub fn residual_r<P: SplitProblem + ?Sized>(
    problem: &P,
    prev: &SplitState,
    next: &SplitState,
    params: &StepParams,
) -> Result<f64> {
    let mut total = 0.0;
    if params.rho_x > 0.0 {
        total += params.rho_x / params.rho * problem.prox_divergence_x().value(&next.x, &prev.x)?;
    }
    if params.rho_z > 0.0 {
        total += params.rho_z / params.rho * problem.prox_divergence_z().value(&next.z, &prev.z)?;
    }
    total += problem
        .coupling_divergence()
        .value(&problem.coupling_x(&next.x)?, &problem.coupling_z(&prev.z)?)?;
    let r = problem.constraint_residual(&next.x, &next.z)?;
    total += params.gamma * r.dot(&r)?;
    Ok(total)
}

/// `D(w*, w_t) = ||y* - y_t||^2 / (2 tau rho) + B_phi(B z*, B z_t)
///              + (rho_x/rho) B_x(x*, x_t) + (rho_z/rho) B_z(z*, z_t)`.
pub fn lyapunov_d<P: SplitProblem + ?Sized>(
    problem: &P,
    reference: &KktPoint,
    state: &SplitState,
    params: &StepParams,
) -> Result<f64> {
    let dy = reference.y_star.sub(&state.y)?;
    let mut total = dy.dot(&dy)? / (2.0 * params.tau * params.rho);
    total += problem.coupling_divergence().value(
        &problem.coupling_z(&reference.z_star)?,
        &problem.coupling_z(&state.z)?,
    )?;
    if params.rho_x > 0.0 {
        total += params.rho_x / params.rho
            * problem
                .prox_divergence_x()
                .value(&reference.x_star, &state.x)?;
    }
    if params.rho_z > 0.0 {
        total += params.rho_z / params.rho
            * problem
                .prox_divergence_z()
                .value(&reference.z_star, &state.z)?;
    }
    Ok(total)
}

/// Largest dual step that keeps `R(t+1) <= D(w*, w_t) - D(w*, w_{t+1})`:
/// `(alpha sigma - 2 gamma) rho` with `sigma = min(1, m^(2/p - 1))`, where
/// `m` is the number of coupling constraints.
pub fn step_size_bound(alpha: f64, p: f64, m: usize, gamma: f64, rho: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must be positive",
        });
    }
    if !(p > 0.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "must be positive",
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "must be positive",
        });
    }
    let sigma = (m as f64).powf(2.0 / p - 1.0).min(1.0);
    if !(gamma > 0.0 && gamma < alpha * sigma / 2.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "must lie in (0, alpha * sigma / 2)",
        });
    }
    Ok((alpha * sigma - 2.0 * gamma) * rho)
}

/// Horizon-dependent constants `(rho_x, rho_z, tau, rho)
/// = (c1 sqrt(T), c1 sqrt(T), c2 sqrt(T), sqrt(T))`.
pub fn sqrt_t_schedule(horizon: usize, c1: f64, c2: f64) -> Result<(f64, f64, f64, f64)> {
    if horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "T",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let s = (horizon as f64).sqrt();
    Ok((c1 * s, c1 * s, c2 * s, s))
}

/// Running sums for the ergodic averages `x_bar_T`, `z_bar_T`.
#[derive(Debug, Clone, Default)]
pub struct ErgodicAverage {
    x_sum: Vec<f64>,
    z_sum: Vec<f64>,
    count: usize,
}

impl ErgodicAverage {
    pub fn new() -> Self {
        ErgodicAverage::default()
    }

    pub fn push(&mut self, x: &[f64], z: &[f64]) {
        if self.count == 0 {
            self.x_sum = vec![0.0; x.len()];
            self.z_sum = vec![0.0; z.len()];
        }
        debug_assert_eq!(self.x_sum.len(), x.len());
        for (s, v) in self.x_sum.iter_mut().zip(x) {
            *s += v;
        }
        for (s, v) in self.z_sum.iter_mut().zip(z) {
            *s += v;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Result<(Vector, Vector)> {
        if self.count == 0 {
            return Err(Error::EmptySequence);
        }
        let n = self.count as f64;
        Ok((
            Vector::new(self.x_sum.iter().map(|s| s / n).collect())?,
            Vector::new(self.z_sum.iter().map(|s| s / n).collect())?,
        ))
    }
}

/// Mean of the first `horizon` iterates; `iterates[0]` is the state after
/// the first sweep.
pub fn ergodic_average(iterates: &[SplitState], horizon: usize) -> Result<(Vector, Vector)> {
    if horizon == 0 || iterates.len() < horizon {
        return Err(Error::EmptySequence);
    }
    let mut avg = ErgodicAverage::new();
    for s in &iterates[..horizon] {
        avg.push(s.x.as_slice(), s.z.as_slice());
    }
    avg.mean()
}

/// `D1 = rho B_phi(B z*, B z0) + rho_x B_x(x*, x0) + rho_z B_z(z*, z0)`, the
/// numerator of the ergodic objective bound `D1 / T`. Requires `y0 = 0`.
pub fn ergodic_bound_d1<P: SplitProblem + ?Sized>(
    problem: &P,
    reference: &KktPoint,
    initial: &SplitState,
    params: &StepParams,
) -> Result<f64> {
    if initial.y.iter().any(|&v| v != 0.0) {
        return Err(Error::InvalidParameter {
            name: "y0",
            value: initial.y.norm_inf(),
            reason: "ergodic bound assumes a zero initial dual",
        });
    }
    let mut total = params.rho
        * problem.coupling_divergence().value(
            &problem.coupling_z(&reference.z_star)?,
            &problem.coupling_z(&initial.z)?,
        )?;
    if params.rho_x > 0.0 {
        total += params.rho_x
            * problem
                .prox_divergence_x()
                .value(&reference.x_star, &initial.x)?;
    }
    if params.rho_z > 0.0 {
        total += params.rho_z
            * problem
                .prox_divergence_z()
                .value(&reference.z_star, &initial.z)?;
    }
    Ok(total)
}

/// Equality-constrained quadratic program with every divergence squared
/// Euclidean:
///
/// ```text
/// min 1/2 x'Px + q'x + 1/2 z'Qz + r'z   s.t.  A x + B z = c
/// ```
///
/// Both subproblems reduce to a symmetric positive definite solve.
#[derive(Debug, Clone)]
pub struct QuadraticSplit {
    pub p: Matrix,
    pub q: Vector,
    pub qz: Matrix,
    pub r: Vector,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Vector,
}

impl QuadraticSplit {
    pub fn new(
        p: Matrix,
        q: Vector,
        qz: Matrix,
        r: Vector,
        a: Matrix,
        b: Matrix,
        c: Vector,
    ) -> Result<Self> {
        let n1 = q.len();
        let n2 = r.len();
        let m = c.len();
        for (mat, shape) in [
            (&p, (n1, n1)),
            (&qz, (n2, n2)),
            (&a, (m, n1)),
            (&b, (m, n2)),
        ] {
            if mat.shape() != shape {
                return Err(Error::ShapeMismatch {
                    left: mat.shape(),
                    right: shape,
                });
            }
        }
        Ok(QuadraticSplit {
            p,
            q,
            qz,
            r,
            a,
            b,
            c,
        })
    }

    fn quad(m: &Matrix, v: &Vector) -> f64 {
        let mv = m.matvec(v.as_slice()).expect("shape checked");
        0.5 * mv.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>()
    }
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Solves `(H + rho K'K + prox I) u = rhs`.
fn solve_regularized(h: &Matrix, k: &Matrix, rho: f64, prox: f64, rhs: Vec<f64>) -> Result<Vector> {
    let kk = to_na(k);
    let n = h.rows();
    let lhs = to_na(h) + kk.transpose() * &kk * rho + DMatrix::identity(n, n) * prox;
    let sol = lhs
        .lu()
        .solve(&DVector::from_vec(rhs))
        .ok_or_else(|| Error::Domain("quadratic subproblem is singular".into()))?;
    Vector::new(sol.iter().copied().collect())
}

impl SplitProblem for QuadraticSplit {
    fn dims(&self) -> SplitDims {
        SplitDims {
            n1: self.q.len(),
            n2: self.r.len(),
            m: self.c.len(),
        }
    }

    fn f_value(&self, x: &Vector) -> f64 {
        Self::quad(&self.p, x) + self.q.dot(x).expect("shape checked")
    }

    fn g_value(&self, z: &Vector) -> f64 {
        Self::quad(&self.qz, z) + self.r.dot(z).expect("shape checked")
    }

    fn constraint_residual(&self, x: &Vector, z: &Vector) -> Result<Vector> {
        let ax = self.a.matvec(x.as_slice())?;
        let bz = self.b.matvec(z.as_slice())?;
        Vector::new(
            ax.iter()
                .zip(&bz)
                .zip(self.c.iter())
                .map(|((a, b), c)| a + b - c)
                .collect(),
        )
    }

    fn coupling_x(&self, x: &Vector) -> Result<Vector> {
        let ax = self.a.matvec(x.as_slice())?;
        Vector::new(self.c.iter().zip(&ax).map(|(c, a)| c - a).collect())
    }

    fn coupling_z(&self, z: &Vector) -> Result<Vector> {
        Vector::new(self.b.matvec(z.as_slice())?)
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
        // rhs = -q - A'y - rho A'(B z - c) + rho_x x
        let bz_minus_c = self.coupling_z(&state.z)?.sub(&self.c)?;
        let at_y = self.a.matvec_t(state.y.as_slice())?;
        let at_r = self.a.matvec_t(bz_minus_c.as_slice())?;
        let rhs = (0..self.q.len())
            .map(|i| -self.q[i] - at_y[i] - params.rho * at_r[i] + params.rho_x * state.x[i])
            .collect();
        solve_regularized(&self.p, &self.a, params.rho, params.rho_x, rhs)
    }

    fn solve_z(&self, x_new: &Vector, state: &SplitState, params: &StepParams) -> Result<Vector> {
        // rhs = -r - B'y - rho B'(A x - c) + rho_z z
        let ax_minus_c = self.coupling_x(x_new)?.neg();
        let bt_y = self.b.matvec_t(state.y.as_slice())?;
        let bt_r = self.b.matvec_t(ax_minus_c.as_slice())?;
        let rhs = (0..self.r.len())
            .map(|i| -self.r[i] - bt_y[i] - params.rho * bt_r[i] + params.rho_z * state.z[i])
            .collect();
        solve_regularized(&self.qz, &self.b, params.rho, params.rho_z, rhs)
    }
}
