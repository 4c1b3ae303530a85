//! Mass transportation front-end.
//!
//! The LP `min <C, X>` over `X e = a, X^T e = b, X >= 0` is split as
//! `X in Delta_x` (row marginals), `Z in Delta_z` (column marginals),
//! `X = Z`. Two solvers share the same loop:
//!
//! * [`Variant::BadmmKL`] couples `X` and `Z` with the generalized KL
//!   divergence, so both subproblems are exponentiated-gradient steps solved
//!   in closed form by a row (resp. column) log-sum-exp;
//! * [`Variant::AdmmEuclidean`] couples them with `||X - Z||^2 / 2`, so both
//!   subproblems are Euclidean projections onto scaled simplices.
//!
//! The KL iterates are carried in log domain ([`PositiveMatrix`]): with
//! `rho = 1e-3` the exponents `C_ij / rho` reach the hundreds and the linear
//! weights underflow.

use std::time::Instant;

use crate::config::{SolverConfig, StepParams, Variant};
use crate::divergence::{kl_from_logs, DivergenceSpec};
use crate::error::{Error, Result};
use crate::fastmath::{self, wide_dispatch};
use crate::framework::{SplitDims, SplitProblem, SplitState};
use crate::linalg::{frobenius_distance, Matrix, Vector};
use crate::problem::{IterateState, TransportProblem};
use crate::projection::project_simplex_into;
use crate::trace::{TerminationReason, Trace, TraceRecord};

/// A strictly positive matrix held together with its elementwise logarithm.
///
/// The logarithms are authoritative; `values` may underflow to zero where
/// `logs` is very negative.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveMatrix {
    values: Matrix,
    logs: Matrix,
}

impl PositiveMatrix {
    pub fn from_values(values: Matrix) -> Result<Self> {
        if let Some(index) = values.as_slice().iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Domain(format!(
                "entry {index} = {} must be positive",
                values.as_slice()[index]
            )));
        }
        let logs = Matrix::from_parts_unchecked(
            values.rows(),
            values.cols(),
            values.as_slice().iter().map(|v| v.ln()).collect(),
        );
        Ok(PositiveMatrix { values, logs })
    }

    pub fn from_logs(logs: Matrix) -> Self {
        let values = Matrix::from_parts_unchecked(
            logs.rows(),
            logs.cols(),
            logs.as_slice().iter().map(|v| v.exp()).collect(),
        );
        PositiveMatrix { values, logs }
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn logs(&self) -> &Matrix {
        &self.logs
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    fn blank(rows: usize, cols: usize) -> Self {
        PositiveMatrix {
            values: Matrix::from_parts_unchecked(rows, cols, vec![0.0; rows * cols]),
            logs: Matrix::from_parts_unchecked(rows, cols, vec![0.0; rows * cols]),
        }
    }
}

/// Iterate of the KL variant.
#[derive(Debug, Clone, PartialEq)]
pub struct KlState {
    pub x: PositiveMatrix,
    pub z: PositiveMatrix,
    pub y: Matrix,
    pub t: usize,
}

impl KlState {
    pub fn from_iterate(state: &IterateState) -> Result<Self> {
        Ok(KlState {
            x: PositiveMatrix::from_values(state.x.clone())?,
            z: PositiveMatrix::from_values(state.z.clone())?,
            y: state.y.clone(),
            t: state.t,
        })
    }

    pub fn to_iterate(&self) -> IterateState {
        IterateState {
            x: self.x.values.clone(),
            z: self.z.values.clone(),
            y: self.y.clone(),
            t: self.t,
        }
    }
}

fn check_shape(problem: &TransportProblem, m: &Matrix) -> Result<()> {
    let expected = (problem.rows(), problem.cols());
    if m.shape() == expected {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            left: m.shape(),
            right: expected,
        })
    }
}

/// Writes `out_log = log_mass + t - lse(t)` and `out_val = exp(out_log)`,
/// leaving `sum(out_val) = mass` up to rounding.
#[inline(always)]
fn normalize_log_row(t: &[f64], log_mass: f64, mass: f64, out_log: &mut [f64], out_val: &mut [f64]) {
    let max = t.iter().fold(f64::NEG_INFINITY, |m, &v| if v > m { v } else { m });
    for (o, &v) in out_val.iter_mut().zip(t) {
        *o = fastmath::exp(v - max);
    }
    let sum = fastmath::sum(out_val);
    let shift = max + sum.ln() - log_mass;
    let scale = mass / sum;
    for ((ol, ov), &v) in out_log.iter_mut().zip(out_val.iter_mut()).zip(t) {
        *ol = v - shift;
        *ov *= scale;
    }
}

wide_dispatch! {
    /// Row-wise closed form of
    /// `argmin_{X in Delta_x} <C + Y, X> + rho KL(X, Z) + rho_x KL(X, X_t)`.
    fn kl_x_kernel => kl_x_body(
        problem: &TransportProblem,
        log_z: &[f64],
        log_x_prev: &[f64],
        y: &[f64],
        params: &StepParams,
        out: &mut PositiveMatrix,
        row: &mut [f64],
    ) -> XSums
}

#[inline(always)]
fn kl_x_body(
    problem: &TransportProblem,
    log_z: &[f64],
    log_x_prev: &[f64],
    y: &[f64],
    params: &StepParams,
    out: &mut PositiveMatrix,
    row: &mut [f64],
) -> XSums {
    let n = problem.cols();
    let cost = problem.cost().as_slice();
    let mut sums = XSums::default();
    let inv = 1.0 / (params.rho + params.rho_x);
    let (wz, wx) = (params.rho * inv, params.rho_x * inv);
    let out_logs = out.logs.as_mut_slice();
    let out_vals = out.values.as_mut_slice();
    for (i, &ai) in problem.a().iter().enumerate() {
        let span = i * n..(i + 1) * n;
        let (lz, c, yy) = (&log_z[span.clone()], &cost[span.clone()], &y[span.clone()]);
        if params.rho_x > 0.0 {
            let lx = &log_x_prev[span.clone()];
            for j in 0..n {
                row[j] = wz * lz[j] + wx * lx[j] - (c[j] + yy[j]) * inv;
            }
        } else {
            for j in 0..n {
                row[j] = lz[j] - (c[j] + yy[j]) * inv;
            }
        }
        let (xl, xv) = (&mut out_logs[span.clone()], &mut out_vals[span]);
        normalize_log_row(row, ai.ln(), ai, xl, xv);
        // The row is still cache-resident: accumulate <C, X+> and
        // sum X+ (ln X+ - ln Z) here instead of in a later full pass.
        for j in 0..n {
            sums.objective += c[j] * xv[j];
            sums.cross_entropy += xv[j] * (xl[j] - lz[j]);
            sums.mass += xv[j];
        }
    }
    sums
}

#[derive(Default)]
struct XSums {
    objective: f64,
    cross_entropy: f64,
    mass: f64,
}

/// Dual step fused into the z-update: `Y += tau (X+ - Z+)` while each row of
/// `Z+` is cache-resident.
struct DualStep<'a> {
    x_new: &'a [f64],
    z_prev: &'a [f64],
    tau: f64,
}

/// `||X+ - Z+||^2`, `||Z+ - Z||^2` and `sum Z`, from a fused dual step.
#[derive(Default, Clone, Copy)]
struct DualSums {
    primal: f64,
    dual: f64,
    z_prev_mass: f64,
}

wide_dispatch! {
    /// Column-wise closed form of
    /// `argmin_{Z in Delta_z} -<Y, Z> + rho KL(Z, X+) + rho_z KL(Z, Z_t)`,
    /// optionally followed by the dual step. `y` is only written when
    /// `dual` is given.
    #[allow(clippy::too_many_arguments)]
    fn kl_z_kernel => kl_z_body(
        problem: &TransportProblem,
        log_x_new: &[f64],
        log_z_prev: &[f64],
        y: &mut [f64],
        dual: Option<DualStep<'_>>,
        params: &StepParams,
        out: &mut PositiveMatrix,
        col_shift: &mut [f64],
        col_sum: &mut [f64],
    ) -> DualSums
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn kl_z_body(
    problem: &TransportProblem,
    log_x_new: &[f64],
    log_z_prev: &[f64],
    y: &mut [f64],
    dual: Option<DualStep<'_>>,
    params: &StepParams,
    out: &mut PositiveMatrix,
    col_shift: &mut [f64],
    col_sum: &mut [f64],
) -> DualSums {
    let n = problem.cols();
    let inv = 1.0 / (params.rho + params.rho_z);
    let (wx, wz) = (params.rho * inv, params.rho_z * inv);
    let out_logs = out.logs.as_mut_slice();
    let out_vals = out.values.as_mut_slice();

    // Exponent u of the unnormalized update, and its column maxima.
    col_shift.fill(f64::NEG_INFINITY);
    for (i, row_u) in out_logs.chunks_exact_mut(n).enumerate() {
        let span = i * n..(i + 1) * n;
        let (lx, yy) = (&log_x_new[span.clone()], &y[span.clone()]);
        if params.rho_z > 0.0 {
            let lz = &log_z_prev[span];
            for j in 0..n {
                row_u[j] = wx * lx[j] + wz * lz[j] + yy[j] * inv;
            }
        } else {
            for j in 0..n {
                row_u[j] = lx[j] + yy[j] * inv;
            }
        }
        for (m, &u) in col_shift.iter_mut().zip(row_u.iter()) {
            if u > *m {
                *m = u;
            }
        }
    }
    col_sum.fill(0.0);
    for row_u in out_logs.chunks_exact(n) {
        for j in 0..n {
            col_sum[j] += fastmath::exp(row_u[j] - col_shift[j]);
        }
    }
    let b = problem.b().as_slice();
    for j in 0..n {
        col_shift[j] += col_sum[j].ln() - b[j].ln();
    }

    let mut sums = DualSums::default();
    for (i, (row_u, row_z)) in out_logs
        .chunks_exact_mut(n)
        .zip(out_vals.chunks_exact_mut(n))
        .enumerate()
    {
        for j in 0..n {
            let l = row_u[j] - col_shift[j];
            row_u[j] = l;
            row_z[j] = fastmath::exp(l);
        }
        if let Some(step) = &dual {
            let span = i * n..(i + 1) * n;
            let row = dual_row(
                &step.x_new[span.clone()],
                row_z,
                &step.z_prev[span.clone()],
                &mut y[span],
                step.tau,
            );
            sums.primal += row.primal;
            sums.dual += row.dual;
            sums.z_prev_mass += row.z_prev_mass;
        }
    }
    sums
}

#[inline(always)]
fn dual_row(xv: &[f64], zv: &[f64], zpv: &[f64], y: &mut [f64], tau: f64) -> DualSums {
    const LANES: usize = 4;
    let (mut primal, mut dual, mut mass) = ([0.0f64; LANES], [0.0f64; LANES], [0.0f64; LANES]);
    let len = y.len();
    let body = len - len % LANES;
    for k0 in (0..body).step_by(LANES) {
        for l in 0..LANES {
            let k = k0 + l;
            let d = xv[k] - zv[k];
            let dz = zv[k] - zpv[k];
            primal[l] += d * d;
            dual[l] += dz * dz;
            mass[l] += zpv[k];
            y[k] += tau * d;
        }
    }
    for k in body..len {
        let d = xv[k] - zv[k];
        let dz = zv[k] - zpv[k];
        primal[0] += d * d;
        dual[0] += dz * dz;
        mass[0] += zpv[k];
        y[k] += tau * d;
    }
    let fold = |a: [f64; LANES]| (a[0] + a[1]) + (a[2] + a[3]);
    DualSums {
        primal: fold(primal),
        dual: fold(dual),
        z_prev_mass: fold(mass),
    }
}

/// KL x-update: `X+_ij = a_i W_ij / sum_k W_ik` with
/// `W = Z^(rho/(rho+rho_x)) X_t^(rho_x/(rho+rho_x)) exp(-(C + Y)/(rho+rho_x))`.
/// With `rho_x = 0` this is `a_i Z_ij exp(-(C_ij + Y_ij)/rho)` normalized per row.
pub fn badmm_x_update(
    problem: &TransportProblem,
    state: &KlState,
    params: &StepParams,
) -> Result<PositiveMatrix> {
    check_params(params)?;
    check_shape(problem, state.z.values())?;
    check_shape(problem, &state.y)?;
    let mut out = PositiveMatrix::blank(problem.rows(), problem.cols());
    let mut row = vec![0.0; problem.cols()];
    kl_x_kernel(
        problem,
        state.z.logs.as_slice(),
        state.x.logs.as_slice(),
        state.y.as_slice(),
        params,
        &mut out,
        &mut row,
    );
    Ok(out)
}

/// KL z-update: `Z+_ij = b_j V_ij / sum_k V_kj` with
/// `V = X+^(rho/(rho+rho_z)) Z_t^(rho_z/(rho+rho_z)) exp(Y/(rho+rho_z))`.
pub fn badmm_z_update(
    problem: &TransportProblem,
    state: &KlState,
    x_new: &PositiveMatrix,
    params: &StepParams,
) -> Result<PositiveMatrix> {
    check_params(params)?;
    check_shape(problem, x_new.values())?;
    check_shape(problem, &state.y)?;
    let mut out = PositiveMatrix::blank(problem.rows(), problem.cols());
    let mut col_shift = vec![0.0; problem.cols()];
    let mut col_sum = vec![0.0; problem.cols()];
    let mut y = state.y.as_slice().to_vec();
    kl_z_kernel(
        problem,
        x_new.logs.as_slice(),
        state.z.logs.as_slice(),
        &mut y,
        None,
        params,
        &mut out,
        &mut col_shift,
        &mut col_sum,
    );
    Ok(out)
}

/// Lyapunov distance of the KL variant, evaluated from logarithms so entries
/// that have underflowed in linear scale still contribute correctly:
///
/// ```text
/// D(w*, w) = ||Y* - Y||_F^2 / (2 tau rho) + KL(Z*, Z)
///          + (rho_x/rho) KL(X*, X) + (rho_z/rho) KL(Z*, Z)
/// ```
pub fn lyapunov_d_kl(reference: &KlState, state: &KlState, params: &StepParams) -> Result<f64> {
    check_params(params)?;
    for (a, b) in [
        (reference.x.values(), state.x.values()),
        (reference.z.values(), state.z.values()),
        (&reference.y, &state.y),
    ] {
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch {
                left: a.shape(),
                right: b.shape(),
            });
        }
    }
    let dy = frobenius_distance(reference.y.as_slice(), state.y.as_slice());
    let kl = |r: &PositiveMatrix, s: &PositiveMatrix| {
        kl_from_logs(
            r.values.as_slice(),
            r.logs.as_slice(),
            s.values.as_slice(),
            s.logs.as_slice(),
        )
    };
    let kl_z = kl(&reference.z, &state.z);
    let mut total = dy * dy / (2.0 * params.tau * params.rho) + kl_z;
    if params.rho_x > 0.0 {
        total += params.rho_x / params.rho * kl(&reference.x, &state.x);
    }
    if params.rho_z > 0.0 {
        total += params.rho_z / params.rho * kl_z;
    }
    Ok(total)
}

/// `Y + tau (X+ - Z+)`.
pub fn dual_update(y: &Matrix, x_new: &Matrix, z_new: &Matrix, tau: f64) -> Result<Matrix> {
    for m in [x_new, z_new] {
        if m.shape() != y.shape() {
            return Err(Error::ShapeMismatch {
                left: m.shape(),
                right: y.shape(),
            });
        }
    }
    Matrix::new(
        y.rows(),
        y.cols(),
        y.as_slice()
            .iter()
            .zip(x_new.as_slice())
            .zip(z_new.as_slice())
            .map(|((yy, x), z)| yy + tau * (x - z))
            .collect(),
    )
}

#[allow(clippy::too_many_arguments)]
fn admm_x_kernel(
    problem: &TransportProblem,
    z: &[f64],
    x_prev: &[f64],
    y: &[f64],
    params: &StepParams,
    out: &mut [f64],
    row: &mut [f64],
    scratch: &mut Vec<f64>,
) -> Result<()> {
    let n = problem.cols();
    let cost = problem.cost().as_slice();
    let denom = params.rho + params.rho_x;
    for (i, &ai) in problem.a().iter().enumerate() {
        let base = i * n;
        for (j, r) in row.iter_mut().enumerate() {
            let k = base + j;
            *r = (params.rho * z[k] + params.rho_x * x_prev[k] - cost[k] - y[k]) / denom;
        }
        project_simplex_into(row, ai, &mut out[base..base + n], scratch)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn admm_z_kernel(
    problem: &TransportProblem,
    x_new: &[f64],
    z_prev: &[f64],
    y: &[f64],
    params: &StepParams,
    out: &mut [f64],
    col: &mut [f64],
    col_out: &mut [f64],
    scratch: &mut Vec<f64>,
) -> Result<()> {
    let (m, n) = (problem.rows(), problem.cols());
    let denom = params.rho + params.rho_z;
    for (j, &bj) in problem.b().iter().enumerate() {
        for (i, c) in col[..m].iter_mut().enumerate() {
            let k = i * n + j;
            *c = (params.rho * x_new[k] + params.rho_z * z_prev[k] + y[k]) / denom;
        }
        project_simplex_into(col, bj, col_out, scratch)?;
        for i in 0..m {
            out[i * n + j] = col_out[i];
        }
    }
    Ok(())
}

/// Euclidean x-update: row `i` of `X+` is the projection of
/// `(rho Z_i + rho_x X_i - C_i - Y_i) / (rho + rho_x)` onto the simplex of
/// mass `a_i`.
pub fn admm_x_update(
    problem: &TransportProblem,
    state: &IterateState,
    params: &StepParams,
) -> Result<Matrix> {
    check_params(params)?;
    for m in [&state.x, &state.z, &state.y] {
        check_shape(problem, m)?;
    }
    let mut out = vec![0.0; problem.rows() * problem.cols()];
    admm_x_kernel(
        problem,
        state.z.as_slice(),
        state.x.as_slice(),
        state.y.as_slice(),
        params,
        &mut out,
        &mut vec![0.0; problem.cols()],
        &mut Vec::new(),
    )?;
    Matrix::new(problem.rows(), problem.cols(), out)
}

/// Euclidean z-update: column `j` of `Z+` is the projection of
/// `(rho X+_j + rho_z Z_j + Y_j) / (rho + rho_z)` onto the simplex of mass
/// `b_j`.
pub fn admm_z_update(
    problem: &TransportProblem,
    state: &IterateState,
    x_new: &Matrix,
    params: &StepParams,
) -> Result<Matrix> {
    check_params(params)?;
    for m in [x_new, &state.z, &state.y] {
        check_shape(problem, m)?;
    }
    let mut out = vec![0.0; problem.rows() * problem.cols()];
    admm_z_kernel(
        problem,
        x_new.as_slice(),
        state.z.as_slice(),
        state.y.as_slice(),
        params,
        &mut out,
        &mut vec![0.0; problem.rows()],
        &mut vec![0.0; problem.rows()],
        &mut Vec::new(),
    )?;
    Matrix::new(problem.rows(), problem.cols(), out)
}

/// `<C, X> = sum_ij C_ij X_ij`.
pub fn objective(problem: &TransportProblem, x: &Matrix) -> Result<f64> {
    check_shape(problem, x)?;
    Ok(problem
        .cost()
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(c, v)| c * v)
        .sum())
}

fn check_params(params: &StepParams) -> Result<()> {
    if !(params.rho > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: params.rho,
            reason: "must be positive",
        });
    }
    if !(params.rho_x >= 0.0 && params.rho_z >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho_x/rho_z",
            value: params.rho_x.min(params.rho_z),
            reason: "must be nonnegative",
        });
    }
    Ok(())
}

/// Quantities measured by one sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub iter: usize,
    pub objective: f64,
    /// `||X+ - Z+||_F`.
    pub primal_residual: f64,
    /// `rho ||Z+ - Z||_F`.
    pub dual_residual: f64,
    pub r_residual: f64,
}

#[derive(Debug, Clone)]
enum Primal {
    Kl {
        x: PositiveMatrix,
        z: PositiveMatrix,
        x_next: PositiveMatrix,
        z_next: PositiveMatrix,
    },
    Euclidean {
        x: Matrix,
        z: Matrix,
        x_next: Matrix,
        z_next: Matrix,
    },
}

/// Stepwise driver for either transport variant.
#[derive(Debug, Clone)]
pub struct TransportSolver<'a> {
    problem: &'a TransportProblem,
    params: StepParams,
    variant: Variant,
    primal: Primal,
    y: Matrix,
    t: usize,
    row: Vec<f64>,
    col_a: Vec<f64>,
    col_b: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> TransportSolver<'a> {
    /// Starts from [`IterateState::initial`].
    pub fn new(problem: &'a TransportProblem, config: &SolverConfig) -> Result<Self> {
        Self::from_state(problem, config, IterateState::initial(problem))
    }

    pub fn from_state(
        problem: &'a TransportProblem,
        config: &SolverConfig,
        state: IterateState,
    ) -> Result<Self> {
        let params = config.step_params()?;
        Self::with_params(problem, config.variant, params, state)
    }

    pub fn with_params(
        problem: &'a TransportProblem,
        variant: Variant,
        params: StepParams,
        state: IterateState,
    ) -> Result<Self> {
        check_params(&params)?;
        for m in [&state.x, &state.z, &state.y] {
            check_shape(problem, m)?;
        }
        let (rows, cols) = (problem.rows(), problem.cols());
        let primal = match variant {
            Variant::BadmmKL => Primal::Kl {
                x: PositiveMatrix::from_values(state.x)?,
                z: PositiveMatrix::from_values(state.z)?,
                x_next: PositiveMatrix::blank(rows, cols),
                z_next: PositiveMatrix::blank(rows, cols),
            },
            Variant::AdmmEuclidean => Primal::Euclidean {
                x_next: state.x.clone(),
                z_next: state.z.clone(),
                x: state.x,
                z: state.z,
            },
        };
        Ok(TransportSolver {
            problem,
            params,
            variant,
            primal,
            y: state.y,
            t: state.t,
            row: vec![0.0; cols],
            col_a: vec![0.0; rows.max(cols)],
            col_b: vec![0.0; rows.max(cols)],
            scratch: Vec::new(),
        })
    }

    pub fn params(&self) -> &StepParams {
        &self.params
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn x(&self) -> &Matrix {
        match &self.primal {
            Primal::Kl { x, .. } => x.values(),
            Primal::Euclidean { x, .. } => x,
        }
    }

    pub fn z(&self) -> &Matrix {
        match &self.primal {
            Primal::Kl { z, .. } => z.values(),
            Primal::Euclidean { z, .. } => z,
        }
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn state(&self) -> IterateState {
        IterateState {
            x: self.x().clone(),
            z: self.z().clone(),
            y: self.y.clone(),
            t: self.t,
        }
    }

    /// Log-domain iterate; `None` for the Euclidean variant.
    pub fn kl_state(&self) -> Option<KlState> {
        match &self.primal {
            Primal::Kl { x, z, .. } => Some(KlState {
                x: x.clone(),
                z: z.clone(),
                y: self.y.clone(),
                t: self.t,
            }),
            Primal::Euclidean { .. } => None,
        }
    }

    /// One x-z-y sweep.
    pub fn step(&mut self) -> Result<StepReport> {
        let p = self.params;
        let problem = self.problem;
        let cost = problem.cost().as_slice();
        let mut acc = Sums::default();
        match &mut self.primal {
            Primal::Kl {
                x,
                z,
                x_next,
                z_next,
            } => {
                let xs = kl_x_kernel(
                    problem,
                    z.logs.as_slice(),
                    x.logs.as_slice(),
                    self.y.as_slice(),
                    &p,
                    x_next,
                    &mut self.row,
                );
                let ds = kl_z_kernel(
                    problem,
                    x_next.logs.as_slice(),
                    z.logs.as_slice(),
                    self.y.as_mut_slice(),
                    Some(DualStep {
                        x_new: x_next.values.as_slice(),
                        z_prev: z.values.as_slice(),
                        tau: p.tau,
                    }),
                    &p,
                    z_next,
                    &mut self.col_a[..problem.cols()],
                    &mut self.col_b[..problem.cols()],
                );
                let (xv, xl) = (x_next.values.as_slice(), x_next.logs.as_slice());
                let (zv, zl) = (z_next.values.as_slice(), z_next.logs.as_slice());
                let (zpv, zpl) = (z.values.as_slice(), z.logs.as_slice());
                acc.primal = ds.primal;
                acc.dual = ds.dual;
                acc.objective = xs.objective;
                acc.coupling = xs.cross_entropy - xs.mass + ds.z_prev_mass;
                if p.rho_x > 0.0 {
                    acc.prox_x = kl_from_logs(xv, xl, x.values.as_slice(), x.logs.as_slice());
                }
                if p.rho_z > 0.0 {
                    acc.prox_z = kl_from_logs(zv, zl, zpv, zpl);
                }
                std::mem::swap(x, x_next);
                std::mem::swap(z, z_next);
            }
            Primal::Euclidean {
                x,
                z,
                x_next,
                z_next,
            } => {
                admm_x_kernel(
                    problem,
                    z.as_slice(),
                    x.as_slice(),
                    self.y.as_slice(),
                    &p,
                    x_next.as_mut_slice(),
                    &mut self.row,
                    &mut self.scratch,
                )?;
                let m = problem.rows();
                admm_z_kernel(
                    problem,
                    x_next.as_slice(),
                    z.as_slice(),
                    self.y.as_slice(),
                    &p,
                    z_next.as_mut_slice(),
                    &mut self.col_a[..m],
                    &mut self.col_b[..m],
                    &mut self.scratch,
                )?;
                let (xv, zv, zpv) = (x_next.as_slice(), z_next.as_slice(), z.as_slice());
                let y = self.y.as_mut_slice();
                for k in 0..y.len() {
                    let d = xv[k] - zv[k];
                    let dz = zv[k] - zpv[k];
                    let dc = xv[k] - zpv[k];
                    acc.primal += d * d;
                    acc.dual += dz * dz;
                    acc.objective += cost[k] * xv[k];
                    acc.coupling += 0.5 * dc * dc;
                    y[k] += p.tau * d;
                }
                if p.rho_x > 0.0 {
                    acc.prox_x = 0.5 * frobenius_distance(xv, x.as_slice()).powi(2);
                }
                if p.rho_z > 0.0 {
                    acc.prox_z = 0.5 * acc.dual;
                }
                std::mem::swap(x, x_next);
                std::mem::swap(z, z_next);
            }
        }
        self.t += 1;
        Ok(StepReport {
            iter: self.t,
            objective: acc.objective,
            primal_residual: acc.primal.sqrt(),
            dual_residual: p.rho * acc.dual.sqrt(),
            r_residual: (p.rho_x / p.rho) * acc.prox_x
                + (p.rho_z / p.rho) * acc.prox_z
                + acc.coupling.max(0.0)
                + p.gamma * acc.primal,
        })
    }
}

#[derive(Default)]
struct Sums {
    primal: f64,
    dual: f64,
    objective: f64,
    coupling: f64,
    prox_x: f64,
    prox_z: f64,
}

/// Result of [`solve`].
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub state: IterateState,
    pub trace: Trace,
    pub reason: TerminationReason,
}

impl SolveOutcome {
    pub fn iterations(&self) -> usize {
        self.state.t
    }

    pub fn objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn elapsed_sec(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.elapsed_sec)
    }
}

/// Runs the configured variant until `max(primal, dual) <= tol` or
/// `max_iters` sweeps, timing from solver entry with a monotonic clock.
/// An infinite `tol` disables the residual test.
pub fn solve(problem: &TransportProblem, config: &SolverConfig) -> Result<SolveOutcome> {
    let start = Instant::now();
    solve_with_clock(problem, config, || start.elapsed().as_secs_f64())
}

/// [`solve`] with a caller-supplied clock returning elapsed seconds.
pub fn solve_with_clock(
    problem: &TransportProblem,
    config: &SolverConfig,
    mut clock: impl FnMut() -> f64,
) -> Result<SolveOutcome> {
    let mut solver = TransportSolver::new(problem, config)?;
    let mut trace = Trace::new();
    let mut reason = TerminationReason::IterationLimit;
    let mut last_time = 0.0f64;
    for _ in 0..config.max_iters {
        let report = solver.step()?;
        last_time = last_time.max(clock());
        trace.push(TraceRecord {
            iter: report.iter,
            elapsed_sec: last_time,
            objective: report.objective,
            primal_residual: report.primal_residual,
            dual_residual: report.dual_residual,
            r_residual: report.r_residual,
        })?;
        if config.tol.is_finite() && report.primal_residual.max(report.dual_residual) <= config.tol {
            reason = TerminationReason::Converged;
            break;
        }
    }
    Ok(SolveOutcome {
        state: solver.state(),
        trace,
        reason,
    })
}

/// The transport LP as a [`SplitProblem`] over row-major vectorized
/// `x = vec(X)`, `z = vec(Z)`, `y = vec(Y)`.
///
/// Constraint `X - Z = 0` (`A = I`, `B = -I`, `c = 0`). The coupling
/// divergence sees `(X, Z)` directly: the reflected arguments `-(c - A x)`
/// and `-B z`, which is how the negative-entropy generator is defined on the
/// positive orthant.
#[derive(Debug, Clone)]
pub struct TransportSplit {
    problem: TransportProblem,
    variant: Variant,
}

impl TransportSplit {
    pub fn new(problem: TransportProblem, variant: Variant) -> Self {
        TransportSplit { problem, variant }
    }

    pub fn problem(&self) -> &TransportProblem {
        &self.problem
    }

    fn matrix(&self, v: &Vector) -> Result<Matrix> {
        Matrix::from_vector(self.problem.rows(), self.problem.cols(), v.clone())
    }

    fn divergence(&self) -> DivergenceSpec {
        match self.variant {
            Variant::BadmmKL => DivergenceSpec::generalized_kl(),
            Variant::AdmmEuclidean => DivergenceSpec::squared_euclidean(),
        }
    }

    /// Vectorized [`IterateState`].
    pub fn split_state(state: &IterateState) -> SplitState {
        SplitState {
            x: state.x.to_vector(),
            z: state.z.to_vector(),
            y: state.y.to_vector(),
            t: state.t,
        }
    }

    pub fn iterate_state(&self, state: &SplitState) -> Result<IterateState> {
        Ok(IterateState {
            x: self.matrix(&state.x)?,
            z: self.matrix(&state.z)?,
            y: self.matrix(&state.y)?,
            t: state.t,
        })
    }
}

impl SplitProblem for TransportSplit {
    fn dims(&self) -> SplitDims {
        let len = self.problem.rows() * self.problem.cols();
        SplitDims {
            n1: len,
            n2: len,
            m: len,
        }
    }

    fn f_value(&self, x: &Vector) -> f64 {
        self.problem
            .cost()
            .as_slice()
            .iter()
            .zip(x.iter())
            .map(|(c, v)| c * v)
            .sum()
    }

    fn g_value(&self, _z: &Vector) -> f64 {
        0.0
    }

    fn constraint_residual(&self, x: &Vector, z: &Vector) -> Result<Vector> {
        x.sub(z)
    }

    fn coupling_x(&self, x: &Vector) -> Result<Vector> {
        Ok(x.clone())
    }

    fn coupling_z(&self, z: &Vector) -> Result<Vector> {
        Ok(z.clone())
    }

    fn coupling_divergence(&self) -> DivergenceSpec {
        self.divergence()
    }

    fn prox_divergence_x(&self) -> DivergenceSpec {
        self.divergence()
    }

    fn prox_divergence_z(&self) -> DivergenceSpec {
        self.divergence()
    }

    fn solve_x(&self, state: &SplitState, params: &StepParams) -> Result<Vector> {
        let it = self.iterate_state(state)?;
        match self.variant {
            Variant::BadmmKL => {
                let kl = KlState::from_iterate(&it)?;
                Ok(badmm_x_update(&self.problem, &kl, params)?
                    .into_values()
                    .into_vector())
            }
            Variant::AdmmEuclidean => {
                Ok(admm_x_update(&self.problem, &it, params)?.into_vector())
            }
        }
    }

    fn solve_z(&self, x_new: &Vector, state: &SplitState, params: &StepParams) -> Result<Vector> {
        let it = self.iterate_state(state)?;
        let x_new = self.matrix(x_new)?;
        match self.variant {
            Variant::BadmmKL => {
                let kl = KlState::from_iterate(&it)?;
                let x_new = PositiveMatrix::from_values(x_new)?;
                Ok(badmm_z_update(&self.problem, &kl, &x_new, params)?
                    .into_values()
                    .into_vector())
            }
            Variant::AdmmEuclidean => {
                Ok(admm_z_update(&self.problem, &it, &x_new, params)?.into_vector())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::uniform_cost_matrix;

    fn params(rho: f64) -> StepParams {
        StepParams::exact(rho)
    }

    fn two_by_two() -> TransportProblem {
        let c = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        TransportProblem::assignment(c).unwrap()
    }

    #[test]
    fn kl_x_update_two_by_two() {
        let problem = two_by_two();
        let state = KlState::from_iterate(&IterateState::initial(&problem)).unwrap();
        let x = badmm_x_update(&problem, &state, &params(1.0)).unwrap();
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((x.values().get(0, 0) - expected).abs() < 1e-15);
        assert!((x.values().get(0, 1) - (1.0 - expected)).abs() < 1e-15);
        assert!((x.values().get(0, 0) - 0.731059).abs() < 1e-6);
    }

    #[test]
    fn zero_cost_x_update_is_row_rescaling() {
        let c = Matrix::zeros(2, 3).unwrap();
        let a = Vector::new(vec![1.0, 2.0]).unwrap();
        let b = Vector::new(vec![0.5, 1.5, 1.0]).unwrap();
        let problem = TransportProblem::new(c, a, b).unwrap();
        let z = Matrix::from_rows(&[vec![0.1, 0.2, 0.3], vec![1.0, 2.0, 1.0]]).unwrap();
        let state = KlState {
            x: PositiveMatrix::from_values(z.clone()).unwrap(),
            z: PositiveMatrix::from_values(z.clone()).unwrap(),
            y: Matrix::zeros(2, 3).unwrap(),
            t: 0,
        };
        let x = badmm_x_update(&problem, &state, &params(0.7)).unwrap();
        for i in 0..2 {
            let s: f64 = z.row(i).iter().sum();
            for j in 0..3 {
                let expected = problem.a()[i] * z.get(i, j) / s;
                assert!((x.values().get(i, j) - expected).abs() < 1e-14);
            }
        }
        // Y = 0: z-update is a column rescaling of X+
        let zn = badmm_z_update(&problem, &state, &x, &params(0.7)).unwrap();
        let cs = x.values().col_sums();
        for i in 0..2 {
            for (j, s) in cs.iter().enumerate() {
                let expected = problem.b()[j] * x.values().get(i, j) / s;
                assert!((zn.values().get(i, j) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_mass_row_rejected() {
        let z = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(PositiveMatrix::from_values(z).is_err());
    }

    #[test]
    fn log_domain_survives_small_rho() {
        let problem = TransportProblem::assignment(uniform_cost_matrix(5, 5, 3).unwrap()).unwrap();
        let config = SolverConfig {
            rho: 1e-4,
            max_iters: 50,
            ..SolverConfig::default()
        };
        let mut solver = TransportSolver::new(&problem, &config).unwrap();
        for _ in 0..50 {
            let r = solver.step().unwrap();
            assert!(r.objective.is_finite() && r.r_residual.is_finite());
        }
        for s in solver.x().row_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
        for s in solver.z().col_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn admm_projection_examples() {
        let problem = TransportProblem::assignment(Matrix::zeros(1, 1).unwrap()).unwrap();
        let state = IterateState::initial(&problem);
        let x = admm_x_update(&problem, &state, &params(1.0)).unwrap();
        assert_eq!(x.get(0, 0), 1.0);

        // 1x2 with Z - (C + Y)/rho = (2, 0) saturates to (1, 0)
        let c = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let problem = TransportProblem::new(
            c,
            Vector::new(vec![1.0]).unwrap(),
            Vector::new(vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        let state = IterateState {
            x: Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap(),
            z: Matrix::from_rows(&[vec![2.0, 0.0]]).unwrap(),
            y: Matrix::zeros(1, 2).unwrap(),
            t: 0,
        };
        let x = admm_x_update(&problem, &state, &params(1.0)).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn dual_update_cases() {
        let y = Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
        let x = Matrix::from_rows(&[vec![0.3, 0.7]]).unwrap();
        assert_eq!(dual_update(&y, &x, &x, 0.5).unwrap(), y);
        let zero = Matrix::zeros(1, 2).unwrap();
        let e = dual_update(&zero, &x, &zero, 1.0).unwrap();
        assert_eq!(e, x);
        assert!(dual_update(&y, &Matrix::zeros(2, 1).unwrap(), &x, 1.0).is_err());
    }

    #[test]
    fn objective_cases() {
        let problem = two_by_two();
        assert_eq!(objective(&problem, &Matrix::zeros(2, 2).unwrap()).unwrap(), 0.0);
        let c = Matrix::from_rows(&[vec![2.0, 9.0], vec![9.0, 3.0]]).unwrap();
        let problem = TransportProblem::assignment(c).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(objective(&problem, &x).unwrap(), 5.0);
    }

    #[test]
    fn infinite_tol_runs_to_limit() {
        let problem = TransportProblem::assignment(uniform_cost_matrix(3, 3, 1).unwrap()).unwrap();
        let config = SolverConfig {
            tol: f64::INFINITY,
            max_iters: 7,
            ..SolverConfig::default()
        };
        let out = solve(&problem, &config).unwrap();
        assert_eq!(out.reason, TerminationReason::IterationLimit);
        assert_eq!(out.iterations(), 7);
        assert_eq!(out.trace.len(), 7);
    }
}
