//! The mass transportation problem and its random instance generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Relative tolerance on `|sum(a) - sum(b)|`.
pub const MARGINAL_SUM_TOL: f64 = 1e-9;

/// `min <C, X>  s.t.  X e = a,  X^T e = b,  X >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportProblem {
    cost: Matrix,
    row_marginals: Vector,
    col_marginals: Vector,
}

impl TransportProblem {
    pub fn new(cost: Matrix, row_marginals: Vector, col_marginals: Vector) -> Result<Self> {
        if row_marginals.len() != cost.rows() {
            return Err(Error::LengthMismatch {
                expected: cost.rows(),
                actual: row_marginals.len(),
            });
        }
        if col_marginals.len() != cost.cols() {
            return Err(Error::LengthMismatch {
                expected: cost.cols(),
                actual: col_marginals.len(),
            });
        }
        check_positive("a", &row_marginals)?;
        check_positive("b", &col_marginals)?;
        let row_sum = row_marginals.sum();
        let col_sum = col_marginals.sum();
        if (row_sum - col_sum).abs() > MARGINAL_SUM_TOL * row_sum.max(col_sum) {
            return Err(Error::UnbalancedMarginals { row_sum, col_sum });
        }
        Ok(TransportProblem {
            cost,
            row_marginals,
            col_marginals,
        })
    }

    /// Unit marginals `a = e`, `b = e`; requires a square cost matrix.
    pub fn assignment(cost: Matrix) -> Result<Self> {
        let (m, n) = cost.shape();
        if m != n {
            return Err(Error::ShapeMismatch {
                left: (m, n),
                right: (n, m),
            });
        }
        TransportProblem::new(cost, Vector::filled(m, 1.0), Vector::filled(n, 1.0))
    }

    pub fn cost(&self) -> &Matrix {
        &self.cost
    }

    /// Row marginals `a`.
    pub fn a(&self) -> &Vector {
        &self.row_marginals
    }

    /// Column marginals `b`.
    pub fn b(&self) -> &Vector {
        &self.col_marginals
    }

    pub fn rows(&self) -> usize {
        self.cost.rows()
    }

    pub fn cols(&self) -> usize {
        self.cost.cols()
    }
}

/// The transport iterate `(X, Z, Y)` after `t` sweeps.
///
/// After any x-update `X >= 0` with `X e = a`; after any z-update `Z >= 0`
/// with `Z^T e = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: Matrix,
    pub z: Matrix,
    pub y: Matrix,
    pub t: usize,
}

impl IterateState {
    /// `Z0_ij = a_i b_j / sum(b)`, `X0 = Z0`, `Y0 = 0`: strictly positive and
    /// feasible for both marginal constraints.
    pub fn initial(problem: &TransportProblem) -> Self {
        let a = problem.a().as_slice();
        let b = problem.b().as_slice();
        let total: f64 = b.iter().sum();
        let z = Matrix::from_parts_unchecked(
            a.len(),
            b.len(),
            a.iter()
                .flat_map(|&ai| b.iter().map(move |&bj| ai * bj / total))
                .collect(),
        );
        IterateState {
            x: z.clone(),
            y: Matrix::from_parts_unchecked(a.len(), b.len(), vec![0.0; a.len() * b.len()]),
            z,
            t: 0,
        }
    }
}

fn check_positive(which: &'static str, v: &Vector) -> Result<()> {
    match v.iter().position(|&x| x <= 0.0) {
        Some(index) => Err(Error::NonPositiveMarginal {
            which,
            index,
            value: v[index],
        }),
        None => Ok(()),
    }
}

/// Cost matrix with i.i.d. entries uniform on `[0, 1)`.
///
/// Entries are drawn in row-major order from a ChaCha8 stream seeded with
/// `seed` (`rand_chacha::ChaCha8Rng::seed_from_u64`); each draw keeps the 53
/// high bits of a 64-bit output scaled by `2^-53`.
pub fn uniform_cost_matrix(m: usize, n: usize, seed: u64) -> Result<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..m * n).map(|_| rng.random::<f64>()).collect();
    Matrix::new(m, n, data)
}
