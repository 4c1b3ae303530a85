//! Exhaustive assignment oracle for small square cost matrices.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Largest `n` accepted by [`assignment_bruteforce`] (`8! = 40320` permutations).
pub const MAX_ORACLE_N: usize = 8;

/// Optimal permutation `pi` (row `i` assigned to column `pi[i]`) and its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub permutation: Vec<usize>,
    pub value: f64,
}

/// Minimizes `sum_i C[i, pi(i)]` over all permutations.
///
/// Permutations are visited in lexicographic order and only a strict
/// improvement replaces the incumbent, so ties resolve to the
/// lexicographically smallest minimizer.
pub fn assignment_bruteforce(cost: &Matrix) -> Result<Assignment> {
    let (m, n) = cost.shape();
    if m != n {
        return Err(Error::ShapeMismatch {
            left: (m, n),
            right: (n, n),
        });
    }
    if n > MAX_ORACLE_N {
        return Err(Error::OracleTooLarge { n, max: MAX_ORACLE_N });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = Assignment {
        value: assignment_cost(cost, &perm),
        permutation: perm.clone(),
    };
    while next_permutation(&mut perm) {
        let v = assignment_cost(cost, &perm);
        if v < best.value {
            best.value = v;
            best.permutation.copy_from_slice(&perm);
        }
    }
    Ok(best)
}

/// `sum_i C[i, perm[i]]`.
pub fn assignment_cost(cost: &Matrix, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum()
}

/// Advances to the next permutation in lexicographic order; `false` after the last.
fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
