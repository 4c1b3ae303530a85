//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use badmm::{IterateState, Matrix, StepParams, TransportProblem, Vector};
use rand::{Rng, SeedableRng};

/// Error-free addition: `a + b = s + e` exactly.
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Sum carried in double-double precision.
pub fn accurate_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut hi, mut lo) = (0.0, 0.0);
    for v in values {
        let (s, e) = two_sum(hi, v);
        hi = s;
        lo += e;
    }
    hi + lo
}

pub fn accurate_dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    // products are rounded once each; the sum is compensated
    accurate_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Least-squares slope of `ln y` against `ln t`.
pub fn loglog_slope(ts: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(ts.len(), ys.len());
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Euclidean projection onto `{w >= 0, sum w = r}` by enumerating supports:
/// on a fixed support `S` the minimizer is `v_S - theta` with
/// `theta = (sum v_S - r) / |S|`; the answer is the best feasible candidate.
pub fn project_simplex_enumerate(v: &[f64], r: f64) -> Vec<f64> {
    let d = v.len();
    assert!(d <= 16);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let size = mask.count_ones() as f64;
        let sum: f64 = (0..d).filter(|i| mask >> i & 1 == 1).map(|i| v[i]).sum();
        let theta = (sum - r) / size;
        let w: Vec<f64> = (0..d)
            .map(|i| if mask >> i & 1 == 1 { v[i] - theta } else { 0.0 })
            .collect();
        if w.iter().any(|x| *x < -1e-12) {
            continue;
        }
        let dist: f64 = w.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            best = Some((dist, w));
        }
    }
    best.expect("the full support is always feasible after clipping").1
}

/// Minimizes a smooth strictly convex `f` over `{w > 0, sum w = mass}` by
/// gradient descent on softmax coordinates with backtracking.
/// `grad` returns the gradient of `f` in the original coordinates.
pub fn minimize_on_simplex(
    dim: usize,
    mass: f64,
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
) -> Vec<f64> {
    let point = |theta: &[f64]| -> Vec<f64> {
        let m = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = theta.iter().map(|t| (t - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|v| mass * v / s).collect()
    };
    let mut theta = vec![0.0; dim];
    let mut step = 1.0;
    for _ in 0..200_000 {
        let w = point(&theta);
        let g = grad(&w);
        let mean = w.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / mass;
        let gt: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi * (gi - mean)).collect();
        let norm2: f64 = gt.iter().map(|v| v * v).sum();
        if norm2.sqrt() < 1e-14 {
            break;
        }
        let f0 = f(&w);
        step *= 2.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(&gt).map(|(t, d)| t - step * d).collect();
            if f(&point(&cand)) <= f0 - 0.25 * step * norm2 || step < 1e-18 {
                theta = cand;
                break;
            }
            step *= 0.5;
        }
    }
    point(&theta)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random strongly convex quadratic split with `n` variables per block and
/// `n` coupling constraints, with its exact KKT point `(x*, z*, y*)`.
pub struct QuadraticInstance {
    pub problem: badmm::framework::QuadraticSplit,
    pub kkt: (Vec<f64>, Vec<f64>, Vec<f64>),
}

pub fn quadratic_instance(n: usize, seed: u64) -> QuadraticInstance {
    use nalgebra::{DMatrix, DVector};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut rand_mat = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let mp = rand_mat(n, n);
    let mq = rand_mat(n, n);
    let p = mp.transpose() * &mp + DMatrix::identity(n, n) * 0.5;
    let qz = mq.transpose() * &mq + DMatrix::identity(n, n) * 0.5;
    let a = rand_mat(n, n) + DMatrix::identity(n, n) * 2.0;
    let b = rand_mat(n, n) - DMatrix::identity(n, n) * 2.0;
    let q = rand_mat(n, 1).column(0).into_owned();
    let r = rand_mat(n, 1).column(0).into_owned();
    let c = rand_mat(n, 1).column(0).into_owned();

    // [P 0 A'; 0 Q B'; A B 0] [x; z; y] = [-q; -r; c]
    let mut k = DMatrix::zeros(3 * n, 3 * n);
    k.view_mut((0, 0), (n, n)).copy_from(&p);
    k.view_mut((n, n), (n, n)).copy_from(&qz);
    k.view_mut((0, 2 * n), (n, n)).copy_from(&a.transpose());
    k.view_mut((n, 2 * n), (n, n)).copy_from(&b.transpose());
    k.view_mut((2 * n, 0), (n, n)).copy_from(&a);
    k.view_mut((2 * n, n), (n, n)).copy_from(&b);
    let mut rhs = DVector::zeros(3 * n);
    rhs.rows_mut(0, n).copy_from(&(-&q));
    rhs.rows_mut(n, n).copy_from(&(-&r));
    rhs.rows_mut(2 * n, n).copy_from(&c);
    let sol = k.lu().solve(&rhs).expect("KKT system is nonsingular");

    let to_m = |m: &DMatrix<f64>| {
        Matrix::new(m.nrows(), m.ncols(), m.transpose().as_slice().to_vec()).unwrap()
    };
    let to_v = |v: &DVector<f64>| badmm::Vector::new(v.as_slice().to_vec()).unwrap();
    let problem = badmm::framework::QuadraticSplit::new(
        to_m(&p),
        to_v(&q),
        to_m(&qz),
        to_v(&r),
        to_m(&a),
        to_m(&b),
        to_v(&c),
    )
    .unwrap();
    let s = sol.as_slice();
    QuadraticInstance {
        problem,
        kkt: (s[..n].to_vec(), s[n..2 * n].to_vec(), s[2 * n..].to_vec()),
    }
}

/// Unmodified ADMM on a quadratic split, coded from the augmented Lagrangian
/// `f(x) + g(z) + <y, Ax + Bz - c> + rho/2 ||Ax + Bz - c||^2`.
pub fn textbook_admm(
    problem: &badmm::framework::QuadraticSplit,
    rho: f64,
    iters: usize,
) -> Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    use nalgebra::{DMatrix, DVector};

    let m = |x: &Matrix| DMatrix::from_row_slice(x.rows(), x.cols(), x.as_slice());
    let v = |x: &badmm::Vector| DVector::from_column_slice(x.as_slice());
    let (p, qz, a, b) = (m(&problem.p), m(&problem.qz), m(&problem.a), m(&problem.b));
    let (q, r, c) = (v(&problem.q), v(&problem.r), v(&problem.c));
    let hx = (&p + a.transpose() * &a * rho).cholesky().expect("positive definite");
    let hz = (&qz + b.transpose() * &b * rho).cholesky().expect("positive definite");
    let mut z = DVector::zeros(r.len());
    let mut y = DVector::zeros(c.len());
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let x = hx.solve(&(-&q - a.transpose() * (&y + (&b * &z - &c) * rho)));
        z = hz.solve(&(-&r - b.transpose() * (&y + (&a * &x - &c) * rho)));
        y += (&a * &x + &b * &z - &c) * rho;
        out.push((x.as_slice().to_vec(), z.as_slice().to_vec(), y.as_slice().to_vec()));
    }
    out
}

/// Assignment optimum by dynamic programming over subsets of used columns.
pub fn assignment_subset_dp(cost: &Matrix) -> f64 {
    let n = cost.rows();
    assert_eq!(n, cost.cols());
    let mut best = vec![f64::INFINITY; 1 << n];
    best[0] = 0.0;
    for mask in 0usize..(1 << n) {
        if best[mask].is_infinite() {
            continue;
        }
        let row = mask.count_ones() as usize;
        if row == n {
            continue;
        }
        for j in 0..n {
            if mask >> j & 1 == 0 {
                let next = mask | 1 << j;
                best[next] = best[next].min(best[mask] + cost.get(row, j));
            }
        }
    }
    best[(1 << n) - 1]
}

/// Composite logistic objective minimized by proximal gradient with step
/// `0.5 / L`, from zero.
pub fn prox_gradient_reference(problem: &badmm::logistic::LogisticProblem, steps: usize) -> badmm::Vector {
    use badmm::logistic::{lipschitz_bound, logistic_value_grad};
    let d = problem.dim();
    let step = 0.5 / lipschitz_bound(problem);
    let kappa = step * problem.lambda();
    let mut x = badmm::Vector::zeros(d);
    for _ in 0..steps {
        let (_, g) = logistic_value_grad(problem, &x).unwrap();
        let next = (0..d)
            .map(|i| {
                let v = x[i] - step * g[i];
                v.signum() * (v.abs() - kappa).max(0.0)
            })
            .collect();
        x = badmm::Vector::new(next).unwrap();
    }
    x
}

fn random_matrix(rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// A random problem and a random strictly positive iterate.
pub fn random_setup(n: usize, seed: u64) -> (TransportProblem, IterateState, StepParams) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    let total: f64 = a.iter().sum();
    let b_raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    let b_sum: f64 = b_raw.iter().sum();
    let b: Vec<f64> = b_raw.iter().map(|v| v * total / b_sum).collect();
    let problem = TransportProblem::new(
        random_matrix(&mut rng, n, n, 0.0, 1.0),
        Vector::new(a).unwrap(),
        Vector::new(b).unwrap(),
    )
    .unwrap();
    let state = IterateState {
        x: random_matrix(&mut rng, n, n, 0.05, 1.0),
        z: random_matrix(&mut rng, n, n, 0.05, 1.0),
        y: random_matrix(&mut rng, n, n, -0.5, 0.5),
        t: 0,
    };
    let params = StepParams {
        rho: rng.random_range(0.2..2.0),
        tau: 1.0,
        rho_x: rng.random_range(0.0..1.0),
        rho_z: rng.random_range(0.0..1.0),
        gamma: 0.125,
    };
    (problem, state, params)
}

fn kl_term(u: f64, v: f64) -> f64 {
    u * (u / v).ln() - u + v
}

/// Row `i` of the KL x-subproblem minimized numerically.
pub fn x_row_oracle(problem: &TransportProblem, s: &IterateState, p: &StepParams, i: usize) -> Vec<f64> {
    let n = problem.cols();
    let w: Vec<f64> = (0..n).map(|j| problem.cost().get(i, j) + s.y.get(i, j)).collect();
    let (z, x) = (s.z.row(i).to_vec(), s.x.row(i).to_vec());
    minimize_on_simplex(
        n,
        problem.a()[i],
        |u| {
            (0..n)
                .map(|j| w[j] * u[j] + p.rho * kl_term(u[j], z[j]) + p.rho_x * kl_term(u[j], x[j]))
                .sum()
        },
        |u| {
            (0..n)
                .map(|j| w[j] + p.rho * (u[j] / z[j]).ln() + p.rho_x * (u[j] / x[j]).ln())
                .collect()
        },
    )
}

/// Column `j` of the KL z-subproblem minimized numerically.
pub fn z_col_oracle(
    problem: &TransportProblem,
    s: &IterateState,
    x_new: &Matrix,
    p: &StepParams,
    j: usize,
) -> Vec<f64> {
    let m = problem.rows();
    let y = s.y.column(j);
    let (xn, z) = (x_new.column(j), s.z.column(j));
    minimize_on_simplex(
        m,
        problem.b()[j],
        |u| {
            (0..m)
                .map(|i| -y[i] * u[i] + p.rho * kl_term(u[i], xn[i]) + p.rho_z * kl_term(u[i], z[i]))
                .sum()
        },
        |u| {
            (0..m)
                .map(|i| -y[i] + p.rho * (u[i] / xn[i]).ln() + p.rho_z * (u[i] / z[i]).ln())
                .collect()
        },
    )
}
