//! Bregman divergences `B(u, v) = phi(u) - phi(v) - <grad phi(v), u - v>`.
//!
//! Two generators are supported:
//!
//! * squared Euclidean, `phi(u) = ||u||^2 / 2`, giving `||u - v||^2 / 2`;
//! * negative entropy on the positive orthant, giving the generalized KL
//!   divergence `sum_i u_i ln(u_i / v_i) - u_i + v_i`.
//!
//! Each divergence carries the constants `(alpha, p)` of its strong
//! convexity bound `B(u, v) >= alpha/2 ||u - v||_p^2`. For KL that bound is
//! Pinsker's inequality and holds on the unit simplex.

use crate::error::{Error, Result};
use crate::linalg::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivergenceKind {
    SquaredEuclidean,
    GeneralizedKL,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceSpec {
    pub kind: DivergenceKind,
    pub alpha: f64,
    pub p: f64,
}

impl DivergenceSpec {
    pub const fn squared_euclidean() -> Self {
        DivergenceSpec {
            kind: DivergenceKind::SquaredEuclidean,
            alpha: 1.0,
            p: 2.0,
        }
    }

    pub const fn generalized_kl() -> Self {
        DivergenceSpec {
            kind: DivergenceKind::GeneralizedKL,
            alpha: 1.0,
            p: 1.0,
        }
    }

    pub fn value(&self, u: &Vector, v: &Vector) -> Result<f64> {
        value(self, u, v)
    }

    pub fn grad_first(&self, u: &Vector, v: &Vector) -> Result<Vector> {
        grad_first(self, u, v)
    }
}

/// `B(u, v)`. Under KL, `v` must be positive and `u` nonnegative, with
/// `0 ln 0 = 0`.
pub fn value(spec: &DivergenceSpec, u: &Vector, v: &Vector) -> Result<f64> {
    value_slices(spec.kind, u.as_slice(), v.as_slice())
}

pub(crate) fn value_slices(kind: DivergenceKind, u: &[f64], v: &[f64]) -> Result<f64> {
    same_len(u, v)?;
    match kind {
        DivergenceKind::SquaredEuclidean => Ok(0.5
            * u.iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()),
        DivergenceKind::GeneralizedKL => {
            let mut total = 0.0;
            for (i, (&ui, &vi)) in u.iter().zip(v).enumerate() {
                if !(vi > 0.0) {
                    return Err(Error::Domain(format!(
                        "KL second argument entry {i} = {vi} must be positive"
                    )));
                }
                if ui < 0.0 {
                    return Err(Error::Domain(format!(
                        "KL first argument entry {i} = {ui} must be nonnegative"
                    )));
                }
                total += kl_term(ui, vi);
            }
            // Rounding can leave a tiny negative sum when u is v.
            Ok(total.max(0.0))
        }
    }
}

#[inline]
fn kl_term(u: f64, v: f64) -> f64 {
    if u == 0.0 {
        v
    } else {
        u * (u / v).ln() - u + v
    }
}

/// `grad_u B(u, v) = grad phi(u) - grad phi(v)`. Under KL both arguments
/// must be strictly positive.
pub fn grad_first(spec: &DivergenceSpec, u: &Vector, v: &Vector) -> Result<Vector> {
    let (u, v) = (u.as_slice(), v.as_slice());
    same_len(u, v)?;
    let g = match spec.kind {
        DivergenceKind::SquaredEuclidean => u.iter().zip(v).map(|(a, b)| a - b).collect(),
        DivergenceKind::GeneralizedKL => {
            let mut g = Vec::with_capacity(u.len());
            for (i, (&ui, &vi)) in u.iter().zip(v).enumerate() {
                if !(ui > 0.0 && vi > 0.0) {
                    return Err(Error::Domain(format!(
                        "KL gradient needs positive entries, got u[{i}] = {ui}, v[{i}] = {vi}"
                    )));
                }
                g.push((ui / vi).ln());
            }
            g
        }
    };
    Vector::new(g)
}

/// Generalized KL between two positive arrays given their logarithms and
/// values: `sum_i u_i (ln u_i - ln v_i) - u_i + v_i`.
///
/// Stays finite when entries underflow to zero in linear scale.
pub fn kl_from_logs(u: &[f64], log_u: &[f64], v: &[f64], log_v: &[f64]) -> f64 {
    debug_assert!(u.len() == log_u.len() && v.len() == log_v.len() && u.len() == v.len());
    let mut total = 0.0;
    for i in 0..u.len() {
        total += u[i] * (log_u[i] - log_v[i]) - u[i] + v[i];
    }
    total.max(0.0)
}

fn same_len(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() == v.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: u.len(),
            actual: v.len(),
        })
    }
}

/// `||w||_p` for `p > 0` (a quasi-norm when `p < 1`).
pub fn p_norm(w: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        w.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else if p == 1.0 {
        w.iter().map(|x| x.abs()).sum()
    } else {
        w.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn identical_arguments_give_zero() {
        let kl = DivergenceSpec::generalized_kl();
        assert_eq!(kl.value(&v(&[0.3, 0.7]), &v(&[0.3, 0.7])).unwrap(), 0.0);
        let eu = DivergenceSpec::squared_euclidean();
        assert_eq!(eu.value(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 1.0);
    }

    #[test]
    fn kl_zero_entry_convention() {
        let kl = DivergenceSpec::generalized_kl();
        // 0 ln 0 = 0, leaving only the +v term.
        let d = kl.value(&v(&[0.0, 1.0]), &v(&[0.5, 1.0])).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert!(kl.grad_first(&v(&[0.0, 1.0]), &v(&[0.5, 1.0])).is_err());
    }

    #[test]
    fn kl_domain_errors() {
        let kl = DivergenceSpec::generalized_kl();
        assert!(matches!(
            kl.value(&v(&[0.5]), &v(&[0.0])),
            Err(Error::Domain(_))
        ));
        assert!(kl.value(&v(&[-0.1]), &v(&[1.0])).is_err());
        assert!(matches!(
            kl.value(&v(&[0.5, 0.5]), &v(&[1.0])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn gradient_closed_forms() {
        let eu = DivergenceSpec::squared_euclidean();
        let g = eu.grad_first(&v(&[1.0, 2.0]), &v(&[1.0, 2.0])).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
        let kl = DivergenceSpec::generalized_kl();
        let e = std::f64::consts::E;
        let g = kl.grad_first(&v(&[e * 0.1, 0.1]), &v(&[0.1, 0.1])).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn log_form_matches_direct() {
        let u = [0.2, 0.5, 1.3];
        let w = [0.4, 0.4, 0.9];
        let lu: Vec<f64> = u.iter().map(|x: &f64| x.ln()).collect();
        let lw: Vec<f64> = w.iter().map(|x: &f64| x.ln()).collect();
        let direct = value_slices(DivergenceKind::GeneralizedKL, &u, &w).unwrap();
        assert!((kl_from_logs(&u, &lu, &w, &lw) - direct).abs() < 1e-15);
    }

    #[test]
    fn p_norms() {
        assert_eq!(p_norm(&[3.0, -4.0], 2.0), 5.0);
        assert_eq!(p_norm(&[3.0, -4.0], 1.0), 7.0);
        assert!((p_norm(&[1.0, 1.0], 4.0) - 2f64.powf(0.25)).abs() < 1e-15);
    }
}
