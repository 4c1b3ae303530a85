//! Euclidean projection onto the scaled simplex `{w >= 0, sum(w) = r}`.

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// `argmin_{w >= 0, sum w = r} ||w - v||_2`, by sorting and thresholding.
pub fn project_simplex(v: &Vector, r: f64) -> Result<Vector> {
    let mut out = vec![0.0; v.len()];
    let mut scratch = Vec::with_capacity(v.len());
    project_simplex_into(v.as_slice(), r, &mut out, &mut scratch)?;
    Vector::new(out)
}

/// Slice form of [`project_simplex`]; `scratch` is reused between calls.
pub fn project_simplex_into(
    v: &[f64],
    r: f64,
    out: &mut [f64],
    scratch: &mut Vec<f64>,
) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "r",
            value: r,
            reason: "simplex mass must be positive",
        });
    }
    if v.is_empty() {
        return Err(Error::EmptySequence);
    }
    debug_assert_eq!(v.len(), out.len());
    let theta = threshold(v, r, scratch);
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - theta).max(0.0);
    }
    Ok(())
}

/// The shift `theta` such that `sum_i max(v_i - theta, 0) = r`.
fn threshold(v: &[f64], r: f64, sorted: &mut Vec<f64>) -> f64 {
    sorted.clear();
    sorted.extend_from_slice(v);
    // stable, descending
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let candidate = (cumulative - r) / (k + 1) as f64;
        if x - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    theta
}
