use badmm::divergence::{grad_first, kl_from_logs, value, DivergenceSpec};
use badmm::Vector;
use proptest::prelude::*;

mod common;

fn vec_of(v: &[f64]) -> Vector {
    Vector::new(v.to_vec()).unwrap()
}

fn positive(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3f64..10.0, len)
}

fn real(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    positive(len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    })
}

fn triple<S: Strategy<Value = Vec<f64>>>(
    make: impl Fn(usize) -> S,
) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..8).prop_flat_map(move |d| (make(d), make(d), make(d)))
}

fn phi_grad(spec: &DivergenceSpec, u: &[f64]) -> Vec<f64> {
    // grad phi(u) - grad phi(1) recovers grad phi up to a constant shift
    let ones = vec![1.0; u.len()];
    grad_first(spec, &vec_of(u), &vec_of(&ones)).unwrap().into_inner()
}

fn three_point_gap(spec: &DivergenceSpec, u: &[f64], v: &[f64], w: &[f64]) -> (f64, f64) {
    // B(u,v) + B(v,w) - B(u,w) = <grad phi(w) - grad phi(v), u - v>
    let lhs = value(spec, &vec_of(u), &vec_of(v)).unwrap() + value(spec, &vec_of(v), &vec_of(w)).unwrap()
        - value(spec, &vec_of(u), &vec_of(w)).unwrap();
    let gw = phi_grad(spec, w);
    let gv = phi_grad(spec, v);
    let diff: Vec<f64> = gw.iter().zip(&gv).map(|(a, b)| a - b).collect();
    let uv: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    let rhs = common::accurate_dot(&diff, &uv);
    let scale = 1.0 + lhs.abs() + rhs.abs();
    (lhs - rhs, scale)
}

/// Central differences of `u -> B(u, v)`.
fn finite_difference(spec: &DivergenceSpec, u: &[f64], v: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..u.len())
        .map(|i| {
            let mut up = u.to_vec();
            let mut dn = u.to_vec();
            up[i] += h;
            dn[i] -= h;
            (value(spec, &vec_of(&up), &vec_of(v)).unwrap() - value(spec, &vec_of(&dn), &vec_of(v)).unwrap())
                / (2.0 * h)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn euclidean_nonnegative_and_zero_on_diagonal((u, v, _) in triple(real)) {
        let spec = DivergenceSpec::squared_euclidean();
        prop_assert!(value(&spec, &vec_of(&u), &vec_of(&v)).unwrap() >= 0.0);
        prop_assert_eq!(value(&spec, &vec_of(&u), &vec_of(&u)).unwrap(), 0.0);
    }

    #[test]
    fn kl_nonnegative_and_zero_on_diagonal((u, v, _) in triple(positive)) {
        let spec = DivergenceSpec::generalized_kl();
        prop_assert!(value(&spec, &vec_of(&u), &vec_of(&v)).unwrap() >= 0.0);
        prop_assert!(value(&spec, &vec_of(&u), &vec_of(&u)).unwrap() <= 1e-12);
    }

    #[test]
    fn euclidean_three_point((u, v, w) in triple(real)) {
        let (gap, scale) = three_point_gap(&DivergenceSpec::squared_euclidean(), &u, &v, &w);
        prop_assert!(gap.abs() <= 1e-9 * scale, "gap {}", gap);
    }

    #[test]
    fn kl_three_point((u, v, w) in triple(positive)) {
        let (gap, scale) = three_point_gap(&DivergenceSpec::generalized_kl(), &u, &v, &w);
        prop_assert!(gap.abs() <= 1e-9 * scale, "gap {}", gap);
    }

    #[test]
    fn euclidean_gradient_matches_finite_difference((u, v, _) in triple(real)) {
        let spec = DivergenceSpec::squared_euclidean();
        let g = grad_first(&spec, &vec_of(&u), &vec_of(&v)).unwrap();
        let fd = finite_difference(&spec, &u, &v);
        prop_assert!(common::max_abs_diff(g.as_slice(), &fd) <= 1e-6);
    }

    #[test]
    fn kl_gradient_matches_finite_difference((u, v, _) in triple(|d| prop::collection::vec(0.1f64..10.0, d))) {
        let spec = DivergenceSpec::generalized_kl();
        let g = grad_first(&spec, &vec_of(&u), &vec_of(&v)).unwrap();
        let fd = finite_difference(&spec, &u, &v);
        prop_assert!(common::max_abs_diff(g.as_slice(), &fd) <= 1e-6);
    }

    #[test]
    fn kl_log_form_agrees((u, v, _) in triple(positive)) {
        let direct = value(&DivergenceSpec::generalized_kl(), &vec_of(&u), &vec_of(&v)).unwrap();
        let lu: Vec<f64> = u.iter().map(|x| x.ln()).collect();
        let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        let logs = kl_from_logs(&u, &lu, &v, &lv);
        prop_assert!((direct - logs).abs() <= 1e-12 * (1.0 + direct));
    }

    #[test]
    fn euclidean_strong_convexity_constant((u, v, _) in triple(real)) {
        let spec = DivergenceSpec::squared_euclidean();
        let b = value(&spec, &vec_of(&u), &vec_of(&v)).unwrap();
        let n2: f64 = u.iter().zip(&v).map(|(a, c)| (a - c) * (a - c)).sum();
        prop_assert!(b >= spec.alpha / 2.0 * n2 * (1.0 - 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pinsker_on_simplex((p, q) in (2usize..10).prop_flat_map(|d| (simplex(d), simplex(d)))) {
        let spec = DivergenceSpec::generalized_kl();
        let kl = value(&spec, &vec_of(&p), &vec_of(&q)).unwrap();
        let l1: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(kl + 1e-12 >= spec.alpha / 2.0 * l1 * l1, "kl {} l1 {}", kl, l1);
    }
}

#[test]
fn kl_zero_first_argument_is_total_mass_of_second() {
    let spec = DivergenceSpec::generalized_kl();
    let b = value(&spec, &vec_of(&[0.0, 0.0]), &vec_of(&[0.25, 0.5])).unwrap();
    assert!((b - 0.75).abs() < 1e-15);
}
