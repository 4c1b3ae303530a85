use badmm::projection::project_simplex;
use badmm::Vector;
use proptest::prelude::*;

mod common;

fn project(v: &[f64], r: f64) -> Vec<f64> {
    project_simplex(&Vector::new(v.to_vec()).unwrap(), r)
        .unwrap()
        .into_inner()
}

fn input() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (prop::collection::vec(-5.0f64..5.0, 1..=12), 0.1f64..5.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn feasible((v, r) in input()) {
        let w = project(&v, r);
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        prop_assert!((common::accurate_sum(w.iter().copied()) - r).abs() <= 1e-12 * (1.0 + r));
    }

    #[test]
    fn idempotent((v, r) in input()) {
        let w = project(&v, r);
        let ww = project(&w, r);
        prop_assert!(common::max_abs_diff(&w, &ww) <= 1e-12);
    }

    #[test]
    fn matches_support_enumeration((v, r) in input()) {
        let w = project(&v, r);
        let reference = common::project_simplex_enumerate(&v, r);
        prop_assert!(common::max_abs_diff(&w, &reference) <= 1e-9);
    }

    #[test]
    fn nonexpansive(
        (u, v, r) in (1usize..=12).prop_flat_map(|d| (
            prop::collection::vec(-5.0f64..5.0, d),
            prop::collection::vec(-5.0f64..5.0, d),
            0.1f64..5.0,
        ))
    ) {
        let pu = project(&u, r);
        let pv = project(&v, r);
        let dp: f64 = pu.iter().zip(&pv).map(|(a, b)| (a - b) * (a - b)).sum();
        let d: f64 = u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
        prop_assert!(dp.sqrt() <= d.sqrt() + 1e-12);
    }

    #[test]
    fn shift_invariant((v, r) in input(), s in -3.0f64..3.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + s).collect();
        prop_assert!(common::max_abs_diff(&project(&v, r), &project(&shifted, r)) <= 1e-9);
    }
}

#[test]
fn rejects_invalid_mass() {
    let v = Vector::new(vec![1.0, 2.0]).unwrap();
    assert!(project_simplex(&v, 0.0).is_err());
    assert!(project_simplex(&v, f64::NAN).is_err());
}
