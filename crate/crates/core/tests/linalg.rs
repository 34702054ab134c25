use mblbfgs_core::linalg::{axpy, dot, norm, sparse_dot};
use mblbfgs_core::verification::oracles::compensated_dot;
use mblbfgs_core::{Label, SeededRng, SparseExample};
use proptest::prelude::*;

fn vec_of(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, len)
}

fn pair(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..max).prop_flat_map(|d| (vec_of(d), vec_of(d)))
}

proptest! {
    #[test]
    fn dot_is_symmetric((a, b) in pair(64)) {
        prop_assert_eq!(dot(&a, &b).unwrap(), dot(&b, &a).unwrap());
    }

    #[test]
    fn self_dot_nonnegative(a in prop::collection::vec(-1e3..1e3f64, 1..64)) {
        let v = dot(&a, &a).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert_eq!(v == 0.0, a.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn axpy_is_linear((x, y) in pair(64), a in -10.0..10.0f64, b in -10.0..10.0f64) {
        let nested = axpy(a, &x, &axpy(b, &x, &y).unwrap()).unwrap();
        let direct = axpy(a + b, &x, &y).unwrap();
        let scale = norm(&x) * (a.abs() + b.abs()) + norm(&y) + 1.0;
        for (p, q) in nested.iter().zip(direct.iter()) {
            prop_assert!((p - q).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn axpy_cancels(x in prop::collection::vec(-1e3..1e3f64, 1..32)) {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!(axpy(1.0, &x, &neg).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sparse_dot_matches_dense_expansion(
        d in 1usize..40,
        seed in any::<u64>(),
    ) {
        let mut rng = SeededRng::new(seed);
        let mut idx: Vec<u32> = (0..d as u32).filter(|_| rng.uniform() < 0.4).collect();
        idx.dedup();
        let vals: Vec<f64> = idx.iter().map(|_| rng.normal()).collect();
        let row = SparseExample::new(idx, vals, Label::Positive).unwrap();
        let w: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let dense = row.to_dense(d).unwrap();
        let expected = compensated_dot(&dense, &w);
        let got = sparse_dot(&row, &w).unwrap();
        prop_assert!((got - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
    }
}

#[test]
fn dot_matches_compensated_oracle_at_d_1000() {
    for seed in 0..50 {
        let mut rng = SeededRng::new(seed);
        let a: Vec<f64> = (0..1000).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..1000).map(|_| rng.normal()).collect();
        let exact = compensated_dot(&a, &b);
        let got = dot(&a, &b).unwrap();
        // Relative to the magnitude of the terms, the only scale-free measure for sums that may cancel.
        let magnitude: f64 = a.iter().zip(&b).map(|(x, y)| (x * y).abs()).sum();
        assert!((got - exact).abs() <= 1e-12 * magnitude, "seed {seed}");
    }
}

#[test]
fn dot_is_bit_reproducible() {
    let mut rng = SeededRng::new(9);
    let a: Vec<f64> = (0..513).map(|_| rng.normal()).collect();
    let b: Vec<f64> = (0..513).map(|_| rng.normal()).collect();
    let first = dot(&a, &b).unwrap().to_bits();
    assert!((0..10).all(|_| dot(&a, &b).unwrap().to_bits() == first));
}
