use pnsreg::simplex::{inverse_power_transform, normalize, orthant_truncate, power_transform};
use pnsreg::{Alpha, Composition, SpherePoint};
use proptest::prelude::*;

fn composition(len: usize) -> impl Strategy<Value = Composition> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 6 => 1e-6f64..1.0], len)
        .prop_filter("not all zero", |v| v.iter().any(|x| *x > 0.0))
        .prop_map(|v| normalize(&v).unwrap())
}

fn alpha() -> impl Strategy<Value = Alpha> {
    prop::sample::select(vec![0.25, 0.5, 1.0]).prop_map(|a| Alpha::new(a).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn round_trip(c in prop::sample::select(vec![3usize, 5, 10]).prop_flat_map(composition), a in alpha()) {
        let q = power_transform(&c, a);
        prop_assert!(q.coords().iter().all(|v| *v >= 0.0));
        let norm: f64 = q.coords().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        let back = inverse_power_transform(&q, a).unwrap();
        for (x, y) in back.parts().iter().zip(c.parts()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn permutation_equivariance(
        (c, perm) in (3usize..8).prop_flat_map(|n| (composition(n), Just((0..n).collect::<Vec<_>>()).prop_shuffle())),
        a in alpha(),
    ) {
        let permuted = Composition::new(perm.iter().map(|&i| c.parts()[i]).collect()).unwrap();
        let q = power_transform(&c, a);
        let qp = power_transform(&permuted, a);
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((qp.coords()[k] - q.coords()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn truncation_idempotent(v in prop::collection::vec(-1.0f64..1.0, 2..8)) {
        prop_assume!(v.iter().any(|x| *x > 1e-3));
        let q = SpherePoint::normalize(v).unwrap();
        let t = orthant_truncate(&q).unwrap();
        prop_assert!(t.coords().iter().all(|x| *x >= 0.0));
        prop_assert_eq!(orthant_truncate(&t).unwrap(), t);
    }
}
