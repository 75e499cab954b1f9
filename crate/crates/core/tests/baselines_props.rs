use nalgebra::{DMatrix, SymmetricEigen};
use pnsreg::baselines::{fit_linear_simplex, fit_pca_score1, fit_quadratic_simplex, BaselineModel, PcaTransform};
use pnsreg::simplex::{normalize, Composition};
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = (Vec<Composition>, Vec<Vec<f64>>)> {
    (3usize..6, 12usize..30).prop_flat_map(|(parts, n)| {
        let comp = proptest::collection::vec(
            prop_oneof![1 => Just(0.0), 4 => 0.0f64..1.0],
            parts,
        )
        .prop_filter("needs a positive part", |v| v.iter().sum::<f64>() > 1e-3)
        .prop_map(|v| normalize(&v).unwrap());
        (
            proptest::collection::vec(comp, n),
            proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), n),
        )
    })
}

fn all_models(y: &[Composition], x: &[Vec<f64>]) -> Vec<BaselineModel> {
    let mut models = vec![fit_linear_simplex(y, x).unwrap(), fit_quadratic_simplex(y, x).unwrap()];
    for t in [PcaTransform::None, PcaTransform::Arcsine] {
        match fit_pca_score1(y, x, t) {
            Ok(m) => models.push(m),
            Err(e) => assert!(matches!(e, pnsreg::Error::Degenerate(_)), "{e}"),
        }
    }
    models
}

fn rss(model: &BaselineModel, y: &[Composition], x: &[Vec<f64>]) -> f64 {
    y.iter()
        .zip(x)
        .map(|(c, xi)| {
            let raw = model.predict_raw(xi).unwrap();
            c.parts().iter().zip(raw).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn predictions_are_compositions((y, x) in dataset(), probe in proptest::collection::vec(-1.5f64..1.5, 2)) {
        for model in all_models(&y, &x) {
            for xi in x.iter().chain(std::iter::once(&probe)) {
                let c = model.predict(xi).unwrap();
                prop_assert!(c.parts().iter().all(|v| *v >= 0.0 && v.is_finite()));
                prop_assert!((c.parts().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_fits_at_least_as_well((y, x) in dataset()) {
        let lin = fit_linear_simplex(&y, &x).unwrap();
        let quad = fit_quadratic_simplex(&y, &x).unwrap();
        prop_assert!(rss(&quad, &y, &x) <= rss(&lin, &y, &x) + 1e-10);
    }

    #[test]
    fn linear_fits_sum_to_one((y, x) in dataset(), probe in proptest::collection::vec(-5.0f64..5.0, 2)) {
        let lin = fit_linear_simplex(&y, &x).unwrap();
        prop_assert!((lin.predict_raw(&probe).unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pca_residual_is_discarded_variance((y, x) in dataset()) {
        let Ok(model) = fit_pca_score1(&y, &x, PcaTransform::None) else { return Ok(()); };
        let n = y.len();
        let parts = y[0].len();
        let data = DMatrix::from_fn(n, parts, |i, j| y[i].parts()[j]);
        let mean = data.row_mean();
        let centred = DMatrix::from_fn(n, parts, |i, j| data[(i, j)] - mean[j]);
        let cov = centred.transpose() * &centred / (n as f64 - 1.0);
        let mut eig: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let discarded: f64 = eig[1..].iter().sum::<f64>() * (n as f64 - 1.0);
        let residual: f64 = y
            .iter()
            .map(|c| {
                let t = model.pca_score(c).unwrap();
                let back = model.pca_reconstruct(t);
                c.parts().iter().zip(back).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum();
        prop_assert!((residual - discarded).abs() < 1e-9 * (1.0 + discarded));
    }
}

#[test]
fn arcsine_round_trip_on_two_parts() {
    // (sin²φ, cos²φ) is a straight line in arcsine space
    let phis: Vec<f64> = (0..20).map(|i| 0.1 + 1.3 * i as f64 / 19.0).collect();
    let y: Vec<Composition> = phis
        .iter()
        .map(|p| Composition::new(vec![p.sin().powi(2), p.cos().powi(2)]).unwrap())
        .collect();
    let x: Vec<Vec<f64>> = phis.iter().map(|p| vec![*p]).collect();
    let model = fit_pca_score1(&y, &x, PcaTransform::Arcsine).unwrap();
    for (c, xi) in y.iter().zip(&x) {
        let back = model.pca_to_composition(model.pca_score(c).unwrap()).unwrap();
        let pred = model.predict(xi).unwrap();
        for ((a, b), p) in c.parts().iter().zip(back.parts()).zip(pred.parts()) {
            assert!((a - b).abs() < 1e-12);
            assert!((a - p).abs() < 1e-9);
        }
    }
}

#[test]
fn constant_responses_are_degenerate_for_pca() {
    let y = vec![Composition::new(vec![0.2, 0.3, 0.5]).unwrap(); 10];
    let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
    assert!(matches!(fit_pca_score1(&y, &x, PcaTransform::None), Err(pnsreg::Error::Degenerate(_))));
    let lin = fit_linear_simplex(&y, &x).unwrap();
    assert!((lin.predict(&[3.5]).unwrap().parts()[2] - 0.5).abs() < 1e-12);
}

#[test]
fn wrong_predictor_count_rejected() {
    let y: Vec<Composition> = (0..10).map(|i| normalize(&[1.0, i as f64, 2.0]).unwrap()).collect();
    let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
    for model in all_models(&y, &x) {
        assert!(model.predict(&[1.0, 2.0]).is_err());
    }
}
