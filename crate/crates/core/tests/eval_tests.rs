use std::collections::HashSet;
use std::sync::Mutex;

use pnsreg::eval::{
    cross_validate, cross_validate_with, pmse, select_k_by_cv, simulate_dataset, summarize, write_benchmark_csv,
    BenchmarkConfig, Method, MethodRunner, Predictor, SimulationConfig,
};
use pnsreg::pns::fit_pns_compositions;
use pnsreg::regress::{fit_circular_ls, fit_score_regression, CircularMethod};
use pnsreg::simplex::power_transform;
use pnsreg::{Alpha, Composition, Selection};

/// Returns the observed response for each test row, recording what it saw.
struct Oracle<'a> {
    x: &'a [Vec<f64>],
    y: &'a [Composition],
    seen: Mutex<Vec<(Vec<usize>, Vec<usize>)>>,
}

impl Oracle<'_> {
    fn index(&self, row: &[f64]) -> usize {
        self.x.iter().position(|r| r == row).unwrap()
    }
}

impl Predictor for Oracle<'_> {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn fit_predict(
        &self,
        train_x: &[Vec<f64>],
        _train_y: &[Composition],
        test_x: &[Vec<f64>],
    ) -> pnsreg::Result<Vec<Composition>> {
        let train: Vec<usize> = train_x.iter().map(|r| self.index(r)).collect();
        let test: Vec<usize> = test_x.iter().map(|r| self.index(r)).collect();
        let pred = test.iter().map(|&i| self.y[i].clone()).collect();
        self.seen.lock().unwrap().push((train, test));
        Ok(pred)
    }
}

#[test]
fn simulation_is_deterministic() {
    let a = simulate_dataset(&SimulationConfig::default()).unwrap();
    let b = simulate_dataset(&SimulationConfig::default()).unwrap();
    assert_eq!(a.y, b.y);
    assert_eq!(a.x, b.x);
    let c = simulate_dataset(&SimulationConfig {
        seed: 2,
        ..SimulationConfig::default()
    })
    .unwrap();
    assert_ne!(a.y, c.y);
    assert_eq!(a.n_clamped, 0);
    assert_eq!(a.x[0], vec![-0.5, (2.0 * std::f64::consts::PI * -0.5).sin()]);
}

#[test]
fn noiseless_simulation_lies_on_the_generating_circle() {
    let cfg = SimulationConfig {
        sigma: 1e-12,
        ..SimulationConfig::default()
    };
    let data = simulate_dataset(&cfg).unwrap();
    let rho = cfg.phi_star.circle_radius();
    let [a0, a1, a2] = cfg.coefficients;
    for (c, x) in data.y.iter().zip(&data.x) {
        let s = cfg.phi_star.scores_of(&power_transform(c, Alpha::SQRT)).unwrap();
        assert!(s[1..].iter().all(|v| v.abs() < 1e-9));
        let theta = a0 + a1 * x[0] + a2 * x[1];
        assert!(pnsreg::geom::wrap_angle(s[0] / rho - theta).abs() < 1e-9);
    }
}

#[test]
fn end_to_end_trend_recovery() {
    let cfg = SimulationConfig {
        sigma: 0.01,
        ..SimulationConfig::default()
    };
    let data = simulate_dataset(&cfg).unwrap();
    let fit = fit_pns_compositions(&data.y, Alpha::SQRT, Selection::Bic).unwrap();
    let reg = fit_score_regression(&fit.scores, &data.x, 1, &fit.model, CircularMethod::WrappedLeastSquares).unwrap();
    let rho = cfg.phi_star.circle_radius();
    let angles: Vec<f64> = data
        .x
        .iter()
        .map(|x| {
            let pred = reg.predict_composition(x).unwrap();
            cfg.phi_star.scores_of(&power_transform(&pred, Alpha::SQRT)).unwrap()[0] / rho
        })
        .collect();
    let back = fit_circular_ls(&angles, &data.x).unwrap();
    for (b, t) in back.beta.iter().zip(cfg.coefficients) {
        assert!((b - t).abs() < 0.1, "{:?} vs {:?}", back.beta, cfg.coefficients);
    }
}

#[test]
fn oracle_scores_zero_and_splits_partition_the_data() {
    let data = simulate_dataset(&SimulationConfig::default()).unwrap();
    let oracle = Oracle {
        x: &data.x,
        y: &data.y,
        seen: Mutex::new(Vec::new()),
    };
    let outcomes = cross_validate_with(&data.x, &data.y, 0.8, 10, 7, 1, &[&oracle]).unwrap();
    for o in &outcomes {
        assert_eq!((o.n_train, o.n_test), (80, 20));
        assert_eq!(o.results[0], Ok(0.0));
    }
    let seen = oracle.seen.lock().unwrap();
    assert_eq!(seen.len(), 10);
    for (train, test) in seen.iter() {
        let all: HashSet<usize> = train.iter().chain(test).copied().collect();
        assert_eq!(all.len(), 100);
    }
    assert_ne!(seen[0].1, seen[1].1);
    let rows = summarize(&["oracle".into()], &outcomes);
    assert_eq!((rows[0].mean_pmse, rows[0].sd_pmse, rows[0].failures), (0.0, 0.0, 0));
}

#[test]
fn parallel_matches_serial() {
    let data = simulate_dataset(&SimulationConfig::default()).unwrap();
    let cfg = BenchmarkConfig {
        n_splits: 6,
        ..BenchmarkConfig::default()
    };
    let serial = cross_validate(&data.x, &data.y, &cfg).unwrap();
    let parallel = cross_validate(&data.x, &data.y, &BenchmarkConfig { jobs: 3, ..cfg }).unwrap();
    assert_eq!(serial, parallel);
    assert_eq!(serial.len(), 7);
    for (row, m) in serial.iter().zip(Method::ALL) {
        assert_eq!(row.method, m.name());
        assert_eq!(row.failures, 0);
        assert!(row.mean_pmse.is_finite() && row.mean_pmse >= 0.0);
    }
}

#[test]
fn method_runners_predict_compositions() {
    let data = simulate_dataset(&SimulationConfig::default()).unwrap();
    for m in Method::ALL {
        let pred = MethodRunner::new(m).fit_predict(&data.x[..80], &data.y[..80], &data.x[80..]).unwrap();
        assert_eq!(pred.len(), 20);
        assert!(pmse(&pred, &data.y[80..]).unwrap().is_finite());
    }
}

#[test]
fn cv_choice_of_score_count() {
    let data = simulate_dataset(&SimulationConfig::default()).unwrap();
    let (k, means) = select_k_by_cv(&data.x, &data.y, 4, Alpha::SQRT, Selection::Bic, 5, 3, 1).unwrap();
    assert_eq!(means.len(), 4);
    assert!((1..=4).contains(&k));
    let best = means.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(means[k - 1], best);
    assert!(means[..k - 1].iter().all(|m| *m > best));
}

#[test]
fn benchmark_csv_layout() {
    let data = simulate_dataset(&SimulationConfig::default()).unwrap();
    let cfg = BenchmarkConfig {
        n_splits: 2,
        methods: vec![Method::LinearSimplex, Method::PnsScore1],
        ..BenchmarkConfig::default()
    };
    let rows = cross_validate(&data.x, &data.y, &cfg).unwrap();
    let mut out = Vec::new();
    write_benchmark_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,mean_pmse,sd_pmse,n_splits,failures");
    assert!(lines[1].starts_with("linear_simplex,"));
    assert!(lines[2].starts_with("pns_score1,"));
}

#[test]
fn small_or_mismatched_inputs_rejected() {
    let data = simulate_dataset(&SimulationConfig {
        n: 15,
        ..SimulationConfig::default()
    })
    .unwrap();
    assert!(cross_validate(&data.x, &data.y, &BenchmarkConfig::default()).is_err());
    let big = simulate_dataset(&SimulationConfig::default()).unwrap();
    assert!(cross_validate(&big.x[..50], &big.y, &BenchmarkConfig::default()).is_err());
    let bad = BenchmarkConfig {
        train_fraction: 1.0,
        ..BenchmarkConfig::default()
    };
    assert!(cross_validate(&big.x, &big.y, &bad).is_err());
    assert!(simulate_dataset(&SimulationConfig {
        sigma: 0.0,
        ..SimulationConfig::default()
    })
    .is_err());
}
