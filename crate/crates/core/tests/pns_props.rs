use std::f64::consts::PI;

use pnsreg::eval::{simulate_dataset, SimulationConfig};
use pnsreg::geom::{drop_dimension, geodesic_dist};
use pnsreg::pns::{biplot_paths, fit_pns, score_range, variance_explained, PnsFit};
use pnsreg::{Alpha, PnsModel, Selection, SphereKind, SpherePoint, Subsphere};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `normalize(centre + sigma * z)` for Gaussian `z`.
fn cloud(rng: &mut ChaCha8Rng, centre: &[f64], sigma: f64, n: usize) -> Vec<SpherePoint> {
    (0..n)
        .map(|_| {
            let z = gaussian(rng, centre.len());
            SpherePoint::normalize(centre.iter().zip(z).map(|(c, e)| c + sigma * e).collect()).unwrap()
        })
        .collect()
}

fn random_model(rng: &mut ChaCha8Rng, d: usize) -> PnsModel {
    let levels = (0..d - 1)
        .map(|k| {
            let axis = SpherePoint::normalize(gaussian(rng, d + 1 - k)).unwrap();
            Subsphere::new(axis, rng.random_range(0.5..1.4)).unwrap()
        })
        .collect();
    PnsModel::from_parts(levels, rng.random_range(-3.0..3.0), Alpha::SQRT).unwrap()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn max_abs_diff(a: &SpherePoint, b: &SpherePoint) -> f64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn chosen_rss(fit: &PnsFit, k: usize) -> f64 {
    let level = &fit.levels[k];
    match level.kind {
        SphereKind::Great => level.rss_great.unwrap(),
        SphereKind::Small => level.rss_small.unwrap(),
    }
}

#[test]
fn exact_inversion_of_fitted_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let centre = SpherePoint::normalize(gaussian(&mut rng, 5)).unwrap();
        let data = cloud(&mut rng, centre.coords(), 0.4, 60);
        let fit = fit_pns(&data, Selection::Bic).unwrap();
        for (x, s) in data.iter().zip(&fit.scores) {
            let back = fit.model.scores_to_sphere(s, 4).unwrap();
            assert!(max_abs_diff(&back, x) < 1e-8);
            let again = fit.model.scores_of(x).unwrap();
            assert!(again.iter().zip(s).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }
}

#[test]
fn first_score_image_lies_on_every_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let data = cloud(&mut rng, &[0.3, 0.5, 0.4, 0.6, 0.35], 0.3, 80);
    let fit = fit_pns(&data, Selection::Bic).unwrap();
    let model = &fit.model;
    for s in &fit.scores {
        let mut p = model.scores_to_sphere(s, 1).unwrap();
        for level in model.levels() {
            assert!((geodesic_dist(&p, level.axis()).unwrap() - level.angle()).abs() < 1e-8);
            p = drop_dimension(&p, level).unwrap();
        }
    }
}

#[test]
fn circular_score_is_periodic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = cloud(&mut rng, &[0.5, 0.5, 0.5, 0.5], 0.5, 50);
    let fit = fit_pns(&data, Selection::Bic).unwrap();
    let rho = fit.model.circle_radius();
    for s in &fit.scores {
        assert!(s[0] >= -rho * PI && s[0] < rho * PI);
        let mut shifted = s.clone();
        shifted[0] += 2.0 * PI * rho;
        let a = fit.model.scores_to_sphere(s, 3).unwrap();
        let b = fit.model.scores_to_sphere(&shifted, 3).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-9);
    }
}

#[test]
fn zero_noise_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for d in [2, 3, 4] {
        let truth = random_model(&mut rng, d);
        let rho = truth.circle_radius();
        let s1: Vec<f64> = (0..60).map(|i| rho * (-1.5 + 3.0 * i as f64 / 59.0)).collect();
        let data: Vec<SpherePoint> = s1
            .iter()
            .map(|&t| {
                let mut s = vec![0.0; d];
                s[0] = t;
                truth.scores_to_sphere(&s, d).unwrap()
            })
            .collect();
        let fit = fit_pns(&data, Selection::Bic).unwrap();
        for k in 0..fit.levels.len() {
            assert!(chosen_rss(&fit, k) < 1e-10, "d = {d}, level {k}: rss {}", chosen_rss(&fit, k));
        }
        let fitted: Vec<f64> = fit.scores.iter().map(|s| s[0]).collect();
        assert!(correlation(&fitted, &s1).abs() > 1.0 - 1e-9);
    }
}

#[test]
fn circle_base_case() {
    let angles = [0.1, 0.4, -0.2, 0.3];
    let data: Vec<SpherePoint> = angles
        .iter()
        .map(|a: &f64| SpherePoint::new(vec![a.cos(), a.sin()]).unwrap())
        .collect();
    let fit = fit_pns(&data, Selection::Bic).unwrap();
    assert!(fit.model.levels().is_empty());
    assert_eq!(fit.model.circle_radius(), 1.0);
    let mean = angles.iter().sum::<f64>() / 4.0;
    assert!((fit.model.final_mean_angle() - mean).abs() < 1e-12);
    for (s, a) in fit.scores.iter().zip(angles) {
        assert!((s[0] - (a - mean)).abs() < 1e-12);
    }
}

#[test]
fn simulated_first_score_tracks_generator() {
    let cfg = SimulationConfig {
        sigma: 1e-6,
        ..SimulationConfig::default()
    };
    let data = simulate_dataset(&cfg).unwrap();
    let points: Vec<SpherePoint> = data.y.iter().map(|c| pnsreg::simplex::power_transform(c, Alpha::SQRT)).collect();
    let fit = fit_pns(&points, Selection::Bic).unwrap();
    let fitted: Vec<f64> = fit.scores.iter().map(|s| s[0]).collect();
    let truth: Vec<f64> = data.scores.iter().map(|s| s[0]).collect();
    assert!(correlation(&fitted, &truth).abs() > 0.99);
}

#[test]
fn mean_of_concentrated_cloud() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sigma = 0.05;
    let pole = [0.0, 0.0, 0.0, 1.0];
    let data = cloud(&mut rng, &pole, sigma, 300);
    let fit = fit_pns(&data, Selection::Bic).unwrap();
    let mean = fit.model.mean();
    let dist = geodesic_dist(&mean, &SpherePoint::new(pole.to_vec()).unwrap()).unwrap();
    assert!(dist < 4.0 * sigma, "mean is {dist} from the pole");
    for level in fit.model.levels() {
        let _ = level;
    }
    let mut p = mean;
    for level in fit.model.levels() {
        assert!((geodesic_dist(&p, level.axis()).unwrap() - level.angle()).abs() < 1e-9);
        p = drop_dimension(&p, level).unwrap();
    }
}

#[test]
fn variance_explained_properties() {
    let only_first: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0, 0.0]).collect();
    assert_eq!(variance_explained(&only_first).unwrap(), vec![1.0, 0.0, 0.0]);

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let d = 4;
    let iid: Vec<Vec<f64>> = (0..1000).map(|_| gaussian(&mut rng, d)).collect();
    let f = variance_explained(&iid).unwrap();
    assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(f.iter().all(|v| (v - 0.25).abs() < 0.1));

    let zeros = vec![vec![0.0; 3]; 5];
    assert!(variance_explained(&zeros).is_err());
}

#[test]
fn biplot_paths_anchor_and_range() {
    let data = simulate_dataset(&SimulationConfig::default()).unwrap();
    let points: Vec<SpherePoint> = data.y.iter().map(|c| pnsreg::simplex::power_transform(c, Alpha::SQRT)).collect();
    let fit = fit_pns(&points, Selection::Bic).unwrap();
    let model = &fit.model;
    let mean = model.mean();
    for j in [1, 2] {
        let (lo, hi) = score_range(model, j).unwrap();
        let h = 0.5 * (-lo).min(hi);
        let grid: Vec<f64> = (0..21).map(|i| -h + h * i as f64 / 10.0).collect();
        let paths = biplot_paths(model, j, &grid).unwrap();
        for (path, m) in paths.paths.iter().zip(mean.coords()) {
            assert!((path[10] - m).abs() < 1e-12);
        }
        assert!(biplot_paths(model, j, &[hi + 1.0]).is_err());
    }
    assert!(biplot_paths(model, 3, &[0.0]).is_err());

    // the part moving most along score 1 is the one the generator's circle
    // moves most over the design's angle range
    let phi = SimulationConfig::default().phi_star;
    let design_span: Vec<f64> = (0..5)
        .map(|j| {
            let vals: Vec<f64> = (0..=100)
                .map(|i| {
                    let t = -0.78 + 1.76 * i as f64 / 100.0;
                    phi.scores_to_sphere(&[phi.circle_radius() * t, 0.0, 0.0, 0.0], 4).unwrap().coords()[j]
                })
                .collect();
            vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) - vals.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .collect();
    let (lo, hi) = (data.scores.iter().map(|s| s[0]).fold(f64::INFINITY, f64::min), 0.0);
    let _ = (lo, hi);
    let fitted_s1: Vec<f64> = fit.scores.iter().map(|s| s[0]).collect();
    let (a, b) = (
        fitted_s1.iter().copied().fold(f64::INFINITY, f64::min),
        fitted_s1.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let grid: Vec<f64> = (0..=100).map(|i| a + (b - a) * i as f64 / 100.0).collect();
    let amps = biplot_paths(model, 1, &grid).unwrap().amplitudes();
    let argmax = |v: &[f64]| v.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0;
    assert_eq!(argmax(&amps), argmax(&design_span));
}

#[test]
fn rejects_too_few_points() {
    let data = vec![SpherePoint::basis(4, 0), SpherePoint::basis(4, 1), SpherePoint::basis(4, 2)];
    assert!(fit_pns(&data, Selection::Bic).is_err());
}
