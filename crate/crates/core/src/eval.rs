//! Simulation generator, prediction error and the train/test benchmark.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_linear_simplex, fit_pca_score1, fit_quadratic_simplex, PcaTransform};
use crate::error::{Error, Result};
use crate::geom::{rotation_to_pole, wrap_angle, SpherePoint, Subsphere};
use crate::pns::{fit_pns_compositions, PnsModel, Selection};
use crate::regress::{fit_score_regression, CircularMethod};
use crate::simplex::{normalize, Alpha, Composition};

/// Level angles of the bundled generator, outermost first.
pub const SYNTHETIC_ANGLES: [f64; 3] = [0.943, 1.203, 1.212];

// Ambient directions of the three level axes and of the point with zero
// circular score. They are orthonormalized before use.
const SYNTHETIC_FRAME: [[f64; 5]; 4] = [
    [-0.469943, 0.45125, 0.493116, 0.17594, 0.549007],
    [0.430226, 0.67967, -0.520338, 0.187504, 0.216897],
    [0.770104, -0.125874, 0.579886, 0.029859, 0.23224],
    [-0.027146, -0.344845, -0.111794, 0.929467, 0.062751],
];

fn gram_schmidt(rows: &[[f64; 5]]) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for row in rows {
        let mut v = DVector::from_row_slice(row);
        for u in &out {
            v -= u * u.dot(&v);
        }
        out.push(v.normalize());
    }
    out
}

/// Generator model on `S^4` (five parts). The nested circle runs close to
/// the simplex boundary, where the regression trend bends strongly in
/// simplex coordinates, but stays inside the positive orthant.
pub fn synthetic_phi_star() -> PnsModel {
    let [r1, r2, r3] = SYNTHETIC_ANGLES;
    let frame = gram_schmidt(&SYNTHETIC_FRAME);
    let point = |v: &DVector<f64>| SpherePoint::normalize(v.iter().copied().collect()).expect("unit frame");
    let first = |v: DVector<f64>, m: usize| v.rows(0, m).into_owned();

    let v1 = point(&frame[0]);
    let rot1 = rotation_to_pole(&v1);
    let v2 = point(&first(&rot1 * &frame[1], 4));
    let rot2 = rotation_to_pole(&v2);
    let u3 = first(&rot2 * first(&rot1 * &frame[2], 4), 3);
    let v3 = point(&u3);

    let levels = vec![
        Subsphere::new(v1, r1).expect("angle in range"),
        Subsphere::new(v2, r2).expect("angle in range"),
        Subsphere::new(v3, r3).expect("angle in range"),
    ];
    let model = PnsModel::from_parts(levels.clone(), 0.0, Alpha::SQRT).expect("consistent synthetic model");
    let anchor = r1.cos() * &frame[0]
        + r1.sin() * (r2.cos() * &frame[1] + r2.sin() * (r3.cos() * &frame[2] + r3.sin() * &frame[3]));
    let theta = model.scores_of(&point(&anchor)).expect("anchor on S^4")[0] / model.circle_radius();
    PnsModel::from_parts(levels, theta, Alpha::SQRT).expect("consistent synthetic model")
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub phi_star: PnsModel,
    /// Intercept and slopes on `x1`, `x2` for the circular score (radians).
    pub coefficients: [f64; 3],
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 100,
            sigma: 0.05,
            seed: 1,
            phi_star: synthetic_phi_star(),
            coefficients: [0.1, 1.6, 0.4],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Composition>,
    /// Generating scores, after wrapping.
    pub scores: Vec<Vec<f64>>,
    /// Scores clamped while mapping back to the sphere.
    pub n_clamped: usize,
}

/// Predictor grid `x1 = (i - 51)/100`, `x2 = sin(2π x1)` for `i = 1..=n`.
pub fn simulation_design(n: usize) -> Vec<Vec<f64>> {
    (1..=n)
        .map(|i| {
            let x1 = (i as f64 - 51.0) / 100.0;
            vec![x1, (TAU * x1).sin()]
        })
        .collect()
}

/// Draws a dataset: the circular score follows the linear model on the
/// design, every other score is pure noise.
pub fn simulate_dataset(cfg: &SimulationConfig) -> Result<SimulatedData> {
    if cfg.n < 10 {
        return Err(Error::InvalidInput(format!("n = {} is below 10", cfg.n)));
    }
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::InvalidInput("sigma must be positive".into()));
    }
    cfg.phi_star.validate()?;
    let d = cfg.phi_star.dim();
    let rho = cfg.phi_star.circle_radius();
    let inv_alpha = 1.0 / cfg.phi_star.alpha().value();
    let noise = Normal::new(0.0, cfg.sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let [a0, a1, a2] = cfg.coefficients;

    let x = simulation_design(cfg.n);
    let mut y = Vec::with_capacity(cfg.n);
    let mut scores = Vec::with_capacity(cfg.n);
    let mut n_clamped = 0;
    for row in &x {
        let theta = a0 + a1 * row[0] + a2 * row[1] + noise.sample(&mut rng);
        let mut s = Vec::with_capacity(d);
        s.push(rho * wrap_angle(theta));
        s.extend((1..d).map(|_| noise.sample(&mut rng)));
        let (point, clamped) = cfg.phi_star.scores_to_sphere_clamped(&s, d)?;
        n_clamped += clamped;
        let raw: Vec<f64> = point.coords().iter().map(|q| q.abs().powf(inv_alpha)).collect();
        y.push(normalize(&raw)?);
        scores.push(s);
    }
    if n_clamped > 0 {
        log::warn!("{n_clamped} simulated score(s) clamped to the cylinder range");
    }
    Ok(SimulatedData { x, y, scores, n_clamped })
}

/// `100 · mean_i Σ_j (ŷ_ij − y_ij)²`.
pub fn pmse(predicted: &[Composition], observed: &[Composition]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::DimensionMismatch {
            expected: observed.len(),
            found: predicted.len(),
        });
    }
    if observed.is_empty() {
        return Err(Error::TooFewObservations { needed: 1, have: 0 });
    }
    let mut total = 0.0;
    for (p, o) in predicted.iter().zip(observed) {
        if p.len() != o.len() {
            return Err(Error::DimensionMismatch {
                expected: o.len(),
                found: p.len(),
            });
        }
        total += p.parts().iter().zip(o.parts()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(100.0 * total / observed.len() as f64)
}

/// The seven compared methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Wrapped least squares on the circular score only.
    PnsScore1,
    /// Circular score plus linear regression of every other score.
    PnsAll,
    /// Von Mises regression of the circular score.
    PnsVonMises,
    LinearSimplex,
    QuadraticSimplex,
    PcaScore1,
    ArcsinePcaScore1,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::PnsScore1,
        Method::PnsAll,
        Method::PnsVonMises,
        Method::LinearSimplex,
        Method::QuadraticSimplex,
        Method::PcaScore1,
        Method::ArcsinePcaScore1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::PnsScore1 => "pns_score1",
            Method::PnsAll => "pns_all",
            Method::PnsVonMises => "pns_vonmises",
            Method::LinearSimplex => "linear_simplex",
            Method::QuadraticSimplex => "quadratic_simplex",
            Method::PcaScore1 => "pca_score1",
            Method::ArcsinePcaScore1 => "arcsine_pca_score1",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method '{s}'")))
    }
}

/// Anything that can be trained on one part of the data and predict another.
pub trait Predictor: Sync {
    fn name(&self) -> String;

    fn fit_predict(
        &self,
        train_x: &[Vec<f64>],
        train_y: &[Composition],
        test_x: &[Vec<f64>],
    ) -> Result<Vec<Composition>>;
}

/// PNS fitted on the training responses, then score regression on the
/// first `k` scores (capped at the fitted dimension).
#[derive(Debug, Clone, Copy)]
pub struct PnsRunner {
    pub alpha: Alpha,
    pub selection: Selection,
    pub k: usize,
    pub circular: CircularMethod,
}

impl Predictor for PnsRunner {
    fn name(&self) -> String {
        format!("pns_k{}", self.k)
    }

    fn fit_predict(
        &self,
        train_x: &[Vec<f64>],
        train_y: &[Composition],
        test_x: &[Vec<f64>],
    ) -> Result<Vec<Composition>> {
        let fit = fit_pns_compositions(train_y, self.alpha, self.selection)?;
        let k = self.k.min(fit.model.dim());
        let reg = fit_score_regression(&fit.scores, train_x, k, &fit.model, self.circular)?;
        test_x.iter().map(|x| reg.predict_composition(x)).collect()
    }
}

/// One of the seven methods together with the PNS settings it needs.
#[derive(Debug, Clone, Copy)]
pub struct MethodRunner {
    pub method: Method,
    pub alpha: Alpha,
    pub selection: Selection,
}

impl MethodRunner {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            alpha: Alpha::SQRT,
            selection: Selection::Bic,
        }
    }
}

impl Predictor for MethodRunner {
    fn name(&self) -> String {
        self.method.name().to_string()
    }

    fn fit_predict(
        &self,
        train_x: &[Vec<f64>],
        train_y: &[Composition],
        test_x: &[Vec<f64>],
    ) -> Result<Vec<Composition>> {
        let pns = |k: usize, circular: CircularMethod| PnsRunner {
            alpha: self.alpha,
            selection: self.selection,
            k,
            circular,
        };
        let baseline = |model: crate::baselines::BaselineModel| -> Result<Vec<Composition>> {
            test_x.iter().map(|x| model.predict(x)).collect()
        };
        match self.method {
            Method::PnsScore1 => pns(1, CircularMethod::WrappedLeastSquares).fit_predict(train_x, train_y, test_x),
            Method::PnsAll => pns(usize::MAX, CircularMethod::WrappedLeastSquares).fit_predict(train_x, train_y, test_x),
            Method::PnsVonMises => pns(1, CircularMethod::VonMises).fit_predict(train_x, train_y, test_x),
            Method::LinearSimplex => baseline(fit_linear_simplex(train_y, train_x)?),
            Method::QuadraticSimplex => baseline(fit_quadratic_simplex(train_y, train_x)?),
            Method::PcaScore1 => baseline(fit_pca_score1(train_y, train_x, PcaTransform::None)?),
            Method::ArcsinePcaScore1 => {
                baseline(fit_pca_score1(train_y, train_x, PcaTransform::Arcsine)?)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub train_fraction: f64,
    pub n_splits: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub alpha: Alpha,
    pub selection: Selection,
    /// Worker threads; 1 runs on the calling thread.
    pub jobs: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            n_splits: 100,
            seed: 1,
            methods: Method::ALL.to_vec(),
            alpha: Alpha::SQRT,
            selection: Selection::Bic,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub method: String,
    pub mean_pmse: f64,
    pub sd_pmse: f64,
    pub n_splits: usize,
    pub failures: usize,
}

/// Per-split outcome of one method.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub split: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// One entry per predictor, in the order given.
    pub results: Vec<std::result::Result<f64, String>>,
}

fn split_indices(n: usize, n_train: usize, seed: u64, split: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(split as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let test = idx.split_off(n_train);
    (idx, test)
}

fn run_split(
    x: &[Vec<f64>],
    y: &[Composition],
    n_train: usize,
    seed: u64,
    split: usize,
    predictors: &[&dyn Predictor],
) -> SplitOutcome {
    let (train, test) = split_indices(x.len(), n_train, seed, split);
    let pick_x = |ids: &[usize]| ids.iter().map(|&i| x[i].clone()).collect::<Vec<_>>();
    let pick_y = |ids: &[usize]| ids.iter().map(|&i| y[i].clone()).collect::<Vec<_>>();
    let (train_x, train_y, test_x, test_y) = (pick_x(&train), pick_y(&train), pick_x(&test), pick_y(&test));
    let results = predictors
        .iter()
        .map(|p| {
            p.fit_predict(&train_x, &train_y, &test_x)
                .and_then(|pred| pmse(&pred, &test_y))
                .map_err(|e| e.to_string())
                .and_then(|v| if v.is_finite() { Ok(v) } else { Err("non-finite PMSE".into()) })
        })
        .collect();
    SplitOutcome {
        split,
        n_train,
        n_test: test.len(),
        results,
    }
}

/// Runs every split for arbitrary predictors. Splits are returned in index
/// order whatever the number of jobs.
pub fn cross_validate_with(
    x: &[Vec<f64>],
    y: &[Composition],
    train_fraction: f64,
    n_splits: usize,
    seed: u64,
    jobs: usize,
    predictors: &[&dyn Predictor],
) -> Result<Vec<SplitOutcome>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: x.len(),
        });
    }
    let n = x.len();
    if n < 20 {
        return Err(Error::TooFewObservations { needed: 20, have: n });
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput("train fraction must lie in (0, 1)".into()));
    }
    if n_splits == 0 {
        return Err(Error::InvalidInput("at least one split is required".into()));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let run = |s| run_split(x, y, n_train, seed, s, predictors);
    if jobs <= 1 {
        return Ok((0..n_splits).map(run).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(pool.install(|| (0..n_splits).into_par_iter().map(run).collect()))
}

/// Mean and standard deviation of PMSE per predictor.
pub fn summarize(names: &[String], outcomes: &[SplitOutcome]) -> Vec<BenchmarkRow> {
    names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let ok: Vec<f64> = outcomes.iter().filter_map(|o| o.results[k].clone().ok()).collect();
            let failures = outcomes.len() - ok.len();
            for o in outcomes {
                if let Err(e) = &o.results[k] {
                    log::warn!("{name} failed on split {}: {e}", o.split);
                }
            }
            let (mean, sd) = match ok.len() {
                0 => (f64::NAN, f64::NAN),
                1 => (ok[0], 0.0),
                m => {
                    let mean = ok.iter().sum::<f64>() / m as f64;
                    let var = ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
                    (mean, var.sqrt())
                }
            };
            BenchmarkRow {
                method: name.clone(),
                mean_pmse: mean,
                sd_pmse: sd,
                n_splits: outcomes.len(),
                failures,
            }
        })
        .collect()
}

/// Benchmark of the configured methods.
pub fn cross_validate(
    x: &[Vec<f64>],
    y: &[Composition],
    cfg: &BenchmarkConfig,
) -> Result<Vec<BenchmarkRow>> {
    let runners: Vec<MethodRunner> = cfg
        .methods
        .iter()
        .map(|&method| MethodRunner {
            method,
            alpha: cfg.alpha,
            selection: cfg.selection,
        })
        .collect();
    let predictors: Vec<&dyn Predictor> = runners.iter().map(|r| r as &dyn Predictor).collect();
    let outcomes = cross_validate_with(x, y, cfg.train_fraction, cfg.n_splits, cfg.seed, cfg.jobs, &predictors)?;
    let names: Vec<String> = runners.iter().map(|r| r.name()).collect();
    Ok(summarize(&names, &outcomes))
}

/// Number of modelled scores with the lowest cross-validated PMSE; ties go
/// to the smaller count. Returns the choice and the mean PMSE for every `k`.
pub fn select_k_by_cv(
    x: &[Vec<f64>],
    y: &[Composition],
    d: usize,
    alpha: Alpha,
    selection: Selection,
    n_splits: usize,
    seed: u64,
    jobs: usize,
) -> Result<(usize, Vec<f64>)> {
    let runners: Vec<PnsRunner> = (1..=d)
        .map(|k| PnsRunner {
            alpha,
            selection,
            k,
            circular: CircularMethod::WrappedLeastSquares,
        })
        .collect();
    let predictors: Vec<&dyn Predictor> = runners.iter().map(|r| r as &dyn Predictor).collect();
    let outcomes = cross_validate_with(x, y, 0.8, n_splits, seed, jobs, &predictors)?;
    let names: Vec<String> = runners.iter().map(|r| r.name()).collect();
    let means: Vec<f64> = summarize(&names, &outcomes).iter().map(|r| r.mean_pmse).collect();
    let best = means
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i + 1)
        .ok_or_else(|| Error::Degenerate("every cross-validation fit failed".into()))?;
    Ok((best, means))
}

/// Writes the benchmark table as CSV.
pub fn write_benchmark_csv<W: Write>(rows: &[BenchmarkRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
