use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use pnsreg::eval::{
    cross_validate, select_k_by_cv, simulate_dataset, synthetic_phi_star, write_benchmark_csv, BenchmarkConfig,
    Method, SimulationConfig,
};
use pnsreg::io::{numeric_csv, read_model, read_table, write_atomic, write_model, ModelFile, Provenance};
use pnsreg::plot::{biplot_csv, biplot_set, biplot_svg, ternary_curve, TernaryFigure};
use pnsreg::pns::{fit_pns_compositions, variance_explained, PnsFit};
use pnsreg::regress::{fit_score_regression, CircularMethod};
use pnsreg::simplex::{inverse_power_transform, orthant_truncate};
use pnsreg::{Alpha, Error, PnsModel, Selection};

use crate::{
    BenchmarkArgs, BiplotArgs, CircularArg, FitArgs, KindArg, PnsArgs, PnsOptions, PredictArgs, ScoreChoice,
    SelectionArg, SimulateArgs, TernaryArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) if e.is_data_error() => 3,
            CliError::Lib(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn selection(opts: &PnsOptions) -> Selection {
    match (opts.force_kind, opts.selection) {
        (Some(KindArg::Great), _) => Selection::ForcedGreat,
        (Some(KindArg::Small), _) => Selection::ForcedSmall,
        (None, SelectionArg::Bic) => Selection::Bic,
        (None, SelectionArg::Variance) => Selection::VarianceTest,
    }
}

fn alpha(opts: &PnsOptions) -> CliResult<Alpha> {
    Ok(Alpha::new(opts.alpha)?)
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> CliResult {
    match path {
        Some(p) => write_atomic(p, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn timestamp(seed: Option<u64>) -> Option<u64> {
    match seed {
        Some(_) => None,
        None => SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs()),
    }
}

fn part_names(names: &[String], parts: usize) -> Vec<String> {
    if names.len() == parts {
        names.to_vec()
    } else {
        (1..=parts).map(|j| format!("y{j}")).collect()
    }
}

fn print_pns_report(fit: &PnsFit) {
    println!("levels (outermost first)");
    println!("  sphere  kind   angle        rss_great    rss_small    bic_great    bic_small");
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
    for level in &fit.levels {
        println!(
            "  S^{:<4}  {:<5}  {:<11.6}  {:<11}  {:<11}  {:<11}  {:<11}",
            level.sphere_dim,
            level.kind.to_string(),
            level.angle,
            cell(level.rss_great),
            cell(level.rss_small),
            cell(level.bic.map(|b| b.great)),
            cell(level.bic.map(|b| b.small)),
        );
    }
    if fit.model.collapsed().is_some() {
        println!("  data collapsed to a point; remaining scores are zero");
    } else {
        println!("  circle radius {:.6}, mean angle {:.6}", fit.model.circle_radius(), fit.model.final_mean_angle());
    }
    match variance_explained(&fit.scores) {
        Ok(fractions) => {
            println!("variance explained");
            println!("  score  fraction  cumulative");
            let mut total = 0.0;
            for (j, f) in fractions.iter().enumerate() {
                total += f;
                println!("  {:<5}  {:<8.4}  {:.4}", j + 1, f, total);
            }
        }
        Err(e) => println!("variance explained unavailable: {e}"),
    }
}

pub fn fit(a: FitArgs) -> CliResult {
    let table = read_table(&a.columns.data, &a.columns.response_cols, &a.predictor_cols)?;
    let sel = selection(&a.pns);
    let alpha = alpha(&a.pns)?;
    let fit = fit_pns_compositions(&table.responses, alpha, sel)?;
    let d = fit.model.dim();
    let k = match a.scores {
        ScoreChoice::All => d,
        ScoreChoice::Count(k) if k <= d => k,
        ScoreChoice::Count(k) => {
            return Err(CliError::Usage(format!("--scores {k} exceeds the {d} available scores")));
        }
        ScoreChoice::Variance(frac) => {
            let fractions = variance_explained(&fit.scores)?;
            let mut total = 0.0;
            fractions
                .iter()
                .position(|f| {
                    total += f;
                    total >= frac - 1e-12
                })
                .map_or(d, |i| i + 1)
        }
        ScoreChoice::CrossValidation => {
            let (k, means) = select_k_by_cv(
                &table.predictors,
                &table.responses,
                d,
                alpha,
                sel,
                a.cv_splits,
                a.seed.unwrap_or(0),
                a.jobs,
            )?;
            for (j, m) in means.iter().enumerate() {
                log::info!("cv pmse with {} score(s): {m:.6}", j + 1);
            }
            k
        }
    };
    let circular = match a.circular {
        CircularArg::Wls => CircularMethod::WrappedLeastSquares,
        CircularArg::Vonmises => CircularMethod::VonMises,
    };
    let reg = fit_score_regression(&fit.scores, &table.predictors, k, &fit.model, circular)?;
    if !reg.converged {
        log::warn!("circular regression did not converge; best iterate kept");
    }
    let mut file = ModelFile::new(fit.model.clone(), Some(reg));
    file.response_names = table.response_names.clone();
    file.predictor_names = table.predictor_names.clone();
    file.provenance = Provenance {
        seed: a.seed,
        selection: sel,
        fit_timestamp: timestamp(a.seed),
    };
    write_model(&a.out, &file)?;

    println!("observations {} (dropped {})", table.len(), table.dropped_rows);
    print_pns_report(&fit);
    println!("scores used in regression: {k}");
    Ok(())
}

pub fn predict(a: PredictArgs) -> CliResult {
    let model = read_model(&a.model)?;
    let reg = model
        .regression
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("model file holds no regression".into()))?;
    if model.predictor_names.len() != reg.n_predictors() {
        return Err(Error::Corrupt("model file lacks predictor names".into()).into());
    }
    let table = read_table(&a.data, &[], &model.predictor_names)?;
    let rows = table
        .predictors
        .iter()
        .map(|x| reg.predict_composition(x).map(|c| c.into_parts()))
        .collect::<Result<Vec<_>, _>>()?;
    let header = part_names(&model.response_names, model.pns.dim() + 1);
    emit(a.out.as_deref(), &numeric_csv(&header, &rows)?)
}

pub fn pns(a: PnsArgs) -> CliResult {
    let table = read_table(&a.columns.data, &a.columns.response_cols, &[])?;
    let sel = selection(&a.pns);
    let fit = fit_pns_compositions(&table.responses, alpha(&a.pns)?, sel)?;
    if let Some(out) = &a.out {
        let mut file = ModelFile::new(fit.model.clone(), None);
        file.response_names = table.response_names.clone();
        file.provenance = Provenance {
            seed: a.seed,
            selection: sel,
            fit_timestamp: timestamp(a.seed),
        };
        write_model(out, &file)?;
    }
    if let Some(path) = &a.scores_out {
        let header: Vec<String> = (1..=fit.model.dim()).map(|j| format!("s{j}")).collect();
        write_atomic(path, &numeric_csv(&header, &fit.scores)?)?;
    }
    println!("observations {} (dropped {})", table.len(), table.dropped_rows);
    print_pns_report(&fit);
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> CliResult {
    let (phi, names) = match &a.model {
        Some(path) => {
            let file = read_model(path)?;
            (file.pns, file.response_names)
        }
        None => (synthetic_phi_star(), Vec::new()),
    };
    let parts = phi.dim() + 1;
    let cfg = SimulationConfig {
        n: a.n,
        sigma: a.sigma,
        seed: a.seed,
        phi_star: phi,
        ..SimulationConfig::default()
    };
    let data = simulate_dataset(&cfg)?;
    let mut header = part_names(&names, parts);
    header.extend(["x1".to_string(), "x2".to_string()]);
    let rows: Vec<Vec<f64>> = data
        .y
        .iter()
        .zip(&data.x)
        .map(|(y, x)| y.parts().iter().chain(x).copied().collect())
        .collect();
    emit(a.out.as_deref(), &numeric_csv(&header, &rows)?)
}

fn parse_methods(list: &str) -> CliResult<Vec<Method>> {
    if list == "all" {
        return Ok(Method::ALL.to_vec());
    }
    list.split(',')
        .map(|m| m.trim().parse::<Method>().map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

pub fn benchmark(a: BenchmarkArgs) -> CliResult {
    let methods = parse_methods(&a.methods)?;
    if !(a.train_fraction > 0.0 && a.train_fraction < 1.0) {
        return Err(CliError::Usage("--train-fraction must lie in (0, 1)".into()));
    }
    let (x, y) = match &a.data {
        Some(path) => {
            let t = read_table(path, &a.response_cols, &a.predictor_cols)?;
            (t.predictors, t.responses)
        }
        None => {
            let sim = simulate_dataset(&SimulationConfig {
                n: a.n,
                sigma: a.sigma,
                seed: a.seed,
                ..SimulationConfig::default()
            })?;
            (sim.x, sim.y)
        }
    };
    let cfg = BenchmarkConfig {
        train_fraction: a.train_fraction,
        n_splits: a.splits,
        seed: a.seed,
        methods,
        alpha: alpha(&a.pns)?,
        selection: selection(&a.pns),
        jobs: a.jobs.max(1),
    };
    let rows = cross_validate(&x, &y, &cfg)?;
    let mut buf = Vec::new();
    write_benchmark_csv(&rows, &mut buf)?;
    emit(a.out.as_deref(), &buf)
}

fn mean_composition(model: &PnsModel) -> CliResult<pnsreg::Composition> {
    Ok(inverse_power_transform(&orthant_truncate(&model.mean())?, model.alpha())?)
}

pub fn plot_ternary(a: TernaryArgs) -> CliResult {
    if a.columns.response_cols.len() != 3 {
        return Err(Error::InvalidInput(format!(
            "ternary plots need exactly three response columns, got {}",
            a.columns.response_cols.len()
        ))
        .into());
    }
    let table = read_table(&a.columns.data, &a.columns.response_cols, &[])?;
    let alpha = alpha(&a.pns)?;
    let models: Vec<(String, PnsModel)> = if let Some(path) = &a.model {
        vec![("model".to_string(), read_model(path)?.pns)]
    } else if a.both_kinds {
        vec![
            ("great".to_string(), fit_pns_compositions(&table.responses, alpha, Selection::ForcedGreat)?.model),
            ("small".to_string(), fit_pns_compositions(&table.responses, alpha, Selection::ForcedSmall)?.model),
        ]
    } else {
        let sel = selection(&a.pns);
        let fit = fit_pns_compositions(&table.responses, alpha, sel)?;
        let label = fit.levels.first().map_or("fit".to_string(), |l| l.kind.to_string());
        vec![(label, fit.model)]
    };
    let mut curves = Vec::new();
    let mut means = Vec::new();
    for (label, model) in &models {
        curves.push(ternary_curve(model, label, a.grid)?);
        means.push(mean_composition(model)?);
    }
    let [p1, p2, p3] = [0, 1, 2].map(|j| a.columns.response_cols[j].clone());
    let figure = TernaryFigure {
        labels: [p1, p2, p3],
        points: table.responses,
        curves,
        means,
    };
    write_atomic(&a.out, figure.to_svg()?.as_bytes())?;
    if let Some(path) = &a.csv {
        write_atomic(path, &figure.curves_csv()?)?;
    }
    Ok(())
}

pub fn plot_biplot(a: BiplotArgs) -> CliResult {
    let file = read_model(&a.model)?;
    let names = part_names(&file.response_names, file.pns.dim() + 1);
    let sets = biplot_set(&file.pns, a.grid)?;
    write_atomic(&a.out, biplot_svg(&sets, &names).as_bytes())?;
    if let Some(path) = &a.csv {
        write_atomic(path, &biplot_csv(&sets, &names)?)?;
    }
    for set in &sets {
        let amp = set.amplitudes();
        let line: Vec<String> = names.iter().zip(&amp).map(|(n, v)| format!("{n}={v:.4}")).collect();
        println!("score {} amplitudes: {}", set.score_index, line.join(" "));
    }
    Ok(())
}
