use pnsreg::eval::{simulate_dataset, SimulationConfig};
use pnsreg::pns::fit_pns_compositions;
use pnsreg::plot::{biplot_csv, biplot_set, biplot_svg, ternary_curve, ternary_xy, TernaryFigure};
use pnsreg::simplex::{inverse_power_transform, normalize};
use pnsreg::{Alpha, PnsModel, Selection, SpherePoint, Subsphere};

fn distance_to_line(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    ((p.0 - a.0) * dy - (p.1 - a.1) * dx).abs() / dx.hypot(dy)
}

fn circle_model(axis: [f64; 3], angle: f64, alpha: f64) -> PnsModel {
    let axis = SpherePoint::normalize(axis.to_vec()).unwrap();
    let level = Subsphere::new(axis, angle).unwrap();
    PnsModel::from_parts(vec![level], 0.3, Alpha::new(alpha).unwrap()).unwrap()
}

fn points(curve: &pnsreg::plot::TernaryCurve) -> Vec<(f64, f64)> {
    curve.segments.iter().flatten().map(|c| ternary_xy(c).unwrap()).collect()
}

#[test]
fn great_circle_is_straight_when_alpha_is_one() {
    for axis in [[1.0, -2.0, 0.5], [0.3, 0.3, -1.0], [-1.0, 0.2, 0.9]] {
        let curve = ternary_curve(&circle_model(axis, std::f64::consts::FRAC_PI_2, 1.0), "great", 400).unwrap();
        let pts = points(&curve);
        assert!(pts.len() > 10);
        let (a, b) = (pts[0], pts[pts.len() / 2]);
        let (a, b) = if (a.0 - b.0).hypot(a.1 - b.1) > 0.05 { (a, b) } else { (a, pts[pts.len() - 1]) };
        for p in &pts {
            assert!(distance_to_line(*p, a, b) < 1e-6);
        }
    }
}

#[test]
fn small_circle_bends() {
    let model = circle_model([1.0, 1.0, 1.0], 0.3, 1.0);
    let curve = ternary_curve(&model, "small", 400).unwrap();
    let pts = points(&curve);
    assert_eq!(curve.segments.len(), 1);
    let (a, b) = (pts[0], pts[pts.len() / 3]);
    assert!(pts.iter().map(|p| distance_to_line(*p, a, b)).fold(0.0, f64::max) > 1e-2);
}

#[test]
fn curve_points_are_compositions_on_the_circle() {
    let model = circle_model([0.2, 1.0, 0.4], 0.8, 0.5);
    let curve = ternary_curve(&model, "c", 300).unwrap();
    assert!(!curve.segments.is_empty());
    for c in curve.segments.iter().flatten() {
        assert!(c.parts().iter().all(|v| *v >= 0.0));
        let q = pnsreg::simplex::power_transform(c, model.alpha());
        let level = &model.levels()[0];
        let dist = pnsreg::geom::geodesic_dist(&q, level.axis()).unwrap();
        assert!((dist - level.angle()).abs() < 1e-9);
    }
}

#[test]
fn ternary_svg_is_well_formed() {
    let data: Vec<_> = (0..40)
        .map(|i| {
            let t = i as f64 / 39.0;
            normalize(&[0.2 + t, 0.5 + 0.3 * (3.0 * t).sin(), 0.4 - 0.3 * t + 0.05 * (7.0 * t).cos()]).unwrap()
        })
        .collect();
    let mut curves = Vec::new();
    let mut means = Vec::new();
    for selection in [Selection::ForcedGreat, Selection::ForcedSmall] {
        let fit = fit_pns_compositions(&data, Alpha::SQRT, selection).unwrap();
        curves.push(ternary_curve(&fit.model, &format!("{selection:?} <fit>"), 200).unwrap());
        means.push(inverse_power_transform(&fit.model.mean(), Alpha::SQRT).unwrap());
    }
    let fig = TernaryFigure {
        labels: ["A".into(), "B & C".into(), "D".into()],
        points: data,
        curves,
        means,
    };
    let svg = fig.to_svg().unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let count = |tag: &str| doc.descendants().filter(|n| n.has_tag_name(tag)).count();
    assert_eq!(count("path"), 2);
    assert_eq!(count("circle"), 42);
    assert_eq!(count("text"), 3);
    let csv = String::from_utf8(fig.curves_csv().unwrap()).unwrap();
    let rows = csv.lines().count() - 1;
    let samples: usize = fig.curves.iter().flat_map(|c| &c.segments).map(Vec::len).sum();
    assert_eq!(rows, samples);
}

#[test]
fn biplot_outputs_agree() {
    let data = simulate_dataset(&SimulationConfig::default()).unwrap();
    let fit = fit_pns_compositions(&data.y, Alpha::SQRT, Selection::Bic).unwrap();
    let sets = biplot_set(&fit.model, 51).unwrap();
    assert_eq!(sets.len(), 2);
    let names: Vec<String> = (1..=5).map(|i| format!("p{i}")).collect();
    let svg = biplot_svg(&sets, &names);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("path")).count(), 10);
    let csv = String::from_utf8(biplot_csv(&sets, &names).unwrap()).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2 * 5 * 51);
    for row in &rows {
        let (score, part, t, value): (usize, &str, f64, f64) =
            (row[0].parse().unwrap(), &row[1], row[2].parse().unwrap(), row[3].parse().unwrap());
        let set = &sets[score - 1];
        let j = names.iter().position(|n| n == part).unwrap();
        let i = set.grid.iter().position(|g| *g == t).unwrap();
        assert_eq!(set.paths[j][i], value);
    }
    for set in &sets {
        assert!((set.grid[0] + set.grid[50]).abs() < 1e-12);
        assert!(set.grid[25].abs() < 1e-12);
    }
}

#[test]
fn ternary_needs_three_parts() {
    let data = simulate_dataset(&SimulationConfig::default()).unwrap();
    let fit = fit_pns_compositions(&data.y, Alpha::SQRT, Selection::Bic).unwrap();
    assert!(ternary_curve(&fit.model, "x", 10).is_err());
    assert!(biplot_set(&fit.model, 1).is_err());
}
