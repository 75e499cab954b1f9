//! Static figure emitters: ternary diagrams of three-part data with fitted
//! PNS curves, and biplot paths.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::SpherePoint;
use crate::pns::{biplot_paths, score_range, BiplotPaths, PnsModel};
use crate::simplex::{inverse_power_transform, Composition};

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Cartesian position in the unit equilateral triangle with corners
/// (0, 0), (1, 0) and (1/2, √3/2) for parts 1, 2 and 3.
pub fn ternary_xy(c: &Composition) -> Result<(f64, f64)> {
    if c.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: c.len() });
    }
    let p = c.parts();
    Ok((p[1] + 0.5 * p[2], SQRT3_2 * p[2]))
}

/// A fitted curve, split wherever it leaves the positive orthant.
#[derive(Debug, Clone, PartialEq)]
pub struct TernaryCurve {
    pub label: String,
    pub segments: Vec<Vec<Composition>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TernaryFigure {
    pub labels: [String; 3],
    pub points: Vec<Composition>,
    pub curves: Vec<TernaryCurve>,
    pub means: Vec<Composition>,
}

fn on_orthant(p: &SpherePoint) -> Option<SpherePoint> {
    const TOL: f64 = 1e-12;
    if p.coords().iter().any(|&q| q < -TOL) {
        return None;
    }
    SpherePoint::normalize(p.coords().iter().map(|q| q.max(0.0)).collect()).ok()
}

/// The final nested circle of a model on `S^2`, sampled at `n_grid` values
/// of the circular score and kept only where it lies in the orthant.
pub fn ternary_curve(model: &PnsModel, label: &str, n_grid: usize) -> Result<TernaryCurve> {
    if model.dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "ternary plots need three parts, model has {}",
            model.dim() + 1
        )));
    }
    let rho = model.circle_radius();
    let mut segments: Vec<Vec<Composition>> = Vec::new();
    let mut current: Vec<Composition> = Vec::new();
    let mut head_inside = false;
    for i in 0..n_grid {
        let t = -rho * PI + 2.0 * rho * PI * i as f64 / n_grid as f64;
        let p = model.scores_to_sphere(&[t, 0.0], 2)?;
        match on_orthant(&p) {
            Some(q) => {
                head_inside |= i == 0;
                current.push(inverse_power_transform(&q, model.alpha())?);
            }
            None => {
                if !current.is_empty() {
                    segments.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        // the grid is periodic: join the tail to the head when both are inside
        match segments.first_mut() {
            Some(head) if head_inside => {
                current.append(head);
                *head = current;
            }
            _ => segments.push(current),
        }
    }
    Ok(TernaryCurve {
        label: label.to_string(),
        segments,
    })
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const CURVE_COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

impl TernaryFigure {
    /// SVG with one `<path>` per curve.
    pub fn to_svg(&self) -> Result<String> {
        let (size, margin) = (500.0, 50.0);
        let map = |c: &Composition| -> Result<(f64, f64)> {
            let (x, y) = ternary_xy(c)?;
            Ok((margin + size * x, margin + size * (SQRT3_2 - y)))
        };
        let width = size + 2.0 * margin;
        let height = size * SQRT3_2 + 2.0 * margin;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
        );
        let corners = [(margin, margin + size * SQRT3_2), (margin + size, margin + size * SQRT3_2), (margin + size / 2.0, margin)];
        let _ = writeln!(
            s,
            r#"<polygon points="{},{} {},{} {},{}" fill="none" stroke="black"/>"#,
            corners[0].0, corners[0].1, corners[1].0, corners[1].1, corners[2].0, corners[2].1
        );
        let offsets = [(-20.0, 20.0), (5.0, 20.0), (-10.0, -10.0)];
        for ((label, (x, y)), (dx, dy)) in self.labels.iter().zip(corners).zip(offsets) {
            let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="16">{}</text>"#, x + dx, y + dy, escape(label));
        }
        for c in &self.points {
            let (x, y) = map(c)?;
            let _ = writeln!(s, r##"<circle cx="{x}" cy="{y}" r="2" fill="#555555"/>"##);
        }
        for (k, curve) in self.curves.iter().enumerate() {
            let mut d = String::new();
            for seg in &curve.segments {
                for (i, c) in seg.iter().enumerate() {
                    let (x, y) = map(c)?;
                    let _ = write!(d, "{}{x} {y} ", if i == 0 { 'M' } else { 'L' });
                }
            }
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="2"><title>{}</title></path>"#,
                d.trim_end(),
                CURVE_COLOURS[k % CURVE_COLOURS.len()],
                escape(&curve.label)
            );
        }
        for c in &self.means {
            let (x, y) = map(c)?;
            let _ = writeln!(s, r##"<circle cx="{x}" cy="{y}" r="6" fill="#ffd700" stroke="black"/>"##);
        }
        s.push_str("</svg>\n");
        Ok(s)
    }

    /// Curve samples as `curve,segment,index,<parts>,x,y` rows.
    pub fn curves_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["curve".to_string(), "segment".into(), "index".into()];
        header.extend(self.labels.iter().cloned());
        header.extend(["x".to_string(), "y".into()]);
        w.write_record(&header)?;
        for curve in &self.curves {
            for (si, seg) in curve.segments.iter().enumerate() {
                for (i, c) in seg.iter().enumerate() {
                    let (x, y) = ternary_xy(c)?;
                    let mut row = vec![curve.label.clone(), si.to_string(), i.to_string()];
                    row.extend(c.parts().iter().map(|v| v.to_string()));
                    row.extend([x.to_string(), y.to_string()]);
                    w.write_record(&row)?;
                }
            }
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Default half-width of the biplot grid for score `j`: half of the valid
/// range on the circle, and half the distance to the nearer end otherwise.
pub fn default_half_width(model: &PnsModel, j: usize) -> Result<f64> {
    let (lo, hi) = score_range(model, j)?;
    Ok(0.5 * (-lo).min(hi))
}

/// Biplot paths for score 1 and, when the model has one, score 2, each over
/// a symmetric grid of `n_grid` points.
pub fn biplot_set(model: &PnsModel, n_grid: usize) -> Result<Vec<BiplotPaths>> {
    if n_grid < 2 {
        return Err(Error::InvalidInput("biplot grid needs at least two points".into()));
    }
    if model.collapsed().is_some() {
        return Err(Error::Degenerate("model collapsed to a point; no score paths".into()));
    }
    let scores: Vec<usize> = if model.dim() >= 2 { vec![1, 2] } else { vec![1] };
    scores
        .into_iter()
        .map(|j| {
            let h = default_half_width(model, j)?;
            let grid: Vec<f64> = (0..n_grid).map(|i| -h + 2.0 * h * i as f64 / (n_grid - 1) as f64).collect();
            biplot_paths(model, j, &grid)
        })
        .collect()
}

/// Long-format CSV: `score_index,part,t,value`.
pub fn biplot_csv(sets: &[BiplotPaths], part_names: &[String]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["score_index", "part", "t", "value"])?;
    for set in sets {
        for (j, path) in set.paths.iter().enumerate() {
            let name = part_names.get(j).cloned().unwrap_or_else(|| format!("part{}", j + 1));
            for (t, v) in set.grid.iter().zip(path) {
                w.write_record([set.score_index.to_string(), name.clone(), t.to_string(), v.to_string()])?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// One panel per score, one `<path>` per part.
pub fn biplot_svg(sets: &[BiplotPaths], part_names: &[String]) -> String {
    let (pw, ph, margin) = (420.0, 320.0, 50.0);
    let width = sets.len() as f64 * (pw + margin) + margin;
    let height = ph + 2.0 * margin;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let all = sets.iter().flat_map(|b| b.paths.iter().flatten().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    for (k, set) in sets.iter().enumerate() {
        let x0 = margin + k as f64 * (pw + margin);
        let (t0, t1) = (set.grid[0], set.grid[set.grid.len() - 1]);
        let tspan = if t1 > t0 { t1 - t0 } else { 1.0 };
        let map = |t: f64, v: f64| (x0 + pw * (t - t0) / tspan, margin + ph * (hi - v) / span);
        let _ = writeln!(s, r#"<rect x="{x0}" y="{margin}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let (zx, _) = map(0.0, lo);
        let _ = writeln!(
            s,
            r#"<line x1="{zx}" y1="{margin}" x2="{zx}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#,
            margin + ph
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="14">score {}</text>"#,
            x0 + pw / 2.0 - 25.0,
            margin + ph + 30.0,
            set.score_index
        );
        for (j, path) in set.paths.iter().enumerate() {
            let name = part_names.get(j).cloned().unwrap_or_else(|| format!("part{}", j + 1));
            let mut d = String::new();
            for (i, (t, v)) in set.grid.iter().zip(path).enumerate() {
                let (x, y) = map(*t, *v);
                let _ = write!(d, "{}{x} {y} ", if i == 0 { 'M' } else { 'L' });
            }
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="2"><title>{}</title></path>"#,
                d.trim_end(),
                CURVE_COLOURS[j % CURVE_COLOURS.len()],
                escape(&name)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
