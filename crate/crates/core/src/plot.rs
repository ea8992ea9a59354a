//! Standalone SVG plots on the unit square.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::map::{MapError, MapExpr};
use crate::pa::{exact_to_f64, to_piecewise_affine};

const SIZE: f64 = 400.0;
const MARGIN: f64 = 40.0;
const PLOT: f64 = SIZE - 2.0 * MARGIN;
const PALETTE: [&str; 6] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Graph,
    Cobweb,
    Histogram,
    Basin,
}

impl std::str::FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "graph" => Ok(PlotKind::Graph),
            "cobweb" => Ok(PlotKind::Cobweb),
            "histogram" => Ok(PlotKind::Histogram),
            "basin" => Ok(PlotKind::Basin),
            other => Err(format!("unknown plot kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Overlay {
    /// `y = x`
    Diagonal,
    /// `y = 1/2`
    Half,
}

impl std::str::FromStr for Overlay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "diagonal" => Ok(Overlay::Diagonal),
            "half" => Ok(Overlay::Half),
            other => Err(format!("unknown overlay `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub expression: String,
    pub resolution: usize,
    pub overlays: Vec<Overlay>,
}

impl PlotSpec {
    pub const MIN_RESOLUTION: usize = 16;

    pub fn new(kind: PlotKind, expression: &str) -> Self {
        PlotSpec {
            kind,
            expression: expression.into(),
            resolution: 512,
            overlays: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    /// Polylines of the graph, split at jumps.
    Graph(Vec<Vec<(f64, f64)>>),
    Cobweb {
        graph: Vec<Vec<(f64, f64)>>,
        orbit: Vec<f64>,
    },
    Histogram(Vec<f64>),
    /// Target index per grid cell.
    Basin(Vec<Option<usize>>),
}

/// Graph of `expr`: exact vertices for piecewise-affine maps, otherwise
/// `resolution + 1` samples split at the leaves' jump points.
pub fn graph_series(expr: &MapExpr, resolution: usize) -> Result<Vec<Vec<(f64, f64)>>, MapError> {
    if let Ok(pa) = to_piecewise_affine(expr) {
        let mut lines: Vec<Vec<(f64, f64)>> = Vec::new();
        let cuts = pa.breakpoints();
        for (i, seg) in pa.segments().iter().enumerate() {
            let (a, b) = (cuts[i], cuts[i + 1]);
            let start = (exact_to_f64(a), exact_to_f64(seg.at(a)));
            let end = (exact_to_f64(b), exact_to_f64(seg.at(b)));
            match lines.last_mut() {
                Some(line) if line.last() == Some(&start) => line.push(end),
                _ => lines.push(vec![start, end]),
            }
        }
        let one = exact_to_f64(pa.value_at_one());
        if lines.last().and_then(|l| l.last()) != Some(&(1.0, one)) {
            lines.push(vec![(1.0, one)]);
        }
        return Ok(lines);
    }
    let n = resolution.max(PlotSpec::MIN_RESOLUTION);
    let jumps = expr.jump_points();
    let mut lines = vec![Vec::new()];
    let mut next_jump = 0;
    for i in 0..=n {
        let x = i as f64 / n as f64;
        while next_jump < jumps.len() && jumps[next_jump] <= x {
            if jumps[next_jump] < x || i > 0 {
                lines.push(Vec::new());
            }
            next_jump += 1;
        }
        lines.last_mut().unwrap().push((x, expr.eval(x)?));
    }
    lines.retain(|l| !l.is_empty());
    Ok(lines)
}

fn px(x: f64) -> f64 {
    MARGIN + x * PLOT
}

fn py(y: f64) -> f64 {
    SIZE - MARGIN - y * PLOT
}

fn points_attr(points: &[(f64, f64)]) -> String {
    points
        .iter()
        .map(|(x, y)| format!("{:.3},{:.3}", px(*x), py(*y)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn polyline(out: &mut String, points: &[(f64, f64)], stroke: &str, width: f64) {
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{stroke}" stroke-width="{width}" points="{}"/>"#,
        points_attr(points)
    );
}

fn axes(out: &mut String) {
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT}" height="{PLOT}" fill="none" stroke="#000"/>"##
    );
    for t in [0.0, 0.5, 1.0] {
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-size="11" text-anchor="middle">{t}</text>"#,
            px(t),
            SIZE - MARGIN + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-size="11" text-anchor="end">{t}</text>"#,
            MARGIN - 6.0,
            py(t) + 4.0
        );
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders a plot of the unit square as a standalone SVG document.
pub fn render_plot(spec: &PlotSpec, data: &PlotData) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        out,
        r#"<title>{:?} {}</title>"#,
        spec.kind,
        escape(&spec.expression)
    );
    axes(&mut out);
    for overlay in &spec.overlays {
        let line = match overlay {
            Overlay::Diagonal => [(0.0, 0.0), (1.0, 1.0)],
            Overlay::Half => [(0.0, 0.5), (1.0, 0.5)],
        };
        let _ = writeln!(
            out,
            r##"<polyline class="overlay" fill="none" stroke="#999" stroke-dasharray="4 3" points="{}"/>"##,
            points_attr(&line)
        );
    }
    match data {
        PlotData::Graph(lines) => {
            for line in lines {
                polyline(&mut out, line, "#1f4e9c", 1.5);
            }
        }
        PlotData::Cobweb { graph, orbit } => {
            for line in graph {
                polyline(&mut out, line, "#1f4e9c", 1.5);
            }
            if !spec.overlays.contains(&Overlay::Diagonal) {
                polyline(&mut out, &[(0.0, 0.0), (1.0, 1.0)], "#999", 1.0);
            }
            if let Some(first) = orbit.first() {
                let mut stairs = vec![(*first, 0.0)];
                for w in orbit.windows(2) {
                    stairs.push((w[0], w[1]));
                    stairs.push((w[1], w[1]));
                }
                polyline(&mut out, &stairs, "#c0392b", 1.0);
            }
        }
        PlotData::Histogram(densities) => {
            let bins = densities.len().max(1);
            let top = densities
                .iter()
                .cloned()
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);
            let width = PLOT / bins as f64;
            for (i, d) in densities.iter().enumerate() {
                let h = d / top * PLOT;
                let _ = writeln!(
                    out,
                    r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#1f4e9c"/>"##,
                    px(i as f64 / bins as f64),
                    SIZE - MARGIN - h,
                    width,
                    h
                );
            }
        }
        PlotData::Basin(classes) => {
            let n = classes.len().max(1);
            let width = PLOT / n as f64;
            for (i, c) in classes.iter().enumerate() {
                let fill = c.map_or("#dddddd", |t| PALETTE[t % PALETTE.len()]);
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
                    px(i as f64 / n as f64),
                    py(0.6),
                    width,
                    0.2 * PLOT
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
