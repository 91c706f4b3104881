//! Hand-written SVG for the projection scatter and the residual heatmap.
//! Output depends only on the input values, so files compare byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use crate::culture::CultureZone;

use super::{write_file, AlignmentReport, PipelineError};

/// Fill colors by cluster index.
pub const CLUSTER_PALETTE: [&str; 14] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#637939", "#8c6d31", "#843c39",
];

const SHAPES: [Shape; 8] = [
    Shape::Circle,
    Shape::Square,
    Shape::TriangleUp,
    Shape::Diamond,
    Shape::TriangleDown,
    Shape::Pentagon,
    Shape::Hexagon,
    Shape::Cross,
];

#[derive(Clone, Copy)]
enum Shape {
    Circle,
    Square,
    TriangleUp,
    Diamond,
    TriangleDown,
    Pentagon,
    Hexagon,
    Cross,
}

fn zone_shape(zone: Option<CultureZone>) -> Option<Shape> {
    zone.map(|z| SHAPES[z.index()])
}

/// Two decimals, never `-0.00`.
fn f2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn polygon(cx: f64, cy: f64, r: f64, sides: usize, rotation_deg: f64) -> String {
    (0..sides)
        .map(|i| {
            let a = (rotation_deg + 360.0 * i as f64 / sides as f64).to_radians();
            format!("{},{}", f2(cx + r * a.cos()), f2(cy + r * a.sin()))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn marker(out: &mut String, class: &str, shape: Option<Shape>, cx: f64, cy: f64, r: f64, fill: &str) {
    let style = format!(r##"class="{class}" fill="{fill}" stroke="#222222" stroke-width="0.8""##);
    let poly = |pts: String| format!(r#"<polygon {style} points="{pts}"/>"#);
    let el = match shape {
        None => format!(
            r#"<path {style} d="M{} {} L{} {} L{} {} L{} {} Z"/>"#,
            f2(cx),
            f2(cy - r),
            f2(cx + r),
            f2(cy),
            f2(cx),
            f2(cy + r),
            f2(cx - r),
            f2(cy)
        ),
        Some(Shape::Circle) => format!(r#"<circle {style} cx="{}" cy="{}" r="{}"/>"#, f2(cx), f2(cy), f2(r)),
        Some(Shape::Square) => format!(
            r#"<rect {style} x="{}" y="{}" width="{}" height="{}"/>"#,
            f2(cx - r * 0.85),
            f2(cy - r * 0.85),
            f2(r * 1.7),
            f2(r * 1.7)
        ),
        Some(Shape::TriangleUp) => poly(polygon(cx, cy, r * 1.15, 3, -90.0)),
        Some(Shape::TriangleDown) => poly(polygon(cx, cy, r * 1.15, 3, 90.0)),
        Some(Shape::Diamond) => poly(polygon(cx, cy, r * 1.15, 4, 0.0)),
        Some(Shape::Pentagon) => poly(polygon(cx, cy, r * 1.1, 5, -90.0)),
        Some(Shape::Hexagon) => poly(polygon(cx, cy, r * 1.05, 6, 0.0)),
        Some(Shape::Cross) => {
            let a = r * 0.35;
            let b = r;
            let pts = [
                (-a, -b),
                (a, -b),
                (a, -a),
                (b, -a),
                (b, a),
                (a, a),
                (a, b),
                (-a, b),
                (-a, a),
                (-b, a),
                (-b, -a),
                (-a, -a),
            ]
            .iter()
            .map(|(dx, dy)| format!("{},{}", f2(cx + dx), f2(cy + dy)))
            .collect::<Vec<_>>()
            .join(" ");
            poly(pts)
        }
    };
    out.push_str("  ");
    out.push_str(&el);
    out.push('\n');
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub cluster: usize,
    pub zone: Option<CultureZone>,
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 520.0;
const MARGIN: f64 = 50.0;
const LEGEND_W: f64 = 220.0;

/// Scatter of projected points: fill by cluster, marker shape by zone, with a
/// legend for both. Every data point is one element with class `marker`.
pub fn render_scatter(points: &[ScatterPoint], title: &str) -> String {
    let width = MARGIN * 2.0 + PLOT_W + LEGEND_W;
    let height = MARGIN * 2.0 + PLOT_H;
    let bounds = |f: fn(&ScatterPoint) -> f64| {
        let lo = points.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo {
            (lo, hi)
        } else {
            let c = if lo.is_finite() { lo } else { 0.0 };
            (c - 1.0, c + 1.0)
        }
    };
    let (x0, x1) = bounds(|p| p.x);
    let (y0, y1) = bounds(|p| p.y);
    let pad = 0.05;
    let sx = |x: f64| MARGIN + PLOT_W * (pad + (1.0 - 2.0 * pad) * (x - x0) / (x1 - x0));
    let sy = |y: f64| MARGIN + PLOT_H * (1.0 - pad - (1.0 - 2.0 * pad) * (y - y0) / (y1 - y0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = f2(width),
        h = f2(height)
    );
    let _ = writeln!(
        s,
        r##"  <rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##,
        f2(width),
        f2(height)
    );
    let _ = writeln!(
        s,
        r#"  <text x="{}" y="{}" font-size="16" text-anchor="middle">{}</text>"#,
        f2(MARGIN + PLOT_W / 2.0),
        f2(MARGIN * 0.6),
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"  <rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#888888"/>"##,
        f2(MARGIN),
        f2(MARGIN),
        f2(PLOT_W),
        f2(PLOT_H)
    );
    let _ = writeln!(
        s,
        r#"  <text x="{}" y="{}" font-size="12" text-anchor="middle">t-SNE 1</text>"#,
        f2(MARGIN + PLOT_W / 2.0),
        f2(MARGIN + PLOT_H + 30.0)
    );
    let _ = writeln!(
        s,
        r#"  <text x="{x}" y="{y}" font-size="12" text-anchor="middle" transform="rotate(-90 {x} {y})">t-SNE 2</text>"#,
        x = f2(MARGIN - 20.0),
        y = f2(MARGIN + PLOT_H / 2.0)
    );

    for p in points {
        let (cx, cy) = (sx(p.x), sy(p.y));
        marker(
            &mut s,
            "marker",
            zone_shape(p.zone),
            cx,
            cy,
            6.0,
            CLUSTER_PALETTE[p.cluster % CLUSTER_PALETTE.len()],
        );
        let _ = writeln!(
            s,
            r##"  <text class="point-label" x="{}" y="{}" font-size="9" fill="#333333">{}</text>"##,
            f2(cx + 8.0),
            f2(cy + 3.0),
            escape(&p.label)
        );
    }

    // legend
    let lx = MARGIN * 1.5 + PLOT_W;
    let mut ly = MARGIN + 10.0;
    let _ = writeln!(
        s,
        r#"  <text x="{}" y="{}" font-size="12" font-weight="bold">Cluster</text>"#,
        f2(lx),
        f2(ly)
    );
    let mut clusters: Vec<usize> = points.iter().map(|p| p.cluster).collect();
    clusters.sort_unstable();
    clusters.dedup();
    for c in clusters {
        ly += 18.0;
        marker(
            &mut s,
            "legend-marker",
            Some(Shape::Circle),
            lx + 6.0,
            ly - 4.0,
            5.0,
            CLUSTER_PALETTE[c % CLUSTER_PALETTE.len()],
        );
        let _ = writeln!(
            s,
            r#"  <text x="{}" y="{}" font-size="11">{c}</text>"#,
            f2(lx + 18.0),
            f2(ly)
        );
    }
    ly += 30.0;
    let _ = writeln!(
        s,
        r#"  <text x="{}" y="{}" font-size="12" font-weight="bold">Cultural zone</text>"#,
        f2(lx),
        f2(ly)
    );
    let mut zones: Vec<Option<CultureZone>> = points.iter().map(|p| p.zone).collect();
    zones.sort_unstable();
    zones.dedup();
    for z in zones {
        ly += 18.0;
        marker(
            &mut s,
            "legend-marker",
            zone_shape(z),
            lx + 6.0,
            ly - 4.0,
            5.0,
            "#dddddd",
        );
        let name = z.map_or("none (GLOBAL)", CultureZone::display_name);
        let _ = writeln!(
            s,
            r#"  <text x="{}" y="{}" font-size="11">{}</text>"#,
            f2(lx + 18.0),
            f2(ly),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

const CELL_W: f64 = 110.0;
const CELL_H: f64 = 36.0;
const HEAT_LEFT: f64 = 100.0;
const HEAT_TOP: f64 = 120.0;

fn lerp_color(from: (f64, f64, f64), to: (f64, f64, f64), t: f64) -> String {
    let c = |a: f64, b: f64| (a + (b - a) * t).round().clamp(0.0, 255.0) as u8;
    format!("#{:02x}{:02x}{:02x}", c(from.0, to.0), c(from.1, to.1), c(from.2, to.2))
}

/// Diverging blue–white–red color for `v` on a scale symmetric about 0.
fn diverging(v: f64, limit: f64) -> String {
    const MID: (f64, f64, f64) = (247.0, 247.0, 247.0);
    const NEG: (f64, f64, f64) = (33.0, 102.0, 172.0);
    const POS: (f64, f64, f64) = (178.0, 24.0, 43.0);
    if limit <= 0.0 || v == 0.0 {
        return lerp_color(MID, MID, 0.0);
    }
    let t = (v.abs() / limit).min(1.0);
    lerp_color(MID, if v > 0.0 { POS } else { NEG }, t)
}

/// Residual grid with clusters as rows and zones as columns. Cells beyond
/// `threshold` in magnitude get class `outlined` and a heavy border.
pub fn render_residual_heatmap(
    row_labels: &[String],
    col_labels: &[String],
    residuals: &[Vec<f64>],
    threshold: f64,
) -> String {
    let cols = col_labels.len() as f64;
    let rows = row_labels.len() as f64;
    let width = HEAT_LEFT + CELL_W * cols + 40.0;
    let height = HEAT_TOP + CELL_H * rows + 70.0;
    let limit = residuals.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = f2(width),
        h = f2(height)
    );
    let _ = writeln!(
        s,
        r##"  <rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##,
        f2(width),
        f2(height)
    );
    let _ = writeln!(
        s,
        r#"  <text x="{}" y="30" font-size="15" text-anchor="middle">Standardized residuals (threshold ±{})</text>"#,
        f2(width / 2.0),
        f2(threshold)
    );
    for (j, label) in col_labels.iter().enumerate() {
        let x = HEAT_LEFT + CELL_W * (j as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"  <text x="{x}" y="{y}" font-size="11" text-anchor="start" transform="rotate(-30 {x} {y})">{}</text>"#,
            escape(label),
            x = f2(x),
            y = f2(HEAT_TOP - 8.0)
        );
    }
    for (i, label) in row_labels.iter().enumerate() {
        let y = HEAT_TOP + CELL_H * i as f64;
        let _ = writeln!(
            s,
            r#"  <text x="{}" y="{}" font-size="12" text-anchor="end">{}</text>"#,
            f2(HEAT_LEFT - 8.0),
            f2(y + CELL_H / 2.0 + 4.0),
            escape(label)
        );
        for (j, &r) in residuals[i].iter().enumerate() {
            let x = HEAT_LEFT + CELL_W * j as f64;
            let (class, stroke, sw) = if r.abs() > threshold {
                ("cell outlined", "#000000", "3")
            } else {
                ("cell", "#ffffff", "1")
            };
            let _ = writeln!(
                s,
                r#"  <rect class="{class}" x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="{stroke}" stroke-width="{sw}"/>"#,
                f2(x),
                f2(y),
                f2(CELL_W),
                f2(CELL_H),
                diverging(r, limit)
            );
            let ink = if limit > 0.0 && r.abs() / limit > 0.6 {
                "#ffffff"
            } else {
                "#111111"
            };
            let _ = writeln!(
                s,
                r#"  <text x="{}" y="{}" font-size="12" text-anchor="middle" fill="{ink}">{}</text>"#,
                f2(x + CELL_W / 2.0),
                f2(y + CELL_H / 2.0 + 4.0),
                f2(r)
            );
        }
    }
    // color bar
    let bar_y = HEAT_TOP + CELL_H * rows + 25.0;
    let steps = 11;
    let bar_w = (CELL_W * cols).min(330.0) / steps as f64;
    for k in 0..steps {
        let v = -limit + 2.0 * limit * k as f64 / (steps - 1) as f64;
        let _ = writeln!(
            s,
            r#"  <rect class="scale" x="{}" y="{}" width="{}" height="12" fill="{}"/>"#,
            f2(HEAT_LEFT + bar_w * k as f64),
            f2(bar_y),
            f2(bar_w),
            diverging(v, limit)
        );
    }
    let _ = writeln!(
        s,
        r#"  <text x="{}" y="{}" font-size="10" text-anchor="middle">{}</text>"#,
        f2(HEAT_LEFT),
        f2(bar_y + 26.0),
        f2(-limit)
    );
    let _ = writeln!(
        s,
        r#"  <text x="{}" y="{}" font-size="10" text-anchor="middle">{}</text>"#,
        f2(HEAT_LEFT + bar_w * steps as f64),
        f2(bar_y + 26.0),
        f2(limit)
    );
    s.push_str("</svg>\n");
    s
}

pub fn emit_scatter_svg(report: &AlignmentReport, path: &Path) -> Result<(), PipelineError> {
    let points: Vec<ScatterPoint> = report
        .countries
        .iter()
        .map(|c| ScatterPoint {
            label: c.code.clone(),
            x: c.x,
            y: c.y,
            cluster: c.cluster,
            zone: c.zone,
        })
        .collect();
    let title = format!("Country projection, k = {}", report.clustering.k);
    write_file(path, render_scatter(&points, &title).as_bytes())
}

pub fn emit_residual_heatmap_svg(report: &AlignmentReport, path: &Path) -> Result<(), PipelineError> {
    let rows: Vec<String> = report
        .contingency
        .row_labels
        .iter()
        .map(|r| format!("Cluster {r}"))
        .collect();
    let cols: Vec<String> = report
        .contingency
        .col_labels
        .iter()
        .map(|c| {
            c.parse::<CultureZone>()
                .map_or_else(|_| c.clone(), |z| z.display_name().to_string())
        })
        .collect();
    let svg = render_residual_heatmap(
        &rows,
        &cols,
        &report.association.residuals,
        report.params.residual_threshold,
    );
    write_file(path, svg.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(label: &str, x: f64, y: f64, cluster: usize, zone: Option<CultureZone>) -> ScatterPoint {
        ScatterPoint {
            label: label.into(),
            x,
            y,
            cluster,
            zone,
        }
    }

    #[test]
    fn one_marker_per_point() {
        let svg = render_scatter(
            &[
                pt("US", 0.0, 1.0, 0, Some(CultureZone::EnglishSpeaking)),
                pt("KR", 3.0, -2.0, 1, Some(CultureZone::Confucian)),
            ],
            "t",
        );
        assert_eq!(svg.matches(r#"class="marker""#).count(), 2);
        assert!(svg.contains(CLUSTER_PALETTE[0]) && svg.contains(CLUSTER_PALETTE[1]));
    }

    #[test]
    fn every_zone_has_a_distinct_shape() {
        let points: Vec<_> = CultureZone::ALL
            .iter()
            .map(|&z| pt("XX", 0.0, 0.0, 0, Some(z)))
            .collect();
        let svg = render_scatter(&points, "t");
        let marks: std::collections::BTreeSet<&str> = svg.lines().filter(|l| l.contains(r#"class="marker""#)).collect();
        // identical position and color: only the shape can tell them apart
        assert_eq!(marks.len(), 8);
    }

    #[test]
    fn degenerate_and_escaped() {
        let svg = render_scatter(&[pt("<A&B>", 1.0, 1.0, 0, None)], "x < y");
        assert!(svg.contains("&lt;A&amp;B&gt;"));
        assert!(svg.contains("x &lt; y"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn zero_residuals_are_uniform_without_outlines() {
        let labels = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
        let svg = render_residual_heatmap(&labels(2), &labels(2), &[vec![0.0, 0.0], vec![0.0, 0.0]], 2.5);
        assert!(!svg.contains("outlined"));
        let fills: std::collections::BTreeSet<&str> = svg
            .lines()
            .filter(|l| l.contains(r#"class="cell""#))
            .map(|l| l.split("fill=\"").nth(1).unwrap().split('"').next().unwrap())
            .collect();
        assert_eq!(fills.len(), 1);
        assert!(svg.contains(">0.00<"));
    }

    #[test]
    fn threshold_outlines_cell() {
        let labels = vec!["a".to_string(), "b".to_string()];
        let svg = render_residual_heatmap(&labels, &labels, &[vec![3.0, -1.0], vec![-1.0, 2.5]], 2.5);
        assert_eq!(svg.matches("cell outlined").count(), 1);
        assert!(svg.contains(">3.00<") && svg.contains(">-1.00<"));
    }

    #[test]
    fn negative_zero_is_normalized() {
        assert_eq!(f2(-0.0001), "0.00");
        assert_eq!(f2(-1.234), "-1.23");
    }
}
