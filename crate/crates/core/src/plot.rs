//! SVG figures: one encounter, a grid of encounters from one cluster, and a loss curve.
//!
//! Vehicles are drawn as polylines with a filled circle at the start and a cross at the end.

use std::fmt::Write as _;

use crate::encounter::Encounter;
use crate::ingest::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub panel_width: f64,
    pub panel_height: f64,
    pub stroke_a: String,
    pub stroke_b: String,
    pub stroke_width: f64,
    pub marker_radius: f64,
    /// Panels per row in cluster grids.
    pub columns: usize,
    pub max_panels: usize,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            panel_width: 320.0,
            panel_height: 260.0,
            stroke_a: "#1f77b4".into(),
            stroke_b: "#d62728".into(),
            stroke_width: 1.5,
            marker_radius: 4.0,
            columns: 3,
            max_panels: 6,
        }
    }
}

const MARGIN_LEFT: f64 = 62.0;
const MARGIN_RIGHT: f64 = 14.0;
const MARGIN_TOP: f64 = 26.0;
const MARGIN_BOTTOM: f64 = 44.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn open_svg(width: f64, height: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Data-to-pixel mapping of one plotting area.
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0) * self.h
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    let pad = if span > 0.0 { span * 0.08 } else { lo.abs().max(1.0) * 1e-4 };
    (lo - pad, hi + pad)
}

/// Frame, axis labels and min/max tick values.
fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str, decimals: usize) {
    let _ = writeln!(
        out,
        "<rect class=\"axes\" x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>",
        f.x0, f.y0, f.w, f.h
    );
    let bottom = f.y0 + f.h;
    for (x, anchor) in [(f.x_range.0, "start"), (f.x_range.1, "end")] {
        let _ = writeln!(
            out,
            "<text class=\"tick\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"9\" text-anchor=\"{anchor}\">{x:.decimals$}</text>",
            f.px(x),
            bottom + 12.0
        );
    }
    for (y, dy) in [(f.y_range.0, 0.0), (f.y_range.1, 8.0)] {
        let _ = writeln!(
            out,
            "<text class=\"tick\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"9\" text-anchor=\"end\">{y:.decimals$}</text>",
            f.x0 - 3.0,
            f.py(y) + dy
        );
    }
    let _ = writeln!(
        out,
        "<text class=\"axis-label\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
        f.x0 + f.w / 2.0,
        bottom + 28.0,
        escape(x_label)
    );
    let (lx, ly) = (f.x0 - 48.0, f.y0 + f.h / 2.0);
    let _ = writeln!(
        out,
        "<text class=\"axis-label\" x=\"{lx:.2}\" y=\"{ly:.2}\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 {lx:.2} {ly:.2})\">{}</text>",
        escape(y_label)
    );
}

fn vehicle(out: &mut String, f: &Frame, traj: &Trajectory, class: &str, color: &str, style: &PlotStyle) {
    if traj.points.is_empty() {
        return;
    }
    let pts: Vec<String> = traj
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", f.px(p.lon), f.py(p.lat)))
        .collect();
    let _ = writeln!(
        out,
        "<polyline class=\"{class}\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{}\"/>",
        pts.join(" "),
        style.stroke_width
    );
    let first = &traj.points[0];
    let last = traj.points.last().unwrap();
    let _ = writeln!(
        out,
        "<circle class=\"start-marker {class}\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"{}\" fill=\"{color}\"/>",
        f.px(first.lon),
        f.py(first.lat),
        style.marker_radius
    );
    let (x, y, r) = (f.px(last.lon), f.py(last.lat), style.marker_radius);
    let _ = writeln!(
        out,
        "<path class=\"end-marker {class}\" d=\"M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}\" stroke=\"{color}\" stroke-width=\"{}\"/>",
        x - r,
        y - r,
        x + r,
        y + r,
        x - r,
        y + r,
        x + r,
        y - r,
        style.stroke_width
    );
}

fn frame_for(encounters: &[&Encounter], x0: f64, y0: f64, style: &PlotStyle) -> Frame {
    let (mut lon, mut lat) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
    for p in encounters.iter().flat_map(|e| e.a.points.iter().chain(&e.b.points)) {
        lon = (lon.0.min(p.lon), lon.1.max(p.lon));
        lat = (lat.0.min(p.lat), lat.1.max(p.lat));
    }
    Frame {
        x0: x0 + MARGIN_LEFT,
        y0: y0 + MARGIN_TOP,
        w: style.panel_width - MARGIN_LEFT - MARGIN_RIGHT,
        h: style.panel_height - MARGIN_TOP - MARGIN_BOTTOM,
        x_range: padded(lon.0, lon.1),
        y_range: padded(lat.0, lat.1),
    }
}

fn panel(out: &mut String, e: Option<&Encounter>, title: &str, x0: f64, y0: f64, style: &PlotStyle) {
    let list: Vec<&Encounter> = e.into_iter().collect();
    let f = frame_for(&list, x0, y0, style);
    let _ = writeln!(
        out,
        "<text class=\"title\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        f.x0 + f.w / 2.0,
        y0 + 16.0,
        escape(title)
    );
    axes(out, &f, "Longitude", "Latitude", 4);
    match e {
        Some(e) => {
            vehicle(out, &f, &e.a, "vehicle-a", &style.stroke_a, style);
            vehicle(out, &f, &e.b, "vehicle-b", &style.stroke_b, style);
        }
        None => {
            let _ = writeln!(
                out,
                "<text class=\"empty\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" fill=\"#888\">empty</text>",
                f.x0 + f.w / 2.0,
                f.y0 + f.h / 2.0
            );
        }
    }
}

/// A single encounter in its own panel.
pub fn encounter_svg(e: &Encounter, style: &PlotStyle) -> String {
    let mut out = open_svg(style.panel_width, style.panel_height);
    panel(&mut out, Some(e), &e.id, 0.0, 0.0, style);
    out.push_str("</svg>\n");
    out
}

/// Up to `style.max_panels` members of one cluster laid out in a grid. An empty member list
/// produces one panel carrying an "empty" annotation.
pub fn cluster_grid_svg(title: &str, members: &[&Encounter], style: &PlotStyle) -> String {
    let shown = members.len().min(style.max_panels.max(1)).max(1);
    let cols = style.columns.clamp(1, shown);
    let rows = shown.div_ceil(cols);
    let header = 24.0;
    let width = cols as f64 * style.panel_width;
    let height = header + rows as f64 * style.panel_height;
    let mut out = open_svg(width, height);
    let _ = writeln!(
        out,
        "<text class=\"grid-title\" x=\"{:.2}\" y=\"17\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
        width / 2.0,
        escape(title)
    );
    for i in 0..shown {
        let (x0, y0) = (
            (i % cols) as f64 * style.panel_width,
            header + (i / cols) as f64 * style.panel_height,
        );
        let e = members.get(i).copied();
        let label = e.map(|e| e.id.as_str()).unwrap_or(title);
        panel(&mut out, e, label, x0, y0, style);
    }
    out.push_str("</svg>\n");
    out
}

/// Epoch-mean loss against epoch number.
pub fn loss_curve_svg(curve: &[f64], style: &PlotStyle) -> String {
    let (w, h) = (style.panel_width * 1.5, style.panel_height);
    let mut out = open_svg(w, h);
    let finite: Vec<f64> = curve.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let f = Frame {
        x0: MARGIN_LEFT,
        y0: MARGIN_TOP,
        w: w - MARGIN_LEFT - MARGIN_RIGHT,
        h: h - MARGIN_TOP - MARGIN_BOTTOM,
        x_range: (1.0, (curve.len().max(2)) as f64),
        y_range: padded(lo, hi),
    };
    let _ = writeln!(
        out,
        "<text class=\"title\" x=\"{:.2}\" y=\"16\" font-size=\"12\" text-anchor=\"middle\">Training cost</text>",
        w / 2.0
    );
    axes(&mut out, &f, "Epoch", "Mean reconstruction error", 3);
    let pts: Vec<String> = curve
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, &v)| format!("{:.2},{:.2}", f.px((i + 1) as f64), f.py(v)))
        .collect();
    if !pts.is_empty() {
        let _ = writeln!(
            out,
            "<polyline class=\"loss\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>",
            pts.join(" "),
            style.stroke_a,
            style.stroke_width
        );
    }
    out.push_str("</svg>\n");
    out
}
