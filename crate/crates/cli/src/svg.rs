//! Plain SVG line plots.
//!
//! Each series becomes exactly one `<polyline>`. Stretches marked unstable are
//! redrawn on top as dashed `<path>` elements, and axes are `<line>` and
//! `<text>` elements. Coordinates are printed with fixed precision so output
//! is byte-stable.

use std::fmt::Write;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub id: String,
    pub points: Vec<(f64, f64)>,
    /// Per-point flag; a segment is drawn dashed when both ends are unstable.
    pub unstable: Vec<bool>,
    /// Index into the palette.
    pub color: usize,
}

impl Series {
    pub fn new(id: impl Into<String>, points: Vec<(f64, f64)>, color: usize) -> Self {
        Series { id: id.into(), points, unstable: Vec::new(), color }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Reference curves drawn as gray `<path>` elements, not polylines.
    pub guides: Vec<Series>,
}

const W: f64 = 480.0;
const H: f64 = 340.0;
const ML: f64 = 64.0;
const MR: f64 = 16.0;
const MT: f64 = 30.0;
const MB: f64 = 46.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round tick values covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn bounds(panel: &Panel) -> ((f64, f64), (f64, f64)) {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    for p in panel.series.iter().chain(&panel.guides).flat_map(|s| &s.points) {
        xs = (xs.0.min(p.0), xs.1.max(p.0));
        ys = (ys.0.min(p.1), ys.1.max(p.1));
    }
    let pad = |(lo, hi): (f64, f64)| {
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            (lo - 0.5 * (1e-3 + lo.abs() * 0.1), hi + 0.5 * (1e-3 + hi.abs() * 0.1))
        } else {
            let m = 0.04 * (hi - lo);
            (lo - m, hi + m)
        }
    };
    (pad(xs), pad(ys))
}

fn panel_body(out: &mut String, panel: &Panel, ox: f64, oy: f64) {
    let ((x0, x1), (y0, y1)) = bounds(panel);
    let pw = W - ML - MR;
    let ph = H - MT - MB;
    let sx = |x: f64| ox + ML + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| oy + MT + (y1 - y) / (y1 - y0) * ph;
    let _ = writeln!(
        out,
        r#"<g class="panel"><text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
        ox + ML + pw / 2.0,
        oy + 18.0,
        esc(&panel.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#444"/>"##,
        ox + ML,
        oy + MT
    );
    for t in ticks(x0, x1, 5) {
        let x = sx(t);
        let yb = oy + MT + ph;
        let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{yb:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/>"##, yb + 4.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#, yb + 15.0, fmt_tick(t));
    }
    for t in ticks(y0, y1, 5) {
        let y = sy(t);
        let xl = ox + ML;
        let _ = writeln!(out, r##"<line x1="{:.2}" y1="{y:.2}" x2="{xl:.2}" y2="{y:.2}" stroke="#444"/>"##, xl - 4.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#, xl - 6.0, y + 3.0, fmt_tick(t));
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
        ox + ML + pw / 2.0,
        oy + H - 8.0,
        esc(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        ox + 14.0,
        oy + MT + ph / 2.0,
        ox + 14.0,
        oy + MT + ph / 2.0,
        esc(&panel.y_label)
    );
    for s in &panel.guides {
        let d: String = s
            .points
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| format!("{}{:.2},{:.2}", if k == 0 { 'M' } else { 'L' }, sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r##"<path class="guide" data-id="{}" d="{d}" fill="none" stroke="#888" stroke-width="1.2"/>"##,
            esc(&s.id)
        );
        dashed(out, s, &sx, &sy);
    }
    for s in &panel.series {
        let color = PALETTE[s.color % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="branch" data-id="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            esc(&s.id),
            pts.join(" ")
        );
        dashed(out, s, &sx, &sy);
    }
    out.push_str("</g>\n");
}

/// White dashes over the unstable stretches of `s`.
fn dashed(out: &mut String, s: &Series, sx: &dyn Fn(f64) -> f64, sy: &dyn Fn(f64) -> f64) {
    let mut d = String::new();
    for k in 1..s.points.len() {
        if s.unstable.get(k - 1).copied().unwrap_or(false) && s.unstable.get(k).copied().unwrap_or(false) {
            let (a, b) = (s.points[k - 1], s.points[k]);
            let _ = write!(d, "M{:.2},{:.2}L{:.2},{:.2}", sx(a.0), sy(a.1), sx(b.0), sy(b.1));
        }
    }
    if !d.is_empty() {
        let _ = writeln!(
            out,
            r##"<path class="unstable" data-id="{}" d="{d}" fill="none" stroke="#fff" stroke-width="1.6" stroke-dasharray="4 3"/>"##,
            esc(&s.id)
        );
    }
}

fn fmt_tick(t: f64) -> String {
    if t == 0.0 {
        "0".into()
    } else if t.abs() < 1e-2 || t.abs() >= 1e4 {
        format!("{t:.1e}")
    } else {
        let s = format!("{t:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Panels laid out row by row, `cols` per row.
pub fn render(panels: &[Panel], cols: usize) -> String {
    let cols = cols.max(1).min(panels.len().max(1));
    let rows = panels.len().div_ceil(cols).max(1);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}" font-family="sans-serif">"#,
        W * cols as f64,
        H * rows as f64,
        W * cols as f64,
        H * rows as f64
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (k, p) in panels.iter().enumerate() {
        panel_body(&mut out, p, W * (k % cols) as f64, H * (k / cols) as f64);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_series() {
        let mut a = Series::new("a", vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)], 0);
        a.unstable = vec![false, true, true];
        let b = Series::new("b", vec![(0.0, 1.0), (2.0, 1.0)], 1);
        let p = Panel { title: "t".into(), x_label: "x".into(), y_label: "y".into(), series: vec![a, b], guides: vec![] };
        let svg = render(std::slice::from_ref(&p), 1);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("class=\"unstable\"").count(), 1);
        assert_eq!(svg, render(&[p], 1));
    }

    #[test]
    fn ticks_are_round() {
        let t = ticks(0.0, 1.0, 5);
        assert_eq!(t.len(), 6);
        assert!(t.iter().enumerate().all(|(k, &x)| (x - 0.2 * k as f64).abs() < 1e-15));
        let t = ticks(0.0021, 0.0487, 5);
        assert!(t.len() >= 4 && t.iter().all(|&x| (0.0021..=0.0487).contains(&x)));
    }

    #[test]
    fn labels_are_escaped() {
        let p = Panel { title: "a<b".into(), x_label: "d2".into(), y_label: "v".into(), series: vec![], guides: vec![] };
        assert!(render(&[p], 1).contains("a&lt;b"));
    }
}
