//! Minimal self-contained SVG charts.

use std::fmt::Write as _;

use crate::table::fmt_num;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn plot_w() -> f64 {
    WIDTH - LEFT - RIGHT
}

fn plot_h() -> f64 {
    HEIGHT - TOP - BOTTOM
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w() / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{y}" text-anchor="middle" transform="rotate(-90 20 {y})">{}</text>"#,
        escape(y_label),
        y = TOP + plot_h() / 2.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        plot_w(),
        plot_h()
    );
    s
}

fn ticks(s: &mut String, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) {
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let x = LEFT + f * plot_w();
        let y = TOP + plot_h() - f * plot_h();
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + plot_h() + 18.0,
            fmt_num(x0 + f * (x1 - x0))
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            fmt_num(y0 + f * (y1 - y0))
        );
    }
}

/// Line chart; `None` values break the line and are marked on the x axis.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, points: &[(f64, Option<f64>)]) -> String {
    let xb = bounds(points.iter().map(|p| p.0));
    let yb = bounds(points.iter().filter_map(|p| p.1));
    let sx = |x: f64| LEFT + (x - xb.0) / (xb.1 - xb.0) * plot_w();
    let sy = |y: f64| TOP + plot_h() - (y - yb.0) / (yb.1 - yb.0) * plot_h();
    let mut s = open(title, x_label, y_label);
    ticks(&mut s, xb, yb);
    for run in points.split(|p| p.1.is_none()).filter(|r| !r.is_empty()) {
        let coords: Vec<String> = run
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y.expect("feasible run"))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
    }
    for &(x, _) in points.iter().filter(|p| p.1.is_none()) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="darkred">x</text>"#,
            sx(x),
            TOP + plot_h() - 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn color(t: f64) -> String {
    // light yellow to dark red
    let t = t.clamp(0.0, 1.0);
    let r = 255.0 - 90.0 * t;
    let g = 240.0 * (1.0 - t) + 20.0 * t;
    let b = 180.0 * (1.0 - t) + 30.0 * t;
    format!("rgb({},{},{})", r.round(), g.round(), b.round())
}

/// Heatmap over a full `xs` by `ys` grid; `values[i][j]` belongs to `(xs[i], ys[j])`.
/// Missing values are drawn as dark cells.
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    values: &[Vec<Option<f64>>],
) -> String {
    let xb = bounds(xs.iter().copied());
    let yb = bounds(ys.iter().copied());
    let vb = bounds(values.iter().flatten().filter_map(|v| *v));
    let cw = plot_w() / xs.len() as f64;
    let ch = plot_h() / ys.len() as f64;
    let mut s = open(title, x_label, y_label);
    for (i, col) in values.iter().enumerate() {
        for (j, v) in col.iter().enumerate() {
            let fill = match v {
                Some(v) => color((v - vb.0) / (vb.1 - vb.0)),
                None => "rgb(20,30,80)".to_string(),
            };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                LEFT + i as f64 * cw,
                TOP + plot_h() - (j + 1) as f64 * ch,
                cw + 0.5,
                ch + 0.5
            );
        }
    }
    ticks(&mut s, xb, yb);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end" font-size="10">range {} to {}; dark cells saturated</text>"#,
        WIDTH - RIGHT,
        TOP - 6.0,
        fmt_num(vb.0),
        fmt_num(vb.1)
    );
    s.push_str("</svg>\n");
    s
}
