//! Minimal self-contained SVG charts: inline attributes only, no scripts,
//! fonts or external references.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

/// Ten-class palette (one colour per digit).
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Axes {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut f = Frame {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for (x, y) in points {
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
            f.y_min = f.y_min.min(y);
            f.y_max = f.y_max.max(y);
        }
        if !f.x_min.is_finite() {
            (f.x_min, f.x_max, f.y_min, f.y_max) = (0.0, 1.0, 0.0, 1.0);
        }
        if f.x_max - f.x_min < 1e-12 {
            f.x_min -= 0.5;
            f.x_max += 0.5;
        }
        if f.y_max - f.y_min < 1e-12 {
            f.y_min -= 0.5;
            f.y_max += 0.5;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, axes: &Axes, frame: &Frame) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(
        out,
        r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        (WIDTH - MARGIN_RIGHT + MARGIN_LEFT) / 2.0,
        escape(&axes.title)
    )
    .unwrap();
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    writeln!(
        out,
        r##"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" fill="none" stroke="#000000" stroke-width="1"/>"##
    )
    .unwrap();
    for i in 0..=5 {
        let fx = frame.x_min + (frame.x_max - frame.x_min) * i as f64 / 5.0;
        let fy = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 5.0;
        let (px, py) = (frame.px(fx), frame.py(fy));
        writeln!(
            out,
            r##"<line x1="{px:.1}" y1="{y0:.1}" x2="{px:.1}" y2="{:.1}" stroke="#000000"/><text x="{px:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"##,
            y0 + 5.0,
            y0 + 18.0,
            tick_label(fx)
        )
        .unwrap();
        writeln!(
            out,
            r##"<line x1="{:.1}" y1="{py:.1}" x2="{x0:.1}" y2="{py:.1}" stroke="#000000"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick_label(fy)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(&axes.x_label)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="18" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(&axes.y_label)
    )
    .unwrap();
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 100.0 || (v.fract().abs() < 1e-9 && v.abs() >= 1.0) {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    let x = WIDTH - MARGIN_RIGHT + 15.0;
    for (i, (name, colour)) in entries.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + 18.0 * i as f64;
        writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{colour}"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
            y - 10.0,
            x + 18.0,
            y,
            escape(name)
        )
        .unwrap();
    }
}

/// Line chart of one or more series sharing both axes.
pub fn line_chart(axes: &Axes, series: &[Series]) -> String {
    let frame = Frame::fit(series.iter().flat_map(|s| s.points.iter().copied()));
    let mut out = String::new();
    header(&mut out, axes, &frame);
    let mut entries = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (j, &(x, y)) in s.points.iter().enumerate() {
            let cmd = if j == 0 { 'M' } else { 'L' };
            write!(d, "{cmd}{:.2},{:.2} ", frame.px(x), frame.py(y)).unwrap();
        }
        writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            d.trim_end()
        )
        .unwrap();
        entries.push((s.name.clone(), colour));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// Scatter plot with one colour per class label.
pub fn scatter_chart(axes: &Axes, points: &[(f64, f64)], labels: &[u8]) -> String {
    let frame = Frame::fit(points.iter().copied());
    let mut out = String::new();
    header(&mut out, axes, &frame);
    for (&(x, y), &l) in points.iter().zip(labels) {
        writeln!(
            out,
            r#"<circle cx="{:.1}" cy="{:.1}" r="2" fill="{}" fill-opacity="0.7"/>"#,
            frame.px(x),
            frame.py(y),
            PALETTE[l as usize % PALETTE.len()]
        )
        .unwrap();
    }
    let mut present: Vec<u8> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    let entries: Vec<(String, &str)> = present
        .iter()
        .map(|&l| (format!("digit {l}"), PALETTE[l as usize % PALETTE.len()]))
        .collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}
