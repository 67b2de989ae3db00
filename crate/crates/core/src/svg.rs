//! Grouped bar charts as standalone SVG documents.

use std::fmt::Write;

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub values: Vec<f64>,
}

const WIDTH_PER_GROUP: f64 = 36.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 40.0;
const PLOT_HEIGHT: f64 = 260.0;
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders one bar per series within each category group. Negative values
/// are drawn as zero-height bars; the y axis starts at 0.
pub fn grouped_bars(title: &str, categories: &[String], series: &[Series<'_>]) -> String {
    let groups = categories.len().max(1) as f64;
    let plot_width = groups * WIDTH_PER_GROUP;
    let width = LEFT + plot_width + RIGHT;
    let height = TOP + PLOT_HEIGHT + BOTTOM;
    let max = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max);
    let top_value = if max > 0.0 { max * 1.1 } else { 1.0 };
    let y = |v: f64| TOP + PLOT_HEIGHT - (v.clamp(0.0, top_value) / top_value) * PLOT_HEIGHT;
    let bar_width = (WIDTH_PER_GROUP - 8.0) / series.len().max(1) as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" font-size="13" text-anchor="middle">{}</text>"#,
        LEFT + plot_width / 2.0,
        escape(title)
    );

    for t in 0..=TICKS {
        let v = top_value * t as f64 / TICKS as f64;
        let ty = y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.1}" y1="{ty:.2}" x2="{:.1}" y2="{ty:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_width
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 4.0,
            ty + 3.0
        );
    }

    for (g, cat) in categories.iter().enumerate() {
        let gx = LEFT + g as f64 * WIDTH_PER_GROUP + 4.0;
        for (k, ser) in series.iter().enumerate() {
            let v = ser.values.get(g).copied().unwrap_or(0.0);
            let v = if v.is_finite() { v.max(0.0) } else { 0.0 };
            let by = y(v);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{by:.2}" width="{bar_width:.2}" height="{:.2}" fill="{}"><title>{} {}: {v}</title></rect>"#,
                gx + k as f64 * bar_width,
                TOP + PLOT_HEIGHT - by,
                ser.color,
                escape(cat),
                escape(ser.name)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            gx + (WIDTH_PER_GROUP - 8.0) / 2.0,
            TOP + PLOT_HEIGHT + 14.0,
            escape(cat)
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        TOP + PLOT_HEIGHT,
        LEFT + plot_width,
        TOP + PLOT_HEIGHT
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.1}" y1="{TOP:.1}" x2="{LEFT:.1}" y2="{:.1}" stroke="black"/>"#,
        TOP + PLOT_HEIGHT
    );

    let lx = LEFT + plot_width + 16.0;
    for (k, ser) in series.iter().enumerate() {
        let ly = TOP + 10.0 + k as f64 * 16.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{}"/>"#,
            ly - 9.0,
            ser.color
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#,
            lx + 14.0,
            escape(ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}
