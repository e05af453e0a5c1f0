//! Minimal SVG and CSV emission helpers for the export operations.
//!
//! The documents are plain generated strings: a grid of colored cells for
//! correlation matrices, glyph scatters for 2D class distributions, and step
//! outlines for class histograms. Dimensions and colors are configurable
//! through [`SvgOptions`].

use crate::correlation::CorrelationMatrix;

/// Rendering options shared by the SVG exports.
#[derive(Debug, Clone)]
pub struct SvgOptions {
    /// Plot area width in pixels (scatter, histogram).
    pub width: u32,
    /// Plot area height in pixels (scatter, histogram).
    pub height: u32,
    /// Cell edge in pixels (heatmap).
    pub cell: u32,
    /// Per-tag colors, cycled when there are more tags than colors.
    pub palette: Vec<String>,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            cell: 36,
            palette: vec![
                "#0072b2".into(),
                "#d55e00".into(),
                "#009e73".into(),
                "#cc79a7".into(),
                "#e69f00".into(),
                "#56b4e9".into(),
                "#f0e442".into(),
                "#555555".into(),
            ],
        }
    }
}

impl SvgOptions {
    pub fn color(&self, series: usize) -> &str {
        &self.palette[series % self.palette.len()]
    }
}

/// Escapes one CSV field per RFC 4180: fields containing commas, quotes, or
/// line breaks are quoted with inner quotes doubled.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') || s.contains('\r') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Signed-magnitude diverging color: -1 → blue, 0 → white, +1 → red.
fn diverging_color(r: f64) -> String {
    let t = r.clamp(-1.0, 1.0);
    let (from, to): ((u8, u8, u8), (u8, u8, u8)) = if t < 0.0 {
        ((255, 255, 255), (0x21, 0x66, 0xac))
    } else {
        ((255, 255, 255), (0xb2, 0x18, 0x2b))
    };
    let a = t.abs();
    let lerp = |x: u8, y: u8| (f64::from(x) + (f64::from(y) - f64::from(x)) * a).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(from.0, to.0), lerp(from.1, to.1), lerp(from.2, to.2))
}

/// Grid of colored cells for a correlation matrix; undefined cells are gray.
pub fn correlation_heatmap(cm: &CorrelationMatrix, opts: &SvgOptions) -> String {
    let cell = opts.cell;
    let label_w = 64;
    let label_h = 20;
    let width = label_w + cell * cm.k() as u32;
    let height = label_h + cell * cm.tags().len() as u32;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    for j in 0..cm.k() {
        let x = label_w + cell * j as u32 + cell / 2;
        out.push_str(&format!(
            "  <text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">PC{}</text>\n",
            label_h - 6,
            j + 1
        ));
    }
    for (t, tag) in cm.tags().iter().enumerate() {
        let y = label_h + cell * t as u32;
        out.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            label_w - 6,
            y + cell / 2 + 4,
            xml_escape(tag)
        ));
        for j in 0..cm.k() {
            let x = label_w + cell * j as u32;
            match cm.r(t, j) {
                Some(r) => {
                    out.push_str(&format!(
                        "  <rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" \
                         fill=\"{}\" stroke=\"#999\"/>\n",
                        diverging_color(r)
                    ));
                    out.push_str(&format!(
                        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{}\">{r:.2}</text>\n",
                        x + cell / 2,
                        y + cell / 2 + 4,
                        if r.abs() > 0.6 { "#ffffff" } else { "#000000" },
                    ));
                }
                None => {
                    out.push_str(&format!(
                        "  <rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" \
                         fill=\"#cccccc\" stroke=\"#999\"/>\n"
                    ));
                }
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// One scatter series per tag with a distinct glyph and color.
pub fn scatter(
    tags: &[String],
    series: &[Vec<(f64, f64)>],
    x_label: &str,
    y_label: &str,
    opts: &SvgOptions,
) -> String {
    let (width, height) = (opts.width, opts.height);
    let margin = 40.0;
    let plot_w = f64::from(width) - 2.0 * margin;
    let plot_h = f64::from(height) - 2.0 * margin;

    let all = series.iter().flatten();
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        lo_x = lo_x.min(x);
        hi_x = hi_x.max(x);
        lo_y = lo_y.min(y);
        hi_y = hi_y.max(y);
    }
    if !lo_x.is_finite() {
        lo_x = 0.0;
        hi_x = 1.0;
        lo_y = 0.0;
        hi_y = 1.0;
    }
    if hi_x == lo_x {
        hi_x = lo_x + 1.0;
    }
    if hi_y == lo_y {
        hi_y = lo_y + 1.0;
    }
    let sx = |x: f64| margin + (x - lo_x) / (hi_x - lo_x) * plot_w;
    let sy = |y: f64| margin + (1.0 - (y - lo_y) / (hi_y - lo_y)) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    out.push_str(&format!(
        "  <rect x=\"{margin}\" y=\"{margin}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333\"/>\n"
    ));
    out.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        f64::from(width) / 2.0,
        f64::from(height) - 8.0,
        xml_escape(x_label)
    ));
    out.push_str(&format!(
        "  <text x=\"12\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 12 {})\">{}</text>\n",
        f64::from(height) / 2.0,
        f64::from(height) / 2.0,
        xml_escape(y_label)
    ));
    for (s, (tag, points)) in tags.iter().zip(series).enumerate() {
        let color = opts.color(s);
        for &(x, y) in points {
            out.push_str(&glyph(s, sx(x), sy(y), color));
        }
        // Legend entry.
        let ly = margin + 14.0 * s as f64 + 4.0;
        out.push_str(&glyph(s, f64::from(width) - margin + 12.0, ly, color));
        out.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\">{}</text>\n",
            f64::from(width) - margin + 20.0,
            ly + 4.0,
            xml_escape(tag)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn glyph(series: usize, x: f64, y: f64, color: &str) -> String {
    let r = 2.5;
    match series % 4 {
        0 => format!("  <circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"{r}\" fill=\"{color}\"/>\n"),
        1 => format!(
            "  <rect x=\"{:.1}\" y=\"{:.1}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>\n",
            x - r,
            y - r,
            2.0 * r,
            2.0 * r
        ),
        2 => format!(
            "  <polygon points=\"{:.1},{:.1} {:.1},{:.1} {:.1},{:.1}\" fill=\"{color}\"/>\n",
            x,
            y - r,
            x - r,
            y + r,
            x + r,
            y + r
        ),
        _ => format!(
            "  <polygon points=\"{:.1},{:.1} {:.1},{:.1} {:.1},{:.1} {:.1},{:.1}\" fill=\"{color}\"/>\n",
            x,
            y - r,
            x + r,
            y,
            x,
            y + r,
            x - r,
            y
        ),
    }
}

/// Step outlines of per-tag bin counts.
pub fn histogram_steps(
    tags: &[String],
    edges: &[f64],
    counts: &[Vec<u64>],
    title: &str,
    opts: &SvgOptions,
) -> String {
    let (width, height) = (opts.width, opts.height);
    let margin = 40.0;
    let plot_w = f64::from(width) - 2.0 * margin;
    let plot_h = f64::from(height) - 2.0 * margin;
    let lo = edges.first().copied().unwrap_or(0.0);
    let hi = edges.last().copied().unwrap_or(1.0);
    let max_count = counts.iter().flatten().copied().max().unwrap_or(1).max(1) as f64;
    let sx = |x: f64| margin + (x - lo) / (hi - lo) * plot_w;
    let sy = |c: f64| margin + (1.0 - c / max_count) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    out.push_str(&format!(
        "  <rect x=\"{margin}\" y=\"{margin}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333\"/>\n"
    ));
    out.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        f64::from(width) / 2.0,
        margin - 8.0,
        xml_escape(title)
    ));
    for (s, (tag, tag_counts)) in tags.iter().zip(counts).enumerate() {
        let color = opts.color(s);
        let mut points = String::new();
        points.push_str(&format!("{:.1},{:.1} ", sx(lo), sy(0.0)));
        for (b, &c) in tag_counts.iter().enumerate() {
            let c = c as f64;
            points.push_str(&format!("{:.1},{:.1} ", sx(edges[b]), sy(c)));
            points.push_str(&format!("{:.1},{:.1} ", sx(edges[b + 1]), sy(c)));
        }
        points.push_str(&format!("{:.1},{:.1}", sx(hi), sy(0.0)));
        out.push_str(&format!(
            "  <polyline points=\"{points}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
        ));
        let ly = margin + 14.0 * s as f64 + 10.0;
        out.push_str(&format!(
            "  <rect x=\"{}\" y=\"{}\" width=\"10\" height=\"3\" fill=\"{color}\"/>\n",
            f64::from(width) - margin - 90.0,
            ly
        ));
        out.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\">{}</text>\n",
            f64::from(width) - margin - 74.0,
            ly + 5.0,
            xml_escape(tag)
        ));
    }
    out.push_str("</svg>\n");
    out
}
