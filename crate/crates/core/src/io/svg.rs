//! Deterministic SVG plot emission.
//!
//! Layers are drawn as polylines in data coordinates with the y axis flipped
//! (SVG y grows downward). Coordinates are printed with fixed precision, so
//! identical inputs always produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Stroke style and legend label for one plot layer.
#[derive(Debug, Clone)]
pub struct PlotStyle {
    pub label: String,
    /// Any SVG color string, e.g. `"#1f77b4"`.
    pub color: String,
    /// Stroke width as a multiple of the default (0.4% of the plot extent).
    pub width: f64,
    pub dashed: bool,
}

impl PlotStyle {
    pub fn new(label: impl Into<String>, color: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            color: color.into(),
            width: 1.0,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

/// One polyline to draw.
#[derive(Debug, Clone)]
pub struct PlotLayer {
    pub points: Vec<Point>,
    pub style: PlotStyle,
}

fn fmt(x: f64) -> String {
    format!("{:.6}", x)
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render layers to an SVG document string. Empty layers are skipped with a
/// comment; if nothing is drawable the plot is rejected.
pub fn plot_svg(layers: &[PlotLayer]) -> Result<String> {
    for layer in layers {
        for (i, p) in layer.points.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::NonFinite(format!(
                    "plot layer \"{}\" point {i}",
                    layer.style.label
                )));
            }
        }
    }
    let drawable: Vec<&PlotLayer> = layers.iter().filter(|l| !l.points.is_empty()).collect();
    if drawable.is_empty() {
        return Err(Error::EmptyPlot);
    }

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for layer in &drawable {
        for p in &layer.points {
            x_min = x_min.min(p[0]);
            x_max = x_max.max(p[0]);
            y_min = y_min.min(p[1]);
            y_max = y_max.max(p[1]);
        }
    }
    let extent = (x_max - x_min).max(y_max - y_min).max(1e-9);
    let margin = 0.05 * extent;
    let width = (x_max - x_min) + 2.0 * margin;
    let height = (y_max - y_min) + 2.0 * margin;
    // Data -> SVG user units: shift into the margin box and flip y.
    let tx = |x: f64| x - x_min + margin;
    let ty = |y: f64| y_max - y + margin;
    let base_stroke = 0.004 * extent;
    let font = 0.035 * extent;

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 {} {}\">",
        fmt(width),
        fmt(height)
    );
    for layer in layers {
        if layer.points.is_empty() {
            let _ = writeln!(
                out,
                "  <!-- layer \"{}\" skipped: no points -->",
                escape_xml(&layer.style.label)
            );
            continue;
        }
        let pts: Vec<String> = layer
            .points
            .iter()
            .map(|p| format!("{},{}", fmt(tx(p[0])), fmt(ty(p[1]))))
            .collect();
        let dash = if layer.style.dashed {
            format!(
                " stroke-dasharray=\"{} {}\"",
                fmt(3.0 * base_stroke),
                fmt(2.0 * base_stroke)
            )
        } else {
            String::new()
        };
        let _ = writeln!(
            out,
            "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{} points=\"{}\"/>",
            escape_xml(&layer.style.color),
            fmt(layer.style.width * base_stroke),
            dash,
            pts.join(" ")
        );
    }
    // Legend in the top-left margin corner.
    for (i, layer) in drawable.iter().enumerate() {
        let ly = margin * 0.4 + (i as f64) * font * 1.3;
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"{}\" fill=\"{}\">{}</text>",
            fmt(margin * 0.4),
            fmt(ly + font),
            fmt(font),
            escape_xml(&layer.style.color),
            escape_xml(&layer.style.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_plot(path: impl AsRef<Path>, layers: &[PlotLayer]) -> Result<()> {
    fs::write(path, plot_svg(layers)?)?;
    Ok(())
}
