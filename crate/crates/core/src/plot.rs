//! Minimal standalone SVG line charts.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            x,
            y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: f64,
    pub height: f64,
    /// Draw a marker at every data point.
    pub markers: bool,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: "x".into(),
            y_label: "y".into(),
            width: 720.0,
            height: 480.0,
            markers: false,
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const PAD_FRACTION: f64 = 0.05;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 55.0); // left, right, top, bottom

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Data extent padded by 5% of the span on each side.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let pad = if span > 0.0 {
        PAD_FRACTION * span
    } else {
        0.5 * lo.abs().max(1.0)
    };
    (lo - pad, hi + pad)
}

fn validate(series: &[Series]) -> Result<()> {
    if series.is_empty() {
        return Err(Error::Domain("plot needs at least one series".into()));
    }
    for s in series {
        if s.x.is_empty() {
            return Err(Error::Domain(format!("series `{}` is empty", s.name)));
        }
        if s.x.len() != s.y.len() {
            return Err(Error::Domain(format!(
                "series `{}` has {} x values but {} y values",
                s.name,
                s.x.len(),
                s.y.len()
            )));
        }
        if !s.x.iter().chain(&s.y).all(|v| v.is_finite()) {
            return Err(Error::Domain(format!("series `{}` has non-finite values", s.name)));
        }
    }
    Ok(())
}

pub fn render_svg(series: &[Series], style: &PlotStyle) -> Result<String> {
    validate(series)?;
    let (x0, x1) = padded_range(series.iter().flat_map(|s| s.x.iter().copied()));
    let (y0, y1) = padded_range(series.iter().flat_map(|s| s.y.iter().copied()));
    let (ml, mr, mt, mb) = MARGIN;
    let (pw, ph) = (style.width - ml - mr, style.height - mt - mb);
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = style.width,
        h = style.height
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        style.width, style.height
    );
    if !style.title.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            style.width / 2.0,
            escape(&style.title)
        );
    }
    let _ = writeln!(
        svg,
        r#"<g class="axes" data-x-min="{x0}" data-x-max="{x1}" data-y-min="{y0}" data-y-max="{y1}" stroke="black" fill="none">"#
    );
    let _ = writeln!(svg, r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}"/>"#);
    for k in 0..=5 {
        let f = k as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}"/>"#,
            mt + ph,
            mt + ph + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{ml}" y2="{py:.2}"/>"#,
            ml - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle" stroke="none" fill="black">{}</text>"#,
            mt + ph + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" stroke="none" fill="black">{}</text>"#,
            ml - 8.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        ml + pw / 2.0,
        style.height - 12.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text class="y-label" x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0,
        escape(&style.y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> =
            s.x.iter()
                .zip(&s.y)
                .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
                .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(&s.name)
        );
        if style.markers {
            for (x, y) in s.x.iter().zip(&s.y) {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    sx(*x),
                    sy(*y)
                );
            }
        }
    }
    let _ = writeln!(svg, r#"<g class="legend">"#);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = mt + 14.0 + 16.0 * i as f64;
        let x = ml + pw - 150.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
            x + 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 26.0,
            y + 4.0,
            escape(&s.name)
        );
    }
    let _ = writeln!(svg, "</g>\n</svg>");
    Ok(svg)
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders and writes the chart. Returns bytes written.
pub fn emit_plot(series: &[Series], style: &PlotStyle, destination: &Path) -> Result<usize> {
    let svg = render_svg(series, style)?;
    std::fs::write(destination, &svg).map_err(|e| Error::io(destination, e))?;
    Ok(svg.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_series() -> Vec<Series> {
        vec![
            Series::new("erect <fin>", vec![0.8, 1.5, 2.33], vec![0.05, 0.12, 0.21]),
            Series::new("folded", vec![0.8, 1.5, 2.33], vec![0.04, 0.11, -0.2]),
        ]
    }

    #[test]
    fn one_polyline_per_series_and_valid_xml() {
        let svg = render_svg(&two_series(), &PlotStyle::default()).unwrap();
        let doc = roxmltree::Document::parse(&svg).expect("well-formed XML");
        let polylines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
        assert_eq!(polylines, 2);
        assert!(doc.descendants().any(|n| n.attribute("class") == Some("legend")));
        assert!(doc.descendants().any(|n| n.attribute("class") == Some("x-label")));
    }

    #[test]
    fn axis_range_spans_data_with_padding() {
        let series = two_series();
        let svg = render_svg(&series, &PlotStyle::default()).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let axes = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("axes"))
            .unwrap();
        let attr = |k: &str| axes.attribute(k).unwrap().parse::<f64>().unwrap();
        let ys: Vec<f64> = series.iter().flat_map(|s| s.y.clone()).collect();
        let (lo, hi) = (
            ys.iter().cloned().fold(f64::INFINITY, f64::min),
            ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        let span = hi - lo;
        let (y0, y1) = (attr("data-y-min"), attr("data-y-max"));
        assert!(y0 <= lo && y0 >= lo - 0.05 * span - 1e-12);
        assert!(y1 >= hi && y1 <= hi + 0.05 * span + 1e-12);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let bad = vec![Series::new("a", vec![1.0, 2.0], vec![1.0])];
        assert!(matches!(render_svg(&bad, &PlotStyle::default()), Err(Error::Domain(_))));
        let empty = vec![Series::new("a", vec![], vec![])];
        assert!(render_svg(&empty, &PlotStyle::default()).is_err());
    }

    #[test]
    fn constant_series_still_renders() {
        let flat = vec![Series::new("flat", vec![1.0, 2.0], vec![3.0, 3.0])];
        let svg = render_svg(
            &flat,
            &PlotStyle {
                markers: true,
                ..PlotStyle::default()
            },
        )
        .unwrap();
        roxmltree::Document::parse(&svg).unwrap();
    }
}
