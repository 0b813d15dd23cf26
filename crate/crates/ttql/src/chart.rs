//! Static SVG line charts for suite outputs. Hand-rolled on purpose: the
//! charts are simple enough that a plotting dependency would outweigh them.

use crate::error::{Error, Result};
use std::path::Path;

/// One labeled line.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 200.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
/// Longest polyline emitted; denser series are strided down.
pub const MAX_POINTS_PER_LINE: usize = 500;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn stride_down(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS_PER_LINE {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS_PER_LINE);
    let mut out: Vec<(f64, f64)> = points.iter().copied().step_by(stride).collect();
    if *out.last().unwrap() != *points.last().unwrap() {
        out.push(*points.last().unwrap());
    }
    out
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    if span <= 0.0 {
        return vec![lo];
    }
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + 1e-9 * step {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v}");
        if s.len() <= 8 { s } else { format!("{v:.4}") }
    } else {
        format!("{v:.0e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render series as an SVG line chart. With `log_y` (the default for error
/// curves) points with nonpositive y are dropped; a series with no plottable
/// points is skipped, and a chart with nothing to plot is an error.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> Result<String> {
    let prepared: Vec<(String, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = stride_down(&s.points)
                .into_iter()
                .filter(|(x, y)| {
                    x.is_finite() && y.is_finite() && (!log_y || *y > 0.0)
                })
                .map(|(x, y)| if log_y { (x, y.log10()) } else { (x, y) })
                .collect();
            (s.label.clone(), pts)
        })
        .filter(|(_, pts)| !pts.is_empty())
        .collect();
    if prepared.is_empty() {
        return Err(Error::InvalidArgument("no plottable points".into()));
    }

    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, pts) in &prepared {
        for &(x, y) in pts {
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
    }
    if x_hi == x_lo {
        x_hi = x_lo + 1.0;
    }
    if y_hi == y_lo {
        y_hi = y_lo + 1.0;
    }
    let pad = 0.03 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        xml_escape(title)
    ));

    // gridlines and ticks
    for t in nice_ticks(x_lo, x_hi, 6) {
        let x = sx(t);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#dddddd\"/>\n",
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_TOP + plot_h + 16.0,
            fmt_tick(t)
        ));
    }
    let y_ticks = if log_y {
        let lo = y_lo.floor() as i64;
        let hi = y_hi.ceil() as i64;
        (lo..=hi).map(|e| e as f64).filter(|e| (y_lo..=y_hi).contains(e)).collect()
    } else {
        nice_ticks(y_lo, y_hi, 6)
    };
    for t in y_ticks {
        let y = sy(t);
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n",
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        ));
        let label = if log_y { format!("1e{}", t as i64) } else { fmt_tick(t) };
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{label}</text>\n",
            MARGIN_LEFT - 6.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333333\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        xml_escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        xml_escape(y_label)
    ));

    for (i, (label, pts)) in prepared.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        let ly = MARGIN_TOP + 14.0 + 16.0 * i as f64;
        let lx = MARGIN_LEFT + plot_w + 12.0;
        svg.push_str(&format!(
            "<line x1=\"{lx:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            ly - 4.0,
            lx + 18.0,
            ly - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{ly:.1}\" font-size=\"11\">{}</text>\n",
            lx + 24.0,
            xml_escape(label)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Parse a suite `curves.csv` into one median series per variant.
pub fn curves_from_csv(body: &str) -> Result<Vec<Series>> {
    let mut lines = body.lines();
    match lines.next() {
        Some("variant,step,median,q25,q75") => {}
        other => {
            return Err(Error::Config(format!(
                "expected curves.csv header, got {other:?}"
            )));
        }
    }
    let mut series: Vec<Series> = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Config(format!("curves.csv line {}: expected 5 fields", i + 2)));
        }
        let parse = |f: &str| -> Result<f64> {
            f.parse().map_err(|_| {
                Error::Config(format!("curves.csv line {}: bad number '{f}'", i + 2))
            })
        };
        let step = parse(fields[1])?;
        let median = parse(fields[2])?;
        match series.last_mut() {
            Some(s) if s.label == fields[0] => s.points.push((step, median)),
            _ => series.push(Series {
                label: fields[0].to_string(),
                points: vec![(step, median)],
            }),
        }
    }
    if series.is_empty() {
        return Err(Error::Config("curves.csv has no data rows".into()));
    }
    Ok(series)
}

/// Chart the median error curves of a suite output.
pub fn chart_curves(curves_csv: &Path, out_svg: &Path, log_y: bool) -> Result<()> {
    let body = std::fs::read_to_string(curves_csv)?;
    let series = curves_from_csv(&body)?;
    let svg = render_svg("Error vs step", "step", "sup-norm error", &series, log_y)?;
    std::fs::write(out_svg, svg)?;
    Ok(())
}
