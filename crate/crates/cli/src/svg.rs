//! Deterministic SVG 1.1 figure rendering on a fixed 800x600 canvas.
//!
//! Output bytes are a pure function of the input: coordinates are formatted
//! at fixed precision and elements are emitted in input order. Empirical
//! level curves use dashed strokes, theoretical ones solid; series 0 points
//! are circles, series 1 points are diamonds.

use specnoise_core::Ellipse;

use crate::CliError;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 28.0;
const MARGIN_TOP: f64 = 32.0;
const MARGIN_BOTTOM: f64 = 64.0;

const SERIES_COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// A scatter point tagged with its series (block).
#[derive(Clone, Copy, Debug)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub series: usize,
}

/// Level-curve stroke style.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveStyle {
    /// Empirical estimate (dashed).
    Dashed,
    /// Theoretical value (solid).
    Solid,
}

/// An ellipse plus its drawing style.
#[derive(Clone, Copy, Debug)]
pub struct EllipseSpec {
    pub ellipse: Ellipse,
    pub style: CurveStyle,
    pub series: usize,
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_bounds(mut x_min: f64, mut x_max: f64, mut y_min: f64, mut y_max: f64) -> Self {
        // pad 8% and guard against degenerate spans
        let x_span = (x_max - x_min).max(1e-9);
        let y_span = (y_max - y_min).max(1e-9);
        x_min -= 0.08 * x_span;
        x_max += 0.08 * x_span;
        y_min -= 0.08 * y_span;
        y_max += 0.08 * y_span;
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Widens one axis so data units map to pixels isotropically; rotated
    /// ellipses then render exactly as `<ellipse>` with a rotate transform.
    fn equalize_aspect(mut self) -> Self {
        let sx = self.x_scale();
        let sy = self.y_scale();
        if sx < sy {
            let extra = (self.y_max - self.y_min) * (sy / sx - 1.0) / 2.0;
            self.y_min -= extra;
            self.y_max += extra;
        } else {
            let extra = (self.x_max - self.x_min) * (sx / sy - 1.0) / 2.0;
            self.x_min -= extra;
            self.x_max += extra;
        }
        self
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn x_scale(&self) -> f64 {
        (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / (self.x_max - self.x_min)
    }

    fn y_scale(&self) -> f64 {
        (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / (self.y_max - self.y_min)
    }
}

/// Round-number tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw_step = span / 5.0;
    let magnitude = 10f64.powf(raw_step.log10().floor());
    let normalized = raw_step / magnitude;
    let step = if normalized < 1.5 {
        1.0
    } else if normalized < 3.5 {
        2.0
    } else if normalized < 7.5 {
        5.0
    } else {
        10.0
    } * magnitude;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn document_open(out: &mut String) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"1\"/>\n",
        fmt(x0), fmt(y0), fmt(x1), fmt(y0)
    ));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"1\"/>\n",
        fmt(x0), fmt(y0), fmt(x0), fmt(y1)
    ));
    for t in ticks(frame.x_min, frame.x_max) {
        let px = frame.px(t);
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\" stroke-width=\"1\"/>\n",
            fmt(px), fmt(y0), fmt(y0 + 5.0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            fmt(px), fmt(y0 + 20.0), format_tick(t)
        ));
    }
    for t in ticks(frame.y_min, frame.y_max) {
        let py = frame.py(t);
        out.push_str(&format!(
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\" stroke-width=\"1\"/>\n",
            fmt(py), fmt(x0 - 5.0), fmt(x0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
            fmt(x0 - 8.0), fmt(py + 4.0), format_tick(t)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        fmt((x0 + x1) / 2.0), fmt(HEIGHT - 16.0), x_label
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        fmt((y0 + y1) / 2.0), fmt((y0 + y1) / 2.0), y_label
    ));
}

fn format_tick(t: f64) -> String {
    if t == 0.0 {
        return "0".into();
    }
    let a = t.abs();
    if !(0.01..1000.0).contains(&a) {
        format!("{t:.1e}")
    } else if a >= 10.0 {
        format!("{t:.0}")
    } else {
        format!("{t:.2}")
    }
}

fn marker(out: &mut String, frame: &Frame, p: &ScatterPoint) {
    let cx = frame.px(p.x);
    let cy = frame.py(p.y);
    let color = SERIES_COLORS[p.series % SERIES_COLORS.len()];
    if p.series % 2 == 0 {
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"2.4\" fill=\"{}\" fill-opacity=\"0.55\"/>\n",
            fmt(cx), fmt(cy), color
        ));
    } else {
        out.push_str(&format!(
            "<path d=\"M {} {} l 3 3 l -3 3 l -3 -3 Z\" fill=\"{}\" fill-opacity=\"0.55\"/>\n",
            fmt(cx), fmt(cy - 3.0), color
        ));
    }
}

fn ellipse_element(out: &mut String, frame: &Frame, spec: &EllipseSpec) {
    let e = &spec.ellipse;
    let cx = frame.px(e.center[0]);
    let cy = frame.py(e.center[1]);
    // frame is aspect-equalized, so one scale applies to both axes
    let rx = e.semi_axes[0] * frame.x_scale();
    let ry = e.semi_axes[1] * frame.x_scale();
    // rotation in screen space flips sign (y axis points down)
    let degrees = -e.rotation.to_degrees();
    let color = SERIES_COLORS[spec.series % SERIES_COLORS.len()];
    let dash = match spec.style {
        CurveStyle::Dashed => " stroke-dasharray=\"6 4\"",
        CurveStyle::Solid => "",
    };
    out.push_str(&format!(
        "<ellipse cx=\"0\" cy=\"0\" rx=\"{}\" ry=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{} transform=\"translate({} {}) rotate({})\"/>\n",
        fmt(rx), fmt(ry), color, dash, fmt(cx), fmt(cy), fmt(degrees)
    ));
}

/// Scatter of fluctuation vectors with 95% level curves.
pub fn render_scatter(
    points: &[ScatterPoint],
    ellipses: &[EllipseSpec],
    x_label: &str,
    y_label: &str,
) -> Result<String, CliError> {
    if points.is_empty() {
        return Err(CliError::Render("empty point set".into()));
    }
    for p in points {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(CliError::Render("non-finite point coordinate".into()));
        }
    }
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for p in points {
        x_min = x_min.min(p.x);
        x_max = x_max.max(p.x);
        y_min = y_min.min(p.y);
        y_max = y_max.max(p.y);
    }
    for e in ellipses {
        let reach = e.ellipse.semi_axes[0].max(e.ellipse.semi_axes[1]);
        x_min = x_min.min(e.ellipse.center[0] - reach);
        x_max = x_max.max(e.ellipse.center[0] + reach);
        y_min = y_min.min(e.ellipse.center[1] - reach);
        y_max = y_max.max(e.ellipse.center[1] + reach);
    }
    let frame = Frame::from_bounds(x_min, x_max, y_min, y_max).equalize_aspect();

    let mut out = String::new();
    document_open(&mut out);
    axes(&mut out, &frame, x_label, y_label);
    for p in points {
        marker(&mut out, &frame, p);
    }
    for e in ellipses {
        ellipse_element(&mut out, &frame, e);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One point of the deviation curve.
#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub n: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub benchmark: f64,
}

/// Mean curve with confidence bars and the benchmark line.
pub fn render_curve(points: &[CurvePoint], x_label: &str, y_label: &str) -> Result<String, CliError> {
    if points.is_empty() {
        return Err(CliError::Render("empty curve".into()));
    }
    let x_min = points.iter().map(|p| p.n).fold(f64::INFINITY, f64::min);
    let x_max = points.iter().map(|p| p.n).fold(0.0f64, f64::max);
    let y_min = 0.0f64;
    let y_max = points
        .iter()
        .map(|p| p.hi.max(p.benchmark))
        .fold(0.0f64, f64::max);
    let frame = Frame::from_bounds(x_min, x_max, y_min, y_max);

    let mut out = String::new();
    document_open(&mut out);
    axes(&mut out, &frame, x_label, y_label);

    // benchmark polyline (solid)
    let mut path = String::from("M");
    for p in points {
        path.push_str(&format!(" {} {}", fmt(frame.px(p.n)), fmt(frame.py(p.benchmark))));
        path.push_str(" L");
    }
    path.truncate(path.len() - 2);
    out.push_str(&format!(
        "<path d=\"{path}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n"
    ));

    for p in points {
        let px = frame.px(p.n);
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#1f77b4\" stroke-width=\"1.2\"/>\n",
            fmt(px), fmt(frame.py(p.lo)), fmt(frame.py(p.hi))
        ));
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"#1f77b4\"/>\n",
            fmt(px), fmt(frame.py(p.mean))
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Histogram with an overlaid density curve.
pub fn render_density(
    samples: &[f64],
    density: impl Fn(f64) -> f64,
    x_label: &str,
) -> Result<String, CliError> {
    if samples.is_empty() {
        return Err(CliError::Render("empty sample".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = 41usize;
    let width = ((hi - lo) / bins as f64).max(1e-9);
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let idx = (((s - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let m = samples.len() as f64;
    let heights: Vec<f64> = counts.iter().map(|&c| c as f64 / (m * width)).collect();
    let mut y_max = heights.iter().copied().fold(0.0f64, f64::max);
    let curve: Vec<(f64, f64)> = (0..=200)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / 200.0;
            (x, density(x))
        })
        .collect();
    y_max = y_max.max(curve.iter().map(|c| c.1).fold(0.0, f64::max));
    let frame = Frame::from_bounds(lo, hi, 0.0, y_max);

    let mut out = String::new();
    document_open(&mut out);
    axes(&mut out, &frame, x_label, "density");
    for (i, &h) in heights.iter().enumerate() {
        if h == 0.0 {
            continue;
        }
        let x0 = frame.px(lo + i as f64 * width);
        let x1 = frame.px(lo + (i as f64 + 1.0) * width);
        let y_top = frame.py(h);
        let y_base = frame.py(0.0);
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#1f77b4\" fill-opacity=\"0.45\" stroke=\"#1f77b4\" stroke-dasharray=\"4 3\"/>\n",
            fmt(x0), fmt(y_top), fmt(x1 - x0), fmt(y_base - y_top)
        ));
    }
    let mut path = String::from("M");
    for (x, y) in &curve {
        path.push_str(&format!(" {} {}", fmt(frame.px(*x)), fmt(frame.py(*y))));
        path.push_str(" L");
    }
    path.truncate(path.len() - 2);
    out.push_str(&format!(
        "<path d=\"{path}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n"
    ));
    out.push_str("</svg>\n");
    Ok(out)
}
