use std::fmt::Write;

use super::{Histogram, ReportError, Series, Style};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

const LEFT: f64 = 72.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 56.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Step of the form {1, 2, 5}·10^k giving at most about six ticks.
fn tick_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    for m in [1.0, 2.0, 5.0, 10.0] {
        if m * mag >= raw {
            return m * mag;
        }
    }
    10.0 * mag
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = tick_step(hi - lo);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    let v = (first..=last).map(|k| k as f64 * step).collect();
    (v, decimals)
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        (lo - d, hi + d)
    }
}

/// Plot area with data-to-pixel mapping.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    w: f64,
    h: f64,
}

impl Frame {
    fn new(style: &Style, x: (f64, f64), y: (f64, f64)) -> Result<Self, ReportError> {
        let (w, h) = (style.width - LEFT - RIGHT, style.height - TOP - BOTTOM);
        if !(w > 0.0 && h > 0.0) {
            return Err(ReportError::Invalid("canvas too small".into()));
        }
        Ok(Self {
            x: padded(x.0, x.1),
            y: padded(y.0, y.1),
            w,
            h,
        })
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        TOP + self.h - (y - self.y.0) / (self.y.1 - self.y.0) * self.h
    }

    fn open(&self, out: &mut String, style: &Style) {
        let _ = writeln!(
            out,
            r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>
<text x="{tx:.1}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
            w = style.width,
            h = style.height,
            tx = LEFT + self.w / 2.0,
            title = escape(&style.title),
        );
    }

    fn axes(&self, out: &mut String, style: &Style) {
        let (x0, y0) = (LEFT, TOP + self.h);
        let _ = writeln!(out, r#"<g class="axes" stroke="black" stroke-width="1">"#);
        let _ = writeln!(
            out,
            r#"<line x1="{x0}" y1="{y0}" x2="{:.2}" y2="{y0}"/>"#,
            LEFT + self.w
        );
        let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{TOP}"/>"#);
        let (xt, xd) = ticks(self.x.0, self.x.1);
        for t in &xt {
            let px = self.px(*t);
            let _ = writeln!(
                out,
                r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{:.2}"/>"#,
                y0 + 5.0
            );
        }
        let (yt, yd) = ticks(self.y.0, self.y.1);
        for t in &yt {
            let py = self.py(*t);
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}"/>"#,
                x0 - 5.0
            );
        }
        let _ = writeln!(out, "</g>");
        let _ = writeln!(out, r#"<g class="tick-labels">"#);
        for t in &xt {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.*}</text>"#,
                self.px(*t),
                y0 + 18.0,
                xd,
                t
            );
        }
        for t in &yt {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.*}</text>"#,
                x0 - 8.0,
                self.py(*t) + 4.0,
                yd,
                t
            );
        }
        let _ = writeln!(out, "</g>");
        let _ = writeln!(
            out,
            r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + self.w / 2.0,
            style.height - 14.0,
            escape(&style.x_label)
        );
        let (lx, ly) = (18.0, TOP + self.h / 2.0);
        let _ = writeln!(
            out,
            r#"<text class="y-label" x="{lx}" y="{ly:.2}" text-anchor="middle" transform="rotate(-90 {lx} {ly:.2})">{}</text>"#,
            escape(&style.y_label)
        );
    }

    /// `swatch(out, x, y, colour)` draws the key for one entry.
    fn legend(
        &self,
        out: &mut String,
        names: &[&str],
        swatch: impl Fn(&mut String, f64, f64, &str),
    ) {
        let x = LEFT + self.w + 16.0;
        let _ = writeln!(out, r#"<g class="legend">"#);
        for (k, name) in names.iter().enumerate() {
            let y = TOP + 10.0 + 20.0 * k as f64;
            swatch(out, x, y, PALETTE[k % PALETTE.len()]);
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                x + 26.0,
                y + 4.0,
                escape(name)
            );
        }
        let _ = writeln!(out, "</g>");
    }
}

fn bounds<'a>(
    points: impl Iterator<Item = &'a (f64, f64)>,
) -> Result<((f64, f64), (f64, f64)), ReportError> {
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = x;
    for &(px, py) in points {
        if !(px.is_finite() && py.is_finite()) {
            return Err(ReportError::Invalid(format!(
                "point ({px}, {py}) is not finite"
            )));
        }
        x = (x.0.min(px), x.1.max(px));
        y = (y.0.min(py), y.1.max(py));
    }
    Ok((x, y))
}

/// One polyline per series.
pub fn line_svg(series: &[Series], style: &Style) -> Result<String, ReportError> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(ReportError::Empty("line chart needs non-empty series"));
    }
    let (x, y) = bounds(series.iter().flat_map(|s| &s.points))?;
    let f = Frame::new(style, x, y)?;
    let mut out = String::new();
    f.open(&mut out, style);
    f.axes(&mut out, style);
    let _ = writeln!(out, r#"<g class="series" fill="none" stroke-width="1.5">"#);
    for (k, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(px, py)| format!("{:.2},{:.2}", f.px(px), f.py(py)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline stroke="{}" points="{}"/>"#,
            PALETTE[k % PALETTE.len()],
            pts.join(" ")
        );
    }
    let _ = writeln!(out, "</g>");
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    f.legend(&mut out, &names, |o, x, y, c| {
        let _ = writeln!(o, r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{c}" stroke-width="2"/>"#, x + 20.0);
    });
    out.push_str("</svg>\n");
    Ok(out)
}

/// Bars for `bins` equal-width bins; returns the chart and the counts.
pub fn histogram_svg(
    name: &str,
    values: &[f64],
    bins: usize,
    style: &Style,
) -> Result<(String, Histogram), ReportError> {
    let hist = Histogram::new(values, bins)?;
    let top = *hist.counts.iter().max().unwrap_or(&1) as f64;
    let f = Frame::new(style, (hist.lo, hist.hi), (0.0, top.max(1.0)))?;
    let mut out = String::new();
    f.open(&mut out, style);
    let _ = writeln!(
        out,
        r#"<g class="bars" fill="{}" stroke="white" stroke-width="0.5">"#,
        PALETTE[0]
    );
    let w = hist.width();
    for (k, &c) in hist.counts.iter().enumerate() {
        let x0 = f.px(hist.lo + k as f64 * w);
        let x1 = f.px(hist.lo + (k + 1) as f64 * w);
        let y = f.py(c as f64);
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" data-count="{c}"/>"#,
            x1 - x0,
            f.py(0.0) - y
        );
    }
    let _ = writeln!(out, "</g>");
    f.axes(&mut out, style);
    f.legend(&mut out, &[name], |o, x, y, c| {
        let _ = writeln!(
            o,
            r#"<rect x="{x:.2}" y="{:.2}" width="20" height="10" fill="{c}"/>"#,
            y - 5.0
        );
    });
    out.push_str("</svg>\n");
    Ok((out, hist))
}

/// One circle per point, coloured by group.
pub fn scatter_svg(groups: &[Series], style: &Style) -> Result<String, ReportError> {
    if groups.iter().all(|g| g.points.is_empty()) {
        return Err(ReportError::Empty("scatter plot has no points"));
    }
    let (x, y) = bounds(groups.iter().flat_map(|s| &s.points))?;
    let f = Frame::new(style, x, y)?;
    let mut out = String::new();
    f.open(&mut out, style);
    f.axes(&mut out, style);
    for (k, g) in groups.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<g class="markers" fill="{}" fill-opacity="0.7">"#,
            PALETTE[k % PALETTE.len()]
        );
        for &(px, py) in &g.points {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#,
                f.px(px),
                f.py(py)
            );
        }
        let _ = writeln!(out, "</g>");
    }
    let names: Vec<&str> = groups.iter().map(|s| s.name.as_str()).collect();
    f.legend(&mut out, &names, |o, x, y, c| {
        let _ = writeln!(
            o,
            r#"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="{c}"/>"#,
            x + 6.0,
            y - 4.0
        );
    });
    out.push_str("</svg>\n");
    Ok(out)
}
