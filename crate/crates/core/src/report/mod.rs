//! Static reports: standalone SVG charts and `label = value` summaries.

mod svg;

pub use svg::{histogram_svg, line_svg, scatter_svg};

use std::fmt::Display;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to plot: {0}")]
    Empty(&'static str),
    #[error("invalid chart data: {0}")]
    Invalid(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Titles and canvas size shared by every chart kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Style {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: f64,
    pub height: f64,
}

impl Style {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            width: 720.0,
            height: 480.0,
        }
    }
}

/// A named polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

/// Equal-width bin counts over `[min, max]`. The last bin is closed so the
/// maximum is counted. Non-finite values are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Result<Self, ReportError> {
        if values.is_empty() {
            return Err(ReportError::Empty("histogram has no samples"));
        }
        if bins == 0 {
            return Err(ReportError::Invalid(
                "histogram needs at least one bin".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ReportError::Invalid(
                "histogram sample is not finite".into(),
            ));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi == lo {
            hi = lo + 1.0;
        }
        let w = (hi - lo) / bins as f64;
        let mut counts = vec![0; bins];
        for v in values {
            let k = (((v - lo) / w) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(Self { lo, hi, counts })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// `label = value` lines, one per entry.
pub fn summary_lines<V: Display>(entries: &[(&str, V)]) -> String {
    let mut s = String::new();
    for (label, value) in entries {
        s.push_str(&format!("{label} = {value}\n"));
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    std::fs::write(path, text).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}
