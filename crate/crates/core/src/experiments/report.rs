use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Summary of one sweep cell across replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub x: f64,
    pub replicates: usize,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

impl Cell {
    pub fn from_values(x: f64, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("sweep cell"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite value {v} in cell x = {x}")));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Cell {
            x,
            replicates: values.len(),
            min: sorted[0],
            q25: quantile(&sorted, 0.25),
            q50: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        // Convex combination, clamped so rounding cannot break monotonicity.
        (sorted[lo] + (sorted[hi] - sorted[lo]) * frac).clamp(sorted[lo], sorted[hi])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub cells: Vec<Cell>,
}

impl Series {
    pub fn new(name: &str, x_label: &str) -> Self {
        Series { name: name.to_string(), x_label: x_label.to_string(), cells: Vec::new() }
    }

    pub fn push(&mut self, x: f64, values: &[f64]) -> Result<()> {
        self.cells.push(Cell::from_values(x, values)?);
        Ok(())
    }

    pub fn medians(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.q50).collect()
    }

    pub fn median_at(&self, x: f64) -> Option<f64> {
        self.cells.iter().find(|c| c.x == x).map(|c| c.q50)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Seeds {
    pub base: u64,
    pub replicates: Vec<u64>,
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &str) -> Self {
        Table { header: header.split(',').map(str::to_string).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Output of one experiment. Wall time is kept out so reruns are
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub format_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Seeds,
    pub notes: Vec<String>,
    pub series: Vec<Series>,
    pub summary: serde_json::Value,
    pub flags: Vec<String>,
    #[serde(skip)]
    pub table: Table,
}

impl RunReport {
    pub fn new<C: Serialize>(command: &str, config: &C, seeds: Seeds) -> Result<Self> {
        Ok(RunReport {
            format_version: REPORT_FORMAT_VERSION,
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seeds,
            notes: Vec::new(),
            series: Vec::new(),
            summary: serde_json::Value::Object(Default::default()),
            flags: Vec::new(),
            table: Table::default(),
        })
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Shortest round-trip formatting for CSV cells.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// A static line chart of the median of every series.
pub fn render_svg(report: &RunReport) -> String {
    let (w, h, margin) = (640.0, 400.0, 50.0);
    let points: Vec<(f64, f64)> = report.series.iter().flat_map(|s| s.cells.iter().map(|c| (c.x, c.q50))).collect();
    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| points.iter().map(pick).fold(init, f);
    let (mut x0, mut x1) = (fold(f64::min, f64::INFINITY, |p| p.0), fold(f64::max, f64::NEG_INFINITY, |p| p.0));
    let (mut y0, mut y1) = (fold(f64::min, f64::INFINITY, |p| p.1), fold(f64::max, f64::NEG_INFINITY, |p| p.1));
    if !(x0.is_finite() && x1.is_finite()) {
        (x0, x1) = (0.0, 1.0);
    }
    if !(y0.is_finite() && y1.is_finite()) {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| margin + (x - x0) / (x1 - x0) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y - y0) / (y1 - y0) * (h - 2.0 * margin);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = margin,
        b = h - margin,
        r = w - margin
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, w / 2.0, h - 15.0, report.command);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10">{:.4}</text>"#, margin, h - margin + 14.0, x0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.4}</text>"#, w - margin, h - margin + 14.0, x1);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.4}</text>"#, margin - 4.0, h - margin, y0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.4}</text>"#, margin - 4.0, margin, y1);
    for (i, s) in report.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s.cells.iter().map(|c| format!("{:.2},{:.2}", sx(c.x), sy(c.q50))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - margin - 120.0,
            margin + 14.0 * (i as f64 + 1.0),
            s.name
        );
    }
    svg.push_str("</svg>\n");
    svg
}
