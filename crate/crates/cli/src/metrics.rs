//! Metrics CSV and SVG output.

use std::fmt::Write as _;
use std::path::Path;

use prospect_core::MetricsRow;

use crate::error::{CliError, Result};

pub const HEADER: [&str; 6] = ["optimizer", "seed", "pass", "objective", "suboptimality", "wall_time_s"];

/// One CSV row: a logged point of one `(optimizer, seed)` trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub optimizer: String,
    pub seed: u64,
    pub pass: f64,
    pub objective: f64,
    pub suboptimality: f64,
    pub wall_time_s: f64,
}

impl MetricsRecord {
    pub fn new(optimizer: &str, seed: u64, row: &MetricsRow) -> Self {
        MetricsRecord {
            optimizer: optimizer.to_owned(),
            seed,
            pass: row.pass,
            objective: row.objective,
            suboptimality: row.suboptimality,
            wall_time_s: row.wall_time_s,
        }
    }
}

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Data(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_metrics(records: &[MetricsRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(CliError::Data("no metrics records to write".into()));
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer.write_record(HEADER).map_err(|e| csv_err(path, e))?;
    for r in records {
        writer
            .write_record([
                r.optimizer.clone(),
                r.seed.to_string(),
                format_float(r.pass),
                format_float(r.objective),
                format_float(r.suboptimality),
                format_float(r.wall_time_s),
            ])
            .map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(HEADER) {
        return Err(CliError::Data(format!("{}: unexpected header {header:?}", path.display())));
    }
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let field = |k: usize| -> Result<f64> {
            record[k]
                .parse()
                .map_err(|_| CliError::Data(format!("row {}: bad `{}` value `{}`", row + 1, HEADER[k], &record[k])))
        };
        out.push(MetricsRecord {
            optimizer: record[0].to_owned(),
            seed: record[1].parse().map_err(|_| CliError::Data(format!("row {}: bad seed `{}`", row + 1, &record[1])))?,
            pass: field(2)?,
            objective: field(3)?,
            suboptimality: field(4)?,
            wall_time_s: field(5)?,
        });
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Suboptimality (log scale) against passes, one polyline per trajectory,
/// colored by optimizer. Values below `1e-16` are clamped.
pub fn write_plot(records: &[MetricsRecord], path: &Path) -> Result<()> {
    let (width, height, margin) = (720.0, 440.0, 60.0);
    let floor = 1e-16f64;
    let y_of = |s: f64| s.max(floor).log10();
    let finite: Vec<&MetricsRecord> = records.iter().filter(|r| r.suboptimality.is_finite()).collect();
    let x_max = finite.iter().map(|r| r.pass).fold(1.0, f64::max);
    let y_max = finite.iter().map(|r| y_of(r.suboptimality)).fold(0.0, f64::max).ceil();
    let y_min = finite.iter().map(|r| y_of(r.suboptimality)).fold(0.0, f64::min).floor().min(y_max - 1.0);
    let px = |x: f64| margin + x / x_max * (width - 2.0 * margin);
    let py = |y: f64| margin + (y_max - y) / (y_max - y_min) * (height - 2.0 * margin);

    let mut optimizers: Vec<&str> = Vec::new();
    for r in records {
        if !optimizers.contains(&r.optimizer.as_str()) {
            optimizers.push(&r.optimizer);
        }
    }
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, y0, y1) = (px(0.0), px(x_max), py(y_min), py(y_max));
    let _ = writeln!(svg, r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" stroke="black" fill="none"/>"#);
    let mut e = y_min as i64;
    while e <= y_max as i64 {
        let y = py(e as f64);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"#, x0 - 6.0, y + 4.0);
        e += ((y_max - y_min) / 8.0).ceil().max(1.0) as i64;
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">passes</text>"#, (x0 + x1) / 2.0, height - 20.0);
    let _ = writeln!(svg, r#"<text x="{x1:.1}" y="{:.1}" text-anchor="end">{x_max:.0}</text>"#, y0 + 16.0);

    let mut start = 0;
    while start < records.len() {
        let (name, seed) = (&records[start].optimizer, records[start].seed);
        let end = start + records[start..].iter().take_while(|r| &r.optimizer == name && r.seed == seed).count();
        let color = PALETTE[optimizers.iter().position(|o| o == name).unwrap_or(0) % PALETTE.len()];
        let points: Vec<String> = records[start..end]
            .iter()
            .filter(|r| r.suboptimality.is_finite())
            .map(|r| format!("{:.1},{:.1}", px(r.pass), py(y_of(r.suboptimality))))
            .collect();
        let _ = writeln!(svg, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, points.join(" "));
        start = end;
    }
    for (k, name) in optimizers.iter().enumerate() {
        let y = margin + 16.0 * k as f64;
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{y:.1}" fill="{color}" text-anchor="end">{}</text>"#, width - margin, escape(name));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|e| CliError::io(path, e))
}
