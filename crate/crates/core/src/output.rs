//! CSV and SVG artifacts.
//!
//! Every CSV starts with a `# schema: <name> v<version>` comment line,
//! then a header row. Floats are written with 17 significant digits so
//! values round-trip exactly.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dynamics::ModalState;
use crate::error::{BidomainError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub enum Cell {
    F(f64),
    I(usize),
    S(String),
    B(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::I(i)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::B(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::S(s)
    }
}

pub struct CsvTable {
    pub schema: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(schema: &str, header: &[&str]) -> Self {
        CsvTable {
            schema: schema.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(schema: &str, header: Vec<String>) -> Self {
        CsvTable {
            schema: schema.to_string(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "# schema: {} v{SCHEMA_VERSION}", self.schema)?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let io = |e: csv::Error| BidomainError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A CSV read back as header plus string records (schema line skipped).
pub struct CsvData {
    pub schema: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvData {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn f64_column(&self, name: &str, path: &Path) -> Result<Vec<f64>> {
        let c = self.column(name).ok_or_else(|| BidomainError::Parse {
            path: path.to_path_buf(),
            message: format!("missing column `{name}`"),
        })?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[c].parse::<f64>().map_err(|e| BidomainError::Parse {
                    path: path.to_path_buf(),
                    message: format!("row {}, column `{name}`: {e}", i + 1),
                })
            })
            .collect()
    }
}

pub fn read_csv(path: &Path) -> Result<CsvData> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let (schema, rest): (Option<String>, Box<dyn Read>) = match first.strip_prefix("# schema:") {
        Some(s) => (Some(s.trim().to_string()), Box::new(reader)),
        None => (None, Box::new(std::io::Cursor::new(first.into_bytes()).chain(reader))),
    };
    let err = |e: csv::Error| BidomainError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(rest);
    let header = r.headers().map_err(err)?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(err)?;
    Ok(CsvData { schema, header, rows })
}

pub fn write_modal_state(path: &Path, x: &ModalState) -> Result<()> {
    let mut t = CsvTable::new("modal_state", &["mode", "time", "alpha", "beta"]);
    for j in 0..x.modes() {
        t.push(vec![j.into(), x.time.into(), x.alpha[j].into(), x.beta[j].into()]);
    }
    t.write(path)
}

pub fn read_modal_state(path: &Path) -> Result<ModalState> {
    let d = read_csv(path)?;
    let alpha = d.f64_column("alpha", path)?;
    let beta = d.f64_column("beta", path)?;
    let time = d.f64_column("time", path)?.first().copied().unwrap_or(0.0);
    ModalState::new(alpha, beta, time)
}

/// One curve of a line plot.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: &str, xs: &[f64], ys: &[f64]) -> Self {
        Series {
            label: label.to_string(),
            points: xs.iter().copied().zip(ys.iter().copied()).collect(),
        }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Minimal SVG line plot; with `log_y` non-positive values are dropped.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_y: bool) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
                .map(|&(x, y)| (x, ty(y)))
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0 < x1) {
        (x0, x1) = if x0.is_finite() { (x0 - 0.5, x0 + 0.5) } else { (0.0, 1.0) };
    }
    if !(y0 < y1) {
        (y0, y1) = if y0.is_finite() { (y0 - 0.5, y0 + 0.5) } else { (0.0, 1.0) };
    }
    if log_y {
        (y0, y1) = (y0.floor(), y1.ceil());
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    for i in 0..=4 {
        let xv = x0 + i as f64 / 4.0 * (x1 - x0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xv:.3}</text>"#, px(xv), h - bottom + 16.0);
    }
    let y_ticks: Vec<f64> = if log_y {
        let decades = (y1 - y0) as usize;
        let stride = decades.div_ceil(6).max(1);
        (0..=decades).step_by(stride).map(|d| y0 + d as f64).collect()
    } else {
        (0..=4).map(|i| y0 + i as f64 / 4.0 * (y1 - y0)).collect()
    };
    for yv in y_ticks {
        let ylab = if log_y { format!("1e{yv:.0}") } else { format!("{yv:.3e}") };
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{ylab}</text>"#, left - 4.0, py(yv) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 10.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(ylabel)
    );
    for (i, (sr, p)) in series.iter().zip(&pts).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = top + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            w - right - 6.0,
            escape(&sr.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
