use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::two_d::Snapshot2D;
use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// Cell data written to a snapshot file: centres, widths, levels and the
/// cell-major state.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub names: Vec<String>,
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub h: Vec<f64>,
    pub level: Vec<u32>,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_1d(grid: &Grid1D, w: &[f64], names: &[String]) -> Self {
        Self {
            names: names.to_vec(),
            x: grid.centers().to_vec(),
            y: None,
            h: grid.widths().to_vec(),
            level: grid.levels(),
            values: w.to_vec(),
        }
    }

    /// Window of a 2D snapshot; `h` is the (uniform) cell width.
    pub fn from_2d(snap: &Snapshot2D, names: &[String], h: f64) -> Self {
        let cells = snap.nx * snap.ny;
        let mut x = Vec::with_capacity(cells);
        let mut y = Vec::with_capacity(cells);
        for &yj in &snap.y {
            for &xi in &snap.x {
                x.push(xi);
                y.push(yj);
            }
        }
        Self {
            names: names.to_vec(),
            x,
            y: Some(y),
            h: vec![h; cells],
            level: vec![0; cells],
            values: snap.values.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Shortest text that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_snapshot_csv(path: &Path, snap: &Snapshot) -> Result<()> {
    let n = snap.names.len();
    let mut out = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["x".to_string()];
    if snap.y.is_some() {
        header.push("y".into());
    }
    header.extend(["h".to_string(), "level".to_string()]);
    header.extend(snap.names.iter().cloned());
    out.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..snap.len() {
        let mut row = vec![num(snap.x[i])];
        if let Some(y) = &snap.y {
            row.push(num(y[i]));
        }
        row.push(num(snap.h[i]));
        row.push(snap.level[i].to_string());
        row.extend(snap.values[i * n..(i + 1) * n].iter().map(|&v| num(v)));
        out.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_snapshot_csv(path: &Path) -> Result<Snapshot> {
    let malformed = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = rdr.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
    let has_y = header.get(1).map(String::as_str) == Some("y");
    let first = if has_y { 4 } else { 3 };
    let expected: &[&str] = if has_y { &["x", "y", "h", "level"] } else { &["x", "h", "level"] };
    if header.len() <= first || header[..first] != *expected {
        return Err(malformed(format!("unexpected header {header:?}")));
    }
    let names = header[first..].to_vec();
    let mut snap = Snapshot {
        names,
        x: Vec::new(),
        y: has_y.then(Vec::new),
        h: Vec::new(),
        level: Vec::new(),
        values: Vec::new(),
    };
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != header.len() {
            return Err(malformed(format!("row {} has {} fields", line + 1, record.len())));
        }
        let f = |k: usize| -> Result<f64> {
            record[k]
                .parse::<f64>()
                .map_err(|e| malformed(format!("row {}, column {}: {e}", line + 1, header[k])))
        };
        snap.x.push(f(0)?);
        if let Some(y) = &mut snap.y {
            y.push(f(1)?);
        }
        snap.h.push(f(first - 2)?);
        snap.level.push(
            record[first - 1]
                .parse()
                .map_err(|e| malformed(format!("row {}, level: {e}", line + 1)))?,
        );
        for k in first..header.len() {
            snap.values.push(f(k)?);
        }
    }
    Ok(snap)
}

/// One line of the per-step metrics file.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub t: f64,
    pub dt: f64,
    pub masses: Vec<f64>,
    pub error: Option<f64>,
}

/// `t,dt,mass_<species>...[,E]`; the error column appears when any row has one.
pub fn write_metrics_csv(path: &Path, names: &[String], rows: &[MetricsRow]) -> Result<()> {
    let with_error = rows.iter().any(|r| r.error.is_some());
    let mut out = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["t".to_string(), "dt".to_string()];
    header.extend(names.iter().map(|s| format!("mass_{s}")));
    if with_error {
        header.push("E".into());
    }
    out.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        let mut row = vec![num(r.t), num(r.dt)];
        row.extend(r.masses.iter().map(|&m| num(m)));
        if with_error {
            row.push(r.error.map(num).unwrap_or_default());
        }
        out.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Run-level description written next to the result files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub preset: String,
    pub method: String,
    pub cells: usize,
    pub t_end: f64,
    pub cfl: f64,
    /// Every model parameter by symbol name.
    pub parameters: BTreeMap<String, f64>,
    pub steps: usize,
    pub rejections: usize,
    pub wall_time: f64,
    /// Resolved configuration of the run.
    pub config: serde_json::Value,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
