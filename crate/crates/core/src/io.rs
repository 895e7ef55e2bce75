//! CSV readers and writers for sweeps, readings, trajectories and grids.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::DesignRow;
use crate::fivebar::{Grid, TerminalPose};
use crate::sensor::{ChannelReading, SweepTable};
use crate::twin::{ReconstructedSample, TrajectorySample};

pub const CHANNEL_PREFIX: &str = "ch_";

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

/// Shortest text that parses back to the same `f64`, in exponent form for
/// very small or large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(field: &str, column: &str) -> Result<f64, String> {
    let v: f64 = field.trim().parse().map_err(|_| format!("{column}: cannot parse '{field}'"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{column}: non-finite value '{field}'"))
    }
}

pub fn write_sweep<W: Write>(table: &SweepTable, out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["position_mm".to_string(), "force_n".to_string()];
    header.extend(table.channel_names.iter().map(|n| format!("{CHANNEL_PREFIX}{n}")));
    w.write_record(&header)?;
    for row in &table.rows {
        let mut rec = vec![fmt_f64(row.stimulus.position_mm), fmt_f64(row.stimulus.force_n)];
        rec.extend(row.reading.intensities.iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadingRow {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub position_mm: Option<f64>,
    pub force_n: Option<f64>,
    /// Parse failures are kept per row so one bad line does not sink the file.
    pub reading: Result<ChannelReading, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReadingTable {
    pub channel_names: Vec<String>,
    pub rows: Vec<ReadingRow>,
}

/// Reads a table with `ch_<name>` columns and optional `position_mm` /
/// `force_n` columns. An empty input yields an empty table.
pub fn read_readings<R: Read>(input: R) -> Result<ReadingTable, IoError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Ok(ReadingTable::default());
    }
    let mut channel_cols = Vec::new();
    let mut channel_names = Vec::new();
    let (mut pos_col, mut force_col) = (None, None);
    for (i, h) in header.iter().enumerate() {
        let h = h.trim();
        if let Some(name) = h.strip_prefix(CHANNEL_PREFIX) {
            channel_cols.push(i);
            channel_names.push(name.to_string());
        } else if h == "position_mm" {
            pos_col = Some(i);
        } else if h == "force_n" {
            force_col = Some(i);
        }
    }
    if channel_cols.is_empty() {
        return Err(IoError::Header(format!("no '{CHANNEL_PREFIX}<name>' columns in {:?}", header)));
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                rows.push(ReadingRow { row, position_mm: None, force_n: None, reading: Err(e.to_string()) });
                continue;
            }
        };
        let optional = |col: Option<usize>, name: &str| -> Result<Option<f64>, String> {
            match col.map(|c| rec.get(c)) {
                None => Ok(None),
                Some(None) => Err(format!("missing {name}")),
                Some(Some(f)) if f.trim().is_empty() => Ok(None),
                Some(Some(f)) => parse_f64(f, name).map(Some),
            }
        };
        let position_mm = optional(pos_col, "position_mm");
        let force_n = optional(force_col, "force_n");
        let intensities: Result<Vec<f64>, String> = channel_cols
            .iter()
            .zip(&channel_names)
            .map(|(&c, name)| match rec.get(c) {
                Some(f) => parse_f64(f, &format!("{CHANNEL_PREFIX}{name}")),
                None => Err(format!("missing {CHANNEL_PREFIX}{name}")),
            })
            .collect();
        let reading = match (&position_mm, &force_n, intensities) {
            (Err(e), _, _) | (_, Err(e), _) => Err(e.clone()),
            (_, _, Err(e)) => Err(e),
            (_, _, Ok(v)) => Ok(ChannelReading::new(v)),
        };
        rows.push(ReadingRow {
            row,
            position_mm: position_mm.unwrap_or(None),
            force_n: force_n.unwrap_or(None),
            reading,
        });
    }
    Ok(ReadingTable { channel_names, rows })
}

/// One line of decoder output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedRecord {
    pub row: usize,
    pub position_mm: Option<f64>,
    pub raw_position_mm: Option<f64>,
    pub force_n: Option<f64>,
    /// `ok`, `out_of_span`, `no_contact`, `below_threshold`, `saturated`, `parse_error` or `error`.
    pub flag: String,
    pub message: Option<String>,
}

pub fn write_decoded<W: Write>(records: &[DecodedRecord], out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "position_mm", "raw_position_mm", "force_n", "flag", "message"])?;
    for r in records {
        w.write_record([
            r.row.to_string(),
            fmt_opt(r.position_mm),
            fmt_opt(r.raw_position_mm),
            fmt_opt(r.force_n),
            r.flag.clone(),
            r.message.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Vec<TrajectorySample>, IoError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IoError::Header(format!("trajectory needs columns t, x_mm, y_mm; missing '{name}'")))
    };
    let (ct, cx, cy) = (col("t")?, col("x_mm")?, col("y_mm")?);
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        let get = |c: usize, name: &str| {
            parse_f64(rec.get(c).unwrap_or(""), name).map_err(|message| IoError::Row { row, message })
        };
        out.push(TrajectorySample { t: get(ct, "t")?, pose: TerminalPose::new(get(cx, "x_mm")?, get(cy, "y_mm")?) });
    }
    Ok(out)
}

pub fn write_trajectory<W: Write>(samples: &[TrajectorySample], out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x_mm", "y_mm"])?;
    for s in samples {
        w.write_record([fmt_f64(s.t), fmt_f64(s.pose.x), fmt_f64(s.pose.y)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reconstructed path; dropped samples have empty pose and error fields.
pub fn write_reconstructed<W: Write>(samples: &[ReconstructedSample], out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x_mm", "y_mm", "true_x_mm", "true_y_mm", "error_mm"])?;
    for s in samples {
        w.write_record([
            fmt_f64(s.t),
            fmt_opt(s.pose.map(|p| p.x)),
            fmt_opt(s.pose.map(|p| p.y)),
            fmt_f64(s.truth.x),
            fmt_f64(s.truth.y),
            fmt_opt(s.error_mm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Header row `y\x, x0, x1, …`, then one row per y value.
pub fn write_grid<W: Write, T>(grid: &Grid<T>, cell: impl Fn(&T) -> String, out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["y\\x".to_string()];
    header.extend(grid.spec.xs().into_iter().map(fmt_f64));
    w.write_record(&header)?;
    for (y, row) in grid.spec.ys().into_iter().zip(grid.rows()) {
        let mut rec = vec![fmt_f64(y)];
        rec.extend(row.iter().map(&cell));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_design<W: Write>(rows: &[DesignRow], out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["length_mm", "concentration_scale", "slope_per_mm", "intercept", "r_squared", "span"])?;
    for r in rows {
        w.write_record([
            fmt_f64(r.length_mm),
            fmt_f64(r.concentration_scale),
            fmt_f64(r.slope),
            fmt_f64(r.intercept),
            fmt_f64(r.r_squared),
            fmt_f64(r.span),
        ])?;
    }
    w.flush()?;
    Ok(())
}
