//! File formats: JSONL line streams and CSV trajectories.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::metrics::StateSample;
use crate::pipeline::{FrameInput, FrameOutput};
use crate::simulator::TruePose;
use crate::types::DetectedLine;

/// One frame of detected lines: `{"frame": 3, "lines": [[rho, theta], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineStreamRecord {
    pub frame: u64,
    pub lines: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
}

impl From<&FrameInput> for LineStreamRecord {
    fn from(f: &FrameInput) -> Self {
        Self {
            frame: f.frame_index,
            lines: f.lines.iter().map(|l| [l.rho, l.theta]).collect(),
            timestamp: f.timestamp,
        }
    }
}

impl LineStreamRecord {
    /// Checks `rho >= 0` and `-pi <= theta < pi` for every line.
    pub fn into_frame(self) -> std::result::Result<FrameInput, String> {
        let mut lines = Vec::with_capacity(self.lines.len());
        for (k, [rho, theta]) in self.lines.into_iter().enumerate() {
            let l = DetectedLine::new(rho, theta);
            if !l.is_raw_valid() {
                return Err(format!("line {k}: ({rho}, {theta}) needs rho >= 0 and -pi <= theta < pi"));
            }
            lines.push(l);
        }
        Ok(FrameInput {
            frame_index: self.frame,
            lines,
            timestamp: self.timestamp,
        })
    }
}

/// Parses a JSONL stream. Blank lines are skipped; errors carry the 1-based
/// text line number.
pub fn read_line_stream<R: BufRead>(reader: R) -> Result<Vec<FrameInput>> {
    let mut frames = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: k + 1, message };
        let rec: LineStreamRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        frames.push(rec.into_frame().map_err(parse_err)?);
    }
    Ok(frames)
}

pub fn write_line_stream<W: Write>(mut w: W, frames: &[FrameInput]) -> Result<()> {
    for f in frames {
        serde_json::to_writer(&mut w, &LineStreamRecord::from(f))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// One CSV row: position and height in meters, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub status: String,
}

pub const TRAJECTORY_HEADER: &str = "frame,x,y,z,roll_deg,pitch_deg,status";

/// Status written for ground-truth rows.
pub const TRUTH_STATUS: &str = "truth";

impl TrajectoryRecord {
    pub fn from_output(o: &FrameOutput) -> Self {
        Self {
            frame: o.frame_index,
            x: o.pose.x,
            y: o.pose.y,
            z: o.pose.h,
            roll_deg: o.pose.alpha.to_degrees(),
            pitch_deg: o.pose.beta.to_degrees(),
            status: o.status.as_str().to_string(),
        }
    }

    pub fn from_truth(frame: u64, p: &TruePose) -> Self {
        Self {
            frame,
            x: p.x,
            y: p.y,
            z: p.h,
            roll_deg: p.alpha.to_degrees(),
            pitch_deg: p.beta.to_degrees(),
            status: TRUTH_STATUS.to_string(),
        }
    }

    pub fn sample(&self) -> StateSample {
        StateSample {
            x: self.x,
            y: self.y,
            z: self.z,
            pitch_deg: self.pitch_deg,
            roll_deg: self.roll_deg,
        }
    }
}

/// Writes the header even when `rows` is empty.
pub fn write_trajectory<W: Write>(mut w: W, rows: &[TrajectoryRecord]) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for r in rows {
        csv.serialize(r).map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_trajectory<R: BufRead>(mut reader: R) -> Result<Vec<TrajectoryRecord>> {
    let mut header = String::new();
    reader.read_line(&mut header)?;
    if header.trim_end_matches(['\r', '\n']) != TRAJECTORY_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {TRAJECTORY_HEADER:?}"),
        });
    }
    let mut csv = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut rows = Vec::new();
    for (k, rec) in csv.deserialize().enumerate() {
        rows.push(rec.map_err(|e: csv::Error| Error::Parse {
            line: k + 2,
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}
