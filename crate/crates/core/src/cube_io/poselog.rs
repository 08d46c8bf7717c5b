use std::path::Path;

use super::{io_err, CubeError, Result};
use crate::geodesy::{GeodeticPoint, InsRecord};

/// Required header columns; order in the file is free.
pub const POSE_LOG_COLUMNS: [&str; 7] = ["timestamp", "lat", "lon", "alt", "roll", "pitch", "yaw"];

/// Reads a pose-log CSV. Timestamps must be strictly increasing. Errors
/// carry the 1-based file line (the header is line 1).
pub fn read_pose_log(path: &Path) -> Result<Vec<InsRecord>> {
    let err = |line: usize, message: String| CubeError::PoseLog {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => io_err(path)(io),
            other => err(0, format!("{other:?}")),
        })?;
    let headers = rdr
        .headers()
        .map_err(|e| err(1, e.to_string()))?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(err(1, "empty pose log".into()));
    }
    let mut index = [0usize; 7];
    for (slot, name) in index.iter_mut().zip(POSE_LOG_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| err(1, format!("missing column `{name}`")))?;
    }

    let mut records: Vec<InsRecord> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let mut v = [0f64; 7];
        for (k, (&col, name)) in index.iter().zip(POSE_LOG_COLUMNS).enumerate() {
            let cell = row
                .get(col)
                .ok_or_else(|| err(line, format!("missing value for `{name}`")))?;
            v[k] = cell
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(line, format!("`{name}` is not a finite number: {cell:?}")))?;
        }
        let position = GeodeticPoint::new(v[1], v[2], v[3]).map_err(|e| err(line, e.to_string()))?;
        if let Some(prev) = records.last() {
            if v[0] <= prev.timestamp {
                let what = if v[0] == prev.timestamp {
                    "duplicated"
                } else {
                    "decreasing"
                };
                return Err(err(line, format!("{what} timestamp {}", v[0])));
            }
        }
        records.push(InsRecord {
            timestamp: v[0],
            position,
            roll: v[4],
            pitch: v[5],
            yaw: v[6],
        });
    }
    if records.is_empty() {
        return Err(err(1, "pose log has no records".into()));
    }
    Ok(records)
}

pub fn write_pose_log(path: &Path, records: &[InsRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let to_err = |e: csv::Error| CubeError::Invalid(format!("{}: {e}", path.display()));
    w.write_record(POSE_LOG_COLUMNS).map_err(to_err)?;
    for r in records {
        w.write_record([
            r.timestamp.to_string(),
            r.position.latitude.to_string(),
            r.position.longitude.to_string(),
            r.position.altitude.to_string(),
            r.roll.to_string(),
            r.pitch.to_string(),
            r.yaw.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}
