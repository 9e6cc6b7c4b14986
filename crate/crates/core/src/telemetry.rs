//! CSV telemetry: one row per sampled instant of state, actuation and power.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const HEADER: &str =
    "time_s,x_m,y_m,depth_m,yaw_deg,yaw_rate_dps,surge_mps,sway_mps,servo_deg,torque_nm,power_w,erection,syringe_ml";
const COLUMNS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TelemetryRecord {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub depth: f64,
    pub yaw_deg: f64,
    pub yaw_rate_dps: f64,
    pub surge_mps: f64,
    pub sway_mps: f64,
    pub servo_deg: f64,
    pub torque_nm: f64,
    pub power_w: f64,
    pub erection: f64,
    pub syringe_ml: f64,
}

impl TelemetryRecord {
    fn fields(&self) -> [f64; COLUMNS] {
        [
            self.time,
            self.x,
            self.y,
            self.depth,
            self.yaw_deg,
            self.yaw_rate_dps,
            self.surge_mps,
            self.sway_mps,
            self.servo_deg,
            self.torque_nm,
            self.power_w,
            self.erection,
            self.syringe_ml,
        ]
    }

    fn from_fields(f: [f64; COLUMNS]) -> Self {
        Self {
            time: f[0],
            x: f[1],
            y: f[2],
            depth: f[3],
            yaw_deg: f[4],
            yaw_rate_dps: f[5],
            surge_mps: f[6],
            sway_mps: f[7],
            servo_deg: f[8],
            torque_nm: f[9],
            power_w: f[10],
            erection: f[11],
            syringe_ml: f[12],
        }
    }

    /// Value of the column named as in [`HEADER`].
    pub fn column(&self, name: &str) -> Option<f64> {
        HEADER.split(',').position(|c| c == name).map(|i| self.fields()[i])
    }

    /// Comma-separated row without a trailing newline.
    pub fn to_csv_row(&self) -> String {
        let mut line = String::with_capacity(160);
        for (i, v) in self.fields().iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format_sig9(*v));
        }
        line
    }
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros
/// removed, scientific notation outside `1e-4 <= |x| < 1e9`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        let mut s = format!("{x:.decimals$}");
        if s.contains('.') {
            let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
            s.truncate(trimmed);
        }
        s
    } else {
        let mut m = mantissa.to_string();
        if m.contains('.') {
            let trimmed = m.trim_end_matches('0').trim_end_matches('.').len();
            m.truncate(trimmed);
        }
        let mut s = String::new();
        let _ = write!(s, "{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
        s
    }
}

fn check_records(records: &[TelemetryRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Validation("telemetry must contain at least one record".into()));
    }
    for (i, r) in records.iter().enumerate() {
        if !r.fields().iter().all(|v| v.is_finite()) {
            return Err(Error::Validation(format!("record {i} has a non-finite field")));
        }
    }
    if let Some(i) = records.windows(2).position(|w| !(w[1].time > w[0].time)) {
        return Err(Error::Validation(format!(
            "time not strictly increasing at record {}",
            i + 1
        )));
    }
    Ok(())
}

/// Serializes records to `out`, header first. Returns bytes written.
pub fn write_records<W: Write>(records: &[TelemetryRecord], mut out: W) -> std::io::Result<usize> {
    let mut bytes = 0;
    let mut line = String::with_capacity(HEADER.len() + 1);
    line.push_str(HEADER);
    line.push('\n');
    out.write_all(line.as_bytes())?;
    bytes += line.len();
    for r in records {
        line.clear();
        line.push_str(&r.to_csv_row());
        line.push('\n');
        out.write_all(line.as_bytes())?;
        bytes += line.len();
    }
    out.flush()?;
    Ok(bytes)
}

pub fn write_telemetry(records: &[TelemetryRecord], destination: &Path) -> Result<usize> {
    check_records(records)?;
    let file = std::fs::File::create(destination).map_err(|e| Error::io(destination, e))?;
    write_records(records, std::io::BufWriter::new(file)).map_err(|e| Error::io(destination, e))
}

/// Parses telemetry text with a strict header check.
pub fn parse_telemetry(text: &str) -> Result<Vec<TelemetryRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file, header required".into(),
    })?;
    if header.trim_end_matches('\r') != HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header, expected `{HEADER}`"),
        });
    }
    let mut records = Vec::new();
    for (idx, raw) in lines.enumerate() {
        let line_no = idx + 2;
        let raw = raw.trim_end_matches('\r');
        if raw.is_empty() {
            continue;
        }
        let mut fields = [0.0; COLUMNS];
        let mut count = 0;
        for (i, tok) in raw.split(',').enumerate() {
            if i >= COLUMNS {
                count = i + 1;
                break;
            }
            fields[i] = tok.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("column {} (`{tok}`): {e}", i + 1),
            })?;
            count = i + 1;
        }
        if count != COLUMNS {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {COLUMNS} columns"),
            });
        }
        if !fields.iter().all(|v| v.is_finite()) {
            return Err(Error::Parse {
                line: line_no,
                message: "non-finite value".into(),
            });
        }
        let rec = TelemetryRecord::from_fields(fields);
        if let Some(prev) = records.last() {
            let prev: &TelemetryRecord = prev;
            if !(rec.time > prev.time) {
                return Err(Error::Validation(format!(
                    "time not strictly increasing at line {line_no}"
                )));
            }
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn read_telemetry(source: &Path) -> Result<Vec<TelemetryRecord>> {
    let text = std::fs::read_to_string(source).map_err(|e| Error::io(source, e))?;
    parse_telemetry(&text)
}

/// Keeps every record whose time falls on the `rate_hz` grid, given the
/// simulation step `dt`. A rate at or above `1/dt` keeps everything.
pub fn decimate(records: &[TelemetryRecord], dt: f64, rate_hz: f64) -> Vec<TelemetryRecord> {
    let every = ((1.0 / (rate_hz * dt)).round() as usize).max(1);
    records.iter().step_by(every).copied().collect()
}
