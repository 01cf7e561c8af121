//! Parser for the Intel Berkeley lab `labdata` text layout.

use std::io::BufRead;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};

/// One mote reading. Missing trailing fields are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawReading {
    pub timestamp: NaiveDateTime,
    pub epoch: i64,
    pub node_id: u32,
    pub temperature: Option<f64>,
    pub humidity: Option<f64>,
    pub light: Option<f64>,
    pub voltage: Option<f64>,
}

/// Timestamp-sorted readings plus a record of skipped lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawReadingLog {
    pub rows: Vec<RawReading>,
    /// 1-based line numbers of rows that could not be parsed.
    pub skipped_lines: Vec<usize>,
}

impl RawReadingLog {
    pub fn skipped(&self) -> usize {
        self.skipped_lines.len()
    }
}

fn parse_time(date: &str, time: &str) -> Option<NaiveDateTime> {
    let joined = format!("{date} {time}");
    NaiveDateTime::parse_from_str(&joined, "%Y-%m-%d %H:%M:%S%.f").ok()
}

fn parse_line(line: &str) -> Option<RawReading> {
    let fields: Vec<&str> = line
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|f| !f.is_empty())
        .collect();
    if fields.len() < 5 || fields.len() > 8 {
        return None;
    }
    let timestamp = parse_time(fields[0], fields[1])?;
    let epoch = fields[2].parse().ok()?;
    let node_id = fields[3].parse().ok()?;
    let mut readings = [None; 4];
    for (slot, f) in readings.iter_mut().zip(&fields[4..]) {
        let v: f64 = f.parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        *slot = Some(v);
    }
    let [temperature, humidity, light, voltage] = readings;
    Some(RawReading {
        timestamp,
        epoch,
        node_id,
        temperature,
        humidity,
        light,
        voltage,
    })
}

/// Reads whitespace- or comma-separated rows of
/// `date time epoch moteid temperature humidity light voltage`.
pub fn ingest_ibrl<R: BufRead>(source: R) -> Result<RawReadingLog> {
    let mut log = RawReadingLog::default();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<ibrl log>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Some(r) => log.rows.push(r),
            None => log.skipped_lines.push(i + 1),
        }
    }
    if log.rows.is_empty() {
        return Err(Error::Format(format!(
            "no valid readings ({} malformed lines)",
            log.skipped()
        )));
    }
    if log.skipped() > 0 {
        log::warn!("skipped {} malformed rows", log.skipped());
    }
    log.rows.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.node_id.cmp(&b.node_id)));
    Ok(log)
}

/// Formats a reading back into the source layout.
pub fn format_reading(r: &RawReading) -> String {
    let mut s = format!("{} {} {}", r.timestamp.format("%Y-%m-%d %H:%M:%S%.6f"), r.epoch, r.node_id);
    for v in [r.temperature, r.humidity, r.light, r.voltage] {
        match v {
            Some(v) => s.push_str(&format!(" {v}")),
            None => break,
        }
    }
    s
}
