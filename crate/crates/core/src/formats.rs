//! Text formats: snapshot CSV, priors JSON, complex matrix CSV.
//!
//! Snapshot CSV rows are `sensor,t,re,im` with 0-based sensors. Times
//! `-M+1..=0` are noise-only snapshots, `1..=N` are data snapshots. Every
//! `(sensor, t)` pair must appear exactly once.

use std::fmt::Write as _;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::format_sig9;
use crate::linalg::{c64, CMat};
use crate::scenario::{PriorConfig, PriorSpec, MAX_SENSORS};

#[derive(Debug, Deserialize)]
struct SnapshotRecord {
    sensor: i64,
    t: i64,
    re: f64,
    im: f64,
}

/// Noise-only and data snapshot matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    /// `m × M`, column `k` is time `k - M + 1`.
    pub y_bar: CMat,
    /// `m × N`, column `k` is time `k + 1`.
    pub y: CMat,
}

pub fn parse_snapshots(text: &str) -> Result<Snapshots> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let expected = ["sensor", "t", "re", "im"];
    if headers.len() != expected.len() || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse(format!("expected header sensor,t,re,im, got {}", headers.iter().collect::<Vec<_>>().join(","))));
    }

    let mut records = Vec::new();
    for row in reader.deserialize() {
        let rec: SnapshotRecord = row?;
        if rec.sensor < 0 || rec.sensor >= MAX_SENSORS as i64 {
            return Err(Error::Parse(format!("sensor index {} out of range", rec.sensor)));
        }
        if !(rec.re.is_finite() && rec.im.is_finite()) {
            return Err(Error::Parse(format!("non-finite sample at sensor {}, t {}", rec.sensor, rec.t)));
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Parse("no snapshot rows".into()));
    }

    let m = records.iter().map(|r| r.sensor).max().unwrap_or(0) as usize + 1;
    let t_min = records.iter().map(|r| r.t).min().unwrap_or(0);
    let t_max = records.iter().map(|r| r.t).max().unwrap_or(0);
    if t_min > 0 {
        return Err(Error::Parse("no noise-only snapshots (t <= 0)".into()));
    }
    let m_noise = t_min.unsigned_abs() as usize + 1;
    let n = t_max.max(0) as usize;
    let expected_rows = m_noise
        .checked_add(n)
        .and_then(|cols| cols.checked_mul(m))
        .ok_or_else(|| Error::Parse("snapshot dimensions overflow".into()))?;
    if records.len() != expected_rows {
        return Err(Error::Parse(format!(
            "expected {expected_rows} rows for m={m}, M={m_noise}, N={n}, got {}",
            records.len()
        )));
    }

    let mut seen = vec![false; expected_rows];
    let mut y_bar = CMat::zeros(m, m_noise);
    let mut y = CMat::zeros(m, n);
    for rec in &records {
        let s = rec.sensor as usize;
        let col = (rec.t - t_min) as usize;
        let slot = s * (m_noise + n) + col;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(Error::Parse(format!("duplicate sample at sensor {s}, t {}", rec.t)));
        }
        let z = c64(rec.re, rec.im);
        if col < m_noise {
            y_bar[(s, col)] = z;
        } else {
            y[(s, col - m_noise)] = z;
        }
    }
    Ok(Snapshots { y_bar, y })
}

pub fn write_snapshots(snap: &Snapshots) -> String {
    let mut out = String::from("sensor,t,re,im\n");
    let m_noise = snap.y_bar.ncols() as i64;
    for s in 0..snap.y_bar.nrows() {
        for (k, z) in snap.y_bar.row(s).iter().enumerate() {
            let _ = writeln!(out, "{s},{},{:e},{:e}", k as i64 - m_noise + 1, z.re, z.im);
        }
        for (k, z) in snap.y.row(s).iter().enumerate() {
            let _ = writeln!(out, "{s},{},{:e},{:e}", k + 1, z.re, z.im);
        }
    }
    out
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PriorsFile {
    List(Vec<PriorConfig>),
    Wrapped { priors: Vec<PriorConfig> },
}

/// Priors as a JSON list of `{"mu_deg", "kappa"}` objects, bare or under a `priors` key.
pub fn parse_priors(text: &str) -> Result<Vec<PriorSpec>> {
    let file: PriorsFile = serde_json::from_str(text)?;
    let list = match file {
        PriorsFile::List(l) | PriorsFile::Wrapped { priors: l } => l,
    };
    if list.is_empty() {
        return Err(Error::InvalidInput("at least one prior is required".into()));
    }
    list.iter().map(PriorConfig::to_prior).collect()
}

/// `row,col,re,im` listing of a complex matrix.
pub fn write_complex_matrix(x: &CMat) -> String {
    let mut out = String::from("row,col,re,im\n");
    for r in 0..x.nrows() {
        for c in 0..x.ncols() {
            let z = x[(r, c)];
            let _ = writeln!(out, "{r},{c},{},{}", format_sig9(z.re), format_sig9(z.im));
        }
    }
    out
}
