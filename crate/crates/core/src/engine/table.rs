//! CSV tables of rate points and audit cells.
//!
//! Columns: `distance_km, rate`, the settings (`mu, omega`, `t` or `tau`),
//! then `p_acc, gain, qber, p_multi, e1`. Floats are written in Rust's
//! shortest round-trip form, so parsing a table gives back the same values.

use std::io::{Read, Write};

use super::{AuditReport, RatePoint, Settings};
use crate::error::{Error, Result};
use crate::sps::PhotonStats;

const BREAKDOWN: [&str; 5] = ["p_acc", "gain", "qber", "p_multi", "e1"];

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e6)`.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e6).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn io_error(e: impl std::fmt::Display) -> Error {
    Error::Config {
        field: "csv".into(),
        message: e.to_string(),
    }
}

/// Header for points carrying `settings`.
pub fn header(settings: &Settings) -> Vec<&'static str> {
    let mut h = vec!["distance_km", "rate"];
    h.extend_from_slice(settings.names());
    h.extend_from_slice(&BREAKDOWN);
    h
}

/// Writes `points` with a header row. All points must carry the same kind
/// of settings; an empty list writes nothing.
pub fn write_points<W: Write>(points: &[RatePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = points.first() else {
        return Ok(());
    };
    let names = first.settings.names();
    w.write_record(header(&first.settings)).map_err(io_error)?;
    for p in points {
        if p.settings.names() != names {
            return Err(io_error("rows with different setting columns"));
        }
        let mut row = vec![p.distance_km, p.rate];
        row.extend(p.settings.values());
        row.extend([p.p_acc, p.gain, p.qber, p.p_multi, p.e1]);
        w.write_record(row.iter().map(|&v| format_f64(v))).map_err(io_error)?;
    }
    w.flush().map_err(io_error)
}

/// Parses a table written by [`write_points`]. The unclamped objective is
/// not stored and comes back equal to the rate.
pub fn read_points<R: Read>(input: R) -> Result<Vec<RatePoint>> {
    let mut r = csv::Reader::from_reader(input);
    let head: Vec<String> = r.headers().map_err(io_error)?.iter().map(str::to_string).collect();
    let settings_names: Vec<&str> = head
        .iter()
        .skip(2)
        .take(head.len().saturating_sub(7))
        .map(String::as_str)
        .collect();
    let make: fn(&[f64]) -> Settings = match settings_names.as_slice() {
        ["mu", "omega"] => |v| Settings::Coherent { mu: v[0], omega: v[1] },
        ["t"] => |v| Settings::Tap { t: v[0] },
        ["tau"] => |v| Settings::Attenuator { tau: v[0] },
        _ => return Err(io_error(format!("unrecognized header {head:?}"))),
    };
    if head[..2] != ["distance_km", "rate"] || head[head.len() - 5..] != BREAKDOWN {
        return Err(io_error(format!("unrecognized header {head:?}")));
    }
    let k = settings_names.len();
    let mut points = Vec::new();
    for record in r.records() {
        let record = record.map_err(io_error)?;
        let v: Vec<f64> = record
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| io_error(format!("`{s}`: {e}"))))
            .collect::<Result<_>>()?;
        if v.len() != head.len() {
            return Err(io_error("row length differs from header"));
        }
        points.push(RatePoint {
            distance_km: v[0],
            rate: v[1],
            settings: make(&v[2..2 + k]),
            p_acc: v[2 + k],
            gain: v[3 + k],
            qber: v[4 + k],
            p_multi: v[5 + k],
            e1: v[6 + k],
            objective: v[1],
        });
    }
    Ok(points)
}

/// One row per audit cell; failures leave the deviation columns empty and
/// fill `error`.
pub fn write_audit<W: Write>(report: &AuditReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "probs",
        "t",
        "eta_a",
        "eps_a",
        "eta_sys",
        "eps_b",
        "dev_n",
        "dev_gain",
        "dev_qber",
        "dev_p_multi",
        "pass",
        "error",
    ])
    .map_err(io_error)?;
    for c in &report.cells {
        let probs = c.probs.iter().map(|&p| format_f64(p)).collect::<Vec<_>>().join(" ");
        let mut row = vec![probs];
        row.extend([c.t, c.eta_a, c.eps_a, c.eta_sys, c.eps_b].map(format_f64));
        match &c.outcome {
            Ok(d) => {
                row.extend(d.map(format_f64));
                row.push((c.max_deviation() <= report.threshold).to_string());
                row.push(String::new());
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 4));
                row.push("false".into());
                row.push(e.clone());
            }
        }
        w.write_record(&row).map_err(io_error)?;
    }
    w.flush().map_err(io_error)
}

pub fn write_stats<W: Write>(stats: &PhotonStats, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n_bar", "g2"]).map_err(io_error)?;
    w.write_record([format_f64(stats.n_bar), format_f64(stats.g2)])
        .map_err(io_error)?;
    w.flush().map_err(io_error)
}

/// Single-row table for a cutoff distance.
pub fn write_cutoff<W: Write>(scenario: &str, km: f64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "cutoff_km"]).map_err(io_error)?;
    w.write_record([scenario.to_string(), format_f64(km)])
        .map_err(io_error)?;
    w.flush().map_err(io_error)
}
