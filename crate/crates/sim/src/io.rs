//! CSV and JSON file formats.
//!
//! Floats are written with nine significant digits so files are stable
//! across runs and platforms.

use std::io::{Read, Write};
use std::path::Path;

use pvcoat_core::nalgebra::Vector3;
use pvcoat_core::{CoveragePlan, HoverSample, PanelCorners, PointCloud};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::harness::LogRow;

pub const LOG_COLUMNS: [&str; 27] = [
    "t", "x", "y", "z", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "p", "q", "r", "est_x", "est_y", "est_z", "sp_x",
    "sp_y", "sp_z", "f0", "f1", "f2", "f3", "mass_true", "mass_est", "valve",
];

pub const PLAN_COLUMNS: [&str; 9] = ["t", "x", "y", "z", "vx", "vy", "vz", "yaw", "valve"];

pub fn fmt(x: f64) -> String {
    format!("{x:.8e}")
}

fn open(path: &Path) -> Result<std::fs::File, SimError> {
    std::fs::File::open(path).map_err(|e| SimError::config(format!("{}: {e}", path.display())))
}

fn parse_f64(field: &str, line: usize, column: &str) -> Result<f64, SimError> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| SimError::config(format!("line {line}: column {column} is not a number: {field:?}")))
}

/// Reads a headed CSV and returns the named numeric columns, in order.
fn read_columns<R: Read>(reader: R, names: &[&str]) -> Result<Vec<Vec<f64>>, SimError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| SimError::config(format!("missing column {n}")))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = idx
            .iter()
            .zip(names)
            .map(|(&j, name)| parse_f64(record.get(j).unwrap_or(""), i + 2, name))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_hover_samples<R: Read>(reader: R) -> Result<Vec<HoverSample>, SimError> {
    Ok(read_columns(reader, &["h_m", "thrust_in_N", "mass_kg"])?
        .into_iter()
        .map(|r| HoverSample { height: r[0], thrust_in: r[1], mass: r[2] })
        .collect())
}

pub fn read_hover_file(path: &Path) -> Result<Vec<HoverSample>, SimError> {
    read_hover_samples(open(path)?)
}

pub fn write_hover_samples<W: Write>(writer: W, samples: &[HoverSample]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["h_m", "thrust_in_N", "mass_kg"])?;
    for s in samples {
        w.write_record([fmt(s.height), fmt(s.thrust_in), fmt(s.mass)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cloud<R: Read>(reader: R) -> Result<PointCloud, SimError> {
    let rows = read_columns(reader, &["x", "y", "z"])?;
    Ok(PointCloud::new(rows.into_iter().map(|r| Vector3::new(r[0], r[1], r[2])).collect()))
}

pub fn read_cloud_file(path: &Path) -> Result<PointCloud, SimError> {
    read_cloud(open(path)?)
}

pub fn write_cloud<W: Write>(writer: W, cloud: &PointCloud) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y", "z"])?;
    for p in &cloud.points {
        w.write_record([fmt(p.x), fmt(p.y), fmt(p.z)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CornersFile {
    corners: [[f64; 3]; 4],
}

pub fn read_corners(text: &str) -> Result<PanelCorners, SimError> {
    let f: CornersFile = serde_json::from_str(text)?;
    if f.corners.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SimError::config("corner coordinates must be finite"));
    }
    Ok(PanelCorners(f.corners.map(Vector3::from)))
}

pub fn read_corners_file(path: &Path) -> Result<PanelCorners, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::config(format!("{}: {e}", path.display())))?;
    read_corners(&text)
}

pub fn corners_json(corners: &PanelCorners) -> String {
    let f = CornersFile { corners: corners.0.map(|c| [c.x, c.y, c.z]) };
    serde_json::to_string_pretty(&f).expect("corners serialize")
}

pub fn write_plan<W: Write>(writer: W, plan: &CoveragePlan) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PLAN_COLUMNS)?;
    for s in &plan.samples {
        let p = s.position;
        let v = s.velocity;
        let valve = if plan.valve_open_at(s.time) { "1" } else { "0" };
        w.write_record([fmt(s.time), fmt(p.x), fmt(p.y), fmt(p.z), fmt(v.x), fmt(v.y), fmt(v.z), fmt(s.yaw), valve.into()])?;
    }
    w.flush()?;
    Ok(())
}

/// Time and position columns of a plan file.
pub fn read_plan<R: Read>(reader: R) -> Result<Vec<(f64, Vector3<f64>)>, SimError> {
    let rows = read_columns(reader, &["t", "x", "y", "z"])?;
    if rows.is_empty() {
        return Err(SimError::config("plan has no rows"));
    }
    if rows.windows(2).any(|w| !(w[1][0] > w[0][0])) {
        return Err(SimError::config("plan times must be strictly increasing"));
    }
    Ok(rows.into_iter().map(|r| (r[0], Vector3::new(r[1], r[2], r[3]))).collect())
}

pub fn write_log<W: Write>(writer: W, rows: &[LogRow]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LOG_COLUMNS)?;
    for r in rows {
        let s = &r.state;
        let q = s.attitude.quaternion();
        let mut fields = Vec::with_capacity(LOG_COLUMNS.len());
        fields.push(fmt(r.t));
        fields.extend(s.position.iter().chain(s.velocity.iter()).map(|v| fmt(*v)));
        fields.extend([q.w, q.i, q.j, q.k].map(fmt));
        fields.extend(s.body_rates.iter().chain(r.estimated_position.iter()).chain(r.setpoint.iter()).map(|v| fmt(*v)));
        fields.extend(r.rotor_forces.map(fmt));
        fields.push(fmt(r.mass_true));
        fields.push(fmt(r.mass_estimated));
        fields.push(if r.valve_open { "1" } else { "0" }.into());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Time and true position columns of a log file.
pub fn read_log_positions<R: Read>(reader: R) -> Result<Vec<(f64, Vector3<f64>)>, SimError> {
    let rows = read_columns(reader, &["t", "x", "y", "z"])?;
    Ok(rows.into_iter().map(|r| (r[0], Vector3::new(r[1], r[2], r[3]))).collect())
}

/// Linear interpolation of `(t, p)` samples, held at the ends.
pub fn interpolate(samples: &[(f64, Vector3<f64>)], t: f64) -> Vector3<f64> {
    let i = samples.partition_point(|(ts, _)| *ts <= t);
    if i == 0 {
        return samples[0].1;
    }
    if i == samples.len() {
        return samples[samples.len() - 1].1;
    }
    let (t0, p0) = samples[i - 1];
    let (t1, p1) = samples[i];
    p0 + (p1 - p0) * ((t - t0) / (t1 - t0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt(0.25), "2.50000000e-1");
        assert_eq!(fmt(-1234.56789012), "-1.23456789e3");
    }

    #[test]
    fn hover_round_trip() {
        let samples = vec![HoverSample { height: 0.3, thrust_in: 14.2, mass: 1.56 }];
        let mut buf = Vec::new();
        write_hover_samples(&mut buf, &samples).unwrap();
        assert_eq!(read_hover_samples(buf.as_slice()).unwrap(), samples);
    }

    #[test]
    fn missing_column_is_a_config_error() {
        let err = read_hover_samples("h_m,thrust\n0.3,14\n".as_bytes()).unwrap_err();
        assert!(matches!(err, SimError::Config(_)));
    }

    #[test]
    fn corners_round_trip() {
        let c = PanelCorners([Vector3::new(0.0, 0.0, 0.1), Vector3::x(), Vector3::new(1.0, 2.0, 0.0), Vector3::y()]);
        assert_eq!(read_corners(&corners_json(&c)).unwrap(), c);
        assert!(read_corners("{\"corners\": [[0,0,0]]}").is_err());
    }

    #[test]
    fn interpolation_holds_ends() {
        let s = vec![(0.0, Vector3::zeros()), (1.0, Vector3::x())];
        assert_eq!(interpolate(&s, -1.0), Vector3::zeros());
        assert_eq!(interpolate(&s, 0.25), Vector3::x() * 0.25);
        assert_eq!(interpolate(&s, 3.0), Vector3::x());
    }
}
