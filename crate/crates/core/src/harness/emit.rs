//! CSV, JSON and legacy-VTK writers.
//!
//! Deterministic outputs (`energy.csv`, `convergence.csv`, `stability.csv`,
//! `profile.csv`, `report.json`, VTK snapshots) never contain wall-clock
//! data; per-step timings go to `timing.csv` alone.

use super::config::SCHEMA_VERSION;
use super::run::{EnergySample, Payload, RunRecord, TimingSample};
use crate::mesh::VectorField;
use crate::verify::{ConvergenceReport, StabilityReport};
use crate::{Error, Result};
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Format {
    Csv,
    Json,
    Vtk,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "vtk" => Ok(Format::Vtk),
            other => Err(format!("unknown output format '{other}'")),
        }
    }
}

/// Parses a comma-separated format list such as `csv,json`.
pub fn parse_formats(list: &str) -> std::result::Result<BTreeSet<Format>, String> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

pub fn all_formats() -> BTreeSet<Format> {
    [Format::Csv, Format::Json, Format::Vtk]
        .into_iter()
        .collect()
}

pub fn energy_csv(series: &[EnergySample]) -> String {
    let mut s = String::from("step,t,energy\n");
    for e in series {
        let _ = writeln!(s, "{},{},{}", e.step, e.t, e.energy);
    }
    s
}

pub fn timing_csv(series: &[TimingSample]) -> String {
    let mut s = String::from("step,t,walltime_ms\n");
    for e in series {
        let _ = writeln!(s, "{},{},{}", e.step, e.t, e.walltime_ms);
    }
    s
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from("step,dt,h,steps,error_inf,error_l2,max_unit_deviation\n");
    for p in &report.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            p.step, p.dt, p.h, p.steps, p.error_inf, p.error_l2, p.max_unit_deviation
        );
    }
    s
}

pub fn stability_csv(report: &StabilityReport) -> String {
    let mut s = String::from("h,dt_stable,dt_unstable,dt_threshold\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.h, r.dt_stable, r.dt_unstable, r.dt_threshold
        );
    }
    s
}

/// Legacy-VTK structured points with cell centres as points.
pub fn vtk(m: &VectorField, title: &str) -> String {
    let grid = m.grid();
    let [nx, ny, nz] = grid.cells_per_axis();
    let h = grid.spacing();
    let mut s = String::with_capacity(64 * grid.len());
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    s.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(s, "DIMENSIONS {nx} {ny} {nz}");
    let _ = writeln!(s, "ORIGIN {} {} {}", 0.5 * h[0], 0.5 * h[1], 0.5 * h[2]);
    let _ = writeln!(s, "SPACING {} {} {}", h[0], h[1], h[2]);
    let _ = writeln!(s, "POINT_DATA {}", grid.len());
    s.push_str("VECTORS m double\n");
    for idx in 0..grid.len() {
        let v = m.at(idx);
        let _ = writeln!(s, "{} {} {}", v[0], v[1], v[2]);
    }
    s
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    kind: &'static str,
    config: &'a super::config::ExperimentConfig,
    result: &'a Payload,
}

pub fn report_json(record: &RunRecord) -> String {
    let report = Report {
        schema_version: SCHEMA_VERSION,
        kind: record.config.kind().name(),
        config: &record.config,
        result: &record.payload,
    };
    serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(())
}

/// Writes the requested formats into `dir` (created if missing) and returns
/// the written paths.
pub fn emit(record: &RunRecord, dir: &Path, formats: &BTreeSet<Format>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        match &record.payload {
            Payload::Convergence(r) => {
                write(dir, "convergence.csv", &convergence_csv(r), &mut written)?
            }
            Payload::Stability(r) => write(dir, "stability.csv", &stability_csv(r), &mut written)?,
            Payload::Micromag(m) => {
                let mut s = String::from("x,angle\n");
                for (x, a) in m.profile.x.iter().zip(&m.profile.angle) {
                    let _ = writeln!(s, "{x},{a}");
                }
                write(dir, "profile.csv", &s, &mut written)?;
            }
            Payload::Solve(_) => {}
        }
        if matches!(record.payload, Payload::Micromag(_) | Payload::Solve(_)) {
            write(dir, "energy.csv", &energy_csv(&record.energy), &mut written)?;
            write(dir, "timing.csv", &timing_csv(&record.timing), &mut written)?;
        }
    }
    if formats.contains(&Format::Json) {
        write(dir, "report.json", &report_json(record), &mut written)?;
    }
    if formats.contains(&Format::Vtk) {
        for snap in &record.snapshots {
            let title = format!("m at step {} t {}", snap.step, snap.t);
            write(
                dir,
                &format!("m_{:06}.vtk", snap.step),
                &vtk(&snap.m, &title),
                &mut written,
            )?;
        }
    }
    Ok(written)
}
