//! Snapshot CSV, manifest JSON and validation reports.

use std::fs;
use std::path::Path;

use gradflow::jko::{RunOutput, Snapshot};
use gradflow::presets::{ErrorRow, PresetReport};
use gradflow::GridSpec;
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_ECHO: &str = "config.toml";
pub const ERRORS: &str = "errors.csv";
pub const REPORT: &str = "report.json";
pub const METRICS: &str = "metrics.csv";

pub fn snapshot_name(step: usize) -> String {
    format!("rho_{step:06}.csv")
}

/// `precision` significant digits in scientific notation.
pub fn format_value(v: f64, precision: usize) -> String {
    format!("{:.*e}", precision.saturating_sub(1), v)
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::failure(format!("csv error: {e}"))
}

fn json_error(e: serde_json::Error) -> CliError {
    CliError::failure(format!("json error: {e}"))
}

pub fn snapshot_header(dim: usize) -> Vec<String> {
    let axes = |base: &str| -> Vec<String> {
        if dim == 1 {
            vec![base.to_string()]
        } else {
            (1..=dim).map(|l| format!("{base}{l}")).collect()
        }
    };
    let mut header = axes("x");
    header.push("rho".into());
    header.extend(axes("m"));
    header
}

pub fn write_snapshot(
    path: &Path,
    grid: &GridSpec,
    snap: &Snapshot,
    precision: usize,
) -> Result<(), CliError> {
    let d = grid.dim();
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(snapshot_header(d)).map_err(csv_error)?;
    let mut record = Vec::with_capacity(2 * d + 1);
    for i in 0..grid.num_nodes() {
        record.clear();
        for l in 0..d {
            record.push(format_value(grid.coordinate(i, l), precision));
        }
        record.push(format_value(snap.rho[i], precision));
        for l in 0..d {
            record.push(format_value(snap.mom.axis(l)[i], precision));
        }
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns of a snapshot file: coordinates, density and momentum per node.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotTable, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let header = r
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let row = rec
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| CliError::failure(format!("{}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(SnapshotTable { header, rows })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(json_error)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn write_errors(path: &Path, rows: &[ErrorRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    if rows.is_empty() {
        w.write_record(["run", "time", "dt", "l1", "l2", "linf"])
            .map_err(csv_error)?;
    }
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_errors(path: &Path) -> Result<Vec<ErrorRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn write_snapshots(dir: &Path, out: &RunOutput, precision: usize) -> Result<(), CliError> {
    let grid = &out.manifest.config.grid;
    for snap in &out.snapshots {
        write_snapshot(&dir.join(snapshot_name(snap.step)), grid, snap, precision)?;
    }
    Ok(())
}

/// Snapshots, manifest, config echo and (when an exact solution exists) errors.
pub fn write_run(
    dir: &Path,
    cfg: &RunConfig,
    out: &RunOutput,
    errors: &[ErrorRow],
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    write_snapshots(dir, out, cfg.output.precision)?;
    write_json(&dir.join(MANIFEST), &out.manifest)?;
    fs::write(dir.join(CONFIG_ECHO), cfg.to_toml())?;
    if !errors.is_empty() {
        write_errors(&dir.join(ERRORS), errors)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportJson<'a> {
    preset: &'a str,
    passed: bool,
    metrics: Vec<MetricJson<'a>>,
}

#[derive(Serialize)]
struct MetricJson<'a> {
    name: &'a str,
    value: f64,
    min: Option<f64>,
    max: Option<f64>,
    checked: bool,
    passed: bool,
}

/// `report.json`, `metrics.csv`, `errors.csv` and one directory per run.
pub fn write_validation(dir: &Path, report: &PresetReport) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let metrics: Vec<MetricJson> = report
        .metrics
        .iter()
        .map(|m| MetricJson {
            name: &m.name,
            value: m.value,
            min: m.min,
            max: m.max,
            checked: m.is_checked(),
            passed: m.passed(),
        })
        .collect();
    let mut w = csv::Writer::from_path(dir.join(METRICS)).map_err(csv_error)?;
    for m in &metrics {
        w.serialize(m).map_err(csv_error)?;
    }
    w.flush()?;
    write_json(
        &dir.join(REPORT),
        &ReportJson {
            preset: &report.preset,
            passed: report.passed(),
            metrics,
        },
    )?;
    write_errors(&dir.join(ERRORS), &report.errors)?;
    for (label, out) in &report.runs {
        let run_dir = dir.join("runs").join(sanitize(label));
        fs::create_dir_all(&run_dir)?;
        write_json(&run_dir.join(MANIFEST), &out.manifest)?;
        write_snapshots(&run_dir, out, 17)?;
    }
    Ok(())
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
