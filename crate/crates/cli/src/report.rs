//! Text summaries of run and validation output.

use std::path::Path;

use gradflow::jko::RunManifest;
use gradflow::presets::{ErrorRow, Metric};
use gradflow::validation::convergence_order;
use gradflow::{CostSpec, EnergySpec};

use crate::output::{read_errors, ERRORS, MANIFEST, REPORT};
use crate::CliError;

pub fn cost_label(c: &CostSpec) -> String {
    match *c {
        CostSpec::Power { q } => format!("power(q={q})"),
        CostSpec::Relativistic { alpha, k } => format!("relativistic(alpha={alpha}, k={k})"),
        CostSpec::ConeLimit { k } => format!("cone_limit(k={k})"),
        CostSpec::QuadraticLimit { alpha } => format!("quadratic_limit(alpha={alpha})"),
    }
}

pub fn energy_label(e: &EnergySpec) -> String {
    match *e {
        EnergySpec::Entropy { kappa } => format!("entropy(kappa={kappa})"),
        EnergySpec::Power { eta, kappa } => format!("power(eta={eta}, kappa={kappa})"),
        EnergySpec::Indicator => "indicator".into(),
    }
}

fn bounds(min: Option<f64>, max: Option<f64>) -> String {
    match (min, max) {
        (Some(a), Some(b)) => format!("in [{a}, {b}]"),
        (Some(a), None) => format!(">= {a}"),
        (None, Some(b)) => format!("<= {b}"),
        (None, None) => String::new(),
    }
}

pub fn metric_line(m: &Metric) -> String {
    let status = if !m.is_checked() {
        "    "
    } else if m.passed() {
        "PASS"
    } else {
        "FAIL"
    };
    format!(
        "{status} {:<48} {:>14.6e} {}",
        m.name,
        m.value,
        bounds(m.min, m.max)
    )
    .trim_end()
    .to_string()
}

fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::failure(format!("{}: {e}", path.display())))
}

fn print_manifest(label: &str, man: &RunManifest) {
    let converged = man.steps.iter().filter(|s| s.converged).count();
    let energies = man.energies();
    println!("{label}");
    println!(
        "  steps {} ({} converged), PD iterations {}, wall time {:.2} s",
        man.steps.len(),
        converged,
        man.total_iterations(),
        man.wall_time_s
    );
    if let (Some(first), Some(last)) = (energies.first(), energies.last()) {
        println!(
            "  energy {first:.10e} -> {last:.10e}, largest increase {:.3e}",
            man.max_energy_increase()
        );
    }
    let (drift, bound) = man.total_mass_drift();
    match bound {
        Some(b) => println!(
            "  mass {:.12}, total drift {drift:.3e} (bound {b:.3e})",
            man.initial_mass
        ),
        None => println!("  mass {:.12}, total drift {drift:.3e}", man.initial_mass),
    }
    if man.steps.iter().any(|s| s.cold_iterations.is_some()) {
        let warm: usize = man.steps.iter().map(|s| s.iterations).sum();
        let cold: usize = man.steps.iter().filter_map(|s| s.cold_iterations).sum();
        println!("  warm iterations {warm}, cold iterations {cold}");
    }
    for note in &man.notes {
        println!("  note: {note}");
    }
}

fn print_errors(rows: &[ErrorRow]) {
    if rows.is_empty() {
        return;
    }
    println!(
        "{:<16} {:>10} {:>10} {:>12} {:>12} {:>12}",
        "run", "time", "dt", "L1", "L2", "Linf"
    );
    for r in rows {
        println!(
            "{:<16} {:>10.4} {:>10.4} {:>12.4e} {:>12.4e} {:>12.4e}",
            r.run, r.time, r.dt, r.l1, r.l2, r.linf
        );
    }
    // final-time error of each distinct step size
    let mut last: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        match last.iter_mut().find(|(dt, _)| *dt == r.dt) {
            Some(entry) => entry.1 = r.l1,
            None => last.push((r.dt, r.l1)),
        }
    }
    if last.len() >= 3 {
        if let Ok(order) = convergence_order(&last) {
            println!("fitted order in dt: {order:.4}");
        }
    }
}

/// Prints what `run` or `validate` left in `dir`.
pub fn cmd_report(dir: &Path) -> Result<(), CliError> {
    let report = dir.join(REPORT);
    let manifest = dir.join(MANIFEST);
    let errors = dir.join(ERRORS);
    if report.exists() {
        let text = std::fs::read_to_string(&report)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::failure(format!("{}: {e}", report.display())))?;
        let passed = value["passed"].as_bool().unwrap_or(false);
        println!(
            "preset {}: {}",
            value["preset"].as_str().unwrap_or("?"),
            if passed { "PASS" } else { "FAIL" }
        );
        let metrics: Vec<Metric> = serde_json::from_value(value["metrics"].clone())
            .map_err(|e| CliError::failure(format!("{}: {e}", report.display())))?;
        for m in &metrics {
            println!("{}", metric_line(m));
        }
        let runs = dir.join("runs");
        if runs.is_dir() {
            let mut entries: Vec<_> = std::fs::read_dir(&runs)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.join(MANIFEST).exists())
                .collect();
            entries.sort();
            for run in entries {
                let label = run.file_name().map(|s| s.to_string_lossy().into_owned());
                print_manifest(
                    &label.unwrap_or_default(),
                    &read_manifest(&run.join(MANIFEST))?,
                );
            }
        }
    } else if manifest.exists() {
        print_manifest(&dir.display().to_string(), &read_manifest(&manifest)?);
    } else {
        return Err(CliError::usage(format!(
            "no {REPORT} or {MANIFEST} in {}",
            dir.display()
        )));
    }
    if errors.exists() {
        print_errors(&read_errors(&errors)?);
    }
    Ok(())
}
