//! The subcommands behind the binary.

use std::path::{Path, PathBuf};

use gradflow::jko::run_evolution_with;
use gradflow::oracle::{oracle_suite, ORACLE_TOL};
use gradflow::presets::{exact_errors, preset, validate_preset};
use gradflow::Exec;

use crate::config::RunConfig;
use crate::{output, report, CliError};

pub fn cmd_run(path: &Path, out: Option<PathBuf>, quiet: bool) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::usage(format!(
            "config file not found: {}",
            path.display()
        )));
    }
    let cfg = RunConfig::load(path)?;
    let evo = cfg.evolution()?;
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let result = run_evolution_with(&evo, |s| {
        if !quiet {
            println!(
                "step {:>5}  t = {:.6}  iterations {:>7}  energy {:.10e}{}",
                s.step,
                s.time,
                s.iterations,
                s.energy,
                if s.converged { "" } else { "  (not converged)" }
            );
        }
    })
    .map_err(|e| CliError::failure(format!("run failed: {e}")))?;
    let errors = exact_errors("run", &result)
        .map_err(|e| CliError::failure(format!("error evaluation failed: {e}")))?;
    output::write_run(&dir, &cfg, &result, &errors)?;
    println!(
        "{} steps, {} PD iterations, output in {}",
        result.manifest.steps.len(),
        result.manifest.total_iterations(),
        dir.display()
    );
    if !result.manifest.all_converged() {
        eprintln!("warning: some steps reached max_iter before the stopping rule held");
    }
    Ok(())
}

pub fn cmd_validate(name: &str, out: Option<PathBuf>, quiet: bool) -> Result<(), CliError> {
    if let Err(e) = preset(name) {
        return Err(CliError::usage(e.to_string()));
    }
    let report = validate_preset(name, |label, s| {
        if !quiet {
            println!(
                "{label}: step {:>5}  t = {:.6}  iterations {:>7}",
                s.step, s.time, s.iterations
            );
        }
    })
    .map_err(|e| CliError::failure(format!("preset {name} failed: {e}")))?;
    let dir = out.unwrap_or_else(|| PathBuf::from("validation").join(name));
    output::write_validation(&dir, &report)?;
    for m in &report.metrics {
        println!("{}", report::metric_line(m));
    }
    println!("report written to {}", dir.display());
    if report.passed() {
        println!("{name}: PASS");
        Ok(())
    } else {
        Err(CliError::failure(format!("{name}: FAIL")))
    }
}

pub fn cmd_prox_check(samples: usize, seed: u64) -> Result<(), CliError> {
    if samples == 0 {
        println!("no samples requested");
        return Ok(());
    }
    let rows = oracle_suite(samples, seed, Exec::Parallel)
        .map_err(|e| CliError::failure(format!("prox evaluation failed: {e}")))?;
    let mut failed = 0;
    for r in &rows {
        println!(
            "{:<32} {:<26} max deviation {:.3e}  {}",
            report::cost_label(&r.cost),
            report::energy_label(&r.energy),
            r.max_deviation,
            if r.passed() { "ok" } else { "FAIL" }
        );
        failed += usize::from(!r.passed());
    }
    println!(
        "{} pairs x {samples} samples, seed {seed}, tolerance {ORACLE_TOL:e}",
        rows.len()
    );
    if failed > 0 {
        return Err(CliError::failure(format!(
            "{failed} pairs exceed the tolerance"
        )));
    }
    Ok(())
}
