//! Built-in validation scenarios and their pass/fail metrics.

use serde::{Deserialize, Serialize};

use crate::costs::CostSpec;
use crate::energies::EnergySpec;
use crate::error::{invalid, Result};
use crate::grid::GridSpec;
use crate::jko::{
    run_evolution_with, EvolutionConfig, InitialCondition, RunOutput, ScheduleSegment, StepRecord,
};
use crate::pd::{Formulation, MomentumScale, PDConfig};
use crate::validation::{
    convergence_order, error_norms, front_position, heat_kernel_value, linear_fit, Barenblatt,
};

pub const PRESET_NAMES: [&str; 9] = [
    "plap-m05-p3",
    "plap-m1-p3",
    "plap-m025-p3",
    "accuracy-dt",
    "rel-heat-limit",
    "tv-limit",
    "rel-two-hump",
    "plap-two-bump-m025",
    "plap-two-bump-m1",
];

/// Largest relative L1 error against an exact solution.
pub const L1_TOL: f64 = 5e-2;
/// Allowed energy increase per step, in units of the solver tolerance.
pub const ENERGY_FACTOR: f64 = 10.0;
/// Largest joint/separate density discrepancy.
pub const AGREEMENT_TOL: f64 = 1e-3;
/// Smallest correlation between the per-step iteration counts of two formulations.
pub const TREND_MIN: f64 = 0.5;
/// Tail mass allowed outside whole-space domains.
pub const TAIL_MASS: f64 = 1e-8;
/// Relaxed tail bound for heavy-tailed profiles.
pub const HEAVY_TAIL_MASS: f64 = 1e-3;

/// What a scenario is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// Relative L1 error of the first run against the self-similar solution.
    Barenblatt { m: f64, p: f64, t0: f64 },
    /// Fitted order of the final-time L1 errors of all runs.
    Order {
        m: f64,
        p: f64,
        t0: f64,
        min: f64,
        max: f64,
    },
    /// Relative L1 error of the first run against the heat kernel.
    HeatKernel { t0: f64 },
    /// Speed of the rightmost `threshold` crossing.
    FrontSpeed { threshold: f64, min: f64, max: f64 },
    /// Final densities and iteration trends of the first two runs.
    Agreement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub runs: Vec<(String, EvolutionConfig)>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Metric {
    fn new(name: impl Into<String>, value: f64, min: Option<f64>, max: Option<f64>) -> Self {
        Metric {
            name: name.into(),
            value,
            min,
            max,
        }
    }

    fn at_most(name: impl Into<String>, value: f64, max: f64) -> Self {
        Self::new(name, value, None, Some(max))
    }

    fn info(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, value, None, None)
    }

    pub fn passed(&self) -> bool {
        !self.value.is_nan()
            && self.min.is_none_or(|m| self.value >= m)
            && self.max.is_none_or(|m| self.value <= m)
    }

    pub fn is_checked(&self) -> bool {
        self.min.is_some() || self.max.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub run: String,
    pub time: f64,
    pub dt: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetReport {
    pub preset: String,
    pub metrics: Vec<Metric>,
    pub errors: Vec<ErrorRow>,
    pub runs: Vec<(String, RunOutput)>,
}

impl PresetReport {
    pub fn passed(&self) -> bool {
        self.metrics.iter().all(Metric::passed)
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// Grid `[-L, L]` with `L` a whole number of cells covering `half_width`.
fn symmetric_grid(half_width: f64, dx: f64) -> Result<GridSpec> {
    let cells = (half_width / dx - 1e-9).ceil().max(1.0);
    GridSpec::with_spacing_1d(-cells * dx, cells * dx, dx)
}

fn uniform(
    grid: GridSpec,
    cost: CostSpec,
    energy: EnergySpec,
    initial: InitialCondition,
    final_time: f64,
    dt: f64,
    pd: PDConfig,
) -> EvolutionConfig {
    EvolutionConfig {
        pd,
        ..EvolutionConfig::uniform(grid, cost, energy, initial, final_time, dt)
    }
}

struct PowerCase {
    m: f64,
    p: f64,
    t0: f64,
    dx: f64,
    dt: f64,
    final_time: f64,
    tail: f64,
    pd: PDConfig,
}

impl PowerCase {
    fn config(&self) -> Result<EvolutionConfig> {
        let b = Barenblatt::from_m_p(self.m, self.p)?;
        let t_end = self.t0 + self.final_time;
        // compact profiles get a few empty cells beyond the support
        let half = match b.support(t_end) {
            Some(r) => r + 4.0 * self.dx,
            None => b.extent(t_end, self.tail)?,
        };
        let mut cfg = uniform(
            symmetric_grid(half, self.dx)?,
            CostSpec::power_from_p(self.p),
            EnergySpec::from_m_p(self.m, self.p)?,
            InitialCondition::Barenblatt {
                m: self.m,
                p: self.p,
                t0: self.t0,
            },
            self.final_time,
            self.dt,
            self.pd,
        );
        cfg.renormalize = true;
        Ok(cfg)
    }

    fn check(&self) -> Check {
        Check::Barenblatt {
            m: self.m,
            p: self.p,
            t0: self.t0,
        }
    }
}

fn pd_with(lambda_cap: f64, max_iter: usize) -> PDConfig {
    PDConfig {
        lambda_cap,
        max_iter,
        ..PDConfig::default()
    }
}

fn m05_case(dt: f64, final_time: f64) -> PowerCase {
    PowerCase {
        m: 0.5,
        p: 3.0,
        t0: 0.01,
        dx: 0.04,
        dt,
        final_time,
        tail: TAIL_MASS,
        pd: pd_with(1.0, 200_000),
    }
}

fn m1_case() -> PowerCase {
    PowerCase {
        m: 1.0,
        p: 3.0,
        t0: 0.001,
        dx: 0.02,
        dt: 5e-4,
        final_time: 0.02,
        tail: TAIL_MASS,
        pd: PDConfig {
            momentum_scale: MomentumScale::Balanced,
            ..pd_with(1.0, 200_000)
        },
    }
}

fn m025_case() -> PowerCase {
    PowerCase {
        m: 0.25,
        p: 3.0,
        t0: 0.01,
        dx: 0.02,
        dt: 0.01,
        final_time: 0.1,
        tail: HEAVY_TAIL_MASS,
        pd: pd_with(1.0, 200_000),
    }
}

fn with_formulation(
    cfg: &EvolutionConfig,
    formulation: Formulation,
    floor: f64,
) -> EvolutionConfig {
    let mut out = cfg.clone();
    out.pd.formulation = formulation;
    out.pd.rho_floor = floor;
    out
}

fn two_bump(m: f64, dx: f64, t0: f64) -> Result<EvolutionConfig> {
    let mut cfg = EvolutionConfig {
        schedule: vec![
            ScheduleSegment {
                until: 0.3,
                dt: 0.01,
            },
            ScheduleSegment {
                until: 0.5,
                dt: 0.05,
            },
        ],
        snapshots: vec![0.0, 0.1, 0.3, 0.5],
        ..uniform(
            GridSpec::with_spacing_1d(-1.0, 2.0, dx)?,
            CostSpec::power_from_p(3.0),
            EnergySpec::from_m_p(m, 3.0)?,
            InitialCondition::TwoBump { m, p: 3.0, t0 },
            0.5,
            0.01,
            pd_with(1.0, 200_000),
        )
    };
    cfg.renormalize = true;
    Ok(cfg)
}

/// The scenario behind a preset name.
pub fn preset(name: &str) -> Result<Preset> {
    let p = match name {
        "plap-m05-p3" => {
            let c = m05_case(0.01, 0.1);
            Preset {
                name: "plap-m05-p3",
                summary: "m = 0.5, p = 3: exponential self-similar profile",
                runs: vec![("joint".into(), c.config()?)],
                checks: vec![c.check()],
            }
        }
        "plap-m1-p3" => {
            let c = m1_case();
            let joint = c.config()?;
            let separate = with_formulation(&joint, Formulation::Separate, 1e-4);
            Preset {
                name: "plap-m1-p3",
                summary:
                    "m = 1, p = 3: compactly supported profile, joint and separate formulations",
                runs: vec![("joint".into(), joint), ("separate".into(), separate)],
                checks: vec![c.check(), Check::Agreement],
            }
        }
        "plap-m025-p3" => {
            let c = m025_case();
            Preset {
                name: "plap-m025-p3",
                summary: "m = 0.25, p = 3: heavy-tailed profile",
                runs: vec![("joint".into(), c.config()?)],
                checks: vec![c.check()],
            }
        }
        "accuracy-dt" => {
            let final_time = 0.08;
            let runs = [0.08, 0.04, 0.02, 0.01]
                .iter()
                .map(|&dt| Ok((format!("dt={dt}"), m05_case(dt, final_time).config()?)))
                .collect::<Result<Vec<_>>>()?;
            Preset {
                name: "accuracy-dt",
                summary: "m = 0.5, p = 3: final-time error against the time step",
                runs,
                checks: vec![Check::Order {
                    m: 0.5,
                    p: 3.0,
                    t0: 0.01,
                    min: 0.8,
                    max: 1.2,
                }],
            }
        }
        "rel-heat-limit" => {
            let t0 = 0.01;
            let mut cfg = uniform(
                symmetric_grid(3.0, 0.04)?,
                CostSpec::Relativistic { alpha: 1.0, k: 1e5 },
                EnergySpec::ENTROPY,
                InitialCondition::Gaussian { t0 },
                0.1,
                0.002,
                pd_with(1.0, 200_000),
            );
            cfg.renormalize = true;
            Preset {
                name: "rel-heat-limit",
                summary: "relativistic cost with large k against the heat kernel",
                runs: vec![("joint".into(), cfg)],
                checks: vec![Check::HeatKernel { t0 }],
            }
        }
        "tv-limit" => {
            let mut cfg = uniform(
                symmetric_grid(1.0, 0.01)?,
                CostSpec::Relativistic { alpha: 1e7, k: 1.0 },
                EnergySpec::ENTROPY,
                InitialCondition::Tanh { t0: 0.001 },
                0.2,
                0.01,
                pd_with(1.0, 200_000),
            );
            cfg.snapshots = (0..=20).map(|i| i as f64 * 0.01).collect();
            Preset {
                name: "tv-limit",
                summary: "relativistic cost with large alpha: fronts move at speed k",
                runs: vec![("joint".into(), cfg)],
                checks: vec![Check::FrontSpeed {
                    threshold: 0.25,
                    min: 0.9,
                    max: 1.1,
                }],
            }
        }
        "rel-two-hump" => {
            let mut joint = uniform(
                symmetric_grid(1.0, 0.02)?,
                CostSpec::Relativistic { alpha: 1.0, k: 1.0 },
                EnergySpec::ENTROPY,
                InitialCondition::RelativisticTwoHump,
                0.2,
                0.01,
                pd_with(1.0, 200_000),
            );
            joint.snapshots = vec![0.0, 0.1, 0.2];
            let separate = with_formulation(&joint, Formulation::Separate, 0.1);
            Preset {
                name: "rel-two-hump",
                summary: "relativistic heat equation, joint and separate formulations",
                runs: vec![("joint".into(), joint), ("separate".into(), separate)],
                checks: vec![Check::Agreement],
            }
        }
        "plap-two-bump-m025" => Preset {
            name: "plap-two-bump-m025",
            summary: "two heavy-tailed bumps merging on a bounded domain",
            runs: vec![("joint".into(), two_bump(0.25, 0.03, 0.01)?)],
            checks: vec![],
        },
        "plap-two-bump-m1" => Preset {
            name: "plap-two-bump-m1",
            summary: "two compactly supported bumps merging on a bounded domain",
            runs: vec![("joint".into(), two_bump(1.0, 0.04, 0.001)?)],
            checks: vec![],
        },
        other => {
            return Err(invalid(
                "preset",
                format!(
                    "unknown preset `{other}`; available: {}",
                    PRESET_NAMES.join(", ")
                ),
            ))
        }
    };
    Ok(p)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return f64::NAN;
    }
    let (a, b) = (&a[..n], &b[..n]);
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 && vb == 0.0 {
        return 1.0;
    }
    cov / (va * vb).sqrt()
}

fn barenblatt_rows(label: &str, out: &RunOutput, m: f64, p: f64, t0: f64) -> Result<Vec<ErrorRow>> {
    let b = Barenblatt::from_m_p(m, p)?;
    let cfg = &out.manifest.config;
    let dt = cfg.schedule[0].dt;
    let mut rows = Vec::new();
    for s in out.snapshots.iter().filter(|s| s.step > 0) {
        let exact = b.sample(&cfg.grid, t0 + s.time);
        let e = error_norms(&cfg.grid, &s.rho, &exact)?;
        rows.push(ErrorRow {
            run: label.to_string(),
            time: s.time,
            dt,
            l1: e.l1,
            l2: e.l2,
            linf: e.linf,
        });
    }
    Ok(rows)
}

/// Errors of every stored snapshot against the self-similar solution, when the
/// run starts from one and the cost and energy belong to the same equation.
pub fn exact_errors(label: &str, out: &RunOutput) -> Result<Vec<ErrorRow>> {
    let cfg = &out.manifest.config;
    match cfg.initial {
        InitialCondition::Barenblatt { m, p, t0 }
            if cfg.cost == CostSpec::power_from_p(p)
                && cfg.energy == EnergySpec::from_m_p(m, p)?
                && cfg.grid.dim() == 1 =>
        {
            barenblatt_rows(label, out, m, p, t0)
        }
        _ => Ok(Vec::new()),
    }
}

/// Runs a preset and evaluates its checks.
pub fn evaluate(
    preset: &Preset,
    mut observe: impl FnMut(&str, &StepRecord),
) -> Result<PresetReport> {
    let mut runs = Vec::new();
    for (label, cfg) in &preset.runs {
        let out = run_evolution_with(cfg, |r| observe(label, r))?;
        runs.push((label.clone(), out));
    }
    let mut metrics = Vec::new();
    let mut errors = Vec::new();

    for (label, out) in &runs {
        let man = &out.manifest;
        let converged = man.steps.iter().filter(|s| s.converged).count();
        metrics.push(Metric::info(
            format!("{label}: converged steps"),
            converged as f64,
        ));
        metrics.push(Metric::info(
            format!("{label}: PD iterations"),
            man.total_iterations() as f64,
        ));
        metrics.push(Metric::at_most(
            format!("{label}: energy increase / tol"),
            man.max_energy_increase() / man.config.pd.tol,
            ENERGY_FACTOR,
        ));
        let excess = man
            .steps
            .iter()
            .filter_map(|s| s.mass_drift_bound.map(|b| s.mass_drift.abs() - b))
            .fold(f64::NEG_INFINITY, f64::max);
        if excess.is_finite() {
            metrics.push(Metric::at_most(
                format!("{label}: mass drift beyond bound"),
                excess,
                0.0,
            ));
        }
    }

    for check in &preset.checks {
        match *check {
            Check::Barenblatt { m, p, t0 } => {
                for (i, (label, out)) in runs.iter().enumerate() {
                    let rows = barenblatt_rows(label, out, m, p, t0)?;
                    if let Some(last) = rows.last() {
                        let name = format!("{label}: relative L1 error at t = {}", last.time);
                        metrics.push(if i == 0 {
                            Metric::at_most(name, last.l1, L1_TOL)
                        } else {
                            Metric::info(name, last.l1)
                        });
                    }
                    errors.extend(rows);
                }
            }
            Check::Order { m, p, t0, min, max } => {
                let mut points = Vec::new();
                for (label, out) in &runs {
                    let rows = barenblatt_rows(label, out, m, p, t0)?;
                    if let Some(last) = rows.last() {
                        points.push((last.dt, last.l1));
                    }
                    errors.extend(rows);
                }
                for (dt, e) in &points {
                    metrics.push(Metric::info(format!("L1 error, dt = {dt}"), *e));
                }
                metrics.push(Metric::new(
                    "fitted order",
                    convergence_order(&points)?,
                    Some(min),
                    Some(max),
                ));
            }
            Check::HeatKernel { t0 } => {
                let (label, out) = &runs[0];
                let grid = &out.manifest.config.grid;
                for s in out.snapshots.iter().filter(|s| s.step > 0) {
                    let exact = grid.sample(|x| heat_kernel_value(t0, s.time, x[0]));
                    let e = error_norms(grid, &s.rho, &exact)?;
                    errors.push(ErrorRow {
                        run: label.clone(),
                        time: s.time,
                        dt: out.manifest.config.schedule[0].dt,
                        l1: e.l1,
                        l2: e.l2,
                        linf: e.linf,
                    });
                }
                if let Some(last) = errors.last() {
                    metrics.push(Metric::at_most(
                        format!("relative L1 error at t = {}", last.time),
                        last.l1,
                        L1_TOL,
                    ));
                }
            }
            Check::FrontSpeed {
                threshold,
                min,
                max,
            } => {
                let (_, out) = &runs[0];
                let grid = &out.manifest.config.grid;
                let points = out
                    .snapshots
                    .iter()
                    .map(|s| Ok((s.time, front_position(grid, &s.rho, threshold)?)))
                    .collect::<Result<Vec<_>>>()?;
                if let (Some(first), Some(last)) = (points.first(), points.last()) {
                    metrics.push(Metric::info("front at start", first.1));
                    metrics.push(Metric::info("front at end", last.1));
                }
                metrics.push(Metric::new(
                    "front speed",
                    linear_fit(&points)?.1,
                    Some(min),
                    Some(max),
                ));
            }
            Check::Agreement => {
                if runs.len() < 2 {
                    return Err(invalid("preset", "agreement needs two runs"));
                }
                let (a, b) = (&runs[0].1, &runs[1].1);
                let diff = a
                    .final_rho
                    .iter()
                    .zip(b.final_rho.iter())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                metrics.push(Metric::at_most(
                    format!("max |{} - {}| at final time", runs[0].0, runs[1].0),
                    diff,
                    AGREEMENT_TOL,
                ));
                let its = |o: &RunOutput| -> Vec<f64> {
                    o.manifest
                        .steps
                        .iter()
                        .map(|s| s.iterations as f64)
                        .collect()
                };
                metrics.push(Metric::new(
                    "iteration-count correlation",
                    correlation(&its(a), &its(b)),
                    Some(TREND_MIN),
                    None,
                ));
            }
        }
    }

    Ok(PresetReport {
        preset: preset.name.to_string(),
        metrics,
        errors,
        runs,
    })
}

/// Looks up and evaluates a preset.
pub fn validate_preset(name: &str, observe: impl FnMut(&str, &StepRecord)) -> Result<PresetReport> {
    evaluate(&preset(name)?, observe)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert_eq!(p.name, name);
            for (_, cfg) in &p.runs {
                cfg.validate().unwrap();
            }
        }
        let err = preset("nope").unwrap_err().to_string();
        assert!(err.contains("plap-m05-p3"));
    }

    #[test]
    fn whole_space_domains_hold_the_mass() {
        let p = preset("plap-m05-p3").unwrap();
        let cfg = &p.runs[0].1;
        let b = Barenblatt::from_m_p(0.5, 3.0).unwrap();
        let half = cfg.grid.upper()[0];
        assert!(b.mass_outside(0.01 + cfg.final_time, half).unwrap() < TAIL_MASS);
        assert_eq!(cfg.grid.lower()[0], -half);
    }

    #[test]
    fn correlation_of_trends() {
        assert!((correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - 1.0).abs() < 1e-2);
        assert!(correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) < 0.0);
    }

    #[test]
    fn metric_bounds() {
        assert!(Metric::at_most("a", 1.0, 1.0).passed());
        assert!(!Metric::at_most("a", f64::NAN, 1.0).passed());
        assert!(!Metric::new("a", 0.5, Some(0.8), Some(1.2)).passed());
        assert!(Metric::info("a", 3.0).passed());
    }
}
