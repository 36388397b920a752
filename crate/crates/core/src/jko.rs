//! Outer time loop: repeated implicit steps with warm starts, per-step
//! diagnostics and snapshots.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::costs::CostSpec;
use crate::energies::{discrete_energy, EnergySpec};
use crate::error::{invalid, Error, Result};
use crate::grid::{norm2, DensityField, GridSpec, MomentumField};
use crate::pd::{JkoStepSolver, PDConfig, PdState};
use crate::validation::{heat_kernel_value, Barenblatt, BarenblattParams};

/// Tolerance for matching snapshot and segment times to the step grid.
pub const TIME_TOL: f64 = 1e-9;

/// Built-in initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Self-similar solution of the doubly nonlinear equation at time `t0`.
    Barenblatt {
        m: f64,
        p: f64,
        t0: f64,
    },
    /// Heat kernel at time `t0`.
    Gaussian {
        t0: f64,
    },
    /// `0.499 (tanh(30 (x + 0.2 + t0)) - tanh(30 (x - 0.2 - t0))) + 1e-5`.
    Tanh {
        t0: f64,
    },
    /// `chi_[-1,1] / 4 + 3 / (2 sqrt 2) sqrt(1/2 - |x|) chi_[-1/2,1/2]`.
    RelativisticTwoHump,
    /// Equal-weight sum of self-similar profiles at time `t0` centred at 0 and 1.
    TwoBump {
        m: f64,
        p: f64,
        t0: f64,
    },
    Constant {
        value: f64,
    },
}

impl InitialCondition {
    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::Barenblatt { .. } => "barenblatt",
            InitialCondition::Gaussian { .. } => "gaussian",
            InitialCondition::Tanh { .. } => "tanh",
            InitialCondition::RelativisticTwoHump => "relativistic_two_hump",
            InitialCondition::TwoBump { .. } => "two_bump",
            InitialCondition::Constant { .. } => "constant",
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive, got {v}")))
    }
}

fn one_dimensional(grid: &GridSpec, family: &str) -> Result<()> {
    if grid.dim() == 1 {
        Ok(())
    } else {
        Err(invalid(
            "initial",
            format!("`{family}` is defined in one dimension only"),
        ))
    }
}

/// Nodal values of the initial datum, optionally rescaled to unit discrete mass.
pub fn initial_condition(
    desc: &InitialCondition,
    grid: &GridSpec,
    renormalize: bool,
) -> Result<DensityField> {
    let rho = match *desc {
        InitialCondition::Barenblatt { m, p, t0 } => {
            positive("t0", t0)?;
            let b = Barenblatt::new(BarenblattParams::new(m, p, grid.dim())?)?;
            b.sample(grid, t0)
        }
        InitialCondition::Gaussian { t0 } => {
            positive("t0", t0)?;
            grid.sample(|x| {
                x.iter()
                    .map(|xi| heat_kernel_value(t0, 0.0, *xi))
                    .product::<f64>()
            })
        }
        InitialCondition::Tanh { t0 } => {
            one_dimensional(grid, desc.name())?;
            if !(t0 >= 0.0 && t0.is_finite()) {
                return Err(invalid("t0", format!("must be nonnegative, got {t0}")));
            }
            grid.sample(|x| {
                let x = x[0];
                0.499 * ((30.0 * (x + 0.2 + t0)).tanh() - (30.0 * (x - 0.2 - t0)).tanh()) + 1e-5
            })
        }
        InitialCondition::RelativisticTwoHump => {
            one_dimensional(grid, desc.name())?;
            let c = 3.0 / (2.0 * std::f64::consts::SQRT_2);
            grid.sample(|x| {
                let a = x[0].abs();
                let base = if a <= 1.0 { 0.25 } else { 0.0 };
                let hump = if a <= 0.5 { c * (0.5 - a).sqrt() } else { 0.0 };
                base + hump
            })
        }
        InitialCondition::TwoBump { m, p, t0 } => {
            one_dimensional(grid, desc.name())?;
            positive("t0", t0)?;
            let b = Barenblatt::new(BarenblattParams::new(m, p, 1)?)?;
            grid.sample(|x| 0.5 * (b.value(t0, &[x[0]]) + b.value(t0, &[x[0] - 1.0])))
        }
        InitialCondition::Constant { value } => {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(invalid(
                    "value",
                    format!("must be nonnegative, got {value}"),
                ));
            }
            DensityField::constant(grid.num_nodes(), value)
        }
    };
    if let Some((node, &value)) = rho
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
    {
        return Err(Error::NegativeDensity { node, value });
    }
    let mass = rho.mass(grid);
    if !(mass > 0.0) {
        return Err(Error::Degenerate("initial density has no mass".into()));
    }
    if renormalize {
        Ok(DensityField(rho.0.iter().map(|v| v / mass).collect()))
    } else {
        Ok(rho)
    }
}

/// `dt` is used on `(previous until, until]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSegment {
    pub until: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub grid: GridSpec,
    pub cost: CostSpec,
    pub energy: EnergySpec,
    pub initial: InitialCondition,
    pub renormalize: bool,
    pub final_time: f64,
    pub schedule: Vec<ScheduleSegment>,
    /// Times at which the state is kept; each must be a step time (or 0).
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub pd: PDConfig,
    /// Ball radius of the relaxed constraint; `None` picks it per step.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Also solve every step from a cold start and record its iteration count.
    #[serde(default)]
    pub compare_cold: bool,
}

impl EvolutionConfig {
    /// A run with one constant time step.
    pub fn uniform(
        grid: GridSpec,
        cost: CostSpec,
        energy: EnergySpec,
        initial: InitialCondition,
        final_time: f64,
        dt: f64,
    ) -> Self {
        EvolutionConfig {
            grid,
            cost,
            energy,
            initial,
            renormalize: false,
            final_time,
            schedule: vec![ScheduleSegment {
                until: final_time,
                dt,
            }],
            snapshots: vec![0.0, final_time],
            pd: PDConfig::default(),
            delta: None,
            compare_cold: false,
        }
    }

    /// End time and step size of every step, in order.
    pub fn step_plan(&self) -> Result<Vec<(f64, f64)>> {
        let t_final = self.final_time;
        positive("final_time", t_final)?;
        if self.schedule.is_empty() {
            return Err(invalid("schedule", "needs at least one segment"));
        }
        let mut plan = Vec::new();
        let mut start = 0.0;
        for seg in &self.schedule {
            positive("dt", seg.dt)?;
            if !(seg.until > start) {
                return Err(invalid(
                    "schedule",
                    format!(
                        "segment ends must increase, got {} after {start}",
                        seg.until
                    ),
                ));
            }
            if start >= t_final - TIME_TOL {
                break;
            }
            let end = seg.until.min(t_final);
            let span = end - start;
            let n = (span / seg.dt).round();
            if n < 1.0 || (n * seg.dt - span).abs() > TIME_TOL * end.max(1.0) {
                return Err(invalid(
                    "schedule",
                    format!(
                        "[{start}, {end}] is not a whole number of steps of {}",
                        seg.dt
                    ),
                ));
            }
            let n = n as usize;
            for j in 1..=n {
                let t = if j == n {
                    end
                } else {
                    start + j as f64 * seg.dt
                };
                plan.push((t, seg.dt));
            }
            start = end;
        }
        if start < t_final - TIME_TOL {
            return Err(invalid(
                "schedule",
                format!("covers [0, {start}] but the run ends at {t_final}"),
            ));
        }
        Ok(plan)
    }

    /// Step index (0 = initial state) of every snapshot time.
    pub fn snapshot_steps(&self, plan: &[(f64, f64)]) -> Result<Vec<usize>> {
        self.snapshots
            .iter()
            .map(|&s| {
                if s.abs() <= TIME_TOL {
                    return Ok(0);
                }
                plan.iter()
                    .position(|(t, _)| (t - s).abs() <= TIME_TOL * t.max(1.0))
                    .map(|k| k + 1)
                    .ok_or_else(|| invalid("snapshots", format!("t = {s} is not a step time")))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.cost.validate()?;
        self.energy.validate()?;
        self.pd.validate()?;
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(invalid("delta", format!("must be nonnegative, got {d}")));
            }
        }
        let plan = self.step_plan()?;
        self.snapshot_steps(&plan)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub rho: DensityField,
    pub mom: MomentumField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub iterations: usize,
    /// Iterations from a cold start, when the comparison is on.
    pub cold_iterations: Option<usize>,
    pub converged: bool,
    pub primal_change: f64,
    /// `|A u - b| - delta`.
    pub feasibility: f64,
    pub objective: f64,
    /// Discrete energy of the new density.
    pub energy: f64,
    /// Trapezoid mass of the new density.
    pub mass: f64,
    pub mass_drift: f64,
    /// `|g| * threshold` with `g` the mass functional of the constraint and
    /// `threshold` the residual norm accepted by the stopping rule.
    pub mass_drift_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub steps: Vec<StepRecord>,
    pub initial_energy: f64,
    pub initial_mass: f64,
    pub wall_time_s: f64,
    pub config: EvolutionConfig,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn all_converged(&self) -> bool {
        self.steps.iter().all(|s| s.converged)
    }

    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }

    pub fn energies(&self) -> Vec<f64> {
        std::iter::once(self.initial_energy)
            .chain(self.steps.iter().map(|s| s.energy))
            .collect()
    }

    /// Largest step-to-step energy increase, relative to `max(1, |E|)`.
    pub fn max_energy_increase(&self) -> f64 {
        self.energies()
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(1.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Energy non-increasing within `factor * tol` and every mass drift within its bound.
    pub fn entropy_and_mass_ok(&self, factor: f64) -> bool {
        let tol = self.config.pd.tol;
        self.max_energy_increase() <= factor * tol
            && self.steps.iter().all(|s| match s.mass_drift_bound {
                Some(b) => s.mass_drift.abs() <= b,
                None => true,
            })
    }

    /// Final mass minus initial mass against the sum of per-step bounds.
    pub fn total_mass_drift(&self) -> (f64, Option<f64>) {
        let last = self.steps.last().map_or(self.initial_mass, |s| s.mass);
        let bound = self
            .steps
            .iter()
            .map(|s| s.mass_drift_bound)
            .sum::<Option<f64>>();
        (last - self.initial_mass, bound)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub manifest: RunManifest,
    pub final_rho: DensityField,
    pub final_mom: MomentumField,
}

/// Runs the configured evolution.
pub fn run_evolution(cfg: &EvolutionConfig) -> Result<RunOutput> {
    run_evolution_with(cfg, |_| {})
}

/// Runs the configured evolution and hands every step record to `observe`.
pub fn run_evolution_with(
    cfg: &EvolutionConfig,
    mut observe: impl FnMut(&StepRecord),
) -> Result<RunOutput> {
    let start_clock = Instant::now();
    cfg.validate()?;
    let plan = cfg.step_plan()?;
    let snap_steps = cfg.snapshot_steps(&plan)?;
    let grid = &cfg.grid;
    let n = grid.num_nodes();
    let rho0 = initial_condition(&cfg.initial, grid, cfg.renormalize)?;
    let initial_energy = discrete_energy(grid, &cfg.energy, &rho0)?;
    let initial_mass = rho0.mass(grid);

    let mut snapshots = Vec::new();
    let mut rho = rho0;
    let mut mom = MomentumField::zeros(grid.dim(), n);
    let keep = |k: usize,
                snaps: &mut Vec<Snapshot>,
                time: f64,
                rho: &DensityField,
                mom: &MomentumField| {
        if snap_steps.contains(&k) {
            snaps.push(Snapshot {
                step: k,
                time,
                rho: rho.clone(),
                mom: mom.clone(),
            });
        }
    };
    keep(0, &mut snapshots, 0.0, &rho, &mom);

    let mut steps = Vec::with_capacity(plan.len());
    let mut prev_state: Option<PdState> = None;
    let mut mass = initial_mass;
    for (k, &(time, dt)) in plan.iter().enumerate() {
        let step = k + 1;
        let annotate = |e: Error| Error::StepFailed {
            step,
            time,
            source: Box::new(e),
        };
        let solver = JkoStepSolver::new(grid, cfg.cost, cfg.energy, dt, &rho, cfg.delta, cfg.pd)
            .map_err(annotate)?;
        let init = match (&prev_state, cfg.pd.warm_start) {
            (Some(p), true) => solver.warm_state(p).map_err(annotate)?,
            _ => solver.cold_state(),
        };
        let sol = solver.solve_from(init).map_err(annotate)?;
        let cold_iterations = if cfg.compare_cold {
            Some(solver.solve().map_err(annotate)?.stats.iterations)
        } else {
            None
        };
        let new_mass = sol.rho.mass(grid);
        let bound = solver
            .system()
            .mass_functional()
            .map(|g| norm2(&g) * solver.feasibility_threshold());
        let record = StepRecord {
            step,
            time,
            dt,
            iterations: sol.stats.iterations,
            cold_iterations,
            converged: sol.stats.converged,
            primal_change: sol.stats.primal_change,
            feasibility: sol.stats.feasibility,
            objective: sol.stats.objective,
            energy: discrete_energy(grid, &cfg.energy, &sol.rho).map_err(annotate)?,
            mass: new_mass,
            mass_drift: new_mass - mass,
            mass_drift_bound: bound,
        };
        observe(&record);
        steps.push(record);
        mass = new_mass;
        rho = sol.rho;
        mom = sol.mom;
        prev_state = Some(sol.state);
        keep(step, &mut snapshots, time, &rho, &mom);
    }

    let mut notes = Vec::new();
    if cfg.renormalize {
        notes.push("initial density rescaled to unit trapezoid mass".to_string());
    }
    if matches!(cfg.initial, InitialCondition::TwoBump { .. }) && cfg.renormalize {
        notes.push("two-bump datum: equal weights, then unit mass".to_string());
    }
    let manifest = RunManifest {
        steps,
        initial_energy,
        initial_mass,
        wall_time_s: start_clock.elapsed().as_secs_f64(),
        config: cfg.clone(),
        notes,
    };
    Ok(RunOutput {
        snapshots,
        manifest,
        final_rho: rho,
        final_mom: mom,
    })
}
