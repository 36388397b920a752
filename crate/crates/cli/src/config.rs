//! Run configuration file (TOML).

use std::path::Path;

use gradflow::jko::{EvolutionConfig, InitialCondition, ScheduleSegment};
use gradflow::pd::{Algorithm, Formulation, MomentumScale, PDConfig, StepSizes};
use gradflow::{CostSpec, EnergySpec, Exec, GridSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub cost: CostConfig,
    pub energy: EnergyConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    pub time: TimeConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub d: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostVariant {
    Power,
    Relativistic,
    ConeLimit,
    QuadraticLimit,
}

/// `power` takes `q` or the equation exponent `p`; the others take `alpha` and/or `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub variant: CostVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyVariant {
    Entropy,
    Power,
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpConfig {
    pub m: f64,
    pub p: f64,
}

/// Either an explicit `variant` or an `m_p` pair of the doubly nonlinear family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<EnergyVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_p: Option<MpConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoKeyword {
    Auto,
}

/// A number or the string `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Auto(AutoKeyword),
    Value(f64),
}

impl Default for AutoOr {
    fn default() -> Self {
        AutoOr::Auto(AutoKeyword::Auto)
    }
}

impl AutoOr {
    fn value(&self) -> Option<f64> {
        match *self {
            AutoOr::Auto(_) => None,
            AutoOr::Value(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleKeyword {
    Balanced,
    Unit,
}

/// `"balanced"`, `"unit"` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleConfig {
    Keyword(ScaleKeyword),
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    pub algorithm: Algorithm,
    pub formulation: Formulation,
    pub sigma: AutoOr,
    pub lambda: AutoOr,
    pub lambda_cap: f64,
    pub tol: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    pub delta: AutoOr,
    pub warm_start: bool,
    pub rho_floor: f64,
    pub boundary_continuity: bool,
    pub momentum_scale: ScaleConfig,
    pub compare_cold: bool,
    pub parallel: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        let pd = PDConfig::default();
        SchemeConfig {
            algorithm: pd.algorithm,
            formulation: pd.formulation,
            sigma: AutoOr::default(),
            lambda: AutoOr::default(),
            lambda_cap: pd.lambda_cap,
            tol: pd.tol,
            tol_feas: pd.tol_feas,
            max_iter: pd.max_iter,
            delta: AutoOr::default(),
            warm_start: pd.warm_start,
            rho_floor: pd.rho_floor,
            boundary_continuity: pd.boundary_continuity,
            momentum_scale: match pd.momentum_scale {
                MomentumScale::Unit => ScaleConfig::Keyword(ScaleKeyword::Unit),
                MomentumScale::Balanced => ScaleConfig::Keyword(ScaleKeyword::Balanced),
                MomentumScale::Fixed { value } => ScaleConfig::Value(value),
            },
            compare_cold: false,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub final_time: f64,
    /// Shorthand for a single-segment schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<ScheduleSegment>,
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub family: String,
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default)]
    pub renormalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            precision: 17,
        }
    }
}

fn one() -> usize {
    1
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::config(msg.into())
}

fn need(value: Option<f64>, section: &str, key: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| bad(format!("[{section}] missing `{key}`")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.evolution()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(&path.display().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialise")
    }

    fn grid(&self) -> Result<GridSpec, CliError> {
        let g = &self.grid;
        if g.a.len() != g.d || g.b.len() != g.d || g.n.len() != g.d {
            return Err(bad(format!(
                "[grid] a, b and n need d = {} entries each",
                g.d
            )));
        }
        GridSpec::new(g.a.clone(), g.b.clone(), g.n.clone()).map_err(|e| bad(format!("[grid] {e}")))
    }

    fn cost(&self) -> Result<CostSpec, CliError> {
        let c = &self.cost;
        let unused = |keys: &[(&str, Option<f64>)]| -> Result<(), CliError> {
            match keys.iter().find(|(_, v)| v.is_some()) {
                Some((k, _)) => Err(bad(format!(
                    "[cost] `{k}` does not apply to variant {:?}",
                    c.variant
                ))),
                None => Ok(()),
            }
        };
        let spec = match c.variant {
            CostVariant::Power => {
                unused(&[("alpha", c.alpha), ("k", c.k)])?;
                match (c.q, c.p) {
                    (Some(q), None) => CostSpec::Power { q },
                    (None, Some(p)) => CostSpec::power_from_p(p),
                    _ => return Err(bad("[cost] power needs exactly one of `q`, `p`")),
                }
            }
            CostVariant::Relativistic => {
                unused(&[("q", c.q), ("p", c.p)])?;
                CostSpec::Relativistic {
                    alpha: need(c.alpha, "cost", "alpha")?,
                    k: need(c.k, "cost", "k")?,
                }
            }
            CostVariant::ConeLimit => {
                unused(&[("q", c.q), ("p", c.p), ("alpha", c.alpha)])?;
                CostSpec::ConeLimit {
                    k: need(c.k, "cost", "k")?,
                }
            }
            CostVariant::QuadraticLimit => {
                unused(&[("q", c.q), ("p", c.p), ("k", c.k)])?;
                CostSpec::QuadraticLimit {
                    alpha: need(c.alpha, "cost", "alpha")?,
                }
            }
        };
        spec.validate().map_err(|e| bad(format!("[cost] {e}")))?;
        Ok(spec)
    }

    fn energy(&self) -> Result<EnergySpec, CliError> {
        let e = &self.energy;
        let spec = match (e.variant, e.m_p) {
            (None, Some(mp)) => {
                if e.eta.is_some() || e.kappa.is_some() {
                    return Err(bad("[energy] `m_p` excludes `eta` and `kappa`"));
                }
                EnergySpec::from_m_p(mp.m, mp.p).map_err(|err| bad(format!("[energy] {err}")))?
            }
            (Some(_), Some(_)) => return Err(bad("[energy] give either `variant` or `m_p`")),
            (None, None) => return Err(bad("[energy] needs `variant` or `m_p`")),
            (Some(EnergyVariant::Indicator), None) => {
                if e.eta.is_some() || e.kappa.is_some() {
                    return Err(bad("[energy] indicator takes no parameters"));
                }
                EnergySpec::Indicator
            }
            (Some(EnergyVariant::Entropy), None) => {
                if e.eta.is_some() {
                    return Err(bad("[energy] entropy takes no `eta`"));
                }
                EnergySpec::Entropy {
                    kappa: e.kappa.unwrap_or(1.0),
                }
            }
            (Some(EnergyVariant::Power), None) => EnergySpec::Power {
                eta: need(e.eta, "energy", "eta")?,
                kappa: e.kappa.unwrap_or(1.0),
            },
        };
        spec.validate()
            .map_err(|err| bad(format!("[energy] {err}")))?;
        Ok(spec)
    }

    fn pd(&self) -> Result<PDConfig, CliError> {
        let s = &self.scheme;
        let step_sizes = match (s.sigma.value(), s.lambda.value()) {
            (None, None) => StepSizes::Auto,
            (Some(sigma), Some(lambda)) => StepSizes::Fixed { sigma, lambda },
            _ => {
                return Err(bad(
                    "[scheme] `sigma` and `lambda` are both numbers or both \"auto\"",
                ))
            }
        };
        let momentum_scale = match s.momentum_scale {
            ScaleConfig::Keyword(ScaleKeyword::Balanced) => MomentumScale::Balanced,
            ScaleConfig::Keyword(ScaleKeyword::Unit) => MomentumScale::Unit,
            ScaleConfig::Value(value) => MomentumScale::Fixed { value },
        };
        let pd = PDConfig {
            algorithm: s.algorithm,
            formulation: s.formulation,
            step_sizes,
            tol: s.tol,
            tol_feas: s.tol_feas,
            max_iter: s.max_iter,
            warm_start: s.warm_start,
            rho_floor: s.rho_floor,
            lambda_cap: s.lambda_cap,
            prox_rtol: None,
            boundary_continuity: s.boundary_continuity,
            momentum_scale,
            exec: if s.parallel {
                Exec::Parallel
            } else {
                Exec::Sequential
            },
        };
        pd.validate().map_err(|e| bad(format!("[scheme] {e}")))?;
        Ok(pd)
    }

    fn initial(&self) -> Result<InitialCondition, CliError> {
        let mut table = self.initial.params.clone();
        if table.contains_key("family") {
            return Err(bad("[initial.params] must not repeat `family`"));
        }
        table.insert(
            "family".into(),
            toml::Value::String(self.initial.family.clone()),
        );
        toml::Value::Table(table)
            .try_into()
            .map_err(|e| bad(format!("[initial] {e}")))
    }

    /// The solver-side configuration, fully validated.
    pub fn evolution(&self) -> Result<EvolutionConfig, CliError> {
        let t = &self.time;
        let schedule = match (t.dt, t.schedule.is_empty()) {
            (Some(dt), true) => vec![ScheduleSegment {
                until: t.final_time,
                dt,
            }],
            (None, false) => t.schedule.clone(),
            (Some(_), false) => return Err(bad("[time] give either `dt` or `schedule`")),
            (None, true) => return Err(bad("[time] needs `dt` or `schedule`")),
        };
        if self.output.precision == 0 || self.output.precision > 17 {
            return Err(bad(format!(
                "[output] precision must be in 1..=17, got {}",
                self.output.precision
            )));
        }
        let cfg = EvolutionConfig {
            grid: self.grid()?,
            cost: self.cost()?,
            energy: self.energy()?,
            initial: self.initial()?,
            renormalize: self.initial.renormalize,
            final_time: t.final_time,
            schedule,
            snapshots: t.snapshots.clone(),
            pd: self.pd()?,
            delta: self.scheme.delta.value(),
            compare_cold: self.scheme.compare_cold,
        };
        cfg.validate().map_err(|e| bad(e.to_string()))?;
        Ok(cfg)
    }
}
