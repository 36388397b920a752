//! Proximal maps of `gamma (Phi_c + F)` at a single grid point.
//!
//! `Phi_c(rho, m) = rho c(m / rho)` is the perspective of the radial cost. Each
//! map reduces to a scalar root problem for the density `theta`; the momentum
//! comes out as `v = s m` with `s in [0, 1]`, so the solvers work on `|m|`
//! and return the pair `(theta, s)`.

mod field;
mod general;
mod limits;
mod power;
mod relativistic;

use serde::Serialize;

use crate::costs::CostSpec;
use crate::energies::EnergySpec;
use crate::error::{invalid, Result};

pub use field::{FieldProx, FieldProxStats};
pub use general::prox_general;
pub use limits::{prox_cone, prox_quadratic_limit};
pub use power::prox_power;
pub use relativistic::prox_relativistic;

/// Default relative tolerance of the scalar solves.
pub const DEFAULT_PROX_RTOL: f64 = 1e-12;

/// Arguments of one pointwise prox.
#[derive(Debug, Clone, Copy)]
pub struct ProxQuery<'a> {
    pub rho: f64,
    pub mom: &'a [f64],
    pub gamma: f64,
    pub cost: CostSpec,
    /// `None` behaves like the indicator of `[0, inf)`.
    pub energy: Option<EnergySpec>,
}

impl<'a> ProxQuery<'a> {
    pub fn new(
        rho: f64,
        mom: &'a [f64],
        gamma: f64,
        cost: CostSpec,
        energy: Option<EnergySpec>,
    ) -> Self {
        ProxQuery {
            rho,
            mom,
            gamma,
            cost,
            energy,
        }
    }

    fn energy(&self) -> EnergySpec {
        self.energy.unwrap_or(EnergySpec::Indicator)
    }

    fn mom_norm(&self) -> f64 {
        self.mom.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid(
                "gamma",
                format!("must be positive, got {}", self.gamma),
            ));
        }
        if !self.rho.is_finite() || self.mom.iter().any(|x| !x.is_finite()) {
            return Err(invalid("query", "non-finite density or momentum"));
        }
        Ok(())
    }
}

/// Which closed form produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProxRoute {
    General,
    Relativistic,
    Power,
    Cone,
    QuadraticLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProxDiagnostics {
    pub route: ProxRoute,
    pub iterations: usize,
    pub lo: f64,
    pub hi: f64,
    pub residual: f64,
    /// The zero gate fired.
    pub gated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub theta: f64,
    /// Momentum scale `s` with `v = s m`.
    pub factor: f64,
    pub v: Vec<f64>,
    pub diagnostics: ProxDiagnostics,
}

/// Radial solution `(theta, s)` before the momentum is rebuilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Radial {
    pub theta: f64,
    pub factor: f64,
    pub diag: ProxDiagnostics,
}

impl Radial {
    fn gated(route: ProxRoute) -> Self {
        Radial {
            theta: 0.0,
            factor: 0.0,
            diag: ProxDiagnostics {
                route,
                iterations: 0,
                lo: 0.0,
                hi: 0.0,
                residual: 0.0,
                gated: true,
            },
        }
    }

    fn closed_form(route: ProxRoute, theta: f64, factor: f64) -> Self {
        Radial {
            theta,
            factor,
            diag: ProxDiagnostics {
                route,
                iterations: 0,
                lo: theta,
                hi: theta,
                residual: 0.0,
                gated: false,
            },
        }
    }

    fn into_result(self, mom: &[f64]) -> ProxResult {
        ProxResult {
            theta: self.theta,
            factor: self.factor,
            v: mom.iter().map(|m| self.factor * m).collect(),
            diagnostics: self.diag,
        }
    }
}

/// Picks the specialised closed form for a cost/energy pair.
pub fn route_for(cost: &CostSpec, energy: Option<&EnergySpec>) -> ProxRoute {
    let indicator = matches!(energy, None | Some(EnergySpec::Indicator));
    match cost {
        CostSpec::Power { .. } => ProxRoute::Power,
        CostSpec::Relativistic { .. } => ProxRoute::Relativistic,
        CostSpec::ConeLimit { .. } if indicator => ProxRoute::Cone,
        CostSpec::QuadraticLimit { .. } if indicator => ProxRoute::QuadraticLimit,
        _ => ProxRoute::General,
    }
}

/// Pointwise prox through the specialised closed form for the query's cost.
pub fn prox(q: &ProxQuery, rtol: f64) -> Result<ProxResult> {
    q.validate()?;
    let e = q.energy();
    let r = radial(&q.cost, &e, q.gamma, q.rho, q.mom_norm(), rtol, None)?;
    Ok(r.into_result(q.mom))
}

pub(crate) fn radial(
    cost: &CostSpec,
    e: &EnergySpec,
    gamma: f64,
    rho: f64,
    mnorm: f64,
    rtol: f64,
    guess: Option<f64>,
) -> Result<Radial> {
    match (route_for(cost, Some(e)), *cost) {
        (ProxRoute::Power, CostSpec::Power { q }) => {
            power::radial(q / (q - 1.0), e, gamma, rho, mnorm, rtol, guess)
        }
        (ProxRoute::Relativistic, CostSpec::Relativistic { alpha, k }) => {
            relativistic::radial(alpha, k, e, gamma, rho, mnorm, rtol, guess)
        }
        (ProxRoute::Cone, CostSpec::ConeLimit { k }) => Ok(limits::cone_radial(k, rho, mnorm)),
        (ProxRoute::QuadraticLimit, CostSpec::QuadraticLimit { alpha }) => {
            limits::quadratic_radial(alpha, gamma, rho, mnorm, rtol, guess)
        }
        _ => general::radial(cost, e, gamma, rho, mnorm, rtol, guess),
    }
}

/// `t + gamma F'(t) - rho`, with `F' = 0` for the indicator and `F'(0) = L0`.
fn shifted(e: &EnergySpec, gamma: f64, rho: f64, t: f64) -> f64 {
    let fp = match e {
        EnergySpec::Indicator => 0.0,
        _ if t <= 0.0 => e.left_limit(),
        _ => e.derivative(t),
    };
    t + gamma * fp - rho
}

/// `d/dt (t + gamma F'(t))`.
fn shifted_slope(e: &EnergySpec, gamma: f64, t: f64) -> f64 {
    match e {
        EnergySpec::Indicator => 1.0,
        _ => 1.0 + gamma * e.second_derivative(t),
    }
}

/// Degenerate bracket rule: `hi - lo <= 1e-14 max(1, hi)`.
fn collapsed(lo: f64, hi: f64) -> bool {
    hi - lo <= 1e-14 * hi.abs().max(1.0)
}
