//! Internal-energy densities, their scalar proximal maps and discrete energies.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::root::solve_log_increasing;

fn one() -> f64 {
    1.0
}

/// A convex internal-energy density `U` on `[0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EnergySpec {
    /// `kappa * xi ln xi`.
    Entropy {
        #[serde(default = "one")]
        kappa: f64,
    },
    /// `kappa * xi^eta / (eta (eta - 1))`.
    Power {
        eta: f64,
        #[serde(default = "one")]
        kappa: f64,
    },
    /// Indicator of `[0, inf)`.
    Indicator,
}

impl EnergySpec {
    pub const ENTROPY: EnergySpec = EnergySpec::Entropy { kappa: 1.0 };

    /// Energy of the doubly nonlinear equation `rho_t = div(|grad rho^m|^{p-2} grad rho^m)`.
    pub fn from_m_p(m: f64, p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid("p", format!("must exceed 1, got {p}")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(invalid("m", format!("must be positive, got {m}")));
        }
        let e = if (m * (p - 1.0) - 1.0).abs() < 1e-12 {
            EnergySpec::Entropy {
                kappa: 1.0 / (p - 1.0),
            }
        } else {
            EnergySpec::Power {
                eta: m + (p - 2.0) / (p - 1.0),
                kappa: m,
            }
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        let check_kappa = |kappa: f64| {
            if kappa > 0.0 && kappa.is_finite() {
                Ok(())
            } else {
                Err(invalid("kappa", format!("must be positive, got {kappa}")))
            }
        };
        match *self {
            EnergySpec::Entropy { kappa } => check_kappa(kappa),
            EnergySpec::Power { eta, kappa } => {
                if !(eta > 0.0 && eta.is_finite()) || (eta - 1.0).abs() < 1e-12 {
                    return Err(invalid(
                        "eta",
                        format!("must be positive and differ from 1, got {eta}"),
                    ));
                }
                check_kappa(kappa)
            }
            EnergySpec::Indicator => Ok(()),
        }
    }

    /// The same energy multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            EnergySpec::Entropy { kappa } => EnergySpec::Entropy {
                kappa: kappa * factor,
            },
            EnergySpec::Power { eta, kappa } => EnergySpec::Power {
                eta,
                kappa: kappa * factor,
            },
            EnergySpec::Indicator => EnergySpec::Indicator,
        }
    }

    /// `U(xi)`, `+inf` for `xi < 0`, with `0 ln 0 = 0`.
    pub fn value(&self, xi: f64) -> f64 {
        if xi < 0.0 {
            return f64::INFINITY;
        }
        match *self {
            EnergySpec::Entropy { kappa } => {
                if xi == 0.0 {
                    0.0
                } else {
                    kappa * xi * xi.ln()
                }
            }
            EnergySpec::Power { eta, kappa } => kappa * xi.powf(eta) / (eta * (eta - 1.0)),
            EnergySpec::Indicator => 0.0,
        }
    }

    /// `U'(xi)` for `xi > 0`.
    pub fn derivative(&self, xi: f64) -> f64 {
        match *self {
            EnergySpec::Entropy { kappa } => kappa * (xi.ln() + 1.0),
            EnergySpec::Power { eta, kappa } => kappa * xi.powf(eta - 1.0) / (eta - 1.0),
            EnergySpec::Indicator => 0.0,
        }
    }

    /// `U''(xi)` for `xi > 0`.
    pub fn second_derivative(&self, xi: f64) -> f64 {
        match *self {
            EnergySpec::Entropy { kappa } => kappa / xi,
            EnergySpec::Power { eta, kappa } => kappa * xi.powf(eta - 2.0),
            EnergySpec::Indicator => 0.0,
        }
    }

    /// `L0 = lim_{xi -> 0+} U'(xi)`.
    pub fn left_limit(&self) -> f64 {
        match *self {
            EnergySpec::Entropy { .. } => f64::NEG_INFINITY,
            EnergySpec::Power { eta, .. } if eta < 1.0 => f64::NEG_INFINITY,
            EnergySpec::Power { .. } | EnergySpec::Indicator => 0.0,
        }
    }

    /// `sup U''` over `[floor, ceiling]`.
    pub fn curvature_bound(&self, floor: f64, ceiling: f64) -> f64 {
        match *self {
            EnergySpec::Entropy { kappa } => kappa / floor,
            EnergySpec::Power { eta, kappa } => {
                let at = if eta <= 2.0 { floor } else { ceiling };
                kappa * at.powf(eta - 2.0)
            }
            EnergySpec::Indicator => 0.0,
        }
    }

    /// `Prox_{gamma U}(rho)`: the `theta >= 0` with `theta + gamma U'(theta) = rho`,
    /// or 0 when `rho <= gamma L0`.
    pub fn prox(&self, gamma: f64, rho: f64) -> Result<f64> {
        if !(gamma > 0.0) {
            return Err(invalid("gamma", format!("must be positive, got {gamma}")));
        }
        if !rho.is_finite() {
            return Err(Error::Degenerate(format!("non-finite prox argument {rho}")));
        }
        let scale = rho.abs().max(1.0);
        match *self {
            EnergySpec::Indicator => Ok(rho.max(0.0)),
            EnergySpec::Power { eta: 2.0, kappa } => Ok((rho / (1.0 + gamma * kappa)).max(0.0)),
            EnergySpec::Entropy { kappa } => {
                let gk = gamma * kappa;
                // theta = e^y: e^y + gk (y + 1) = rho
                let y0 = if rho > 1.0 {
                    rho.ln()
                } else {
                    rho / gk.max(1e-300) - 1.0
                };
                let y0 = y0.clamp(-700.0, 700.0);
                solve_log_increasing(
                    |y: f64| (y.exp() + gk * (y + 1.0) - rho, y.exp() + gk),
                    y0 - 1.0,
                    y0 + 1.0,
                    1e-14,
                    scale,
                )
            }
            EnergySpec::Power { eta, kappa } => {
                if eta > 1.0 && rho <= 0.0 {
                    return Ok(0.0);
                }
                let gk = gamma * kappa;
                let e1 = eta - 1.0;
                let g = move |y: f64| {
                    let a = y.exp();
                    let b = (e1 * y).exp();
                    (a + gk * b / e1 - rho, a + gk * b)
                };
                let y0 = if rho > 0.0 { rho.ln() } else { 0.0 };
                solve_log_increasing(g, y0 - 1.0, y0, 1e-14, scale)
            }
        }
    }
}

/// Relates the equation's energy `U` to the per-node `F` of the joint prox: `F = factor * U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyScaling {
    factor: f64,
}

impl EnergyScaling {
    /// `F = U / dt`, so that `gamma F' = lam h U'` for `gamma = lam dt h`.
    pub fn for_step(dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        Ok(EnergyScaling { factor: 1.0 / dt })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn apply(&self, e: &EnergySpec) -> EnergySpec {
        e.scaled(self.factor)
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut c = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Discrete energy `h sum_i w_i U(rho_i)` with trapezoid weights `w`.
pub fn discrete_energy(grid: &GridSpec, e: &EnergySpec, rho_hat: &[f64]) -> Result<f64> {
    if rho_hat.len() != grid.num_nodes() {
        return Err(Error::ShapeMismatch {
            expected: grid.num_nodes(),
            actual: rho_hat.len(),
        });
    }
    if let Some((node, &value)) = rho_hat.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeDensity { node, value });
    }
    let w = grid.trapezoid_weights();
    Ok(grid.cell_volume()
        * compensated_sum(rho_hat.iter().zip(&w).map(|(&r, &wi)| wi * e.value(r))))
}

/// Gradient of the discrete energy on the density block, `h w_i U'(max(rho_i, floor))`.
pub fn grad_psi(grid: &GridSpec, e: &EnergySpec, rho_hat: &[f64], floor: f64) -> Vec<f64> {
    let mut out = vec![0.0; rho_hat.len()];
    grad_psi_into(
        grid.cell_volume(),
        &grid.trapezoid_weights(),
        e,
        rho_hat,
        floor,
        &mut out,
    );
    out
}

pub(crate) fn grad_psi_into(
    h: f64,
    weights: &[f64],
    e: &EnergySpec,
    rho_hat: &[f64],
    floor: f64,
    out: &mut [f64],
) {
    if matches!(e, EnergySpec::Indicator) {
        out.fill(0.0);
        return;
    }
    for ((o, &r), &w) in out.iter_mut().zip(rho_hat).zip(weights) {
        *o = h * w * e.derivative(r.max(floor));
    }
}
