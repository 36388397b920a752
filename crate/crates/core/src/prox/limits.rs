//! The two degenerate limits of the relativistic cost with the indicator energy.

use super::{ProxDiagnostics, ProxQuery, ProxResult, ProxRoute, Radial};
use crate::error::{invalid, Result};
use crate::root::{solve_root_from, RootProblem, RootTolerance};

/// Projection onto the cone `{|m| <= k rho}`.
pub fn prox_cone(k: f64, rho: f64, mom: &[f64]) -> ProxResult {
    let mnorm = mom.iter().map(|x| x * x).sum::<f64>().sqrt();
    cone_radial(k, rho, mnorm).into_result(mom)
}

pub(crate) fn cone_radial(k: f64, rho: f64, mnorm: f64) -> Radial {
    if mnorm <= k * rho {
        return Radial::closed_form(
            ProxRoute::Cone,
            rho.max(0.0),
            if mnorm > 0.0 { 1.0 } else { 0.0 },
        );
    }
    if rho + k * mnorm <= 0.0 {
        return Radial::gated(ProxRoute::Cone);
    }
    let theta = (rho + k * mnorm) / (1.0 + k * k);
    Radial::closed_form(ProxRoute::Cone, theta, (k * theta / mnorm).clamp(0.0, 1.0))
}

/// Quadratic cost `xi^2 / (2 alpha)`: `theta` is the root of
/// `(t + gamma/alpha)^2 (t - rho) = gamma |m|^2 / (2 alpha)` with `t >= max(0, rho)`.
pub fn prox_quadratic_limit(alpha: f64, q: &ProxQuery, rtol: f64) -> Result<ProxResult> {
    q.validate()?;
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    Ok(quadratic_radial(alpha, q.gamma, q.rho, q.mom_norm(), rtol, None)?.into_result(q.mom))
}

pub(crate) fn quadratic_radial(
    alpha: f64,
    gamma: f64,
    rho: f64,
    mnorm: f64,
    rtol: f64,
    guess: Option<f64>,
) -> Result<Radial> {
    let lift = alpha * mnorm * mnorm / (2.0 * gamma);
    if rho + lift <= 0.0 {
        return Ok(Radial::gated(ProxRoute::QuadraticLimit));
    }
    let a = gamma / alpha;
    let lo = rho.max(0.0);
    let hi = (rho + lift).max(lo);
    let rhs = gamma * mnorm * mnorm / (2.0 * alpha);
    let report = solve_root_from(
        RootProblem {
            residual: |t: f64| {
                let ta = t + a;
                (ta * ta * (t - rho) - rhs, 2.0 * ta * (t - rho) + ta * ta)
            },
            lo,
            hi,
            tol: RootTolerance::with_rtol(rtol).scaled(rhs),
        },
        guess,
    )?;
    let theta = report.root;
    let factor = if mnorm > 0.0 {
        theta / (theta + a)
    } else {
        0.0
    };
    Ok(Radial {
        theta,
        factor,
        diag: ProxDiagnostics {
            route: ProxRoute::QuadraticLimit,
            iterations: report.iterations,
            lo,
            hi,
            residual: report.residual,
            gated: false,
        },
    })
}
