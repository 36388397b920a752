//! Relativistic cost: closed-form residual without an inner solve.

use super::{
    collapsed, shifted, shifted_slope, ProxDiagnostics, ProxQuery, ProxResult, ProxRoute, Radial,
};
use crate::costs::CostSpec;
use crate::energies::EnergySpec;
use crate::error::{invalid, Result};
use crate::root::{polish, solve_root_expanding, RootProblem, RootTolerance};

pub fn prox_relativistic(q: &ProxQuery, rtol: f64) -> Result<ProxResult> {
    q.validate()?;
    let CostSpec::Relativistic { alpha, k } = q.cost else {
        return Err(invalid(
            "cost",
            "relativistic prox needs a relativistic cost",
        ));
    };
    q.cost.validate()?;
    let r = radial(
        alpha,
        k,
        &q.energy(),
        q.gamma,
        q.rho,
        q.mom_norm(),
        rtol,
        None,
    )?;
    Ok(r.into_result(q.mom))
}

/// `sqrt(x (x + 2c)) / (x + c)` and its derivative in `x`.
fn ratio(x: f64, c: f64) -> (f64, f64) {
    let x = x.max(0.0);
    let root = (x * (x + 2.0 * c)).sqrt();
    let xc = x + c;
    let r = root / xc;
    let dr = if root > 0.0 {
        c * c / (root * xc * xc)
    } else {
        f64::INFINITY
    };
    (r, dr)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn radial(
    alpha: f64,
    k: f64,
    e: &EnergySpec,
    gamma: f64,
    rho: f64,
    mnorm: f64,
    rtol: f64,
    guess: Option<f64>,
) -> Result<Radial> {
    let c = gamma * k * k / alpha;
    let km = k * mnorm;
    // sqrt(c^2 + k^2 |m|^2) - c
    let lift = km * km / ((c * c + km * km).sqrt() + c);
    if rho + lift <= gamma * e.left_limit() {
        return Ok(Radial::gated(ProxRoute::Relativistic));
    }
    let factor_at = |theta: f64| {
        if mnorm == 0.0 {
            return 0.0;
        }
        let x = shifted(e, gamma, rho, theta).max(0.0);
        let den = k * k * theta + x + c;
        if den > 0.0 {
            (theta * k * k / den).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    let residual = |t: f64| {
        let x = shifted(e, gamma, rho, t);
        let (r, dr) = ratio(x, c);
        // at x = 0 the product collapses to -k|m|
        let val = if r == 0.0 {
            -km
        } else {
            (k * k * t + x + c) * r - km
        };
        let dx = shifted_slope(e, gamma, t);
        let der = (k * k + dx) * r + (k * k * t + x + c) * dr * dx;
        (val, der)
    };
    // the root sits where the left-hand side balances k|m|
    let tol = RootTolerance::with_rtol(rtol).scaled(km);
    if let Some(g) = guess.filter(|g| *g > 0.0 && mnorm > 0.0) {
        if let Some(report) = polish(residual, g, tol) {
            return Ok(Radial {
                theta: report.root,
                factor: factor_at(report.root),
                diag: ProxDiagnostics {
                    route: ProxRoute::Relativistic,
                    iterations: report.iterations,
                    lo: report.lo,
                    hi: report.hi,
                    residual: report.residual,
                    gated: false,
                },
            });
        }
    }

    let lo = e.prox(gamma, rho)?;
    let hi = e.prox(gamma, rho + lift)?.max(lo);
    let diag = |iterations, residual| ProxDiagnostics {
        route: ProxRoute::Relativistic,
        iterations,
        lo,
        hi,
        residual,
        gated: false,
    };
    if collapsed(lo, hi) {
        return Ok(Radial {
            theta: hi,
            factor: factor_at(hi),
            diag: diag(0, 0.0),
        });
    }

    let report = solve_root_expanding(
        RootProblem {
            residual,
            lo,
            hi,
            tol,
        },
        0.0,
        guess,
    )?;
    Ok(Radial {
        theta: report.root,
        factor: factor_at(report.root),
        diag: ProxDiagnostics {
            lo: report.lo,
            hi: report.hi,
            ..diag(report.iterations, report.residual)
        },
    })
}
