//! Generic route: works for any radial cost with a computable `Prox_{lam phi*}`.

use super::{collapsed, shifted, ProxDiagnostics, ProxQuery, ProxResult, ProxRoute, Radial};
use crate::costs::CostSpec;
use crate::energies::EnergySpec;
use crate::error::Result;
use crate::root::{numeric_derivative, solve_root_expanding, RootProblem, RootTolerance};

/// Prox through the residual `R(t) = t + gamma F'(t) - rho - gamma phi*(Prox_{(t/gamma) phi*}(|m|/gamma))`.
pub fn prox_general(q: &ProxQuery, rtol: f64) -> Result<ProxResult> {
    q.validate()?;
    q.cost.validate()?;
    let r = radial(
        &q.cost,
        &q.energy(),
        q.gamma,
        q.rho,
        q.mom_norm(),
        rtol,
        None,
    )?;
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
    let s = mnorm / gamma;
    let lift = gamma * cost.phi_star(s);
    if rho + lift <= gamma * e.left_limit() {
        return Ok(Radial::gated(ProxRoute::General));
    }
    let lo = e.prox(gamma, rho)?;
    let hi = e.prox(gamma, rho + lift)?.max(lo);
    let inner = |t: f64| -> Result<f64> { cost.prox_phi_star(t / gamma, s) };
    let finish = |theta: f64, iterations, residual| -> Result<Radial> {
        let factor = if mnorm > 0.0 {
            (1.0 - gamma / mnorm * inner(theta)?).clamp(0.0, 1.0)
        } else {
            0.0
        };
        Ok(Radial {
            theta,
            factor,
            diag: ProxDiagnostics {
                route: ProxRoute::General,
                iterations,
                lo,
                hi,
                residual,
                gated: false,
            },
        })
    };
    if collapsed(lo, hi) {
        return finish(hi, 0, 0.0);
    }

    // the inner solve can fail only on bad arguments, which are excluded here
    let res = |t: f64| {
        let chi = cost.prox_phi_star(t / gamma, s).unwrap_or(f64::NAN);
        shifted(e, gamma, rho, t) - gamma * cost.phi_star(chi)
    };
    let scale = rho.abs() + lo;
    let report = solve_root_expanding(
        RootProblem {
            residual: |t: f64| (res(t), numeric_derivative(res, t, lo)),
            lo,
            hi,
            tol: RootTolerance::with_rtol(rtol).scaled(scale),
        },
        0.0,
        guess,
    )?;
    let mut out = finish(report.root, report.iterations, report.residual)?;
    out.diag.lo = report.lo;
    out.diag.hi = report.hi;
    Ok(out)
}
