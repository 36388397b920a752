//! Power cost `|xi|^q / q`.

use super::{
    collapsed, shifted, shifted_slope, ProxDiagnostics, ProxQuery, ProxResult, ProxRoute, Radial,
};
use crate::costs::CostSpec;
use crate::energies::EnergySpec;
use crate::error::{invalid, Result};
use crate::root::{polish, solve_root_expanding, RootProblem, RootReport, RootTolerance};

pub fn prox_power(q: &ProxQuery, rtol: f64) -> Result<ProxResult> {
    q.validate()?;
    let CostSpec::Power { q: qq } = q.cost else {
        return Err(invalid("cost", "power prox needs a power cost"));
    };
    q.cost.validate()?;
    let r = radial(
        qq / (qq - 1.0),
        &q.energy(),
        q.gamma,
        q.rho,
        q.mom_norm(),
        rtol,
        None,
    )?;
    Ok(r.into_result(q.mom))
}

/// Solves the `p`-th root of the residual,
/// `gamma X^{1/p} + t (p/gamma)^{1-2/p} X^{1/q} = (gamma/p)^{1/p} |m|` with `X = t + gamma F'(t) - rho`,
/// which is increasing in `t` and shares its zero.
pub(crate) fn radial(
    p: f64,
    e: &EnergySpec,
    gamma: f64,
    rho: f64,
    mnorm: f64,
    rtol: f64,
    guess: Option<f64>,
) -> Result<Radial> {
    let q = p / (p - 1.0);
    let lift = || mnorm.powf(p) / (p * gamma.powf(p - 1.0));
    let l0 = e.left_limit();
    if l0.is_finite() && rho + lift() <= gamma * l0 {
        return Ok(Radial::gated(ProxRoute::Power));
    }
    // x^{1/q} = x / x^{1/p}
    let roots = |x: f64| {
        let xp = x.powf(1.0 / p);
        (xp, if x > 0.0 { x / xp } else { 0.0 })
    };
    // every constant below is a power of g1 = (gamma/p)^{1/p}
    let g1 = (gamma / p).powf(1.0 / p);
    let c = gamma * gamma / (p * g1 * g1);
    let factor_at = |theta: f64| {
        if mnorm == 0.0 {
            return 0.0;
        }
        let x = shifted(e, gamma, rho, theta).max(0.0);
        // x^{1 - 2/q} = x^{1/p} / x^{1/q}
        let (xp, xq) = roots(x);
        let tail = if x > 0.0 {
            xp / xq
        } else {
            x.powf(1.0 - 2.0 / q)
        };
        let den = theta + c * tail;
        if den > 0.0 && den.is_finite() {
            (theta / den).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    let a = p / gamma * g1 * g1;
    let target = g1 * mnorm;
    let residual = |t: f64| {
        let x = shifted(e, gamma, rho, t).max(0.0);
        let dx = shifted_slope(e, gamma, t);
        let (xp, xq) = roots(x);
        let val = gamma * xp + t * a * xq - target;
        let der = if x > 0.0 {
            gamma / p * xp / x * dx + a * (xq + t / q * xq / x * dx)
        } else {
            f64::INFINITY
        };
        (val, der)
    };
    let tol = RootTolerance::with_rtol(rtol).scaled(target);
    let done = |report: RootReport| Radial {
        theta: report.root,
        factor: factor_at(report.root),
        diag: ProxDiagnostics {
            route: ProxRoute::Power,
            iterations: report.iterations,
            lo: report.lo,
            hi: report.hi,
            residual: report.residual,
            gated: false,
        },
    };
    if let Some(g) = guess.filter(|g| *g > 0.0 && mnorm > 0.0) {
        if let Some(report) = polish(residual, g, tol) {
            return Ok(done(report));
        }
    }

    let lo = e.prox(gamma, rho)?;
    let hi = e.prox(gamma, rho + lift())?.max(lo);
    if collapsed(lo, hi) {
        return Ok(Radial {
            theta: hi,
            factor: factor_at(hi),
            diag: ProxDiagnostics {
                route: ProxRoute::Power,
                iterations: 0,
                lo,
                hi,
                residual: 0.0,
                gated: false,
            },
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
    Ok(done(report))
}
