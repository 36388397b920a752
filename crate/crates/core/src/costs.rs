//! Radial transport costs `c = phi(|.|)` and their conjugates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::root::{solve_root, RootProblem, RootTolerance};

/// Relative tolerance of the scalar solve inside [`CostSpec::prox_phi_star`].
pub const PROX_PHI_STAR_RTOL: f64 = 1e-13;

/// A radial cost profile `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CostSpec {
    /// `phi(xi) = |xi|^q / q`, conjugate `|s|^p / p`.
    Power { q: f64 },
    /// `phi(xi) = (k^2/alpha) (1 - sqrt(1 - (xi/k)^2))` on `[-k, k]`.
    Relativistic { alpha: f64, k: f64 },
    /// `alpha -> inf` limit: indicator of `[-k, k]`, conjugate `k |s|`.
    ConeLimit { k: f64 },
    /// `k -> inf` limit: `xi^2 / (2 alpha)`.
    QuadraticLimit { alpha: f64 },
}

impl CostSpec {
    /// Power cost from the conjugate exponent `p` of the resulting equation.
    pub fn power_from_p(p: f64) -> Self {
        CostSpec::Power { q: p / (p - 1.0) }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        match *self {
            CostSpec::Power { q } => {
                if q > 1.0 && q.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("q", format!("power cost needs q > 1, got {q}")))
                }
            }
            CostSpec::Relativistic { alpha, k } => {
                positive("alpha", alpha)?;
                positive("k", k)
            }
            CostSpec::ConeLimit { k } => positive("k", k),
            CostSpec::QuadraticLimit { alpha } => positive("alpha", alpha),
        }
    }

    /// Conjugate exponent `p = q / (q - 1)` of a power cost.
    pub fn conjugate_exponent(&self) -> Option<f64> {
        match *self {
            CostSpec::Power { q } => Some(q / (q - 1.0)),
            _ => None,
        }
    }

    /// `(c', mu)` with `phi(s xi) = mu phi'(xi)` for `s > 0`.
    pub fn argument_scaled(&self, s: f64) -> (CostSpec, f64) {
        match *self {
            CostSpec::Power { q } => (*self, s.powf(q)),
            CostSpec::Relativistic { alpha, k } => (
                CostSpec::Relativistic {
                    alpha: alpha / (s * s),
                    k: k / s,
                },
                1.0,
            ),
            CostSpec::ConeLimit { k } => (CostSpec::ConeLimit { k: k / s }, 1.0),
            CostSpec::QuadraticLimit { alpha } => (
                CostSpec::QuadraticLimit {
                    alpha: alpha / (s * s),
                },
                1.0,
            ),
        }
    }

    /// Radius of `dom phi` (`+inf` for full-domain costs).
    pub fn domain_radius(&self) -> f64 {
        match *self {
            CostSpec::Relativistic { k, .. } | CostSpec::ConeLimit { k } => k,
            _ => f64::INFINITY,
        }
    }

    pub fn phi(&self, xi: f64) -> f64 {
        let a = xi.abs();
        match *self {
            CostSpec::Power { q } => a.powf(q) / q,
            CostSpec::Relativistic { alpha, k } => {
                if a > k {
                    f64::INFINITY
                } else {
                    let r = a / k;
                    // 1 - sqrt(1 - r^2) without cancellation
                    (k * k / alpha) * r * r / (1.0 + (1.0 - r * r).sqrt())
                }
            }
            CostSpec::ConeLimit { k } => {
                if a > k {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            CostSpec::QuadraticLimit { alpha } => a * a / (2.0 * alpha),
        }
    }

    /// `phi'` on the interior of the domain.
    pub fn phi_prime(&self, xi: f64) -> f64 {
        let a = xi.abs();
        let sign = xi.signum();
        match *self {
            CostSpec::Power { q } => sign * a.powf(q - 1.0),
            CostSpec::Relativistic { alpha, k } => {
                let r = a / k;
                sign * a / (alpha * (1.0 - r * r).sqrt())
            }
            CostSpec::ConeLimit { .. } => 0.0,
            CostSpec::QuadraticLimit { alpha } => xi / alpha,
        }
    }

    /// Perspective `Phi(rho, |m|) = rho phi(|m| / rho)`, closed at `rho = 0`.
    pub fn perspective(&self, rho: f64, mnorm: f64) -> f64 {
        if rho > 0.0 {
            rho * self.phi(mnorm / rho)
        } else if rho == 0.0 && mnorm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn phi_star(&self, s: f64) -> f64 {
        let a = s.abs();
        match *self {
            CostSpec::Power { q } => {
                let p = q / (q - 1.0);
                a.powf(p) / p
            }
            CostSpec::Relativistic { alpha, k } => {
                let c = k * k / alpha;
                let ks = k * a;
                // sqrt(c^2 + (ks)^2) - c
                ks * ks / ((c * c + ks * ks).sqrt() + c)
            }
            CostSpec::ConeLimit { k } => k * a,
            CostSpec::QuadraticLimit { alpha } => 0.5 * alpha * a * a,
        }
    }

    /// `(phi*)'(s)`; for the cone limit the subgradient `k sign(s)` (0 at the kink).
    pub fn phi_star_prime(&self, s: f64) -> f64 {
        let a = s.abs();
        let sign = s.signum();
        match *self {
            CostSpec::Power { q } => {
                let p = q / (q - 1.0);
                sign * a.powf(p - 1.0)
            }
            CostSpec::Relativistic { alpha, k } => {
                let c = k * k / alpha;
                k * k * s / (c * c + (k * s) * (k * s)).sqrt()
            }
            CostSpec::ConeLimit { k } => {
                if s == 0.0 {
                    0.0
                } else {
                    k * sign
                }
            }
            CostSpec::QuadraticLimit { alpha } => alpha * s,
        }
    }

    fn phi_star_second(&self, s: f64) -> f64 {
        let a = s.abs();
        match *self {
            CostSpec::Power { q } => {
                let p = q / (q - 1.0);
                (p - 1.0) * a.powf(p - 2.0)
            }
            CostSpec::Relativistic { alpha, k } => {
                let c = k * k / alpha;
                let r2 = c * c + (k * s) * (k * s);
                k * k * c * c / (r2 * r2.sqrt())
            }
            CostSpec::ConeLimit { .. } => 0.0,
            CostSpec::QuadraticLimit { alpha } => alpha,
        }
    }

    /// `Prox_{lam phi*}(s)` for `s >= 0`: the `chi in [0, s]` with
    /// `chi + lam (phi*)'(chi) = s`.
    pub fn prox_phi_star(&self, lam: f64, s: f64) -> Result<f64> {
        if !(lam >= 0.0) {
            return Err(invalid("lam", format!("must be nonnegative, got {lam}")));
        }
        if !(s >= 0.0) {
            return Err(invalid("s", format!("must be nonnegative, got {s}")));
        }
        if s == 0.0 || lam == 0.0 {
            return Ok(s);
        }
        match *self {
            CostSpec::ConeLimit { k } => Ok((s - lam * k).max(0.0)),
            CostSpec::QuadraticLimit { alpha } => Ok(s / (1.0 + lam * alpha)),
            CostSpec::Power { q } if (q - 2.0).abs() < 1e-15 => Ok(s / (1.0 + lam)),
            _ => {
                let r = solve_root(RootProblem {
                    residual: |chi: f64| {
                        (
                            chi + lam * self.phi_star_prime(chi) - s,
                            1.0 + lam * self.phi_star_second(chi),
                        )
                    },
                    lo: 0.0,
                    hi: s,
                    tol: RootTolerance::with_rtol(PROX_PHI_STAR_RTOL).scaled(s),
                })?;
                Ok(r.root.clamp(0.0, s))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REL11: CostSpec = CostSpec::Relativistic { alpha: 1.0, k: 1.0 };

    #[test]
    fn phi_values() {
        assert_eq!(CostSpec::Power { q: 2.0 }.phi(2.0), 2.0);
        assert_eq!(REL11.phi(0.0), 0.0);
        assert!((REL11.phi(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(REL11.phi(1.5), f64::INFINITY);
        assert_eq!(CostSpec::ConeLimit { k: 1.0 }.phi(0.5), 0.0);
        assert_eq!(CostSpec::ConeLimit { k: 1.0 }.phi(1.5), f64::INFINITY);
        assert_eq!(CostSpec::QuadraticLimit { alpha: 2.0 }.phi(2.0), 1.0);
    }

    #[test]
    fn relativistic_phi_against_high_precision() {
        // (9/2)(1 - sqrt(3/4)) evaluated with 30-digit arithmetic
        let expected = 0.602885682970026_f64;
        let got = CostSpec::Relativistic { alpha: 2.0, k: 3.0 }.phi(1.5);
        assert!((got - expected).abs() < 1e-15, "{got}");
    }

    #[test]
    fn argument_scaling() {
        for c in [
            CostSpec::Power { q: 1.5 },
            CostSpec::Relativistic { alpha: 2.0, k: 3.0 },
            CostSpec::ConeLimit { k: 2.0 },
            CostSpec::QuadraticLimit { alpha: 0.7 },
        ] {
            for s in [0.3, 1.0, 4.0] {
                let (scaled, mu) = c.argument_scaled(s);
                for xi in [0.0, 0.1, 0.4, -0.6, 5.0] {
                    let (a, b) = (c.phi(s * xi), mu * scaled.phi(xi));
                    assert!(
                        a == b || (a - b).abs() <= 1e-13 * a.abs().max(1.0),
                        "{c:?} s {s} xi {xi}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn phi_star_values() {
        for c in [
            CostSpec::Power { q: 1.5 },
            REL11,
            CostSpec::ConeLimit { k: 2.0 },
            CostSpec::QuadraticLimit { alpha: 3.0 },
        ] {
            assert_eq!(c.phi_star(0.0), 0.0);
        }
        assert!((CostSpec::Power { q: 1.5 }.phi_star(2.0) - 8.0 / 3.0).abs() < 1e-14);
        let rel = CostSpec::Relativistic { alpha: 1.0, k: 2.0 };
        assert!((rel.phi_star(1.0) - (2.0 * 5f64.sqrt() - 4.0)).abs() < 1e-14);
    }

    #[test]
    fn prox_phi_star_examples() {
        for c in [
            CostSpec::Power { q: 3.0 },
            REL11,
            CostSpec::ConeLimit { k: 1.0 },
        ] {
            assert_eq!(c.prox_phi_star(0.7, 0.0).unwrap(), 0.0);
        }
        let p2 = CostSpec::power_from_p(2.0);
        assert!((p2.prox_phi_star(1.0, 3.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(
            CostSpec::ConeLimit { k: 1.0 }
                .prox_phi_star(0.5, 2.0)
                .unwrap(),
            1.5
        );
        assert_eq!(
            CostSpec::ConeLimit { k: 1.0 }
                .prox_phi_star(3.0, 2.0)
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn relativistic_prox_phi_star_against_grid_minimization() {
        let (lam, s) = (0.7, 1.3);
        let obj = |x: f64| lam * REL11.phi_star(x) + 0.5 * (x - s) * (x - s);
        // fine grid then golden-section refinement
        let n = 20_000;
        let best = (0..=n)
            .map(|i| s * i as f64 / n as f64)
            .min_by(|a, b| obj(*a).partial_cmp(&obj(*b)).unwrap())
            .unwrap();
        let (mut a, mut b) = ((best - s / n as f64).max(0.0), (best + s / n as f64).min(s));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        while b - a > 1e-13 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if obj(c) < obj(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let oracle = 0.5 * (a + b);
        let got = REL11.prox_phi_star(lam, s).unwrap();
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn perspective_closure() {
        let c = CostSpec::Power { q: 2.0 };
        assert_eq!(c.perspective(0.0, 0.0), 0.0);
        assert_eq!(c.perspective(0.0, 1.0), f64::INFINITY);
        assert_eq!(c.perspective(-1.0, 0.0), f64::INFINITY);
        assert!((c.perspective(2.0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(CostSpec::Power { q: 1.0 }.validate().is_err());
        assert!(CostSpec::Relativistic { alpha: 0.0, k: 1.0 }
            .validate()
            .is_err());
        assert!(CostSpec::ConeLimit { k: -1.0 }.validate().is_err());
        assert!(REL11.prox_phi_star(-1.0, 1.0).is_err());
    }
}
