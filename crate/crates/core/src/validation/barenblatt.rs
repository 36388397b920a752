//! Self-similar solutions of the doubly nonlinear diffusion equation.
//!
//! `rho(t, x) = t^{-d/delta} u(|x| t^{-1/delta})` with three profile regimes
//! depending on the sign of `m(p-1) - 1`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::quadrature::{integrate, integrate_to_infinity};
use crate::error::{invalid, Error, Result};
use crate::grid::{DensityField, GridSpec};
use crate::root::solve_log_increasing;

/// Tolerance of every profile quadrature.
pub const QUAD_TOL: f64 = 1e-10;

/// `exp(-EXP_CUTOFF)` bounds the neglected tail of the exponential profile.
const EXP_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `m(p-1) = 1`: `u = exp(-a |y|^q) / sigma`.
    Exponential,
    /// `m(p-1) > 1`: `u = (D - a |y|^q)_+^k`.
    Compact,
    /// `m(p-1) < 1`: `u = (D + a |y|^q)^{-k}`.
    HeavyTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarenblattParams {
    pub m: f64,
    pub p: f64,
    pub d: usize,
}

impl BarenblattParams {
    pub fn new(m: f64, p: f64, d: usize) -> Result<Self> {
        let out = BarenblattParams { m, p, d };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(invalid("m", format!("must be positive, got {}", self.m)));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(invalid("p", format!("must exceed 1, got {}", self.p)));
        }
        if self.d == 0 {
            return Err(invalid("d", "must be at least 1"));
        }
        if !(self.delta_p() > 0.0) {
            return Err(invalid(
                "m",
                format!("delta_p = {} is not positive", self.delta_p()),
            ));
        }
        if self.regime() == Regime::HeavyTail && !(self.exponent() * self.q() > self.d as f64) {
            return Err(invalid("m", "heavy-tail profile has infinite mass"));
        }
        Ok(())
    }

    /// `(d - p) / (d (p - 1))`, not clipped at zero.
    pub fn critical_exponent(&self) -> f64 {
        let d = self.d as f64;
        (d - self.p) / (d * (self.p - 1.0))
    }

    /// `d (p - 1)(m - m_c)`.
    pub fn delta_p(&self) -> f64 {
        self.d as f64 * (self.p - 1.0) * (self.m - self.critical_exponent())
    }

    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn regime(&self) -> Regime {
        let s = self.m * (self.p - 1.0) - 1.0;
        if s.abs() <= 1e-12 {
            Regime::Exponential
        } else if s > 0.0 {
            Regime::Compact
        } else {
            Regime::HeavyTail
        }
    }

    /// The coefficient `a` in front of `|y|^q`.
    pub fn coefficient(&self) -> f64 {
        let scale = self.delta_p().powf(1.0 / (self.p - 1.0));
        match self.regime() {
            Regime::Exponential => (self.p - 1.0) / self.q() / scale,
            _ => (self.m * (self.p - 1.0) - 1.0).abs() / (self.m * self.p) / scale,
        }
    }

    /// The outer exponent `k = (p - 1) / |m(p - 1) - 1|` (unused in the exponential regime).
    pub fn exponent(&self) -> f64 {
        (self.p - 1.0) / (self.m * (self.p - 1.0) - 1.0).abs()
    }

    /// Profile `u(r)` for normalization `c` (`sigma` or `D`).
    pub fn profile(&self, c: f64, r: f64) -> f64 {
        let ar = self.coefficient() * r.abs().powf(self.q());
        match self.regime() {
            Regime::Exponential => (-ar).exp() / c,
            Regime::Compact => (c - ar).max(0.0).powf(self.exponent()),
            Regime::HeavyTail => (c + ar).powf(-self.exponent()),
        }
    }

    /// Radius of the support in similarity variables; `None` for positive profiles.
    pub fn support_radius(&self, c: f64) -> Option<f64> {
        (self.regime() == Regime::Compact).then(|| (c / self.coefficient()).powf(1.0 / self.q()))
    }

    /// Total mass of `u` for normalization `c`.
    pub fn profile_mass(&self, c: f64) -> Result<f64> {
        self.mass_between(c, 0.0, None)
    }

    /// Mass of `u` on `r0 <= |y| <= r1` (`r1 = None` for infinity).
    fn mass_between(&self, c: f64, r0: f64, r1: Option<f64>) -> Result<f64> {
        let d = self.d;
        let f = |r: f64| {
            if d == 1 {
                self.profile(c, r)
            } else {
                r.powi(d as i32 - 1) * self.profile(c, r)
            }
        };
        let end = match self.regime() {
            Regime::Exponential => Some((EXP_CUTOFF / self.coefficient()).powf(1.0 / self.q())),
            Regime::Compact => self.support_radius(c),
            Regime::HeavyTail => None,
        };
        let end = match (end, r1) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let value = match end {
            Some(e) if e <= r0 => 0.0,
            Some(e) => integrate(f, r0, e, QUAD_TOL * 1e-2, QUAD_TOL)?.value,
            None => integrate_to_infinity(f, r0, QUAD_TOL * 1e-2, QUAD_TOL)?.value,
        };
        Ok(sphere_area(d) * value)
    }
}

/// Surface area of the unit sphere in `R^d` (2 for `d = 1`).
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// The constant making the profile a unit-mass density: `sigma` in the
/// exponential regime, `D` otherwise.
pub fn barenblatt_normalization(params: &BarenblattParams) -> Result<f64> {
    params.validate()?;
    match params.regime() {
        Regime::Exponential => params.profile_mass(1.0),
        regime => {
            // ln(mass) is monotone in ln(D): increasing for compact, decreasing for heavy tails
            let sign = if regime == Regime::Compact { 1.0 } else { -1.0 };
            let mut failure = None;
            let mut g = |y: f64| -> f64 {
                match params.profile_mass(y.exp()) {
                    Ok(mass) if mass > 0.0 => sign * mass.ln(),
                    Ok(_) => -sign * f64::MAX,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            };
            let d = solve_log_increasing(
                |y| {
                    let v = g(y);
                    let h = 1e-6;
                    (v, (g(y + h) - g(y - h)) / (2.0 * h))
                },
                -1.0,
                1.0,
                1e-13,
                1.0,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            let d = d?;
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Degenerate(format!(
                    "normalization solve returned {d}"
                )));
            }
            Ok(d)
        }
    }
}

/// A unit-mass self-similar solution with its normalization constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Barenblatt {
    pub params: BarenblattParams,
    pub normalization: f64,
}

impl Barenblatt {
    pub fn new(params: BarenblattParams) -> Result<Self> {
        Ok(Barenblatt {
            params,
            normalization: barenblatt_normalization(&params)?,
        })
    }

    pub fn from_m_p(m: f64, p: f64) -> Result<Self> {
        Self::new(BarenblattParams::new(m, p, 1)?)
    }

    pub fn profile(&self, r: f64) -> f64 {
        self.params.profile(self.normalization, r)
    }

    /// `rho(t, x)` at a point of `R^d`.
    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.value_radial(t, r)
    }

    pub fn value_radial(&self, t: f64, r: f64) -> f64 {
        let dl = self.params.delta_p();
        t.powf(-(self.params.d as f64) / dl) * self.profile(r * t.powf(-1.0 / dl))
    }

    pub fn peak(&self, t: f64) -> f64 {
        self.value_radial(t, 0.0)
    }

    /// Support radius in `x` at time `t`, if compact.
    pub fn support(&self, t: f64) -> Option<f64> {
        self.params
            .support_radius(self.normalization)
            .map(|y| y * t.powf(1.0 / self.params.delta_p()))
    }

    /// Mass outside the ball of radius `r` at time `t`.
    pub fn mass_outside(&self, t: f64, r: f64) -> Result<f64> {
        let y = r * t.powf(-1.0 / self.params.delta_p());
        self.params.mass_between(self.normalization, y, None)
    }

    /// Smallest radius (to 1e-10 relative) whose exterior mass at time `t` is at most `tail`.
    pub fn extent(&self, t: f64, tail: f64) -> Result<f64> {
        if !(tail > 0.0) {
            return Err(invalid("tail", "must be positive"));
        }
        if let Some(r) = self.support(t) {
            return Ok(r);
        }
        let mut hi = t.powf(1.0 / self.params.delta_p());
        while self.mass_outside(t, hi)? > tail {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Degenerate("tail bound unreachable".into()));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-10 * hi {
            let mid = 0.5 * (lo + hi);
            if self.mass_outside(t, mid)? > tail {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    pub fn sample(&self, grid: &GridSpec, t: f64) -> DensityField {
        grid.sample(|x| self.value(t, x))
    }
}

/// `rho(t, x)` for a solution built by [`Barenblatt::new`].
pub fn barenblatt_value(b: &Barenblatt, t: f64, x: &[f64]) -> f64 {
    b.value(t, x)
}

/// One-dimensional heat kernel started at `t0`: `(4 pi (t + t0))^{-1/2} exp(-x^2 / (4 (t + t0)))`.
pub fn heat_kernel_value(t0: f64, t: f64, x: f64) -> f64 {
    let s = t + t0;
    (-x * x / (4.0 * s)).exp() / (4.0 * std::f64::consts::PI * s).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta;

    /// Closed-form normalization through Gamma and Beta functions (d = 1).
    fn closed_form(m: f64, p: f64) -> f64 {
        let b = BarenblattParams::new(m, p, 1).unwrap();
        let (a, k, q) = (b.coefficient(), b.exponent(), b.q());
        match b.regime() {
            Regime::Exponential => 2.0 * gamma(1.0 + 1.0 / q) / a.powf(1.0 / q),
            // 2 D^{k + 1/q} a^{-1/q} B(1/q, k + 1) / q = 1
            Regime::Compact => {
                (q / (2.0 * a.powf(-1.0 / q) * beta(1.0 / q, k + 1.0))).powf(1.0 / (k + 1.0 / q))
            }
            // 2 D^{1/q - k} a^{-1/q} B(1/q, k - 1/q) / q = 1
            Regime::HeavyTail => (q / (2.0 * a.powf(-1.0 / q) * beta(1.0 / q, k - 1.0 / q)))
                .powf(1.0 / (1.0 / q - k)),
        }
    }

    #[test]
    fn exponents_and_regimes() {
        let b = BarenblattParams::new(0.5, 3.0, 1).unwrap();
        assert_eq!(b.critical_exponent(), -1.0);
        assert_eq!(b.delta_p(), 3.0);
        assert_eq!(b.regime(), Regime::Exponential);
        let b = BarenblattParams::new(1.0, 3.0, 1).unwrap();
        assert_eq!(b.delta_p(), 4.0);
        assert_eq!(b.regime(), Regime::Compact);
        assert!((b.coefficient() - 1.0 / 6.0).abs() < 1e-15);
        let b = BarenblattParams::new(0.25, 3.0, 1).unwrap();
        assert_eq!(b.delta_p(), 2.5);
        assert_eq!(b.regime(), Regime::HeavyTail);
        assert!(BarenblattParams::new(0.5, 1.5, 3).is_err());
        assert!(BarenblattParams::new(0.5, 1.0, 1).is_err());
    }

    #[test]
    fn normalizations_match_closed_forms() {
        for (m, p) in [
            (0.5, 3.0),
            (1.0, 3.0),
            (0.25, 3.0),
            (1.0, 2.0),
            (2.0, 2.0),
            (0.7, 2.5),
        ] {
            let params = BarenblattParams::new(m, p, 1).unwrap();
            let c = barenblatt_normalization(&params).unwrap();
            let oracle = closed_form(m, p);
            assert!(
                (c - oracle).abs() < 1e-10 * oracle,
                "m={m} p={p}: {c} vs {oracle}"
            );
        }
    }

    #[test]
    fn frozen_normalizations() {
        let c = |m| barenblatt_normalization(&BarenblattParams::new(m, 3.0, 1).unwrap()).unwrap();
        assert!((c(0.5) - 2.149_528_241_534_478_6).abs() < 1e-11);
        assert!((c(1.0) - 0.664_693_216_105_934_3).abs() < 1e-11);
        assert!((c(0.25) - 1.126_347_893_072_104).abs() < 1e-11);
    }

    #[test]
    fn unit_mass_in_higher_dimensions() {
        for (m, p, d) in [(1.0, 2.0, 2), (2.0, 2.0, 3), (0.8, 2.0, 2)] {
            let b = Barenblatt::new(BarenblattParams::new(m, p, d).unwrap()).unwrap();
            let mass = b.params.profile_mass(b.normalization).unwrap();
            assert!((mass - 1.0).abs() < 1e-9, "m={m} p={p} d={d}: {mass}");
        }
    }

    #[test]
    fn compact_profile_vanishes_outside_support() {
        let b = Barenblatt::from_m_p(1.0, 3.0).unwrap();
        let r = b.params.support_radius(b.normalization).unwrap();
        assert!(b.profile(r * (1.0 + 1e-12)) == 0.0);
        assert!(b.profile(1e3) == 0.0);
        assert!(b.profile(0.99 * r) > 0.0);
        let t = 0.01;
        assert_eq!(b.support(t).unwrap(), r * t.powf(0.25));
    }

    #[test]
    fn heavy_tail_stays_positive() {
        let b = Barenblatt::from_m_p(0.25, 3.0).unwrap();
        for y in [0.0, 1.0, 1e2, 1e4] {
            assert!(b.profile(y) > 0.0);
        }
    }

    #[test]
    fn peak_follows_the_scaling() {
        let b = Barenblatt::from_m_p(0.5, 3.0).unwrap();
        let t: f64 = 0.01;
        assert!((b.peak(t) - 1.0 / (b.normalization * t.powf(1.0 / 3.0))).abs() < 1e-12);
        let b = Barenblatt::from_m_p(1.0, 3.0).unwrap();
        let expect = b.normalization.powf(2.0) * t.powf(-0.25);
        assert!((b.peak(t) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn extent_meets_the_tail_bound() {
        let b = Barenblatt::from_m_p(0.5, 3.0).unwrap();
        let r = b.extent(0.11, 1e-8).unwrap();
        let out = b.mass_outside(0.11, r).unwrap();
        assert!(out <= 1e-8 && out > 0.9e-8, "{out}");
        let b = Barenblatt::from_m_p(1.0, 3.0).unwrap();
        assert_eq!(b.extent(0.1, 1e-8).unwrap(), b.support(0.1).unwrap());
    }

    #[test]
    fn heat_kernel_basics() {
        let (t0, x): (f64, f64) = (0.01, 0.3);
        let init = (-x * x / (4.0 * t0)).exp() / (4.0 * std::f64::consts::PI * t0).sqrt();
        assert_eq!(heat_kernel_value(t0, 0.0, x), init);
        // value at the origin: 1 / sqrt(4 pi 0.11), from extended precision
        let v = heat_kernel_value(0.01, 0.1, 0.0);
        assert!((v - 0.850_547_799_661_262_5).abs() < 1e-14, "{v:.17}");
        let mass = integrate(|x| heat_kernel_value(0.01, 0.1, x), -5.0, 5.0, 1e-14, 0.0).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-12);
    }
}
