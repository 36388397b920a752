//! Brute-force reference for the pointwise prox.
//!
//! Minimises `gamma (Phi_c + F)(t, w) + |t - rho|^2 / 2 + |w - |m||^2 / 2` over the
//! radial half-plane directly, using only `phi` and `F` values: a coarse scan
//! followed by golden-section refinement, nested (outer in `t`, inner in `w`).
//! Slow but independent of the closed forms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::costs::CostSpec;
use crate::energies::EnergySpec;
use crate::error::Result;
use crate::par::{self, Exec};
use crate::prox::{prox, ProxQuery, DEFAULT_PROX_RTOL};
use crate::rng::seeded;

const OUTER_SCAN: usize = 128;
const INNER_SCAN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub theta: f64,
    pub v: Vec<f64>,
    pub objective: f64,
}

fn golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    // compare the interior candidates with the bracket ends
    [a, c, d, b]
        .into_iter()
        .min_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap_or(0.5 * (a + b))
}

/// Scan `[lo, hi]` on `n + 1` points, then refine around the best one.
fn scan_then_refine(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize, tol: f64) -> (f64, usize) {
    if hi <= lo {
        return (lo, 0);
    }
    let h = (hi - lo) / n as f64;
    let best = (0..=n)
        .min_by(|i, j| f(lo + *i as f64 * h).total_cmp(&f(lo + *j as f64 * h)))
        .unwrap_or(0);
    let a = lo + best.saturating_sub(1) as f64 * h;
    let b = (lo + (best + 1).min(n) as f64 * h).min(hi);
    (golden(f, a, b, tol), best)
}

/// Reference prox by direct two-variable minimisation.
pub fn brute_force_prox(q: &ProxQuery) -> OracleResult {
    let energy = q.energy.unwrap_or(EnergySpec::Indicator);
    let mnorm = q.mom.iter().map(|x| x * x).sum::<f64>().sqrt();
    let radius = q.cost.domain_radius();
    let (gamma, rho) = (q.gamma, q.rho);

    let joint = |t: f64, w: f64| {
        let persp = if t > 0.0 {
            let ratio = (w / t).min(radius);
            t * q.cost.phi(ratio)
        } else if w == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        gamma * (persp + energy.value(t))
            + 0.5 * (t - rho) * (t - rho)
            + 0.5 * (w - mnorm) * (w - mnorm)
    };
    let inner = |t: f64| -> (f64, f64) {
        let wmax = mnorm.min(radius * t).max(0.0);
        let f = |w: f64| joint(t, w);
        let (w, _) = scan_then_refine(&f, 0.0, wmax, INNER_SCAN, 1e-14 * wmax.max(1.0));
        (w, f(w))
    };
    let outer = |t: f64| inner(t).1;

    let mut t_max = 2.0 * (rho.abs() + mnorm + 1.0);
    let theta = loop {
        let (t, best) = scan_then_refine(&outer, 0.0, t_max, OUTER_SCAN, 1e-14 * t_max.max(1.0));
        if best < OUTER_SCAN {
            break t;
        }
        t_max *= 2.0;
    };
    let (w, objective) = inner(theta);
    let s = if mnorm > 0.0 { w / mnorm } else { 0.0 };
    OracleResult {
        theta,
        v: q.mom.iter().map(|m| s * m).collect(),
        objective,
    }
}

/// Largest accepted deviation between [`prox`] and [`brute_force_prox`].
pub const ORACLE_TOL: f64 = 1e-6;

/// Costs covered by [`oracle_suite`].
pub fn suite_costs() -> Vec<CostSpec> {
    vec![
        CostSpec::power_from_p(1.5),
        CostSpec::power_from_p(2.0),
        CostSpec::power_from_p(3.0),
        CostSpec::Relativistic { alpha: 1.0, k: 1.0 },
        CostSpec::Relativistic { alpha: 2.0, k: 0.5 },
        CostSpec::Relativistic {
            alpha: 1.0,
            k: 10.0,
        },
    ]
}

/// Energies covered by [`oracle_suite`].
pub fn suite_energies() -> Vec<EnergySpec> {
    let power = |eta| EnergySpec::Power { eta, kappa: 1.0 };
    vec![
        EnergySpec::Indicator,
        EnergySpec::ENTROPY,
        power(1.5),
        power(2.0),
        power(3.0),
    ]
}

/// Worst deviation over the samples of one (cost, energy) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub cost: CostSpec,
    pub energy: EnergySpec,
    pub samples: usize,
    pub max_deviation: f64,
}

impl SuiteRow {
    pub fn passed(&self) -> bool {
        self.max_deviation <= ORACLE_TOL
    }
}

/// Compares the closed-form prox with the brute-force minimiser on random
/// queries `rho, m ~ U(-2, 2)`, `gamma = 10^U(-3, 1)`.
///
/// Pair `j` draws from its own stream seeded with `seed + j`, so the report
/// does not depend on the execution policy.
pub fn oracle_suite(samples: usize, seed: u64, exec: Exec) -> Result<Vec<SuiteRow>> {
    let pairs: Vec<(CostSpec, EnergySpec)> = suite_costs()
        .into_iter()
        .flat_map(|c| suite_energies().into_iter().map(move |e| (c, e)))
        .collect();
    par::try_map(exec, pairs.len(), |j| {
        let (cost, energy) = pairs[j];
        let mut rng = seeded(seed.wrapping_add(j as u64));
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let rho = rng.random_range(-2.0..2.0);
            let mom = [rng.random_range(-2.0..2.0)];
            let gamma = 10f64.powf(rng.random_range(-3.0..1.0));
            let q = ProxQuery::new(rho, &mom, gamma, cost, Some(energy));
            let r = prox(&q, DEFAULT_PROX_RTOL)?;
            let o = brute_force_prox(&q);
            let dev = (r.theta - o.theta).abs().max((r.v[0] - o.v[0]).abs());
            // NaN must surface as a failure
            worst = if dev.is_nan() {
                f64::NAN
            } else {
                worst.max(dev)
            };
        }
        Ok(SuiteRow {
            cost,
            energy,
            samples,
            max_deviation: worst,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::CostSpec;

    #[test]
    fn recovers_projection_onto_cone() {
        let q = ProxQuery::new(0.0, &[1.0], 1.0, CostSpec::ConeLimit { k: 1.0 }, None);
        let r = brute_force_prox(&q);
        assert!((r.theta - 0.5).abs() < 1e-7 && (r.v[0] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn recovers_cubic_root() {
        let q = ProxQuery::new(0.5, &[0.8], 1.0, CostSpec::Power { q: 2.0 }, None);
        let t = brute_force_prox(&q).theta;
        assert!(((t + 1.0) * (t + 1.0) * (t - 0.5) - 0.32).abs() < 1e-7);
    }

    #[test]
    fn suite_is_deterministic_and_empty_for_zero_samples() {
        let a = oracle_suite(3, 7, Exec::Parallel).unwrap();
        let b = oracle_suite(3, 7, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 30);
        assert!(a.iter().all(SuiteRow::passed));
        let empty = oracle_suite(0, 0, Exec::Sequential).unwrap();
        assert!(empty
            .iter()
            .all(|r| r.max_deviation == 0.0 && r.samples == 0));
    }

    #[test]
    fn gate_gives_origin() {
        let q = ProxQuery::new(-2.0, &[0.0], 1.0, CostSpec::Power { q: 2.0 }, None);
        let r = brute_force_prox(&q);
        assert!(r.theta.abs() < 1e-12 && r.v[0] == 0.0);
    }
}
