//! The separable prox over every node of a primal state.

use serde::Serialize;

use super::radial;
use crate::costs::CostSpec;
use crate::energies::EnergySpec;
use crate::error::{Error, Result};
use crate::par::{try_map, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FieldProxStats {
    pub max_root_iterations: usize,
    pub total_root_iterations: usize,
    pub gated_nodes: usize,
}

#[derive(Clone, Copy)]
struct NodeOut {
    theta: f64,
    factor: f64,
    iterations: usize,
    gated: bool,
}

/// Node-wise prox of `sum_i gamma_i (Phi_c + F)(rho_i, m_i)` on the flat layout.
#[derive(Debug, Clone)]
pub struct FieldProx {
    cost: CostSpec,
    energy: EnergySpec,
    gammas: Vec<f64>,
    dim: usize,
    rtol: f64,
    exec: Exec,
}

impl FieldProx {
    /// `energy` is the per-node `F`; pass the indicator for the plain perspective.
    pub fn new(
        cost: CostSpec,
        energy: EnergySpec,
        gammas: Vec<f64>,
        dim: usize,
        rtol: f64,
        exec: Exec,
    ) -> Result<Self> {
        cost.validate()?;
        energy.validate()?;
        if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(crate::error::invalid(
                "gamma",
                format!("must be positive, got {g}"),
            ));
        }
        Ok(FieldProx {
            cost,
            energy,
            gammas,
            dim,
            rtol,
            exec,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.gammas.len()
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Writes the prox of `input` into `out`; both use the flat primal layout.
    pub fn apply(&self, input: &[f64], out: &mut [f64]) -> Result<FieldProxStats> {
        self.apply_from(input, None, out)
    }

    /// As [`FieldProx::apply`], starting each scalar solve from `guess[i]`
    /// (typically the previous density iterate).
    pub fn apply_from(
        &self,
        input: &[f64],
        guess: Option<&[f64]>,
        out: &mut [f64],
    ) -> Result<FieldProxStats> {
        let n = self.num_nodes();
        let len = (self.dim + 1) * n;
        if let Some(g) = guess {
            if g.len() < n {
                return Err(Error::ShapeMismatch {
                    expected: n,
                    actual: g.len(),
                });
            }
        }
        for buf in [input.len(), out.len()] {
            if buf != len {
                return Err(Error::ShapeMismatch {
                    expected: len,
                    actual: buf,
                });
            }
        }
        let d = self.dim;
        let nodes = try_map(self.exec, n, |i| {
            let mut m2 = 0.0;
            for l in 0..d {
                let m = input[(l + 1) * n + i];
                m2 += m * m;
            }
            let r = radial(
                &self.cost,
                &self.energy,
                self.gammas[i],
                input[i],
                m2.sqrt(),
                self.rtol,
                guess.map(|g| g[i]),
            )?;
            Ok(NodeOut {
                theta: r.theta,
                factor: r.factor,
                iterations: r.diag.iterations,
                gated: r.diag.gated,
            })
        })?;
        let mut stats = FieldProxStats::default();
        for (i, node) in nodes.iter().enumerate() {
            out[i] = node.theta;
            for l in 0..d {
                let j = (l + 1) * n + i;
                out[j] = node.factor * input[j];
            }
            stats.max_root_iterations = stats.max_root_iterations.max(node.iterations);
            stats.total_root_iterations += node.iterations;
            stats.gated_nodes += node.gated as usize;
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::{prox, ProxQuery};

    #[test]
    fn matches_pointwise_prox_and_policies_agree() {
        let n = 17;
        let cost = CostSpec::Relativistic { alpha: 1.0, k: 1.0 };
        let e = EnergySpec::ENTROPY;
        let gammas: Vec<f64> = (0..n).map(|i| 0.01 + 0.02 * i as f64).collect();
        let input: Vec<f64> = (0..2 * n).map(|j| ((j * 7) as f64).sin()).collect();
        let fp = FieldProx::new(cost, e, gammas.clone(), 1, 1e-12, Exec::Sequential).unwrap();
        let mut a = vec![0.0; 2 * n];
        let mut b = vec![0.0; 2 * n];
        fp.apply(&input, &mut a).unwrap();
        fp.clone()
            .with_exec(Exec::Parallel)
            .apply(&input, &mut b)
            .unwrap();
        assert_eq!(a, b);
        for i in 0..n {
            let r = prox(
                &ProxQuery::new(input[i], &[input[n + i]], gammas[i], cost, Some(e)),
                1e-12,
            )
            .unwrap();
            assert_eq!(r.theta, a[i]);
            assert_eq!(r.v[0], a[n + i]);
        }
    }

    #[test]
    fn shape_is_checked() {
        let fp = FieldProx::new(
            CostSpec::Power { q: 2.0 },
            EnergySpec::Indicator,
            vec![1.0; 3],
            1,
            1e-12,
            Exec::Sequential,
        )
        .unwrap();
        assert!(fp.apply(&[0.0; 5], &mut [0.0; 6]).is_err());
        assert!(FieldProx::new(
            CostSpec::Power { q: 2.0 },
            EnergySpec::Indicator,
            vec![0.0; 3],
            1,
            1e-12,
            Exec::Sequential
        )
        .is_err());
    }

    #[test]
    fn guessed_solves_agree_with_cold_solves() {
        let n = 40;
        let input: Vec<f64> = (0..2 * n)
            .map(|j| 0.8 * ((j * 5) as f64).sin() + if j < n { 0.3 } else { 0.0 })
            .collect();
        let gammas = vec![0.02; n];
        for (cost, e) in [
            (CostSpec::power_from_p(3.0), EnergySpec::ENTROPY),
            (
                CostSpec::power_from_p(1.5),
                EnergySpec::Power {
                    eta: 2.0,
                    kappa: 1.0,
                },
            ),
            (
                CostSpec::Relativistic { alpha: 1.0, k: 2.0 },
                EnergySpec::ENTROPY,
            ),
            (
                CostSpec::Relativistic { alpha: 1.0, k: 2.0 },
                EnergySpec::Indicator,
            ),
        ] {
            let fp = FieldProx::new(cost, e, gammas.clone(), 1, 1e-12, Exec::Sequential).unwrap();
            let mut cold = vec![0.0; 2 * n];
            fp.apply(&input, &mut cold).unwrap();
            // nearby and far guesses both land on the same root
            for shift in [1e-6, 0.3] {
                let guess: Vec<f64> = cold[..n].iter().map(|t| t * (1.0 + shift)).collect();
                let mut warm = vec![0.0; 2 * n];
                fp.apply_from(&input, Some(&guess), &mut warm).unwrap();
                for (a, b) in cold.iter().zip(&warm) {
                    assert!(
                        (a - b).abs() <= 1e-9 * (1.0 + a.abs()),
                        "{cost:?} {e:?}: {a} vs {b}"
                    );
                }
            }
        }
    }
}
