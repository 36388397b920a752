//! Helpers shared by the integration tests.

#![allow(dead_code)]

use gradflow::constraints::ConstraintSystem;
use gradflow::costs::CostSpec;
use gradflow::energies::EnergySpec;
use gradflow::grid::GridSpec;
use gradflow::pd::{Algorithm, Formulation, JkoStepSolver, PDConfig};
use nalgebra::{DMatrix, DVector};

/// `Prox_{phi/gamma}(y)` by bisection on the optimality condition
/// `phi'(x) / gamma + x - y = 0` over the domain of `phi`.
pub fn prox_phi_scaled(c: &CostSpec, gamma: f64, y: f64) -> f64 {
    let sign = y.signum();
    let y = y.abs();
    let slope = |x: f64| c.phi_prime(x) / gamma + x - y;
    let (mut a, mut b) = (0.0, y.min(c.domain_radius()));
    if slope(b) <= 0.0 {
        return sign * b;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if slope(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    sign * 0.5 * (a + b)
}

/// `U`, `U'`, `U''` for the energies used here.
pub fn energy_terms(e: &EnergySpec, r: f64) -> (f64, f64, f64) {
    match *e {
        EnergySpec::Entropy { kappa } => (kappa * r * r.ln(), kappa * (r.ln() + 1.0), kappa / r),
        EnergySpec::Power { eta, kappa } => (
            kappa * r.powf(eta) / (eta * (eta - 1.0)),
            kappa * r.powf(eta - 1.0) / (eta - 1.0),
            kappa * r.powf(eta - 2.0),
        ),
        EnergySpec::Indicator => (0.0, 0.0, 0.0),
    }
}

/// Minimises `h sum w_i (dt m_i^2 / (2 rho_i) + U(rho_i))` subject to `A u = b`
/// by damped Newton on the KKT conditions.
pub fn kkt_oracle(grid: &GridSpec, e: &EnergySpec, dt: f64, rho_prev: &[f64]) -> Vec<f64> {
    let sys = ConstraintSystem::build(grid, dt, rho_prev, 0.0, true).unwrap();
    let a = sys.to_dense();
    let (rows, n) = (a.len(), grid.num_nodes());
    let cols = 2 * n;
    let amat = DMatrix::from_fn(rows, cols, |i, j| a[i][j]);
    let b = DVector::from_column_slice(sys.rhs());
    let h = grid.cell_volume();
    let w = grid.trapezoid_weights();

    let grad_hess = |u: &DVector<f64>| {
        let mut g = DVector::zeros(cols);
        let mut hm = DMatrix::zeros(cols, cols);
        for i in 0..n {
            let (r, m) = (u[i], u[n + i]);
            let (_, du, d2u) = energy_terms(e, r);
            let c = h * w[i];
            g[i] = c * (-dt * m * m / (2.0 * r * r) + du);
            g[n + i] = c * dt * m / r;
            hm[(i, i)] = c * (dt * m * m / (r * r * r) + d2u);
            hm[(i, n + i)] = -c * dt * m / (r * r);
            hm[(n + i, i)] = hm[(i, n + i)];
            hm[(n + i, n + i)] = c * dt / r;
        }
        (g, hm)
    };
    let kkt_residual = |u: &DVector<f64>, y: &DVector<f64>| {
        let (g, _) = grad_hess(u);
        let top = g + amat.transpose() * y;
        let bot = &amat * u - &b;
        top.norm_squared() + bot.norm_squared()
    };

    let mut u = DVector::zeros(cols);
    for i in 0..n {
        u[i] = rho_prev[i];
    }
    let mut y = DVector::zeros(rows);
    for _ in 0..100 {
        let (g, hm) = grad_hess(&u);
        let mut k = DMatrix::zeros(cols + rows, cols + rows);
        k.view_mut((0, 0), (cols, cols)).copy_from(&hm);
        k.view_mut((0, cols), (cols, rows))
            .copy_from(&amat.transpose());
        k.view_mut((cols, 0), (rows, cols)).copy_from(&amat);
        let mut rhs = DVector::zeros(cols + rows);
        rhs.rows_mut(0, cols)
            .copy_from(&(-(g + amat.transpose() * &y)));
        rhs.rows_mut(cols, rows).copy_from(&(-(&amat * &u - &b)));
        let step = k.lu().solve(&rhs).expect("nonsingular KKT matrix");
        let before = kkt_residual(&u, &y);
        if before < 1e-28 {
            break;
        }
        let mut s = 1.0;
        loop {
            let un = &u + s * step.rows(0, cols);
            let yn = &y + s * step.rows(cols, rows);
            if (0..n).all(|i| un[i] > 0.0) && kkt_residual(&un, &yn) < before * (1.0 - 1e-4 * s) {
                u = un;
                y = yn;
                break;
            }
            s *= 0.5;
            assert!(s > 1e-12, "line search failed");
        }
    }
    assert!(kkt_residual(&u, &y) < 1e-24);
    u.as_slice().to_vec()
}

pub fn problem() -> (GridSpec, Vec<f64>, f64) {
    let grid = GridSpec::uniform_1d(0.0, 1.0, 7).unwrap();
    let rho: Vec<f64> = grid
        .nodes_1d()
        .iter()
        .map(|x| 1.0 + 0.6 * (std::f64::consts::PI * x).cos())
        .collect();
    (grid, rho, 0.05)
}

pub fn pd_solution(
    grid: &GridSpec,
    e: EnergySpec,
    rho: &[f64],
    dt: f64,
    algorithm: Algorithm,
    formulation: Formulation,
) -> Vec<f64> {
    let cfg = PDConfig {
        algorithm,
        formulation,
        tol: 1e-12,
        max_iter: 2_000_000,
        rho_floor: 0.1,
        ..PDConfig::default()
    };
    let solver = JkoStepSolver::new(
        grid,
        CostSpec::power_from_p(2.0),
        e,
        dt,
        rho,
        Some(0.0),
        cfg,
    )
    .unwrap();
    let sol = solver.solve().unwrap();
    assert!(
        sol.stats.converged,
        "{algorithm:?}/{formulation:?}: {:?}",
        sol.stats
    );
    let mut u = sol.rho.0;
    u.extend_from_slice(sol.mom.as_slice());
    u
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
