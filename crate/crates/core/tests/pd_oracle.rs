//! One implicit step on a tiny grid against a dense Newton solve of the KKT system.

mod common;

use common::{kkt_oracle, max_diff, pd_solution, problem};
use gradflow::costs::CostSpec;
use gradflow::energies::EnergySpec;
use gradflow::grid::GridSpec;
use gradflow::pd::{solve_jko_step, Algorithm, Formulation, PDConfig};

#[test]
fn porous_medium_step_matches_kkt_oracle() {
    let (grid, rho, dt) = problem();
    let e = EnergySpec::Power {
        eta: 2.0,
        kappa: 1.0,
    };
    let oracle = kkt_oracle(&grid, &e, dt, &rho);
    // the step actually moves mass
    assert!(oracle[grid.num_nodes()..].iter().any(|m| m.abs() > 1e-3));
    let mut sols = Vec::new();
    for alg in [Algorithm::Yan, Algorithm::CondatVu] {
        for form in [Formulation::Joint, Formulation::Separate] {
            let u = pd_solution(&grid, e, &rho, dt, alg, form);
            let err = max_diff(&u, &oracle);
            assert!(err <= 1e-5, "{alg:?}/{form:?}: {err:e}");
            sols.push(u);
        }
    }
    for u in &sols[1..] {
        assert!(max_diff(u, &sols[0]) <= 1e-5);
    }
}

#[test]
fn entropy_step_matches_kkt_oracle() {
    let (grid, rho, dt) = problem();
    let e = EnergySpec::ENTROPY;
    let oracle = kkt_oracle(&grid, &e, dt, &rho);
    for alg in [Algorithm::Yan, Algorithm::CondatVu] {
        for form in [Formulation::Joint, Formulation::Separate] {
            let u = pd_solution(&grid, e, &rho, dt, alg, form);
            let err = max_diff(&u, &oracle);
            assert!(err <= 1e-5, "{alg:?}/{form:?}: {err:e}");
        }
    }
}

#[test]
fn indicator_energy_keeps_the_data() {
    let grid = GridSpec::uniform_1d(0.0, 1.0, 4).unwrap();
    let rho = vec![0.5, 0.8, 1.2, 0.9, 0.6];
    let oracle = kkt_oracle(&grid, &EnergySpec::Indicator, 0.1, &rho);
    let (r, m, stats) = solve_jko_step(
        &rho.clone().into(),
        &PDConfig {
            tol: 1e-12,
            max_iter: 500_000,
            ..PDConfig::default()
        },
        &grid,
        CostSpec::power_from_p(2.0),
        EnergySpec::Indicator,
        0.1,
        Some(0.0),
    )
    .unwrap();
    assert!(stats.converged);
    let mut u = r.0;
    u.extend_from_slice(m.as_slice());
    assert!(max_diff(&u, &oracle) <= 1e-6);
    assert!(max_diff(&u[..5], &rho) <= 1e-6);
}
