use gradflow::costs::CostSpec;
use gradflow::energies::EnergySpec;
use gradflow::oracle::brute_force_prox;
use gradflow::prox::{
    self, prox, prox_cone, prox_general, prox_quadratic_limit, ProxQuery, ProxRoute,
};
use proptest::prelude::*;

const RTOL: f64 = 1e-12;

fn costs() -> Vec<CostSpec> {
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

fn energies() -> Vec<Option<EnergySpec>> {
    vec![
        None,
        Some(EnergySpec::ENTROPY),
        Some(EnergySpec::Power {
            eta: 1.5,
            kappa: 1.0,
        }),
        Some(EnergySpec::Power {
            eta: 2.0,
            kappa: 1.0,
        }),
        Some(EnergySpec::Power {
            eta: 3.0,
            kappa: 1.0,
        }),
    ]
}

fn pair() -> impl Strategy<Value = (CostSpec, Option<EnergySpec>)> {
    (0..6usize, 0..5usize).prop_map(|(c, e)| (costs()[c], energies()[e]))
}

fn log_gamma() -> impl Strategy<Value = f64> {
    (-3.0..1.0f64).prop_map(|x| 10f64.powf(x))
}

/// The cost's own residual at `t`, used for the monotonicity check.
fn general_residual(
    cost: &CostSpec,
    e: &EnergySpec,
    gamma: f64,
    rho: f64,
    mnorm: f64,
    t: f64,
) -> f64 {
    let fp = if matches!(e, EnergySpec::Indicator) {
        0.0
    } else if t == 0.0 {
        e.left_limit()
    } else {
        e.derivative(t)
    };
    let chi = cost.prox_phi_star(t / gamma, mnorm / gamma).unwrap();
    t + gamma * fp - rho - gamma * cost.phi_star(chi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_brute_force((cost, e) in pair(), rho in -2.0..2.0f64, m in -2.0..2.0f64, gamma in log_gamma()) {
        let mom = [m];
        let q = ProxQuery::new(rho, &mom, gamma, cost, e);
        let r = prox(&q, RTOL).unwrap();
        let o = brute_force_prox(&q);
        prop_assert!((r.theta - o.theta).abs() <= 1e-6, "theta {} vs {}", r.theta, o.theta);
        prop_assert!((r.v[0] - o.v[0]).abs() <= 1e-6, "v {} vs {}", r.v[0], o.v[0]);
    }

    #[test]
    fn collinear_factor_and_domain((cost, e) in pair(), rho in -2.0..2.0f64, m in -2.0..2.0f64, gamma in log_gamma()) {
        let r = prox(&ProxQuery::new(rho, &[m], gamma, cost, e), RTOL).unwrap();
        prop_assert!(r.theta >= 0.0);
        prop_assert!((0.0..=1.0).contains(&r.factor));
        prop_assert_eq!(r.v[0], r.factor * m);
        if r.v[0] != 0.0 {
            prop_assert!(r.theta > 0.0);
        }
        let radius = cost.domain_radius();
        if radius.is_finite() {
            prop_assert!(r.v[0].abs() <= radius * r.theta + 1e-12);
        }
    }

    #[test]
    fn nonexpansive((cost, e) in pair(), a in prop::array::uniform2(-2.0..2.0f64), b in prop::array::uniform2(-2.0..2.0f64), gamma in log_gamma()) {
        let ra = prox(&ProxQuery::new(a[0], &[a[1]], gamma, cost, e), RTOL).unwrap();
        let rb = prox(&ProxQuery::new(b[0], &[b[1]], gamma, cost, e), RTOL).unwrap();
        let out = ((ra.theta - rb.theta).powi(2) + (ra.v[0] - rb.v[0]).powi(2)).sqrt();
        let inp = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        prop_assert!(out <= inp * (1.0 + 1e-9) + 1e-10, "{out} > {inp}");
    }

    #[test]
    fn bracket_contains_root_and_residual_increases((cost, e) in pair(), rho in -2.0..2.0f64, m in 0.0..2.0f64, gamma in log_gamma()) {
        let energy = e.unwrap_or(EnergySpec::Indicator);
        let r = prox(&ProxQuery::new(rho, &[m], gamma, cost, e), RTOL).unwrap();
        if r.diagnostics.gated {
            return Ok(());
        }
        let (lo, hi) = (r.diagnostics.lo, r.diagnostics.hi);
        prop_assert!(lo <= r.theta && r.theta <= hi);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..100 {
            let t = lo + (hi - lo) * i as f64 / 99.0;
            let v = general_residual(&cost, &energy, gamma, rho, m, t);
            prop_assert!(v >= prev - 1e-12 * (1.0 + v.abs()), "residual decreased at t = {t}");
            prev = v;
        }
    }

    #[test]
    fn gate_is_exact(m in 0.0..2.0f64, gamma in log_gamma(), side in prop::bool::ANY) {
        // power cost p = 3 with the indicator: the gate is rho + |m|^3 / (3 gamma^2) <= 0
        let lift = m.powi(3) / (3.0 * gamma * gamma);
        let rho = -lift + if side { 1e-8 } else { -1e-8 };
        let r = prox(&ProxQuery::new(rho, &[m], gamma, CostSpec::power_from_p(3.0), None), RTOL).unwrap();
        prop_assert_eq!(r.diagnostics.gated, !side);
        if !side {
            prop_assert_eq!((r.theta, r.v[0]), (0.0, 0.0));
        }
    }

    #[test]
    fn specialised_routes_agree_with_general((cost, e) in pair(), rho in -2.0..2.0f64, m in -2.0..2.0f64, gamma in log_gamma()) {
        let mom = [m];
        let q = ProxQuery::new(rho, &mom, gamma, cost, e);
        let a = prox(&q, 1e-13).unwrap();
        let b = prox_general(&q, 1e-13).unwrap();
        prop_assert!((a.theta - b.theta).abs() <= 1e-9 && (a.v[0] - b.v[0]).abs() <= 1e-9,
            "{:?} vs {:?}", (a.theta, a.v[0]), (b.theta, b.v[0]));
    }

    #[test]
    fn limit_consistency(rho in -2.0..2.0f64, m in -2.0..2.0f64, gamma in log_gamma()) {
        let q = prox_quadratic_limit(1.0, &ProxQuery::new(rho, &[m], gamma, CostSpec::QuadraticLimit { alpha: 1.0 }, None), 1e-13).unwrap();
        let r = prox(&ProxQuery::new(rho, &[m], gamma, CostSpec::Relativistic { alpha: 1.0, k: 1e6 }, None), 1e-13).unwrap();
        prop_assert!((q.theta - r.theta).abs() <= 1e-4 && (q.v[0] - r.v[0]).abs() <= 1e-4);
        let c = prox_cone(1.0, rho, &[m]);
        let r = prox(&ProxQuery::new(rho, &[m], gamma, CostSpec::Relativistic { alpha: 1e8, k: 1.0 }, None), 1e-13).unwrap();
        prop_assert!((c.theta - r.theta).abs() <= 1e-4 && (c.v[0] - r.v[0]).abs() <= 1e-4,
            "{:?} vs {:?}", (c.theta, c.v[0]), (r.theta, r.v[0]));
    }

    #[test]
    fn power_two_is_the_quadratic_cubic(rho in -2.0..2.0f64, m in -2.0..2.0f64, gamma in log_gamma()) {
        let a = prox(&ProxQuery::new(rho, &[m], gamma, CostSpec::power_from_p(2.0), None), 1e-14).unwrap();
        let b = prox_quadratic_limit(1.0, &ProxQuery::new(rho, &[m], gamma, CostSpec::QuadraticLimit { alpha: 1.0 }, None), 1e-14).unwrap();
        prop_assert!((a.theta - b.theta).abs() <= 1e-10 && (a.v[0] - b.v[0]).abs() <= 1e-10);
    }

    #[test]
    fn limit_costs_with_energy_use_general_route(rho in -2.0..2.0f64, m in -2.0..2.0f64, gamma in log_gamma()) {
        for cost in [CostSpec::ConeLimit { k: 1.5 }, CostSpec::QuadraticLimit { alpha: 0.7 }] {
            let mom = [m];
            let q = ProxQuery::new(rho, &mom, gamma, cost, Some(EnergySpec::ENTROPY));
            let r = prox(&q, RTOL).unwrap();
            prop_assert_eq!(r.diagnostics.route, ProxRoute::General);
            let o = brute_force_prox(&q);
            prop_assert!((r.theta - o.theta).abs() <= 1e-6 && (r.v[0] - o.v[0]).abs() <= 1e-6);
        }
    }
}

#[test]
fn routes() {
    assert_eq!(
        prox::route_for(&CostSpec::ConeLimit { k: 1.0 }, None),
        ProxRoute::Cone
    );
    assert_eq!(
        prox::route_for(
            &CostSpec::QuadraticLimit { alpha: 1.0 },
            Some(&EnergySpec::Indicator)
        ),
        ProxRoute::QuadraticLimit
    );
    assert_eq!(
        prox::route_for(
            &CostSpec::Relativistic { alpha: 1.0, k: 1.0 },
            Some(&EnergySpec::ENTROPY)
        ),
        ProxRoute::Relativistic
    );
}
