//! Primal-dual splitting for one implicit step.
//!
//! The step minimises `sum_i h w_i (dt Phi_c(rho_i, m_i) + U(rho_i))` subject to
//! `|A u - b| <= delta`. Both algorithms alternate
//!
//! ```text
//! phi+ = Prox_{sigma i*_B}(phi + sigma A u_bar)
//! u+   = Prox_{lam I}(u - lam grad Psi(u) - lam A^T phi+)
//! ```
//!
//! and differ in the extrapolation `u_bar`. In the joint formulation `Psi = 0`
//! and the energy sits inside the pointwise prox as `F = U / dt`.

use serde::{Deserialize, Serialize};

use crate::constraints::{estimate_operator_norm, ConstraintSystem, LinearOperator};
use crate::costs::CostSpec;
use crate::energies::{compensated_sum, grad_psi_into, EnergyScaling, EnergySpec};
use crate::error::{invalid, Error, Result};
use crate::grid::{norm2, DensityField, GridSpec, MomentumField, PrimalState};
use crate::par::Exec;
use crate::prox::{FieldProx, FieldProxStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Yan,
    CondatVu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Joint,
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSizes {
    Auto,
    Fixed { sigma: f64, lambda: f64 },
}

/// Scale `s` of the substitution `m = s w` under which the iteration runs.
///
/// `Balanced` picks `s = dx_min / dt`, which equalises the density and
/// momentum columns of the continuity operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumScale {
    Unit,
    Balanced,
    Fixed { value: f64 },
}

impl MomentumScale {
    pub fn resolve(&self, grid: &GridSpec, dt: f64) -> f64 {
        match *self {
            MomentumScale::Unit => 1.0,
            MomentumScale::Balanced => {
                let dx = (0..grid.dim())
                    .map(|l| grid.spacing(l))
                    .fold(f64::INFINITY, f64::min);
                (dx / dt).max(1.0)
            }
            MomentumScale::Fixed { value } => value,
        }
    }
}

/// Required margin on the step-size conditions.
pub const STEP_MARGIN: f64 = 0.95;

const NORM_ITERS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PDConfig {
    pub algorithm: Algorithm,
    pub formulation: Formulation,
    pub step_sizes: StepSizes,
    pub tol: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    pub warm_start: bool,
    /// Lower clamp inside `grad Psi` (separate formulation only).
    pub rho_floor: f64,
    pub lambda_cap: f64,
    /// Scalar root tolerance; `None` means `tol / 100`.
    pub prox_rtol: Option<f64>,
    /// Add one-sided continuity rows at boundary nodes.
    pub boundary_continuity: bool,
    pub momentum_scale: MomentumScale,
    pub exec: Exec,
}

impl Default for PDConfig {
    fn default() -> Self {
        PDConfig {
            algorithm: Algorithm::Yan,
            formulation: Formulation::Joint,
            step_sizes: StepSizes::Auto,
            tol: 1e-6,
            tol_feas: 1e-2,
            max_iter: 50_000,
            warm_start: true,
            rho_floor: 1e-10,
            lambda_cap: 1.0,
            prox_rtol: None,
            boundary_continuity: true,
            momentum_scale: MomentumScale::Unit,
            exec: Exec::default(),
        }
    }
}

impl PDConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        if !(self.tol_feas >= 0.0) {
            return Err(invalid("tol_feas", "must be nonnegative"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        if !(self.rho_floor > 0.0) && self.formulation == Formulation::Separate {
            return Err(invalid(
                "rho_floor",
                "separate formulation needs a positive floor",
            ));
        }
        if !(self.lambda_cap > 0.0) {
            return Err(invalid("lambda_cap", "must be positive"));
        }
        if let MomentumScale::Fixed { value } = self.momentum_scale {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(
                    "momentum_scale",
                    format!("must be positive, got {value}"),
                ));
            }
        }
        Ok(())
    }

    fn prox_tolerance(&self) -> f64 {
        self.prox_rtol.unwrap_or(self.tol / 100.0)
    }
}

/// Iterates of the primal-dual method in the scaled variables `(rho, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdState {
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    pub u_bar: Vec<f64>,
    /// Momentum scale `s` with `m = s w`.
    pub scale: f64,
}

impl PdState {
    /// `u` with the momentum block in physical units.
    pub fn physical(&self, nodes: usize) -> Vec<f64> {
        let mut u = self.u.clone();
        u[nodes..].iter_mut().for_each(|v| *v *= self.scale);
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub iterations: usize,
    pub converged: bool,
    /// `|u+ - u| / max(1, |u|)` at the last iteration.
    pub primal_change: f64,
    /// `|A u - b| - delta`.
    pub feasibility: f64,
    pub objective: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub max_root_iterations: usize,
}

/// Result of one implicit step.
#[derive(Debug, Clone)]
pub struct StepSolution {
    pub rho: DensityField,
    pub mom: MomentumField,
    pub stats: StepStats,
    pub state: PdState,
}

/// Euclidean projection onto the closed ball of radius `delta` around `b`.
pub fn project_ball(x: &[f64], b: &[f64], delta: f64, out: &mut [f64]) {
    let dist = x
        .iter()
        .zip(b)
        .map(|(x, b)| (x - b) * (x - b))
        .sum::<f64>()
        .sqrt();
    if dist <= delta {
        out.copy_from_slice(x);
    } else {
        let s = delta / dist;
        for ((o, x), b) in out.iter_mut().zip(x).zip(b) {
            *o = b + s * (x - b);
        }
    }
}

/// `Prox_{sigma i*_B}(w) = w - sigma P_B(w / sigma)` for the ball `B = B_delta(b)`.
pub fn prox_ball_conjugate(sigma: f64, delta: f64, b: &[f64], w: &[f64]) -> Vec<f64> {
    let scaled: Vec<f64> = w.iter().map(|x| x / sigma).collect();
    let mut p = vec![0.0; w.len()];
    project_ball(&scaled, b, delta, &mut p);
    w.iter().zip(&p).map(|(w, p)| w - sigma * p).collect()
}

fn prox_ball_conjugate_in_place(sigma: f64, delta: f64, b: &[f64], w: &mut [f64]) {
    let mut dist2 = 0.0;
    for (x, b) in w.iter().zip(b) {
        let r = x / sigma - b;
        dist2 += r * r;
    }
    let dist = dist2.sqrt();
    let s = if dist <= delta { 1.0 } else { delta / dist };
    for (x, b) in w.iter_mut().zip(b) {
        let p = b + s * (*x / sigma - b);
        *x -= sigma * p;
    }
}

/// Solver for one step: the constraint, the per-node prox and the step sizes.
#[derive(Debug, Clone)]
pub struct JkoStepSolver {
    sys: ConstraintSystem,
    cfg: PDConfig,
    cost: CostSpec,
    energy: EnergySpec,
    prox: FieldProx,
    weights: Vec<f64>,
    sigma: f64,
    lambda: f64,
    lipschitz: f64,
    scale: f64,
}

/// `A diag(I, s I)`.
struct ScaledOperator<'a> {
    sys: &'a ConstraintSystem,
    scale: f64,
}

impl LinearOperator for ScaledOperator<'_> {
    fn nrows(&self) -> usize {
        self.sys.nrows()
    }

    fn ncols(&self) -> usize {
        self.sys.ncols()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.sys.grid().num_nodes();
        let mut y = x.to_vec();
        y[n..].iter_mut().for_each(|v| *v *= self.scale);
        self.sys.apply_into(&y, out);
    }

    fn apply_adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        let n = self.sys.grid().num_nodes();
        self.sys.apply_adjoint_into(w, out);
        out[n..].iter_mut().for_each(|v| *v *= self.scale);
    }
}

impl JkoStepSolver {
    /// `delta = None` picks [`ConstraintSystem::auto_delta`].
    pub fn new(
        grid: &GridSpec,
        cost: CostSpec,
        energy: EnergySpec,
        dt: f64,
        rho_prev: &[f64],
        delta: Option<f64>,
        cfg: PDConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        cost.validate()?;
        energy.validate()?;
        if let Some((node, &value)) = rho_prev
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::NegativeDensity { node, value });
        }
        let sys = ConstraintSystem::build(grid, dt, rho_prev, 0.0, cfg.boundary_continuity)?;
        let delta = delta.unwrap_or_else(|| ConstraintSystem::auto_delta(sys.rhs()));
        let sys = sys.with_delta(delta)?;
        Self::with_system(sys, cost, energy, cfg)
    }

    /// Reuses an assembled constraint.
    pub fn with_system(
        sys: ConstraintSystem,
        cost: CostSpec,
        energy: EnergySpec,
        cfg: PDConfig,
    ) -> Result<Self> {
        let grid = sys.grid().clone();
        let h = grid.cell_volume();
        let weights = grid.trapezoid_weights();
        let dt = sys.dt();
        let scale = cfg.momentum_scale.resolve(&grid, dt);
        let norm = if scale == 1.0 {
            sys.norm_bound()
        } else {
            estimate_operator_norm(&ScaledOperator { sys: &sys, scale }, NORM_ITERS, 0)
        };
        let lipschitz = match cfg.formulation {
            Formulation::Joint => 0.0,
            Formulation::Separate => {
                let ceiling = 2.0 * sys.rhs().iter().fold(0.0f64, |a, &b| a.max(b)) + 1.0;
                let wmax = weights.iter().fold(0.0f64, |a, &b| a.max(b));
                h * wmax * energy.curvature_bound(cfg.rho_floor, ceiling)
            }
        };
        let (sigma, lambda) = match cfg.step_sizes {
            StepSizes::Auto => auto_step_sizes(cfg.algorithm, norm, lipschitz, cfg.lambda_cap),
            StepSizes::Fixed { sigma, lambda } => {
                check_step_sizes(cfg.algorithm, norm, lipschitz, sigma, lambda)?;
                (sigma, lambda)
            }
        };
        // Phi(rho, s w) = mu Phi'(rho, w), so the prox runs on mu Phi' + F / mu
        let (scaled_cost, mu) = cost.argument_scaled(scale);
        let point_energy = match cfg.formulation {
            Formulation::Joint => EnergyScaling::for_step(dt)?.apply(&energy).scaled(1.0 / mu),
            Formulation::Separate => EnergySpec::Indicator,
        };
        let gammas = weights.iter().map(|w| lambda * dt * h * w * mu).collect();
        let prox = FieldProx::new(
            scaled_cost,
            point_energy,
            gammas,
            grid.dim(),
            cfg.prox_tolerance(),
            cfg.exec,
        )?;
        Ok(JkoStepSolver {
            sys,
            cfg,
            cost,
            energy,
            prox,
            weights,
            sigma,
            lambda,
            lipschitz,
            scale,
        })
    }

    pub fn system(&self) -> &ConstraintSystem {
        &self.sys
    }

    pub fn config(&self) -> &PDConfig {
        &self.cfg
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Momentum scale `s` of the iteration variables.
    pub fn momentum_scale(&self) -> f64 {
        self.scale
    }

    /// Lipschitz constant of `grad Psi` used for the step sizes (0 when joint).
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn nodes(&self) -> usize {
        self.sys.grid().num_nodes()
    }

    /// `u = (rho_prev, 0)`, `phi = 0`.
    pub fn cold_state(&self) -> PdState {
        let n = self.nodes();
        let d = self.sys.grid().dim();
        let mut u = vec![0.0; (d + 1) * n];
        let rho_prev = self.previous_density();
        u[..n].copy_from_slice(&rho_prev);
        PdState {
            u_bar: u.clone(),
            u,
            phi: vec![0.0; self.sys.num_rows()],
            scale: self.scale,
        }
    }

    /// Starts from a previous solution; the density block is reset to the new data.
    pub fn warm_state(&self, prev: &PdState) -> Result<PdState> {
        let cold = self.cold_state();
        if prev.u.len() != cold.u.len() || prev.phi.len() != cold.phi.len() {
            return Ok(cold);
        }
        let n = self.nodes();
        let mut u = prev.u.clone();
        u[..n].copy_from_slice(&cold.u[..n]);
        let ratio = prev.scale / self.scale;
        u[n..].iter_mut().for_each(|v| *v *= ratio);
        Ok(PdState {
            u_bar: u.clone(),
            u,
            phi: prev.phi.clone(),
            scale: self.scale,
        })
    }

    /// The density `b_n` the step starts from.
    pub fn previous_density(&self) -> Vec<f64> {
        let n = self.nodes();
        let rhs = self.sys.rhs();
        let mut rho = rhs[..n].to_vec();
        if self.sys.boundary_continuity() {
            for (j, &node) in self.sys.boundary_nodes().iter().enumerate() {
                rho[node] = rhs[n + j];
            }
        }
        rho
    }

    fn grad_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.nodes();
        let h = self.sys.grid().cell_volume();
        grad_psi_into(
            h,
            &self.weights,
            &self.energy,
            &u[..n],
            self.cfg.rho_floor,
            out,
        );
    }

    fn separate(&self) -> bool {
        self.cfg.formulation == Formulation::Separate
            && !matches!(self.energy, EnergySpec::Indicator)
    }

    /// One iteration with the configured extrapolation.
    pub fn iterate(&self, state: &mut PdState) -> Result<FieldProxStats> {
        self.step(state, self.cfg.algorithm)
    }

    /// One iteration with `u_bar = 2u+ - u + lam grad Psi(u) - lam grad Psi(u+)`.
    pub fn yan_iteration(&self, state: &mut PdState) -> Result<FieldProxStats> {
        self.step(state, Algorithm::Yan)
    }

    /// One iteration with `u_bar = 2u+ - u`.
    pub fn condat_vu_iteration(&self, state: &mut PdState) -> Result<FieldProxStats> {
        self.step(state, Algorithm::CondatVu)
    }

    fn step(&self, state: &mut PdState, algorithm: Algorithm) -> Result<FieldProxStats> {
        let n = self.nodes();
        let (sigma, lam) = (self.sigma, self.lambda);
        let rows = self.sys.num_rows();
        let len = state.u.len();

        if state.scale != self.scale {
            return Err(invalid(
                "state",
                format!(
                    "momentum scale {} differs from the solver's {}",
                    state.scale, self.scale
                ),
            ));
        }
        let op = ScaledOperator {
            sys: &self.sys,
            scale: self.scale,
        };
        let mut w = vec![0.0; rows];
        op.apply_into(&state.u_bar, &mut w);
        for (wi, p) in w.iter_mut().zip(&state.phi) {
            *wi = p + sigma * *wi;
        }
        prox_ball_conjugate_in_place(sigma, self.sys.delta(), self.sys.rhs(), &mut w);
        state.phi = w;

        let mut y = vec![0.0; len];
        op.apply_adjoint_into(&state.phi, &mut y);
        let mut grad_old = Vec::new();
        if self.separate() {
            grad_old = vec![0.0; n];
            self.grad_into(&state.u, &mut grad_old);
        }
        for (j, yj) in y.iter_mut().enumerate() {
            let g = if j < grad_old.len() { grad_old[j] } else { 0.0 };
            *yj = state.u[j] - lam * g - lam * *yj;
        }
        let mut u_new = vec![0.0; len];
        let stats = self.prox.apply_from(&y, Some(&state.u[..n]), &mut u_new)?;

        let mut u_bar = vec![0.0; len];
        for j in 0..len {
            u_bar[j] = 2.0 * u_new[j] - state.u[j];
        }
        if algorithm == Algorithm::Yan && self.separate() {
            let mut grad_new = vec![0.0; n];
            self.grad_into(&u_new, &mut grad_new);
            for i in 0..n {
                u_bar[i] += lam * (grad_old[i] - grad_new[i]);
            }
        }
        state.u = u_new;
        state.u_bar = u_bar;
        Ok(stats)
    }

    /// `sum_i h w_i (dt Phi(rho_i, m_i) + U(rho_i))` for physical `u`.
    pub fn objective(&self, u: &[f64]) -> f64 {
        let grid = self.sys.grid();
        let (n, d) = (grid.num_nodes(), grid.dim());
        let h = grid.cell_volume();
        let dt = self.sys.dt();
        h * compensated_sum((0..n).map(|i| {
            let m = (0..d)
                .map(|l| u[(l + 1) * n + i].powi(2))
                .sum::<f64>()
                .sqrt();
            self.weights[i] * (dt * self.cost.perspective(u[i], m) + self.energy.value(u[i]))
        }))
    }

    /// `|A u - b|` for physical `u`.
    pub fn constraint_residual(&self, u: &[f64]) -> f64 {
        let mut r = vec![0.0; self.sys.num_rows()];
        self.sys.apply_into(u, &mut r);
        for (ri, bi) in r.iter_mut().zip(self.sys.rhs()) {
            *ri -= bi;
        }
        norm2(&r)
    }

    /// Residual norm accepted by the stopping rule.
    pub fn feasibility_threshold(&self) -> f64 {
        let delta = self.sys.delta();
        if delta > 0.0 {
            delta * (1.0 + self.cfg.tol_feas)
        } else {
            self.cfg.tol * norm2(self.sys.rhs()).max(1.0)
        }
    }

    /// Iterates from `init` until the stopping rule holds or `max_iter` is reached.
    pub fn solve_from(&self, init: PdState) -> Result<StepSolution> {
        let mut state = init;
        let threshold = self.feasibility_threshold();
        let mut stats = StepStats {
            sigma: self.sigma,
            lambda: self.lambda,
            ..StepStats::default()
        };
        let n = self.nodes();
        let s2 = self.scale * self.scale;
        let mut prev = state.u.clone();
        for it in 1..=self.cfg.max_iter {
            let ps = self.step(&mut state, self.cfg.algorithm)?;
            stats.max_root_iterations = stats.max_root_iterations.max(ps.max_root_iterations);
            let mut diff2 = 0.0;
            let mut norm2_prev = 0.0;
            let mut finite = true;
            for (j, (a, b)) in state.u.iter().zip(&prev).enumerate() {
                let wt = if j < n { 1.0 } else { s2 };
                finite &= a.is_finite();
                diff2 += wt * (a - b) * (a - b);
                norm2_prev += wt * b * b;
            }
            if !finite || state.phi.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged {
                    iteration: it,
                    detail: "non-finite iterate".into(),
                });
            }
            stats.iterations = it;
            stats.primal_change = diff2.sqrt() / norm2_prev.sqrt().max(1.0);
            if stats.primal_change <= self.cfg.tol {
                let res = self.constraint_residual(&state.physical(n));
                if res <= threshold {
                    stats.converged = true;
                    break;
                }
            }
            prev.copy_from_slice(&state.u);
        }
        let u = state.physical(n);
        stats.feasibility = self.constraint_residual(&u) - self.sys.delta();
        stats.objective = self.objective(&u);
        let grid = self.sys.grid();
        let (rho, mom) = PrimalState::from_flat(grid.dim(), n, u)?.into_parts();
        Ok(StepSolution {
            rho,
            mom,
            stats,
            state,
        })
    }

    pub fn solve(&self) -> Result<StepSolution> {
        self.solve_from(self.cold_state())
    }
}

fn auto_step_sizes(alg: Algorithm, norm: f64, lipschitz: f64, cap: f64) -> (f64, f64) {
    let norm2 = (norm * norm).max(f64::MIN_POSITIVE);
    match alg {
        Algorithm::Yan => {
            let lambda = if lipschitz > 0.0 {
                (1.9 / lipschitz).min(cap)
            } else {
                cap
            };
            (STEP_MARGIN / (lambda * norm2), lambda)
        }
        Algorithm::CondatVu => {
            let lambda = if lipschitz > 0.0 {
                (1.0 / lipschitz).min(cap)
            } else {
                cap
            };
            (
                STEP_MARGIN * (1.0 / lambda - lipschitz / 2.0) / norm2,
                lambda,
            )
        }
    }
}

fn check_step_sizes(
    alg: Algorithm,
    norm: f64,
    lipschitz: f64,
    sigma: f64,
    lambda: f64,
) -> Result<()> {
    if !(sigma > 0.0 && lambda > 0.0) {
        return Err(invalid("step_sizes", "sigma and lambda must be positive"));
    }
    let ok = match alg {
        Algorithm::Yan => {
            sigma * lambda * norm * norm <= STEP_MARGIN && lambda * lipschitz <= 2.0 * STEP_MARGIN
        }
        Algorithm::CondatVu => {
            sigma * norm * norm <= STEP_MARGIN * (1.0 / lambda - lipschitz / 2.0)
        }
    };
    if ok {
        Ok(())
    } else {
        Err(invalid(
            "step_sizes",
            format!("sigma = {sigma}, lambda = {lambda} violate the convergence condition with a 5% margin (|A| <= {norm}, L = {lipschitz})"),
        ))
    }
}

/// One implicit step from `rho_prev` with a cold start.
#[allow(clippy::too_many_arguments)]
pub fn solve_jko_step(
    rho_prev: &DensityField,
    cfg: &PDConfig,
    grid: &GridSpec,
    cost: CostSpec,
    energy: EnergySpec,
    dt: f64,
    delta: Option<f64>,
) -> Result<(DensityField, MomentumField, StepStats)> {
    let solver = JkoStepSolver::new(grid, cost, energy, dt, rho_prev, delta, *cfg)?;
    let sol = solver.solve()?;
    Ok((sol.rho, sol.mom, sol.stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (GridSpec, Vec<f64>) {
        let g = GridSpec::uniform_1d(0.0, 1.0, 8).unwrap();
        let rho: Vec<f64> = g
            .nodes_1d()
            .iter()
            .map(|x| 1.0 + 0.5 * (std::f64::consts::PI * x).cos())
            .collect();
        (g, rho)
    }

    #[test]
    fn ball_conjugate_prox() {
        let b = [1.0, -2.0, 0.5];
        let w = [0.3, 0.7, -1.1];
        let r = prox_ball_conjugate(2.0, 0.0, &b, &w);
        for i in 0..3 {
            assert!((r[i] - (w[i] - 2.0 * b[i])).abs() < 1e-15);
        }
        let inside = [2.0 * 1.0, 2.0 * -2.0, 2.0 * 0.5];
        assert!(prox_ball_conjugate(2.0, 0.1, &b, &inside)
            .iter()
            .all(|x| x.abs() < 1e-15));
        let r = prox_ball_conjugate(0.7, 0.4, &b, &w);
        let mut p = vec![0.0; 3];
        project_ball(&w.map(|x| x / 0.7), &b, 0.4, &mut p);
        for i in 0..3 {
            assert!((r[i] + 0.7 * p[i] - w[i]).abs() < 1e-14);
        }
        let mut inplace = w;
        prox_ball_conjugate_in_place(0.7, 0.4, &b, &mut inplace);
        for i in 0..3 {
            assert!((inplace[i] - r[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_state_is_a_fixed_point() {
        let g = GridSpec::uniform_1d(0.0, 1.0, 8).unwrap();
        let rho = vec![0.7; 9];
        for alg in [Algorithm::Yan, Algorithm::CondatVu] {
            let cfg = PDConfig {
                algorithm: alg,
                ..PDConfig::default()
            };
            let s = JkoStepSolver::new(
                &g,
                CostSpec::Power { q: 2.0 },
                EnergySpec::Indicator,
                0.01,
                &rho,
                None,
                cfg,
            )
            .unwrap();
            let mut st = s.cold_state();
            let before = st.clone();
            s.iterate(&mut st).unwrap();
            for (a, b) in st.u.iter().zip(&before.u) {
                assert!((a - b).abs() <= 1e-14);
            }
            assert!(st.phi.iter().all(|p| p.abs() <= 1e-14));
        }
    }

    #[test]
    fn yan_and_condat_vu_coincide_without_gradient() {
        let (g, rho) = small();
        let e = EnergySpec::Power {
            eta: 2.0,
            kappa: 1.0,
        };
        let mk = |alg| {
            let cfg = PDConfig {
                algorithm: alg,
                step_sizes: StepSizes::Fixed {
                    sigma: 0.5,
                    lambda: 0.5,
                },
                ..PDConfig::default()
            };
            JkoStepSolver::new(&g, CostSpec::Power { q: 2.0 }, e, 0.05, &rho, None, cfg).unwrap()
        };
        let (a, b) = (mk(Algorithm::Yan), mk(Algorithm::CondatVu));
        let (mut sa, mut sb) = (a.cold_state(), b.cold_state());
        for _ in 0..25 {
            a.iterate(&mut sa).unwrap();
            b.iterate(&mut sb).unwrap();
            assert_eq!(sa, sb);
        }
    }

    #[test]
    fn momentum_scale_leaves_the_solution_unchanged() {
        let (g, rho) = small();
        let solve = |cost, scale| {
            let cfg = PDConfig {
                tol: 1e-11,
                max_iter: 400_000,
                momentum_scale: scale,
                ..PDConfig::default()
            };
            let s = JkoStepSolver::new(&g, cost, EnergySpec::ENTROPY, 0.05, &rho, Some(0.0), cfg)
                .unwrap();
            let sol = s.solve().unwrap();
            assert!(sol.stats.converged);
            (sol.rho, sol.mom)
        };
        for cost in [
            CostSpec::Power { q: 1.5 },
            CostSpec::Relativistic { alpha: 1.0, k: 2.0 },
        ] {
            let (r0, m0) = solve(cost, MomentumScale::Unit);
            for scale in [MomentumScale::Fixed { value: 3.0 }, MomentumScale::Balanced] {
                let (r, m) = solve(cost, scale);
                for i in 0..rho.len() {
                    assert!((r[i] - r0[i]).abs() <= 1e-7, "{cost:?} {scale:?} rho");
                    assert!(
                        (m.axis(0)[i] - m0.axis(0)[i]).abs() <= 1e-7,
                        "{cost:?} {scale:?} m"
                    );
                }
            }
        }
    }

    #[test]
    fn warm_state_converts_between_scales() {
        let (g, rho) = small();
        let mk = |value| {
            let cfg = PDConfig {
                momentum_scale: MomentumScale::Fixed { value },
                ..PDConfig::default()
            };
            JkoStepSolver::new(
                &g,
                CostSpec::Power { q: 2.0 },
                EnergySpec::ENTROPY,
                0.05,
                &rho,
                None,
                cfg,
            )
            .unwrap()
        };
        let (a, b) = (mk(2.0), mk(8.0));
        let mut st = a.cold_state();
        for _ in 0..50 {
            a.iterate(&mut st).unwrap();
        }
        let warm = b.warm_state(&st).unwrap();
        let n = rho.len();
        assert_eq!(warm.scale, 8.0);
        for (x, y) in st.physical(n)[n..].iter().zip(&warm.physical(n)[n..]) {
            assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
        }
        let mut mismatched = a.cold_state();
        assert!(b.iterate(&mut mismatched).is_err());
    }

    #[test]
    fn auto_step_sizes_respect_conditions() {
        let (g, rho) = small();
        for alg in [Algorithm::Yan, Algorithm::CondatVu] {
            for form in [Formulation::Joint, Formulation::Separate] {
                let cfg = PDConfig {
                    algorithm: alg,
                    formulation: form,
                    rho_floor: 1e-3,
                    ..PDConfig::default()
                };
                let s = JkoStepSolver::new(
                    &g,
                    CostSpec::Power { q: 2.0 },
                    EnergySpec::ENTROPY,
                    0.01,
                    &rho,
                    None,
                    cfg,
                )
                .unwrap();
                let nrm = s.system().norm_bound();
                check_step_sizes(
                    alg,
                    nrm,
                    s.lipschitz(),
                    s.sigma(),
                    s.lambda() * (1.0 - 1e-12),
                )
                .unwrap();
                assert!(s.lambda() <= 1.0);
            }
        }
    }

    #[test]
    fn rejects_unsafe_fixed_steps() {
        let (g, rho) = small();
        let cfg = PDConfig {
            step_sizes: StepSizes::Fixed {
                sigma: 10.0,
                lambda: 1.0,
            },
            ..PDConfig::default()
        };
        assert!(JkoStepSolver::new(
            &g,
            CostSpec::Power { q: 2.0 },
            EnergySpec::Indicator,
            0.01,
            &rho,
            None,
            cfg
        )
        .is_err());
    }

    #[test]
    fn stationary_constant_density() {
        let g = GridSpec::uniform_1d(-1.0, 1.0, 20).unwrap();
        let rho = DensityField::constant(21, 0.5);
        let cfg = PDConfig::default();
        let (r, m, stats) = solve_jko_step(
            &rho,
            &cfg,
            &g,
            CostSpec::power_from_p(3.0),
            EnergySpec::Power {
                eta: 1.5,
                kappa: 1.0,
            },
            0.01,
            None,
        )
        .unwrap();
        assert!(stats.converged);
        assert!(r.iter().all(|x| (x - 0.5).abs() < 1e-5), "{:?}", r.0);
        assert!(m.max_abs() < 1e-5);
    }

    #[test]
    fn rejects_negative_previous_density() {
        let g = GridSpec::uniform_1d(0.0, 1.0, 4).unwrap();
        let err = JkoStepSolver::new(
            &g,
            CostSpec::Power { q: 2.0 },
            EnergySpec::Indicator,
            0.1,
            &[1.0, -1.0, 1.0, 1.0, 1.0],
            None,
            PDConfig::default(),
        );
        assert!(matches!(err, Err(Error::NegativeDensity { node: 1, .. })));
    }
}
