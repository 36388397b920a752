//! Discrete continuity equation and no-flux boundary rows.
//!
//! For a previous density `rho_n` and a step `dt`, the constraint operator `A`
//! maps a primal state `(rho, m)` to one value per row:
//!
//! * interior node `i`: `rho_i + dt * sum_l D_l (m_l)_i`, centered differences;
//! * boundary node `i`: `sum_l (m_l)_i * nu_l(x_i)`, outward normal `nu`.
//!
//! With `boundary_continuity` enabled, every boundary node also gets a second
//! row `rho_i + dt * sum_l D~_l (m_l)_i` where `D~_l` falls back to a one-sided
//! difference on the faces. These extra rows are appended after the `|I|`
//! node-indexed rows, in boundary-node order.

use crate::error::{invalid, Error, Result};
use crate::grid::{dot, norm2, GridSpec, PrimalState};
use crate::rng::{seeded, standard_normal};

/// Safety factor applied to power-iteration norm estimates.
pub const NORM_SAFETY: f64 = 1.01;

/// Power iterations used for the cached norm bound.
const CACHED_NORM_ITERS: usize = 400;

/// A real matrix available only through its action and the action of its transpose.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `out = A x`
    fn apply_into(&self, x: &[f64], out: &mut [f64]);
    /// `out = A^T w`
    fn apply_adjoint_into(&self, w: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AxisPos {
    Lower,
    Middle,
    Upper,
}

/// The linear constraint `|A u - b_n| <= delta` of one implicit step.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    grid: GridSpec,
    dt: f64,
    rhs: Vec<f64>,
    delta: f64,
    boundary_continuity: bool,
    strides: Vec<usize>,
    spacings: Vec<f64>,
    /// `pos[node * d + l]`
    pos: Vec<AxisPos>,
    /// Outward unit normal per node, zero at interior nodes; `normals[node * d + l]`.
    normals: Vec<f64>,
    boundary: Vec<usize>,
    norm_bound: f64,
}

impl ConstraintSystem {
    /// Assembles the constraint for one step starting from `rho_prev`.
    pub fn build(
        grid: &GridSpec,
        dt: f64,
        rho_prev: &[f64],
        delta: f64,
        boundary_continuity: bool,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(invalid(
                "delta",
                format!("must be nonnegative, got {delta}"),
            ));
        }
        if grid.cells().iter().any(|&n| n < 2) {
            return Err(Error::InvalidGrid(
                "every axis needs at least 2 cells".into(),
            ));
        }
        let n = grid.num_nodes();
        if rho_prev.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                actual: rho_prev.len(),
            });
        }
        let d = grid.dim();
        let strides = grid.strides();
        let spacings: Vec<f64> = (0..d).map(|l| grid.spacing(l)).collect();
        let mut pos = Vec::with_capacity(n * d);
        let mut normals = vec![0.0; n * d];
        let mut boundary = Vec::new();
        let mut idx = vec![0; d];
        for node in 0..n {
            grid.multi_index(node, &mut idx);
            let mut on_face = false;
            for l in 0..d {
                let p = if idx[l] == 0 {
                    normals[node * d + l] = -1.0;
                    on_face = true;
                    AxisPos::Lower
                } else if idx[l] == grid.cells()[l] {
                    normals[node * d + l] = 1.0;
                    on_face = true;
                    AxisPos::Upper
                } else {
                    AxisPos::Middle
                };
                pos.push(p);
            }
            if on_face {
                // corners and edges: normalized sum of the adjacent face normals
                let nrm = norm2(&normals[node * d..(node + 1) * d]);
                for v in &mut normals[node * d..(node + 1) * d] {
                    *v /= nrm;
                }
                boundary.push(node);
            }
        }

        let rows = n + if boundary_continuity {
            boundary.len()
        } else {
            0
        };
        let mut rhs = vec![0.0; rows];
        for node in 0..n {
            if boundary.binary_search(&node).is_err() {
                rhs[node] = rho_prev[node];
            }
        }
        if boundary_continuity {
            for (j, &node) in boundary.iter().enumerate() {
                rhs[n + j] = rho_prev[node];
            }
        }

        let mut sys = ConstraintSystem {
            grid: grid.clone(),
            dt,
            rhs,
            delta,
            boundary_continuity,
            strides,
            spacings,
            pos,
            normals,
            boundary,
            norm_bound: 0.0,
        };
        sys.norm_bound = estimate_operator_norm(&sys, CACHED_NORM_ITERS, 0);
        Ok(sys)
    }

    /// Scale-aware default ball radius `1e-6 * sqrt(rows) * max(1, |b| / sqrt(rows))`.
    pub fn auto_delta(rhs: &[f64]) -> f64 {
        let rows = rhs.len() as f64;
        1e-6 * rows.sqrt() * (norm2(rhs) / rows.sqrt()).max(1.0)
    }

    /// The same system with another ball radius.
    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(invalid(
                "delta",
                format!("must be nonnegative, got {delta}"),
            ));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn boundary_continuity(&self) -> bool {
        self.boundary_continuity
    }

    /// Cached upper bound on `||A||` (power iteration times [`NORM_SAFETY`]).
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    /// Outward normal at `node` (zero vector for interior nodes).
    pub fn normal(&self, node: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.normals[node * d..(node + 1) * d]
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    /// Rows that encode a continuity equation (interior rows plus appended boundary rows).
    pub fn continuity_rows(&self) -> Vec<usize> {
        let n = self.grid.num_nodes();
        let mut rows: Vec<usize> = (0..n)
            .filter(|i| self.boundary.binary_search(i).is_err())
            .collect();
        if self.boundary_continuity {
            rows.extend(n..n + self.boundary.len());
        }
        rows
    }

    /// Row weights `g` with `g^T A u = h sum_i w_i rho_i` for every `u`, so that
    /// the trapezoid mass moves by `g^T (A u - b)` over a step. `None` when no such
    /// weights exist (no boundary continuity rows, or tangential boundary fluxes).
    pub fn mass_functional(&self) -> Option<Vec<f64>> {
        if !self.boundary_continuity {
            return None;
        }
        let n = self.grid.num_nodes();
        let d = self.grid.dim();
        let h = self.grid.cell_volume();
        let w = self.grid.trapezoid_weights();
        let mut g = vec![0.0; self.num_rows()];
        for node in 0..n {
            if self.boundary.binary_search(&node).is_err() {
                g[node] = h * w[node];
            }
        }
        for (j, &node) in self.boundary.iter().enumerate() {
            g[n + j] = h * w[node];
        }
        let mut v = vec![0.0; (d + 1) * n];
        self.apply_adjoint_into(&g, &mut v);
        // the normal rows absorb what the continuity rows leave on boundary momenta
        for &node in &self.boundary {
            let nu = self.normal(node);
            g[node] = -(0..d).map(|l| v[(l + 1) * n + node] * nu[l]).sum::<f64>();
        }
        self.apply_adjoint_into(&g, &mut v);
        let scale = h * self.dt / self.spacings.iter().cloned().fold(f64::INFINITY, f64::min);
        let exact = (0..n).all(|i| (v[i] - h * w[i]).abs() <= 1e-12 * h)
            && v[n..].iter().all(|x| x.abs() <= 1e-12 * scale);
        exact.then_some(g)
    }

    /// `A u`, one value per row.
    pub fn apply(&self, u: &PrimalState) -> Result<Vec<f64>> {
        self.check_state(u)?;
        let mut out = vec![0.0; self.num_rows()];
        self.apply_into(u.as_flat(), &mut out);
        Ok(out)
    }

    /// `A^T w` as a primal state.
    pub fn apply_adjoint(&self, w: &[f64]) -> Result<PrimalState> {
        if w.len() != self.num_rows() {
            return Err(Error::ShapeMismatch {
                expected: self.num_rows(),
                actual: w.len(),
            });
        }
        let d = self.grid.dim();
        let n = self.grid.num_nodes();
        let mut out = vec![0.0; (d + 1) * n];
        self.apply_adjoint_into(w, &mut out);
        PrimalState::from_flat(d, n, out)
    }

    /// `A u - b_n`.
    pub fn residual(&self, u: &PrimalState) -> Result<Vec<f64>> {
        let mut r = self.apply(u)?;
        for (ri, bi) in r.iter_mut().zip(&self.rhs) {
            *ri -= bi;
        }
        Ok(r)
    }

    /// Dense copy of `A`, row-major, assembled by applying `A` to unit vectors.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let cols = self.ncols();
        let mut dense = vec![vec![0.0; cols]; self.nrows()];
        let mut e = vec![0.0; cols];
        let mut col = vec![0.0; self.nrows()];
        for j in 0..cols {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            for (row, v) in dense.iter_mut().zip(&col) {
                row[j] = *v;
            }
            e[j] = 0.0;
        }
        dense
    }

    fn check_state(&self, u: &PrimalState) -> Result<()> {
        let expected = self.ncols();
        if u.as_flat().len() != expected || u.dim() != self.grid.dim() {
            return Err(Error::ShapeMismatch {
                expected,
                actual: u.as_flat().len(),
            });
        }
        Ok(())
    }

    #[inline]
    fn centered(&self, m: &[f64], node: usize, l: usize) -> f64 {
        let s = self.strides[l];
        (m[node + s] - m[node - s]) / (2.0 * self.spacings[l])
    }

    #[inline]
    fn one_sided(&self, m: &[f64], node: usize, l: usize) -> f64 {
        let s = self.strides[l];
        let d = self.grid.dim();
        match self.pos[node * d + l] {
            AxisPos::Lower => (m[node + s] - m[node]) / self.spacings[l],
            AxisPos::Upper => (m[node] - m[node - s]) / self.spacings[l],
            AxisPos::Middle => self.centered(m, node, l),
        }
    }
}

impl LinearOperator for ConstraintSystem {
    fn nrows(&self) -> usize {
        self.rhs.len()
    }

    fn ncols(&self) -> usize {
        (self.grid.dim() + 1) * self.grid.num_nodes()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.grid.dim();
        let n = self.grid.num_nodes();
        let rho = &x[..n];
        let dt = self.dt;
        let mut b = 0;
        for node in 0..n {
            if b < self.boundary.len() && self.boundary[b] == node {
                let nu = &self.normals[node * d..(node + 1) * d];
                out[node] = (0..d).map(|l| x[(l + 1) * n + node] * nu[l]).sum();
                b += 1;
            } else {
                let div: f64 = (0..d)
                    .map(|l| self.centered(&x[(l + 1) * n..(l + 2) * n], node, l))
                    .sum();
                out[node] = rho[node] + dt * div;
            }
        }
        if self.boundary_continuity {
            for (j, &node) in self.boundary.iter().enumerate() {
                let div: f64 = (0..d)
                    .map(|l| self.one_sided(&x[(l + 1) * n..(l + 2) * n], node, l))
                    .sum();
                out[n + j] = rho[node] + dt * div;
            }
        }
    }

    fn apply_adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        let d = self.grid.dim();
        let n = self.grid.num_nodes();
        let dt = self.dt;
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut b = 0;
        for node in 0..n {
            let wi = w[node];
            if b < self.boundary.len() && self.boundary[b] == node {
                for l in 0..d {
                    out[(l + 1) * n + node] += self.normals[node * d + l] * wi;
                }
                b += 1;
            } else {
                out[node] += wi;
                for l in 0..d {
                    let s = self.strides[l];
                    let c = dt * wi / (2.0 * self.spacings[l]);
                    out[(l + 1) * n + node + s] += c;
                    out[(l + 1) * n + node - s] -= c;
                }
            }
        }
        if self.boundary_continuity {
            for (j, &node) in self.boundary.iter().enumerate() {
                let wj = w[n + j];
                out[node] += wj;
                for l in 0..d {
                    let s = self.strides[l];
                    let base = (l + 1) * n;
                    match self.pos[node * d + l] {
                        AxisPos::Lower => {
                            let c = dt * wj / self.spacings[l];
                            out[base + node + s] += c;
                            out[base + node] -= c;
                        }
                        AxisPos::Upper => {
                            let c = dt * wj / self.spacings[l];
                            out[base + node] += c;
                            out[base + node - s] -= c;
                        }
                        AxisPos::Middle => {
                            let c = dt * wj / (2.0 * self.spacings[l]);
                            out[base + node + s] += c;
                            out[base + node - s] -= c;
                        }
                    }
                }
            }
        }
    }
}

/// Upper estimate of `||A||` by power iteration on `A^T A` from a seeded start.
///
/// The returned value is the largest Rayleigh-quotient estimate seen, inflated
/// by [`NORM_SAFETY`]. It never decreases as `iters` grows.
pub fn estimate_operator_norm<O: LinearOperator + ?Sized>(op: &O, iters: usize, seed: u64) -> f64 {
    let cols = op.ncols();
    let mut rng = seeded(seed);
    let mut x: Vec<f64> = (0..cols).map(|_| standard_normal(&mut rng)).collect();
    let mut ax = vec![0.0; op.nrows()];
    let mut best: f64 = 0.0;
    let nx = norm2(&x);
    if nx == 0.0 {
        return 0.0;
    }
    x.iter_mut().for_each(|v| *v /= nx);
    for _ in 0..iters.max(1) {
        op.apply_into(&x, &mut ax);
        let est = norm2(&ax);
        best = best.max(est);
        op.apply_adjoint_into(&ax, &mut x);
        let nx = norm2(&x);
        if nx == 0.0 {
            break;
        }
        x.iter_mut().for_each(|v| *v /= nx);
    }
    best * NORM_SAFETY
}

/// Inner product on primal vectors, exposed for adjoint checks.
pub fn primal_dot(a: &PrimalState, b: &PrimalState) -> f64 {
    dot(a.as_flat(), b.as_flat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DensityField, MomentumField};

    fn grid1(n: usize, len: f64) -> GridSpec {
        GridSpec::uniform_1d(0.0, len, n).unwrap()
    }

    #[test]
    fn zero_momentum_reproduces_previous_density() {
        let g = grid1(4, 1.0);
        let prev = vec![0.7; 5];
        let sys = ConstraintSystem::build(&g, 0.1, &prev, 0.0, false).unwrap();
        let u = PrimalState::new(DensityField(prev.clone()), MomentumField::zeros(1, 5)).unwrap();
        let au = sys.apply(&u).unwrap();
        assert_eq!(au, vec![0.0, 0.7, 0.7, 0.7, 0.0]);
        assert!(sys.residual(&u).unwrap().iter().all(|r| *r == 0.0));
        assert_eq!(sys.rhs(), &[0.0, 0.7, 0.7, 0.7, 0.0]);
    }

    #[test]
    fn boundary_rows_pick_outward_momentum() {
        let g = grid1(4, 1.0);
        let sys = ConstraintSystem::build(&g, 0.1, &[1.0; 5], 0.0, false).unwrap();
        let mut u = PrimalState::zeros(1, 5);
        u.momentum_mut(0)
            .copy_from_slice(&[0.3, 0.0, 0.0, 0.0, -0.2]);
        let au = sys.apply(&u).unwrap();
        assert_eq!(au[0], -0.3);
        assert_eq!(au[4], -0.2);
    }

    #[test]
    fn mass_functional_tracks_trapezoid_mass() {
        let g = grid1(9, 1.8);
        let prev: Vec<f64> = (0..10).map(|i| 1.0 + 0.1 * i as f64).collect();
        let sys = ConstraintSystem::build(&g, 0.07, &prev, 0.0, true).unwrap();
        let gvec = sys
            .mass_functional()
            .expect("1-D systems have a mass functional");
        let mut u = PrimalState::zeros(1, 10);
        for i in 0..10 {
            u.density_mut()[i] = (0.3 * i as f64).sin().abs();
            u.momentum_mut(0)[i] = (1.7 * i as f64).cos();
        }
        let r = sys.residual(&u).unwrap();
        let drift = DensityField(u.density().to_vec()).mass(&g) - DensityField(prev).mass(&g);
        let pred: f64 = gvec.iter().zip(&r).map(|(a, b)| a * b).sum();
        assert!((drift - pred).abs() < 1e-13, "{drift} vs {pred}");
        assert!(ConstraintSystem::build(&g, 0.07, &[1.0; 10], 0.0, false)
            .unwrap()
            .mass_functional()
            .is_none());
    }

    #[test]
    fn zero_state_maps_to_zero() {
        let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![3, 4]).unwrap();
        let sys = ConstraintSystem::build(&g, 0.05, &[1.0; 20], 1e-6, true).unwrap();
        let u = PrimalState::zeros(2, 20);
        assert!(sys.apply(&u).unwrap().iter().all(|v| *v == 0.0));
        let w = vec![0.0; sys.num_rows()];
        assert!(sys
            .apply_adjoint(&w)
            .unwrap()
            .as_flat()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn row_structure() {
        let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![4, 5]).unwrap();
        let n = g.num_nodes();
        let sys = ConstraintSystem::build(&g, 0.05, &vec![1.0; n], 0.0, false).unwrap();
        let dense = sys.to_dense();
        for (i, row) in dense.iter().enumerate() {
            let rho_nz = row[..n].iter().filter(|v| **v != 0.0).count();
            let mom_nz = row[n..].iter().filter(|v| **v != 0.0).count();
            if g.is_boundary(i) {
                assert_eq!(rho_nz, 0);
                for (j, v) in row[n..].iter().enumerate() {
                    if *v != 0.0 {
                        assert_eq!(j % n, i);
                    }
                }
            } else {
                assert_eq!(rho_nz, 1);
                assert_eq!(mom_nz, 4);
            }
        }
    }

    #[test]
    fn corner_normal_is_normalized_diagonal() {
        let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2]).unwrap();
        let sys = ConstraintSystem::build(&g, 0.1, &[1.0; 9], 0.0, false).unwrap();
        let s = 0.5f64.sqrt();
        let close = |a: &[f64], b: [f64; 2]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(sys.normal(0), [-s, -s]));
        assert!(close(sys.normal(8), [s, s]));
        assert_eq!(sys.normal(1), &[-1.0, 0.0]);
        assert_eq!(sys.normal(4), &[0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = grid1(4, 1.0);
        assert!(ConstraintSystem::build(&g, 0.0, &[1.0; 5], 0.0, false).is_err());
        assert!(ConstraintSystem::build(&g, 0.1, &[1.0; 5], -1.0, false).is_err());
        assert!(ConstraintSystem::build(&g, 0.1, &[1.0; 4], 0.0, false).is_err());
        let sys = ConstraintSystem::build(&g, 0.1, &[1.0; 5], 0.0, false).unwrap();
        assert!(sys.apply(&PrimalState::zeros(1, 4)).is_err());
        assert!(sys.apply_adjoint(&[0.0; 3]).is_err());
    }

    #[test]
    fn boundary_continuity_conserves_trapezoid_mass() {
        let g = grid1(10, 1.0);
        let sys = ConstraintSystem::build(&g, 0.1, &[1.0; 11], 0.0, true).unwrap();
        assert_eq!(sys.num_rows(), 13);
        // any momentum with zero boundary values leaves the weighted continuity sum unchanged
        let mut u = PrimalState::zeros(1, 11);
        for (i, m) in u.momentum_mut(0).iter_mut().enumerate().skip(1).take(9) {
            *m = (i as f64 * 0.7).sin();
        }
        let au = sys.apply(&u).unwrap();
        let w = g.trapezoid_weights();
        // weights of the continuity rows: interior nodes weight 1, appended boundary rows 1/2
        let mut total = 0.0;
        for i in 1..10 {
            total += w[i] * au[i];
        }
        total += 0.5 * au[11] + 0.5 * au[12];
        assert!(total.abs() < 1e-13, "{total}");
    }

    #[test]
    fn norm_estimate_monotone_in_iterations() {
        let g = grid1(10, 1.0);
        let sys = ConstraintSystem::build(&g, 0.01, &[1.0; 11], 0.0, false).unwrap();
        let mut last = 0.0;
        for iters in [1, 2, 5, 10, 50, 200] {
            let e = estimate_operator_norm(&sys, iters, 7);
            assert!(e >= last);
            last = e;
        }
        assert_eq!(
            estimate_operator_norm(&sys, 30, 3),
            estimate_operator_norm(&sys, 30, 3)
        );
    }

    struct Zero;
    impl LinearOperator for Zero {
        fn nrows(&self) -> usize {
            3
        }
        fn ncols(&self) -> usize {
            4
        }
        fn apply_into(&self, _x: &[f64], out: &mut [f64]) {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
        fn apply_adjoint_into(&self, _w: &[f64], out: &mut [f64]) {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    #[test]
    fn zero_operator_has_zero_norm() {
        assert_eq!(estimate_operator_norm(&Zero, 10, 0), 0.0);
    }
}
