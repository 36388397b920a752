//! Hyperrectangular node grids and the fields that live on them.
//!
//! Nodes are numbered in row-major order: axis 0 varies slowest. A node with
//! multi-index `i` sits at `x_i = a + i * dx`, so both endpoints of every axis
//! carry a node and an axis with `N` cells has `N + 1` nodes.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[a_1, b_1] x ... x [a_d, b_d]` split into `N_l` cells per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let d = lower.len();
        if d == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if upper.len() != d || cells.len() != d {
            return Err(Error::InvalidGrid(format!(
                "axis arrays disagree in length: a has {}, b has {}, n has {}",
                d,
                upper.len(),
                cells.len()
            )));
        }
        for l in 0..d {
            if !(lower[l].is_finite() && upper[l].is_finite() && lower[l] < upper[l]) {
                return Err(Error::InvalidGrid(format!(
                    "axis {l}: need finite a < b, got [{}, {}]",
                    lower[l], upper[l]
                )));
            }
            if cells[l] < 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {l}: need at least 2 cells, got {}",
                    cells[l]
                )));
            }
        }
        Ok(GridSpec {
            lower,
            upper,
            cells,
        })
    }

    /// One-dimensional grid on `[a, b]` with `n` cells.
    pub fn uniform_1d(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(vec![a], vec![b], vec![n])
    }

    /// One-dimensional grid on `[a, b]` whose spacing is as close as possible to `dx`.
    pub fn with_spacing_1d(a: f64, b: f64, dx: f64) -> Result<Self> {
        let n = ((b - a) / dx).round() as usize;
        Self::uniform_1d(a, b, n)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.cells[axis] as f64
    }

    /// Cell volume `h = dx_1 * ... * dx_d`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|l| self.spacing(l)).product()
    }

    /// `|I| = prod (N_l + 1)`.
    pub fn num_nodes(&self) -> usize {
        self.cells.iter().map(|n| n + 1).product()
    }

    /// Number of cells `|I^|`.
    pub fn num_cells(&self) -> usize {
        self.cells.iter().product()
    }

    /// Flat-index stride of each axis.
    pub fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut strides = vec![1; d];
        for l in (0..d.saturating_sub(1)).rev() {
            strides[l] = strides[l + 1] * (self.cells[l + 1] + 1);
        }
        strides
    }

    pub fn multi_index(&self, node: usize, out: &mut [usize]) {
        let mut rest = node;
        for l in (0..self.dim()).rev() {
            let n = self.cells[l] + 1;
            out[l] = rest % n;
            rest /= n;
        }
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.cells)
            .fold(0, |acc, (&i, &n)| acc * (n + 1) + i)
    }

    /// Coordinate of `node` along `axis`.
    pub fn coordinate(&self, node: usize, axis: usize) -> f64 {
        let stride = self.strides()[axis];
        let i = (node / stride) % (self.cells[axis] + 1);
        self.lower[axis] + i as f64 * self.spacing(axis)
    }

    /// Node coordinates of a one-dimensional grid.
    pub fn nodes_1d(&self) -> Vec<f64> {
        let dx = self.spacing(0);
        (0..=self.cells[0])
            .map(|i| self.lower[0] + i as f64 * dx)
            .collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let mut rest = node;
        for l in (0..self.dim()).rev() {
            let n = self.cells[l] + 1;
            let i = rest % n;
            if i == 0 || i == self.cells[l] {
                return true;
            }
            rest /= n;
        }
        false
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(move |&i| !self.is_boundary(i))
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(move |&i| self.is_boundary(i))
    }

    /// Whether `node` belongs to the cell index set (no coordinate equals `N_l`).
    pub fn is_cell_index(&self, node: usize) -> bool {
        let mut rest = node;
        for l in (0..self.dim()).rev() {
            let n = self.cells[l] + 1;
            if rest % n == self.cells[l] {
                return false;
            }
            rest /= n;
        }
        true
    }

    /// Tensor trapezoid weights: `1/2` per axis on which the node sits on a face.
    ///
    /// `h * sum_i w_i f_i` integrates the piecewise linear interpolant of `f`, and
    /// `sum_i w_i = |I^|`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let d = self.dim();
        let mut idx = vec![0; d];
        (0..self.num_nodes())
            .map(|node| {
                self.multi_index(node, &mut idx);
                idx.iter()
                    .zip(&self.cells)
                    .map(|(&i, &n)| if i == 0 || i == n { 0.5 } else { 1.0 })
                    .product()
            })
            .collect()
    }

    /// Evaluates `f` at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> DensityField {
        let d = self.dim();
        let strides = self.strides();
        let mut x = vec![0.0; d];
        let values = (0..self.num_nodes())
            .map(|node| {
                for l in 0..d {
                    let i = (node / strides[l]) % (self.cells[l] + 1);
                    x[l] = self.lower[l] + i as f64 * self.spacing(l);
                }
                f(&x)
            })
            .collect();
        DensityField(values)
    }
}

/// One density value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField(pub Vec<f64>);

impl DensityField {
    pub fn zeros(n: usize) -> Self {
        DensityField(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        DensityField(vec![value; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Trapezoid-weighted mass `h * sum_i w_i rho_i`.
    pub fn mass(&self, grid: &GridSpec) -> f64 {
        let h = grid.cell_volume();
        h * self
            .0
            .iter()
            .zip(grid.trapezoid_weights())
            .map(|(r, w)| r * w)
            .sum::<f64>()
    }
}

impl Deref for DensityField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DensityField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DensityField {
    fn from(v: Vec<f64>) -> Self {
        DensityField(v)
    }
}

/// `d` momentum components per node, stored axis by axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumField {
    dim: usize,
    data: Vec<f64>,
}

impl MomentumField {
    pub fn zeros(dim: usize, nodes: usize) -> Self {
        MomentumField {
            dim,
            data: vec![0.0; dim * nodes],
        }
    }

    pub fn from_components(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch {
                expected: dim,
                actual: data.len(),
            });
        }
        Ok(MomentumField { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn axis(&self, l: usize) -> &[f64] {
        let n = self.num_nodes();
        &self.data[l * n..(l + 1) * n]
    }

    pub fn axis_mut(&mut self, l: usize) -> &mut [f64] {
        let n = self.num_nodes();
        &mut self.data[l * n..(l + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// The primal unknown `u = (rho, m)` as one flat vector of length `(d + 1) |I|`.
///
/// Layout: the density block first, then one momentum block per axis, each in
/// row-major node order.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalState {
    nodes: usize,
    dim: usize,
    data: Vec<f64>,
}

impl PrimalState {
    pub fn zeros(dim: usize, nodes: usize) -> Self {
        PrimalState {
            nodes,
            dim,
            data: vec![0.0; (dim + 1) * nodes],
        }
    }

    pub fn new(rho: DensityField, mom: MomentumField) -> Result<Self> {
        let nodes = rho.len();
        if mom.num_nodes() != nodes {
            return Err(Error::ShapeMismatch {
                expected: nodes * mom.dim(),
                actual: mom.data.len(),
            });
        }
        let dim = mom.dim();
        let mut data = rho.0;
        data.extend_from_slice(&mom.data);
        Ok(PrimalState { nodes, dim, data })
    }

    pub fn from_flat(dim: usize, nodes: usize, data: Vec<f64>) -> Result<Self> {
        let expected = (dim + 1) * nodes;
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(PrimalState { nodes, dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn density(&self) -> &[f64] {
        &self.data[..self.nodes]
    }

    pub fn density_mut(&mut self) -> &mut [f64] {
        &mut self.data[..self.nodes]
    }

    pub fn momentum(&self, axis: usize) -> &[f64] {
        let n = self.nodes;
        &self.data[(axis + 1) * n..(axis + 2) * n]
    }

    pub fn momentum_mut(&mut self, axis: usize) -> &mut [f64] {
        let n = self.nodes;
        &mut self.data[(axis + 1) * n..(axis + 2) * n]
    }

    pub fn into_parts(self) -> (DensityField, MomentumField) {
        let mut data = self.data;
        let mom = data.split_off(self.nodes);
        (
            DensityField(data),
            MomentumField {
                dim: self.dim,
                data: mom,
            },
        )
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
