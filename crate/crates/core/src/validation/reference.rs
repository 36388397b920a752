//! Externally supplied reference profiles.
//!
//! A profile is a CSV file with a header row and two numeric columns, `x` and
//! `rho`, with strictly increasing `x`.

use std::path::Path;

use serde::Deserialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{DensityField, GridSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProfile {
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Deserialize)]
struct Row {
    x: f64,
    rho: f64,
}

impl ReferenceProfile {
    pub fn new(x: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if x.len() != rho.len() {
            return Err(Error::ShapeMismatch {
                expected: x.len(),
                actual: rho.len(),
            });
        }
        if x.len() < 2 {
            return Err(invalid("reference", "needs at least two rows"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("reference", "x must be strictly increasing"));
        }
        Ok(ReferenceProfile { x, rho })
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut x = Vec::new();
        let mut rho = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| invalid("reference", e.to_string()))?;
            x.push(row.x);
            rho.push(row.rho);
        }
        Self::new(x, rho)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| invalid("reference", format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    /// Linear interpolation at `x`; points outside the tabulated range are an error.
    pub fn at(&self, x: f64) -> Result<f64> {
        let (first, last) = (self.x[0], self.x[self.x.len() - 1]);
        if !(x >= first - 1e-12 && x <= last + 1e-12) {
            return Err(invalid(
                "reference",
                format!("x = {x} outside [{first}, {last}]"),
            ));
        }
        let j = self
            .x
            .partition_point(|v| *v <= x)
            .clamp(1, self.x.len() - 1);
        let (x0, x1) = (self.x[j - 1], self.x[j]);
        let s = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        Ok(self.rho[j - 1] + s * (self.rho[j] - self.rho[j - 1]))
    }

    /// The profile interpolated onto the nodes of a 1-D grid.
    pub fn on_grid(&self, grid: &GridSpec) -> Result<DensityField> {
        if grid.dim() != 1 {
            return Err(invalid("grid", "reference profiles are one-dimensional"));
        }
        grid.nodes_1d()
            .into_iter()
            .map(|x| self.at(x))
            .collect::<Result<Vec<_>>>()
            .map(DensityField)
    }
}
