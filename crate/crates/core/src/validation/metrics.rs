//! Discrete error norms, fitted rates and front tracking.

use serde::{Deserialize, Serialize};

use crate::energies::compensated_sum;
use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;

/// Relative errors in the trapezoid-weighted discrete norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

fn check_len(grid: &GridSpec, v: &[f64]) -> Result<()> {
    if v.len() != grid.num_nodes() {
        return Err(Error::ShapeMismatch {
            expected: grid.num_nodes(),
            actual: v.len(),
        });
    }
    Ok(())
}

/// `|numeric - exact| / |exact|` in `L1`, `L2` and `Linf`.
pub fn error_norms(grid: &GridSpec, numeric: &[f64], exact: &[f64]) -> Result<ErrorNorms> {
    check_len(grid, numeric)?;
    check_len(grid, exact)?;
    let w = grid.trapezoid_weights();
    let h = grid.cell_volume();
    let weighted =
        |f: &dyn Fn(usize) -> f64| h * compensated_sum((0..w.len()).map(|i| w[i] * f(i)));
    let e1 = weighted(&|i| (numeric[i] - exact[i]).abs());
    let x1 = weighted(&|i| exact[i].abs());
    let e2 = weighted(&|i| (numeric[i] - exact[i]).powi(2)).sqrt();
    let x2 = weighted(&|i| exact[i].powi(2)).sqrt();
    let einf = numeric
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let xinf = exact.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(x1 > 0.0 && x2 > 0.0 && xinf > 0.0) {
        return Err(Error::Degenerate("exact field has zero norm".into()));
    }
    Ok(ErrorNorms {
        l1: e1 / x1,
        l2: e2 / x2,
        linf: einf / xinf,
    })
}

/// Least-squares line `y = a + b x`, returned as `(a, b)`.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::Degenerate("a line fit needs two points".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) || !sxy.is_finite() {
        return Err(Error::Degenerate("abscissae do not vary".into()));
    }
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// Slope of `log(error)` against `log(dt)`.
pub fn convergence_order(errors: &[(f64, f64)]) -> Result<f64> {
    if errors.len() < 3 {
        return Err(Error::Degenerate(format!(
            "convergence order needs at least 3 points, got {}",
            errors.len()
        )));
    }
    if let Some(bad) = errors.iter().find(|(dt, e)| !(*dt > 0.0 && *e > 0.0)) {
        return Err(Error::Degenerate(format!(
            "step and error must be positive, got {bad:?}"
        )));
    }
    let logs: Vec<(f64, f64)> = errors.iter().map(|(dt, e)| (dt.ln(), e.ln())).collect();
    Ok(linear_fit(&logs)?.1)
}

/// Rightmost point where the linear interpolant of `rho` crosses `threshold`
/// downwards (1-D grids only).
pub fn front_position(grid: &GridSpec, rho: &[f64], threshold: f64) -> Result<f64> {
    if grid.dim() != 1 {
        return Err(invalid("grid", "front tracking is one-dimensional"));
    }
    check_len(grid, rho)?;
    let x = grid.nodes_1d();
    let last = rho
        .iter()
        .rposition(|v| *v >= threshold)
        .ok_or_else(|| Error::Degenerate(format!("density never reaches {threshold}")))?;
    if last + 1 == rho.len() {
        return Err(Error::Degenerate(format!(
            "density stays above {threshold} up to the boundary"
        )));
    }
    let (a, b) = (rho[last], rho[last + 1]);
    Ok(x[last] + (a - threshold) / (a - b) * (x[last + 1] - x[last]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error() {
        let g = GridSpec::uniform_1d(0.0, 1.0, 10).unwrap();
        let v: Vec<f64> = g.nodes_1d().iter().map(|x| 1.0 + x).collect();
        let e = error_norms(&g, &v, &v).unwrap();
        assert_eq!((e.l1, e.l2, e.linf), (0.0, 0.0, 0.0));
        assert!(error_norms(&g, &v, &[0.0; 11]).is_err());
    }

    #[test]
    fn constant_perturbation() {
        let len = 2.0;
        let g = GridSpec::uniform_1d(0.0, len, 40).unwrap();
        let exact = vec![1.0 / len; 41];
        let eps = 1e-3;
        let num: Vec<f64> = exact.iter().map(|v| v + eps).collect();
        let e = error_norms(&g, &num, &exact).unwrap();
        assert!((e.l1 - eps * len / 1.0).abs() < 1e-14);
    }

    #[test]
    fn rates() {
        let dts = [0.08, 0.04, 0.02, 0.01];
        let first: Vec<_> = dts.iter().map(|d| (*d, 3.0 * d)).collect();
        assert!((convergence_order(&first).unwrap() - 1.0).abs() < 1e-12);
        let second: Vec<_> = dts.iter().map(|d| (*d, 0.5 * d * d)).collect();
        assert!((convergence_order(&second).unwrap() - 2.0).abs() < 1e-12);
        assert!(convergence_order(&first[..2]).is_err());
        assert!(convergence_order(&[(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)]).is_err());
        assert!(convergence_order(&[(0.1, 1.0), (0.2, 0.0), (0.3, 3.0)]).is_err());
    }

    #[test]
    fn step_front() {
        let g = GridSpec::uniform_1d(-1.0, 1.0, 2000).unwrap();
        let rho: Vec<f64> = g
            .nodes_1d()
            .iter()
            .map(|x| if x.abs() <= 0.2 { 1.0 } else { 0.0 })
            .collect();
        let f = front_position(&g, &rho, 0.25).unwrap();
        assert!((f - 0.2).abs() <= 1e-3);
        assert!(front_position(&g, &rho, 2.0).is_err());
        assert!(front_position(&g, &vec![1.0; 2001], 0.5).is_err());
    }
}
