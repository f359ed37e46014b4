//! Cell-averaged scalar fields on a uniform 1-D grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell averages on a uniform grid: cell `i` is `[x0 + i dx, x0 + (i + 1) dx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(x0: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() || !x0.is_finite() {
            return Err(Error::Domain(format!("invalid grid geometry x0 = {x0}, dx = {dx}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at cell {i}")));
        }
        Ok(Self { x0, dx, values })
    }

    pub fn zeros(x0: f64, dx: f64, n: usize) -> Self {
        Self { x0, dx, values: vec![0.0; n] }
    }

    /// Cell averages of `f` on `n` cells covering `[a, b]`, by 4-point Gauss–Legendre per cell.
    pub fn from_fn<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> Self {
        let dx = (b - a) / n as f64;
        let rule = crate::quadrature::GaussLegendre::get(4);
        let values = (0..n)
            .map(|i| {
                let lo = a + i as f64 * dx;
                rule.integrate(lo, lo + dx, &f) / dx
            })
            .collect();
        Self { x0: a, dx, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx
    }

    pub fn right(&self) -> f64 {
        self.x0 + self.len() as f64 * self.dx
    }

    pub fn same_geometry(&self, other: &GridFunction) -> bool {
        self.len() == other.len()
            && (self.x0 - other.x0).abs() <= 1e-12 * (1.0 + self.x0.abs())
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
    }

    pub fn check_geometry(&self, other: &GridFunction) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "({}, {}, {}) vs ({}, {}, {})",
                self.x0,
                self.dx,
                self.len(),
                other.x0,
                other.dx,
                other.len()
            )))
        }
    }

    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.dx
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }

    /// Total variation including the jumps to zero at both ends of the window.
    pub fn bv(&self) -> f64 {
        let Some(first) = self.values.first() else {
            return 0.0;
        };
        let last = self.values[self.len() - 1];
        let interior: f64 = self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        first.abs() + interior + last.abs()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∥self − other∥_{L¹}` on a shared grid.
    pub fn l1_distance(&self, other: &GridFunction) -> Result<f64> {
        self.check_geometry(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.dx)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            x0: self.x0,
            dx: self.dx,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Extend by `left` and `right` zero cells.
    pub fn padded(&self, left: usize, right: usize) -> GridFunction {
        let mut values = vec![0.0; left];
        values.extend_from_slice(&self.values);
        values.extend(std::iter::repeat_n(0.0, right));
        GridFunction {
            x0: self.x0 - left as f64 * self.dx,
            dx: self.dx,
            values,
        }
    }

    /// Sub-window of cells `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> GridFunction {
        GridFunction {
            x0: self.x0 + range.start as f64 * self.dx,
            dx: self.dx,
            values: self.values[range].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_norms() {
        let g = GridFunction::from_fn(-2.0, 2.0, 400, |x| if x.abs() <= 1.0 { 1.0 } else { 0.0 });
        assert!((g.l1() - 2.0).abs() < 1e-12);
        assert!((g.bv() - 2.0).abs() < 1e-12);
        assert!((g.linf() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bv_counts_boundary_jumps() {
        let g = GridFunction::new(0.0, 1.0, vec![1.0, 1.0, -1.0]).unwrap();
        assert_eq!(g.bv(), 1.0 + 2.0 + 1.0);
    }

    #[test]
    fn padding_keeps_norms() {
        let g = GridFunction::new(0.0, 0.5, vec![1.0, 3.0, 2.0]).unwrap();
        let p = g.padded(2, 3);
        assert_eq!(p.len(), 8);
        assert_eq!(p.x0, -1.0);
        assert_eq!(p.l1(), g.l1());
        assert_eq!(p.bv(), g.bv());
        assert_eq!(p.slice(2..5), g);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = GridFunction::zeros(0.0, 0.1, 10);
        let b = GridFunction::zeros(0.0, 0.1, 11);
        assert!(matches!(a.l1_distance(&b), Err(Error::GridMismatch(_))));
    }
}
