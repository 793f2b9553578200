use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform grid on [0, 1] with homogeneous Dirichlet ends.
///
/// Only interior nodes `x_i = i h`, `i = 1..=n_interior`, are unknowns; the
/// boundary values are implicitly zero and never stored in solution vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid1D {
    n_interior: usize,
}

impl Grid1D {
    pub fn new(n_interior: usize) -> Result<Self> {
        if n_interior == 0 {
            return Err(Error::InvalidArgument(
                "grid needs at least one interior node".into(),
            ));
        }
        Ok(Self { n_interior })
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    /// Node count including the two boundary nodes.
    pub fn n_nodes(&self) -> usize {
        self.n_interior + 2
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n_interior + 1) as f64
    }

    /// Coordinate of node `i`, where 0 and `n_interior + 1` are boundaries.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 / (self.n_interior + 1) as f64
    }

    /// Interior node coordinates.
    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n_interior).map(|i| self.x(i)).collect()
    }

    /// All node coordinates, boundaries included.
    pub fn all_nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.x(i)).collect()
    }
}

/// A field sampled on a grid.
///
/// Coefficient fields carry one value per node including boundaries so that
/// stencils can average across cell faces. Sources carry interior values only.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl FieldSample {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() && values.len() != grid.n_interior() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid1D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_nodes()],
        }
    }

    /// True when boundary nodes are stored.
    pub fn includes_boundary(&self) -> bool {
        self.values.len() == self.grid.n_nodes()
    }

    /// Values at interior nodes.
    pub fn interior(&self) -> &[f64] {
        if self.includes_boundary() {
            &self.values[1..self.values.len() - 1]
        } else {
            &self.values
        }
    }

    /// Coordinates matching `values`.
    pub fn coords(&self) -> Vec<f64> {
        if self.includes_boundary() {
            self.grid.all_nodes()
        } else {
            self.grid.nodes()
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_strictly_inside() {
        let g = Grid1D::new(7).unwrap();
        let x = g.nodes();
        assert_eq!(x.len(), 7);
        assert!((g.h() - 0.125).abs() < 1e-15);
        assert!(x.windows(2).all(|w| w[1] > w[0]));
        assert!(x[0] > 0.0 && x[6] < 1.0);
        assert_eq!(g.all_nodes()[8], 1.0);
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(Grid1D::new(0).is_err());
    }
}
