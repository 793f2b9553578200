use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::grid::{FieldSample, Grid1D};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `-(k u')' = f`
    Diffusion,
    /// `-u'' - k^2 u = f`
    Helmholtz,
}

/// Tridiagonal system `A u = f` on the interior nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub grid: Grid1D,
    pub kind: ProblemKind,
    pub diag: Vec<f64>,
    /// `sub[i] = A[i+1, i]`
    pub sub: Vec<f64>,
    /// `sup[i] = A[i, i+1]`
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
    pub spd: bool,
}

impl LinearSystem {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn with_rhs(mut self, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: rhs.len(),
            });
        }
        self.rhs = rhs;
        Ok(self)
    }

    /// `y = A x`
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.sup[i] * x[i + 1];
            }
            y[i] = v;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.apply_into(x, &mut y);
        y
    }

    /// `y = A^T x`
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.sup[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.sub[i] * x[i + 1];
            }
            y[i] = v;
        }
        y
    }

    /// Physical residual `f - A u`.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut r = self.apply(u);
        for (ri, fi) in r.iter_mut().zip(&self.rhs) {
            *ri = fi - *ri;
        }
        r
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = self.diag[i];
            if i + 1 < n {
                a[(i + 1, i)] = self.sub[i];
                a[(i, i + 1)] = self.sup[i];
            }
        }
        a
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm1(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j].abs();
                if j > 0 {
                    s += self.sup[j - 1].abs();
                }
                if j + 1 < n {
                    s += self.sub[j].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }
}

/// Second-order finite differences for `-(k u')' = f`.
///
/// `k` must carry boundary nodes. Face coefficients are arithmetic means of
/// the adjacent nodal values, which keeps `A` symmetric.
pub fn assemble_diffusion(k: &FieldSample, grid: Grid1D) -> Result<LinearSystem> {
    if k.grid != grid || !k.includes_boundary() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_nodes(),
            got: k.values.len(),
        });
    }
    if let Some((index, &value)) = k.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveCoefficient { index, value });
    }
    let n = grid.n_interior();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    // face i sits between node i and node i+1 (node 0 is the left boundary)
    let face: Vec<f64> = k.values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let diag = (0..n).map(|i| (face[i] + face[i + 1]) * inv_h2).collect();
    let off: Vec<f64> = (1..n).map(|i| -face[i] * inv_h2).collect();
    Ok(LinearSystem {
        grid,
        kind: ProblemKind::Diffusion,
        diag,
        sub: off.clone(),
        sup: off,
        rhs: vec![0.0; n],
        spd: true,
    })
}

/// `A = L - diag(k_i^2)` with `L` the constant-coefficient Laplacian stencil.
///
/// Uses interior values of `k`; boundary values, when stored, are ignored.
pub fn assemble_helmholtz(k: &FieldSample, grid: Grid1D) -> Result<LinearSystem> {
    if k.grid != grid {
        return Err(Error::DimensionMismatch {
            expected: grid.n_interior(),
            got: k.values.len(),
        });
    }
    let n = grid.n_interior();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let diag = k
        .interior()
        .iter()
        .map(|kk| 2.0 * inv_h2 - kk * kk)
        .collect();
    let off = vec![-inv_h2; n - 1];
    Ok(LinearSystem {
        grid,
        kind: ProblemKind::Helmholtz,
        diag,
        sub: off.clone(),
        sup: off,
        rhs: vec![0.0; n],
        spd: false,
    })
}

pub fn assemble(kind: ProblemKind, k: &FieldSample, rhs: Vec<f64>) -> Result<LinearSystem> {
    let sys = match kind {
        ProblemKind::Diffusion => assemble_diffusion(k, k.grid)?,
        ProblemKind::Helmholtz => assemble_helmholtz(k, k.grid)?,
    };
    sys.with_rhs(rhs)
}
