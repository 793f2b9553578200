//! Stationary smoothers `u <- u + omega S (f - A u)` and their propagation
//! diagnostics.

mod diagnostics;

use serde::{Deserialize, Serialize};

pub use diagnostics::{
    error_propagation_matrix, residual_propagation_matrix, sine_mode_response, spectral_radius,
    write_mode_response_csv, SpectralEstimate, DENSE_CAP,
};

use crate::problems::LinearSystem;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmootherKind {
    /// `S = D^{-1}`
    Jacobi,
    /// `S = (D + L)^{-1}`, applied by forward substitution.
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub kind: SmootherKind,
    pub omega: f64,
    pub sweeps: usize,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self::jacobi(19)
    }
}

impl SmootherConfig {
    /// Damped Jacobi with omega = 2/3.
    pub fn jacobi(sweeps: usize) -> Self {
        Self {
            kind: SmootherKind::Jacobi,
            omega: 2.0 / 3.0,
            sweeps,
        }
    }

    pub fn gauss_seidel(sweeps: usize) -> Self {
        Self {
            kind: SmootherKind::GaussSeidel,
            omega: 1.0,
            sweeps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0 && self.omega < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "omega must lie in [0, 2), got {}",
                self.omega
            )));
        }
        Ok(())
    }
}

fn check_diagonal(sys: &LinearSystem) -> Result<()> {
    match sys.diag.iter().position(|&d| d == 0.0) {
        Some(row) => Err(Error::ZeroDiagonal { row }),
        None => Ok(()),
    }
}

/// `z = S r`
fn apply_s(sys: &LinearSystem, kind: SmootherKind, r: &[f64], z: &mut [f64]) {
    match kind {
        SmootherKind::Jacobi => {
            for ((zi, ri), di) in z.iter_mut().zip(r).zip(&sys.diag) {
                *zi = ri / di;
            }
        }
        SmootherKind::GaussSeidel => {
            let mut prev = 0.0;
            for i in 0..r.len() {
                let lower = if i > 0 { sys.sub[i - 1] * prev } else { 0.0 };
                prev = (r[i] - lower) / sys.diag[i];
                z[i] = prev;
            }
        }
    }
}

/// `z = S^T r`
fn apply_s_transpose(sys: &LinearSystem, kind: SmootherKind, r: &[f64], z: &mut [f64]) {
    match kind {
        SmootherKind::Jacobi => apply_s(sys, kind, r, z),
        SmootherKind::GaussSeidel => {
            let n = r.len();
            let mut next = 0.0;
            for i in (0..n).rev() {
                let upper = if i + 1 < n { sys.sub[i] * next } else { 0.0 };
                next = (r[i] - upper) / sys.diag[i];
                z[i] = next;
            }
        }
    }
}

/// Apply `cfg.sweeps` smoother steps to `u`.
pub fn smoother_sweep(sys: &LinearSystem, u: &[f64], cfg: &SmootherConfig) -> Result<Vec<f64>> {
    if u.len() != sys.n() {
        return Err(Error::DimensionMismatch {
            expected: sys.n(),
            got: u.len(),
        });
    }
    check_diagonal(sys)?;
    let mut u = u.to_vec();
    let mut r = vec![0.0; u.len()];
    let mut z = vec![0.0; u.len()];
    for _ in 0..cfg.sweeps {
        sys.apply_into(&u, &mut r);
        for (ri, fi) in r.iter_mut().zip(&sys.rhs) {
            *ri = fi - *ri;
        }
        apply_s(sys, cfg.kind, &r, &mut z);
        for (ui, zi) in u.iter_mut().zip(&z) {
            *ui += cfg.omega * zi;
        }
    }
    Ok(u)
}

/// Linear part of the sweep: `(I - omega S A)^n e`.
pub fn propagate_error(sys: &LinearSystem, e: &[f64], cfg: &SmootherConfig) -> Vec<f64> {
    let mut e = e.to_vec();
    let mut r = vec![0.0; e.len()];
    let mut z = vec![0.0; e.len()];
    for _ in 0..cfg.sweeps {
        sys.apply_into(&e, &mut r);
        apply_s(sys, cfg.kind, &r, &mut z);
        for (ei, zi) in e.iter_mut().zip(&z) {
            *ei -= cfg.omega * zi;
        }
    }
    e
}

/// Transposed linear part: `((I - omega S A)^T)^n g`.
pub fn propagate_error_transpose(sys: &LinearSystem, g: &[f64], cfg: &SmootherConfig) -> Vec<f64> {
    let mut g = g.to_vec();
    let mut z = vec![0.0; g.len()];
    for _ in 0..cfg.sweeps {
        apply_s_transpose(sys, cfg.kind, &g, &mut z);
        let az = sys.apply_transpose(&z);
        for (gi, ai) in g.iter_mut().zip(&az) {
            *gi -= cfg.omega * ai;
        }
    }
    g
}
