use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{apply_s, SmootherConfig};
use crate::problems::LinearSystem;
use crate::{Error, Result};

/// Largest system for which dense propagation matrices are built.
pub const DENSE_CAP: usize = 2048;

fn dense_s(sys: &LinearSystem, cfg: &SmootherConfig) -> DMatrix<f64> {
    let n = sys.n();
    let mut s = DMatrix::zeros(n, n);
    let mut col = vec![0.0; n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        apply_s(sys, cfg.kind, &e, &mut col);
        s.set_column(j, &DVector::from_column_slice(&col));
    }
    s
}

fn check_cap(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        return Err(Error::SizeCap { n, cap: DENSE_CAP });
    }
    Ok(())
}

/// Dense `E_S^n = (I - omega S A)^n`.
pub fn error_propagation_matrix(sys: &LinearSystem, cfg: &SmootherConfig) -> Result<DMatrix<f64>> {
    let n = sys.n();
    check_cap(n)?;
    let one_step = DMatrix::identity(n, n) - cfg.omega * dense_s(sys, cfg) * sys.to_dense();
    Ok(matrix_power(&one_step, cfg.sweeps))
}

/// Dense `R_S^n = (I - omega A S)^n`.
pub fn residual_propagation_matrix(
    sys: &LinearSystem,
    cfg: &SmootherConfig,
) -> Result<DMatrix<f64>> {
    let n = sys.n();
    check_cap(n)?;
    let one_step = DMatrix::identity(n, n) - cfg.omega * sys.to_dense() * dense_s(sys, cfg);
    Ok(matrix_power(&one_step, cfg.sweeps))
}

fn matrix_power(m: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..p {
        out = &out * m;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub rho: f64,
    pub converged: bool,
}

/// Power-iteration estimate of the spectral radius: 5 seeded random starts,
/// at most 500 iterations each, relative tolerance 1e-8.
pub fn spectral_radius(m: &DMatrix<f64>) -> SpectralEstimate {
    const STARTS: usize = 5;
    const ITERS: usize = 500;
    const TOL: f64 = 1e-8;
    assert_eq!(
        m.nrows(),
        m.ncols(),
        "spectral radius needs a square matrix"
    );
    let n = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best = SpectralEstimate {
        rho: 0.0,
        converged: false,
    };
    for _ in 0..STARTS {
        let mut x = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        x /= x.norm();
        let mut est = 0.0;
        let mut converged = false;
        for _ in 0..ITERS {
            let y = m * &x;
            let next = y.norm();
            if next == 0.0 {
                est = 0.0;
                converged = true;
                break;
            }
            x = y / next;
            if (next - est).abs() <= TOL * next {
                est = next;
                converged = true;
                break;
            }
            est = next;
        }
        if est > best.rho || (est == best.rho && converged) {
            best = SpectralEstimate {
                rho: est,
                converged,
            };
        }
    }
    best
}

/// Amplification `||E v_j|| / ||v_j||` of each discrete sine mode `v_j`
/// under the dense propagation matrix `e`.
pub fn sine_mode_response(e: &DMatrix<f64>) -> Vec<(usize, f64)> {
    let n = e.nrows();
    let h = 1.0 / (n + 1) as f64;
    (1..=n)
        .map(|j| {
            let v =
                DVector::from_iterator(n, (1..=n).map(|i| (j as f64 * PI * i as f64 * h).sin()));
            (j, (e * &v).norm() / v.norm())
        })
        .collect()
}

/// CSV with header `mode,response`.
pub fn write_mode_response_csv(path: &Path, rows: &[(usize, f64)]) -> Result<()> {
    let mut out = String::from("mode,response\n");
    for (j, v) in rows {
        out.push_str(&format!("{j},{v:.16e}\n"));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
