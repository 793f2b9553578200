//! Inference-time update strategies: fixed step, A-norm line search,
//! Anderson acceleration over fixed-point residuals and its physics-aware
//! variant over physical residuals.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::problems::LinearSystem;
use crate::{dot, norm2, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    FixedStep,
    AdaptiveStep,
    StandardAa,
    PhysicsAwareAa,
}

impl UpdateKind {
    pub fn label(self) -> &'static str {
        match self {
            UpdateKind::FixedStep => "fixed_step",
            UpdateKind::AdaptiveStep => "adaptive_step",
            UpdateKind::StandardAa => "standard_aa",
            UpdateKind::PhysicsAwareAa => "physics_aware_aa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateStrategy {
    pub kind: UpdateKind,
    pub memory: usize,
    pub damping: f64,
    pub ls_regularization: f64,
}

impl Default for UpdateStrategy {
    fn default() -> Self {
        Self {
            kind: UpdateKind::FixedStep,
            memory: 10,
            damping: 1.0,
            ls_regularization: 1e-10,
        }
    }
}

impl UpdateStrategy {
    pub fn new(kind: UpdateKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::InvalidArgument(
                "AA memory must be at least 1".into(),
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping {} outside (0, 1]",
                self.damping
            )));
        }
        if !(self.ls_regularization >= 0.0) {
            return Err(Error::InvalidArgument(
                "ls_regularization must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Step length from `adaptive_alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    pub alpha: f64,
    /// `p^T A p` vanished and the fallback `alpha = 1` was used.
    pub degenerate: bool,
}

/// A-norm line minimum `p^T r / p^T A p` along direction `p`.
pub fn adaptive_alpha(p: &[f64], r: &[f64], sys: &LinearSystem) -> Result<StepSize> {
    let pp = dot(p, p);
    if pp == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let pap = dot(p, &sys.apply(p));
    if pap.abs() <= 1e-14 * pp {
        return Ok(StepSize {
            alpha: 1.0,
            degenerate: true,
        });
    }
    Ok(StepSize {
        alpha: dot(p, r) / pap,
        degenerate: false,
    })
}

/// Solution of `min || sum_j a_j r_j ||_2` subject to `sum_j a_j = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AaCoefficients {
    /// `alpha[j]` weights the `j`-th residual passed in (newest first).
    pub alpha: Vec<f64>,
    /// Ratio of extreme diagonal magnitudes of the triangular factor.
    pub condition: f64,
    pub regularized: bool,
}

/// Constrained least squares by eliminating `a_0 = 1 - sum_{j>=1} a_j` and
/// solving for the remaining coefficients on residual differences by QR.
/// Tikhonov weight `reg * ||R||_F^2` is added when the triangular factor is
/// ill-conditioned (condition estimate above `1e12`) or the window is wider
/// than the vector dimension.
pub fn aa_coefficients(residuals: &[&[f64]], reg: f64) -> Result<AaCoefficients> {
    let Some(r0) = residuals.first() else {
        return Err(Error::EmptyHistory);
    };
    let n = r0.len();
    let m = residuals.len() - 1;
    if let Some(bad) = residuals.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    if m == 0 {
        return Ok(AaCoefficients {
            alpha: vec![1.0],
            condition: 1.0,
            regularized: false,
        });
    }
    let d = DMatrix::from_fn(n, m, |i, j| residuals[j + 1][i] - r0[i]);
    let rhs = DVector::from_iterator(n, r0.iter().map(|v| -v));
    let mut condition = f64::INFINITY;
    let mut gamma = None;
    if n >= m {
        let qr = d.clone().qr();
        let r = qr.r();
        let diag: Vec<f64> = r.diagonal().iter().map(|v| v.abs()).collect();
        let hi = diag.iter().cloned().fold(0.0, f64::max);
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition <= 1e12 {
            let qtb = qr.q().transpose() * &rhs;
            gamma = r.solve_upper_triangular(&qtb);
        }
    }
    let regularized = gamma.is_none();
    let gamma = match gamma {
        Some(g) => g,
        None => {
            let frob: f64 = residuals.iter().map(|r| dot(r, r)).sum();
            let mu = reg * frob;
            if mu > 0.0 {
                let mut aug = DMatrix::zeros(n + m, m);
                aug.view_mut((0, 0), (n, m)).copy_from(&d);
                for j in 0..m {
                    aug[(n + j, j)] = mu.sqrt();
                }
                let mut b = DVector::zeros(n + m);
                b.rows_mut(0, n).copy_from(&rhs);
                let qr = aug.qr();
                let qtb = qr.q().transpose() * b;
                qr.r()
                    .solve_upper_triangular(&qtb)
                    .unwrap_or_else(|| DVector::zeros(m))
            } else {
                d.svd(true, true)
                    .solve(&rhs, 1e-14)
                    .unwrap_or_else(|_| DVector::zeros(m))
            }
        }
    };
    let mut alpha = Vec::with_capacity(m + 1);
    alpha.push(1.0 - gamma.sum());
    alpha.extend(gamma.iter());
    // a regularized or rank-deficient solve must never lose to the best
    // single residual in the window
    let combined: Vec<f64> = (0..n)
        .map(|i| residuals.iter().zip(&alpha).map(|(r, a)| a * r[i]).sum())
        .collect();
    let (best, best_norm) =
        residuals
            .iter()
            .map(|r| norm2(r))
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (j, v)| if v < acc.1 { (j, v) } else { acc },
            );
    if !(norm2(&combined) <= best_norm) {
        alpha = vec![0.0; m + 1];
        alpha[best] = 1.0;
    }
    Ok(AaCoefficients {
        alpha,
        condition,
        regularized,
    })
}

#[derive(Debug, Clone)]
struct Entry {
    g: Vec<f64>,
    u: Vec<f64>,
    r: Vec<f64>,
}

/// Oldest-first ring buffer of at most `m + 1` candidates with their
/// residuals and the iterates that produced them.
#[derive(Debug, Clone)]
pub struct AaHistory {
    memory: usize,
    entries: VecDeque<Entry>,
}

impl AaHistory {
    pub fn new(memory: usize) -> Self {
        Self {
            memory,
            entries: VecDeque::with_capacity(memory + 1),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, g: Vec<f64>, u: Vec<f64>, r: Vec<f64>) -> Result<()> {
        if let Some(e) = self.entries.back() {
            for len in [g.len(), u.len(), r.len()] {
                if len != e.g.len() {
                    return Err(Error::DimensionMismatch {
                        expected: e.g.len(),
                        got: len,
                    });
                }
            }
        }
        if self.entries.len() == self.memory + 1 {
            self.entries.pop_front();
        }
        self.entries.push_back(Entry { g, u, r });
        Ok(())
    }

    /// Residuals newest first.
    pub fn residuals(&self) -> Vec<&[f64]> {
        self.entries.iter().rev().map(|e| e.r.as_slice()).collect()
    }

    /// Candidates newest first.
    pub fn candidates(&self) -> Vec<&[f64]> {
        self.entries.iter().rev().map(|e| e.g.as_slice()).collect()
    }

    fn combine(&self, alpha: &[f64], damping: f64) -> Vec<f64> {
        let n = self.entries.back().map_or(0, |e| e.g.len());
        let mut out = vec![0.0; n];
        for (e, a) in self.entries.iter().rev().zip(alpha) {
            for ((o, g), u) in out.iter_mut().zip(&e.g).zip(&e.u) {
                *o += a * (damping * g + (1.0 - damping) * u);
            }
        }
        out
    }
}

/// Result of one Anderson step.
#[derive(Debug, Clone)]
pub struct AaStep {
    pub next: Vec<f64>,
    pub coefficients: AaCoefficients,
}

/// Anderson step on fixed-point residuals `g_k - u_k`.
pub fn standard_aa_step(
    history: &mut AaHistory,
    g: &[f64],
    u: &[f64],
    strategy: &UpdateStrategy,
) -> Result<AaStep> {
    let r: Vec<f64> = g.iter().zip(u).map(|(a, b)| a - b).collect();
    history.push(g.to_vec(), u.to_vec(), r)?;
    let coefficients = aa_coefficients(&history.residuals(), strategy.ls_regularization)?;
    Ok(AaStep {
        next: history.combine(&coefficients.alpha, strategy.damping),
        coefficients,
    })
}

/// Anderson step on physical residuals `f - A g_k`.
pub fn physics_aware_aa_step(
    history: &mut AaHistory,
    g: &[f64],
    u: &[f64],
    sys: &LinearSystem,
    strategy: &UpdateStrategy,
) -> Result<AaStep> {
    history.push(g.to_vec(), u.to_vec(), sys.residual(g))?;
    let coefficients = aa_coefficients(&history.residuals(), strategy.ls_regularization)?;
    Ok(AaStep {
        next: history.combine(&coefficients.alpha, strategy.damping),
        coefficients,
    })
}
