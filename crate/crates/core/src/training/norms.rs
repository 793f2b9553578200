use serde::{Deserialize, Serialize};

use crate::tape::ScalarMap;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L2,
    L1,
    H1,
}

impl NormKind {
    pub fn label(self) -> &'static str {
        match self {
            NormKind::L2 => "l2",
            NormKind::L1 => "l1",
            NormKind::H1 => "h1",
        }
    }
}

/// Squared norm selector; `lambda` weights the gradient term of H1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub kind: NormKind,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    1.0
}

impl Default for NormSpec {
    fn default() -> Self {
        Self::new(NormKind::L2)
    }
}

impl NormSpec {
    pub fn new(kind: NormKind) -> Self {
        Self { kind, lambda: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "H1 lambda {} is negative",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Discrete gradient: central differences inside, one-sided at both ends.
fn grad_h(x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| match i {
            0 => (x[1] - x[0]) / h,
            i if i == n - 1 => (x[n - 1] - x[n - 2]) / h,
            i => (x[i + 1] - x[i - 1]) / (2.0 * h),
        })
        .collect()
}

fn grad_h_transpose(g: &[f64], h: f64) -> Vec<f64> {
    let n = g.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    out[0] -= g[0] / h;
    out[1] += g[0] / h;
    out[n - 1] += g[n - 1] / h;
    out[n - 2] -= g[n - 1] / h;
    for i in 1..n - 1 {
        out[i + 1] += g[i] / (2.0 * h);
        out[i - 1] -= g[i] / (2.0 * h);
    }
    out
}

/// Squared norm of `x` on a grid of spacing `h`.
pub fn norm_eval(x: &[f64], spec: NormSpec, h: f64) -> f64 {
    match spec.kind {
        NormKind::L2 => x.iter().map(|v| v * v).sum(),
        NormKind::L1 => x.iter().map(|v| v.abs()).sum::<f64>().powi(2),
        NormKind::H1 => {
            let l2: f64 = x.iter().map(|v| v * v).sum();
            l2 + spec.lambda * grad_h(x, h).iter().map(|v| v * v).sum::<f64>()
        }
    }
}

pub(crate) struct NormMap {
    pub spec: NormSpec,
    pub h: f64,
}

impl ScalarMap for NormMap {
    fn value(&self, x: &[f64]) -> f64 {
        norm_eval(x, self.spec, self.h)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self.spec.kind {
            NormKind::L2 => x.iter().map(|v| 2.0 * v).collect(),
            NormKind::L1 => {
                let s: f64 = x.iter().map(|v| v.abs()).sum();
                x.iter()
                    .map(|v| 2.0 * s * v.signum() * (*v != 0.0) as u8 as f64)
                    .collect()
            }
            NormKind::H1 => {
                let d = grad_h(x, self.h);
                let dt = grad_h_transpose(&d, self.h);
                x.iter()
                    .zip(&dt)
                    .map(|(v, g)| 2.0 * v + 2.0 * self.spec.lambda * g)
                    .collect()
            }
        }
    }
}
