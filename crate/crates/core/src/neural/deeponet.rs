use std::sync::Arc;

use nalgebra::DMatrix;

use super::operator::{
    layer_slots, mlp, Arch, CorrectionOperator, DeepOnetArch, LayerSlot, OperatorContext,
};
use crate::problems::{FieldSample, Grid1D};
use crate::tape::{Tape, TapeMap, Var};
use crate::{Error, Result};

struct Layout {
    branch: Vec<LayerSlot>,
    trunk: Vec<LayerSlot>,
    bias: usize,
}

fn layout(arch: &DeepOnetArch) -> Layout {
    let (branch, end) = layer_slots(&arch.branch_widths(), 0);
    let (trunk, end) = layer_slots(&arch.trunk_widths(), end);
    Layout {
        branch,
        trunk,
        bias: end,
    }
}

/// Trunk input: query coordinates mapped from `[0, 1]` to `[-1, 1]`.
fn trunk_input(query: &[f64]) -> DMatrix<f64> {
    DMatrix::from_iterator(1, query.len(), query.iter().map(|x| 2.0 * x - 1.0))
}

/// Trunk features at every query point as a `latent x Q` matrix.
pub(crate) fn trunk_basis(arch: &DeepOnetArch, params: &[f64], query: &[f64]) -> DMatrix<f64> {
    let l = layout(arch);
    let mut tape = Tape::new(params);
    let x = tape.leaf_matrix(trunk_input(query));
    let t = mlp(&mut tape, x, &l.trunk, true);
    tape.value(t).clone()
}

pub(crate) fn build(arch: &DeepOnetArch, tape: &mut Tape, r: Var, ctx: &OperatorContext) -> Var {
    let l = layout(arch);
    let rc = match &ctx.restrict {
        Some(map) => tape.map(r, map.clone()),
        None => r,
    };
    let (rn, s) = if arch.normalize_input {
        let s = tape.max_abs(rc);
        (tape.div_by(rc, s), Some(s))
    } else {
        (rc, None)
    };
    let kc = tape.leaf(&ctx.k_train);
    let input = tape.concat(rn, kc);
    let coeffs = mlp(tape, input, &l.branch, false);
    let basis = match &ctx.basis {
        Some(b) => tape.leaf_matrix(b.clone()),
        None => {
            let x = tape.leaf_matrix(trunk_input(&ctx.query));
            mlp(tape, x, &l.trunk, true)
        }
    };
    let y = tape.contract(basis, coeffs, l.bias);
    let y = if arch.dirichlet_envelope {
        let d = ctx.query.iter().map(|x| 4.0 * x * (1.0 - x)).collect();
        tape.map(y, Arc::new(Envelope(d)))
    } else {
        y
    };
    let y = tape.scale_const(y, arch.output_scale);
    match s {
        Some(s) => tape.scale_by(y, s),
        None => y,
    }
}

/// DeepONet correction for residual `r` (interior values on its own grid)
/// evaluated at arbitrary `query` points in `[0, 1]`.
pub fn deeponet_apply_at(
    op: &CorrectionOperator,
    r: &[f64],
    k: &FieldSample,
    query: &[f64],
) -> Result<Vec<f64>> {
    if !matches!(op.arch, Arch::DeepOnet(_)) {
        return Err(Error::InvalidArgument("operator is not a DeepONet".into()));
    }
    let ctx = op.context(k, Grid1D::new(r.len())?, Some(query))?;
    op.apply_with(r, &ctx)
}

/// DeepONet correction evaluated on the interior nodes of `query`.
pub fn deeponet_apply(
    op: &CorrectionOperator,
    r: &[f64],
    k: &FieldSample,
    query: &Grid1D,
) -> Result<Vec<f64>> {
    deeponet_apply_at(op, r, k, &query.nodes())
}

/// Pointwise weight, self-adjoint.
struct Envelope(Vec<f64>);

impl TapeMap for Envelope {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.0).map(|(a, b)| a * b).collect()
    }
    fn backward(&self, g: &[f64]) -> Vec<f64> {
        self.forward(g)
    }
}
