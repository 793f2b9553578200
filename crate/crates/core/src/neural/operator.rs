use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spectral::SineFilter;
use crate::problems::{sample_piecewise_linear, FieldSample, Grid1D, TransferMatrix};
use crate::tape::{Tape, TapeMap, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    #[serde(rename = "deeponet")]
    DeepOnet,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepOnetArch {
    pub train_n: usize,
    pub latent: usize,
    pub branch_hidden: Vec<usize>,
    pub trunk_hidden: Vec<usize>,
    pub normalize_input: bool,
    /// Coefficient inputs enter the branch net as `(k - k_shift) / k_scale`.
    pub k_shift: f64,
    pub k_scale: f64,
    pub output_scale: f64,
    /// Multiply the output by `4 x (1 - x)` so it vanishes at the walls.
    #[serde(default = "enabled")]
    pub dirichlet_envelope: bool,
}

fn enabled() -> bool {
    true
}

impl DeepOnetArch {
    /// Branch `[2 n -> 64 -> 64 -> 64]`, trunk `[1 -> 64 -> 64 -> 64]`.
    pub fn new(train_n: usize) -> Self {
        Self {
            train_n,
            latent: 64,
            branch_hidden: vec![64, 64],
            trunk_hidden: vec![64, 64],
            normalize_input: true,
            k_shift: 0.0,
            k_scale: 1.0,
            output_scale: 0.01,
            dirichlet_envelope: true,
        }
    }

    pub fn branch_widths(&self) -> Vec<usize> {
        let mut w = vec![2 * self.train_n];
        w.extend(&self.branch_hidden);
        w.push(self.latent);
        w
    }

    pub fn trunk_widths(&self) -> Vec<usize> {
        let mut w = vec![1];
        w.extend(&self.trunk_hidden);
        w.push(self.latent);
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralArch {
    pub train_n: usize,
    pub n_modes: usize,
    pub cond_hidden: usize,
    pub k_shift: f64,
    pub k_scale: f64,
}

impl SpectralArch {
    /// Conditioning net `[n -> 32 -> 2 n_modes]` with 16 retained modes.
    pub fn new(train_n: usize) -> Self {
        Self {
            train_n,
            n_modes: 16.min(train_n),
            cond_hidden: 32,
            k_shift: 0.0,
            k_scale: 1.0,
        }
    }

    pub fn cond_widths(&self) -> Vec<usize> {
        vec![self.train_n, self.cond_hidden, 2 * self.n_modes]
    }

    /// Fixed prior scale of mode `j` (1-based): the inverse continuous
    /// Laplacian eigenvalue `1 / (j pi)^2`.
    pub fn mode_scale(j: usize) -> f64 {
        1.0 / (j as f64 * PI).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arch {
    #[serde(rename = "deeponet")]
    DeepOnet(DeepOnetArch),
    Spectral(SpectralArch),
}

impl Arch {
    pub fn kind(&self) -> OperatorKind {
        match self {
            Arch::DeepOnet(_) => OperatorKind::DeepOnet,
            Arch::Spectral(_) => OperatorKind::Spectral,
        }
    }

    pub fn train_n(&self) -> usize {
        match self {
            Arch::DeepOnet(a) => a.train_n,
            Arch::Spectral(a) => a.train_n,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Arch::DeepOnet(a) => {
                dense_count(&a.branch_widths()) + dense_count(&a.trunk_widths()) + 1
            }
            Arch::Spectral(a) => dense_count(&a.cond_widths()),
        }
    }
}

/// Location of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerSlot {
    pub w: usize,
    pub b: usize,
    pub rows: usize,
    pub cols: usize,
}

fn dense_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

pub(crate) fn layer_slots(widths: &[usize], start: usize) -> (Vec<LayerSlot>, usize) {
    let mut off = start;
    let slots = widths
        .windows(2)
        .map(|w| {
            let (cols, rows) = (w[0], w[1]);
            let slot = LayerSlot {
                w: off,
                b: off + rows * cols,
                rows,
                cols,
            };
            off += rows * cols + rows;
            slot
        })
        .collect();
    (slots, off)
}

/// Dense tanh MLP on the tape; the last layer is linear unless
/// `activate_last`.
pub(crate) fn mlp(tape: &mut Tape, mut x: Var, slots: &[LayerSlot], activate_last: bool) -> Var {
    for (i, s) in slots.iter().enumerate() {
        x = tape.affine(x, s.w, s.b, s.rows, s.cols);
        if i + 1 < slots.len() || activate_last {
            x = tape.tanh(x);
        }
    }
    x
}

/// A correction operator: architecture plus flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionOperator {
    pub arch: Arch,
    pub params: Vec<f64>,
}

impl CorrectionOperator {
    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: Arch, seed: u64) -> Self {
        let mut params = vec![0.0; arch.param_count()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths: Vec<Vec<usize>> = match &arch {
            Arch::DeepOnet(a) => vec![a.branch_widths(), a.trunk_widths()],
            Arch::Spectral(a) => vec![a.cond_widths()],
        };
        let mut start = 0;
        for w in widths {
            let (slots, end) = layer_slots(&w, start);
            for s in slots {
                let bound = (6.0 / (s.rows + s.cols) as f64).sqrt();
                for p in &mut params[s.w..s.w + s.rows * s.cols] {
                    *p = rng.random_range(-bound..bound);
                }
            }
            start = end;
        }
        Self { arch, params }
    }

    /// Spectral operator with every parameter zero: `N(r) = 0` exactly.
    pub fn zero(train_n: usize) -> Self {
        let arch = Arch::Spectral(SpectralArch::new(train_n));
        let params = vec![0.0; arch.param_count()];
        Self { arch, params }
    }

    /// Spectral operator whose multipliers ignore the coefficient and equal
    /// `multipliers[j-1] = (re, im)` for modes `j = 1..=n_modes`.
    pub fn spectral_with_multipliers(train_n: usize, multipliers: &[(f64, f64)]) -> Self {
        let n_modes = multipliers.len();
        let arch = SpectralArch {
            n_modes,
            ..SpectralArch::new(train_n)
        };
        let (slots, _) = layer_slots(&arch.cond_widths(), 0);
        let arch = Arch::Spectral(arch);
        let mut params = vec![0.0; arch.param_count()];
        let last = slots[slots.len() - 1];
        for (j, (re, im)) in multipliers.iter().enumerate() {
            let scale = SpectralArch::mode_scale(j + 1);
            params[last.b + j] = re / scale;
            params[last.b + n_modes + j] = im / scale;
        }
        Self { arch, params }
    }

    pub fn kind(&self) -> OperatorKind {
        self.arch.kind()
    }

    pub fn train_grid(&self) -> Grid1D {
        Grid1D::new(self.arch.train_n()).expect("train grid is non-empty")
    }

    /// One-line architecture summary.
    pub fn describe(&self) -> String {
        match &self.arch {
            Arch::DeepOnet(a) => format!(
                "deeponet train_n={} branch={:?} trunk={:?} latent={} normalize_input={} envelope={} params={}",
                a.train_n,
                a.branch_widths(),
                a.trunk_widths(),
                a.latent,
                a.normalize_input,
                a.dirichlet_envelope,
                self.params.len()
            ),
            Arch::Spectral(a) => format!(
                "spectral train_n={} n_modes={} cond={:?} params={}",
                a.train_n,
                a.n_modes,
                a.cond_widths(),
                self.params.len()
            ),
        }
    }

    /// Per-instance constants for applying the operator to residuals living
    /// on `residual_grid`, evaluated on `query` (DeepONet only; spectral
    /// output always lives on the residual grid).
    pub fn context(
        &self,
        k: &FieldSample,
        residual_grid: Grid1D,
        query: Option<&[f64]>,
    ) -> Result<OperatorContext> {
        let train = self.train_grid();
        let (shift, scale) = match &self.arch {
            Arch::DeepOnet(a) => (a.k_shift, a.k_scale),
            Arch::Spectral(a) => (a.k_shift, a.k_scale),
        };
        let k_train: Vec<f64> =
            sample_piecewise_linear(&k.coords(), &k.values, &train.nodes(), false)
                .into_iter()
                .map(|v| (v - shift) / scale)
                .collect();
        match &self.arch {
            Arch::DeepOnet(_) => {
                let query = query
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| residual_grid.nodes());
                if let Some(&bad) = query.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    return Err(Error::QueryOutOfDomain(bad));
                }
                let restrict = (residual_grid != train).then(|| {
                    Arc::new(TransferMap(TransferMatrix::between(&residual_grid, &train)))
                        as Arc<dyn TapeMap>
                });
                Ok(OperatorContext {
                    k_train,
                    residual_n: residual_grid.n_interior(),
                    query,
                    restrict,
                    filter: None,
                    basis: None,
                })
            }
            Arch::Spectral(a) => Ok(OperatorContext {
                k_train,
                residual_n: residual_grid.n_interior(),
                query: residual_grid.nodes(),
                restrict: None,
                filter: Some(Arc::new(SineFilter::new(
                    residual_grid.n_interior(),
                    a.n_modes,
                ))),
                basis: None,
            }),
        }
    }

    /// Record `N(r)` on the tape. `r` must be a residual on the context's grid.
    pub fn build(&self, tape: &mut Tape, r: Var, ctx: &OperatorContext) -> Var {
        match &self.arch {
            Arch::DeepOnet(a) => super::deeponet::build(a, tape, r, ctx),
            Arch::Spectral(a) => super::spectral::build(a, tape, r, ctx),
        }
    }

    /// Evaluate `N(r)` without keeping the tape.
    pub fn apply_with(&self, r: &[f64], ctx: &OperatorContext) -> Result<Vec<f64>> {
        if r.len() != ctx.residual_n {
            return Err(Error::DimensionMismatch {
                expected: ctx.residual_n,
                got: r.len(),
            });
        }
        let mut tape = Tape::new(&self.params);
        let rv = tape.leaf(r);
        let out = self.build(&mut tape, rv, ctx);
        Ok(tape.slice(out).to_vec())
    }

    /// `N(r)` with the output on the residual's own grid.
    pub fn apply(&self, r: &[f64], k: &FieldSample) -> Result<Vec<f64>> {
        let grid = Grid1D::new(r.len())?;
        let ctx = self.context(k, grid, None)?;
        self.apply_with(r, &ctx)
    }

    /// Cache everything that depends only on `(params, k, grid)` for
    /// repeated application inside a solve.
    pub fn prepare(&self, k: &FieldSample, grid: Grid1D) -> Result<PreparedOperator<'_>> {
        let mut ctx = self.context(k, grid, None)?;
        match &self.arch {
            Arch::DeepOnet(a) => {
                ctx.basis = Some(super::deeponet::trunk_basis(a, &self.params, &ctx.query))
            }
            Arch::Spectral(a) => {
                let mult = super::spectral::multipliers(a, &self.params, &ctx.k_train);
                return Ok(PreparedOperator {
                    op: self,
                    ctx,
                    multipliers: Some(mult),
                });
            }
        }
        Ok(PreparedOperator {
            op: self,
            ctx,
            multipliers: None,
        })
    }
}

/// Constants shared by every application of an operator to one instance.
#[derive(Clone)]
pub struct OperatorContext {
    pub(crate) k_train: Vec<f64>,
    pub(crate) residual_n: usize,
    pub(crate) query: Vec<f64>,
    pub(crate) restrict: Option<Arc<dyn TapeMap>>,
    pub(crate) filter: Option<Arc<SineFilter>>,
    pub(crate) basis: Option<DMatrix<f64>>,
}

impl OperatorContext {
    pub fn output_len(&self) -> usize {
        self.query.len()
    }
}

/// An operator bound to one coefficient field and grid.
pub struct PreparedOperator<'a> {
    op: &'a CorrectionOperator,
    ctx: OperatorContext,
    multipliers: Option<Vec<f64>>,
}

impl PreparedOperator<'_> {
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        match (&self.multipliers, &self.ctx.filter) {
            (Some(m), Some(filter)) => filter.apply(r, m),
            _ => self
                .op
                .apply_with(r, &self.ctx)
                .expect("residual length fixed by prepare"),
        }
    }

    pub fn operator(&self) -> &CorrectionOperator {
        self.op
    }
}

pub(crate) struct TransferMap(pub TransferMatrix);

impl TapeMap for TransferMap {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.0.apply(x)
    }
    fn backward(&self, g: &[f64]) -> Vec<f64> {
        self.0.apply_transpose(g)
    }
}
