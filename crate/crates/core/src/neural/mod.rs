//! Learned correction operators `r -> N(r)` that map residuals to error
//! estimates.
//!
//! Two families share one parameter-vector representation:
//!
//! * [`OperatorKind::DeepOnet`]: branch net on (residual, coefficient)
//!   restricted to the training grid, trunk net on query coordinates.
//!   Nonlinear in the residual (degree-1 homogeneous with input
//!   normalization).
//! * [`OperatorKind::Spectral`]: a sine-basis filter whose per-mode complex
//!   multipliers come from a small conditioning net on the coefficient.
//!   Exactly linear in the residual.

mod checkpoint;
mod deeponet;
mod operator;
mod spectral;

pub use checkpoint::{checkpoint_load, checkpoint_save, CHECKPOINT_VERSION};
pub use deeponet::{deeponet_apply, deeponet_apply_at};
pub use operator::{
    Arch, CorrectionOperator, DeepOnetArch, OperatorContext, OperatorKind, PreparedOperator,
    SpectralArch,
};
pub use spectral::{spectral_apply, SineFilter};
