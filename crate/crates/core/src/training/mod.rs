//! Loss objectives, static and unrolled (dynamic) training, and the
//! optimizer loop.

mod loss;
mod norms;
mod optim;
mod train;

pub use loss::{
    dynamic_loss, dynamic_loss_with, objective_and_grad, prepare_items, static_loss,
    static_loss_with, PreparedItems, Reduction, TapeGradient, TrainingItem,
};
pub use norms::{norm_eval, NormKind, NormSpec};
pub use optim::{clip_gradient, Optimizer, OptimizerKind};
pub use train::{train, EpochRecord, TrainConfig, TrainOutcome, TrainingHistory};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossBasis {
    ErrorBased,
    ResidualBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub basis: LossBasis,
    pub framework: Framework,
    /// Unrolled cycles `K`; ignored by static objectives.
    #[serde(default = "one")]
    pub unroll: usize,
    #[serde(default)]
    pub norm: NormSpec,
}

fn one() -> usize {
    1
}

impl Objective {
    pub fn new(basis: LossBasis, framework: Framework, norm: NormKind) -> Self {
        Self {
            basis,
            framework,
            unroll: 1,
            norm: NormSpec::new(norm),
        }
    }

    pub fn static_error_l2() -> Self {
        Self::new(LossBasis::ErrorBased, Framework::Static, NormKind::L2)
    }

    pub fn static_residual_l2() -> Self {
        Self::new(LossBasis::ResidualBased, Framework::Static, NormKind::L2)
    }

    pub fn dynamic(basis: LossBasis, norm: NormKind, unroll: usize) -> Self {
        Self {
            unroll,
            ..Self::new(basis, Framework::Dynamic, norm)
        }
    }

    /// All twelve basis x framework x norm combinations (`K` for dynamic ones).
    pub fn all(unroll: usize) -> Vec<Self> {
        let mut out = Vec::new();
        for framework in [Framework::Static, Framework::Dynamic] {
            for basis in [LossBasis::ErrorBased, LossBasis::ResidualBased] {
                for norm in [NormKind::L2, NormKind::L1, NormKind::H1] {
                    out.push(Self {
                        unroll,
                        ..Self::new(basis, framework, norm)
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.framework == Framework::Dynamic && self.unroll == 0 {
            return Err(Error::InvalidArgument(
                "dynamic objectives need unroll >= 1".into(),
            ));
        }
        self.norm.validate()
    }

    pub fn requires_reference(&self) -> bool {
        self.basis == LossBasis::ErrorBased
    }

    /// Short name such as `static_error_l2` or `dynamic5_residual_h1`.
    pub fn label(&self) -> String {
        let fw = match self.framework {
            Framework::Static => "static".to_string(),
            Framework::Dynamic => format!("dynamic{}", self.unroll),
        };
        let basis = match self.basis {
            LossBasis::ErrorBased => "error",
            LossBasis::ResidualBased => "residual",
        };
        format!("{fw}_{basis}_{}", self.norm.kind.label())
    }
}
