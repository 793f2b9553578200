use std::sync::Arc;

use super::norms::{norm_eval, NormMap};
use super::{Framework, LossBasis, Objective};
use crate::acceleration::UpdateKind;
use crate::neural::{CorrectionOperator, OperatorContext};
use crate::par::{map_slice, Parallelism};
use crate::problems::{Instance, LinearSystem};
use crate::smoothers::{
    propagate_error, propagate_error_transpose, smoother_sweep, SmootherConfig,
};
use crate::solver::SolverConfig;
use crate::tape::{Tape, TapeMap, Var};
use crate::{Error, Result};

/// One training instance with everything the losses need precomputed.
#[derive(Clone)]
pub struct TrainingItem {
    pub index: usize,
    pub(crate) sys: Arc<LinearSystem>,
    pub(crate) ctx: OperatorContext,
    pub(crate) u_star: Option<Vec<f64>>,
    /// Squared norm of the loss denominator (`u*` or `f`).
    pub(crate) ref_norm: f64,
    pub(crate) h: f64,
}

impl TrainingItem {
    pub fn system(&self) -> &LinearSystem {
        &self.sys
    }

    pub fn u_star(&self) -> Option<&[f64]> {
        self.u_star.as_deref()
    }

    pub fn context(&self) -> &OperatorContext {
        &self.ctx
    }
}

/// Instances ready for a given objective, minus degenerate ones.
pub struct PreparedItems {
    pub items: Vec<TrainingItem>,
    /// Dataset indices dropped because the loss denominator vanished.
    pub skipped: Vec<usize>,
}

pub fn prepare_items(
    op: &CorrectionOperator,
    instances: &[Instance],
    objective: &Objective,
) -> Result<PreparedItems> {
    objective.validate()?;
    let mut items = Vec::with_capacity(instances.len());
    let mut skipped = Vec::new();
    for (index, inst) in instances.iter().enumerate() {
        if objective.requires_reference() && inst.u_star.is_none() {
            return Err(Error::ObjectiveMismatch(format!(
                "{} needs reference solutions; instance {index} has none",
                objective.label()
            )));
        }
        let h = inst.grid().h();
        let denom: &[f64] = match objective.basis {
            LossBasis::ErrorBased => inst.u_star.as_deref().unwrap_or(&[]),
            LossBasis::ResidualBased => inst.f(),
        };
        if crate::norm2(denom) < 1e-14 {
            skipped.push(index);
            continue;
        }
        items.push(TrainingItem {
            index,
            sys: Arc::new(inst.system.clone()),
            ctx: op.context(&inst.k, inst.grid(), None)?,
            u_star: inst.u_star.clone(),
            ref_norm: norm_eval(denom, objective.norm, h),
            h,
        });
    }
    Ok(PreparedItems { items, skipped })
}

struct SystemMap(Arc<LinearSystem>);

impl TapeMap for SystemMap {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.0.apply(x)
    }
    fn backward(&self, g: &[f64]) -> Vec<f64> {
        self.0.apply_transpose(g)
    }
}

struct SmootherMap(Arc<LinearSystem>, SmootherConfig);

impl TapeMap for SmootherMap {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        propagate_error(&self.0, x, &self.1)
    }
    fn backward(&self, g: &[f64]) -> Vec<f64> {
        propagate_error_transpose(&self.0, g, &self.1)
    }
}

/// Normalized squared-norm term for iterate `u`.
fn term(
    tape: &mut Tape,
    u: Var,
    item: &TrainingItem,
    objective: &Objective,
    a: &Arc<dyn TapeMap>,
) -> Var {
    let d = match objective.basis {
        LossBasis::ErrorBased => {
            let s = tape.leaf(item.u_star.as_deref().expect("checked by prepare_items"));
            tape.sub(s, u)
        }
        LossBasis::ResidualBased => {
            let f = tape.leaf(&item.sys.rhs);
            let au = tape.map(u, a.clone());
            tape.sub(f, au)
        }
    };
    let nm = tape.scalar_map(
        d,
        Arc::new(NormMap {
            spec: objective.norm,
            h: item.h,
        }),
    );
    tape.scale_const(nm, 1.0 / item.ref_norm)
}

/// Record one instance's loss. Dynamic objectives unroll `K` cycles from
/// `u = 0`, each `n` affine smoother sweeps followed by the correction.
fn record(
    op: &CorrectionOperator,
    tape: &mut Tape,
    item: &TrainingItem,
    objective: &Objective,
    smoother: &SmootherConfig,
) -> Result<Var> {
    let a: Arc<dyn TapeMap> = Arc::new(SystemMap(item.sys.clone()));
    match objective.framework {
        Framework::Static => {
            let f = tape.leaf(&item.sys.rhs);
            let y = op.build(tape, f, &item.ctx);
            Ok(term(tape, y, item, objective, &a))
        }
        Framework::Dynamic => {
            let n = item.sys.n();
            let offset = smoother_sweep(&item.sys, &vec![0.0; n], smoother)?;
            let e: Arc<dyn TapeMap> = Arc::new(SmootherMap(item.sys.clone(), *smoother));
            let mut u: Option<Var> = None;
            let mut terms = Vec::with_capacity(objective.unroll);
            for cycle in 1..=objective.unroll {
                let c = tape.leaf(&offset);
                let smoothed = match u {
                    None => c,
                    Some(u) => {
                        let eu = tape.map(u, e.clone());
                        tape.add(eu, c)
                    }
                };
                let f = tape.leaf(&item.sys.rhs);
                let au = tape.map(smoothed, a.clone());
                let r = tape.sub(f, au);
                let corr = op.build(tape, r, &item.ctx);
                let next = tape.add(smoothed, corr);
                if tape.slice(next).iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteIterate { cycle });
                }
                terms.push(term(tape, next, item, objective, &a));
                u = Some(next);
            }
            let total = tape.sum(terms);
            Ok(tape.scale_const(total, 1.0 / objective.unroll as f64))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Sum,
}

/// Loss value with its exact parameter gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct TapeGradient {
    pub loss_value: f64,
    pub grad: Vec<f64>,
    /// Sum over batch members of their tape sizes.
    pub tape_bytes: usize,
}

/// Reverse-mode loss and gradient over a batch. Members may run in
/// parallel; the reduction always follows batch order.
pub fn objective_and_grad(
    op: &CorrectionOperator,
    batch: &[TrainingItem],
    objective: &Objective,
    smoother: &SmootherConfig,
    reduction: Reduction,
    mode: Parallelism,
) -> Result<TapeGradient> {
    let parts = map_slice(batch, mode, |item| -> Result<(f64, Vec<f64>, usize)> {
        let mut tape = Tape::new(&op.params);
        let out = record(op, &mut tape, item, objective, smoother)?;
        Ok((tape.scalar(out), tape.gradient(out), tape.bytes()))
    });
    let scale = match reduction {
        Reduction::Mean => 1.0 / batch.len().max(1) as f64,
        Reduction::Sum => 1.0,
    };
    let mut loss_value = 0.0;
    let mut grad = vec![0.0; op.params.len()];
    let mut tape_bytes = 0;
    for (i, part) in parts.into_iter().enumerate() {
        let (loss, g, bytes) = part?;
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { batch_index: i });
        }
        loss_value += scale * loss;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += scale * v;
        }
        tape_bytes += bytes;
    }
    Ok(TapeGradient {
        loss_value,
        grad,
        tape_bytes,
    })
}

/// Static loss with an arbitrary correction `correct(item, r)`.
pub fn static_loss_with(
    items: &[TrainingItem],
    objective: &Objective,
    correct: &(dyn Fn(&TrainingItem, &[f64]) -> Vec<f64> + Sync),
) -> f64 {
    let total: f64 = items
        .iter()
        .map(|item| {
            let y = correct(item, &item.sys.rhs);
            loss_term(item, objective, &y)
        })
        .sum();
    total / items.len().max(1) as f64
}

fn loss_term(item: &TrainingItem, objective: &Objective, u: &[f64]) -> f64 {
    let d: Vec<f64> = match objective.basis {
        LossBasis::ErrorBased => item
            .u_star
            .as_deref()
            .unwrap()
            .iter()
            .zip(u)
            .map(|(a, b)| a - b)
            .collect(),
        LossBasis::ResidualBased => item.sys.residual(u),
    };
    norm_eval(&d, objective.norm, item.h) / item.ref_norm
}

/// Dynamic loss with an arbitrary correction, unrolling `objective.unroll`
/// cycles with fixed unit steps.
pub fn dynamic_loss_with(
    items: &[TrainingItem],
    objective: &Objective,
    smoother: &SmootherConfig,
    correct: &(dyn Fn(&TrainingItem, &[f64]) -> Vec<f64> + Sync),
) -> Result<f64> {
    let mut total = 0.0;
    for item in items {
        let mut u = vec![0.0; item.sys.n()];
        let mut acc = 0.0;
        for cycle in 1..=objective.unroll {
            let smoothed = smoother_sweep(&item.sys, &u, smoother)?;
            let y = correct(item, &item.sys.residual(&smoothed));
            u = smoothed.iter().zip(&y).map(|(a, b)| a + b).collect();
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteIterate { cycle });
            }
            acc += loss_term(item, objective, &u);
        }
        total += acc / objective.unroll as f64;
    }
    Ok(total / items.len().max(1) as f64)
}

/// Mean static loss of `op` over `items`.
pub fn static_loss(
    op: &CorrectionOperator,
    items: &[TrainingItem],
    objective: &Objective,
) -> Result<f64> {
    if objective.framework != Framework::Static {
        return Err(Error::ObjectiveMismatch(format!(
            "{} is not static",
            objective.label()
        )));
    }
    Ok(static_loss_with(items, objective, &|item, r| {
        op.apply_with(r, &item.ctx).expect("context matches item")
    }))
}

/// Mean dynamic loss of `op`; the solver config must use fixed steps.
pub fn dynamic_loss(
    op: &CorrectionOperator,
    items: &[TrainingItem],
    objective: &Objective,
    solver_cfg: &SolverConfig,
) -> Result<f64> {
    if objective.framework != Framework::Dynamic {
        return Err(Error::ObjectiveMismatch(format!(
            "{} is not dynamic",
            objective.label()
        )));
    }
    if solver_cfg.strategy.kind != UpdateKind::FixedStep {
        return Err(Error::InvalidArgument(
            "dynamic training unrolls fixed-step cycles only".into(),
        ));
    }
    dynamic_loss_with(items, objective, &solver_cfg.smoother, &|item, r| {
        op.apply_with(r, &item.ctx).expect("context matches item")
    })
}
