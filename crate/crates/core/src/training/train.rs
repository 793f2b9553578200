use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{objective_and_grad, prepare_items, Reduction};
use super::optim::{clip_gradient, Optimizer, OptimizerKind};
use super::Objective;
use crate::neural::CorrectionOperator;
use crate::par::Parallelism;
use crate::problems::Instance;
use crate::smoothers::SmootherConfig;
use crate::solver::write_file;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub grad_clip: f64,
    /// Smoother unrolled inside dynamic objectives.
    pub smoother: SmootherConfig,
    pub parallelism: Parallelism,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 100,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            grad_clip: 10.0,
            smoother: SmootherConfig::default(),
            parallelism: Parallelism::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument(
                "batch_size and epochs must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.grad_clip > 0.0) {
            return Err(Error::InvalidArgument(
                "learning_rate and grad_clip must be positive".into(),
            ));
        }
        self.smoother.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean pre-update batch loss over the epoch, weighted by batch size.
    pub loss: f64,
    pub wall_ms: f64,
    /// Largest per-batch sum of tape sizes seen in the epoch.
    pub peak_tape_bytes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn total_wall_ms(&self) -> f64 {
        self.records.iter().map(|r| r.wall_ms).sum()
    }

    pub fn peak_tape_bytes(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.peak_tape_bytes)
            .max()
            .unwrap_or(0)
    }

    pub fn mean_epoch_ms(&self) -> f64 {
        self.total_wall_ms() / self.records.len().max(1) as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,loss,wall_ms,peak_tape_bytes\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{}\n",
                r.epoch, r.loss, r.wall_ms, r.peak_tape_bytes
            ));
        }
        write_file(path, out.as_bytes())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub op: CorrectionOperator,
    pub history: TrainingHistory,
    /// Set when a non-finite loss stopped training early.
    pub halted: Option<String>,
    pub skipped: Vec<usize>,
}

/// Mini-batch training with seeded shuffling; a fixed seed gives
/// bit-identical parameters regardless of thread count.
pub fn train(
    op: CorrectionOperator,
    dataset: &[Instance],
    objective: &Objective,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let prepared = prepare_items(&op, dataset, objective)?;
    if prepared.items.is_empty() {
        return Err(Error::InvalidArgument(
            "no usable training instances".into(),
        ));
    }
    let mut op = op;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, op.params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..prepared.items.len()).collect();
    let mut history = TrainingHistory::default();
    let mut halted = None;
    'epochs: for epoch in 0..cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut peak = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| prepared.items[i].clone()).collect();
            let mut g = match objective_and_grad(
                &op,
                &batch,
                objective,
                &cfg.smoother,
                Reduction::Mean,
                cfg.parallelism,
            ) {
                Ok(g) => g,
                Err(e) => {
                    halted = Some(format!("epoch {epoch}: {e}"));
                    break 'epochs;
                }
            };
            loss_sum += g.loss_value * batch.len() as f64;
            peak = peak.max(g.tape_bytes);
            clip_gradient(&mut g.grad, cfg.grad_clip);
            opt.step(&mut op.params, &g.grad);
        }
        history.records.push(EpochRecord {
            epoch,
            loss: loss_sum / order.len() as f64,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            peak_tape_bytes: peak,
        });
    }
    Ok(TrainOutcome {
        op,
        history,
        halted,
        skipped: prepared.skipped,
    })
}
