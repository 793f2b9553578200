//! Seed plumbing, data generation, training and solve jobs shared by every verb.

use std::path::{Path, PathBuf};

use anyhow::Context;
use dlhim_core::neural::{checkpoint_save, CorrectionOperator};
use dlhim_core::par::{map_indexed, Parallelism};
use dlhim_core::problems::{
    generate_instances, load_dataset, mix_seed, save_dataset, Instance, ProblemKind,
};
use dlhim_core::solver::{solve, ConvergenceTrace, SolverConfig, Verdict};
use dlhim_core::training::{train, TrainConfig, TrainOutcome};
use serde::Serialize;

use crate::config::{ArmConfig, ExperimentConfig};

/// Independent RNG streams for repetition `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    pub train_data: u64,
    pub test_data: u64,
    pub init: u64,
    pub shuffle: u64,
}

pub fn seed_streams(master: u64, repeat: usize) -> SeedStreams {
    let base = mix_seed(master, 1000 + repeat as u64);
    SeedStreams {
        train_data: mix_seed(base, 1),
        test_data: mix_seed(base, 2),
        init: mix_seed(base, 3),
        shuffle: mix_seed(base, 4),
    }
}

fn problem_tag(kind: ProblemKind) -> u64 {
    match kind {
        ProblemKind::Diffusion => 1,
        ProblemKind::Helmholtz => 2,
    }
}

pub fn problem_name(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Diffusion => "diffusion",
        ProblemKind::Helmholtz => "helmholtz",
    }
}

pub fn train_dir(root: &Path, kind: ProblemKind, repeat: usize) -> PathBuf {
    root.join("data")
        .join(problem_name(kind))
        .join(format!("seed{repeat}"))
        .join("train")
}

pub fn test_dir(root: &Path, kind: ProblemKind, repeat: usize, n: usize) -> PathBuf {
    root.join("data")
        .join(problem_name(kind))
        .join(format!("seed{repeat}"))
        .join(format!("test_n{n}"))
}

pub fn generate_train(
    cfg: &ExperimentConfig,
    kind: ProblemKind,
    repeat: usize,
) -> anyhow::Result<Vec<Instance>> {
    let seed = mix_seed(
        seed_streams(cfg.master_seed, repeat).train_data,
        problem_tag(kind),
    );
    let spec = cfg.dataset_spec(kind, cfg.data.train_n, cfg.data.train_count, seed);
    Ok(generate_instances(&spec, cfg.train.parallelism)?)
}

pub fn generate_test(
    cfg: &ExperimentConfig,
    kind: ProblemKind,
    repeat: usize,
    n: usize,
) -> anyhow::Result<Vec<Instance>> {
    let stream = seed_streams(cfg.master_seed, repeat).test_data;
    let seed = mix_seed(mix_seed(stream, problem_tag(kind)), n as u64);
    let spec = cfg.dataset_spec(kind, n, cfg.data.test_count, seed);
    Ok(generate_instances(&spec, cfg.train.parallelism)?)
}

/// Write train and test sets for every problem and repetition under `root/data`.
pub fn write_datasets(cfg: &ExperimentConfig, root: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for kind in cfg.problem_kinds() {
        let mut sizes: Vec<usize> = cfg
            .arms
            .iter()
            .filter(|a| a.problem == kind)
            .map(|a| a.test_n)
            .collect();
        sizes.sort_unstable();
        sizes.dedup();
        for repeat in 0..cfg.data.seeds {
            let dir = train_dir(root, kind, repeat);
            let data = generate_train(cfg, kind, repeat)?;
            let seed = mix_seed(
                seed_streams(cfg.master_seed, repeat).train_data,
                problem_tag(kind),
            );
            save_dataset(
                &dir,
                &cfg.dataset_spec(kind, cfg.data.train_n, cfg.data.train_count, seed),
                &data,
            )?;
            written.push(dir);
            for &n in &sizes {
                let dir = test_dir(root, kind, repeat, n);
                let data = generate_test(cfg, kind, repeat, n)?;
                let stream = seed_streams(cfg.master_seed, repeat).test_data;
                let seed = mix_seed(mix_seed(stream, problem_tag(kind)), n as u64);
                save_dataset(
                    &dir,
                    &cfg.dataset_spec(kind, n, cfg.data.test_count, seed),
                    &data,
                )?;
                written.push(dir);
            }
        }
    }
    Ok(written)
}

/// Load a dataset from `dir` when present, otherwise regenerate it.
pub fn load_or(
    dir: &Path,
    make: impl FnOnce() -> anyhow::Result<Vec<Instance>>,
) -> anyhow::Result<Vec<Instance>> {
    if dir.join("manifest.json").exists() {
        let (_, data) = load_dataset(dir).with_context(|| format!("loading {}", dir.display()))?;
        Ok(data)
    } else {
        make()
    }
}

pub fn train_arm(
    cfg: &ExperimentConfig,
    arm: &ArmConfig,
    repeat: usize,
    data: &[Instance],
) -> anyhow::Result<TrainOutcome> {
    if arm.objective.requires_reference() && data.iter().any(|i| i.u_star.is_none()) {
        anyhow::bail!(
            "arm {:?}: objective {} needs reference solutions but the dataset has none",
            arm.label,
            arm.objective.label()
        );
    }
    let streams = seed_streams(cfg.master_seed, repeat);
    let op = cfg.init_operator(arm, streams.init);
    let tc = TrainConfig {
        seed: mix_seed(streams.shuffle, cfg.train.seed),
        ..cfg.train.clone()
    };
    Ok(train(op, data, &arm.objective, &tc)?)
}

/// Per-run digest used by summaries and verdicts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub arm: String,
    pub repeat: usize,
    pub instance: usize,
    pub solver: String,
    pub verdict: Verdict,
    /// Index of the last recorded cycle.
    pub cycles: usize,
    pub final_relative_residual: f64,
    pub final_relative_error: Option<f64>,
    pub stagnation_flagged: bool,
    /// Median residual over median update in the final window.
    pub plateau_gap: Option<f64>,
    pub max_window_gap: Option<f64>,
    #[serde(skip)]
    pub relative_residuals: Vec<f64>,
}

impl RunSummary {
    pub fn from_trace(
        arm: &str,
        repeat: usize,
        instance: usize,
        solver: &str,
        inst: &Instance,
        t: &ConvergenceTrace,
    ) -> Self {
        let u_norm = inst
            .u_star
            .as_ref()
            .map(|u| u.iter().map(|v| v * v).sum::<f64>().sqrt());
        let last = t.rows.last();
        let final_relative_error = match (last.and_then(|r| r.err_norm), u_norm) {
            (Some(e), Some(n)) if n > 0.0 => Some(e / n),
            _ => None,
        };
        let plateau_gap = t
            .stagnation
            .as_ref()
            .map(|s| s.median_relative_residual * t.f_norm / s.median_update);
        Self {
            arm: arm.to_string(),
            repeat,
            instance,
            solver: solver.to_string(),
            verdict: t.verdict,
            cycles: last.map_or(0, |r| r.cycle),
            final_relative_residual: t.final_relative_residual(),
            final_relative_error,
            stagnation_flagged: t.stagnation.as_ref().is_some_and(|s| s.flagged),
            plateau_gap,
            max_window_gap: t.max_window_gap,
            relative_residuals: t.relative_residuals(),
        }
    }
}

/// Solve every `(instance, solver)` pair for one operator.
pub fn solve_all(
    op: &CorrectionOperator,
    instances: &[Instance],
    solvers: &[SolverConfig],
    mode: Parallelism,
) -> Vec<Vec<dlhim_core::Result<ConvergenceTrace>>> {
    map_indexed(instances.len(), mode, |i| {
        solvers
            .iter()
            .map(|s| solve(&instances[i], op, s))
            .collect()
    })
}

pub fn save_operator(op: &CorrectionOperator, path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    checkpoint_save(op, path).with_context(|| format!("writing {}", path.display()))
}

/// Full-precision float for CSV output.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string().to_lowercase()
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f64)
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
