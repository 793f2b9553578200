//! Verb implementations. Each returns whether its verdicts passed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use dlhim_core::neural::checkpoint_load;
use dlhim_core::par::init_threads;

use crate::bench::{run_bench, verdict_name};
use crate::config::{resolve_out, ExperimentConfig, Scenario};
use crate::pipeline::{
    fmt_f64, fmt_opt, generate_test, generate_train, load_or, save_operator, test_dir, train_arm,
    train_dir, write_datasets, write_text, RunSummary,
};

/// Flags shared by every verb.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `out_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the data-parallel pool.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

impl Common {
    /// Load `--config`, falling back to `preset`, then apply overrides.
    pub fn resolve(&self, preset: Option<Scenario>) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
        if let Some(t) = self.threads {
            init_threads(t);
        }
        let mut cfg = match (&self.config, preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(s)) => s.preset(),
            (None, None) => anyhow::bail!("--config is required for this verb"),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        let out = resolve_out(&cfg, self.out.as_deref());
        cfg.out_dir = out.clone();
        cfg.validate()?;
        Ok((cfg, out))
    }
}

/// Write the resolved config next to the outputs so a run can be replayed.
fn echo_config(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    write_text(&out.join("resolved_config.toml"), &cfg.to_toml_string())
}

pub fn gen(common: &Common) -> anyhow::Result<bool> {
    let (cfg, out) = common.resolve(None)?;
    echo_config(&cfg, &out)?;
    let dirs = write_datasets(&cfg, &out)?;
    for d in &dirs {
        println!("wrote {}", d.display());
    }
    Ok(true)
}

pub fn operator_path(out: &Path, arm: &str, repeat: usize) -> PathBuf {
    out.join("runs")
        .join(arm)
        .join(format!("seed{repeat}"))
        .join("operator.ckpt")
}

pub fn train(common: &Common, arm: Option<&str>, repeat: Option<usize>) -> anyhow::Result<bool> {
    let (cfg, out) = common.resolve(None)?;
    let arms: Vec<usize> = match arm {
        Some(label) => vec![cfg.find_arm(label)?],
        None => (0..cfg.arms.len()).collect(),
    };
    let repeats: Vec<usize> = match repeat {
        Some(r) if r >= cfg.data.seeds => {
            anyhow::bail!("--repeat {r} is outside 0..{}", cfg.data.seeds)
        }
        Some(r) => vec![r],
        None => (0..cfg.data.seeds).collect(),
    };
    echo_config(&cfg, &out)?;
    let mut ok = true;
    for &r in &repeats {
        for &a in &arms {
            let arm = &cfg.arms[a];
            let data = load_or(&train_dir(&out, arm.problem, r), || {
                generate_train(&cfg, arm.problem, r)
            })?;
            let outcome = train_arm(&cfg, arm, r, &data)?;
            let path = operator_path(&out, &arm.label, r);
            save_operator(&outcome.op, &path)?;
            outcome
                .history
                .write_csv(&path.with_file_name("history.csv"))?;
            if let Some(h) = &outcome.halted {
                ok = false;
                eprintln!("{} seed{r}: halted: {h}", arm.label);
            }
            println!(
                "{} seed{r}: epochs={} final_loss={} peak_tape_bytes={} wall_ms={:.1} -> {}",
                arm.label,
                outcome.history.records.len(),
                fmt_opt(outcome.history.final_loss()),
                outcome.history.peak_tape_bytes(),
                outcome.history.total_wall_ms(),
                path.display()
            );
        }
    }
    Ok(ok)
}

pub struct SolveArgs<'a> {
    pub checkpoint: &'a Path,
    pub arm: Option<&'a str>,
    pub repeat: usize,
    pub instance: usize,
}

/// Solve one test instance with every configured solver; passes when all converge.
pub fn solve(common: &Common, args: &SolveArgs<'_>) -> anyhow::Result<Vec<RunSummary>> {
    let (cfg, out) = common.resolve(None)?;
    let a = match args.arm {
        Some(label) => cfg.find_arm(label)?,
        None => 0,
    };
    let arm = &cfg.arms[a];
    echo_config(&cfg, &out)?;
    let op = checkpoint_load(args.checkpoint)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let tests = load_or(
        &test_dir(&out, arm.problem, args.repeat, arm.test_n),
        || generate_test(&cfg, arm.problem, args.repeat, arm.test_n),
    )?;
    let inst = tests
        .get(args.instance)
        .with_context(|| format!("--instance {} is outside 0..{}", args.instance, tests.len()))?;
    let dir = out
        .join("solve")
        .join(&arm.label)
        .join(format!("seed{}", args.repeat))
        .join(format!("inst{:03}", args.instance));
    let mut table = String::from(
        "solver,verdict,cycles,final_relative_residual,final_relative_error,stagnation_flagged\n",
    );
    let mut runs = Vec::new();
    for (label, s) in cfg.solver_labels().iter().zip(&cfg.solvers) {
        let trace = dlhim_core::solver::solve(inst, &op, s)?;
        trace.write_csv(&dir.join(format!("{label}.csv")))?;
        trace.write_metadata(&dir.join(format!("{label}.json")), s)?;
        let r = RunSummary::from_trace(&arm.label, args.repeat, args.instance, label, inst, &trace);
        let _ = writeln!(
            table,
            "{label},{},{},{},{},{}",
            verdict_name(r.verdict),
            r.cycles,
            fmt_f64(r.final_relative_residual),
            fmt_opt(r.final_relative_error),
            r.stagnation_flagged
        );
        println!(
            "{label}: {} after {} cycles, relative residual {:.3e}",
            verdict_name(r.verdict),
            r.cycles,
            r.final_relative_residual
        );
        runs.push(r);
    }
    write_text(&dir.join("comparison.csv"), &table)?;
    println!("traces in {}", dir.display());
    Ok(runs)
}

pub fn bench(common: &Common, scenario: Scenario) -> anyhow::Result<bool> {
    let (cfg, out) = common.resolve(Some(scenario))?;
    let scenario = cfg.scenario.or(Some(scenario));
    let report = run_bench(&cfg, scenario, &out)?;
    for c in &report.checks {
        println!("{}", c.line());
    }
    for f in &report.failures {
        println!("[FAIL] run failure: {f}");
    }
    println!(
        "{}: {} ({})",
        scenario.map_or("custom", |s| s.name()),
        if report.passed() { "PASS" } else { "FAIL" },
        out.display()
    );
    Ok(report.passed())
}

pub fn describe(
    common: &Common,
    scenario: Option<Scenario>,
    checkpoint: Option<&Path>,
) -> anyhow::Result<bool> {
    if common.config.is_some() || scenario.is_some() {
        let (cfg, _) = common.resolve(scenario)?;
        println!("{}", cfg.to_toml_string());
        for arm in &cfg.arms {
            println!("# {}: {}", arm.label, cfg.init_operator(arm, 0).describe());
        }
    }
    if let Some(path) = checkpoint {
        let op = checkpoint_load(path).with_context(|| format!("loading {}", path.display()))?;
        println!("# checkpoint {}: {}", path.display(), op.describe());
    }
    if common.config.is_none() && scenario.is_none() && checkpoint.is_none() {
        for s in Scenario::ALL {
            println!("{s}");
        }
    }
    Ok(true)
}
