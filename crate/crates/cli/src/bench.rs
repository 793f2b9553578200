//! Scenario runner: trains every arm for every repetition, solves the test
//! sets with every configured solver, then writes summaries and verdicts.
//!
//! Everything outside `timing/` is a pure function of the config.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use dlhim_core::acceleration::UpdateKind;
use dlhim_core::neural::OperatorKind;
use dlhim_core::par::{map_indexed, Parallelism};
use dlhim_core::problems::{Instance, ProblemKind};
use dlhim_core::solver::Verdict;
use dlhim_core::training::{Framework, LossBasis, NormKind, Objective, TrainingHistory};
use serde::Serialize;

use crate::config::{ExperimentConfig, Scenario};
use crate::pipeline::{
    fmt_f64, fmt_opt, generate_test, generate_train, save_operator, solve_all, train_arm,
    write_text, RunSummary,
};

/// Training digest for one `(arm, repeat)`.
#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub arm: String,
    pub repeat: usize,
    pub epochs: usize,
    pub final_loss: Option<f64>,
    pub peak_tape_bytes: usize,
    pub halted: Option<String>,
    pub skipped: Vec<usize>,
    #[serde(skip)]
    pub history: TrainingHistory,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub value: Option<f64>,
    pub threshold: String,
    pub pass: bool,
    /// Recorded checks are reported without affecting the verdict.
    pub gated: bool,
    /// Wall-clock values live under `timing/` only.
    #[serde(skip)]
    pub timing: bool,
}

impl Check {
    fn new(criterion: u8, name: &str, value: Option<f64>, threshold: &str, pass: bool) -> Self {
        Self {
            criterion,
            name: name.into(),
            value,
            threshold: threshold.into(),
            pass,
            gated: true,
            timing: false,
        }
    }

    fn recorded(self) -> Self {
        Self {
            gated: false,
            ..self
        }
    }

    fn timed(self) -> Self {
        Self {
            timing: true,
            ..self
        }
    }

    pub fn line(&self) -> String {
        let status = match (self.pass, self.gated) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "MISS",
        };
        let value = self
            .value
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.4e}"));
        let tag = if self.gated { "" } else { " (recorded)" };
        format!(
            "[{status}] criterion {}: {} = {value} (want {}){tag}",
            self.criterion, self.name, self.threshold
        )
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub scenario: Option<Scenario>,
    pub training: Vec<TrainSummary>,
    pub runs: Vec<RunSummary>,
    pub checks: Vec<Check>,
    pub failures: Vec<String>,
}

impl BenchReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checks.iter().filter(|c| c.gated).all(|c| c.pass)
    }

    pub fn runs_for<'a>(
        &'a self,
        arm: &'a str,
        solver: &'a str,
    ) -> impl Iterator<Item = &'a RunSummary> + 'a {
        self.runs
            .iter()
            .filter(move |r| r.arm == arm && r.solver == solver)
    }
}

pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

struct TrainJob {
    arm: usize,
    repeat: usize,
}

/// Run the whole pipeline and write the report into `out`.
pub fn run_bench(
    cfg: &ExperimentConfig,
    scenario: Option<Scenario>,
    out: &Path,
) -> anyhow::Result<BenchReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    write_text(&out.join("resolved_config.toml"), &cfg.to_toml_string())?;
    let mode = cfg.train.parallelism;
    let mut failures = Vec::new();

    let mut train_sets: BTreeMap<(usize, ProblemKind), Vec<Instance>> = BTreeMap::new();
    let mut test_sets: BTreeMap<(usize, ProblemKind, usize), Vec<Instance>> = BTreeMap::new();
    for repeat in 0..cfg.data.seeds {
        for arm in &cfg.arms {
            if let Entry::Vacant(e) = train_sets.entry((repeat, arm.problem)) {
                e.insert(generate_train(cfg, arm.problem, repeat)?);
            }
            if let Entry::Vacant(e) = test_sets.entry((repeat, arm.problem, arm.test_n)) {
                e.insert(generate_test(cfg, arm.problem, repeat, arm.test_n)?);
            }
        }
    }

    let jobs: Vec<TrainJob> = (0..cfg.data.seeds)
        .flat_map(|repeat| (0..cfg.arms.len()).map(move |arm| TrainJob { arm, repeat }))
        .collect();
    // wall-clock comparisons need one job at a time
    let job_mode = if scenario == Some(Scenario::CostTable) {
        Parallelism::Sequential
    } else {
        mode
    };
    let trained = map_indexed(jobs.len(), job_mode, |j| {
        let job = &jobs[j];
        let arm = &cfg.arms[job.arm];
        train_arm(
            cfg,
            arm,
            job.repeat,
            &train_sets[&(job.repeat, arm.problem)],
        )
    });

    let labels = cfg.solver_labels();
    let solvers: Vec<_> = cfg
        .solvers
        .iter()
        .map(|s| dlhim_core::solver::SolverConfig {
            record_timing: false,
            ..s.clone()
        })
        .collect();
    let mut training = Vec::new();
    let mut runs = Vec::new();
    for (job, outcome) in jobs.iter().zip(trained) {
        let arm = &cfg.arms[job.arm];
        let dir = out
            .join("runs")
            .join(&arm.label)
            .join(format!("seed{}", job.repeat));
        let outcome = match outcome {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!(
                    "{} seed{}: training failed: {e:#}",
                    arm.label, job.repeat
                ));
                continue;
            }
        };
        if let Some(h) = &outcome.halted {
            failures.push(format!(
                "{} seed{}: training halted: {h}",
                arm.label, job.repeat
            ));
        }
        save_operator(&outcome.op, &dir.join("operator.ckpt"))?;
        outcome.history.write_csv(
            &out.join("timing")
                .join(&arm.label)
                .join(format!("seed{}", job.repeat))
                .join("history.csv"),
        )?;
        let summary = TrainSummary {
            arm: arm.label.clone(),
            repeat: job.repeat,
            epochs: outcome.history.records.len(),
            final_loss: outcome.history.final_loss(),
            peak_tape_bytes: outcome.history.peak_tape_bytes(),
            halted: outcome.halted.clone(),
            skipped: outcome.skipped.clone(),
            history: outcome.history.clone(),
        };
        write_text(
            &dir.join("train.json"),
            &(serde_json::to_string_pretty(&summary)? + "\n"),
        )?;
        let mut losses = String::from("epoch,loss,peak_tape_bytes\n");
        for r in &outcome.history.records {
            let _ = writeln!(
                losses,
                "{},{},{}",
                r.epoch,
                fmt_f64(r.loss),
                r.peak_tape_bytes
            );
        }
        write_text(&dir.join("loss.csv"), &losses)?;
        training.push(summary);

        let tests = &test_sets[&(job.repeat, arm.problem, arm.test_n)];
        let traces = solve_all(&outcome.op, tests, &solvers, mode);
        for (i, per_solver) in traces.into_iter().enumerate() {
            for ((label, cfg_s), trace) in labels.iter().zip(&solvers).zip(per_solver) {
                match trace {
                    Ok(t) => {
                        let stem = dir.join(label).join(format!("inst{i:03}"));
                        t.write_csv(&stem.with_extension("csv"))?;
                        t.write_metadata(&stem.with_extension("json"), cfg_s)?;
                        runs.push(RunSummary::from_trace(
                            &arm.label, job.repeat, i, label, &tests[i], &t,
                        ));
                    }
                    Err(e) => failures.push(format!(
                        "{} seed{} inst{i} {label}: {e}",
                        arm.label, job.repeat
                    )),
                }
            }
        }
    }

    let mut report = BenchReport {
        scenario,
        training,
        runs,
        checks: Vec::new(),
        failures,
    };
    report.checks = match scenario {
        Some(Scenario::FalseFixedPoint) => false_fixed_point_checks(cfg, &report),
        Some(Scenario::UpdateStrategies) => update_strategy_checks(cfg, &report),
        Some(Scenario::LossMatrix) => loss_matrix_checks(cfg, &report),
        Some(Scenario::CostTable) => cost_table_checks(cfg, &report),
        None => Vec::new(),
    };
    write_reports(cfg, &report, out)?;
    Ok(report)
}

fn write_reports(cfg: &ExperimentConfig, report: &BenchReport, out: &Path) -> anyhow::Result<()> {
    let mut csv = String::from(
        "arm,repeat,instance,solver,verdict,cycles,final_relative_residual,final_relative_error,stagnation_flagged,plateau_gap,max_window_gap\n",
    );
    for r in &report.runs {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.arm,
            r.repeat,
            r.instance,
            r.solver,
            verdict_name(r.verdict),
            r.cycles,
            fmt_f64(r.final_relative_residual),
            fmt_opt(r.final_relative_error),
            r.stagnation_flagged,
            fmt_opt(r.plateau_gap),
            fmt_opt(r.max_window_gap)
        );
    }
    write_text(&out.join("runs.csv"), &csv)?;

    let mut summary = String::from(
        "arm,solver,runs,converged,stagnated,diverged,max_cycles,median_final_relative_residual,median_final_relative_error,median_cycles,max_window_gap\n",
    );
    for arm in &cfg.arms {
        for label in cfg.solver_labels() {
            let rs: Vec<&RunSummary> = report.runs_for(&arm.label, &label).collect();
            let count = |v: Verdict| rs.iter().filter(|r| r.verdict == v).count();
            let gap = rs
                .iter()
                .filter_map(|r| r.max_window_gap)
                .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.max(g))));
            let _ = writeln!(
                summary,
                "{},{},{},{},{},{},{},{},{},{},{}",
                arm.label,
                label,
                rs.len(),
                count(Verdict::Converged),
                count(Verdict::Stagnated),
                count(Verdict::Diverged),
                count(Verdict::MaxCycles),
                fmt_opt(median(rs.iter().map(|r| r.final_relative_residual))),
                fmt_opt(median(rs.iter().filter_map(|r| r.final_relative_error))),
                fmt_opt(median(rs.iter().map(|r| r.cycles as f64))),
                fmt_opt(gap)
            );
        }
    }
    write_text(&out.join("summary.csv"), &summary)?;

    let checks: Vec<serde_json::Value> = report
        .checks
        .iter()
        .map(|c| {
            let mut v = serde_json::to_value(c).expect("check serializes");
            if c.timing {
                v["value"] = serde_json::Value::String("see timing/verdict.json".into());
            }
            v
        })
        .collect();
    let verdict = serde_json::json!({
        "scenario": report.scenario,
        "pass": report.passed(),
        "checks": checks,
        "failures": report.failures,
    });
    write_text(
        &out.join("verdict.json"),
        &(serde_json::to_string_pretty(&verdict)? + "\n"),
    )?;
    let timed: Vec<&Check> = report.checks.iter().filter(|c| c.timing).collect();
    let wall: BTreeMap<String, f64> = report
        .training
        .iter()
        .map(|t| {
            (
                format!("{}/seed{}", t.arm, t.repeat),
                t.history.total_wall_ms(),
            )
        })
        .collect();
    let timing = serde_json::json!({ "checks": timed, "train_wall_ms": wall });
    write_text(
        &out.join("timing").join("verdict.json"),
        &(serde_json::to_string_pretty(&timing)? + "\n"),
    )?;
    let mut text: String = report.checks.iter().map(|c| c.line() + "\n").collect();
    for f in &report.failures {
        let _ = writeln!(text, "[FAIL] run failure: {f}");
    }
    write_text(&out.join("timing").join("verdict.txt"), &text)?;
    Ok(())
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Converged => "converged",
        Verdict::Stagnated => "stagnated",
        Verdict::Diverged => "diverged",
        Verdict::MaxCycles => "max_cycles",
    }
}

fn solver_label(cfg: &ExperimentConfig, kind: UpdateKind) -> Option<String> {
    cfg.solvers
        .iter()
        .position(|s| s.strategy.kind == kind)
        .map(|i| cfg.solver_labels()[i].clone())
}

fn arm_label(
    cfg: &ExperimentConfig,
    op: OperatorKind,
    problem: ProblemKind,
    objective: Option<&Objective>,
) -> Option<String> {
    cfg.arms
        .iter()
        .find(|a| {
            a.operator.kind == op
                && a.problem == problem
                && objective.is_none_or(|o| {
                    a.objective.basis == o.basis
                        && a.objective.framework == o.framework
                        && a.objective.norm.kind == o.norm.kind
                })
        })
        .map(|a| a.label.clone())
}

fn missing(criterion: u8, what: &str) -> Check {
    Check::new(criterion, what, None, "configured", false)
}

fn per_repeat<'a>(
    runs: impl Iterator<Item = &'a RunSummary>,
) -> BTreeMap<usize, Vec<&'a RunSummary>> {
    let mut out: BTreeMap<usize, Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        out.entry(r.repeat).or_default().push(r);
    }
    out
}

fn false_fixed_point_checks(cfg: &ExperimentConfig, report: &BenchReport) -> Vec<Check> {
    let (Some(arm), Some(solver)) = (
        arm_label(cfg, OperatorKind::DeepOnet, ProblemKind::Diffusion, None),
        solver_label(cfg, UpdateKind::FixedStep),
    ) else {
        return vec![missing(
            4,
            "diffusion DeepONet arm with a fixed-step solver",
        )];
    };
    let groups = per_repeat(report.runs_for(&arm, &solver));
    let gaps = median(
        groups
            .values()
            .filter_map(|rs| median(rs.iter().filter_map(|r| r.plateau_gap))),
    );
    let flagged = median(
        groups
            .values()
            .map(|rs| rs.iter().filter(|r| r.stagnation_flagged).count() as f64 / rs.len() as f64),
    );
    vec![
        Check::new(
            4,
            "median plateau gap residual/update",
            gaps,
            ">= 1e3",
            gaps.is_some_and(|g| g >= 1e3),
        ),
        Check::new(
            4,
            "median fraction flagged stagnated",
            flagged,
            ">= 0.5",
            flagged.is_some_and(|f| f >= 0.5),
        ),
    ]
}

fn update_strategy_checks(cfg: &ExperimentConfig, report: &BenchReport) -> Vec<Check> {
    let mut checks = Vec::new();
    let fixed = solver_label(cfg, UpdateKind::FixedStep);
    let aa = solver_label(cfg, UpdateKind::StandardAa);
    let pa = solver_label(cfg, UpdateKind::PhysicsAwareAa);
    let (Some(fixed), Some(aa), Some(pa)) = (fixed, aa, pa) else {
        return vec![missing(5, "fixed-step, standard AA and PA-AA solvers")];
    };
    let tol = cfg
        .solvers
        .iter()
        .find(|s| s.strategy.kind == UpdateKind::StandardAa)
        .map_or(1e-9, |s| s.tol_residual);

    match arm_label(cfg, OperatorKind::DeepOnet, ProblemKind::Helmholtz, None) {
        None => checks.push(missing(5, "Helmholtz DeepONet arm")),
        Some(arm) => {
            let pa_runs: Vec<&RunSummary> = report.runs_for(&arm, &pa).collect();
            let aa_runs: Vec<&RunSummary> = report.runs_for(&arm, &aa).collect();
            let pa_med = median(pa_runs.iter().map(|r| r.final_relative_residual));
            let aa_med = median(aa_runs.iter().map(|r| r.final_relative_residual));
            let pa_cycles = pa_runs.iter().map(|r| r.cycles).max().map(|c| c as f64);
            checks.push(Check::new(
                5,
                "PA-AA median final relative residual",
                pa_med,
                "<= 1e-6",
                pa_med.is_some_and(|v| v <= 1e-6),
            ));
            checks.push(Check::new(
                5,
                "PA-AA cycles used",
                pa_cycles,
                "<= 200",
                pa_cycles.is_some_and(|c| c <= 200.0),
            ));
            checks.push(Check::new(
                5,
                "StandardAA median final relative residual",
                aa_med,
                ">= 1e-3",
                aa_med.is_some_and(|v| v >= 1e-3),
            ));
            let ratios = aa_runs.iter().filter_map(|a| {
                let p = pa_runs
                    .iter()
                    .find(|p| p.repeat == a.repeat && p.instance == a.instance)?;
                let target = a.final_relative_residual.max(tol);
                let reached = p
                    .relative_residuals
                    .iter()
                    .position(|v| *v <= target)
                    .map_or(f64::INFINITY, |c| c as f64);
                Some(reached / a.cycles.max(1) as f64)
            });
            let ratio = median(ratios);
            checks.push(Check::new(
                5,
                "PA-AA cycles to StandardAA final residual / StandardAA cycles (median)",
                ratio,
                "<= 0.5",
                ratio.is_some_and(|r| r <= 0.5),
            ));
            let edge = median(common_cycle_ratios(report, &arm, &pa, &fixed));
            checks.push(
                Check::new(
                    5,
                    "PA-AA/FixedStep residual at last common cycle (median)",
                    edge,
                    "<= 1",
                    edge.is_some_and(|r| r <= 1.0),
                )
                .recorded(),
            );
        }
    }

    match arm_label(cfg, OperatorKind::Spectral, ProblemKind::Diffusion, None) {
        None => checks.push(missing(6, "diffusion spectral arm")),
        Some(arm) => {
            let gain = median(common_cycle_ratios(report, &arm, &fixed, &aa));
            checks.push(Check::new(
                6,
                "FixedStep/StandardAA residual at last common cycle (median)",
                gain,
                ">= 1e2",
                gain.is_some_and(|g| g >= 1e2),
            ));
            let aa_med = median(
                report
                    .runs_for(&arm, &aa)
                    .map(|r| r.final_relative_residual),
            );
            let pa_med = median(
                report
                    .runs_for(&arm, &pa)
                    .map(|r| r.final_relative_residual),
            );
            let bound = aa_med.map(|v| v.max(tol));
            checks.push(Check::new(
                6,
                "PA-AA median final relative residual",
                pa_med,
                &format!(
                    "<= max(StandardAA median, tol) = {}",
                    bound.map_or("n/a".into(), |b| format!("{b:.3e}"))
                ),
                matches!((pa_med, bound), (Some(p), Some(b)) if p <= b),
            ));
        }
    }

    let worst = report
        .runs
        .iter()
        .filter(|r| r.solver == pa)
        .filter_map(|r| r.max_window_gap)
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.max(g))));
    checks.push(Check::new(
        3,
        "PA-AA window optimality, worst step",
        worst,
        "<= 1e-10",
        worst.is_some_and(|g| g <= 1e-10),
    ));
    checks
}

/// Per (seed, instance): residual of `num` over residual of `den` at the last cycle both traces reach.
fn common_cycle_ratios(report: &BenchReport, arm: &str, num: &str, den: &str) -> Vec<f64> {
    let dens: Vec<&RunSummary> = report.runs_for(arm, den).collect();
    report
        .runs_for(arm, num)
        .filter_map(|n| {
            let d = dens
                .iter()
                .find(|d| d.repeat == n.repeat && d.instance == n.instance)?;
            let c = n
                .relative_residuals
                .len()
                .min(d.relative_residuals.len())
                .checked_sub(1)?;
            Some(n.relative_residuals[c] / d.relative_residuals[c])
        })
        .collect()
}

fn loss_matrix_checks(cfg: &ExperimentConfig, report: &BenchReport) -> Vec<Check> {
    let error_l2 = Objective::new(LossBasis::ErrorBased, Framework::Static, NormKind::L2);
    let residual_l2 = Objective::new(LossBasis::ResidualBased, Framework::Static, NormKind::L2);
    let mut checks = Vec::new();
    let fixed = match solver_label(cfg, UpdateKind::FixedStep) {
        Some(l) => l,
        None => return vec![missing(7, "fixed-step solver")],
    };
    for problem in [ProblemKind::Diffusion, ProblemKind::Helmholtz] {
        let name = crate::pipeline::problem_name(problem);
        let arms = (
            arm_label(cfg, OperatorKind::DeepOnet, problem, Some(&error_l2)),
            arm_label(cfg, OperatorKind::DeepOnet, problem, Some(&residual_l2)),
        );
        let (Some(e), Some(r)) = arms else {
            checks.push(missing(
                7,
                &format!("{name} DeepONet error-l2 and residual-l2 arms"),
            ));
            continue;
        };
        let em = median(
            report
                .runs_for(&e, &fixed)
                .map(|x| x.final_relative_residual),
        );
        let rm = median(
            report
                .runs_for(&r, &fixed)
                .map(|x| x.final_relative_residual),
        );
        let ratio = match (em, rm) {
            (Some(a), Some(b)) => Some(b / a),
            _ => None,
        };
        checks.push(Check::new(
            7,
            &format!("{name}: residual-l2 / error-l2 median final residual"),
            ratio,
            "< 1",
            ratio.is_some_and(|q| q < 1.0),
        ));
    }
    let spectral = (
        arm_label(
            cfg,
            OperatorKind::Spectral,
            ProblemKind::Diffusion,
            Some(&error_l2),
        ),
        arm_label(
            cfg,
            OperatorKind::Spectral,
            ProblemKind::Diffusion,
            Some(&residual_l2),
        ),
    );
    if let (Some(e), Some(r)) = spectral {
        let majority = |arm: &str, pred: &dyn Fn(Verdict) -> bool| {
            per_repeat(report.runs_for(arm, &fixed))
                .values()
                .filter(|rs| 2 * rs.iter().filter(|x| pred(x.verdict)).count() > rs.len())
                .count() as f64
        };
        let bad = majority(&r, &|v| matches!(v, Verdict::Diverged | Verdict::Stagnated));
        let good = majority(&e, &|v| v == Verdict::Converged);
        let seeds = cfg.data.seeds as f64;
        let need = (0.6 * seeds).ceil();
        checks.push(
            Check::new(
                7,
                "spectral residual-l2 seeds not converging",
                Some(bad),
                &format!(">= {need}"),
                bad >= need,
            )
            .recorded(),
        );
        checks.push(
            Check::new(
                7,
                "spectral error-l2 seeds converging",
                Some(good),
                &format!(">= {need}"),
                good >= need,
            )
            .recorded(),
        );
    }
    checks
}

fn cost_table_checks(cfg: &ExperimentConfig, report: &BenchReport) -> Vec<Check> {
    let static_arm = cfg
        .arms
        .iter()
        .find(|a| a.objective.framework == Framework::Static);
    let dynamic_arm = cfg
        .arms
        .iter()
        .find(|a| a.objective.framework == Framework::Dynamic);
    let (Some(s), Some(d)) = (static_arm, dynamic_arm) else {
        return vec![missing(8, "static and dynamic arms")];
    };
    let Some(fixed) = solver_label(cfg, UpdateKind::FixedStep) else {
        return vec![missing(8, "fixed-step solver")];
    };
    let by_repeat = |label: &str| -> BTreeMap<usize, &TrainSummary> {
        report
            .training
            .iter()
            .filter(|t| t.arm == label)
            .map(|t| (t.repeat, t))
            .collect()
    };
    let (ts, td) = (by_repeat(&s.label), by_repeat(&d.label));
    let pairs: Vec<(&TrainSummary, &TrainSummary)> = ts
        .iter()
        .filter_map(|(k, a)| Some((*a, *td.get(k)?)))
        .collect();
    let wall = median(
        pairs
            .iter()
            .map(|(a, b)| b.history.total_wall_ms() / a.history.total_wall_ms()),
    );
    let tape = median(
        pairs
            .iter()
            .map(|(a, b)| b.peak_tape_bytes as f64 / a.peak_tape_bytes as f64),
    );
    let es = median(
        report
            .runs_for(&s.label, &fixed)
            .filter_map(|r| r.final_relative_error),
    );
    let ed = median(
        report
            .runs_for(&d.label, &fixed)
            .filter_map(|r| r.final_relative_error),
    );
    let orders = match (es, ed) {
        (Some(a), Some(b)) => Some((b / a).log10().abs()),
        _ => None,
    };
    vec![
        Check::new(
            8,
            "training wall-time ratio dynamic/static",
            wall,
            ">= 3",
            wall.is_some_and(|w| w >= 3.0),
        )
        .timed(),
        Check::new(
            8,
            "peak tape ratio dynamic/static",
            tape,
            "in [4, 6]",
            tape.is_some_and(|t| (4.0..=6.0).contains(&t)),
        ),
        Check::new(
            8,
            "final error gap |log10(dynamic/static)|",
            orders,
            "<= 1",
            orders.is_some_and(|o| o <= 1.0),
        ),
    ]
}
