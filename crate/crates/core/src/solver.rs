//! The DL-HIM fixed-point loop: `n` smoother sweeps, one neural correction,
//! then the configured update strategy.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acceleration::{
    adaptive_alpha, physics_aware_aa_step, standard_aa_step, AaHistory, UpdateKind, UpdateStrategy,
};
use crate::neural::CorrectionOperator;
use crate::problems::{Instance, LinearSystem};
use crate::smoothers::{smoother_sweep, SmootherConfig};
use crate::{norm2, Error, Result};

pub const STAGNATION_WINDOW: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub smoother: SmootherConfig,
    pub strategy: UpdateStrategy,
    pub max_cycles: usize,
    pub tol_residual: f64,
    pub tol_update: f64,
    pub track_error: bool,
    pub stagnation_window: usize,
    /// Wall-clock column; off gives byte-reproducible traces.
    pub record_timing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            smoother: SmootherConfig::default(),
            strategy: UpdateStrategy::default(),
            max_cycles: 1000,
            tol_residual: 1e-9,
            tol_update: 1e-12,
            track_error: true,
            stagnation_window: STAGNATION_WINDOW,
            record_timing: true,
        }
    }
}

impl SolverConfig {
    pub fn with_strategy(kind: UpdateKind) -> Self {
        Self {
            strategy: UpdateStrategy::new(kind),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.smoother.validate()?;
        self.strategy.validate()?;
        if !(self.tol_residual > 0.0 && self.tol_update > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_cycles == 0 || self.stagnation_window < 2 {
            return Err(Error::InvalidArgument(
                "max_cycles >= 1 and stagnation_window >= 2 required".into(),
            ));
        }
        Ok(())
    }
}

/// Step information produced by one cycle or strategy update.
#[derive(Debug, Clone, PartialEq)]
pub enum StepInfo {
    Fixed,
    Adaptive {
        alpha: f64,
        degenerate: bool,
    },
    Anderson {
        alpha: Vec<f64>,
        condition: f64,
        regularized: bool,
        window_gap: Option<f64>,
    },
}

impl StepInfo {
    /// Compact comma-free summary for the trace CSV.
    pub fn summary(&self) -> String {
        match self {
            StepInfo::Fixed => "1".into(),
            StepInfo::Adaptive { alpha, degenerate } => {
                format!(
                    "alpha={alpha:.16e}{}",
                    if *degenerate { ";degenerate" } else { "" }
                )
            }
            StepInfo::Anderson {
                alpha,
                condition,
                regularized,
                window_gap,
            } => {
                let mut s = format!(
                    "m={};sum={:.16e};cond={:.3e}",
                    alpha.len() - 1,
                    alpha.iter().sum::<f64>(),
                    condition
                );
                if *regularized {
                    s.push_str(";regularized");
                }
                if let Some(g) = window_gap {
                    s.push_str(&format!(";gap={g:.3e}"));
                }
                s
            }
        }
    }
}

/// One cycle `G(u) = u~ + alpha N(f - A u~)` with `u~` the smoothed iterate.
/// `alpha` is 1 except under `AdaptiveStep`.
pub fn dl_him_cycle(
    sys: &LinearSystem,
    u: &[f64],
    correct: &dyn Fn(&[f64]) -> Vec<f64>,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, StepInfo)> {
    let smoothed = smoother_sweep(sys, u, &cfg.smoother)?;
    let r = sys.residual(&smoothed);
    let p = correct(&r);
    let (alpha, info) =
        if cfg.strategy.kind == UpdateKind::AdaptiveStep && p.iter().any(|v| *v != 0.0) {
            let s = adaptive_alpha(&p, &r, sys)?;
            (
                s.alpha,
                StepInfo::Adaptive {
                    alpha: s.alpha,
                    degenerate: s.degenerate,
                },
            )
        } else {
            (1.0, StepInfo::Fixed)
        };
    let g = smoothed
        .iter()
        .zip(&p)
        .map(|(a, b)| a + alpha * b)
        .collect();
    Ok((g, info))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Stagnated,
    Diverged,
    MaxCycles,
}

/// State at iterate `u_k` together with the cycle that left it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub cycle: usize,
    pub res_norm: f64,
    pub err_norm: Option<f64>,
    /// `|| G(u_k) - u_k ||`.
    pub upd_norm: f64,
    pub u_norm: f64,
    /// How `u_{k+1}` was formed from the cycle output.
    pub step: String,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagnationReport {
    pub flagged: bool,
    pub median_update: f64,
    pub median_u_norm: f64,
    pub median_relative_residual: f64,
    /// `||r|| / (||A||_1 ||delta||)` at the window's median values.
    pub gap_ratio: f64,
    /// Residual at the end of the window over residual at its start.
    pub residual_drift: f64,
}

/// False fixed point test over the last `window` rows: the update has
/// collapsed relative to the iterate, the residual is still large, and the
/// residual is no longer shrinking (at most 2x over the window).
pub fn detect_stagnation(
    rows: &[TraceRow],
    window: usize,
    f_norm: f64,
    a_norm1: f64,
    tol_update: f64,
    tol_residual: f64,
) -> StagnationReport {
    if rows.len() < window || window == 0 {
        return StagnationReport {
            flagged: false,
            median_update: f64::NAN,
            median_u_norm: f64::NAN,
            median_relative_residual: f64::NAN,
            gap_ratio: f64::NAN,
            residual_drift: f64::NAN,
        };
    }
    let w = &rows[rows.len() - window..];
    let median_update = median(w.iter().map(|r| r.upd_norm));
    let median_u_norm = median(w.iter().map(|r| r.u_norm));
    let median_res = median(w.iter().map(|r| r.res_norm));
    let median_relative_residual = median_res / f_norm;
    let residual_drift = w[w.len() - 1].res_norm / w[0].res_norm;
    let flagged = median_update <= tol_update * median_u_norm
        && median_relative_residual >= 100.0 * tol_residual
        && residual_drift >= 0.5;
    StagnationReport {
        flagged,
        median_update,
        median_u_norm,
        median_relative_residual,
        gap_ratio: median_res / (a_norm1 * median_update),
        residual_drift,
    }
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
    pub verdict: Verdict,
    pub f_norm: f64,
    /// Geometric-mean residual contraction over the last 10 cycles.
    pub q_res: f64,
    pub q_err: Option<f64>,
    pub stagnation: Option<StagnationReport>,
    /// Largest `||f - A u_{k+1}|| - min_j ||f - A g_j||` over PA-AA steps.
    pub max_window_gap: Option<f64>,
}

impl ConvergenceTrace {
    pub fn final_relative_residual(&self) -> f64 {
        self.rows
            .last()
            .map_or(f64::NAN, |r| r.res_norm / self.f_norm)
    }

    pub fn relative_residuals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.res_norm / self.f_norm).collect()
    }

    /// First cycle whose relative residual is at or below `level`.
    pub fn cycles_to(&self, level: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.res_norm / self.f_norm <= level)
            .map(|r| r.cycle)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("cycle,res_norm,err_norm,upd_norm,alpha_info,wall_ms\n");
        for r in &self.rows {
            let err = r
                .err_norm
                .map_or_else(|| "nan".to_string(), |e| format!("{e:.16e}"));
            out.push_str(&format!(
                "{},{:.16e},{},{:.16e},{},{:.16e}\n",
                r.cycle, r.res_norm, err, r.upd_norm, r.step, r.wall_ms
            ));
        }
        write_file(path, out.as_bytes())
    }

    /// Sidecar metadata: verdict, contraction estimates and the config echo.
    pub fn write_metadata(&self, path: &Path, cfg: &SolverConfig) -> Result<()> {
        let meta = serde_json::json!({
            "verdict": self.verdict,
            "cycles": self.rows.len(),
            "f_norm": self.f_norm,
            "final_relative_residual": self.final_relative_residual(),
            "q_res": self.q_res,
            "q_err": self.q_err,
            "stagnation": self.stagnation,
            "max_window_gap": self.max_window_gap,
            "config": cfg,
        });
        let text =
            serde_json::to_string_pretty(&meta).map_err(|e| Error::format(path, e.to_string()))?;
        write_file(path, text.as_bytes())
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn contraction(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let span = (values.len() - 1).min(10);
    let last = values[values.len() - 1];
    let first = values[values.len() - 1 - span];
    (last / first).powf(1.0 / span as f64)
}

/// Run the hybrid iteration on `sys` from `u = 0` with correction `correct`.
pub fn solve_with(
    sys: &LinearSystem,
    correct: &dyn Fn(&[f64]) -> Vec<f64>,
    cfg: &SolverConfig,
    u_star: Option<&[f64]>,
) -> Result<ConvergenceTrace> {
    cfg.validate()?;
    let start = Instant::now();
    let n = sys.n();
    let f_norm = norm2(&sys.rhs);
    let a_norm1 = sys.norm1();
    let u_star = u_star.filter(|_| cfg.track_error);
    let mut u = vec![0.0; n];
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut history = AaHistory::new(cfg.strategy.memory);
    let mut max_gap: Option<f64> = None;
    let mut stagnation = None;
    let verdict = loop {
        let k = rows.len();
        let res_norm = norm2(&sys.residual(&u));
        let err_norm = u_star.map(|s| {
            s.iter()
                .zip(&u)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        });
        let (g, info) = dl_him_cycle(sys, &u, correct, cfg)?;
        let upd_norm = g
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let wall_ms = if cfg.record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        rows.push(TraceRow {
            cycle: k,
            res_norm,
            err_norm,
            upd_norm,
            u_norm: norm2(&u),
            step: info.summary(),
            wall_ms,
        });
        if !res_norm.is_finite() || !upd_norm.is_finite() || g.iter().any(|v| !v.is_finite()) {
            break Verdict::Diverged;
        }
        if res_norm <= cfg.tol_residual * f_norm {
            break Verdict::Converged;
        }
        if rows.len() >= cfg.stagnation_window {
            let rep = detect_stagnation(
                &rows,
                cfg.stagnation_window,
                f_norm,
                a_norm1,
                cfg.tol_update,
                cfg.tol_residual,
            );
            if rep.flagged {
                stagnation = Some(rep);
                break Verdict::Stagnated;
            }
        }
        if k >= cfg.max_cycles {
            break Verdict::MaxCycles;
        }
        u = match cfg.strategy.kind {
            UpdateKind::FixedStep | UpdateKind::AdaptiveStep => g,
            UpdateKind::StandardAa => {
                let step = standard_aa_step(&mut history, &g, &u, &cfg.strategy)?;
                rows[k].step = anderson_info(&step.coefficients, None).summary();
                step.next
            }
            UpdateKind::PhysicsAwareAa => {
                let step = physics_aware_aa_step(&mut history, &g, &u, sys, &cfg.strategy)?;
                let best = history
                    .residuals()
                    .iter()
                    .map(|r| norm2(r))
                    .fold(f64::INFINITY, f64::min);
                let gap = norm2(&sys.residual(&step.next)) - best;
                max_gap = Some(max_gap.map_or(gap, |m: f64| m.max(gap)));
                rows[k].step = anderson_info(&step.coefficients, Some(gap)).summary();
                step.next
            }
        };
    };
    if stagnation.is_none() {
        let rep = detect_stagnation(
            &rows,
            cfg.stagnation_window,
            f_norm,
            a_norm1,
            cfg.tol_update,
            cfg.tol_residual,
        );
        stagnation = rep.median_update.is_finite().then_some(rep);
    }
    let res: Vec<f64> = rows.iter().map(|r| r.res_norm).collect();
    let errs: Option<Vec<f64>> = rows.iter().map(|r| r.err_norm).collect();
    Ok(ConvergenceTrace {
        q_res: contraction(&res),
        q_err: errs.map(|e| contraction(&e)),
        rows,
        verdict,
        f_norm,
        stagnation,
        max_window_gap: max_gap,
    })
}

fn anderson_info(c: &crate::acceleration::AaCoefficients, gap: Option<f64>) -> StepInfo {
    StepInfo::Anderson {
        alpha: c.alpha.clone(),
        condition: c.condition,
        regularized: c.regularized,
        window_gap: gap,
    }
}

/// Solve one instance with a learned correction operator.
pub fn solve(
    inst: &Instance,
    op: &CorrectionOperator,
    cfg: &SolverConfig,
) -> Result<ConvergenceTrace> {
    let prepared = op.prepare(&inst.k, inst.grid())?;
    solve_with(
        &inst.system,
        &|r| prepared.apply(r),
        cfg,
        inst.u_star.as_deref(),
    )
}
