//! Experiment configuration: a TOML document that fully determines a run.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use dlhim_core::neural::{Arch, CorrectionOperator, DeepOnetArch, OperatorKind, SpectralArch};
use dlhim_core::problems::{DatasetSpec, GrfConfig, ProblemKind};
use dlhim_core::solver::SolverConfig;
use dlhim_core::training::{Objective, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    FalseFixedPoint,
    LossMatrix,
    CostTable,
    UpdateStrategies,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::FalseFixedPoint,
        Scenario::LossMatrix,
        Scenario::CostTable,
        Scenario::UpdateStrategies,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::FalseFixedPoint => "false-fixed-point",
            Scenario::LossMatrix => "loss-matrix",
            Scenario::CostTable => "cost-table",
            Scenario::UpdateStrategies => "update-strategies",
        }
    }

    /// Checked-in preset for this scenario.
    pub fn preset(self) -> ExperimentConfig {
        let text = match self {
            Scenario::FalseFixedPoint => include_str!("../configs/false-fixed-point.toml"),
            Scenario::LossMatrix => include_str!("../configs/loss-matrix.toml"),
            Scenario::CostTable => include_str!("../configs/cost-table.toml"),
            Scenario::UpdateStrategies => include_str!("../configs/update-strategies.toml"),
        };
        ExperimentConfig::from_toml_str(text).expect("preset configs are valid")
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub problems: ProblemFamilies,
    #[serde(default)]
    pub train: TrainConfig,
    pub arms: Vec<ArmConfig>,
    pub solvers: Vec<SolverConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train_n: usize,
    pub train_count: usize,
    pub test_count: usize,
    /// Independent repetitions: each gets its own data, init and shuffle.
    pub seeds: usize,
    #[serde(default = "yes")]
    pub with_reference: bool,
}

fn yes() -> bool {
    true
}

/// GRF parameters shared by every arm that uses a given problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemFamilies {
    pub diffusion_coefficient: GrfConfig,
    pub helmholtz_wavenumber: GrfConfig,
    pub source: GrfConfig,
}

impl Default for ProblemFamilies {
    fn default() -> Self {
        Self {
            diffusion_coefficient: GrfConfig::diffusion_coefficient(),
            helmholtz_wavenumber: GrfConfig::helmholtz_wavenumber(),
            source: GrfConfig::source(),
        }
    }
}

/// One (problem, operator, objective, test grid) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub label: String,
    pub problem: ProblemKind,
    pub test_n: usize,
    pub operator: OperatorConfig,
    pub objective: Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub kind: OperatorKind,
    #[serde(default = "yes")]
    pub normalize_input: bool,
    #[serde(default = "yes")]
    pub dirichlet_envelope: bool,
    /// Coefficient standardization; defaults follow the problem family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_scale: Option<f64>,
}

impl OperatorConfig {
    pub fn arch(&self, problem: ProblemKind, train_n: usize) -> Arch {
        let (shift, scale) = match problem {
            ProblemKind::Diffusion => (1.0, 0.3),
            ProblemKind::Helmholtz => (8.0, 2.0),
        };
        let k_shift = self.k_shift.unwrap_or(shift);
        let k_scale = self.k_scale.unwrap_or(scale);
        match self.kind {
            OperatorKind::DeepOnet => Arch::DeepOnet(DeepOnetArch {
                normalize_input: self.normalize_input,
                dirichlet_envelope: self.dirichlet_envelope,
                k_shift,
                k_scale,
                ..DeepOnetArch::new(train_n)
            }),
            OperatorKind::Spectral => Arch::Spectral(SpectralArch {
                k_shift,
                k_scale,
                ..SpectralArch::new(train_n)
            }),
        }
    }
}

/// A validation failure tied to a key path such as `arms[1].objective.unroll`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        let issues = cfg.issues();
        if issues.is_empty() {
            return Ok(cfg);
        }
        let lines: Vec<String> = issues
            .iter()
            .map(|i| match locate(text, &i.key) {
                Some(line) => format!("line {line}: {}: {}", i.key, i.message),
                None => format!("{}: {}", i.key, i.message),
            })
            .collect();
        Err(anyhow!("invalid config\n{}", lines.join("\n")))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// All validation failures, in document order.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut push = |key: String, message: String| out.push(ConfigIssue { key, message });
        if self.name.trim().is_empty() {
            push("name".into(), "must not be empty".into());
        }
        let d = &self.data;
        for (key, v) in [
            ("train_n", d.train_n),
            ("train_count", d.train_count),
            ("test_count", d.test_count),
        ] {
            if v == 0 {
                push(format!("data.{key}"), "must be positive".into());
            }
        }
        if d.seeds == 0 {
            push("data.seeds".into(), "must be positive".into());
        }
        for (key, g) in [
            (
                "diffusion_coefficient",
                &self.problems.diffusion_coefficient,
            ),
            ("helmholtz_wavenumber", &self.problems.helmholtz_wavenumber),
            ("source", &self.problems.source),
        ] {
            if let Err(e) = g.validate() {
                push(format!("problems.{key}"), e.to_string());
            }
        }
        if let Err(e) = self.train.validate() {
            push("train".into(), e.to_string());
        }
        if self.arms.is_empty() {
            push("arms".into(), "at least one arm is required".into());
        }
        for (i, arm) in self.arms.iter().enumerate() {
            if arm.label.is_empty() || arm.label.contains(['/', '\\', ',']) {
                push(
                    format!("arms[{i}].label"),
                    "must be non-empty without '/', '\\' or ','".into(),
                );
            }
            if self.arms[..i].iter().any(|a| a.label == arm.label) {
                push(
                    format!("arms[{i}].label"),
                    format!("duplicate label {:?}", arm.label),
                );
            }
            if arm.test_n == 0 {
                push(format!("arms[{i}].test_n"), "must be positive".into());
            }
            if let Err(e) = arm.objective.validate() {
                push(format!("arms[{i}].objective"), e.to_string());
            }
            if arm.objective.requires_reference() && !d.with_reference {
                push(
                    format!("arms[{i}].objective"),
                    "error-based objective needs data.with_reference = true".into(),
                );
            }
            if arm.operator.k_scale.is_some_and(|s| s.is_nan() || s <= 0.0) {
                push(
                    format!("arms[{i}].operator.k_scale"),
                    "must be positive".into(),
                );
            }
        }
        if self.solvers.is_empty() {
            push("solvers".into(), "at least one solver is required".into());
        }
        for (i, s) in self.solvers.iter().enumerate() {
            if let Err(e) = s.validate() {
                push(format!("solvers[{i}]"), e.to_string());
            }
        }
        out
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match self.issues().first() {
            None => Ok(()),
            Some(i) => Err(anyhow!("{}: {}", i.key, i.message)),
        }
    }

    pub fn dataset_spec(
        &self,
        kind: ProblemKind,
        n: usize,
        count: usize,
        seed: u64,
    ) -> DatasetSpec {
        let coefficient = match kind {
            ProblemKind::Diffusion => self.problems.diffusion_coefficient,
            ProblemKind::Helmholtz => self.problems.helmholtz_wavenumber,
        };
        DatasetSpec {
            coefficient,
            source: self.problems.source,
            with_reference: self.data.with_reference,
            ..DatasetSpec::new(kind, n, count, seed)
        }
    }

    /// Problems referenced by at least one arm, in first-use order.
    pub fn problem_kinds(&self) -> Vec<ProblemKind> {
        let mut out = Vec::new();
        for arm in &self.arms {
            if !out.contains(&arm.problem) {
                out.push(arm.problem);
            }
        }
        out
    }

    pub fn find_arm(&self, label: &str) -> anyhow::Result<usize> {
        self.arms
            .iter()
            .position(|a| a.label == label)
            .ok_or_else(|| {
                let known: Vec<&str> = self.arms.iter().map(|a| a.label.as_str()).collect();
                anyhow!("no arm labelled {label:?}; known: {known:?}")
            })
    }

    /// Distinct, filesystem-safe names for the configured solvers.
    pub fn solver_labels(&self) -> Vec<String> {
        let base: Vec<&str> = self
            .solvers
            .iter()
            .map(|s| s.strategy.kind.label())
            .collect();
        base.iter()
            .enumerate()
            .map(|(i, b)| {
                if base.iter().filter(|x| *x == b).count() > 1 {
                    format!("{b}_{i}")
                } else {
                    b.to_string()
                }
            })
            .collect()
    }

    pub fn init_operator(&self, arm: &ArmConfig, seed: u64) -> CorrectionOperator {
        CorrectionOperator::init(arm.operator.arch(arm.problem, self.data.train_n), seed)
    }
}

/// Best-effort 1-based line of `key` (e.g. `arms[1].objective.unroll`) in `text`.
pub fn locate(text: &str, key: &str) -> Option<usize> {
    let lines: Vec<&str> = text.lines().collect();
    let (mut start, mut end) = (0, lines.len());
    let mut found = None;
    for part in key.split('.') {
        let at = match part.split_once('[') {
            Some((name, rest)) => {
                let i: usize = rest.trim_end_matches(']').parse().ok()?;
                let header = format!("[[{name}]]");
                let at = (start..end).filter(|&l| lines[l].trim() == header).nth(i)?;
                end = (at + 1..end)
                    .find(|&l| lines[l].trim_start().starts_with("[["))
                    .unwrap_or(end);
                at
            }
            None => (start..end).find(|&l| mentions(lines[l], part))?,
        };
        start = at;
        found = Some(at + 1);
    }
    found
}

fn mentions(line: &str, name: &str) -> bool {
    let t = line.trim();
    if let Some(header) = t.strip_prefix('[') {
        return header.trim_end_matches(']').rsplit('.').next() == Some(name);
    }
    let assigns = |s: &str| {
        s.strip_prefix(name)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    };
    assigns(t) || t.split([',', '{']).any(|piece| assigns(piece.trim()))
}

/// Output directory with the `--out` override applied.
pub fn resolve_out(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.out_dir.clone())
}
