#![allow(dead_code)]

use dlhim_core::neural::{Arch, CorrectionOperator, DeepOnetArch, SpectralArch};
use dlhim_core::par::Parallelism;
use dlhim_core::problems::{
    generate_instances, DatasetSpec, FieldSample, Grid1D, Instance, ProblemKind,
};

pub fn instances(kind: ProblemKind, n: usize, count: usize, seed: u64) -> Vec<Instance> {
    generate_instances(
        &DatasetSpec::new(kind, n, count, seed),
        Parallelism::Sequential,
    )
    .unwrap()
}

pub fn unit_instance(n: usize, f: Vec<f64>) -> Instance {
    let g = Grid1D::new(n).unwrap();
    Instance::from_fields(
        ProblemKind::Diffusion,
        0,
        FieldSample::constant(g, 1.0),
        f,
        true,
    )
    .unwrap()
}

pub fn deeponet(seed: u64) -> CorrectionOperator {
    CorrectionOperator::init(
        Arch::DeepOnet(DeepOnetArch {
            k_shift: 1.0,
            k_scale: 0.3,
            ..DeepOnetArch::new(31)
        }),
        seed,
    )
}

pub fn spectral(seed: u64) -> CorrectionOperator {
    CorrectionOperator::init(
        Arch::Spectral(SpectralArch {
            k_shift: 1.0,
            k_scale: 0.3,
            ..SpectralArch::new(31)
        }),
        seed,
    )
}

/// Exact inverse of the `k = 1` Laplacian on `n` nodes as a spectral operator.
pub fn inverse_laplacian(n: usize) -> CorrectionOperator {
    let h = 1.0 / (n + 1) as f64;
    let m: Vec<(f64, f64)> = (1..=n)
        .map(|j| {
            (
                h * h / (2.0 - 2.0 * (j as f64 * std::f64::consts::PI * h).cos()),
                0.0,
            )
        })
        .collect();
    CorrectionOperator::spectral_with_multipliers(n, &m)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
