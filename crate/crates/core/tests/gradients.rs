mod common;

use common::*;
use dlhim_core::neural::CorrectionOperator;
use dlhim_core::par::Parallelism;
use dlhim_core::problems::ProblemKind;
use dlhim_core::smoothers::SmootherConfig;
use dlhim_core::training::{objective_and_grad, prepare_items, Objective, Reduction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const EPS: f64 = 1e-6;

fn check(op: &CorrectionOperator, kind: ProblemKind, objective: &Objective) {
    let data = instances(kind, 31, 2, 40);
    let items = prepare_items(op, &data, objective).unwrap().items;
    let smoother = SmootherConfig::jacobi(3);
    let loss = |params: &[f64]| {
        let probe = CorrectionOperator {
            arch: op.arch.clone(),
            params: params.to_vec(),
        };
        objective_and_grad(
            &probe,
            &items,
            objective,
            &smoother,
            Reduction::Mean,
            Parallelism::Sequential,
        )
        .unwrap()
        .loss_value
    };
    let g = objective_and_grad(
        op,
        &items,
        objective,
        &smoother,
        Reduction::Mean,
        Parallelism::Rayon,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d: Vec<f64> = (0..op.params.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let dn = norm(&d);
        let d: Vec<f64> = d.iter().map(|v| v / dn).collect();
        let plus: Vec<f64> = op.params.iter().zip(&d).map(|(p, v)| p + EPS * v).collect();
        let minus: Vec<f64> = op.params.iter().zip(&d).map(|(p, v)| p - EPS * v).collect();
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * EPS);
        let an: f64 = g.grad.iter().zip(&d).map(|(a, b)| a * b).sum();
        worst = worst.max(rel(fd, an));
    }
    assert!(
        worst <= 1e-4,
        "{} {:?}: worst relative error {worst:e}",
        objective.label(),
        op.kind()
    );
}

#[test]
fn deeponet_gradients_match_finite_differences() {
    let op = deeponet(3);
    for (i, objective) in Objective::all(3).iter().enumerate() {
        let kind = if i % 2 == 0 {
            ProblemKind::Diffusion
        } else {
            ProblemKind::Helmholtz
        };
        check(&op, kind, objective);
    }
}

#[test]
fn spectral_gradients_match_finite_differences() {
    let op = spectral(5);
    for (i, objective) in Objective::all(3).iter().enumerate() {
        let kind = if i % 2 == 0 {
            ProblemKind::Helmholtz
        } else {
            ProblemKind::Diffusion
        };
        check(&op, kind, objective);
    }
}

#[test]
fn duplicated_batch_doubles_summed_gradient() {
    let op = deeponet(1);
    let objective = Objective::static_residual_l2();
    let data = instances(ProblemKind::Diffusion, 31, 1, 2);
    let items = prepare_items(&op, &data, &objective).unwrap().items;
    let twice = [items.clone(), items.clone()].concat();
    let sm = SmootherConfig::default();
    let one = objective_and_grad(
        &op,
        &items,
        &objective,
        &sm,
        Reduction::Sum,
        Parallelism::Rayon,
    )
    .unwrap();
    let two = objective_and_grad(
        &op,
        &twice,
        &objective,
        &sm,
        Reduction::Sum,
        Parallelism::Rayon,
    )
    .unwrap();
    assert_eq!(two.loss_value, 2.0 * one.loss_value);
    assert!(one.grad.iter().zip(&two.grad).all(|(a, b)| *b == 2.0 * a));
}

#[test]
fn parallel_and_sequential_gradients_are_identical() {
    let op = spectral(2);
    let objective = Objective::all(2)[7];
    let data = instances(ProblemKind::Diffusion, 31, 8, 4);
    let items = prepare_items(&op, &data, &objective).unwrap().items;
    let sm = SmootherConfig::default();
    let a = objective_and_grad(
        &op,
        &items,
        &objective,
        &sm,
        Reduction::Mean,
        Parallelism::Rayon,
    )
    .unwrap();
    let b = objective_and_grad(
        &op,
        &items,
        &objective,
        &sm,
        Reduction::Mean,
        Parallelism::Sequential,
    )
    .unwrap();
    assert_eq!(a, b);
}
