mod common;

use common::*;
use dlhim_core::acceleration::UpdateKind;
use dlhim_core::neural::CorrectionOperator;
use dlhim_core::par::Parallelism;
use dlhim_core::problems::{direct_solve, ProblemKind};
use dlhim_core::smoothers::{residual_propagation_matrix, SmootherConfig};
use dlhim_core::solver::SolverConfig;
use dlhim_core::training::{
    dynamic_loss, dynamic_loss_with, objective_and_grad, prepare_items, static_loss,
    static_loss_with, train, Framework, LossBasis, NormKind, Objective, Reduction, TrainConfig,
};
use nalgebra::DVector;

#[test]
fn zero_operator_residual_loss_is_one() {
    let op = CorrectionOperator::zero(31);
    let data = instances(ProblemKind::Diffusion, 31, 4, 1);
    let obj = Objective::static_residual_l2();
    let items = prepare_items(&op, &data, &obj).unwrap().items;
    assert_eq!(static_loss(&op, &items, &obj).unwrap(), 1.0);
    let g = objective_and_grad(
        &op,
        &items,
        &obj,
        &SmootherConfig::default(),
        Reduction::Mean,
        Parallelism::Rayon,
    )
    .unwrap();
    assert_eq!(g.loss_value, 1.0);
}

#[test]
fn perfect_operators_give_zero_loss() {
    let data = instances(ProblemKind::Helmholtz, 31, 3, 5);
    let op = CorrectionOperator::zero(31);
    let obj = Objective::static_error_l2();
    let items = prepare_items(&op, &data, &obj).unwrap().items;
    let loss = static_loss_with(&items, &obj, &|item, r| {
        direct_solve(&item.system().clone().with_rhs(r.to_vec()).unwrap()).unwrap()
    });
    assert!(loss <= 1e-20);

    let n = 31;
    let inv = inverse_laplacian(n);
    let inst = unit_instance(n, (1..=n).map(|i| (i as f64).sqrt()).collect());
    let obj = Objective::static_residual_l2();
    let items = prepare_items(&inv, &[inst], &obj).unwrap().items;
    assert!(static_loss(&inv, &items, &obj).unwrap() <= 1e-10);
}

#[test]
fn one_cycle_without_sweeps_reduces_to_static() {
    let op = deeponet(6);
    let data = instances(ProblemKind::Diffusion, 31, 4, 6);
    let sm = SmootherConfig::jacobi(0);
    for norm in [NormKind::L2, NormKind::L1, NormKind::H1] {
        let st = Objective::new(LossBasis::ResidualBased, Framework::Static, norm);
        let dy = Objective::dynamic(LossBasis::ResidualBased, norm, 1);
        let items = prepare_items(&op, &data, &st).unwrap().items;
        let a = objective_and_grad(
            &op,
            &items,
            &st,
            &sm,
            Reduction::Mean,
            Parallelism::Sequential,
        )
        .unwrap();
        let b = objective_and_grad(
            &op,
            &items,
            &dy,
            &sm,
            Reduction::Mean,
            Parallelism::Sequential,
        )
        .unwrap();
        assert!(rel(a.loss_value, b.loss_value) <= 1e-12);
        assert!(
            max_diff(&a.grad, &b.grad) <= 1e-12 * a.grad.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        );
    }
}

#[test]
fn zero_operator_dynamic_loss_matches_dense_propagation() {
    let op = CorrectionOperator::zero(31);
    let data = instances(ProblemKind::Diffusion, 31, 3, 8);
    let obj = Objective::dynamic(LossBasis::ResidualBased, NormKind::L2, 2);
    let cfg = SolverConfig::default();
    let items = prepare_items(&op, &data, &obj).unwrap().items;
    let got = dynamic_loss(&op, &items, &obj, &cfg).unwrap();
    let mut want = 0.0;
    for inst in &data {
        let r = residual_propagation_matrix(&inst.system, &cfg.smoother).unwrap();
        let f = DVector::from_vec(inst.system.rhs.clone());
        let r1 = &r * &f;
        let r2 = &r * &r1;
        want += 0.5 * (r1.norm_squared() + r2.norm_squared()) / f.norm_squared();
    }
    want /= data.len() as f64;
    assert!(rel(got, want) <= 1e-10);
    let taped = objective_and_grad(
        &op,
        &items,
        &obj,
        &cfg.smoother,
        Reduction::Mean,
        Parallelism::Rayon,
    )
    .unwrap();
    assert!(rel(taped.loss_value, want) <= 1e-10);
}

#[test]
fn taped_and_plain_losses_agree() {
    let data = instances(ProblemKind::Helmholtz, 31, 3, 12);
    let sm = SmootherConfig::jacobi(5);
    let cfg = SolverConfig {
        smoother: sm,
        ..Default::default()
    };
    for op in [deeponet(1), spectral(1)] {
        for obj in Objective::all(3) {
            let items = prepare_items(&op, &data, &obj).unwrap().items;
            let taped =
                objective_and_grad(&op, &items, &obj, &sm, Reduction::Mean, Parallelism::Rayon)
                    .unwrap();
            let plain = match obj.framework {
                Framework::Static => static_loss(&op, &items, &obj).unwrap(),
                Framework::Dynamic => dynamic_loss(&op, &items, &obj, &cfg).unwrap(),
            };
            assert!(rel(taped.loss_value, plain) <= 1e-12, "{}", obj.label());
        }
    }
}

#[test]
fn residual_is_a_weighted_error() {
    let data = instances(ProblemKind::Diffusion, 63, 4, 13);
    for op in [deeponet(2), spectral(2)] {
        for inst in &data {
            let y = op.apply(inst.f(), &inst.k).unwrap();
            let res = norm(&inst.system.residual(&y));
            let e: Vec<f64> = inst
                .u_star
                .as_ref()
                .unwrap()
                .iter()
                .zip(&y)
                .map(|(a, b)| a - b)
                .collect();
            let ae = norm(&inst.system.apply(&e));
            assert!((res - ae).abs() <= 1e-10 * res.max(1.0));
        }
    }
}

#[test]
fn error_objectives_need_references() {
    let mut data = instances(ProblemKind::Diffusion, 31, 2, 1);
    data[1].u_star = None;
    let op = deeponet(0);
    assert!(prepare_items(&op, &data, &Objective::static_error_l2()).is_err());
    assert!(prepare_items(&op, &data, &Objective::static_residual_l2()).is_ok());
    let items = prepare_items(&op, &data, &Objective::static_residual_l2())
        .unwrap()
        .items;
    let aa = SolverConfig::with_strategy(UpdateKind::StandardAa);
    assert!(dynamic_loss(
        &op,
        &items,
        &Objective::dynamic(LossBasis::ResidualBased, NormKind::L2, 2),
        &aa
    )
    .is_err());
}

#[test]
fn degenerate_instances_are_skipped() {
    let mut data = instances(ProblemKind::Diffusion, 31, 3, 1);
    data[1] = unit_instance(31, vec![0.0; 31]);
    let prepared = prepare_items(&deeponet(0), &data, &Objective::static_residual_l2()).unwrap();
    assert_eq!(prepared.skipped, vec![1]);
    assert_eq!(prepared.items.len(), 2);
}

#[test]
fn overfits_a_small_set_and_is_deterministic() {
    let data = instances(ProblemKind::Diffusion, 31, 10, 77);
    let cfg = TrainConfig {
        epochs: 150,
        batch_size: 5,
        learning_rate: 3e-3,
        seed: 4,
        ..Default::default()
    };
    let obj = Objective::static_error_l2();
    let a = train(deeponet(9), &data, &obj, &cfg).unwrap();
    assert!(a.halted.is_none());
    let first = a.history.records[0].loss;
    let last = a.history.final_loss().unwrap();
    assert!(last <= 0.5 * first, "{first} -> {last}");
    let seq = TrainConfig {
        parallelism: Parallelism::Sequential,
        ..cfg
    };
    let b = train(deeponet(9), &data, &obj, &seq).unwrap();
    assert!(a
        .op
        .params
        .iter()
        .zip(&b.op.params)
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn unrolled_tape_grows_linearly_in_cycles() {
    let data = instances(ProblemKind::Diffusion, 31, 4, 3);
    let sm = SmootherConfig::default();
    for op in [deeponet(1), spectral(1)] {
        let bytes = |k: usize| {
            let obj = Objective::dynamic(LossBasis::ErrorBased, NormKind::L2, k);
            let items = prepare_items(&op, &data, &obj).unwrap().items;
            objective_and_grad(&op, &items, &obj, &sm, Reduction::Mean, Parallelism::Rayon)
                .unwrap()
                .tape_bytes
        };
        let ratio = bytes(5) as f64 / bytes(1) as f64;
        assert!((4.0..=6.0).contains(&ratio), "{:?}: {ratio}", op.kind());
    }
}

#[test]
fn plain_dynamic_loss_accepts_any_corrector() {
    let data = instances(ProblemKind::Diffusion, 31, 2, 3);
    let obj = Objective::dynamic(LossBasis::ErrorBased, NormKind::H1, 3);
    let items = prepare_items(&CorrectionOperator::zero(31), &data, &obj)
        .unwrap()
        .items;
    let exact = dynamic_loss_with(&items, &obj, &SmootherConfig::default(), &|item, r| {
        direct_solve(&item.system().clone().with_rhs(r.to_vec()).unwrap()).unwrap()
    })
    .unwrap();
    assert!(exact <= 1e-20);
}
