mod common;

use common::*;
use dlhim_core::acceleration::{
    aa_coefficients, adaptive_alpha, physics_aware_aa_step, standard_aa_step, AaHistory,
    UpdateKind, UpdateStrategy,
};
use dlhim_core::neural::CorrectionOperator;
use dlhim_core::problems::ProblemKind;
use dlhim_core::solver::{solve, SolverConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Minimizer of `||R a||` subject to `sum a = 1` from the KKT system.
fn lagrange(res: &[Vec<f64>]) -> Vec<f64> {
    let m = res.len();
    let r = DMatrix::from_fn(res[0].len(), m, |i, j| res[j][i]);
    let mut kkt = DMatrix::zeros(m + 1, m + 1);
    kkt.view_mut((0, 0), (m, m))
        .copy_from(&(2.0 * r.transpose() * &r));
    for j in 0..m {
        kkt[(j, m)] = 1.0;
        kkt[(m, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(m + 1);
    rhs[m] = 1.0;
    let sol = kkt.lu().solve(&rhs).unwrap();
    sol.rows(0, m).iter().cloned().collect()
}

fn combined_norm(res: &[Vec<f64>], a: &[f64]) -> f64 {
    let n = res[0].len();
    let v: Vec<f64> = (0..n)
        .map(|i| res.iter().zip(a).map(|(r, w)| w * r[i]).sum())
        .collect();
    norm(&v)
}

#[test]
fn coefficients_match_lagrange_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let dim = rng.random_range(3..=12);
        let count = rng.random_range(1..=11usize).min(dim);
        let res: Vec<Vec<f64>> = (0..count)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let refs: Vec<&[f64]> = res.iter().map(Vec::as_slice).collect();
        let c = aa_coefficients(&refs, 1e-10).unwrap();
        assert!((c.alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
        let want = combined_norm(&res, &lagrange(&res));
        assert!((combined_norm(&res, &c.alpha) - want).abs() <= 1e-10 * want.max(1.0));
    }
}

#[test]
fn four_residuals_in_six_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let res: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let refs: Vec<&[f64]> = res.iter().map(Vec::as_slice).collect();
    let a = aa_coefficients(&refs, 0.0).unwrap().alpha;
    let b = lagrange(&res);
    assert!(max_diff(&a, &b) <= 1e-10);
}

#[test]
fn regularization_is_neutral_when_well_conditioned() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let res: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..10).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let refs: Vec<&[f64]> = res.iter().map(Vec::as_slice).collect();
        let a = aa_coefficients(&refs, 0.0).unwrap();
        assert!(a.condition < 1e6);
        let b = aa_coefficients(&refs, 1e-12).unwrap();
        assert!(
            max_diff(&a.alpha, &b.alpha)
                <= 1e-8 * a.alpha.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        );
    }
}

#[test]
fn rank_deficient_window_stays_finite() {
    let r = vec![1.0, 2.0, 3.0];
    let c = aa_coefficients(&[&r, &r, &r], 1e-10).unwrap();
    assert!(c.regularized);
    assert!(c.alpha.iter().all(|v| v.is_finite()));
    assert!((c.alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
}

#[test]
fn adaptive_step_oracles() {
    let inst = &instances(ProblemKind::Diffusion, 63, 1, 31)[0];
    let mut ident = inst.system.clone();
    ident.diag.iter_mut().for_each(|d| *d = 1.0);
    ident.sub.iter_mut().for_each(|d| *d = 0.0);
    ident.sup.iter_mut().for_each(|d| *d = 0.0);
    let r: Vec<f64> = (0..63).map(|i| (i as f64).cos()).collect();
    assert!((adaptive_alpha(&r, &r, &ident).unwrap().alpha - 1.0).abs() < 1e-15);
    let mut p = vec![0.0; 63];
    p[0] = r[1];
    p[1] = -r[0];
    assert_eq!(adaptive_alpha(&p, &r, &ident).unwrap().alpha, 0.0);
    assert!(adaptive_alpha(&vec![0.0; 63], &r, &ident).is_err());

    let sys = &inst.system;
    let u_star = inst.u_star.as_ref().unwrap();
    let u: Vec<f64> = u_star
        .iter()
        .enumerate()
        .map(|(i, v)| v + 0.01 * (0.2 * i as f64).sin())
        .collect();
    let r = sys.residual(&u);
    let p: Vec<f64> = (0..63).map(|i| 0.02 * (0.1 * i as f64).sin()).collect();
    let a = adaptive_alpha(&p, &r, sys).unwrap();
    assert!(!a.degenerate);
    let phi = |alpha: f64| {
        let e: Vec<f64> = u_star
            .iter()
            .zip(&u)
            .zip(&p)
            .map(|((s, x), d)| s - x - alpha * d)
            .collect();
        e.iter()
            .zip(&sys.apply(&e))
            .map(|(x, y)| x * y)
            .sum::<f64>()
    };
    for d in [0.1, 0.01] {
        assert!(phi(a.alpha + d) >= phi(a.alpha) && phi(a.alpha - d) >= phi(a.alpha));
    }
}

#[test]
fn physics_aware_step_never_loses_to_its_window() {
    let data = instances(ProblemKind::Helmholtz, 63, 3, 44);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let strategy = UpdateStrategy::new(UpdateKind::PhysicsAwareAa);
    for inst in &data {
        let mut h = AaHistory::new(10);
        let u = vec![0.0; 63];
        for _ in 0..15 {
            let g: Vec<f64> = (0..63)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    0.05 * z
                })
                .collect();
            let step = physics_aware_aa_step(&mut h, &g, &u, &inst.system, &strategy).unwrap();
            let best = h
                .residuals()
                .iter()
                .map(|r| norm(r))
                .fold(f64::INFINITY, f64::min);
            assert!(norm(&inst.system.residual(&step.next)) <= best + 1e-10);
        }
    }
    let mut h = AaHistory::new(10);
    let g = vec![0.7, -0.2];
    let inst = unit_instance(2, vec![1.0, 1.0]);
    let step = physics_aware_aa_step(&mut h, &g, &[0.0, 0.0], &inst.system, &strategy).unwrap();
    assert_eq!(step.next, g);
}

#[test]
fn standard_and_physics_aware_coincide_for_proportional_residuals() {
    // A = a I makes every fixed-point residual of a Jacobi cycle a fixed
    // multiple of the physical residual of its candidate
    let inst = &instances(ProblemKind::Diffusion, 31, 1, 5)[0];
    let mut sys = inst.system.clone();
    sys.diag.iter_mut().for_each(|d| *d = 3.0);
    sys.sub.iter_mut().for_each(|d| *d = 0.0);
    sys.sup.iter_mut().for_each(|d| *d = 0.0);
    let zero = CorrectionOperator::zero(31);
    let run = |kind| {
        let cfg = SolverConfig {
            max_cycles: 8,
            smoother: dlhim_core::smoothers::SmootherConfig::jacobi(2),
            ..SolverConfig::with_strategy(kind)
        };
        let mut u = vec![0.0; 31];
        let mut h = AaHistory::new(cfg.strategy.memory);
        let mut out = Vec::new();
        for _ in 0..cfg.max_cycles {
            let (g, _) = dlhim_core::solver::dl_him_cycle(
                &sys,
                &u,
                &|r| zero.apply(r, &inst.k).unwrap(),
                &cfg,
            )
            .unwrap();
            u = match kind {
                UpdateKind::StandardAa => {
                    standard_aa_step(&mut h, &g, &u, &cfg.strategy)
                        .unwrap()
                        .next
                }
                _ => {
                    physics_aware_aa_step(&mut h, &g, &u, &sys, &cfg.strategy)
                        .unwrap()
                        .next
                }
            };
            out.push(u.clone());
        }
        out
    };
    for (a, b) in run(UpdateKind::StandardAa)
        .iter()
        .zip(&run(UpdateKind::PhysicsAwareAa))
    {
        assert!(max_diff(a, b) <= 1e-10);
    }
}

#[test]
fn window_optimality_holds_along_solves() {
    let data = instances(ProblemKind::Helmholtz, 101, 3, 8);
    for (i, inst) in data.iter().enumerate() {
        let op = if i % 2 == 0 {
            deeponet(i as u64)
        } else {
            spectral(i as u64)
        };
        let cfg = SolverConfig {
            max_cycles: 60,
            ..SolverConfig::with_strategy(UpdateKind::PhysicsAwareAa)
        };
        let t = solve(inst, &op, &cfg).unwrap();
        assert!(
            t.max_window_gap.unwrap() <= 1e-10,
            "gap {:?}",
            t.max_window_gap
        );
    }
}
