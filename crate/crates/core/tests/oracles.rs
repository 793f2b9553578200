mod common;

use common::*;
use dlhim_core::acceleration::UpdateKind;
use dlhim_core::neural::CorrectionOperator;
use dlhim_core::problems::{direct_solve, ProblemKind};
use dlhim_core::smoothers::{
    error_propagation_matrix, propagate_error, residual_propagation_matrix, smoother_sweep,
    spectral_radius, SmootherConfig,
};
use dlhim_core::solver::{dl_him_cycle, solve, solve_with, SolverConfig, Verdict};
use nalgebra::{DMatrix, DVector};

fn smoothers() -> Vec<SmootherConfig> {
    vec![
        SmootherConfig::jacobi(1),
        SmootherConfig::jacobi(19),
        SmootherConfig::gauss_seidel(3),
    ]
}

#[test]
fn matrix_free_paths_match_dense_oracles() {
    for kind in [ProblemKind::Diffusion, ProblemKind::Helmholtz] {
        for n in [7, 31, 63] {
            let inst = &instances(kind, n, 1, 11 + n as u64)[0];
            let sys = &inst.system;
            let a = sys.to_dense();
            let x = DVector::from_iterator(n, (0..n).map(|i| (0.3 * i as f64).sin() + 0.1));
            let ax = sys.apply(x.as_slice());
            assert!(max_diff(&ax, (&a * &x).as_slice()) <= 1e-10 * (&a * &x).amax());
            for cfg in smoothers() {
                let e = error_propagation_matrix(sys, &cfg).unwrap();
                let r = residual_propagation_matrix(sys, &cfg).unwrap();
                let ex = propagate_error(sys, x.as_slice(), &cfg);
                let d = max_diff(&ex, (&e * &x).as_slice());
                assert!(
                    d <= 1e-10 * (&e * &x).amax().max(x.amax()),
                    "{kind:?} n={n} {cfg:?} diff {d:e}"
                );
                // R = A E A^-1
                let ainv = a.clone().try_inverse().unwrap();
                let sim = &a * &e * &ainv;
                let scale = r.amax().max(1.0);
                assert!(
                    (&sim - &r).amax() <= 1e-10 * scale * ainv.amax() * a.amax(),
                    "{kind:?} n={n}"
                );
                // smoother residual follows R
                let u0 = vec![0.0; n];
                let u1 = smoother_sweep(sys, &u0, &cfg).unwrap();
                let r1 = DVector::from_vec(sys.residual(&u1));
                let want = &r * DVector::from_vec(sys.rhs.clone());
                let scale = want.amax().max(DVector::from_vec(sys.rhs.clone()).amax());
                assert!(
                    (r1 - &want).amax() <= 1e-10 * scale,
                    "{kind:?} n={n} {cfg:?}"
                );
            }
        }
    }
}

#[test]
fn zero_operator_reproduces_stationary_iteration() {
    let inst = &instances(ProblemKind::Diffusion, 31, 1, 3)[0];
    let sys = &inst.system;
    let cfg = SolverConfig {
        max_cycles: 12,
        ..SolverConfig::default()
    };
    let r_s = residual_propagation_matrix(sys, &cfg.smoother).unwrap();
    let zero = CorrectionOperator::zero(31);
    let prepared = zero.prepare(&inst.k, inst.grid()).unwrap();
    let mut u = vec![0.0; 31];
    let mut r = DVector::from_vec(sys.rhs.clone());
    for _ in 0..12 {
        let (g, _) = dl_him_cycle(sys, &u, &|x| prepared.apply(x), &cfg).unwrap();
        r = &r_s * r;
        let got = sys.residual(&g);
        assert!(max_diff(&got, r.as_slice()) <= 1e-12 * r.amax().max(1e-3) + 1e-12);
        assert_eq!(g, smoother_sweep(sys, &u, &cfg.smoother).unwrap());
        u = g;
    }
}

#[test]
fn zero_operator_contracts_at_smoother_spectral_radius() {
    let inst = &instances(ProblemKind::Diffusion, 31, 1, 5)[0];
    let cfg = SolverConfig {
        max_cycles: 400,
        ..SolverConfig::default()
    };
    let rho = spectral_radius(&error_propagation_matrix(&inst.system, &cfg.smoother).unwrap()).rho;
    let trace = solve(inst, &CorrectionOperator::zero(31), &cfg).unwrap();
    assert!(
        rel(trace.q_res, rho) <= 0.1,
        "q = {}, rho = {}",
        trace.q_res,
        rho
    );
}

#[test]
fn exact_inverse_operator_converges_immediately() {
    let n = 63;
    let f: Vec<f64> = (1..=n).map(|i| (i as f64 * 0.4).sin() + 1.0).collect();
    let inst = unit_instance(n, f);
    let op = inverse_laplacian(n);
    let cfg = SolverConfig::default();
    let (g, _) = dl_him_cycle(
        &inst.system,
        &vec![0.0; n],
        &|r| op.apply(r, &inst.k).unwrap(),
        &cfg,
    )
    .unwrap();
    assert!(norm(&inst.system.residual(&g)) <= 1e-8 * norm(&inst.system.rhs));
    let trace = solve(&inst, &op, &cfg).unwrap();
    assert_eq!(trace.verdict, Verdict::Converged);
    assert!(trace.rows.len() <= 3, "{} rows", trace.rows.len());
}

#[test]
fn solution_is_a_fixed_point_of_the_cycle() {
    let inst = &instances(ProblemKind::Helmholtz, 63, 1, 9)[0];
    let u = inst.u_star.clone().unwrap();
    let op = spectral(1);
    let prepared = op.prepare(&inst.k, inst.grid()).unwrap();
    for cfg in [
        SolverConfig::default(),
        SolverConfig {
            smoother: SmootherConfig::gauss_seidel(4),
            ..Default::default()
        },
    ] {
        let (g, _) = dl_him_cycle(&inst.system, &u, &|r| prepared.apply(r), &cfg).unwrap();
        assert!(max_diff(&g, &u) <= 1e-9 * u.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
}

#[test]
fn residual_and_error_norms_sandwich() {
    let inst = &instances(ProblemKind::Diffusion, 31, 1, 21)[0];
    let a: DMatrix<f64> = inst.system.to_dense();
    let ainv = a.clone().try_inverse().unwrap();
    let norm1 = |m: &DMatrix<f64>| {
        m.column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let (a1, ainv1) = (norm1(&a), norm1(&ainv));
    let trace = solve(
        inst,
        &deeponet(4),
        &SolverConfig {
            max_cycles: 30,
            ..Default::default()
        },
    )
    .unwrap();
    for row in &trace.rows {
        let e = row.err_norm.unwrap();
        assert!(row.res_norm <= a1 * e * (1.0 + 1e-12));
        assert!(e <= ainv1 * row.res_norm * (1.0 + 1e-12));
    }
}

#[test]
fn strategies_share_the_first_row_and_traces_are_bounded() {
    let inst = &instances(ProblemKind::Helmholtz, 63, 1, 2)[0];
    let op = deeponet(2);
    let mut first = None;
    for kind in [
        UpdateKind::FixedStep,
        UpdateKind::AdaptiveStep,
        UpdateKind::StandardAa,
        UpdateKind::PhysicsAwareAa,
    ] {
        let cfg = SolverConfig {
            max_cycles: 40,
            ..SolverConfig::with_strategy(kind)
        };
        let t = solve(inst, &op, &cfg).unwrap();
        assert!(t.rows.len() <= cfg.max_cycles + 1);
        assert!(t
            .rows
            .iter()
            .all(|r| r.res_norm >= 0.0 && r.upd_norm >= 0.0));
        assert!(t.q_res.is_finite());
        let r0 = t.rows[0].res_norm;
        assert_eq!(*first.get_or_insert(r0), r0);
        if t.verdict == Verdict::Converged {
            assert!(t.final_relative_residual() <= cfg.tol_residual);
        }
        if kind == UpdateKind::PhysicsAwareAa {
            assert!(t.max_window_gap.unwrap() <= 1e-10);
        }
    }
}

#[test]
fn direct_reference_matches_dense_solve() {
    let inst = &instances(ProblemKind::Helmholtz, 63, 1, 17)[0];
    let a = inst.system.to_dense();
    let x = a
        .lu()
        .solve(&DVector::from_vec(inst.system.rhs.clone()))
        .unwrap();
    let u = direct_solve(&inst.system).unwrap();
    assert!(max_diff(&u, x.as_slice()) <= 1e-10 * x.amax());
}

#[test]
fn solve_with_closure_matches_prepared_operator() {
    let inst = &instances(ProblemKind::Diffusion, 63, 1, 8)[0];
    let op = spectral(8);
    let cfg = SolverConfig {
        max_cycles: 20,
        record_timing: false,
        ..Default::default()
    };
    let a = solve(inst, &op, &cfg).unwrap();
    let b = solve_with(
        &inst.system,
        &|r| op.apply(r, &inst.k).unwrap(),
        &cfg,
        inst.u_star.as_deref(),
    )
    .unwrap();
    assert_eq!(a, b);
}
