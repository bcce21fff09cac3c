mod common;

use common::*;
use pdbfw_core::baselines::{projected_gradient_descent, solve_acc_pgd, solve_fw, solve_svrg, total_smoothness};
use pdbfw_core::{
    solve, solve_baseline, BaselineConfig, BaselineKind, DualStepRule, LossModel, PortableRng,
    Regularizer, SolverConfig, SparseDesignMatrix,
};

struct Instance {
    a: SparseDesignMatrix,
    loss: LossModel,
    reg: Regularizer,
    lambda: f64,
}

fn regression(seed: u64, n: usize, d: usize) -> Instance {
    let mut rng = PortableRng::new(seed);
    let a = random_sparse(&mut rng, n, d, 0.4);
    let b: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    Instance {
        a,
        loss: LossModel::quadratic(b).unwrap(),
        reg: Regularizer::ridge(0.2).unwrap(),
        lambda: 1.5,
    }
}

fn classification(seed: u64, n: usize, d: usize) -> Instance {
    let mut rng = PortableRng::new(seed);
    let a = random_dense(&mut rng, n, d);
    let labels: Vec<f64> = (0..n).map(|_| if rng.uniform() < 0.5 { -1.0 } else { 1.0 }).collect();
    Instance {
        a,
        loss: LossModel::smooth_hinge(labels).unwrap(),
        reg: Regularizer::ridge(0.1).unwrap(),
        lambda: 2.0,
    }
}

fn run(inst: &Instance, kind: BaselineKind, iters: usize) -> pdbfw_core::BaselineSolution {
    let mut cfg = BaselineConfig::new(kind, inst.lambda);
    cfg.max_iters = iters;
    cfg.gap_tol = 1e-12;
    cfg.seed = 9;
    solve_baseline(&inst.a, &inst.loss, &inst.reg, &cfg).unwrap()
}

#[test]
fn all_solvers_agree_on_random_instances() {
    for seed in 0..4 {
        for inst in [regression(seed, 30, 12), classification(seed + 100, 40, 10)] {
            let acc = run(&inst, BaselineKind::AccPgd, 3000).final_primal();
            let svrg = run(&inst, BaselineKind::Svrg, 400).final_primal();
            let mut cfg = SolverConfig::new(inst.lambda, inst.a.n_cols());
            cfg.delta = DualStepRule::Spectral;
            cfg.max_iters = 5000;
            cfg.gap_tol = 1e-12;
            let pd = solve(&inst.a, &inst.loss, &inst.reg, &cfg).unwrap();
            let pd = pd.trace.last().unwrap().primal;
            for (name, v) in [("svrg", svrg), ("pdbfw", pd)] {
                assert!((v - acc).abs() <= 1e-6 * acc.abs().max(1.0), "seed {seed} {name}: {v} vs {acc}");
            }
        }
    }
}

#[test]
fn svrg_is_reproducible_and_seed_sensitive() {
    let inst = regression(3, 25, 8);
    let mut cfg = BaselineConfig::new(BaselineKind::Svrg, inst.lambda);
    cfg.max_iters = 5;
    cfg.gap_tol = 0.0;
    cfg.seed = 42;
    let a = solve_svrg(&inst.a, &inst.loss, &inst.reg, &cfg).unwrap();
    let b = solve_svrg(&inst.a, &inst.loss, &inst.reg, &cfg).unwrap();
    assert_eq!(a.x, b.x);
    cfg.seed = 43;
    let c = solve_svrg(&inst.a, &inst.loss, &inst.reg, &cfg).unwrap();
    assert_ne!(a.x, c.x);
    assert_eq!(a.trace.len(), 6);
}

#[test]
fn frank_wolfe_error_decays_like_one_over_t() {
    let inst = classification(7, 50, 15);
    let p_star = run(&inst, BaselineKind::AccPgd, 5000).final_primal();
    let fw = run(&inst, BaselineKind::FrankWolfe, 800);
    // Curvature bound of the objective over the l1 ball of diameter 2 lambda.
    let curv = total_smoothness(&inst.a, &inst.loss, &inst.reg) * (2.0 * inst.lambda).powi(2);
    for r in fw.trace.records().iter().skip(1) {
        let err = r.primal - p_star;
        assert!(err >= -1e-9);
        assert!(err <= 2.0 * curv / (r.iter as f64 + 2.0) + 1e-12, "iter {}: {err}", r.iter);
    }
    let last = fw.trace.last().unwrap();
    assert!(last.primal - p_star < 0.05 * (fw.trace.records()[1].primal - p_star));
}

#[test]
fn weak_duality_holds_on_every_record() {
    for inst in [regression(11, 20, 9), classification(12, 30, 6)] {
        for kind in [BaselineKind::FrankWolfe, BaselineKind::AccPgd, BaselineKind::Svrg] {
            let sol = run(&inst, kind, 60);
            for r in sol.trace.records() {
                assert!(r.dual <= r.primal + 1e-9, "{}: {r:?}", kind.name());
                assert!((r.gap - (r.primal - r.dual)).abs() <= 1e-12 * (1.0 + r.primal.abs()));
            }
            assert!(sol.x.iter().map(|v| v.abs()).sum::<f64>() <= inst.lambda * (1.0 + 1e-9));
        }
    }
}

#[test]
fn accelerated_method_beats_plain_projected_gradient() {
    let inst = regression(5, 40, 20);
    let h = 1.0 / total_smoothness(&inst.a, &inst.loss, &inst.reg);
    let plain = projected_gradient_descent(&inst.a, &inst.loss, &inst.reg, inst.lambda, h, 50).unwrap();
    let plain_obj = inst.loss.mean_value(&inst.a.mul_vec(&plain).unwrap()) + inst.reg.value(&plain);
    let mut cfg = BaselineConfig::new(BaselineKind::AccPgd, inst.lambda);
    cfg.max_iters = 50;
    cfg.gap_tol = 0.0;
    let acc = solve_acc_pgd(&inst.a, &inst.loss, &inst.reg, &cfg).unwrap();
    assert!(acc.final_primal() <= plain_obj + 1e-12);
}

#[test]
fn flops_grow_monotonically() {
    let inst = regression(2, 20, 10);
    let cfg = {
        let mut c = BaselineConfig::new(BaselineKind::FrankWolfe, inst.lambda);
        c.max_iters = 30;
        c.gap_tol = 0.0;
        c
    };
    let sol = solve_fw(&inst.a, &inst.loss, &inst.reg, &cfg).unwrap();
    assert!(sol.trace.records().windows(2).all(|w| w[1].flops > w[0].flops));
    assert_eq!(sol.trace.records()[0].flops, 0);
}
