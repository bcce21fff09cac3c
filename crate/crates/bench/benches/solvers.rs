use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pdbfw_bench::{sparse_regression, trace_sensing};
use pdbfw_core::l1::{dual_step, primal_step};
use pdbfw_core::trace_norm::LowRankOracle;
use pdbfw_core::{
    solve_baseline, BaselineConfig, BaselineKind, DMatrix, DualStepRule, SolverConfig, SolverState,
};

fn pdbfw_iteration(c: &mut Criterion) {
    let inst = sparse_regression(1000, 2000, 20, 1);
    let mut group = c.benchmark_group("pdbfw_iteration");
    for s in [10usize, 40, 160] {
        let mut cfg = SolverConfig::new(inst.lambda, s);
        cfg.delta = DualStepRule::Spectral;
        let steps = cfg.resolve(&inst.a, &inst.loss, &inst.reg).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(s), &s, |b, _| {
            let mut state = SolverState::zeros(inst.a.n_rows(), inst.a.n_cols());
            b.iter(|| {
                primal_step(&mut state, &cfg, &steps, &inst.a, &inst.reg).unwrap();
                dual_step(&mut state, &steps, &inst.a, &inst.loss).unwrap();
            });
        });
    }
    group.finish();
}

fn baselines(c: &mut Criterion) {
    let inst = sparse_regression(300, 600, 10, 2);
    let mut group = c.benchmark_group("baseline_20_iters");
    group.sample_size(10);
    for kind in [BaselineKind::FrankWolfe, BaselineKind::AccPgd, BaselineKind::Svrg] {
        let mut cfg = BaselineConfig::new(kind, inst.lambda);
        cfg.max_iters = 20;
        cfg.gap_tol = 0.0;
        group.bench_function(kind.name(), |b| {
            b.iter(|| solve_baseline(&inst.a, &inst.loss, &inst.reg, &cfg).unwrap());
        });
    }
    group.finish();
}

fn lowrank_oracle(c: &mut Criterion) {
    let prob = trace_sensing(100, 200, 150, 5, 3);
    let m: DMatrix<f64> = &prob.x0 + DMatrix::from_fn(200, 150, |i, j| 1e-3 * ((i * 7 + j * 13) % 17) as f64);
    let mut group = c.benchmark_group("lowrank_prox");
    for s in [2usize, 5, 10] {
        group.bench_with_input(BenchmarkId::from_parameter(s), &s, |b, &s| {
            let mut oracle = LowRankOracle::new(0);
            b.iter(|| oracle.prox(&m, 10.0, s).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, pdbfw_iteration, baselines, lowrank_oracle);
criterion_main!(benches);
