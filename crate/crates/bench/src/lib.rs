//! Instance builders shared by the benchmarks.

use pdbfw_core::data::TraceSensing;
use pdbfw_core::{
    generate_synthetic, LossModel, Regularizer, SparseDesignMatrix, SyntheticKind,
    SyntheticProblem, SyntheticSpec,
};

pub struct L1Instance {
    pub a: SparseDesignMatrix,
    pub loss: LossModel,
    pub reg: Regularizer,
    pub lambda: f64,
}

/// Dense Gaussian sparse-regression instance with `mu = 10 / n` and
/// `lambda = ||x0||_1`.
pub fn sparse_regression(n: usize, d: usize, sparsity: usize, seed: u64) -> L1Instance {
    let spec = SyntheticSpec {
        kind: SyntheticKind::SparseRegression,
        n,
        d,
        c: 1,
        sparsity_or_rank: sparsity,
        noise: 0.01,
        seed,
    };
    let SyntheticProblem::SparseRegression(p) = generate_synthetic(&spec).expect("valid spec") else {
        unreachable!()
    };
    L1Instance {
        lambda: p.x0.iter().map(|v| v.abs()).sum(),
        loss: LossModel::quadratic(p.dataset.labels).expect("finite targets"),
        reg: Regularizer::ridge(10.0 / n as f64).expect("positive mu"),
        a: p.dataset.a,
    }
}

pub fn trace_sensing(n: usize, d: usize, c: usize, rank: usize, seed: u64) -> TraceSensing {
    let spec = SyntheticSpec {
        kind: SyntheticKind::TraceSensing,
        n,
        d,
        c,
        sparsity_or_rank: rank,
        noise: 0.0,
        seed,
    };
    let SyntheticProblem::TraceSensing(p) = generate_synthetic(&spec).expect("valid spec") else {
        unreachable!()
    };
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builders_respect_shapes() {
        let inst = sparse_regression(20, 30, 4, 1);
        assert_eq!((inst.a.n_rows(), inst.a.n_cols()), (20, 30));
        assert!(inst.lambda > 0.0);
        let t = trace_sensing(10, 6, 5, 2, 1);
        assert_eq!(t.targets.shape(), (10, 5));
    }
}
