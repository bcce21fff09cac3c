//! Primal-dual block Frank-Wolfe solvers for l1-ball and trace-norm-ball
//! constrained empirical risk minimization, with reference baselines.
//!
//! ```
//! use pdbfw_core::{solve, DualStepRule, LossModel, Regularizer, SolverConfig, SparseDesignMatrix};
//!
//! let a = SparseDesignMatrix::from_dense(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
//! let loss = LossModel::quadratic(vec![1.0, -1.0, 0.0]).unwrap();
//! let reg = Regularizer::ridge(0.1).unwrap();
//! let mut cfg = SolverConfig::new(5.0, 2);
//! cfg.delta = DualStepRule::Spectral;
//! let sol = solve(&a, &loss, &reg, &cfg).unwrap();
//! assert!(sol.final_gap() <= 1e-8);
//! ```

pub mod baselines;
pub mod data;
pub mod error;
pub mod l1;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod rng;
pub mod trace_norm;

pub use baselines::{solve_baseline, BaselineConfig, BaselineKind, BaselineSolution};
pub use data::{
    generate_synthetic, normalize_rows, parse_libsvm, read_libsvm, write_libsvm, Dataset,
    ParseOptions, SyntheticKind, SyntheticProblem, SyntheticSpec,
};
pub use error::{Error, Result};
pub use l1::{solve, DualStepRule, Solution, SolverConfig, SolverState, StepSizes};
pub use linalg::{SparseDesignMatrix, SparseUpdate};
pub use losses::{primal_objective, LossKind, LossModel, Regularizer};
pub use metrics::{dual_objective, duality_gap, relative_primal_error, ConvergenceTrace, TraceRecord};
pub use rng::PortableRng;
pub use trace_norm::{
    solve_trace, solve_trace_observed, LowRankFactor, MatrixQuadraticLoss, TraceConfig,
    TraceSolution,
};

pub use nalgebra::DMatrix;
