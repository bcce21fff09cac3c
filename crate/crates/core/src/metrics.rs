//! Primal/dual objectives, duality gaps, and per-iteration convergence traces.

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm1, project_l1_ball, SparseDesignMatrix};
use crate::losses::{primal_objective, LossModel, Regularizer};

/// One row of a convergence trace. `flops` is cumulative over the run and
/// counts multiply-add pairs in matrix kernels only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub seconds: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub flops: u64,
    /// Support size (l1 runs) or rank (trace-norm runs) of the iterate.
    pub support: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; `gap` is derived as `primal - dual`.
    pub fn push(
        &mut self,
        iter: usize,
        seconds: f64,
        primal: f64,
        dual: f64,
        flops: u64,
        support: usize,
    ) {
        debug_assert!(self.records.last().map_or(true, |r| r.iter < iter));
        self.records.push(TraceRecord {
            iter,
            seconds,
            primal,
            dual,
            gap: primal - dual,
            flops,
            support,
        });
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best_primal(&self) -> Option<f64> {
        self.records.iter().map(|r| r.primal).reduce(f64::min)
    }

    /// The record for iteration `iter`, if it was logged.
    pub fn at_iter(&self, iter: usize) -> Option<&TraceRecord> {
        self.records
            .binary_search_by_key(&iter, |r| r.iter)
            .ok()
            .map(|i| &self.records[i])
    }
}

/// Minimizer of `g(x) + (1/n) <z, x>` over the l1 ball for ridge `g`:
/// `project_l1_ball(-z / (n mu), lambda)`.
pub fn inner_primal_minimizer(z: &[f64], n: usize, reg: &Regularizer, lambda: f64) -> Result<Vec<f64>> {
    let scale = -1.0 / (n as f64 * reg.mu());
    let v: Vec<f64> = z.iter().map(|zj| zj * scale).collect();
    project_l1_ball(&v, lambda)
}

/// Dual objective given a precomputed `z = A^T y`. Costs O(d log d).
pub fn dual_objective_from_aty(
    loss: &LossModel,
    reg: &Regularizer,
    lambda: f64,
    y: &[f64],
    z: &[f64],
) -> Result<f64> {
    let conj = loss.mean_conjugate(y);
    if conj.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let n = y.len();
    let xhat = inner_primal_minimizer(z, n, reg, lambda)?;
    Ok(reg.value(&xhat) + dot(z, &xhat) / n as f64 - conj)
}

/// `D(y) = min_{||x||_1 <= lambda} { g(x) + (1/n) <y, Ax> } - (1/n) sum_i f_i*(y_i)`.
/// Returns `-inf` when `y` leaves the conjugate domain.
pub fn dual_objective(
    a: &SparseDesignMatrix,
    loss: &LossModel,
    reg: &Regularizer,
    lambda: f64,
    y: &[f64],
) -> Result<f64> {
    check_len("dual_objective (y)", a.n_rows(), y.len())?;
    check_len("dual_objective (loss)", a.n_rows(), loss.n_samples())?;
    let z = a.tr_mul_vec(y)?;
    dual_objective_from_aty(loss, reg, lambda, y, &z)
}

/// `P(x) - D(y)`. `x` must lie in the l1 ball (relative slack 1e-9).
pub fn duality_gap(
    a: &SparseDesignMatrix,
    loss: &LossModel,
    reg: &Regularizer,
    lambda: f64,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let l1 = norm1(x);
    if l1 > lambda * (1.0 + 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "primal point is infeasible: ||x||_1 = {l1} > {lambda}"
        )));
    }
    Ok(primal_objective(loss, reg, a, x)? - dual_objective(a, loss, reg, lambda, y)?)
}

/// `L(x, y) = g(x) + (1/n) <y, Ax> - (1/n) sum_i f_i*(y_i)`.
pub fn lagrangian(
    a: &SparseDesignMatrix,
    loss: &LossModel,
    reg: &Regularizer,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let ax = a.mul_vec(x)?;
    check_len("lagrangian (y)", a.n_rows(), y.len())?;
    let n = y.len() as f64;
    Ok(reg.value(x) + dot(y, &ax) / n - loss.mean_conjugate(y))
}

/// Weighted gap `max{1, beta/alpha - 1} (L(x_next, y) - D(y)) + (D* - D(y))`
/// used in the convergence analysis. `d_star` comes from a high-accuracy
/// reference solve; `x_next` is the primal iterate produced after `y`.
#[allow(clippy::too_many_arguments)]
pub fn analysis_gap(
    a: &SparseDesignMatrix,
    loss: &LossModel,
    reg: &Regularizer,
    lambda: f64,
    x_next: &[f64],
    y: &[f64],
    d_star: f64,
) -> Result<f64> {
    let d = dual_objective(a, loss, reg, lambda, y)?;
    let primal_part = lagrangian(a, loss, reg, x_next, y)? - d;
    let weight = (loss.beta() / loss.alpha() - 1.0).max(1.0);
    Ok(weight * primal_part + (d_star - d))
}

/// `(P_t - P*) / P*` for each record.
pub fn relative_primal_error(trace: &ConvergenceTrace, p_star: f64) -> Result<Vec<f64>> {
    if !(p_star > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reference objective must be positive, got {p_star}"
        )));
    }
    Ok(trace
        .records()
        .iter()
        .map(|r| (r.primal - p_star) / p_star)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (SparseDesignMatrix, LossModel, Regularizer) {
        let a = SparseDesignMatrix::from_dense(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, -1.1]).unwrap();
        let loss = LossModel::smooth_hinge(vec![1.0, -1.0, 1.0]).unwrap();
        (a, loss, Regularizer::ridge(0.2).unwrap())
    }

    #[test]
    fn dual_at_zero_is_zero_for_hinge() {
        let (a, loss, reg) = toy();
        assert_eq!(dual_objective(&a, &loss, &reg, 5.0, &[0.0; 3]).unwrap(), 0.0);
        let gap = duality_gap(&a, &loss, &reg, 5.0, &[0.0; 2], &[0.0; 3]).unwrap();
        assert_eq!(gap, 0.5);
    }

    #[test]
    fn dual_outside_box_is_neg_inf() {
        let (a, loss, reg) = toy();
        let d = dual_objective(&a, &loss, &reg, 5.0, &[0.5, 0.0, 0.0]).unwrap();
        assert_eq!(d, f64::NEG_INFINITY);
    }

    #[test]
    fn gap_rejects_infeasible_primal() {
        let (a, loss, reg) = toy();
        assert!(duality_gap(&a, &loss, &reg, 1.0, &[1.0, 1.0], &[0.0; 3]).is_err());
    }

    #[test]
    fn one_dimensional_saddle_point_has_zero_gap() {
        // P(x) = (x - 1)^2 / 2 + x^2 / 2, optimum x = 1/2 interior; y = f'(x) = -1/2.
        let a = SparseDesignMatrix::from_dense(1, 1, &[1.0]).unwrap();
        let loss = LossModel::quadratic(vec![1.0]).unwrap();
        let reg = Regularizer::ridge(1.0).unwrap();
        let gap = duality_gap(&a, &loss, &reg, 10.0, &[0.5], &[-0.5]).unwrap();
        assert!(gap.abs() < 1e-15, "{gap}");
    }

    #[test]
    fn relative_error_series() {
        let mut t = ConvergenceTrace::new();
        t.push(0, 0.0, 2.0, 0.0, 0, 0);
        t.push(1, 0.0, 1.0, 0.0, 0, 0);
        assert_eq!(relative_primal_error(&t, 1.0).unwrap(), vec![1.0, 0.0]);
        assert!(relative_primal_error(&t, 0.0).is_err());
        assert_eq!(t.at_iter(1).unwrap().primal, 1.0);
        assert!(t.at_iter(2).is_none());
    }

    #[test]
    fn analysis_gap_vanishes_at_saddle() {
        let a = SparseDesignMatrix::from_dense(1, 1, &[1.0]).unwrap();
        let loss = LossModel::quadratic(vec![1.0]).unwrap();
        let reg = Regularizer::ridge(1.0).unwrap();
        let d_star = dual_objective(&a, &loss, &reg, 10.0, &[-0.5]).unwrap();
        let g = analysis_gap(&a, &loss, &reg, 10.0, &[0.5], &[-0.5], d_star).unwrap();
        assert!(g.abs() < 1e-15);
    }
}
