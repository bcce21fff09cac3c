//! Reference solvers for the l1-constrained problem: classic Frank-Wolfe,
//! accelerated projected gradient with restarts, and projected SVRG.
//!
//! Every recorded iterate is paired with the dual candidate `y = f'(Ax)` so
//! the trace carries a duality gap comparable with the primal-dual solver.

use std::time::{Duration, Instant};

use crate::error::{check_len, Error, Result};
use crate::linalg::{apply_sparse_col_product, project_l1_ball, SparseDesignMatrix, SparseUpdate};
use crate::losses::{LossModel, Regularizer};
use crate::metrics::{dual_objective_from_aty, ConvergenceTrace};
use crate::rng::PortableRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    FrankWolfe,
    AccPgd,
    Svrg,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::FrankWolfe => "fw",
            BaselineKind::AccPgd => "acc_pgd",
            BaselineKind::Svrg => "svrg",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub lambda: f64,
    /// Fixed step size; `None` selects the automatic rule of each method.
    pub step_size: Option<f64>,
    /// Inner steps per SVRG epoch; `n` when `None`.
    pub svrg_epoch_length: Option<usize>,
    /// Iterations, or epochs for SVRG.
    pub max_iters: usize,
    pub gap_tol: f64,
    pub seed: u64,
    pub time_limit: Option<Duration>,
}

impl BaselineConfig {
    pub fn new(kind: BaselineKind, lambda: f64) -> Self {
        Self {
            kind,
            lambda,
            step_size: None,
            svrg_epoch_length: None,
            max_iters: 1000,
            gap_tol: 1e-8,
            seed: 0,
            time_limit: None,
        }
    }

    fn validate(&self, a: &SparseDesignMatrix, loss: &LossModel) -> Result<()> {
        check_len("baseline (labels)", a.n_rows(), loss.n_samples())?;
        if a.n_rows() == 0 || a.n_cols() == 0 {
            return Err(Error::Config("design matrix is empty".into()));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if let Some(h) = self.step_size {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::Config(format!("step size must be positive, got {h}")));
            }
        }
        if self.svrg_epoch_length == Some(0) {
            return Err(Error::Config("SVRG epoch length must be positive".into()));
        }
        Ok(())
    }
}

/// Smoothness of `P`: `beta R + L` with `R = max_i ||a_i||^2`.
pub fn total_smoothness(a: &SparseDesignMatrix, loss: &LossModel, reg: &Regularizer) -> f64 {
    loss.beta() * a.max_row_norm_sq() + reg.l_smooth()
}

#[derive(Debug, Clone)]
pub struct BaselineSolution {
    pub x: Vec<f64>,
    pub trace: ConvergenceTrace,
}

impl BaselineSolution {
    pub fn final_primal(&self) -> f64 {
        self.trace.last().map_or(f64::INFINITY, |r| r.primal)
    }
}

struct Recorder<'a> {
    a: &'a SparseDesignMatrix,
    loss: &'a LossModel,
    reg: &'a Regularizer,
    lambda: f64,
    trace: ConvergenceTrace,
}

impl Recorder<'_> {
    /// Records `(x, w = Ax)` and returns the gap.
    fn push(&mut self, iter: usize, seconds: f64, x: &[f64], w: &[f64], flops: u64) -> Result<f64> {
        let primal = self.loss.mean_value(w) + self.reg.value(x);
        if !primal.is_finite() {
            return Err(Error::Diverged {
                iter,
                what: "primal objective",
            });
        }
        let y: Vec<f64> = w
            .iter()
            .enumerate()
            .map(|(i, &p)| self.loss.derivative(p, i))
            .collect();
        let z = self.a.tr_mul_vec(&y)?;
        let dual = dual_objective_from_aty(self.loss, self.reg, self.lambda, &y, &z)?;
        if !dual.is_finite() {
            return Err(Error::Diverged {
                iter,
                what: "dual objective",
            });
        }
        let support = x.iter().filter(|v| **v != 0.0).count();
        self.trace.push(iter, seconds, primal, dual, flops, support);
        Ok(primal - dual)
    }
}

/// `(1/n) A^T f'(w) + mu x` and its multiply-add count.
fn full_gradient(
    a: &SparseDesignMatrix,
    loss: &LossModel,
    reg: &Regularizer,
    x: &[f64],
    w: &[f64],
) -> (Vec<f64>, u64) {
    let n = a.n_rows() as f64;
    let r: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(i, &p)| loss.derivative(p, i) / n)
        .collect();
    let mut g = a.tr_mul_vec(&r).expect("dimensions checked");
    for (gj, xj) in g.iter_mut().zip(x) {
        *gj += reg.mu() * xj;
    }
    (g, a.nnz() as u64)
}

fn out_of_time(limit: Option<Duration>, elapsed: Duration) -> bool {
    limit.is_some_and(|t| elapsed >= t)
}

/// Frank-Wolfe with the l1-ball vertex oracle and step `2 / (t + 2)`.
pub fn solve_fw(
    a: &SparseDesignMatrix,
    loss: &LossModel,
    reg: &Regularizer,
    cfg: &BaselineConfig,
) -> Result<BaselineSolution> {
    cfg.validate(a, loss)?;
    let (n, d) = (a.n_rows(), a.n_cols());
    let mut rec = Recorder { a, loss, reg, lambda: cfg.lambda, trace: ConvergenceTrace::new() };
    let (mut x, mut w) = (vec![0.0; d], vec![0.0; n]);
    let mut flops = 0u64;
    let mut elapsed = Duration::ZERO;
    let mut gap = rec.push(0, 0.0, &x, &w, flops)?;
    let mut t = 0;
    while t < cfg.max_iters && gap > cfg.gap_tol && !out_of_time(cfg.time_limit, elapsed) {
        let start = Instant::now();
        let (g, f) = full_gradient(a, loss, reg, &x, &w);
        flops += f;
        let mut j = 0;
        for (i, gi) in g.iter().enumerate() {
            if gi.abs() > g[j].abs() {
                j = i;
            }
        }
        if g[j] != 0.0 {
            let eta = cfg.step_size.unwrap_or(2.0 / (t as f64 + 2.0)).min(1.0);
            let vertex = -cfg.lambda * g[j].signum();
            x.iter_mut().for_each(|v| *v *= 1.0 - eta);
            x[j] += eta * vertex;
            let dx = SparseUpdate::new(vec![(j, vertex)])?;
            flops += apply_sparse_col_product(a, &dx, &mut w, 1.0 - eta, eta)?;
        }
        t += 1;
        elapsed += start.elapsed();
        gap = rec.push(t, elapsed.as_secs_f64(), &x, &w, flops)?;
    }
    Ok(BaselineSolution { x, trace: rec.trace })
}

/// FISTA on the l1 ball with step `1 / (beta R + L)`, restarting the momentum
/// whenever the objective would increase.
pub fn solve_acc_pgd(
    a: &SparseDesignMatrix,
    loss: &LossModel,
    reg: &Regularizer,
    cfg: &BaselineConfig,
) -> Result<BaselineSolution> {
    cfg.validate(a, loss)?;
    let (n, d) = (a.n_rows(), a.n_cols());
    let h = cfg.step_size.unwrap_or(1.0 / total_smoothness(a, loss, reg));
    let mut rec = Recorder { a, loss, reg, lambda: cfg.lambda, trace: ConvergenceTrace::new() };
    let (mut x, mut ax) = (vec![0.0; d], vec![0.0; n]);
    let (mut v, mut av) = (x.clone(), ax.clone());
    let mut momentum = 1.0f64;
    let mut obj = loss.mean_value(&ax) + reg.value(&x);
    let mut flops = 0u64;
    let mut elapsed = Duration::ZERO;
    let mut gap = rec.push(0, 0.0, &x, &ax, flops)?;
    let mut t = 0;
    while t < cfg.max_iters && gap > cfg.gap_tol && !out_of_time(cfg.time_limit, elapsed) {
        let start = Instant::now();
        let mut restarted = false;
        let (x_new, ax_new) = loop {
            let (g, f) = full_gradient(a, loss, reg, &v, &av);
            flops += f;
            let step: Vec<f64> = v.iter().zip(&g).map(|(vj, gj)| vj - h * gj).collect();
            let cand = project_l1_ball(&step, cfg.lambda)?;
            let a_cand = a.mul_vec(&cand)?;
            flops += a.nnz() as u64;
            let obj_cand = loss.mean_value(&a_cand) + reg.value(&cand);
            if obj_cand <= obj {
                obj = obj_cand;
                break (cand, a_cand);
            }
            if restarted {
                // Even the plain projected step ascends (rounding): stay put.
                break (x.clone(), ax.clone());
            }
            v.clone_from(&x);
            av.clone_from(&ax);
            momentum = 1.0;
            restarted = true;
        };
        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next;
        momentum = next;
        v = x_new.iter().zip(&x).map(|(xn, xo)| xn + beta * (xn - xo)).collect();
        av = ax_new.iter().zip(&ax).map(|(xn, xo)| xn + beta * (xn - xo)).collect();
        x = x_new;
        ax = ax_new;
        t += 1;
        elapsed += start.elapsed();
        gap = rec.push(t, elapsed.as_secs_f64(), &x, &ax, flops)?;
    }
    Ok(BaselineSolution { x, trace: rec.trace })
}

/// Projected SVRG with uniform sampling; one trace record per epoch.
pub fn solve_svrg(
    a: &SparseDesignMatrix,
    loss: &LossModel,
    reg: &Regularizer,
    cfg: &BaselineConfig,
) -> Result<BaselineSolution> {
    cfg.validate(a, loss)?;
    let (n, d) = (a.n_rows(), a.n_cols());
    let h = cfg
        .step_size
        .unwrap_or(1.0 / (10.0 * total_smoothness(a, loss, reg)));
    let m = cfg.svrg_epoch_length.unwrap_or(n);
    let mu = reg.mu();
    let mut rng = PortableRng::new(cfg.seed);
    let mut rec = Recorder { a, loss, reg, lambda: cfg.lambda, trace: ConvergenceTrace::new() };
    let mut x = vec![0.0; d];
    let mut ax = vec![0.0; n];
    let mut flops = 0u64;
    let mut elapsed = Duration::ZERO;
    let mut gap = rec.push(0, 0.0, &x, &ax, flops)?;
    let mut epoch = 0;
    while epoch < cfg.max_iters && gap > cfg.gap_tol && !out_of_time(cfg.time_limit, elapsed) {
        let start = Instant::now();
        let snapshot = x.clone();
        let snap_pred = ax;
        let (full, f) = full_gradient(a, loss, reg, &snapshot, &snap_pred);
        flops += f;
        for _ in 0..m {
            let i = rng.below(n as u64) as usize;
            let (idx, val) = a.row(i);
            let p = a.row_dot(i, &x);
            let coef = loss.derivative(p, i) - loss.derivative(snap_pred[i], i);
            flops += 2 * idx.len() as u64;
            let mut step: Vec<f64> = x
                .iter()
                .zip(&snapshot)
                .zip(&full)
                .map(|((xj, sj), gj)| xj - h * (mu * (xj - sj) + gj))
                .collect();
            for (&j, &aij) in idx.iter().zip(val) {
                step[j] -= h * coef * aij;
            }
            x = project_l1_ball(&step, cfg.lambda)?;
        }
        ax = a.mul_vec(&x)?;
        flops += a.nnz() as u64;
        epoch += 1;
        elapsed += start.elapsed();
        gap = rec.push(epoch, elapsed.as_secs_f64(), &x, &ax, flops)?;
    }
    Ok(BaselineSolution { x, trace: rec.trace })
}

pub fn solve_baseline(
    a: &SparseDesignMatrix,
    loss: &LossModel,
    reg: &Regularizer,
    cfg: &BaselineConfig,
) -> Result<BaselineSolution> {
    match cfg.kind {
        BaselineKind::FrankWolfe => solve_fw(a, loss, reg, cfg),
        BaselineKind::AccPgd => solve_acc_pgd(a, loss, reg, cfg),
        BaselineKind::Svrg => solve_svrg(a, loss, reg, cfg),
    }
}

/// Iterate reached by projected gradient descent after `iters` steps of size
/// `h`; used as a cross-check for the accelerated and stochastic variants.
pub fn projected_gradient_descent(
    a: &SparseDesignMatrix,
    loss: &LossModel,
    reg: &Regularizer,
    lambda: f64,
    h: f64,
    iters: usize,
) -> Result<Vec<f64>> {
    let mut x = vec![0.0; a.n_cols()];
    for _ in 0..iters {
        let w = a.mul_vec(&x)?;
        let (g, _) = full_gradient(a, loss, reg, &x, &w);
        let step: Vec<f64> = x.iter().zip(&g).map(|(xj, gj)| xj - h * gj).collect();
        x = project_l1_ball(&step, lambda)?;
    }
    Ok(x)
}
