//! Primal-dual block Frank-Wolfe over the l1 ball.
//!
//! Each iteration takes an s-sparse proximal Frank-Wolfe step on `x`, keeps
//! `w = Ax` current through the touched columns, then moves the `k` dual
//! coordinates whose proximal step is largest (GS-r rule) and keeps
//! `z = A^T y` current through the touched rows.

use std::time::{Duration, Instant};

use crate::error::{check_len, Error, Result};
use crate::linalg::{
    apply_row_slice_transpose, apply_sparse_col_product, sparse_l1_prox, top_k_by_magnitude,
    SparseDesignMatrix, SparseUpdate,
};
use crate::losses::{LossModel, Regularizer};
use crate::metrics::{dual_objective_from_aty, ConvergenceTrace};

/// How the dual step size `delta` is chosen when not fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualStepRule {
    /// The conservative value guaranteed by the linear-rate analysis,
    /// computed from `k`, `n`, `mu`, `L`, `beta`, `alpha` and `R = max_i ||a_i||^2`.
    Theory,
    /// `n^2 mu / ||A||_2^2`, the inverse Lipschitz constant of `y -> A x(y) / n`.
    Spectral,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub s: usize,
    /// Dual block size; `ceil(n s / d)` clamped to `[1, n]` when `None`.
    pub k: Option<usize>,
    /// Primal step; `mu / (2L)` when `None`.
    pub eta: Option<f64>,
    pub delta: DualStepRule,
    pub max_iters: usize,
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
}

impl SolverConfig {
    pub fn new(lambda: f64, s: usize) -> Self {
        Self {
            lambda,
            s,
            k: None,
            eta: None,
            delta: DualStepRule::Theory,
            max_iters: 1000,
            gap_tol: 1e-8,
            time_limit: None,
        }
    }

    /// Validates the configuration and fills in the default step sizes.
    pub fn resolve(
        &self,
        a: &SparseDesignMatrix,
        loss: &LossModel,
        reg: &Regularizer,
    ) -> Result<StepSizes> {
        let (n, d) = (a.n_rows(), a.n_cols());
        if n == 0 || d == 0 {
            return Err(Error::Config("design matrix is empty".into()));
        }
        check_config_common(self.lambda, self.s, d)?;
        let k = match self.k {
            Some(k) if k == 0 || k > n => {
                return Err(Error::Config(format!("k = {k} must lie in [1, {n}]")))
            }
            Some(k) => k,
            None => ((n * self.s).div_ceil(d)).clamp(1, n),
        };
        let eta = resolve_eta(self.eta, reg)?;
        let delta = match self.delta {
            DualStepRule::Theory => {
                let r = a.max_row_norm_sq();
                theory_delta(k, n, reg, loss, r, 4.0)
            }
            DualStepRule::Spectral => spectral_delta(n, reg, a.spectral_norm_sq()),
            DualStepRule::Fixed(v) => v,
        };
        check_delta(delta)?;
        Ok(StepSizes { k, eta, delta })
    }
}

pub(crate) fn check_config_common(lambda: f64, s: usize, max_s: usize) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    if s == 0 || s > max_s {
        return Err(Error::Config(format!("s = {s} must lie in [1, {max_s}]")));
    }
    Ok(())
}

pub(crate) fn resolve_eta(eta: Option<f64>, reg: &Regularizer) -> Result<f64> {
    let eta = eta.unwrap_or(reg.mu() / (2.0 * reg.l_smooth()));
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Config(format!("eta must lie in (0, 1], got {eta}")));
    }
    Ok(eta)
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Config(format!(
            "dual step must be positive and finite, got {delta}"
        )));
    }
    Ok(())
}

/// `(1/k) (L/(mu n beta) + 5 beta R / (2 alpha mu n^2) (1 + c L/mu))^-1`;
/// `c = 4` for the l1 ball and `c = 8` for the trace-norm ball.
pub(crate) fn theory_delta(
    k: usize,
    n: usize,
    reg: &Regularizer,
    loss: &LossModel,
    r: f64,
    c: f64,
) -> f64 {
    let (mu, l) = (reg.mu(), reg.l_smooth());
    let (beta, alpha) = (loss.beta(), loss.alpha());
    let n = n as f64;
    let inner = l / (mu * n * beta) + 5.0 * beta * r / (2.0 * alpha * mu * n * n) * (1.0 + c * l / mu);
    1.0 / (k as f64 * inner)
}

pub(crate) fn spectral_delta(n: usize, reg: &Regularizer, norm_sq: f64) -> f64 {
    (n * n) as f64 * reg.mu() / norm_sq
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub k: usize,
    pub eta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Cached `A x`.
    pub w: Vec<f64>,
    /// Cached `A^T y`.
    pub z: Vec<f64>,
    pub iter: usize,
    /// Cumulative multiply-adds spent in matrix kernels.
    pub flops: u64,
}

impl SolverState {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            x: vec![0.0; d],
            y: vec![0.0; n],
            w: vec![0.0; n],
            z: vec![0.0; d],
            iter: 0,
            flops: 0,
        }
    }

    pub fn support(&self) -> usize {
        self.x.iter().filter(|v| **v != 0.0).count()
    }
}

/// One block Frank-Wolfe step on `x`: solves
/// `min_{||u||_1 <= lambda, ||u||_0 <= s} <c, u> + (L eta / 2) ||u - x||^2`
/// with `c = z/n + mu x`, then sets `x <- (1 - eta) x + eta u` and
/// `w <- (1 - eta) w + eta A u`. Returns `u`.
pub fn primal_step(
    state: &mut SolverState,
    cfg: &SolverConfig,
    steps: &StepSizes,
    a: &SparseDesignMatrix,
    reg: &Regularizer,
) -> Result<SparseUpdate> {
    let n = a.n_rows() as f64;
    let (mu, curv) = (reg.mu(), reg.l_smooth() * steps.eta);
    let v: Vec<f64> = state
        .x
        .iter()
        .zip(&state.z)
        .map(|(&xj, &zj)| xj - (zj / n + mu * xj) / curv)
        .collect();
    let target = sparse_l1_prox(&v, cfg.lambda, cfg.s)?;
    let eta = steps.eta;
    state.x.iter_mut().for_each(|xj| *xj *= 1.0 - eta);
    for &(j, u) in target.entries() {
        state.x[j] += eta * u;
    }
    state.flops += apply_sparse_col_product(a, &target, &mut state.w, 1.0 - eta, eta)?;
    Ok(target)
}

/// Proximal dual candidate for every coordinate, then the GS-r block update
/// on the `k` largest moves. Returns the updated indices.
pub fn dual_step(
    state: &mut SolverState,
    steps: &StepSizes,
    a: &SparseDesignMatrix,
    loss: &LossModel,
) -> Result<Vec<usize>> {
    let n = a.n_rows();
    let tau = steps.delta / n as f64;
    let candidate: Vec<f64> = (0..n)
        .map(|i| loss.dual_prox_unchecked(state.w[i], state.y[i], tau, i))
        .collect();
    let moves: Vec<f64> = candidate.iter().zip(&state.y).map(|(c, y)| c - y).collect();
    let block = top_k_by_magnitude(&moves, steps.k)?;
    let dy: Vec<f64> = block.iter().map(|&i| moves[i]).collect();
    for &i in &block {
        state.y[i] = candidate[i];
    }
    state.flops += apply_row_slice_transpose(a, &block, &dy, &mut state.z)?;
    Ok(block)
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub state: SolverState,
    pub trace: ConvergenceTrace,
    pub steps: StepSizes,
}

impl Solution {
    pub fn x(&self) -> &[f64] {
        &self.state.x
    }

    pub fn y(&self) -> &[f64] {
        &self.state.y
    }

    pub fn final_gap(&self) -> f64 {
        self.trace.last().map_or(f64::INFINITY, |r| r.gap)
    }
}

fn record(
    trace: &mut ConvergenceTrace,
    state: &SolverState,
    seconds: f64,
    lambda: f64,
    loss: &LossModel,
    reg: &Regularizer,
) -> Result<f64> {
    let primal = loss.mean_value(&state.w) + reg.value(&state.x);
    if !primal.is_finite() {
        return Err(Error::Diverged {
            iter: state.iter,
            what: "primal objective",
        });
    }
    let dual = dual_objective_from_aty(loss, reg, lambda, &state.y, &state.z)?;
    if !dual.is_finite() {
        return Err(Error::Diverged {
            iter: state.iter,
            what: "dual objective",
        });
    }
    trace.push(state.iter, seconds, primal, dual, state.flops, state.support());
    Ok(primal - dual)
}

/// Runs the solver from `x = 0, y = 0` until the duality gap drops to
/// `gap_tol`, `max_iters` is reached, or the time limit expires.
pub fn solve(
    a: &SparseDesignMatrix,
    loss: &LossModel,
    reg: &Regularizer,
    cfg: &SolverConfig,
) -> Result<Solution> {
    check_len("solve (labels)", a.n_rows(), loss.n_samples())?;
    let steps = cfg.resolve(a, loss, reg)?;
    log::debug!(
        "pdbfw l1: n={} d={} s={} k={} eta={} delta={:.3e}",
        a.n_rows(),
        a.n_cols(),
        cfg.s,
        steps.k,
        steps.eta,
        steps.delta
    );
    let mut state = SolverState::zeros(a.n_rows(), a.n_cols());
    let mut trace = ConvergenceTrace::new();
    let mut elapsed = Duration::ZERO;
    let mut gap = record(&mut trace, &state, 0.0, cfg.lambda, loss, reg)?;
    while state.iter < cfg.max_iters && gap > cfg.gap_tol {
        if cfg.time_limit.is_some_and(|t| elapsed >= t) {
            log::info!("pdbfw l1: time limit reached at iteration {}", state.iter);
            break;
        }
        let start = Instant::now();
        primal_step(&mut state, cfg, &steps, a, reg)?;
        dual_step(&mut state, &steps, a, loss)?;
        state.iter += 1;
        elapsed += start.elapsed();
        gap = record(&mut trace, &state, elapsed.as_secs_f64(), cfg.lambda, loss, reg)?;
    }
    Ok(Solution { state, trace, steps })
}
