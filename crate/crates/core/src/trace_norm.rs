//! Primal-dual block Frank-Wolfe over the trace-norm ball with the row-wise
//! quadratic loss `f_i(a_i^T X) = ||a_i^T X - B_i||^2 / 2`.
//!
//! The primal step solves the rank-s proximal sub-problem approximately with
//! a block power iteration; the dual step moves the `k` rows of `Y` whose
//! proximal step has the largest Euclidean norm.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::l1::{
    check_config_common, check_delta, resolve_eta, spectral_delta, DualStepRule, StepSizes,
};
use crate::linalg::{project_l1_ball, top_k_by_magnitude, SparseDesignMatrix};
use crate::losses::{LossModel, Regularizer};
use crate::metrics::ConvergenceTrace;
use crate::rng::PortableRng;

/// `left * diag(singular) * right^T` with orthonormal factor columns and
/// non-increasing positive singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    pub left: DMatrix<f64>,
    pub singular: Vec<f64>,
    pub right: DMatrix<f64>,
}

impl LowRankFactor {
    pub fn zero(d: usize, c: usize) -> Self {
        Self {
            left: DMatrix::zeros(d, 0),
            singular: Vec::new(),
            right: DMatrix::zeros(c, 0),
        }
    }

    pub fn rank(&self) -> usize {
        self.singular.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut scaled = self.left.clone();
        for (k, s) in self.singular.iter().enumerate() {
            scaled.column_mut(k).scale_mut(*s);
        }
        scaled * self.right.transpose()
    }
}

/// Thin SVD by one-sided Jacobi rotations, singular values sorted in
/// non-increasing order. Left vectors of zero singular values are zero.
fn sorted_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    if m.nrows() < m.ncols() {
        let (v, sigma, u) = sorted_svd(&m.transpose());
        return (u, sigma, v);
    }
    let n = m.ncols();
    let mut u = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut u, &mut v] {
                    for i in 0..mat.nrows() {
                        let (a, b) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = cs * a - sn * b;
                        mat[(i, q)] = sn * a + cs * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let left = DMatrix::from_fn(m.nrows(), n, |i, k| {
        let j = order[k];
        if norms[j] > 0.0 { u[(i, j)] / norms[j] } else { 0.0 }
    });
    let right = DMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    (left, order.iter().map(|&j| norms[j]).collect(), right)
}

/// Keeps the first `s` triplets, projects their singular values onto the l1
/// ball of radius `lambda`, and drops the ones that vanish.
fn truncate_and_project(
    u: &DMatrix<f64>,
    sigma: &[f64],
    v: &DMatrix<f64>,
    lambda: f64,
    s: usize,
) -> Result<LowRankFactor> {
    let r = s.min(sigma.len());
    let proj = project_l1_ball(&sigma[..r], lambda)?;
    let keep: Vec<usize> = (0..r).filter(|&k| proj[k] > 0.0).collect();
    let cols = |src: &DMatrix<f64>| DMatrix::from_fn(src.nrows(), keep.len(), |i, k| src[(i, keep[k])]);
    Ok(LowRankFactor {
        left: cols(u),
        singular: keep.iter().map(|&k| proj[k]).collect(),
        right: cols(v),
    })
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    sorted_svd(m).1.iter().sum()
}

/// Euclidean projection onto `{X : ||X||_* <= lambda}` via a full SVD.
pub fn project_nuclear_ball(m: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {lambda}")));
    }
    let (u, sigma, v) = sorted_svd(m);
    if sigma.iter().sum::<f64>() <= lambda {
        return Ok(m.clone());
    }
    Ok(truncate_and_project(&u, &sigma, &v, lambda, sigma.len())?.to_dense())
}

/// Exact minimizer of `||V - M||_F^2` over `{||V||_* <= lambda, rank V <= s}`.
pub fn exact_lowrank_prox(m: &DMatrix<f64>, lambda: f64, s: usize) -> Result<LowRankFactor> {
    if s == 0 {
        return Err(Error::InvalidArgument("rank budget must be at least 1".into()));
    }
    let (u, sigma, v) = sorted_svd(m);
    truncate_and_project(&u, &sigma, &v, lambda, s)
}

/// Approximate top-s SVD by block power iteration, reused across calls so the
/// previous subspace warm-starts the next solve.
#[derive(Debug, Clone)]
pub struct LowRankOracle {
    pub oversampling: usize,
    pub max_iters: usize,
    /// Convergence threshold on the relative change of the top-s singular values.
    pub tol: f64,
    /// Residual still accepted when `max_iters` is exhausted.
    pub accept_tol: f64,
    rng: PortableRng,
    basis: Option<DMatrix<f64>>,
    /// Multiply-adds spent by the most recent call.
    pub last_flops: u64,
    pub last_iters: usize,
}

impl LowRankOracle {
    pub fn new(seed: u64) -> Self {
        Self {
            oversampling: 4,
            max_iters: 100,
            tol: 1e-10,
            accept_tol: 1e-6,
            rng: PortableRng::new(seed),
            basis: None,
            last_flops: 0,
            last_iters: 0,
        }
    }

    /// Top-s left/right singular vectors and values of `m`.
    pub fn top_svd(
        &mut self,
        m: &DMatrix<f64>,
        s: usize,
    ) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
        let (d, c) = m.shape();
        let p = (s + self.oversampling).min(d.min(c));
        self.last_flops = 0;
        self.last_iters = 0;
        let mut q = match self.basis.take() {
            Some(b) if b.shape() == (d, p) => b,
            _ => DMatrix::from_fn(d, p, |_, _| self.rng.normal()),
        };
        let mut prev: Vec<f64> = Vec::new();
        let mut residual = f64::INFINITY;
        let mut result = None;
        for it in 1..=self.max_iters {
            let g = m.tr_mul(&q);
            q = (m * g).qr().q();
            let b = q.tr_mul(m);
            self.last_flops += 3 * (d * c * p) as u64;
            let (ub, sigma, v) = sorted_svd(&b);
            self.last_iters = it;
            let top = sigma[0];
            if top == 0.0 {
                self.basis = Some(q);
                return Ok((DMatrix::zeros(d, 0), Vec::new(), DMatrix::zeros(c, 0)));
            }
            let r = s.min(sigma.len());
            if prev.len() == r {
                residual = (0..r)
                    .map(|k| (sigma[k] - prev[k]).abs())
                    .fold(0.0, f64::max)
                    / top;
            }
            prev = sigma[..r].to_vec();
            let done = residual <= self.tol;
            result = Some((&q * ub, sigma, v));
            if done {
                break;
            }
        }
        self.basis = Some(q);
        if residual > self.tol {
            if residual > self.accept_tol {
                return Err(Error::Approximation {
                    iters: self.max_iters,
                    residual,
                });
            }
            log::debug!("power iteration stopped at residual {residual:.2e}");
        }
        let (u, sigma, v) = result.expect("at least one iteration");
        Ok((u, sigma, v))
    }

    /// Approximate minimizer of `||V - M||_F^2` over the rank-s trace-norm ball.
    pub fn prox(&mut self, m: &DMatrix<f64>, lambda: f64, s: usize) -> Result<LowRankFactor> {
        if s == 0 {
            return Err(Error::InvalidArgument("rank budget must be at least 1".into()));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {lambda}")));
        }
        let (u, sigma, v) = self.top_svd(m, s)?;
        truncate_and_project(&u, &sigma, &v, lambda, s)
    }
}

/// One-shot approximate prox with a fresh oracle.
pub fn approx_lowrank_prox(m: &DMatrix<f64>, lambda: f64, s: usize) -> Result<LowRankFactor> {
    LowRankOracle::new(0).prox(m, lambda, s)
}

/// `l(V) = <G, V - X> + (curvature / 2) ||V - X||_F^2`.
pub fn lmo_objective(
    gradient: &DMatrix<f64>,
    x_prev: &DMatrix<f64>,
    curvature: f64,
    v: &DMatrix<f64>,
) -> f64 {
    let diff = v - x_prev;
    gradient.dot(&diff) + 0.5 * curvature * diff.norm_squared()
}

/// Row-wise quadratic loss `(1/n) sum_i ||W_i - B_i||^2 / 2` with targets `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixQuadraticLoss {
    targets: DMatrix<f64>,
}

impl MatrixQuadraticLoss {
    pub fn new(targets: DMatrix<f64>) -> Result<Self> {
        if targets.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("non-finite regression target".into()));
        }
        Ok(Self { targets })
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn n_samples(&self) -> usize {
        self.targets.nrows()
    }

    pub fn mean_value(&self, w: &DMatrix<f64>) -> f64 {
        0.5 * (w - &self.targets).norm_squared() / self.targets.nrows() as f64
    }

    pub fn mean_conjugate(&self, y: &DMatrix<f64>) -> f64 {
        (0.5 * y.norm_squared() + y.dot(&self.targets)) / self.targets.nrows() as f64
    }
}

pub fn trace_primal_objective(
    a: &SparseDesignMatrix,
    loss: &MatrixQuadraticLoss,
    reg: &Regularizer,
    x: &DMatrix<f64>,
) -> Result<f64> {
    let w = sparse_times_dense(a, x)?.0;
    Ok(loss.mean_value(&w) + 0.5 * reg.mu() * x.norm_squared())
}

/// `min_{||X||_* <= lambda} mu/2 ||X||^2 + (1/n) <Z, X>  -  (1/n) sum_i f_i*(Y_i)`
/// with `Z = A^T Y` supplied.
pub fn trace_dual_objective_from_aty(
    loss: &MatrixQuadraticLoss,
    reg: &Regularizer,
    lambda: f64,
    y: &DMatrix<f64>,
    z: &DMatrix<f64>,
) -> Result<f64> {
    let n = y.nrows() as f64;
    let xhat = project_nuclear_ball(&(z * (-1.0 / (n * reg.mu()))), lambda)?;
    Ok(0.5 * reg.mu() * xhat.norm_squared() + z.dot(&xhat) / n - loss.mean_conjugate(y))
}

pub fn trace_dual_objective(
    a: &SparseDesignMatrix,
    loss: &MatrixQuadraticLoss,
    reg: &Regularizer,
    lambda: f64,
    y: &DMatrix<f64>,
) -> Result<f64> {
    check_len("trace_dual_objective (Y)", a.n_rows(), y.nrows())?;
    let z = sparse_tr_times_dense(a, y)?;
    trace_dual_objective_from_aty(loss, reg, lambda, y, &z)
}

/// `A M` for sparse `A` and dense `M`, with its multiply-add count.
pub fn sparse_times_dense(a: &SparseDesignMatrix, m: &DMatrix<f64>) -> Result<(DMatrix<f64>, u64)> {
    check_len("sparse_times_dense", a.n_cols(), m.nrows())?;
    let cols = m.ncols();
    let mut out = DMatrix::zeros(a.n_rows(), cols);
    for i in 0..a.n_rows() {
        let (idx, val) = a.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            for k in 0..cols {
                out[(i, k)] += v * m[(j, k)];
            }
        }
    }
    Ok((out, (a.nnz() * cols) as u64))
}

pub fn sparse_tr_times_dense(a: &SparseDesignMatrix, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_len("sparse_tr_times_dense", a.n_rows(), m.nrows())?;
    let mut out = DMatrix::zeros(a.n_cols(), m.ncols());
    add_row_slice_transpose(a, &(0..a.n_rows()).collect::<Vec<_>>(), m, &mut out);
    Ok(out)
}

/// `Z += sum_{i in rows} a_i D_i`, where `D_i` is row `i` of `delta`.
fn add_row_slice_transpose(
    a: &SparseDesignMatrix,
    rows: &[usize],
    delta: &DMatrix<f64>,
    z: &mut DMatrix<f64>,
) -> u64 {
    let c = delta.ncols();
    let mut flops = 0u64;
    for &i in rows {
        let (idx, val) = a.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            for k in 0..c {
                z[(j, k)] += v * delta[(i, k)];
            }
        }
        flops += (idx.len() * c) as u64;
    }
    flops
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    pub lambda: f64,
    pub s: usize,
    /// Dual block size; `ceil(n s (1/c + 1/d))` clamped to `[1, n]` when `None`.
    pub k: Option<usize>,
    pub eta: Option<f64>,
    pub delta: DualStepRule,
    pub max_iters: usize,
    pub gap_tol: f64,
    /// Target accuracy of the approximate oracle; defaults to `gap_tol`.
    pub eps_target: Option<f64>,
    pub time_limit: Option<Duration>,
    /// Seed for the oracle's initial subspace.
    pub seed: u64,
}

impl TraceConfig {
    pub fn new(lambda: f64, s: usize) -> Self {
        Self {
            lambda,
            s,
            k: None,
            eta: None,
            delta: DualStepRule::Theory,
            max_iters: 1000,
            gap_tol: 1e-8,
            eps_target: None,
            time_limit: None,
            seed: 0,
        }
    }

    pub fn resolve(
        &self,
        a: &SparseDesignMatrix,
        c: usize,
        loss: &LossModel,
        reg: &Regularizer,
    ) -> Result<StepSizes> {
        let (n, d) = (a.n_rows(), a.n_cols());
        if n == 0 || d == 0 || c == 0 {
            return Err(Error::Config("empty problem".into()));
        }
        check_config_common(self.lambda, self.s, d.min(c))?;
        let k = match self.k {
            Some(k) if k == 0 || k > n => {
                return Err(Error::Config(format!("k = {k} must lie in [1, {n}]")))
            }
            Some(k) => k,
            None => {
                let raw = n as f64 * self.s as f64 * (1.0 / c as f64 + 1.0 / d as f64);
                (raw.ceil() as usize).clamp(1, n)
            }
        };
        let eta = resolve_eta(self.eta, reg)?;
        let delta = match self.delta {
            DualStepRule::Theory => {
                crate::l1::theory_delta(k, n, reg, loss, a.spectral_norm_sq(), 8.0)
            }
            DualStepRule::Spectral => spectral_delta(n, reg, a.spectral_norm_sq()),
            DualStepRule::Fixed(v) => v,
        };
        check_delta(delta)?;
        Ok(StepSizes { k, eta, delta })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixState {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// Cached `A X`.
    pub w: DMatrix<f64>,
    /// Cached `A^T Y`.
    pub z: DMatrix<f64>,
    pub iter: usize,
    pub flops: u64,
}

impl MatrixState {
    pub fn zeros(n: usize, d: usize, c: usize) -> Self {
        Self {
            x: DMatrix::zeros(d, c),
            y: DMatrix::zeros(n, c),
            w: DMatrix::zeros(n, c),
            z: DMatrix::zeros(d, c),
            iter: 0,
            flops: 0,
        }
    }
}

/// What the oracle saw and returned in one primal step.
#[derive(Debug)]
pub struct LmoEvent<'a> {
    pub iter: usize,
    pub x_prev: &'a DMatrix<f64>,
    pub gradient: &'a DMatrix<f64>,
    /// `L eta`.
    pub curvature: f64,
    pub lambda: f64,
    pub s: usize,
    pub result: &'a LowRankFactor,
    pub gamma: f64,
    pub eps: f64,
}

fn primal_step_inner(
    state: &mut MatrixState,
    cfg: &TraceConfig,
    steps: &StepSizes,
    a: &SparseDesignMatrix,
    reg: &Regularizer,
    oracle: &mut LowRankOracle,
    observer: &mut dyn FnMut(&LmoEvent),
) -> Result<LowRankFactor> {
    let n = a.n_rows() as f64;
    let curv = reg.l_smooth() * steps.eta;
    let gradient = &state.z / n + &state.x * reg.mu();
    let m = &state.x - &gradient / curv;
    let factor = oracle.prox(&m, cfg.lambda, cfg.s)?;
    state.flops += oracle.last_flops;
    observer(&LmoEvent {
        iter: state.iter + 1,
        x_prev: &state.x,
        gradient: &gradient,
        curvature: curv,
        lambda: cfg.lambda,
        s: cfg.s,
        result: &factor,
        gamma: 0.5,
        eps: cfg.eps_target.unwrap_or(cfg.gap_tol) / 8.0,
    });
    let eta = steps.eta;
    let r = factor.rank();
    let (d, c) = state.x.shape();
    let nr = a.n_rows();
    state.x *= 1.0 - eta;
    state.w *= 1.0 - eta;
    state.flops += (d * c + nr * c) as u64;
    if r > 0 {
        let mut right_scaled = factor.right.clone();
        for (k, s) in factor.singular.iter().enumerate() {
            right_scaled.column_mut(k).scale_mut(eta * s);
        }
        state.x.gemm(1.0, &factor.left, &right_scaled.transpose(), 1.0);
        let (au, f) = sparse_times_dense(a, &factor.left)?;
        state.w.gemm(1.0, &au, &right_scaled.transpose(), 1.0);
        state.flops += f + ((d + nr) * c * r) as u64;
    }
    Ok(factor)
}

/// Rank-s approximate proximal Frank-Wolfe step on `X`, maintaining `W = A X`.
pub fn primal_step_trace(
    state: &mut MatrixState,
    cfg: &TraceConfig,
    steps: &StepSizes,
    a: &SparseDesignMatrix,
    reg: &Regularizer,
    oracle: &mut LowRankOracle,
) -> Result<LowRankFactor> {
    primal_step_inner(state, cfg, steps, a, reg, oracle, &mut |_| {})
}

/// Row-wise proximal dual candidate, then the `k` rows with the largest
/// update norm are applied and `Z` is maintained.
pub fn dual_step_trace(
    state: &mut MatrixState,
    steps: &StepSizes,
    a: &SparseDesignMatrix,
    loss: &MatrixQuadraticLoss,
) -> Result<Vec<usize>> {
    let (n, c) = state.y.shape();
    let tau = steps.delta / n as f64;
    let b = loss.targets();
    let candidate = DMatrix::from_fn(n, c, |i, j| {
        (state.y[(i, j)] + tau * (state.w[(i, j)] - b[(i, j)])) / (1.0 + tau)
    });
    let moves = &candidate - &state.y;
    let row_norms: Vec<f64> = (0..n).map(|i| moves.row(i).norm()).collect();
    let block = top_k_by_magnitude(&row_norms, steps.k)?;
    for &i in &block {
        state.y.set_row(i, &candidate.row(i));
    }
    state.flops += add_row_slice_transpose(a, &block, &moves, &mut state.z);
    Ok(block)
}

#[derive(Debug, Clone)]
pub struct TraceSolution {
    pub state: MatrixState,
    pub trace: ConvergenceTrace,
    pub steps: StepSizes,
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = sorted_svd(m).1;
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * top).count()
}

fn record(
    trace: &mut ConvergenceTrace,
    state: &MatrixState,
    seconds: f64,
    lambda: f64,
    loss: &MatrixQuadraticLoss,
    reg: &Regularizer,
) -> Result<f64> {
    let primal = loss.mean_value(&state.w) + 0.5 * reg.mu() * state.x.norm_squared();
    if !primal.is_finite() {
        return Err(Error::Diverged {
            iter: state.iter,
            what: "primal objective",
        });
    }
    let dual = trace_dual_objective_from_aty(loss, reg, lambda, &state.y, &state.z)?;
    if !dual.is_finite() {
        return Err(Error::Diverged {
            iter: state.iter,
            what: "dual objective",
        });
    }
    let rank = numerical_rank(&state.x);
    trace.push(state.iter, seconds, primal, dual, state.flops, rank);
    Ok(primal - dual)
}

pub fn solve_trace(
    a: &SparseDesignMatrix,
    loss: &MatrixQuadraticLoss,
    reg: &Regularizer,
    cfg: &TraceConfig,
) -> Result<TraceSolution> {
    solve_trace_observed(a, loss, reg, cfg, |_| {})
}

/// Like [`solve_trace`], calling `observer` after every oracle call.
pub fn solve_trace_observed(
    a: &SparseDesignMatrix,
    loss: &MatrixQuadraticLoss,
    reg: &Regularizer,
    cfg: &TraceConfig,
    mut observer: impl FnMut(&LmoEvent),
) -> Result<TraceSolution> {
    let (n, d) = (a.n_rows(), a.n_cols());
    check_len("solve_trace (targets)", n, loss.n_samples())?;
    let c = loss.targets().ncols();
    let scalar_loss = LossModel::quadratic(vec![0.0; n])?;
    let steps = cfg.resolve(a, c, &scalar_loss, reg)?;
    log::debug!(
        "pdbfw trace: n={n} d={d} c={c} s={} k={} eta={} delta={:.3e}",
        cfg.s,
        steps.k,
        steps.eta,
        steps.delta
    );
    let mut oracle = LowRankOracle::new(cfg.seed);
    let mut state = MatrixState::zeros(n, d, c);
    let mut trace = ConvergenceTrace::new();
    let mut elapsed = Duration::ZERO;
    let mut gap = record(&mut trace, &state, 0.0, cfg.lambda, loss, reg)?;
    while state.iter < cfg.max_iters && gap > cfg.gap_tol {
        if cfg.time_limit.is_some_and(|t| elapsed >= t) {
            log::info!("pdbfw trace: time limit reached at iteration {}", state.iter);
            break;
        }
        let start = Instant::now();
        primal_step_inner(&mut state, cfg, &steps, a, reg, &mut oracle, &mut observer)?;
        dual_step_trace(&mut state, &steps, a, loss)?;
        state.iter += 1;
        elapsed += start.elapsed();
        gap = record(&mut trace, &state, elapsed.as_secs_f64(), cfg.lambda, loss, reg)?;
    }
    Ok(TraceSolution { state, trace, steps })
}
