//! Separable per-sample losses, their convex conjugates, and the ridge
//! regularizer.
//!
//! A loss acts on the prediction `p = a_i^T x`. The smooth hinge loss is
//! `f_i(p) = h(l_i p)` with
//!
//! ```text
//! h(z) = 1/2 - z          z < 0
//!        (1 - z)^2 / 2    0 <= z <= 1
//!        0                z > 1
//! ```
//!
//! and conjugate `h*(u) = u^2/2 + u` on `[-1, 0]`, `+inf` elsewhere. The
//! quadratic loss is `f_i(p) = (p - b_i)^2 / 2` with `f_i*(y) = y^2/2 + b_i y`.

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, SparseDesignMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    SmoothHinge,
    Quadratic,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::SmoothHinge => "smooth_hinge",
            LossKind::Quadratic => "quadratic",
        }
    }
}

/// Per-coordinate domain of the conjugate, `lower[i] <= y_i <= upper[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ConjugateBox {
    pub fn contains(&self, i: usize, y: f64) -> bool {
        self.lower[i] <= y && y <= self.upper[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossModel {
    kind: LossKind,
    targets: Vec<f64>,
}

fn smooth_hinge(z: f64) -> f64 {
    if z < 0.0 {
        0.5 - z
    } else if z <= 1.0 {
        0.5 * (1.0 - z) * (1.0 - z)
    } else {
        0.0
    }
}

fn smooth_hinge_derivative(z: f64) -> f64 {
    if z < 0.0 {
        -1.0
    } else if z <= 1.0 {
        z - 1.0
    } else {
        0.0
    }
}

fn smooth_hinge_conjugate(u: f64) -> f64 {
    if (-1.0..=0.0).contains(&u) {
        0.5 * u * u + u
    } else {
        f64::INFINITY
    }
}

impl LossModel {
    /// Smooth hinge with labels in `{-1, +1}`.
    pub fn smooth_hinge(labels: Vec<f64>) -> Result<Self> {
        if let Some((i, l)) = labels
            .iter()
            .enumerate()
            .find(|(_, l)| **l != 1.0 && **l != -1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "smooth hinge label {i} is {l}, expected -1 or +1"
            )));
        }
        Ok(Self {
            kind: LossKind::SmoothHinge,
            targets: labels,
        })
    }

    pub fn quadratic(targets: Vec<f64>) -> Result<Self> {
        if targets.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("non-finite regression target".into()));
        }
        Ok(Self {
            kind: LossKind::Quadratic,
            targets,
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Smoothness constant of every `f_i`.
    pub fn beta(&self) -> f64 {
        1.0
    }

    /// Strong convexity of every `f_i` on its curved region.
    pub fn alpha(&self) -> f64 {
        1.0
    }

    pub fn value(&self, p: f64, i: usize) -> f64 {
        let t = self.targets[i];
        match self.kind {
            LossKind::SmoothHinge => smooth_hinge(p * t),
            LossKind::Quadratic => 0.5 * (p - t) * (p - t),
        }
    }

    pub fn derivative(&self, p: f64, i: usize) -> f64 {
        let t = self.targets[i];
        match self.kind {
            LossKind::SmoothHinge => t * smooth_hinge_derivative(p * t),
            LossKind::Quadratic => p - t,
        }
    }

    /// `f_i*(y)`; `+inf` outside the conjugate box.
    pub fn conjugate(&self, y: f64, i: usize) -> f64 {
        let t = self.targets[i];
        match self.kind {
            LossKind::SmoothHinge => smooth_hinge_conjugate(y * t),
            LossKind::Quadratic => 0.5 * y * y + t * y,
        }
    }

    pub fn conjugate_bounds(&self, i: usize) -> (f64, f64) {
        match self.kind {
            LossKind::SmoothHinge if self.targets[i] > 0.0 => (-1.0, 0.0),
            LossKind::SmoothHinge => (0.0, 1.0),
            LossKind::Quadratic => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn conjugate_box(&self) -> ConjugateBox {
        let (lower, upper) = (0..self.n_samples()).map(|i| self.conjugate_bounds(i)).unzip();
        ConjugateBox { lower, upper }
    }

    /// Maximizer over `u` of `(1/n) w_i u - (1/n) f_i*(u) - (u - y_i)^2 / (2 delta)`.
    ///
    /// Both conjugates are `u^2/2 + c u` on their domain (`c = l_i` for the
    /// hinge since `l_i^2 = 1`, `c = b_i` for the quadratic), so the stationary
    /// point is `(y_i + tau (w_i - c)) / (1 + tau)` with `tau = delta / n`,
    /// clipped to the box. Clipping is exact since the objective is concave.
    pub fn dual_prox_step(&self, w_i: f64, y_i: f64, delta: f64, n: usize, i: usize) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dual step must be positive, got {delta}"
            )));
        }
        Ok(self.dual_prox_unchecked(w_i, y_i, delta / n as f64, i))
    }

    pub(crate) fn dual_prox_unchecked(&self, w_i: f64, y_i: f64, tau: f64, i: usize) -> f64 {
        let c = self.targets[i];
        let u = (y_i + tau * (w_i - c)) / (1.0 + tau);
        let (lo, hi) = self.conjugate_bounds(i);
        u.clamp(lo, hi)
    }

    /// `(1/n) sum_i f_i(w_i)` for cached predictions `w = A x`.
    pub fn mean_value(&self, predictions: &[f64]) -> f64 {
        let n = predictions.len() as f64;
        predictions
            .iter()
            .enumerate()
            .map(|(i, &p)| self.value(p, i))
            .sum::<f64>()
            / n
    }

    /// `(1/n) sum_i f_i*(y_i)`; `+inf` when any `y_i` leaves its box.
    pub fn mean_conjugate(&self, y: &[f64]) -> f64 {
        let n = y.len() as f64;
        y.iter()
            .enumerate()
            .map(|(i, &v)| self.conjugate(v, i))
            .sum::<f64>()
            / n
    }
}

/// `g(x) = (mu/2) ||x||^2`, which is mu-strongly convex and mu-smooth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularizer {
    mu: f64,
}

impl Regularizer {
    pub fn ridge(mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "regularizer strength must be positive, got {mu}"
            )));
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Smoothness constant `L` of `g`.
    pub fn l_smooth(&self) -> f64 {
        self.mu
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.mu * dot(x, x)
    }
}

/// `P(x) = (1/n) sum_i f_i(a_i^T x) + g(x)`.
pub fn primal_objective(
    loss: &LossModel,
    reg: &Regularizer,
    a: &SparseDesignMatrix,
    x: &[f64],
) -> Result<f64> {
    check_len("primal_objective (x)", a.n_cols(), x.len())?;
    check_len("primal_objective (loss)", a.n_rows(), loss.n_samples())?;
    let w = a.mul_vec(x)?;
    Ok(loss.mean_value(&w) + reg.value(x))
}
