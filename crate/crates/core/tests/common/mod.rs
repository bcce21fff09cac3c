//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use pdbfw_core::{LossModel, PortableRng, SparseDesignMatrix};

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// l1-ball projection by enumerating every candidate support: for a support
/// `S` the KKT point is `u_S = v_S - theta sign(v_S)` with `sum |u_S| = r`.
/// Keeps the closest feasible candidate.
pub fn project_l1_enumerate(v: &[f64], r: f64) -> Vec<f64> {
    let m = v.len();
    if v.iter().map(|x| x.abs()).sum::<f64>() <= r {
        return v.to_vec();
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let sup: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let total: f64 = sup.iter().map(|&i| v[i].abs()).sum();
        let theta = (total - r) / sup.len() as f64;
        if theta < 0.0 || sup.iter().any(|&i| v[i].abs() < theta) {
            continue;
        }
        let mut u = vec![0.0; m];
        for &i in &sup {
            u[i] = v[i].signum() * (v[i].abs() - theta);
        }
        let dist = sq_dist(&u, v);
        if best.as_ref().map_or(true, |(b, _)| dist < *b) {
            best = Some((dist, u));
        }
    }
    best.expect("some support is feasible").1
}

/// Minimum of `||x - v||^2` over `{||x||_1 <= r, ||x||_0 <= s}` by enumerating
/// all supports of size `<= s`.
pub fn sparse_prox_bruteforce(v: &[f64], r: f64, s: usize) -> (f64, Vec<f64>) {
    let m = v.len();
    let mut best = (sq_dist(&vec![0.0; m], v), vec![0.0; m]);
    for mask in 1u32..(1 << m) {
        if mask.count_ones() as usize > s {
            continue;
        }
        let sup: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let sub: Vec<f64> = sup.iter().map(|&i| v[i]).collect();
        let proj = project_l1_enumerate(&sub, r);
        let mut x = vec![0.0; m];
        for (k, &i) in sup.iter().enumerate() {
            x[i] = proj[k];
        }
        let obj = sq_dist(&x, v);
        if obj < best.0 {
            best = (obj, x);
        }
    }
    best
}

/// Maximizes a unimodal `f` on `[lo, hi]`: a 2001-point grid, then golden
/// section on the bracket around the best grid point.
pub fn maximize_scalar(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let grid = 2000;
    let h = (hi - lo) / grid as f64;
    let mut best = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    for k in 0..=grid {
        let val = f(lo + h * k as f64);
        if val > best_val {
            best_val = val;
            best = k;
        }
    }
    let mut a = lo + h * best.saturating_sub(1) as f64;
    let mut b = (lo + h * (best + 1) as f64).min(hi);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let mut mid = 0.5 * (a + b);
    // Newton polish with difference quotients.
    let h = 1e-4 * (1.0 + mid.abs());
    for _ in 0..3 {
        if mid - h < lo || mid + h > hi {
            break;
        }
        let (fm, f0, fp) = (f(mid - h), f(mid), f(mid + h));
        let g = (fp - fm) / (2.0 * h);
        let curv = (fp - 2.0 * f0 + fm) / (h * h);
        if !(curv < 0.0) {
            break;
        }
        let next = mid - g / curv;
        if (next - mid).abs() > h {
            break;
        }
        mid = next;
    }
    // The maximizer may sit on the boundary of the bracket.
    [lo, hi, mid]
        .into_iter()
        .fold((mid, f(mid)), |acc, u| if f(u) > acc.1 { (u, f(u)) } else { acc })
        .0
}

/// Scalar oracle for the dual proximal step of sample `i`.
pub fn dual_prox_oracle(loss: &LossModel, w: f64, y: f64, delta: f64, n: usize, i: usize) -> f64 {
    let nf = n as f64;
    let obj = |u: f64| w * u / nf - loss.conjugate(u, i) / nf - (u - y) * (u - y) / (2.0 * delta);
    let (lo, hi) = loss.conjugate_bounds(i);
    let (lo, hi) = if lo.is_finite() {
        (lo, hi)
    } else {
        let t = loss.targets()[i];
        let ends = [y, w - t];
        (ends[0].min(ends[1]) - 1.0, ends[0].max(ends[1]) + 1.0)
    };
    maximize_scalar(obj, lo, hi)
}

/// Row-major dense copy.
pub fn dense(a: &SparseDesignMatrix) -> Vec<Vec<f64>> {
    let flat = a.to_dense();
    flat.chunks(a.n_cols().max(1)).map(|r| r.to_vec()).collect()
}

pub fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum()).collect()
}

pub fn dense_tr_mul(a: &[Vec<f64>], y: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (row, yi) in a.iter().zip(y) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v * yi;
        }
    }
    out
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = sq_dist(a, b).sqrt();
    let scale = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    diff / scale
}

pub fn random_sparse(rng: &mut PortableRng, n: usize, d: usize, density: f64) -> SparseDesignMatrix {
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|_| {
            (0..d)
                .filter_map(|j| (rng.uniform() < density).then(|| (j, rng.normal())))
                .collect()
        })
        .collect();
    SparseDesignMatrix::from_rows(d, &rows).unwrap()
}

pub fn random_dense(rng: &mut PortableRng, n: usize, d: usize) -> SparseDesignMatrix {
    let data: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
    SparseDesignMatrix::from_dense(n, d, &data).unwrap()
}

/// Dense primal-dual proximal method with full budgets (s = d, k = n):
/// `x <- (1-eta) x + eta P(x - (A^T y / n + mu x)/(L eta))`, then every dual
/// coordinate takes its closed-form proximal step against `w = A x`.
pub struct DensePrimalDual {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl DensePrimalDual {
    pub fn run(
        a: &[Vec<f64>],
        d: usize,
        loss: &LossModel,
        mu: f64,
        lambda: f64,
        eta: f64,
        delta: f64,
        iters: usize,
    ) -> Self {
        let n = a.len();
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; n];
        let tau = delta / n as f64;
        for _ in 0..iters {
            let z = dense_tr_mul(a, &y, d);
            let v: Vec<f64> = (0..d)
                .map(|j| x[j] - (z[j] / n as f64 + mu * x[j]) / (mu * eta))
                .collect();
            let target = project_l1_enumerate_or_sort(&v, lambda);
            for j in 0..d {
                x[j] = (1.0 - eta) * x[j] + eta * target[j];
            }
            let w = dense_mul(a, &x);
            for i in 0..n {
                let t = loss.targets()[i];
                let u = (y[i] + tau * (w[i] - t)) / (1.0 + tau);
                let (lo, hi) = loss.conjugate_bounds(i);
                y[i] = u.max(lo).min(hi);
            }
        }
        Self { x, y }
    }
}

/// Support enumeration for short vectors, bisection on the threshold otherwise.
pub fn project_l1_enumerate_or_sort(v: &[f64], r: f64) -> Vec<f64> {
    if v.len() <= 12 {
        return project_l1_enumerate(v, r);
    }
    if v.iter().map(|x| x.abs()).sum::<f64>() <= r {
        return v.to_vec();
    }
    let (mut lo, mut hi) = (0.0, v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = v.iter().map(|x| (x.abs() - mid).max(0.0)).sum();
        if s > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    v.iter().map(|x| x.signum() * (x.abs() - hi).max(0.0)).collect()
}

/// Exact rank-s trace-norm prox: right singular vectors from the symmetric
/// eigendecomposition of `M^T M`, left vectors as `M v / sigma`, top-s
/// singular values l1-projected.
pub fn lowrank_prox_oracle(m: &nalgebra::DMatrix<f64>, lambda: f64, s: usize) -> nalgebra::DMatrix<f64> {
    if m.nrows() < m.ncols() {
        return lowrank_prox_oracle(&m.transpose(), lambda, s).transpose();
    }
    let eig = (m.transpose() * m).symmetric_eigen();
    let mut order: Vec<usize> = (0..m.ncols()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let top_ev = eig.eigenvalues[order[0]].max(0.0);
    order.retain(|&k| eig.eigenvalues[k] > 1e-24 * top_ev && eig.eigenvalues[k] > 0.0);
    order.truncate(s);
    let sv: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].sqrt()).collect();
    let proj = project_l1_enumerate_or_sort(&sv, lambda);
    let mut out = nalgebra::DMatrix::zeros(m.nrows(), m.ncols());
    for (t, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let u = m * v / sv[t];
        out += u * v.transpose() * proj[t];
    }
    out
}

/// Dense trace-norm problem `(1/2n) ||A X - B||^2 + mu/2 ||X||^2` solved by
/// FISTA with restarts and exact nuclear-ball projection. Returns the
/// best objective.
pub fn trace_reference_objective(
    a: &nalgebra::DMatrix<f64>,
    b: &nalgebra::DMatrix<f64>,
    mu: f64,
    lambda: f64,
    iters: usize,
) -> f64 {
    let n = a.nrows() as f64;
    let obj = |x: &nalgebra::DMatrix<f64>| {
        0.5 * (a * x - b).norm_squared() / n + 0.5 * mu * x.norm_squared()
    };
    let lip = a.clone().svd(false, false).singular_values.max().powi(2) / n + mu;
    let proj = |m: &nalgebra::DMatrix<f64>| lowrank_prox_oracle(m, lambda, m.nrows().min(m.ncols()));
    let mut x = nalgebra::DMatrix::zeros(a.ncols(), b.ncols());
    let mut v = x.clone();
    let mut t = 1.0f64;
    let mut fx = obj(&x);
    for _ in 0..iters {
        let g = a.transpose() * (a * &v - b) / n + &v * mu;
        let cand = proj(&(&v - g / lip));
        let fc = obj(&cand);
        if fc > fx {
            v = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        v = &cand + (&cand - &x) * ((t - 1.0) / t_next);
        x = cand;
        fx = fc;
        t = t_next;
    }
    fx
}
