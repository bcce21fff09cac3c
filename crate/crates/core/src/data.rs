//! LIBSVM text I/O, row normalization, and seeded synthetic problems.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::SparseDesignMatrix;
use crate::rng::PortableRng;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub nnz: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub a: SparseDesignMatrix,
    pub labels: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(name: impl Into<String>, a: SparseDesignMatrix, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != a.n_rows() {
            return Err(Error::DimensionMismatch {
                context: "dataset labels",
                expected: a.n_rows(),
                actual: labels.len(),
            });
        }
        let meta = DatasetMeta {
            name: name.into(),
            n: a.n_rows(),
            d: a.n_cols(),
            nnz: a.nnz(),
        };
        Ok(Self { a, labels, meta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Fixes the column count instead of using the largest index seen.
    pub n_cols: Option<usize>,
    /// Maps `{0, 1}` and `{1, 2}` label sets onto `{-1, +1}`.
    pub map_binary_labels: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            n_cols: None,
            map_binary_labels: true,
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_line(line_no: usize, text: &str) -> Result<(f64, Vec<(usize, f64)>)> {
    let mut tokens = text.split_whitespace();
    let label_tok = tokens.next().expect("caller skips blank lines");
    let label: f64 = label_tok
        .parse()
        .map_err(|_| parse_err(line_no, format!("label {label_tok:?} is not a number")))?;
    if !label.is_finite() {
        return Err(parse_err(line_no, "label is not finite"));
    }
    let mut row = Vec::new();
    let mut last = 0usize;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| parse_err(line_no, format!("expected index:value, got {tok:?}")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| parse_err(line_no, format!("index {idx:?} is not a positive integer")))?;
        if idx == 0 {
            return Err(parse_err(line_no, "indices are 1-based; found 0"));
        }
        if idx <= last {
            return Err(parse_err(
                line_no,
                format!("index {idx} does not increase (previous {last})"),
            ));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| parse_err(line_no, format!("value {val:?} is not a number")))?;
        if !val.is_finite() {
            return Err(parse_err(line_no, format!("value at index {idx} is not finite")));
        }
        last = idx;
        row.push((idx - 1, val));
    }
    Ok((label, row))
}

fn map_labels(labels: &mut [f64]) {
    let distinct: BTreeSet<i64> = labels
        .iter()
        .filter(|l| l.fract() == 0.0)
        .map(|&l| l as i64)
        .collect();
    let integral = labels.iter().all(|l| l.fract() == 0.0);
    if !integral {
        return;
    }
    let (neg, pos) = if distinct.contains(&0) && distinct.iter().all(|l| *l == 0 || *l == 1) {
        (0.0, 1.0)
    } else if distinct.contains(&2) && distinct.iter().all(|l| *l == 1 || *l == 2) {
        (1.0, 2.0)
    } else {
        return;
    };
    log::info!("mapping labels {{{neg}, {pos}}} to {{-1, +1}}");
    for l in labels.iter_mut() {
        *l = if *l == pos { 1.0 } else { -1.0 };
    }
}

/// Parses `label idx:val idx:val ...` lines with 1-based, strictly increasing
/// indices. Blank lines are skipped; `#` starts a comment.
pub fn parse_libsvm<R: BufRead>(reader: R, name: &str, opts: ParseOptions) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_col = 0usize;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            log::info!("{name}: skipping empty line {line_no}");
            continue;
        }
        let (label, row) = parse_line(line_no, text)?;
        if let Some(&(j, _)) = row.last() {
            if let Some(limit) = opts.n_cols {
                if j >= limit {
                    return Err(parse_err(
                        line_no,
                        format!("index {} exceeds the declared column count {limit}", j + 1),
                    ));
                }
            }
            max_col = max_col.max(j + 1);
        }
        labels.push(label);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(0, format!("{name}: no records")));
    }
    if opts.map_binary_labels {
        map_labels(&mut labels);
    }
    let a = SparseDesignMatrix::from_rows(opts.n_cols.unwrap_or(max_col), &rows)?;
    Dataset::new(name, a, labels)
}

pub fn read_libsvm(path: impl AsRef<Path>, opts: ParseOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    parse_libsvm(BufReader::new(File::open(path)?), &name, opts)
}

/// Writes LIBSVM text; values use the shortest round-trip representation.
pub fn write_libsvm<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    for (i, label) in ds.labels.iter().enumerate() {
        write!(out, "{label}")?;
        let (idx, val) = ds.a.row(i);
        for (j, v) in idx.iter().zip(val) {
            write!(out, " {}:{v}", j + 1)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Scales every nonzero row to unit Euclidean norm.
pub fn normalize_rows(ds: &Dataset) -> Dataset {
    let factors: Vec<f64> = ds
        .a
        .row_norms_sq()
        .iter()
        .map(|&r| if r > 0.0 { 1.0 / r.sqrt() } else { 1.0 })
        .collect();
    let a = ds.a.scale_rows(&factors).expect("one factor per row");
    Dataset {
        a,
        labels: ds.labels.clone(),
        meta: ds.meta.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    SparseRegression,
    TraceSensing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub d: usize,
    /// Output columns; only used by trace sensing.
    pub c: usize,
    pub sparsity_or_rank: usize,
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRegression {
    pub dataset: Dataset,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSensing {
    pub a: SparseDesignMatrix,
    pub targets: DMatrix<f64>,
    pub x0: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticProblem {
    SparseRegression(SparseRegression),
    TraceSensing(TraceSensing),
}

fn normal_matrix(rng: &mut PortableRng, rows: usize, cols: usize) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.normal()).collect()
}

/// Draws a synthetic problem from a single `PortableRng` stream seeded with
/// `spec.seed`, in this order:
///
/// 1. `A` (`n x d`), row-major standard normals.
/// 2. Sparse regression: the support (partial Fisher-Yates over `0..d`), then
///    one standard normal per support index in increasing index order, then
///    `n` noise normals, `b = A x0 + noise * e`.
/// 3. Trace sensing: `U` (`d x r`) then `V` (`c x r`), both row-major, with
///    `X0 = U V^T`, then `n x c` row-major noise normals, `B = A X0 + noise * E`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticProblem> {
    let (n, d, r) = (spec.n, spec.d, spec.sparsity_or_rank);
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("n and d must be positive".into()));
    }
    if !(spec.noise >= 0.0) || !spec.noise.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level must be non-negative, got {}", spec.noise)));
    }
    let mut rng = PortableRng::new(spec.seed);
    match spec.kind {
        SyntheticKind::SparseRegression => {
            if r == 0 || r > d {
                return Err(Error::InvalidArgument(format!("sparsity {r} must lie in [1, {d}]")));
            }
            let dense = normal_matrix(&mut rng, n, d);
            let a = SparseDesignMatrix::from_dense(n, d, &dense)?;
            let mut x0 = vec![0.0; d];
            for j in rng.sample_indices(d, r) {
                x0[j] = rng.normal();
            }
            let mut b = a.mul_vec(&x0)?;
            for bi in b.iter_mut() {
                *bi += spec.noise * rng.normal();
            }
            let name = format!("sparse_regression_n{n}_d{d}_s{r}_seed{}", spec.seed);
            Ok(SyntheticProblem::SparseRegression(SparseRegression {
                dataset: Dataset::new(name, a, b)?,
                x0,
            }))
        }
        SyntheticKind::TraceSensing => {
            let c = spec.c;
            if c == 0 {
                return Err(Error::InvalidArgument("c must be positive".into()));
            }
            if r == 0 || r > d.min(c) {
                return Err(Error::InvalidArgument(format!(
                    "rank {r} must lie in [1, {}]",
                    d.min(c)
                )));
            }
            let dense = normal_matrix(&mut rng, n, d);
            let a = SparseDesignMatrix::from_dense(n, d, &dense)?;
            let u = DMatrix::from_row_slice(d, r, &normal_matrix(&mut rng, d, r));
            let v = DMatrix::from_row_slice(c, r, &normal_matrix(&mut rng, c, r));
            let x0 = &u * v.transpose();
            let a_dense = DMatrix::from_row_slice(n, d, &dense);
            let noise = DMatrix::from_row_slice(n, c, &normal_matrix(&mut rng, n, c));
            let targets = &a_dense * &x0 + noise * spec.noise;
            Ok(SyntheticProblem::TraceSensing(TraceSensing { a, targets, x0 }))
        }
    }
}
