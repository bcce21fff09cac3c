mod common;

use common::*;
use pdbfw_core::data::{normalize_rows, parse_libsvm, read_libsvm, write_libsvm, ParseOptions};
use pdbfw_core::{
    generate_synthetic, Dataset, DMatrix, Error, PortableRng, SyntheticKind, SyntheticProblem,
    SyntheticSpec,
};
use proptest::prelude::*;

fn spec(kind: SyntheticKind, noise: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        kind,
        n: 30,
        d: 12,
        c: 7,
        sparsity_or_rank: 3,
        noise,
        seed,
    }
}

fn round_trip(ds: &Dataset) -> Dataset {
    let mut buf = Vec::new();
    write_libsvm(ds, &mut buf).unwrap();
    let opts = ParseOptions {
        n_cols: Some(ds.meta.d),
        map_binary_labels: false,
    };
    parse_libsvm(buf.as_slice(), &ds.meta.name, opts).unwrap()
}

proptest! {
    #[test]
    fn write_then_parse_is_identity(seed in any::<u64>(), n in 1usize..20, d in 1usize..15, density in 0.0f64..1.0) {
        let mut rng = PortableRng::new(seed);
        let a = random_sparse(&mut rng, n, d, density);
        let labels: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let ds = Dataset::new("rt", a, labels).unwrap();
        let back = round_trip(&ds);
        prop_assert_eq!(back.a.to_dense(), ds.a.to_dense());
        prop_assert_eq!(back.labels, ds.labels);
    }
}

#[test]
fn corrupted_files_report_the_offending_line() {
    let good = "+1 1:0.5 4:1\n-1 2:3\n+1 3:1e-3\n";
    let cases = [
        (good.replace("2:3", "2:three"), 2),
        (good.replace("3:1e-3", "3:1e-3 2:1"), 3),
        (good.replace("-1 2:3", "-1 0:3"), 2),
        (good.replace("+1 1:0.5", "pos 1:0.5"), 1),
        (good.replace("4:1", "4"), 1),
        (format!("# header\n\n{good}").replace("2:3", "2:inf"), 4),
    ];
    for (text, line) in cases {
        match parse_libsvm(text.as_bytes(), "bad", ParseOptions::default()) {
            Err(Error::Parse { line: l, msg }) => {
                assert_eq!(l, line, "{text:?}");
                assert!(!msg.is_empty());
            }
            other => panic!("{text:?} gave {other:?}"),
        }
    }
    assert!(parse_libsvm(good.as_bytes(), "good", ParseOptions::default()).is_ok());
}

#[test]
fn reads_from_disk() {
    let dir = std::env::temp_dir().join(format!("pdbfw-data-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("toy.svm");
    std::fs::write(&path, "1 1:1 2:2\n0 2:-1\n").unwrap();
    let ds = read_libsvm(&path, ParseOptions::default()).unwrap();
    assert_eq!(ds.meta.name, "toy");
    assert_eq!((ds.meta.n, ds.meta.d, ds.meta.nnz), (2, 2, 3));
    assert_eq!(ds.labels, vec![1.0, -1.0]);
    assert!(matches!(read_libsvm(dir.join("missing.svm"), ParseOptions::default()), Err(Error::Io(_))));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn synthetic_generation_is_deterministic() {
    for kind in [SyntheticKind::SparseRegression, SyntheticKind::TraceSensing] {
        let a = generate_synthetic(&spec(kind, 0.1, 5)).unwrap();
        let b = generate_synthetic(&spec(kind, 0.1, 5)).unwrap();
        let c = generate_synthetic(&spec(kind, 0.1, 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

#[test]
fn sparse_regression_has_requested_support_and_exact_targets() {
    let SyntheticProblem::SparseRegression(p) = generate_synthetic(&spec(SyntheticKind::SparseRegression, 0.0, 2)).unwrap() else {
        panic!("wrong kind");
    };
    assert_eq!(p.x0.iter().filter(|v| **v != 0.0).count(), 3);
    let expect = dense_mul(&dense(&p.dataset.a), &p.x0);
    assert!(rel_err(&p.dataset.labels, &expect) < 1e-14);
}

#[test]
fn trace_sensing_has_requested_rank() {
    let SyntheticProblem::TraceSensing(p) = generate_synthetic(&spec(SyntheticKind::TraceSensing, 0.0, 4)).unwrap() else {
        panic!("wrong kind");
    };
    assert_eq!(rank_via_eigen(&p.x0), 3);
    let a = DMatrix::from_row_slice(30, 12, &p.a.to_dense());
    assert!((a * &p.x0 - &p.targets).norm() <= 1e-12 * p.targets.norm());
}

/// Rank from the eigenvalues of `M^T M`.
fn rank_via_eigen(m: &DMatrix<f64>) -> usize {
    let ev = (m.transpose() * m).symmetric_eigen().eigenvalues;
    let top = ev.max();
    ev.iter().filter(|&&e| e > 1e-12 * top).count()
}

#[test]
fn normalization_is_idempotent() {
    let SyntheticProblem::SparseRegression(p) = generate_synthetic(&spec(SyntheticKind::SparseRegression, 0.5, 8)).unwrap() else {
        panic!("wrong kind");
    };
    let once = normalize_rows(&p.dataset);
    let twice = normalize_rows(&once);
    assert!((once.a.max_row_norm_sq() - 1.0).abs() < 1e-14);
    assert!(rel_err(&twice.a.to_dense(), &once.a.to_dense()) < 1e-15);
    assert_eq!(once.labels, p.dataset.labels);
}
