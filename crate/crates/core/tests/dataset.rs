use std::io::Write;

use proptest::prelude::*;
use tsk_core::dataset::{apply, fit_transform, split};
use tsk_core::{CsvOptions, Dataset, SplitSpec, TargetColumn, TskError};

proptest! {
    #[test]
    fn split_is_a_partition(n in 2usize..500, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let s = split(n, SplitSpec { train_fraction: frac, seed }).unwrap();
        let expected = ((frac * n as f64).round() as usize).clamp(1, n - 1);
        prop_assert_eq!(s.train.len(), expected);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(&s, &split(n, SplitSpec { train_fraction: frac, seed }).unwrap());
    }
}

#[test]
fn standardization_uses_training_statistics() {
    let csv = "x1,x2,y\n1,10,1\n2,20,2\n3,30,3\n4,40,10\n";
    let ds = Dataset::read_csv(csv.as_bytes(), CsvOptions::default()).unwrap();
    let train = ds.subset(&[0, 1, 2]);
    let (t, p) = fit_transform(&train, false).unwrap();
    assert_eq!(p.feature_means, vec![2.0, 20.0]);
    assert!((p.feature_stds[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(p.target_mean, 2.0);
    for col in t.features.columns() {
        assert!(col.sum().abs() < 1e-12);
        assert!((col.iter().map(|v| v * v).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
    }
    let test = apply(&p, &ds.subset(&[3])).unwrap();
    assert_eq!(test.targets, vec![8.0]);
    assert!((test.features[[0, 0]] - 2.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
}

#[test]
fn constant_columns_fail_or_are_dropped() {
    let csv = "a,k,y\n1,5,0\n2,5,1\n3,5,2\n";
    let ds = Dataset::read_csv(csv.as_bytes(), CsvOptions::default()).unwrap();
    match fit_transform(&ds, false) {
        Err(TskError::ZeroVariance { column, name }) => {
            assert_eq!(column, 1);
            assert_eq!(name, "k");
        }
        other => panic!("expected a zero-variance error, got {other:?}"),
    }
    let (t, p) = fit_transform(&ds, true).unwrap();
    assert_eq!(t.num_features(), 1);
    assert_eq!(p.kept_columns, vec![0]);
}

#[test]
fn headerless_file_with_target_index() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(f, "9,1,2\n8,3,4\n").unwrap();
    let opts = CsvOptions {
        has_header: false,
        target: TargetColumn::Index(0),
    };
    let ds = Dataset::load_csv(f.path(), opts).unwrap();
    assert_eq!(ds.targets, vec![9.0, 8.0]);
    assert_eq!(ds.features.row(1).to_vec(), vec![3.0, 4.0]);
}

#[test]
fn malformed_rows_are_reported_with_position() {
    let csv = "a,b,y\n1,2,3\n4,oops,6\n";
    match Dataset::read_csv(csv.as_bytes(), CsvOptions::default()) {
        Err(TskError::Load { row, column, .. }) => assert_eq!((row, column), (3, 2)),
        other => panic!("expected a load error, got {other:?}"),
    }
    assert!(Dataset::read_csv("a,b,y\n1,2\n".as_bytes(), CsvOptions::default()).is_err());
    assert!(Dataset::read_csv("a,b,y\n".as_bytes(), CsvOptions::default()).is_err());
}
