use std::path::PathBuf;

use medboot::{load_dataset, missing_patterns, Error, MissingCode, RoleSpec};

fn bundled() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/data/nlsy_synthetic.csv")
}

#[test]
fn bundled_example_loads_with_its_missing_code() {
    let roles = RoleSpec::new("me", "he", "math").with_aux(["bpi", "read"]);
    let ds = load_dataset(bundled(), &roles, MissingCode::Code(99999.0)).unwrap();
    assert_eq!(ds.n_rows(), 475);
    assert_eq!(ds.n_aux(), 2);
    let counts: Vec<(String, usize)> = missing_patterns(&ds).iter().map(|p| (p.code(), p.count)).collect();
    assert_eq!(
        counts,
        [("OOOOO", 417), ("OOXOO", 14), ("OXOOO", 36), ("OXXOO", 8)].map(|(c, n)| (c.to_string(), n)).to_vec()
    );
    assert!(ds.bound_columns().all(|c| c.values.iter().zip(&c.missing).all(|(v, &m)| m || *v != 99999.0)));
}

#[test]
fn without_the_code_the_sentinel_is_data() {
    let ds = load_dataset(bundled(), &RoleSpec::new("me", "he", "math"), MissingCode::Blank).unwrap();
    assert_eq!(ds.n_missing(), 0);
    assert_eq!(ds.m().values.iter().filter(|&&v| v == 99999.0).count(), 44);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_dataset("/nonexistent/file.csv", &RoleSpec::new("a", "b", "c"), MissingCode::Blank).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}
