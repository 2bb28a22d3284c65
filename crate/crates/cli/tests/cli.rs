use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data_file() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/nlsy_synthetic.csv")
}

fn medboot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medboot")).args(args).env_remove("MEDBOOT_SEED").output().unwrap()
}

/// Splits a command line on spaces.
fn words(s: &str) -> Vec<&str> {
    s.split(' ').collect()
}

fn analyze_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let data = Box::leak(data_file().to_string_lossy().into_owned().into_boxed_str());
    let mut args = words("analyze --data");
    args.push(data);
    args.extend(words("--x me --m he --y math --aux bpi,read --missing-code 99999 --burn-in 50 --thin 20"));
    args.extend_from_slice(extra);
    args
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

#[test]
fn bundled_data_has_the_documented_patterns() {
    let out = medboot(&analyze_args(&["--nimpute", "2", "--nboot", "4", "--format", "json"]));
    let meta = &json(&out)["meta"];
    assert_eq!(meta["n"], 475);
    let counts: Vec<(String, u64)> = meta["patterns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p["pattern"].as_str().unwrap().to_string(), p["count"].as_u64().unwrap()))
        .collect();
    let want = [("OOOOO", 417), ("OOXOO", 14), ("OXOOO", 36), ("OXXOO", 8)];
    assert_eq!(counts.len(), 4);
    for (code, n) in want {
        assert!(counts.contains(&(code.to_string(), n)), "{counts:?}");
    }
}

#[test]
fn analyze_table_has_one_row_per_parameter() {
    let text = stdout(&medboot(&analyze_args(&["--nimpute", "3", "--nboot", "20", "--seed", "7"])));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2 + 1 + 8);
    assert_eq!(lines[2].split_whitespace().collect::<Vec<_>>(), ["param", "estimate", "se", "ci_lo", "ci_hi"]);
    let names: Vec<&str> = lines[3..].iter().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(names, ["a", "b", "c'", "ab", "iY", "iM", "var_eY", "var_eM"]);
    for l in &lines[3..] {
        for cell in l.split_whitespace().skip(1) {
            let decimals = cell.split('.').nth(1).unwrap();
            assert_eq!(decimals.len(), 5, "{cell}");
        }
    }
}

#[test]
fn formats_agree_on_values() {
    let base = ["--nimpute", "3", "--nboot", "20", "--seed", "5"];
    let with = |fmt: &'static str| {
        let mut a = base.to_vec();
        a.extend(["--format", fmt]);
        medboot(&analyze_args(&a))
    };
    let j = json(&with("json"));
    let csv = stdout(&with("csv"));
    let table = stdout(&with("table"));
    let table_rows: Vec<Vec<&str>> = table.lines().skip(3).map(|l| l.split_whitespace().collect()).collect();
    for (i, line) in csv.lines().skip(1).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let row = &j["params"][i];
        assert_eq!(cells[0], row["param"].as_str().unwrap());
        for (k, key) in ["estimate", "se", "ci_lo", "ci_hi"].iter().enumerate() {
            let v = row[key].as_f64().unwrap();
            assert_eq!(cells[k + 1].parse::<f64>().unwrap(), v);
            assert_eq!(table_rows[i][k + 1], format!("{v:.5}"));
        }
    }
}

#[test]
fn worker_count_does_not_change_the_report() {
    let run = |w: &'static str| {
        let mut args = words("--nimpute 4 --nboot 30 --seed 7 --format json --workers");
        args.push(w);
        stdout(&medboot(&analyze_args(&args)))
    };
    assert_eq!(run("1"), run("8"));
}

#[test]
fn seed_falls_back_to_environment() {
    let args = analyze_args(&["--nimpute", "2", "--nboot", "10", "--format", "json"]);
    let with_env = Command::new(env!("CARGO_BIN_EXE_medboot")).args(&args).env("MEDBOOT_SEED", "42").output().unwrap();
    let mut explicit = args.clone();
    explicit.extend(["--seed", "42"]);
    assert_eq!(stdout(&with_env), stdout(&medboot(&explicit)));
    assert_eq!(json(&with_env)["meta"]["seed"], 42);
}

#[test]
fn output_file_receives_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let p = path.to_str().unwrap();
    let out = medboot(&analyze_args(&["--nimpute", "2", "--nboot", "5", "--format", "json", "--output", p]));
    assert!(stdout(&out).is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["params"].as_array().unwrap().len(), 8);
}

#[test]
fn invalid_requests_exit_nonzero() {
    let cases: Vec<Vec<&str>> = vec![
        analyze_args(&["--nboot", "1"]),
        analyze_args(&["--level", "1.5"]),
        analyze_args(&["--nimpute", "0"]),
        analyze_args(&["--workers", "0"]),
        vec!["analyze", "--data", "/nonexistent.csv", "--x", "a", "--m", "b", "--y", "c"],
        vec!["simulate", "--prop", "1.0", "--reps", "1", "--nboot", "10", "--nimpute", "2"],
        vec!["sensitivity", "--k-ref", "0", "--k-grid", "1"],
        vec!["sensitivity", "--k-ref", "10", "--k-grid", "5,20"],
    ];
    for args in cases {
        let out = medboot(&args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(out.stdout.is_empty());
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
    }
    let out = medboot(&analyze_args(&["--nboot", "1"]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 2 bootstrap replicates"));
}

#[test]
fn single_replication_study_is_finite() {
    let out = medboot(&words(
        "simulate --mechanism mnar --prop 0.1 --reps 1 --nboot 20 --nimpute 3 --burn-in 20 --thin 5 --format json",
    ));
    let v = json(&out);
    let rows = v["params"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    for r in rows {
        for key in ["truth", "bias", "coverage", "rejection_rate"] {
            assert!(r[key].as_f64().unwrap().is_finite());
        }
    }
    assert_eq!(v["meta"]["mechanism"], "mnar");
    assert_eq!(v["meta"]["reps"], 1);
}

#[test]
fn simulate_is_reproducible_across_workers() {
    let run = |w: &'static str| {
        let mut args = words(
            "simulate --mechanism mar --prop 0.2 --use-aux --reps 3 --nboot 10 --nimpute 2 --burn-in 10 --thin 5 \
             --format json --workers",
        );
        args.push(w);
        stdout(&medboot(&args))
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn sensitivity_reference_row_is_zero() {
    let out = medboot(&words(
        "sensitivity --prop 0.1 --k-grid 2,4,6 --k-ref 6 --nboot 20 --burn-in 20 --thin 5 --format csv",
    ));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    let last: Vec<&str> = lines[3].split(',').collect();
    assert_eq!(last[0], "6");
    assert_eq!(&last[3..], ["0", "0"]);
}
