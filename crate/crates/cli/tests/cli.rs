//! End-to-end runs of the installed binary: golden CSV output, JSON
//! report shapes, exit-code contract, and determinism across repeats.

use std::io::Write as _;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfeedback"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("utf-8 stderr")
}

fn json(output: &Output) -> Value {
    serde_json::from_str(&stdout(output)).expect("stdout parses as JSON")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code present")
}

#[test]
fn regions_small_grid_golden() {
    let output = run(&["regions", "--n", "2", "--p-steps", "5"]);
    assert_eq!(code(&output), 0);
    let expected = "\
n,p,mu_AB,mu_BC
2,0,0.5,
2,0.25,0.4,
2,0.5,0.25,
2,0.75,0,0
2,1,,0.25
";
    assert_eq!(stdout(&output), expected);
}

#[test]
fn regions_defaults_and_json() {
    let output = run(&["regions", "--p-steps", "3", "--format", "json"]);
    assert_eq!(code(&output), 0);
    let rows = json(&output);
    let rows = rows.as_array().expect("array of rows");
    // Default n list 2,3,4,5 by 3 grid points each.
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[0]["n"], 2);
    assert_eq!(rows[0]["p"], 0.0);
    assert_eq!(rows[0]["mu_ab"], 0.5);
    assert_eq!(rows[0]["mu_bc"], Value::Null);
    assert_eq!(rows[11]["n"], 5);
    assert_eq!(rows[11]["p"], 1.0);
    // Rows ordered by n first, then p.
    let ns: Vec<i64> = rows.iter().map(|row| row["n"].as_i64().unwrap()).collect();
    assert_eq!(ns, [2, 2, 2, 3, 3, 3, 4, 4, 4, 5, 5, 5]);
}

#[test]
fn regions_caps_formatting_at_twelve_digits() {
    let output = run(&["regions", "--n", "2", "--p-steps", "9"]);
    assert_eq!(code(&output), 0);
    let text = stdout(&output);
    assert!(text.contains("2,0.125,0.454545454545,\n"));
    for field in text.lines().skip(1).flat_map(|line| line.split(',')) {
        let digits = field
            .chars()
            .filter(|c| c.is_ascii_digit())
            .skip_while(|&c| c == '0')
            .count();
        assert!(digits <= 12, "field {field:?} exceeds 12 significant digits");
    }
}

#[test]
fn sweep_golden_rows_and_oracle_column() {
    let output = run(&[
        "sweep-n",
        "--p",
        "0.4",
        "--mu",
        "0.9",
        "--n-max",
        "4",
        "--oracle-cap",
        "3",
    ]);
    assert_eq!(code(&output), 0);
    let text = stdout(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,mu,F_theoretical,F_optimized,F_oracle,region");
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1], "2,0.9,0.941333333333,0.941333333333,0.941333333333,B");
    assert_eq!(lines[2], "3,0.9,0.922311111111,0.922311111111,0.922311111111,B");
    // Above the oracle cap the dense column stays empty.
    let fields: Vec<&str> = lines[3].split(',').collect();
    assert_eq!(fields[0], "4");
    assert_eq!(fields[2], fields[3]);
    assert_eq!(fields[4], "");
    assert_eq!(fields[5], "B");
}

#[test]
fn sweep_curve_order_and_json() {
    let output = run(&[
        "sweep-n", "--p", "0.4", "--mu", "0.9,0.5", "--n-max", "3", "--format", "json",
        "--oracle-cap", "2",
    ]);
    assert_eq!(code(&output), 0);
    let rows = json(&output);
    let rows = rows.as_array().unwrap();
    // One curve per mu in the order given, n ascending inside.
    let keys: Vec<(f64, i64)> = rows
        .iter()
        .map(|row| (row["mu"].as_f64().unwrap(), row["n"].as_i64().unwrap()))
        .collect();
    assert_eq!(keys, [(0.9, 2), (0.9, 3), (0.5, 2), (0.5, 3)]);
    let first = rows[0]["f_optimized"].as_f64().unwrap();
    assert!((first - 0.9413333333333334).abs() < 1e-12);
    let third = rows[2]["f_optimized"].as_f64().unwrap();
    assert!((third - 0.7066666666666667).abs() < 1e-12);
    for row in rows {
        assert_eq!(row["region"], "B");
        let theoretical = row["f_theoretical"].as_f64().unwrap();
        let optimized = row["f_optimized"].as_f64().unwrap();
        assert!((theoretical - optimized).abs() < 1e-12);
        match row["f_oracle"].as_f64() {
            Some(oracle) => {
                assert_eq!(row["n"], 2);
                assert!((oracle - optimized).abs() < 1e-9);
            }
            None => assert_eq!(row["n"], 3),
        }
    }
}

#[test]
fn sweep_output_is_deterministic() {
    let args = ["sweep-n", "--n-max", "6", "--oracle-cap", "3"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());
}

#[test]
fn fidelity_optimal_report() {
    let output = run(&["fidelity", "--p", "0.4", "--mu", "0.2", "--n", "2"]);
    assert_eq!(code(&output), 0);
    let report = json(&output);
    assert!((report["total"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert_eq!(report["region"], "A");
    let mu_ab = report["thresholds"]["mu_ab"].as_f64().unwrap();
    assert!((mu_ab - 0.3181818181818182).abs() < 1e-15);
    assert_eq!(report["thresholds"]["mu_bc"], Value::Null);
    // Region-A recovery completes each record with identities.
    assert_eq!(report["strategy_used"]["outcomes"]["X"]["XI"], 1.0);
    assert_eq!(report["off_outcome_corrections"], false);
    assert_eq!(report["per_outcome"].as_object().unwrap().len(), 4);
}

#[test]
fn fidelity_named_strategy_is_evaluated_anywhere() {
    let output = run(&[
        "fidelity", "--p", "0.4", "--mu", "0.2", "--n", "2", "--strategy", "B",
    ]);
    assert_eq!(code(&output), 0);
    let report = json(&output);
    // Letter-repetition recovery is suboptimal here, below the 0.6 optimum.
    assert!((report["total"].as_f64().unwrap() - 0.5306666666666666).abs() < 1e-12);
    assert_eq!(report["region"], Value::Null);
    assert_eq!(report["strategy_used"]["outcomes"]["Z"]["ZZ"], 1.0);
}

#[test]
fn fidelity_high_noise_point() {
    let output = run(&["fidelity", "--p", "0.9", "--mu", "0.05", "--n", "2"]);
    assert_eq!(code(&output), 0);
    let report = json(&output);
    assert!((report["total"].as_f64().unwrap() - 0.33).abs() < 1e-12);
    assert_eq!(report["region"], "C");
}

#[test]
fn fidelity_closed_form_reaches_large_n() {
    let output = run(&["fidelity", "--p", "0.4", "--mu", "0.5", "--n", "9"]);
    assert_eq!(code(&output), 0);
    let report = json(&output);
    let total = report["total"].as_f64().unwrap();
    assert!(total > 0.5 && total < 0.6);
    assert_eq!(report["region"], "B");
    // Explicit strategies need the enumerated product support, which is
    // capped; that path reports a resource error instead.
    let capped = run(&[
        "fidelity", "--p", "0.4", "--mu", "0.5", "--n", "9", "--strategy", "B",
    ]);
    assert_eq!(code(&capped), 3);
    assert!(stderr(&capped).contains("cap"));
}

#[test]
fn fidelity_from_noise_table_and_strategy_file() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.json");
    std::fs::write(
        &table,
        r#"{"n": 2, "weights": {"II": 0.5, "XX": 0.3, "XY": 0.2}}"#,
    )
    .unwrap();
    let table_arg = table.to_str().unwrap();

    let optimal = run(&["fidelity", "--noise-file", table_arg]);
    assert_eq!(code(&optimal), 0);
    let report = json(&optimal);
    assert!((report["total"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(report["strategy_used"]["outcomes"]["X"]["XX"], 1.0);

    let strategy = dir.path().join("strategy.json");
    let mut file = std::fs::File::create(&strategy).unwrap();
    write!(file, r#"{{"outcomes": {{"I": {{"II": 1.0}}, "X": {{"XY": 1.0}}}}}}"#).unwrap();
    let selector = format!("file:{}", strategy.display());
    let custom = run(&["fidelity", "--noise-file", table_arg, "--strategy", &selector]);
    assert_eq!(code(&custom), 0);
    let report = json(&custom);
    assert!((report["total"].as_f64().unwrap() - 0.7).abs() < 1e-12);
}

#[test]
fn fidelity_input_errors_exit_one() {
    let missing_file = run(&["fidelity", "--noise-file", "/nonexistent/table.json"]);
    assert_eq!(code(&missing_file), 1);
    assert!(stderr(&missing_file).contains("error"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n": 2, "weights": {"II": 0.5}}"#).unwrap();
    let unnormalized = run(&["fidelity", "--noise-file", bad.to_str().unwrap()]);
    assert_eq!(code(&unnormalized), 1);

    let missing_params = run(&["fidelity", "--strategy", "B"]);
    assert_eq!(code(&missing_params), 1);
    assert!(stderr(&missing_params).contains("--p"));

    let out_of_range = run(&["fidelity", "--p", "1.5", "--mu", "0.2", "--n", "2"]);
    assert_eq!(code(&out_of_range), 1);

    let bad_selector = run(&[
        "fidelity", "--p", "0.4", "--mu", "0.2", "--n", "2", "--strategy", "best",
    ]);
    assert_eq!(code(&bad_selector), 1);
}

#[test]
fn verify_clean_run_and_report_shape() {
    let output = run(&["verify", "--trials", "5", "--seed", "7"]);
    assert_eq!(code(&output), 0);
    let report = json(&output);
    assert!(report["max_abs_diff"].as_f64().unwrap() <= 1e-10);
    assert_eq!(report["failures"].as_array().unwrap().len(), 0);
    assert_eq!(report["checks"], 40);
}

#[test]
fn verify_zero_trials_is_empty_success() {
    let output = run(&["verify", "--trials", "0"]);
    assert_eq!(code(&output), 0);
    let report = json(&output);
    assert_eq!(report["checks"], 0);
    assert_eq!(report["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn verify_exceeding_the_cap_exits_three() {
    let output = run(&["verify", "--n", "7"]);
    assert_eq!(code(&output), 3);
    assert!(stderr(&output).contains("cap"));
}

#[test]
fn invalid_oracle_cap_exits_one() {
    let output = run(&["verify", "--oracle-cap", "9"]);
    assert_eq!(code(&output), 1);
}

#[test]
fn usage_and_help_exit_codes() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["regions", "--bogus"])), 1);
    assert_eq!(code(&run(&["regions", "--p-steps", "1"])), 1);
    assert_eq!(code(&run(&["regions", "--n", "1"])), 1);
    let help = stdout(&run(&["--help"]));
    for name in ["regions", "sweep-n", "fidelity", "verify"] {
        assert!(help.contains(name), "help lists {name}");
    }
}

#[test]
fn output_files_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("regions.csv");
    let svg = dir.path().join("regions.svg");
    let output = run(&[
        "regions",
        "--n",
        "2",
        "--p-steps",
        "5",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);
    assert!(stdout(&output).is_empty());
    let written = std::fs::read_to_string(&csv).unwrap();
    assert!(written.starts_with("n,p,mu_AB,mu_BC\n"));
    assert_eq!(written.lines().count(), 6);
    let image = std::fs::read_to_string(&svg).unwrap();
    assert!(image.starts_with("<svg"));
    assert!(image.trim_end().ends_with("</svg>"));
    assert!(image.contains("<polyline"));

    let json_path = dir.path().join("report.json");
    let verify = run(&[
        "verify",
        "--trials",
        "2",
        "--out",
        json_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&verify), 0);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(report["checks"], 16);
}
