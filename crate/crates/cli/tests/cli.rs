//! End-to-end tests against the built binary: exit codes, output schemas,
//! spec'd fixtures (county interaction, two-period panel), determinism
//! across thread counts, and agreement with direct library calls.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use manycov::design::{DEFAULT_MAX_N, DEFAULT_PIVOT_RTOL};
use manycov::inference::{gaussian_ci, CiMethod};
use manycov::regression::fit_pipeline;
use manycov::variance::{estimate_variance, EstimatorKind};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_manycov"))
}

fn write_file(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(body.as_bytes()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Balanced panel written as CSV: unit label column + const column + x + y.
fn panel_csv(units: usize, periods: usize, seed: u64) -> String {
    use manycov::rng::CounterRng;
    let mut rng = CounterRng::new(seed);
    let mut s = String::from("y,x,unit,const\n");
    for u in 0..units {
        for _ in 0..periods {
            let x: f64 = rng.next_normal();
            let y = 0.7 * x + 0.3 * (u as f64 / units as f64) + rng.next_normal();
            s.push_str(&format!("{y},{x},u{u},1\n"));
        }
    }
    s
}

#[test]
fn county_cohort_fixture_counts_and_prunes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(
        dir.path(),
        "county.csv",
        "y,x,county,cohort\n1,0.1,A,1\n2,0.2,A,1\n3,0.3,A,2\n4,0.4,A,2\n5,0.5,B,3\n6,0.6,B,3\n",
    );
    let out = run(&[
        "diagnose",
        "--input",
        csv.to_str().unwrap(),
        "--factor",
        "county,cohort",
        "--interact",
        "county:cohort",
        "--format",
        "json",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["version"], 1);
    assert_eq!(v["command"], "diagnose");
    let diag = &v["diagnostics"];
    // 1 + 2 + 2 dummies before pruning; the interaction makes most redundant
    assert_eq!(diag["k_input"], 5);
    assert_eq!(diag["k_effective"], 2);
    assert_eq!(diag["n"], 6);
    let dropped = diag["dropped_columns"].as_array().unwrap();
    assert_eq!(dropped.len(), 3);
}

#[test]
fn two_level_factor_gives_one_dummy_column() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(dir.path(), "t.csv", "y,x,g\n1,0.1,a\n2,0.2,b\n3,0.3,a\n");
    let out = run(&[
        "diagnose", "--input", csv.to_str().unwrap(), "--factor", "g", "--format", "json",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["diagnostics"]["k_input"], 1);
    assert_eq!(v["diagnostics"]["k_effective"], 1);
}

#[test]
fn unit_identifying_factor_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(dir.path(), "t.csv", "y,x,id\n1,0.1,a\n2,0.2,b\n3,0.3,c\n");
    let out = run(&[
        "regress", "--input", csv.to_str().unwrap(), "--y", "y", "--x", "x", "--factor", "id",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unit-identifying"), "{err}");
}

#[test]
fn missing_input_flag_exits_2() {
    let out = run(&["regress", "--y", "y", "--x", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn two_period_panel_reports_hck_infeasible_in_row_with_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(dir.path(), "panel.csv", &panel_csv(12, 2, 41));
    let out = run(&[
        "regress",
        "--input",
        csv.to_str().unwrap(),
        "--y",
        "y",
        "--x",
        "x",
        "--w",
        "const",
        "--factor",
        "unit",
        "--estimators",
        "ho1,hck",
        "--format",
        "json",
    ]);
    let v = stdout_json(&out); // asserts exit 0
    let rows = v["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let ho1 = &rows[0];
    assert_eq!(ho1["estimator"], "HO1");
    assert!(ho1["se"].as_f64().unwrap() > 0.0);
    assert_eq!(ho1["feasible"], true);
    let hck = &rows[1];
    assert_eq!(hck["estimator"], "HCK");
    assert_eq!(hck["feasible"], false);
    assert!(hck["se"].is_null() && hck["lower"].is_null());
    let note = hck["note"].as_str().unwrap();
    assert!(note.contains("infeasible") && note.contains("0.5"), "{note}");
    let mcal = v["diagnostics"]["mcal"].as_f64().unwrap();
    assert!((mcal - 0.5).abs() < 1e-12, "{mcal}");
    assert_eq!(v["diagnostics"]["hck_feasible"], false);
    assert!(v["diagnostics"]["varah_bound"].is_null());
}

#[test]
fn k0_design_puts_hc0_and_hck_on_the_same_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("y,x\n");
    let mut rng = manycov::rng::CounterRng::new(17);
    for _ in 0..40 {
        let x: f64 = rng.next_normal();
        let y = 2.0 * x + rng.next_normal();
        body.push_str(&format!("{y},{x}\n"));
    }
    let csv = write_file(dir.path(), "k0.csv", &body);
    let out = run(&[
        "regress",
        "--input",
        csv.to_str().unwrap(),
        "--y",
        "y",
        "--x",
        "x",
        "--estimators",
        "hc0,hck",
        "--format",
        "json",
    ]);
    let v = stdout_json(&out);
    let rows = v["results"]["rows"].as_array().unwrap();
    let se0 = rows[0]["se"].as_f64().unwrap();
    let sek = rows[1]["se"].as_f64().unwrap();
    assert_eq!(se0.to_bits(), sek.to_bits(), "HC0 se {se0} vs HCK se {sek}");
    assert_eq!(v["diagnostics"]["k_effective"], 0);
}

#[test]
fn regress_matches_direct_library_composition() {
    let dir = tempfile::tempdir().unwrap();
    // y, x, two numeric w columns, moderate n
    let mut rng = manycov::rng::CounterRng::new(5);
    let n = 60;
    let mut body = String::from("resp,treat,w1,w2\n");
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    let mut w1 = Vec::new();
    let mut w2 = Vec::new();
    for _ in 0..n {
        let a: f64 = rng.next_normal();
        let b: f64 = rng.next_normal();
        let x: f64 = 0.4 * a + rng.next_normal();
        let y = 1.5 * x + 0.7 * a - 0.2 * b + rng.next_normal();
        body.push_str(&format!("{y},{x},{a},{b}\n"));
        ys.push(y);
        xs.push(x);
        w1.push(a);
        w2.push(b);
    }
    let csv = write_file(dir.path(), "lib.csv", &body);
    let out = run(&[
        "regress",
        "--input",
        csv.to_str().unwrap(),
        "--y",
        "resp",
        "--x",
        "treat",
        "--w",
        "w1,w2",
        "--estimators",
        "hc2",
        "--level",
        "0.9",
        "--format",
        "json",
    ]);
    let v = stdout_json(&out);
    let row = &v["results"]["rows"][0];

    // same numbers straight from the library (CSV text round-trips f64)
    let data = manycov::design::RegressionData::new(
        ndarray::Array1::from_vec(ys),
        ndarray::Array2::from_shape_vec((n, 1), xs).unwrap(),
        {
            let mut w = ndarray::Array2::zeros((n, 2));
            for i in 0..n {
                w[(i, 0)] = w1[i];
                w[(i, 1)] = w2[i];
            }
            w
        },
    )
    .unwrap();
    let (fit, _) = fit_pipeline(&data, DEFAULT_MAX_N, DEFAULT_PIVOT_RTOL).unwrap();
    let sw = estimate_variance(&fit, EstimatorKind::Hc2).unwrap();
    let ci = gaussian_ci(&fit, &sw, 0.9, 0).unwrap();
    assert_eq!(ci.method, CiMethod::Gaussian);

    let beta_cli = row["beta_hat"].as_f64().unwrap();
    assert_eq!(beta_cli.to_bits(), fit.beta_hat[0].to_bits());
    let se_cli = row["se"].as_f64().unwrap();
    let se_lib = (sw.omega[(0, 0)] / n as f64).sqrt();
    assert_eq!(se_cli.to_bits(), se_lib.to_bits());
    assert_eq!(row["lower"].as_f64().unwrap().to_bits(), ci.lower.to_bits());
    assert_eq!(row["upper"].as_f64().unwrap().to_bits(), ci.upper.to_bits());
}

#[test]
fn estimator_flag_restricts_and_orders_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(dir.path(), "t.csv", &panel_csv(10, 3, 9));
    let out = run(&[
        "regress",
        "--input",
        csv.to_str().unwrap(),
        "--y",
        "y",
        "--x",
        "x",
        "--w",
        "const",
        "--factor",
        "unit",
        "--estimators",
        "hck,hc3,hc0",
        "--format",
        "json",
    ]);
    let v = stdout_json(&out);
    let names: Vec<&str> = v["results"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["estimator"].as_str().unwrap())
        .collect();
    assert_eq!(names, vec!["HCK", "HC3", "HC0"]);
}

#[test]
fn bootstrap_flag_switches_interval_method() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("y,x\n");
    let mut rng = manycov::rng::CounterRng::new(23);
    for _ in 0..50 {
        let x: f64 = rng.next_normal();
        body.push_str(&format!("{},{x}\n", 0.5 * x + rng.next_normal()));
    }
    let csv = write_file(dir.path(), "bs.csv", &body);
    let out = run(&[
        "regress",
        "--input",
        csv.to_str().unwrap(),
        "--y",
        "y",
        "--x",
        "x",
        "--estimators",
        "hc2",
        "--bootstrap-b",
        "99",
        "--seed",
        "3",
        "--format",
        "json",
    ]);
    let v = stdout_json(&out);
    let row = &v["results"]["rows"][0];
    assert_eq!(row["method"], "bootstrap");
    assert!(row["lower"].as_f64().unwrap() < row["upper"].as_f64().unwrap());
}

#[test]
fn simulate_is_byte_identical_across_thread_counts() {
    let args = |threads: &'static str| {
        vec![
            "simulate",
            "--model",
            "model1",
            "--n",
            "60",
            "--k",
            "2",
            "--s",
            "8",
            "--seed",
            "5",
            "--estimators",
            "ho1,hck",
            "--format",
            "json",
            "--threads",
            threads,
        ]
    };
    let a = run(&args("1"));
    let b = run(&args("3"));
    let mut va = stdout_json(&a);
    let mut vb = stdout_json(&b);
    // wall-clock is the one legitimately nondeterministic field
    va["results"]["elapsed_secs"] = 0.into();
    vb["results"]["elapsed_secs"] = 0.into();
    va["diagnostics"]["elapsed_secs"] = 0.into();
    vb["diagnostics"]["elapsed_secs"] = 0.into();
    assert_eq!(va, vb);
    let cells = va["results"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
}

#[test]
fn simulate_text_has_coverage_and_length_panels() {
    let out = run(&[
        "simulate", "--model", "panel", "--units", "20", "--periods", "3", "--s", "6", "--seed",
        "2", "--estimators", "ho1,hck",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("coverage"), "{text}");
    assert!(text.contains("average length"), "{text}");
    assert!(text.contains("HCK"), "{text}");
}

#[test]
fn simulate_rejects_bad_spec_with_exit_2() {
    // K ≥ n is an invalid model1 spec
    let out = run(&[
        "simulate", "--model", "model1", "--n", "10", "--k", "10", "--s", "4", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--model", "nope", "--n", "10", "--s", "4"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--n", "10", "--s", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_fills_in_but_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(dir.path(), "d.csv", &panel_csv(8, 3, 77));
    let conf = write_file(
        dir.path(),
        "run.conf",
        &format!(
            "input={}\ny=y\nx=x\nw=const\nfactor=unit\nestimators=ho0\nlevel=0.9\nformat=json\n",
            csv.display()
        ),
    );
    // flag overrides the file's estimator list; level comes from the file
    let out = run(&[
        "regress",
        "--config",
        conf.to_str().unwrap(),
        "--estimators",
        "hc1",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["config_echo"]["level"], 0.9);
    assert_eq!(v["config_echo"]["estimators"][0], "HC1");
    let rows = v["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["estimator"], "HC1");
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_file(dir.path(), "bad.conf", "inptu=x.csv\n");
    let out = run(&["regress", "--config", conf.to_str().unwrap(), "--y", "y", "--x", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("inptu"));
}

#[test]
fn out_flag_writes_file_instead_of_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(dir.path(), "t.csv", "y,x\n1,0.5\n2,1.5\n3,2.0\n4,2.5\n");
    let dest = dir.path().join("report.json");
    let out = run(&[
        "regress",
        "--input",
        csv.to_str().unwrap(),
        "--y",
        "y",
        "--x",
        "x",
        "--estimators",
        "ho0",
        "--format",
        "json",
        "--out",
        dest.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&dest).unwrap()).unwrap();
    assert_eq!(v["command"], "regress");
}

#[test]
fn json_report_round_trips_numeric_fields() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(dir.path(), "t.csv", &panel_csv(10, 3, 55));
    let out = run(&[
        "regress",
        "--input",
        csv.to_str().unwrap(),
        "--y",
        "y",
        "--x",
        "x",
        "--w",
        "const",
        "--factor",
        "unit",
        "--estimators",
        "hc2,hck",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    // re-serialize the parsed value and parse again: all numbers identical
    let again: serde_json::Value =
        serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(v, again);
    // and the typed row structure accepts it
    let rows: Vec<manycov_cli::commands::EstimateRow> =
        serde_json::from_value(v["results"]["rows"].clone()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].se.unwrap() > 0.0);
}

#[test]
fn csv_output_parses_and_has_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(dir.path(), "t.csv", &panel_csv(10, 3, 66));
    let json_out = run(&[
        "regress", "--input", csv.to_str().unwrap(), "--y", "y", "--x", "x", "--w", "const",
        "--factor", "unit", "--estimators", "hc3", "--format", "json",
    ]);
    let csv_out = run(&[
        "regress", "--input", csv.to_str().unwrap(), "--y", "y", "--x", "x", "--w", "const",
        "--factor", "unit", "--estimators", "hc3", "--format", "csv",
    ]);
    let v = stdout_json(&json_out);
    assert!(csv_out.status.success());
    let body = String::from_utf8(csv_out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let rec = rdr.records().next().unwrap().unwrap();
    let headers = rdr.headers().unwrap().clone();
    let se_idx = headers.iter().position(|h| h == "se").unwrap();
    let se_csv: f64 = rec.get(se_idx).unwrap().parse().unwrap();
    let se_json = v["results"]["rows"][0]["se"].as_f64().unwrap();
    assert_eq!(se_csv.to_bits(), se_json.to_bits());
}

#[test]
fn diagnose_text_mentions_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(dir.path(), "t.csv", &panel_csv(12, 2, 8));
    let out = run(&[
        "diagnose", "--input", csv.to_str().unwrap(), "--w", "const", "--factor", "unit",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("infeasible"), "{text}");
    assert!(text.contains("leverage"), "{text}");
}
