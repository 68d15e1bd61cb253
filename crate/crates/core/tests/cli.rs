use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nulgi::data_io::{load_report, save_dataset, Dataset};
use nulgi::lgi::DataPoint;
use nulgi::oscillation::{Flavor, FlavorChannel, OscillationParams, Oscillator, TimeParameter};

fn nulgi() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nulgi"));
    cmd.env_remove("NULGI_OUT_DIR");
    cmd
}

fn run(args: &[&str]) -> Output {
    nulgi().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn write_dataset(dir: &Path, name: &str, points: &[(f64, f64, f64, f64)]) -> PathBuf {
    let pts = points
        .iter()
        .map(|&(t, p, dt, dp)| DataPoint::new(t, p, dt, dp).unwrap())
        .collect();
    let d = Dataset::new(name, FlavorChannel::survival(Flavor::E, true), pts).unwrap();
    let path = dir.join(format!("{name}.csv"));
    save_dataset(&d, &path).unwrap();
    path
}

#[test]
fn predict_single_point_is_one_row() {
    let o = run(&["predict", "--t-min", "1", "--t-max", "1", "--points", "1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2);
    assert_eq!(csv_rows(&out)[0][0], 1.0);
}

#[test]
fn predict_matches_library_row_by_row() {
    let o = run(&["predict", "--channel", "mumu", "--t-min", "10", "--t-max", "5000", "--points", "40"]);
    assert!(o.status.success());
    let osc = Oscillator::new(
        &OscillationParams::best_fit(),
        FlavorChannel::survival(Flavor::Mu, false),
    )
    .unwrap();
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 40);
    for r in rows {
        assert_eq!(r[1], osc.probability(TimeParameter::new(r[0]).unwrap()));
    }
}

#[test]
fn predict_near_zero_baseline_survives() {
    let o = run(&["predict", "--t-min", "1e-9", "--t-max", "1e-6", "--points", "5"]);
    for r in csv_rows(&stdout(&o)) {
        assert!((r[1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn predict_writes_file_with_params() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("curve.csv");
    let o = nulgi()
        .args(["predict", "--points", "7", "--params"])
        .arg(data("best_fit.toml"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(out).unwrap().lines().count(), 8);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["predict", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["predict", "--points", "x"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    // Output directory missing and no environment default.
    let o = run(&["violation-test", "--data", data("kamland.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn parameter_errors_exit_one_with_json_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(
        &bad,
        "theta12_deg = 120\ntheta13_deg = 8\ntheta23_deg = 45\ndelta_cp_deg = 0\ndm2_21_ev2 = 7e-5\ndm2_31_ev2 = 2.5e-3\n",
    )
    .unwrap();
    let o = nulgi().args(["predict", "--params"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "domain");

    let o = run(&["triads", "--data", "/nonexistent/file.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "io");
}

#[test]
fn zero_uncertainty_gives_undefined_confidence() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_dataset(tmp.path(), "exact", &[(1.0, 0.9, 0.0, 0.0), (1.0, 0.9, 0.0, 0.0), (2.0, 0.5, 0.0, 0.0)]);
    let out = tmp.path().join("out");
    let o = nulgi()
        .args(["violation-test", "--replications", "50", "--data"])
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("confidence: undefined"));
    let report = load_report(out.join("summary.json")).unwrap();
    assert_eq!(report.confidence, None);
    assert_eq!(report.sigma, 0.0);
    // (0,0,2), (0,1,2), (1,1,2) all violate.
    assert_eq!(report.mu, 3.0);
    let dist = std::fs::read_to_string(out.join("distribution.csv")).unwrap();
    assert_eq!(dist, "count,frequency\n3,50\n");
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nulgi()
        .args(["violation-test", "--replications", "100", "--data"])
        .arg(data("kamland.csv"))
        .env("NULGI_OUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("summary.json").exists());
}

#[test]
fn theoretical_flag_changes_the_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let mut summaries = Vec::new();
    for extra in [None, Some("--theoretical")] {
        let dir = tmp.path().join(extra.unwrap_or("plain"));
        let mut cmd = nulgi();
        cmd.args(["--json", "violation-test", "--replications", "300", "--data"])
            .arg(data("kamland-dephased.csv"))
            .arg("--out")
            .arg(&dir);
        if let Some(e) = extra {
            cmd.arg(e);
        }
        let o = cmd.output().unwrap();
        assert!(o.status.success());
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        summaries.push(v["mu"].as_f64().unwrap());
    }
    assert!(summaries[1] > summaries[0], "{summaries:?}");
}

#[test]
fn compare_with_tiny_epsilon_reports_no_triads() {
    let tmp = tempfile::tempdir().unwrap();
    let sparse = write_dataset(
        tmp.path(),
        "sparse",
        &[(1000.0, 0.8, 5.0, 0.05), (3100.0, 0.4, 10.0, 0.05), (7000.0, 0.6, 20.0, 0.05)],
    );
    let o = nulgi()
        .args(["compare", "--epsilon", "0.001", "--replications", "200", "--data"])
        .arg(&sparse)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("no correlated triads"), "{text}");
    assert!(text.contains("ratio: undefined"));
    let report = load_report(tmp.path().join("summary.json")).unwrap();
    assert_eq!(report.confidence, None);
    let cmp = report.comparison.unwrap();
    assert_eq!(cmp.theoretical_confidence, None);
    assert_eq!(cmp.ratio, None);
}

#[test]
fn compare_of_a_prediction_with_itself_is_near_one() {
    let tmp = tempfile::tempdir().unwrap();
    // Points with dt = 0 so the substitute equals the point prediction.
    let osc = Oscillator::new(&OscillationParams::best_fit(), FlavorChannel::survival(Flavor::E, true)).unwrap();
    let pts: Vec<_> = (1..=30)
        .map(|i| {
            let t = 1500.0 * i as f64;
            (t, osc.probability(TimeParameter::new(t).unwrap()), 0.0, 0.02)
        })
        .collect();
    let path = write_dataset(tmp.path(), "self", &pts);
    let o = nulgi()
        .args(["--json", "compare", "--replications", "3000", "--data"])
        .arg(&path)
        .arg("--out")
        .arg(tmp.path().join("cmp"))
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ratio = v["comparison"]["ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn triads_csv_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_dataset(tmp.path(), "tri", &[(1.0, 0.9, 0.0, 0.0), (1.02, 0.9, 0.0, 0.0), (2.0, 0.5, 0.0, 0.0)]);
    let o = nulgi().args(["triads", "--no-self-pairs", "--data"]).arg(&path).output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "i,j,k,t_i,t_j,t_k,rel_err,k3");
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][..3], &[0.0, 1.0, 2.0]);
    assert!((rows[0][6] - 0.01).abs() < 1e-12);
    assert!((rows[0][7] - 0.31).abs() < 1e-12);
}

#[test]
fn flatten_modes() {
    let o = run(&["flatten", "--t-min", "1000", "--t-max", "50000", "--points", "20", "--resolution", "0"]);
    assert!(o.status.success());
    for r in csv_rows(&stdout(&o)) {
        assert_eq!(r[1], r[2]);
    }
    let o = nulgi().args(["flatten", "--data"]).arg(data("kamland.csv")).output().unwrap();
    assert!(o.status.success());
    // Two rows per point.
    assert_eq!(csv_rows(&stdout(&o)).len(), 30);
}

#[test]
fn gksl_demo_runs_description_file() {
    let o = nulgi()
        .args(["--json", "gksl-demo", "--points", "3", "--t-max", "2", "--system"])
        .arg(data("qubit_dephasing.txt"))
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["dim"], 2);
    assert_eq!(v["preserves_incoherence"], true);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    // t = 0: C(0, 0) = 1.
    assert_eq!(rows[0][5], 1.0);

    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.txt");
    std::fs::write(&bad, "[hamiltonian]\n1 0\n0 1+\n[projector]\n1 0\n0 0\n").unwrap();
    let o = nulgi().args(["gksl-demo", "--system"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "parse");
    assert!(err["message"].as_str().unwrap().contains("line 3"));
}

#[test]
fn synth_is_reproducible_and_honors_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let o = nulgi()
            .args(["synth", "--preset", "minos", "--seed", "11"])
            .env("NULGI_OUT_DIR", tmp.path().join(sub))
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(tmp.path().join("a/minos.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/minos.csv")).unwrap();
    assert_eq!(a, b);
    let d = nulgi::data_io::load_dataset(tmp.path().join("a/minos.csv")).unwrap();
    assert_eq!(d.channel, FlavorChannel::survival(Flavor::Mu, false));
    assert_eq!(d.len(), 20);
}
