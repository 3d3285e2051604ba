use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use remit::cli::{read_sweep_csv, SweepCsvRow};
use remit::noise::{ConfusionMatrix, ConfusionMatrixFile};

fn remit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_remit")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn calibrate_identity_noise() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cal.toml");
    let output = dir.path().join("cal.json");
    fs::write(&config, "seed = 3\nshots_per_state = 1000\n\n[noise]\nkind = \"identity\"\nnum_qubits = 2\n").unwrap();

    let o = remit(&["calibrate", "--config", path_str(&config), "--output", path_str(&output)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("error rate (epsilon): 0\n"), "{}", stdout(&o));
    assert!(stdout(&o).contains("diagonally dominant: true"));

    let file = serde_json::from_str::<ConfusionMatrixFile>(&fs::read_to_string(&output).unwrap()).unwrap();
    assert_eq!(file.shots_per_state, Some(1000));
    assert_eq!(file.master_seed, Some(3));
    let cm = file.to_matrix().unwrap();
    assert_eq!(cm.to_dense(), ConfusionMatrix::identity(2).unwrap().to_dense());
}

#[test]
fn calibrate_four_percent_error_is_dominant() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cal.json");
    let output = dir.path().join("out.json");
    let json = r#"{
        "seed": 11,
        "noise": {"kind": "dense", "entries": [
            [0.96, 0.01, 0.01, 0.00],
            [0.02, 0.97, 0.00, 0.01],
            [0.01, 0.00, 0.98, 0.01],
            [0.01, 0.02, 0.01, 0.98]
        ]}
    }"#;
    fs::write(&config, json).unwrap();
    let o = remit(&["calibrate", "--config", path_str(&config), "--output", path_str(&output), "--oracle-calibration"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let eps: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("error rate (epsilon): "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((eps - 0.04).abs() < 1e-12);
    assert!(out.contains("diagonally dominant: true"));
}

#[test]
fn calibrate_malformed_json_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, "{\n  \"seed\": 1,\n  \"noise\": {\"kind\": \"identity\",}\n}\n").unwrap();
    let o = remit(&["calibrate", "--config", path_str(&config), "--output", path_str(&dir.path().join("x.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn calibrate_invalid_probability_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cal.toml");
    fs::write(&config, "seed = 1\n[noise]\nkind = \"factorized\"\nprobs = [[0.1, 1.5]]\n").unwrap();
    let out = dir.path().join("x.json");
    let o = remit(&["calibrate", "--config", path_str(&config), "--output", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = remit(&["calibrate", "--config", path_str(&dir.path().join("absent.toml")), "--output", path_str(&out)]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

fn write_identity_calibration(dir: &Path, n: usize) -> std::path::PathBuf {
    let path = dir.join(format!("identity{n}.json"));
    fs::write(&path, ConfusionMatrix::identity(n).unwrap().to_json()).unwrap();
    path
}

#[test]
fn mitigate_identity_calibration_leaves_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let hist = dir.path().join("h.csv");
    fs::write(&hist, "bitstring,count\n00,8192\n").unwrap();
    let cal = write_identity_calibration(dir.path(), 2);
    let o = remit(&["mitigate", "--histogram", path_str(&hist), "--calibration", path_str(&cal)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let mut reader = csv::Reader::from_reader(o.stdout.as_slice());
    let headers = reader.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let masks: Vec<&str> = rows.iter().map(|r| &r[col("mask")]).collect();
    assert_eq!(masks, ["ZZ", "ZI", "IZ", "II"]);
    for r in &rows {
        for name in ["raw_expectation", "mitigated_uncorrelated", "mitigated_correlated"] {
            assert_eq!(r[col(name)].parse::<f64>().unwrap(), 1.0);
        }
    }
}

#[test]
fn mitigate_noisy_two_qubit_report() {
    let dir = tempfile::tempdir().unwrap();
    let hist = dir.path().join("h.csv");
    fs::write(&hist, "bitstring,count\n00,3900\n01,310\n10,280\n11,3702\n").unwrap();
    let cal = dir.path().join("cal.json");
    let cm = ConfusionMatrix::factorized(vec![
        remit::observables::SingleQubitFlipProbs::new(0.02, 0.04).unwrap(),
        remit::observables::SingleQubitFlipProbs::new(0.03, 0.05).unwrap(),
    ])
    .unwrap();
    fs::write(&cal, cm.to_json()).unwrap();
    let report = dir.path().join("report.csv");
    let o = remit(&[
        "mitigate",
        "--histogram",
        path_str(&hist),
        "--calibration",
        path_str(&cal),
        "--thetas",
        "0.3,1.1,0.7,2.0",
        "--output",
        path_str(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(&report).unwrap();
    let rows: Vec<remit::mitigation::MitigationReportRow> = reader.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    let id = &rows[3];
    assert_eq!(id.mask, "II");
    assert_eq!(id.raw_expectation, 1.0);
    assert_eq!(id.mitigated_uncorrelated, Some(1.0));
    assert_eq!(id.mitigated_correlated, Some(1.0));
    assert_eq!(id.exact_expectation, Some(1.0));
    for r in &rows {
        let (u, c) = (r.mitigated_uncorrelated.unwrap(), r.mitigated_correlated.unwrap());
        assert!((u - c).abs() < 1e-12, "{r:?}");
    }
}

#[test]
fn mitigate_dimension_mismatch_fails() {
    let dir = tempfile::tempdir().unwrap();
    let hist = dir.path().join("h.csv");
    fs::write(&hist, "bitstring,count\n000,10\n101,5\n").unwrap();
    let cal = write_identity_calibration(dir.path(), 2);
    let o = remit(&["mitigate", "--histogram", path_str(&hist), "--calibration", path_str(&cal)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!stderr(&o).is_empty());
}

const SMOKE: &str = r#"
seed = 42
num_states = 10
shot_grid = [128, 1024, 8192]
calibration_shots = 4096

[noise]
kind = "correlated"
probs = [[0.02, 0.04], [0.03, 0.05]]
lambda = 0.02
flip = "XX"
"#;

#[test]
fn sweep_smoke_is_fast_complete_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    fs::write(&config, SMOKE).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let start = Instant::now();
        let o = remit(&["sweep", "--config", path_str(&config), "--output", path_str(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(start.elapsed().as_secs_f64() < 10.0);
        for s in ["raw", "uncorrelated", "correlated"] {
            assert!(stdout(&o).contains(&format!("{s}: slope")), "{}", stdout(&o));
        }
        out
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("# seed = 42\n"));
    let rows: Vec<SweepCsvRow> = read_sweep_csv(&a).unwrap();
    assert_eq!(rows.len(), 3 * 3);
    assert!(rows.iter().all(|r| r.seed == 42 && r.num_states == 10 && r.mean_abs_error >= 0.0));

    // the echoed noise line parses back into the configured matrix
    let noise = text.lines().find_map(|l| l.strip_prefix("# noise = ")).unwrap();
    let cm = serde_json::from_str::<ConfusionMatrixFile>(noise).unwrap().to_matrix().unwrap();
    assert_eq!(cm.num_qubits(), 2);

    let o = remit(&["sweep", "--config", path_str(&config), "--output", path_str(&a), "--seed", "43"]);
    assert!(o.status.success());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn sweep_singular_omega_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    fs::write(
        &config,
        "seed = 1\nnum_states = 4\nshot_grid = [16, 32, 64]\noracle_calibration = true\nschemes = [\"correlated\"]\n\n\
         [noise]\nkind = \"dense\"\nentries = [[0.25, 0.25, 0.25, 0.25], [0.25, 0.25, 0.25, 0.25], \
         [0.25, 0.25, 0.25, 0.25], [0.25, 0.25, 0.25, 0.25]]\n",
    )
    .unwrap();
    let o = remit(&["sweep", "--config", path_str(&config), "--output", path_str(&dir.path().join("s.csv"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error: "));
}
