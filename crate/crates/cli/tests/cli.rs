//! End-to-end behaviour of the `cellsec` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn cellsec(args: &[&str], workers_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cellsec"));
    cmd.args(args).env_remove("CELLSEC_WORKERS");
    if let Some(w) = workers_env {
        cmd.env("CELLSEC_WORKERS", w);
    }
    cmd.output().expect("binary runs")
}

fn write_spec(dir: &Path, name: &str, spec: &Value) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    path
}

fn fig4_base() -> Value {
    json!({"n_antennas": 20, "users_per_cell": 20, "snr_db": 10.0, "path_loss_exp": 4.0,
           "bs_density": 0.1, "regularizer": null})
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn well_formed_config_has_no_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let spec = json!({
        "version": 1, "name": "lognormal", "kind": "cdf_validation", "base": fig4_base(),
        "sweep": {"key": "bs_density", "values": [0.001, 0.01, 0.1]},
        "mc": {"seed": 4}, "n_samples": 1000, "paths": ["montecarlo_ball", "analytic"]
    });
    let out = cellsec(
        &["validate", write_spec(dir.path(), "ok", &spec).to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "ok");
}

#[test]
fn divergent_path_loss_gives_one_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = fig4_base();
    base["path_loss_exp"] = json!(2.0);
    let spec = json!({
        "version": 1, "name": "eta", "kind": "rate_vs_snr", "base": base,
        "sweep": {"key": "n_antennas", "values": [20]}, "paths": ["analytic"]
    });
    let out = cellsec(
        &["validate", write_spec(dir.path(), "eta", &spec).to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    let lines: Vec<String> = stdout(&out).lines().map(String::from).collect();
    assert_eq!(lines.len(), 1, "{lines:?}");
    assert!(
        lines[0].contains("must exceed 2") && lines[0].contains("diverge"),
        "{}",
        lines[0]
    );
}

#[test]
fn both_snr_keys_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = fig4_base();
    base["snr_linear"] = json!(10.0);
    let spec = json!({
        "version": 1, "name": "snr", "kind": "rate_vs_density", "base": base,
        "sweep": {"key": "bs_density", "values": [0.1]}, "paths": ["analytic"]
    });
    let out = cellsec(
        &["validate", write_spec(dir.path(), "snr", &spec).to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stdout(&out).contains("exactly one of `snr_db` and `snr_linear`"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn inconsistent_user_density_and_missing_seed_are_both_listed() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = fig4_base();
    base["user_density"] = json!(3.0);
    let spec = json!({
        "version": 1, "name": "k", "kind": "outage_vs_snr", "base": base,
        "sweep": {"key": "snr_db", "values": [0.0]}, "paths": ["montecarlo_ball"]
    });
    let out = cellsec(
        &["validate", write_spec(dir.path(), "k", &spec).to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out);
    assert!(text.contains("user density 3"), "{text}");
    assert!(text.contains("seed"), "{text}");
}

#[test]
fn empty_sweep_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let spec = json!({
        "version": 1, "name": "empty", "kind": "rate_vs_snr", "base": fig4_base(),
        "sweep": {"key": "snr_db", "values": []}, "paths": ["analytic"]
    });
    let path = write_spec(dir.path(), "empty", &spec);
    let out_dir = dir.path().join("out");
    let run = cellsec(
        &["run", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        None,
    );
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("sweep list is empty"));
    assert!(!out_dir.join("empty.csv").exists());
    assert_eq!(
        cellsec(&["validate", path.to_str().unwrap()], None).status.code(),
        Some(2)
    );
}

#[test]
fn unreadable_or_malformed_spec_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(
        cellsec(&["validate", missing.to_str().unwrap()], None)
            .status
            .code(),
        Some(2)
    );
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"version": 1, "name": "x", "kind": "rate_vs_snr", "bogus": 1}"#,
    )
    .unwrap();
    assert_eq!(
        cellsec(&["validate", bad.to_str().unwrap()], None).status.code(),
        Some(2)
    );
}

fn small_run_spec() -> Value {
    json!({
        "version": 1, "name": "small", "kind": "outage_vs_snr", "base": fig4_base(),
        "sweep": {"key": "snr_db", "values": [10.0, -5.0, 0.0]},
        "series": [{"label": "N=20", "overrides": {}}, {"label": "N=30", "overrides": {"n_antennas": 30}}],
        "mc": {"n_geometries": 40, "n_fadings": 2, "seed": 17},
        "paths": ["montecarlo_ball", "montecarlo_exact"]
    })
}

#[test]
fn runs_are_deterministic_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_spec(dir.path(), "small", &small_run_spec());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ra = cellsec(
        &[
            "run",
            path.to_str().unwrap(),
            "--out",
            a.to_str().unwrap(),
            "--workers",
            "1",
        ],
        None,
    );
    let rb = cellsec(
        &["run", path.to_str().unwrap(), "--out", b.to_str().unwrap()],
        Some("3"),
    );
    assert_eq!(
        ra.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ra.stderr)
    );
    assert_eq!(rb.status.code(), Some(0));
    let csv_a = fs::read_to_string(a.join("small.csv")).unwrap();
    let csv_b = fs::read_to_string(b.join("small.csv")).unwrap();
    assert_eq!(csv_a, csv_b);

    assert!(csv_a.lines().any(|l| l == cellsec_cli::CSV_HEADER));
    assert!(csv_a
        .lines()
        .any(|l| l.starts_with("# params[N=30]:") && l.contains("\"n_antennas\":30")));
    let rows = data_rows(&csv_a);
    assert_eq!(rows.len(), 2 * 3 * 2);
    let keys: Vec<(String, String, String)> = rows
        .iter()
        .map(|r| {
            let f: Vec<&str> = r.split(',').collect();
            assert_eq!(f.len(), 8);
            assert_eq!(f[1], "outage");
            let y: f64 = f[5].parse().unwrap();
            assert!((0.0..=1.0).contains(&y));
            assert_eq!(f[7], "80");
            (f[0].to_string(), f[3].to_string(), f[2].to_string())
        })
        .collect();
    let mut expected = Vec::new();
    for series in ["N=20", "N=30"] {
        for x in ["10", "-5", "0"] {
            for path in ["montecarlo_ball", "montecarlo_exact"] {
                expected.push((series.to_string(), x.to_string(), path.to_string()));
            }
        }
    }
    assert_eq!(keys, expected);

    let summary: Value =
        serde_json::from_str(&fs::read_to_string(a.join("small.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"], json!(12));
    assert_eq!(summary["seed"], json!(17));
    assert_eq!(
        summary["series"][1]["points"][0]["params"]["n_antennas"],
        json!(30)
    );
}

#[test]
fn seed_flag_supplies_and_overrides_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_run_spec();
    spec["mc"].as_object_mut().unwrap().remove("seed");
    spec["series"] = json!([]);
    spec["paths"] = json!(["montecarlo_ball"]);
    let path = write_spec(dir.path(), "noseed", &spec);
    let out = dir.path().join("o");
    let args = |seed: &'static str| {
        [
            "run",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]
        .map(String::from)
    };
    let no_seed = cellsec(
        &["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(no_seed.status.code(), Some(2));

    let run = |seed| {
        let a = args(seed);
        let r = cellsec(&a.iter().map(String::as_str).collect::<Vec<_>>(), None);
        assert_eq!(r.status.code(), Some(0));
        fs::read_to_string(out.join("small.csv")).unwrap()
    };
    let first = run("5");
    assert!(first.contains("\"seed\":5"));
    assert_eq!(run("5"), first);
    assert_ne!(data_rows(&run("6")), data_rows(&first));
}

#[test]
fn numeric_failure_keeps_partial_rows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = json!({
        "version": 1, "name": "partial", "kind": "rate_vs_density", "base": fig4_base(),
        "sweep": {"key": "bs_density", "values": [0.1, 1e300]}, "paths": ["lower_bound"]
    });
    let path = write_spec(dir.path(), "partial", &spec);
    let out = dir.path().join("o");
    let r = cellsec(
        &["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("partial.csv")).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 1, "{csv}");
    assert!(rows[0].starts_with("default,mean_rate,lower_bound,0.1,0.1,"));
    let last = csv.lines().last().unwrap();
    assert!(
        last.starts_with("# failed: series=default, bs_density=1e300, path=lower_bound"),
        "{last}"
    );
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("partial.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failures"].as_array().unwrap().len(), 1);
    assert_eq!(summary["failures"][0]["config_error"], json!(false));
}

#[test]
fn shipped_presets_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for n in 3..=8 {
        assert!(names.contains(&format!("fig{n}.json")), "{names:?}");
    }
    for name in &names {
        let path = dir.join(name);
        let out = cellsec(&["validate", path.to_str().unwrap()], None);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stdout(&out));
        let spec: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(format!("{}.json", spec["name"].as_str().unwrap()), *name);
    }
}
