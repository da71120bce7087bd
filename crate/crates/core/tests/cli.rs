use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn chiralpoint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chiralpoint")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = chiralpoint(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn body(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let rows = body(csv);
    let k = rows[0].split(',').position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn csv_layout_and_precision() {
    let csv = ok(&["ldos", "--preset", "fig2"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# chiralpoint "));
    assert!(lines.iter().any(|l| l.starts_with("# config_sha256: ")));
    let rows = body(&csv);
    assert_eq!(rows[0], "omega_eV,J_eV,P,J_baseline_eV,P_baseline");
    let first = rows[1].split(',').next().unwrap();
    let mantissa = first.split('e').next().unwrap().replace(['-', '.'], "");
    assert!(mantissa.len() >= 12, "{first}");
}

#[test]
fn reruns_differ_only_in_timestamp() {
    let strip = |s: String| s.lines().filter(|l| !l.starts_with("# generated_unix")).collect::<Vec<_>>().join("\n");
    let a = strip(ok(&["emission", "--preset", "fig4bd"]));
    let b = strip(ok(&["emission", "--preset", "fig4bd", "--jobs", "3"]));
    assert_eq!(a, b);
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.json", "{}");
    let out = chiralpoint(&["ldos", "--config", &empty]);
    assert_eq!(out.status.code(), Some(2));

    let typo = write(dir.path(), "typo.json", "{\n  \"plasmin\": {}\n}");
    let out = chiralpoint(&["ldos", "--config", &typo]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");

    let bad = write(dir.path(), "bad.json", r#"{"preset": "fig2", "plasmon": {"kappa_r": -1.0}}"#);
    assert_eq!(chiralpoint(&["ldos", "--config", &bad]).status.code(), Some(2));
    assert_eq!(chiralpoint(&["ldos", "--preset", "nope"]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let data: String = (0..60).map(|i| format!("{},1e300\n", 1.40 + 0.002 * i as f64)).collect();
    write(dir.path(), "huge.csv", &format!("omega_eV,P\n{data}"));
    let cfg = write(dir.path(), "fit.json", r#"{"preset": "fig8", "run": {"fit": {"data": "huge.csv", "free": ["g1", "gc"]}}}"#);
    let out = chiralpoint(&["fit", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ill_conditioned_fit"));

    write(dir.path(), "few.csv", "omega_eV,P\n1.46,10\n1.47,12\n1.48,9\n");
    let cfg = write(dir.path(), "few.json", r#"{"preset": "fig8", "run": {"fit": {"data": "few.csv", "free": ["g1", "gc"]}}}"#);
    let out = chiralpoint(&["fit", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient_data"));
}

#[test]
fn baseline_flag_removes_the_mirror() {
    let csv = ok(&["ldos", "--preset", "fig2", "--baseline"]);
    assert_eq!(column(&csv, "J_eV"), column(&csv, "J_baseline_eV"));
    let cep = ok(&["ldos", "--preset", "fig2"]);
    assert_ne!(column(&cep, "J_eV"), column(&cep, "J_baseline_eV"));
}

#[test]
fn scatter_writes_summary_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig7b.csv");
    ok(&["scatter", "--preset", "fig7b", "--out", out.to_str().unwrap()]);
    let side = std::fs::read_to_string(dir.path().join("fig7b.summary.csv")).unwrap();
    let rows = body(&side);
    assert_eq!(rows[0], "sigma0,sigma_sup,sigma_so,mechanism");
    assert!(rows[1].ends_with(",superscattering"));
}

#[test]
fn yield_preset_reaches_high_efficiency() {
    let csv = ok(&["yield", "--preset", "fig7f"]);
    let best = column(&csv, "eta").into_iter().fold(f64::NEG_INFINITY, f64::max);
    assert!((best - 0.992).abs() <= 0.005, "{best}");
}

#[test]
fn json_record_carries_config_and_timing() {
    let text = ok(&["scatter", "--preset", "fig7c", "--format", "json"]);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["command"], "scatter");
    assert_eq!(v["config"]["mirror"]["phi_over_pi"], 1.5);
    assert!(v["timing"]["elapsed_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["summary"]["summary_row"]["rows"][0][3], "eit_intermediate");
}

#[test]
fn fit_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok(&["ldos", "--preset", "fig8"]);
    let (w, p) = (column(&csv, "omega_eV"), column(&csv, "P"));
    let data: String = w.iter().zip(&p).map(|(a, b)| format!("{a:e},{b:e}\n")).collect();
    write(dir.path(), "purcell.csv", &format!("omega_eV,P\n{data}"));
    let cfg = write(
        dir.path(),
        "fit.json",
        r#"{"preset": "fig8", "couplings": {"g1": -4e-3, "gc": 0.05e-3}, "run": {"fit": {"data": "purcell.csv", "free": ["g1", "gc"]}}}"#,
    );
    let out = ok(&["fit", "--config", &cfg]);
    let rows = body(&out);
    let g1: f64 = rows.iter().find(|r| r.starts_with("g1,")).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((g1 / -11e-3 - 1.0).abs() < 1e-6, "{g1}");
}

#[test]
fn sweep_resumes_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"preset": "fig7b", "run": {"sweep": {"axes": [{"path": "mirror.phi_over_pi", "lo": 0, "hi": 1.75, "points": 8}], "observable": "Sigma0"}}}"#,
    );
    let cache = dir.path().join("cache");
    let args = ["sweep", "--config", &cfg, "--cache", cache.to_str().unwrap(), "--jobs", "2"];
    let strip = |s: String| s.lines().filter(|l| !l.starts_with("# generated_unix")).collect::<Vec<_>>().join("\n");
    let first = strip(ok(&args));
    let files: Vec<_> = std::fs::read_dir(&cache).unwrap().collect();
    assert_eq!(files.len(), 1);
    let path = files[0].as_ref().unwrap().path();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 8);
    // drop half the rows as if interrupted; the rerun fills them in identically
    let text = std::fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text.lines().take(4).collect();
    std::fs::write(&path, kept.join("\n") + "\n").unwrap();
    let second = strip(ok(&args));
    assert_eq!(first, second);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 8);
    assert_eq!(body(&first).len(), 9);
}

#[test]
fn presets_are_listed_and_printed() {
    let list = ok(&["presets"]);
    for name in ["fig2", "fig3", "fig4bd", "fig4ef", "fig5", "fig6a", "fig6b", "fig7a", "fig7f", "fig8"] {
        assert!(list.lines().any(|l| l == name), "{name}");
    }
    let text = ok(&["presets", "fig6b"]);
    assert!(serde_json::from_str::<Value>(&text).is_ok());
    assert_eq!(chiralpoint(&["presets", "fig9"]).status.code(), Some(2));
}

#[test]
fn every_preset_runs_its_natural_command() {
    for (cmd, preset) in [
        ("dynamics", "fig4bd"),
        ("emission", "fig4ef"),
        ("yield", "fig6a"),
        ("yield", "fig6b"),
        ("scatter", "fig7a"),
    ] {
        let csv = ok(&[cmd, "--preset", preset]);
        assert!(body(&csv).len() > 2, "{cmd} {preset}");
    }
}
