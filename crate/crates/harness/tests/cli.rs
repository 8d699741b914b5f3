use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use hartree_harness::{run, ExperimentKind, Overrides, EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_PASS};
use serde_json::Value;

const GRID: &str = "schema_version = 1\n[grid]\npoints = 16\nhalf_length = 8.0\n";

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, format!("{GRID}{body}")).unwrap();
    path
}

fn overrides(out: &Path) -> Overrides {
    Overrides { out: Some(out.to_path_buf()), ..Overrides::default() }
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn csv_column(dir: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn free_evolution_keeps_csv_mass_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[initial]\nwidth = 1.5\nvelocity = [0.5, 0.0, 0.0]\n[evolve]\ndt = 0.01\nhorizon = 0.5\nstride = 10\n",
    );
    let out = tmp.path().join("out");
    assert_eq!(run(ExperimentKind::Evolve, &cfg, &overrides(&out)), EXIT_PASS);
    let mass = csv_column(&out, "mass");
    assert_eq!(mass.len(), 51);
    assert!(mass.iter().all(|m| ((m - mass[0]) / mass[0]).abs() < 1e-11));
    let rep = report(&out);
    assert_eq!(rep["experiment"], "evolve");
    assert_eq!(rep["pass"], true);
    assert_eq!(fs::read_dir(out.join("fields")).unwrap().count(), 6);
}

#[test]
fn check_potential_reports_the_inverse_power_window() {
    let windows = |gamma: f64| {
        let tmp = tempfile::tempdir().unwrap();
        let body = format!("[potential]\nkind = \"inverse_power\"\nexponent = {gamma}\n");
        let cfg = write_config(tmp.path(), &body);
        let out = tmp.path().join("out");
        let code = run(ExperimentKind::CheckPotential, &cfg, &overrides(&out));
        let windows = if code == EXIT_ERROR { Value::Null } else { report(&out)["results"]["theorem_windows"].clone() };
        (code, windows)
    };
    let (code, w) = windows(2.5);
    assert_eq!(code, EXIT_PASS);
    assert_eq!(w["cauchy"], true);
    assert_eq!(w["wave_operators"], true);
    assert_eq!(w["completeness"], true);
    let (_, w) = windows(1.5);
    assert_eq!(w["cauchy"], true);
    assert_eq!(w["completeness"], false);
    // Beyond the dimension the origin cell average diverges; the run is refused.
    let (code, w) = windows(3.5);
    assert_eq!(code, EXIT_ERROR);
    assert!(w.is_null());
}

fn keys(v: &Value) -> Vec<String> {
    match v {
        Value::Object(m) => m.iter().flat_map(|(k, v)| std::iter::once(k.clone()).chain(keys(v).into_iter().map(move |s| format!("{k}.{s}")))).collect(),
        _ => Vec::new(),
    }
}

#[test]
fn sweep_points_share_one_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[potential]\nkind = \"inverse_power\"\nexponent = 2.5\n[sweep]\nbase = \"check-potential\"\ngamma = [2.2, 2.5, 2.8]\n",
    );
    let out = tmp.path().join("out");
    let ov = Overrides { threads: Some(2), ..overrides(&out) };
    assert_eq!(run(ExperimentKind::Sweep, &cfg, &ov), EXIT_PASS);
    let summary = report(&out);
    let points = summary["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    let schemas: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let dir = out.join(p["dir"].as_str().unwrap());
            let mut rep = report(&dir);
            rep["config"] = Value::Null;
            keys(&rep)
        })
        .collect();
    assert!(schemas.windows(2).all(|w| w[0] == w[1]));
    let gammas: Vec<f64> = points.iter().map(|p| p["gamma"].as_f64().unwrap()).collect();
    assert_eq!(gammas, vec![2.2, 2.5, 2.8]);
}

#[test]
fn runs_are_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[potential]\nkind = \"inverse_power\"\nexponent = 2.5\n[initial]\nkind = \"random_band_limited\"\nband = 1.5\namplitude = 0.5\n[evolve]\ndt = 0.01\nhorizon = 0.2\nstride = 10\n",
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let ov = |dir: &Path| Overrides { seed: Some(11), ..overrides(dir) };
    run(ExperimentKind::Evolve, &cfg, &ov(&a));
    run(ExperimentKind::Evolve, &cfg, &ov(&b));
    for name in ["report.json", "diagnostics.csv", "fields/u_00002.hsf"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let c = tmp.path().join("c");
    run(ExperimentKind::Evolve, &cfg, &Overrides { seed: Some(12), ..overrides(&c) });
    assert_ne!(fs::read(a.join("diagnostics.csv")).unwrap(), fs::read(c.join("diagnostics.csv")).unwrap());
}

#[test]
fn failed_check_and_errors_have_distinct_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[potential]\nkind = \"inverse_power\"\nexponent = 2.5\n[evolve]\ndt = 0.05\nhorizon = 0.5\n[checks]\nenergy_drift = 0.0\n",
    );
    let out = tmp.path().join("strict");
    assert_eq!(run(ExperimentKind::Evolve, &cfg, &overrides(&out)), EXIT_CHECK_FAILED);
    assert_eq!(report(&out)["pass"], false);

    let out = tmp.path().join("mismatch");
    fs::write(&cfg, GRID.replace("[grid]", "experiment = \"scatter\"\n[grid]")).unwrap();
    assert_eq!(run(ExperimentKind::Evolve, &cfg, &overrides(&out)), EXIT_ERROR);
    let err: Value = serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("declares"));

    let out = tmp.path().join("typo");
    fs::write(&cfg, format!("{GRID}[evolve]\nhorizn = 1.0\n")).unwrap();
    assert_eq!(run(ExperimentKind::Evolve, &cfg, &overrides(&out)), EXIT_ERROR);
    assert!(out.join("error.json").exists());
}

#[test]
fn binary_reports_pass_lines_and_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[potential]\nkind = \"inverse_power\"\nexponent = 2.5\n");
    let out = tmp.path().join("out");
    let res = Command::new(env!("CARGO_BIN_EXE_hartree"))
        .args(["check-potential", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("PASS h1")), "{stdout}");
    let res = Command::new(env!("CARGO_BIN_EXE_hartree"))
        .args(["evolve", "--config", "missing.toml", "--out"])
        .arg(tmp.path().join("none"))
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn scatter_roundtrip_and_morawetz_complete_on_a_small_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "[potential]\nkind = \"inverse_power\"\nexponent = 2.5\n[initial]\nnorm = 0.3\n\
                [evolve]\ndt = 0.02\nhorizon = 2.0\nstride = 5\ndiagnostics_stride = 5\nwrite_fields = false\n\
                [scatter]\ncheckpoints = [0.5, 1.0, 2.0]\n\
                [roundtrip]\nhorizon = 1.0\nmin_horizon = 0.5\n";
    let cfg = write_config(tmp.path(), body);
    for kind in [ExperimentKind::Scatter, ExperimentKind::Roundtrip, ExperimentKind::Morawetz] {
        let out = tmp.path().join(kind.to_string());
        let code = run(kind, &cfg, &overrides(&out));
        assert_ne!(code, EXIT_ERROR, "{kind}");
        let rep = report(&out);
        assert!(!rep["checks"].as_array().unwrap().is_empty(), "{kind}");
        assert_eq!(out.join("fields").exists(), kind != ExperimentKind::Morawetz, "{kind}");
    }
    let rt = report(&tmp.path().join("roundtrip"));
    assert_eq!(rt["results"]["richardson_ladder"].as_array().unwrap().len(), 2);
    let checks: Vec<&str> = rt["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(checks, ["roundtrip_error", "mass_residual", "richardson_decreasing", "energy_budget"]);
    let mw = report(&tmp.path().join("morawetz"));
    assert_eq!(mw["results"]["morawetz"]["negative_integrand_samples"], 0);

    let out = tmp.path().join("past");
    let past = write_config(tmp.path(), &body.replace("[scatter]\n", "[scatter]\ndirection = \"past\"\n"));
    assert_ne!(run(ExperimentKind::Scatter, &past, &overrides(&out)), EXIT_ERROR);
    let t: Vec<f64> = csv_column(&out, "t");
    assert!((t.last().unwrap() + 2.0).abs() < 1e-12);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = hartree_harness::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(cfg.experiment.is_some(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 6);
}
