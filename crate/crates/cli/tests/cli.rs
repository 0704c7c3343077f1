use std::path::Path;

use chfif_cli::{run, EXIT_BAD_INPUT, EXIT_FAILURE};
use serde_json::Value;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn chfif(args: &[&str]) -> Out {
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("chfif").chain(args.iter().copied()), &mut o, &mut e);
    Out {
        code,
        stdout: String::from_utf8(o).unwrap(),
        stderr: String::from_utf8(e).unwrap(),
    }
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn write_hat(dir: &Path) -> String {
    let p = path(dir, "hat.json");
    std::fs::write(&p, r#"{"knots":[0,0.5,1],"alpha":[0,0],"beta":[0,0],"gamma":[0,0],"y":[0,1,0],"z":[0,0,0]}"#).unwrap();
    p
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn hat_samples_are_piecewise_linear() {
    let dir = tempfile::tempdir().unwrap();
    let hat = write_hat(dir.path());
    let r = chfif(&["sample", "--system", &hat, "--depth", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows = csv_rows(&r.stdout);
    assert_eq!(rows.len(), 9);
    for row in &rows {
        let want = 1.0 - (2.0 * row[0] - 1.0).abs();
        assert_eq!(row[1], want);
        assert_eq!(row[2], 0.0);
    }
    assert_eq!(csv_rows(&chfif(&["sample", "--system", &hat, "--depth", "3"]).stdout).len(), 17);
}

#[test]
fn report_passes_at_the_published_point() {
    let r = chfif(&["report", "--preset", "paper-sec4"]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    assert!(r.stdout.contains("result: PASS"));
    let j = chfif(&["report", "--format", "json"]);
    let v: Value = serde_json::from_str(&j.stdout).unwrap();
    assert_eq!(v["report"]["pass"], Value::Bool(true));
    assert_eq!(v["metadata"]["tool"], "chfif");
}

#[test]
fn published_table_residual_is_printed_and_decides_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let table = path(dir.path(), "table.json");
    assert_eq!(chfif(&["wavelets", "table", "-o", &table]).code, 0);
    let out = path(dir.path(), "res.json");
    let r = chfif(&["wavelets", "verify", "--solution", &table, "-o", &out]);
    assert!(r.stdout.contains("max residual"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let max = v["max_residual"].as_f64().unwrap();
    assert_eq!(v["residuals"].as_array().unwrap().len(), 39);
    assert_eq!(r.code, if max < 5e-3 { 0 } else { EXIT_FAILURE });
    assert_eq!(chfif(&["wavelets", "verify", "--published", "--tol", "1"]).code, 0);
}

#[test]
fn solved_wavelet_samples_carry_the_knot_values() {
    let dir = tempfile::tempdir().unwrap();
    let wav = path(dir.path(), "wav.json");
    let r = chfif(&["wavelets", "solve", "-o", &wav]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&wav).unwrap()).unwrap();
    assert_eq!(v["jacobian_nullity"], 3);
    let a = &v["wavelets"]["A"];
    let s = chfif(&["sample", "--wavelets", &wav, "--depth", "3"]);
    assert_eq!(s.code, 0, "{}", s.stderr);
    let rows = csv_rows(&s.stdout);
    assert_eq!(rows.len(), 4 * 16 + 1);
    for l in 1..8 {
        let row = &rows[l * 8];
        assert_eq!(row[0], l as f64 / 4.0);
        for i in 0..3 {
            assert!((row[i + 1] - a[i][l - 1].as_f64().unwrap()).abs() < 1e-12);
        }
    }
    assert_eq!(rows[0][1..], [0.0; 3]);
    assert_eq!(rows[64][1..], [0.0; 3]);
}

#[test]
fn artifacts_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["build-basis"][..], &["gram"][..], &["wavelets", "solve", "--seed", "5"][..]] {
        let a = chfif(args);
        let b = chfif(args);
        assert_eq!(a.code, 0, "{args:?}: {}", a.stderr);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
    let hat = write_hat(dir.path());
    let (p1, p2) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    chfif(&["sample", "--system", &hat, "-o", &p1]);
    chfif(&["sample", "--system", &hat, "-o", &p2]);
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(format!("{p1}.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["metadata"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn presets_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let basis = path(dir.path(), "basis.json");
    assert_eq!(chfif(&["build-basis", "-o", &basis]).code, 0);
    let g1 = chfif(&["gram", "--basis", &basis]);
    assert_eq!(g1.code, 0, "{}", g1.stderr);
    let g0: Value = serde_json::from_str(&chfif(&["gram"]).stdout).unwrap();
    let g1: Value = serde_json::from_str(&g1.stdout).unwrap();
    assert_eq!(g0["template_gram"], g1["template_gram"]);

    let cfg = path(dir.path(), "cfg.json");
    let exprs = r#"{"params":{"alpha":["0","sqrt7-3"],"beta":["1/20","(3-sqrt7)/20"],"gamma":["-9/10","(-67+29*sqrt7)/10"]}}"#;
    std::fs::write(&cfg, exprs).unwrap();
    let a: Value = serde_json::from_str(&chfif(&["build-basis", "--config", &cfg]).stdout).unwrap();
    let b: Value = serde_json::from_str(&chfif(&["build-basis"]).stdout).unwrap();
    assert_eq!(a["basis"], b["basis"]);
    assert_ne!(a["metadata"]["config_hash"], b["metadata"]["config_hash"]);
}

#[test]
fn transform_round_trip_keeps_the_layout() {
    let dir = tempfile::tempdir().unwrap();
    let [basis, wav, sig, co] = ["basis.json", "wav.json", "sig.csv", "co.json"].map(|f| path(dir.path(), f));
    chfif(&["build-basis", "-o", &basis]);
    chfif(&["wavelets", "solve", "-o", &wav]);
    let mut s = String::from("x,value\n");
    for j in 0..=8 * 128 {
        let x = j as f64 / 128.0;
        s.push_str(&format!("{x},{}\n", (2.0 * x).sin()));
    }
    std::fs::write(&sig, s).unwrap();
    let d = chfif(&["transform", "decompose", "--input", &sig, "--basis", &basis, "--wavelets", &wav, "--levels", "2", "-o", &co]);
    assert_eq!(d.code, 0, "{}", d.stderr);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&co).unwrap()).unwrap();
    assert_eq!(v["coefficients"]["details"].as_array().unwrap().len(), 2);
    assert_eq!(v["coefficients"]["approximation"]["level"], 2);
    let r = chfif(&["transform", "reconstruct", "--input", &co, "--basis", &basis, "--wavelets", &wav]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let c: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(c["coefficients"]["level"], 0);
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(chfif(&["report", "--preset", "nope"]).code, EXIT_BAD_INPUT);
    assert_eq!(chfif(&["bogus"]).code, EXIT_BAD_INPUT);
    let r = chfif(&["--error-json", "sample", "--system", "/nonexistent/x.json"]);
    assert_eq!(r.code, EXIT_BAD_INPUT);
    let v: Value = serde_json::from_str(r.stderr.trim()).unwrap();
    assert_eq!(v["error"]["kind"], "bad_input");
    assert_eq!(v["error"]["exit_code"], 2);
    assert_eq!(chfif(&["build-basis", "--n", "3", "--preset", "paper-sec4"]).code, EXIT_BAD_INPUT);
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "c.json");
    std::fs::write(&cfg, r#"{"preset":"paper-sec4","solve":true}"#).unwrap();
    assert_eq!(chfif(&["build-basis", "--config", &cfg]).code, EXIT_BAD_INPUT);
    std::fs::write(&cfg, r#"{"unknown":1}"#).unwrap();
    assert_eq!(chfif(&["build-basis", "--config", &cfg]).code, EXIT_BAD_INPUT);
}
