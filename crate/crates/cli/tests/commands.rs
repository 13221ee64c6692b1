use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_povm-galois"))
}

fn write(dir: &Path, name: &str, doc: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, Value, String) {
    let out = bin().args(args).output().expect("binary runs");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let report = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (out.status.code().expect("exit code"), report, String::from_utf8_lossy(&out.stderr).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn real(m: &[Vec<f64>]) -> Value {
    json!(m.iter().map(|row| row.iter().map(|x| [*x, 0.0]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn diag(d: &[f64]) -> Vec<Vec<f64>> {
    (0..d.len()).map(|i| (0..d.len()).map(|j| if i == j { d[i] } else { 0.0 }).collect()).collect()
}

fn qubit(bloch: [f64; 3]) -> Value {
    json!({ "version": 1, "kind": "observable", "bloch": bloch })
}

/// Choi matrix of the identity on `C^d`, output-major.
fn identity_choi(d: usize) -> Vec<Vec<f64>> {
    let n = d * d;
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..d {
        for j in 0..d {
            m[i * d + i][j * d + j] = 1.0;
        }
    }
    m
}

fn channel(d: usize, choi: &[Vec<f64>]) -> Value {
    json!({ "version": 1, "kind": "channel", "dim_in": d, "dim_out": d, "choi": real(choi) })
}

/// Choi of `T ↦ tr(T)·1/2`.
fn depolarizing_choi() -> Vec<Vec<f64>> {
    diag(&[0.5; 4])
}

/// `Value` matrix of `[re, im]` pairs as real and imaginary parts.
fn parse_matrix(v: &Value) -> Vec<Vec<(f64, f64)>> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|row| row.as_array().unwrap().iter().map(|z| (z[0].as_f64().unwrap(), z[1].as_f64().unwrap())).collect())
        .collect()
}

#[test]
fn sharp_observable_is_incompatible_with_identity() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.json", &qubit([1.0, 0.0, 0.0]));
    let id = write(dir.path(), "id.json", &channel(2, &identity_choi(2)));
    let (code, report, _) = run(&["check", "compatible", s(&a), s(&id)]);
    assert_eq!(code, 1);
    assert_eq!(report["verdict"]["answer"], "No");
    assert!(report["verdict"]["certificate"].is_object());
}

#[test]
fn anything_is_compatible_with_depolarizing() {
    let dir = TempDir::new().unwrap();
    let dep = write(dir.path(), "dep.json", &channel(2, &depolarizing_choi()));
    for (i, bloch) in [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [0.3, -0.2, 0.1]].into_iter().enumerate() {
        let a = write(dir.path(), &format!("a{i}.json"), &qubit(bloch));
        let (code, report, _) = run(&["check", "compatible", s(&a), s(&dep)]);
        assert_eq!(code, 0, "{bloch:?}");
        assert!(report["verdict"]["witness"].is_object());
    }
}

#[test]
fn observable_is_jointly_measurable_with_itself() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.json", &qubit([0.0, 0.0, 1.0]));
    let (code, _, _) = run(&["check", "joint-meas", s(&a), s(&a)]);
    assert_eq!(code, 0);
}

#[test]
fn simulable_obs_takes_a_set() {
    let dir = TempDir::new().unwrap();
    let x = write(dir.path(), "x.json", &qubit([1.0, 0.0, 0.0]));
    let y = write(dir.path(), "y.json", &qubit([0.0, 1.0, 0.0]));
    let z = write(dir.path(), "z.json", &qubit([0.0, 0.0, 1.0]));
    let half = write(dir.path(), "h.json", &qubit([0.5, 0.0, 0.0]));
    assert_eq!(run(&["check", "simulable-obs", s(&z), s(&x), s(&y)]).0, 1);
    assert_eq!(run(&["check", "simulable-obs", s(&half), s(&x), s(&y)]).0, 0);
}

#[test]
fn least_disturbing_on_three_levels_is_block_pinching() {
    let dir = TempDir::new().unwrap();
    let coarse = json!({
        "version": 1,
        "kind": "observable",
        "dim": 3,
        "effects": [real(&diag(&[1.0, 0.0, 0.0])), real(&diag(&[0.0, 1.0, 1.0]))],
    });
    let a = write(dir.path(), "a.json", &coarse);
    let out = dir.path().join("ld.json");
    let (code, report, _) = run(&["construct", "least-disturbing", s(&a), "--object-out", s(&out)]);
    assert_eq!(code, 0);
    assert!(report["details"]["residuals"]["trace_preservation_defect"].as_f64().unwrap() < 1e-9);

    let file: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(file["kind"], "channel");
    let choi = parse_matrix(&file["choi"]);
    // T ↦ P T P + Q T Q with P = |0⟩⟨0|, Q = 1 − P keeps exactly the block-diagonal matrix units
    let block = |k: usize| usize::from(k > 0);
    let mut worst: f64 = 0.0;
    for (r, row) in choi.iter().enumerate() {
        for (c, &(re, im)) in row.iter().enumerate() {
            let (i, a) = (r / 3, r % 3);
            let (j, b) = (c / 3, c % 3);
            let expected = if i == a && j == b && block(a) == block(b) { 1.0 } else { 0.0 };
            worst = worst.max((re - expected).abs()).max(im.abs());
        }
    }
    assert!(worst <= 1e-9, "deviation {worst:e}");
}

#[test]
fn naimark_of_projective_observable_is_trivial() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.json", &qubit([0.0, 0.0, 1.0]));
    let (code, report, _) = run(&["construct", "naimark", s(&a)]);
    assert_eq!(code, 0);
    assert_eq!(report["details"]["mode"], "trivial");
    assert_eq!(report["details"]["dim_k"], 2);
    let v = parse_matrix(&report["details"]["isometry"]);
    for (r, row) in v.iter().enumerate() {
        for (c, &(re, im)) in row.iter().enumerate() {
            assert!((re - if r == c { 1.0 } else { 0.0 }).abs() < 1e-12 && im.abs() < 1e-12);
        }
    }
    assert_eq!(report["object"]["kind"], "observable");
}

#[test]
fn gamma_prepares_on_a_two_dimensional_output() {
    let dir = TempDir::new().unwrap();
    let coarse = json!({
        "version": 1,
        "kind": "observable",
        "dim": 3,
        "effects": [real(&diag(&[1.0, 0.5, 0.0])), real(&diag(&[0.0, 0.5, 1.0]))],
    });
    let a = write(dir.path(), "a.json", &coarse);
    let (code, report, _) = run(&["construct", "gamma", s(&a)]);
    assert_eq!(code, 0);
    assert_eq!(report["object"]["kind"], "channel");
    assert_eq!(report["object"]["dim_in"], 3);
    assert_eq!(report["object"]["dim_out"], 2);
}

#[test]
fn realize_and_induced_observable() {
    let dir = TempDir::new().unwrap();
    let dep = write(dir.path(), "dep.json", &channel(2, &depolarizing_choi()));
    let (code, report, _) = run(&["construct", "realize", s(&dep)]);
    assert_eq!(code, 0);
    assert!(report["details"]["residuals"]["reconstruction_error"].as_f64().unwrap() < 1e-8);
    let (code, report, _) = run(&["construct", "induced-obs", s(&dep)]);
    assert_eq!(code, 0);
    assert_eq!(report["details"]["compatible_with_channel"]["answer"], "Yes");
}

fn small_universe(dir: &Path) -> PathBuf {
    write(
        dir,
        "u.json",
        &json!({
            "version": 1,
            "observables": [
                { "kind": "observable", "bloch": [1.0, 0.0, 0.0] },
                { "kind": "observable", "bloch": [0.0, 0.0, 0.5] },
                { "kind": "observable", "bloch": [0.0, 0.0, 0.0] },
            ],
            "channels": [
                { "kind": "channel", "dim_in": 2, "dim_out": 2, "choi": real(&identity_choi(2)) },
                { "kind": "channel", "dim_in": 2, "dim_out": 2, "choi": real(&depolarizing_choi()) },
                // complete dephasing in the σ₃ basis
                { "kind": "channel", "dim_in": 2, "dim_out": 2, "choi": real(&diag(&[1.0, 0.0, 0.0, 1.0])) },
            ],
        }),
    )
}

#[test]
fn universe_build_stamps_nine_verdicts() {
    let dir = TempDir::new().unwrap();
    let u = small_universe(dir.path());
    let (code, report, _) = run(&["universe", "build", s(&u)]);
    assert_eq!(code, 0);
    assert_eq!(report["verdicts"], 9);
    let file: Value = serde_json::from_str(&std::fs::read_to_string(&u).unwrap()).unwrap();
    assert_eq!(file["hash"].as_str().unwrap().len(), 64);
    let rel = file["relation"].as_array().unwrap();
    assert_eq!(rel.len(), 3);
    // sharp σ₁ fits only the depolarizing channel; the trivial observable fits all
    assert_eq!(rel[0], json!(["No", "Yes", "No"]));
    assert_eq!(rel[1], json!(["No", "Yes", "Yes"]));
    assert_eq!(rel[2], json!(["Yes", "Yes", "Yes"]));
}

#[test]
fn closure_of_empty_set_is_all_channels() {
    let dir = TempDir::new().unwrap();
    let u = small_universe(dir.path());
    assert_eq!(run(&["universe", "build", s(&u)]).0, 0);
    let (code, report, _) = run(&["universe", "closure", s(&u)]);
    assert_eq!(code, 0);
    assert_eq!(report["sigma"], json!([0, 1, 2]));
    let (code, report, _) = run(&["universe", "closure", s(&u), "--self-test"]);
    assert_eq!(code, 0);
    assert_eq!(report["self_test"]["passed"], true);
    assert_eq!(report["self_test"]["observable_subsets"], 8);
    let (code, report, _) = run(&["universe", "closure", s(&u), "--observables", "0"]);
    assert_eq!(code, 0);
    assert_eq!(report["sigma"], json!([1]));
    assert_eq!(report["closure"], json!([0, 1, 2]));
}

#[test]
fn stale_hash_is_rejected() {
    let dir = TempDir::new().unwrap();
    let u = small_universe(dir.path());
    assert_eq!(run(&["universe", "build", s(&u)]).0, 0);
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&u).unwrap()).unwrap();
    let obs = doc["observables"].as_array_mut().unwrap();
    obs.swap(0, 1);
    write(dir.path(), "u.json", &doc);
    let (code, _, err) = run(&["universe", "closure", s(&u)]);
    assert_eq!(code, 3);
    assert!(err.contains("hash"), "{err}");
}

#[test]
fn schema_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let dep = write(dir.path(), "dep.json", &channel(2, &depolarizing_choi()));
    let no_version = write(dir.path(), "a.json", &json!({ "kind": "observable", "bloch": [1.0, 0.0, 0.0] }));
    let (code, _, err) = run(&["check", "compatible", s(&no_version), s(&dep)]);
    assert_eq!(code, 3);
    assert!(err.contains("version"), "{err}");

    let bad_choi = write(dir.path(), "c.json", &json!({ "version": 1, "kind": "channel", "dim_in": 2, "dim_out": 2 }));
    let a = write(dir.path(), "b.json", &qubit([1.0, 0.0, 0.0]));
    let (code, _, err) = run(&["check", "compatible", s(&a), s(&bad_choi)]);
    assert_eq!(code, 3);
    assert!(err.contains("choi"), "{err}");
}

#[test]
fn reports_go_to_out_path() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.json", &qubit([0.0, 0.0, 1.0]));
    let out = dir.path().join("report.json");
    let (code, _, _) = run(&["check", "joint-meas", s(&a), s(&a), "--out", s(&out), "--json-indent", "0"]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(!text.trim_end().contains('\n'));
    let report: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["verdict"]["answer"], "Yes");
}

#[test]
fn reproduce_three_dim_passes() {
    let (code, report, _) = run(&["reproduce", "three-dim", "--json-indent", "0"]);
    assert_eq!(code, 0, "{report}");
    assert!(report["claims"].as_array().unwrap().iter().all(|c| c["status"] == "Pass"));
}
