use std::path::PathBuf;
use std::process::{Command, Output};

fn carnot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carnot")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("carnot-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const H1_RUN: &[&str] = &[
    "coarea", "run", "--group", "heisenberg(1)", "--map", "identity", "--j", "1", "--box", "0,1,0,1,0,1", "--p-grid",
    "16", "--quad", "grid:16", "--seed", "7",
];

#[test]
fn identity_run_is_equality_ok() {
    let out = carnot(H1_RUN);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["verdict"], "equality-ok");
    assert_eq!(v["j"], 1);
    assert_eq!(v["run"]["seed"], 7);
    assert_eq!(v["run"]["quad"], "grid:16");
    assert!(v["settings"]["tolerances"]["tau_eq"].is_number());
}

#[test]
fn runs_are_byte_identical() {
    let a = carnot(H1_RUN);
    let b = carnot(H1_RUN);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn dilation_run_passes() {
    let out = carnot(&[
        "coarea", "run", "--group", "heisenberg(1)", "--map", "dilate:lambda=2", "--j", "2", "--box", "0,1,0,1,0,1",
        "--p-grid", "16", "--quad", "grid:16", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_ne!(json(&out)["verdict"], "violation");
}

#[test]
fn forced_violation_exits_2() {
    let mut args = H1_RUN.to_vec();
    args.extend(["--rhs-scale", "0.5"]);
    let out = carnot(&args);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["verdict"], "violation");
    assert_eq!(v["run"]["rhs_scale"], 0.5);
}

#[test]
fn csv_rows_cover_the_grid() {
    let csv = scratch("rows.csv");
    let mut args = H1_RUN.to_vec();
    args.extend(["--csv", csv.to_str().unwrap()]);
    assert_eq!(carnot(&args).status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p2,p3,length"));
    assert_eq!(lines.count(), 16 * 16);
}

#[test]
fn usage_errors_exit_1() {
    let mut bad_j = H1_RUN.to_vec();
    bad_j[7] = "3";
    assert_eq!(carnot(&bad_j).status.code(), Some(1));
    let no_seed: Vec<&str> = H1_RUN[..H1_RUN.len() - 2].to_vec();
    assert_eq!(carnot(&no_seed).status.code(), Some(1));
    let mut odd = H1_RUN.to_vec();
    odd[11] = "15";
    assert_eq!(carnot(&odd).status.code(), Some(1));
    assert_eq!(carnot(&["coarea", "run", "--group", "nope", "--map", "identity", "--j", "1", "--box", "0,1", "--seed", "0"]).status.code(), Some(1));
    assert_eq!(carnot(&["--help"]).status.code(), Some(0));
}

#[test]
fn dumped_schema_validates() {
    let path = scratch("h1.toml");
    let out = carnot(&["schema", "dump", "heisenberg(1)", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(carnot(&["schema", "validate", path.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn schema_violations_are_named() {
    let text = String::from_utf8(carnot(&["schema", "dump", "heisenberg(1)"]).stdout).unwrap();
    let cases = [
        ("antisym.toml", text.replacen("value = \"-1\"", "value = \"1\"", 1), "antisymmetry"),
        ("grading.toml", text.replace("degrees = [1, 1, 2]", "degrees = [1, 1, 1]").replace("strata_dims = [2, 1]", "strata_dims = [3]"), "grading"),
    ];
    for (name, body, invariant) in cases {
        assert_ne!(body, text, "{name} fixture did not change the schema");
        let path = scratch(name);
        std::fs::write(&path, body).unwrap();
        let out = carnot(&["schema", "validate", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(invariant), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let path = scratch("garbled.toml");
    std::fs::write(&path, "name = \"x\"\nN = [").unwrap();
    let out = carnot(&["schema", "validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn selftest_reports() {
    let v = json(&carnot(&["selftest", "--group", "heisenberg(1)", "--samples", "2000"]));
    assert!(v["associativity"].as_f64().unwrap() <= 1e-12);
    let v = json(&carnot(&["selftest", "--group", "abelian(5)", "--samples", "500"]));
    for key in ["associativity", "inverse", "dilation", "jacobi", "conjugation"] {
        assert_eq!(v[key], 0.0, "{key}");
    }
    let v = json(&carnot(&["selftest", "--group", "free_step2(3)", "--samples", "100"]));
    assert_eq!(v["homogeneous_dim"], 9);
    assert_eq!(v["N"], 6);
}

#[test]
fn fubini_agrees() {
    let out = carnot(&["fubini", "--group", "heisenberg(1)", "--j", "2", "--f", "halfspace:k=1,c=0.5", "--box", "0,1,0,1,0,1", "--grid", "64"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["gap"].as_f64().unwrap() <= 1e-3);
    assert_eq!(v["run"]["box"], "0,1,0,1,0,1");
}
