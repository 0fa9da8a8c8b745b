use std::path::PathBuf;
use std::process::{Command, Output};

use bundlealg::io::{MatrixJson, TupleJson};
use bundlealg::numerics::{haar_unitary, random_phase, UnitaryMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bundlealg(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bundlealg"));
    for a in args {
        if a.ends_with(".json") && !a.contains('/') {
            cmd.arg(fixture(a));
        } else {
            cmd.arg(a);
        }
    }
    cmd.env_remove("BUNDLEALG_SEED").output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    bundlealg(args).status.code().unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    serde_json::from_slice(&bundlealg(&full).stdout).unwrap()
}

#[test]
fn classify_exit_codes() {
    assert_eq!(code(&["classify", "--a", "id2.json", "--b", "id2.json", "--grid", "64"]), 0);
    assert_eq!(code(&["classify", "--a", "d1m1.json", "--b", "dimi.json", "--mode", "strict", "--grid", "64"]), 3);
    assert_eq!(code(&["classify", "--a", "d1m1.json", "--b", "dimi.json", "--mode", "pu", "--grid", "64"]), 0);
    assert_eq!(code(&["classify", "--a", "id2.json", "--b", "d1m1.json", "--grid", "64"]), 3);
    assert_eq!(code(&["classify", "--a", "bad.json", "--b", "id2.json"]), 1);
    assert_eq!(code(&["classify", "--a", "missing.json", "--b", "id2.json"]), 1);
    assert_eq!(code(&["--tol", "-1", "classify", "--a", "id2.json", "--b", "id2.json"]), 1);
}

#[test]
fn input_errors_name_the_field() {
    let out = bundlealg(&["classify", "--a", "nonunitary.json", "--b", "id2.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("nonunitary.json") && err.contains("`A`"), "{err}");

    let out = bundlealg(&["classify-tuple", "--a", "id2.json", "--b", "tuple_b.json"]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("generators"), "{err}");
}

#[test]
fn classify_json_report() {
    let r = json(&["classify", "--a", "d1m1.json", "--b", "dimi.json", "--grid", "64"]);
    let eq = &r["equivalence"];
    assert_eq!(eq["verdict"], "equivalent");
    let lambda: Vec<f64> = serde_json::from_value(eq["lambda"].clone()).unwrap();
    assert!((lambda[0].abs() - 0.0).abs() < 1e-15 && (lambda[1].abs() - 1.0).abs() < 1e-15);
    let v: MatrixJson = serde_json::from_value(eq["V"].clone()).unwrap();
    UnitaryMatrix::new(v.0).unwrap();
    assert_eq!(r["verification"]["isometry_deviation"].as_array().unwrap().len(), 3);

    let r = json(&["classify", "--a", "id2.json", "--b", "d1m1.json", "--grid", "64"]);
    assert_eq!(r["equivalence"]["verdict"], "not_equivalent");
    assert_eq!(r["certificate"]["invariant_b"][1].as_f64().unwrap(), std::f64::consts::PI);
}

fn write_tuple(dir: &tempfile::TempDir, name: &str, gens: &[UnitaryMatrix]) -> String {
    let doc = TupleJson { generators: gens.iter().map(|g| MatrixJson(g.matrix().clone())).collect() };
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn classify_tuple_exit_codes() {
    assert_eq!(code(&["classify-tuple", "--a", "tuple_a.json", "--b", "tuple_b.json"]), 3);
    assert_eq!(code(&["classify-tuple", "--a", "tuple_noncommuting.json", "--b", "tuple_b.json"]), 1);
    assert_eq!(code(&["classify-tuple", "--a", "tuple_a.json", "--b", "tuple_single.json"]), 1);

    let single = code(&["classify-tuple", "--a", "tuple_single.json", "--b", "tuple_single_b.json"]);
    let pair = code(&["classify", "--a", "d1m1.json", "--b", "dimi.json", "--grid", "64"]);
    assert_eq!(single, pair);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = haar_unitary(&mut rng, 3);
    let gens: Vec<UnitaryMatrix> = (0..2)
        .map(|_| {
            let d: Vec<_> = (0..3).map(|_| random_phase(&mut rng)).collect();
            UnitaryMatrix::new(u.conjugate(UnitaryMatrix::diagonal(&d).unwrap().matrix())).unwrap()
        })
        .collect();
    let w = haar_unitary(&mut rng, 3);
    let other: Vec<UnitaryMatrix> =
        gens.iter().map(|g| UnitaryMatrix::new(w.conjugate(&(g.matrix() * random_phase(&mut rng)))).unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (write_tuple(&dir, "a.json", &gens), write_tuple(&dir, "b.json", &other));
    let r = json(&["classify-tuple", "--a", &a, "--b", &b]);
    assert_eq!(r["verdict"], "equivalent");
    assert_eq!(r["lambdas"].as_array().unwrap().len(), 2);
    assert_eq!(code(&["classify-tuple", "--a", &a, "--b", &b]), 0);
}

#[test]
fn verify_sections() {
    assert_eq!(code(&["verify", "--section", "family_d.json"]), 0);
    assert_eq!(code(&["verify", "--section", "zero.json"]), 0);
    assert_eq!(code(&["verify", "--section", "corrupt_exponent.json"]), 2);
    let r = json(&["verify", "--section", "corrupt_exponent.json"]);
    assert_eq!(r["pass"], false);
    let failing: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failing.contains(&"concomitant residual"));
}

#[test]
fn norms() {
    let r = json(&["norm", "--section", "scalar_w.json"]);
    assert!((r["sup"]["value"].as_f64().unwrap() - 2.0).abs() <= 1e-12);
    let r = json(&["norm", "--section", "family_d.json"]);
    assert!((r["sup"]["value"].as_f64().unwrap() - 3.0).abs() <= 1e-12);
    let level1 = r["complete"].as_f64().unwrap();
    let r = json(&["norm", "--section", "family_d.json", "--levels", "2"]);
    assert_eq!(r["complete"].as_f64().unwrap(), level1);
    assert_eq!(code(&["norm", "--section", "family_d.json", "--levels", "0"]), 1);
    assert_eq!(code(&["norm"]), 1);
}

#[test]
fn export_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    let out_s = out.to_string_lossy().into_owned();
    assert_eq!(
        code(&["export-grid", "--section", "family_d.json", "--radial", "5", "--angular", "7", "--out", &out_s]),
        0
    );
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,theta,opnorm,abs_f_11,abs_f_12,abs_f_21,abs_f_22");
    assert_eq!(lines.len(), 1 + 5 * 7);
    let opnorms: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(opnorms.iter().all(|&x| x == opnorms[0]));

    let stdout = bundlealg(&["export-grid", "--section", "family_d.json", "--radial", "5", "--angular", "7"]).stdout;
    assert_eq!(String::from_utf8(stdout).unwrap(), text);
}

#[test]
fn demo_branches_and_determinism() {
    assert_eq!(code(&["--grid", "64", "demo", "--branch", "equivalent"]), 0);
    assert_eq!(code(&["--grid", "64", "demo", "--branch", "inequivalent"]), 3);
    let a = bundlealg(&["--format", "json", "--grid", "64", "--seed", "5", "demo"]).stdout;
    let b = bundlealg(&["--format", "json", "--grid", "64", "--seed", "5", "demo"]).stdout;
    assert_eq!(a, b);
    let c = bundlealg(&["--format", "json", "--grid", "64", "--seed", "6", "demo"]).stdout;
    assert_ne!(a, c);

    let from_env = Command::new(env!("CARGO_BIN_EXE_bundlealg"))
        .args(["--format", "json", "--grid", "64", "demo"])
        .env("BUNDLEALG_SEED", "5")
        .output()
        .unwrap()
        .stdout;
    assert_eq!(from_env, a);
}

#[test]
fn emitted_matrices_round_trip_through_the_loader() {
    let r = json(&["--grid", "64", "demo", "--branch", "equivalent"]);
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, v: &Value| {
        let p = dir.path().join(name);
        std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
        p.to_string_lossy().into_owned()
    };
    let a = write("a.json", &r["A"]);
    let b = write("b.json", &r["equivalent"]["B"]);
    assert_eq!(code(&["classify", "--a", &a, "--b", &b, "--grid", "64"]), 0);
    let v = write("v.json", &r["equivalent"]["report"]["equivalence"]["V"]);
    assert_eq!(code(&["classify", "--a", &v, "--b", &v, "--grid", "64", "--levels", "1"]), 0);
}
