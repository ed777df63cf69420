use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cloneforge::format::{import_closure, SpecDoc};
use cloneforge_core::catalog::{self, CloneName};
use cloneforge_core::{CloneSpec, Modulus, OpTable};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cloneforge"));
    c.env_remove("CLONEFORGE_BUDGET");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn z4() -> Modulus {
    Modulus::new(4).unwrap()
}

fn write_table(dir: &Path, name: &str, t: &OpTable) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(t).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn write_spec(dir: &Path, name: &str, spec: &CloneSpec) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(&SpecDoc::from_spec(spec)).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_compat_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let proj = write_table(dir.path(), "proj.json", &OpTable::projection(z4(), 2, 1).unwrap());
    let out = run(&["check-compat", &proj]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["compatible"], true);

    let bad = write_table(dir.path(), "bad.json", &OpTable::new(z4(), 1, vec![0, 0, 1, 1]).unwrap());
    let out = run(&["check-compat", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    assert_eq!(report["divisors"][0]["divisor"], 2);
    assert_eq!(report["divisors"][0]["preserved"], false);

    let h = write_table(dir.path(), "h.json", &catalog::h_op(2).unwrap());
    assert_eq!(run(&["check-compat", &h]).status.code(), Some(0));

    let text = run(&["check-compat", &bad, "--format", "text"]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("mod 2: violated"));
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"modulus\": 4, \"arity\": 1, \"values\": [0, 1").unwrap();
    let out = run(&["check-compat", path_str(&broken)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed JSON"));

    let short = dir.path().join("short.json");
    std::fs::write(&short, r#"{"modulus": 4, "arity": 2, "values": [0, 1]}"#).unwrap();
    assert_eq!(run(&["check-compat", path_str(&short)]).status.code(), Some(2));

    assert_eq!(run(&["check-compat", path_str(&dir.path().join("missing.json"))]).status.code(), Some(2));
    assert_eq!(run(&["verify", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["closure", "catalog:E_2"]).status.code(), Some(2));
    assert_eq!(run(&["closure", "catalog:X_9", "--arity", "1"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn closure_counts() {
    let dir = tempfile::tempdir().unwrap();
    let consts = write_spec(dir.path(), "consts.json", &CloneSpec::new(z4(), "constants").with_constants(true));
    let out = run(&["closure", &consts, "--arity", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["count"], "6");

    // polynomial functions of degree below 6 cover every polynomial function on Z_4
    let mut functions = BTreeSet::new();
    for code in 0..4u32.pow(6) {
        let coeffs: Vec<u32> = (0..6).map(|i| code / 4u32.pow(i) % 4).collect();
        let f: Vec<u32> =
            (0..4u32).map(|x| coeffs.iter().enumerate().map(|(i, c)| c * x.pow(i as u32)).sum::<u32>() % 4).collect();
        functions.insert(f);
    }
    let out = run(&["closure", "catalog:pol", "--arity", "1"]);
    assert_eq!(json(&out)["count"], functions.len().to_string());
    assert_eq!(json(&out)["complete"], true);
}

#[test]
fn closure_output_is_thread_independent_and_importable() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let export = dir.path().join(format!("e2-{threads}.bin"));
        let out = run(&["closure", "catalog:E_2", "--arity", "2", "--threads", threads, "--output", path_str(&export)]);
        assert_eq!(out.status.code(), Some(0));
        outputs.push((out.stdout, std::fs::read(&export).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let (header, members) = import_closure(&mut outputs[0].1.as_slice()).unwrap();
    assert!(header.complete);
    assert_eq!(header.count as usize, members.len());
    assert_eq!(json_from(&outputs[0].0)["count"], header.count.to_string());
}

fn json_from(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn budget_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CloneSpec::new(z4(), "monomials").with_constants(true).with_generator("xy", catalog::xy(2).unwrap()).unwrap();
    let gens = write_spec(dir.path(), "monomials.json", &spec);
    let out = bin().args(["closure", &gens, "--arity", "2"]).env("CLONEFORGE_BUDGET", "5").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["complete"], false);
    let out = bin().args(["closure", &gens, "--arity", "2", "--budget", "100000"]).env("CLONEFORGE_BUDGET", "5").output().unwrap();
    assert_eq!(json(&out)["complete"], true);
}

#[test]
fn member_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let two_xy = write_table(dir.path(), "2xy.json", &OpTable::from_fn(z4(), 2, |x| 2 * (x[0] * x[1]) as i64).unwrap());
    let xy = write_table(dir.path(), "xy.json", &catalog::xy(2).unwrap());
    let out = run(&["member", "catalog:pol", &two_xy]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["member"], true);
    assert_eq!(run(&["member", "catalog:E_2", &xy]).status.code(), Some(1));

    let spec = catalog::reduced_spec(2, CloneName::F1).unwrap();
    let gens = write_spec(dir.path(), "f1.json", &spec);
    let own = write_table(dir.path(), "own.json", &spec.generators().last().unwrap().table);
    assert_eq!(run(&["member", &gens, &own]).status.code(), Some(0));
}

#[test]
fn includes_verdicts() {
    let out = run(&["includes", "catalog:pol", "catalog:E_2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["included"], true);
    let out = run(&["includes", "catalog:E_2", "catalog:pol"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["witness"], "xy");
}

#[test]
fn verify_subcommands() {
    for args in [
        &["verify", "G", "--p", "2", "--k", "2"][..],
        &["verify", "crt", "--m", "4", "--n", "3", "--samples", "100"],
        &["verify", "zp2", "--p", "2", "--samples", "20"],
        &["verify", "decomp", "--p", "3", "--samples", "10"],
        &["verify", "star", "--samples", "10"],
        &["verify", "ck"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
        assert_eq!(json(&out)["pass"], true);
    }
    let out = run(&["verify", "ck", "--k", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("harness  parameters"));
}

#[test]
fn report_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path: PathBuf = dir.path().join("lattice.txt");
    let out = run(&["report", "lattice", "--max-j", "2", "--arity-cap", "3", "--format", "text", "--output", path_str(&path)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("E_2 < N_2"));
}
