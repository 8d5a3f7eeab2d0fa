use std::process::Command;

mod common;

use common::corpus;

fn hexweb(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hexweb")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn classify_prints_a_summary() {
    let (code, stdout, _) = hexweb(&["classify", "--ode", &corpus("normal_iii.json"), "--point", "0,0,0"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("tag III"), "{stdout}");
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(hexweb(&["frobnicate"]).0, 2);
    assert_eq!(hexweb(&["classify", "--ode", &corpus("normal_i.json")]).0, 2);
    assert_eq!(hexweb(&["classify", "--ode", "/nonexistent/ode.json", "--point", "0,0,0"]).0, 2);
    let (code, _, stderr) = hexweb(&["classify", "--ode", &corpus("normal_i.json"), "--point", "0,0,1"]);
    assert_eq!(code, 2, "{stderr}");
    assert_eq!(hexweb(&["--help"]).0, 0);
}

#[test]
fn numeric_failures_exit_with_3() {
    let (code, _, stderr) = hexweb(&["normalize", "--F1", "1", "--F3", "0"]);
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("inadmissible"), "{stderr}");
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_hexweb"))
        .args(["residual", "--A", "x", "--B", "y", "--grid=-1,1,-1,1,5"])
        .env("HEXWEB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_are_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let p = path.to_str().unwrap();
    let (code, ..) = hexweb(&["residual", "--A", "2*x", "--B", "y", "--grid=-1,1,-1,1,4", "--out", p]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with('{') && text.ends_with("}\n"), "{text}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn non_hexagonal_web_is_a_precondition_failure() {
    let control = corpus("control.json");
    let (code, _, stderr) = hexweb(&["classify", "--ode", &control, "--point", "0,0,0", "--hexagonality", "walk"]);
    assert_eq!(code, 4, "{stderr}");
    let (code, _, stderr) = hexweb(&["classify", "--ode", &control, "--point", "0,0,0"]);
    assert_eq!(code, 4, "{stderr}");
}
