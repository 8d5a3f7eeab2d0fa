#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn corpus(name: &str) -> String {
    manifest_dir().join("corpus").join(name).to_string_lossy().into_owned()
}

pub fn golden_dir() -> PathBuf {
    manifest_dir().join("tests").join("golden")
}

/// A CLI invocation whose output file is compared byte for byte.
pub struct Case {
    pub name: &'static str,
    pub ext: &'static str,
    pub args: Vec<String>,
}

fn case(name: &'static str, ext: &'static str, args: &[&str]) -> Case {
    Case { name, ext, args: args.iter().map(|s| s.to_string()).collect() }
}

pub fn render_cases() -> Vec<Case> {
    let render = |name, file: &str, region: &str, swap: bool| {
        let mut c = case(name, "svg", &["render", "--ode", &corpus(file), &format!("--region={region}")]);
        if swap {
            c.args.push("--swap-axes".into());
        }
        c
    };
    vec![
        render("render_i", "normal_i.json", "-1,1,-1,1", false),
        render("render_ii", "normal_ii.json", "-1,1,-1,1", true),
        render("render_iii", "normal_iii.json", "-1,1,0,2", false),
        render("render_iv", "normal_iv.json", "0,2,-1,1", true),
    ]
}

pub fn cases() -> Vec<Case> {
    let mut out = Vec::new();
    for (name, file) in [
        ("classify_i", "normal_i.json"),
        ("classify_ii", "normal_ii.json"),
        ("classify_iii", "normal_iii.json"),
        ("classify_iv", "normal_iv.json"),
        ("classify_v", "normal_v.json"),
        ("classify_singular_surface", "singular_surface.json"),
    ] {
        out.push(case(name, "json", &["classify", "--ode", &corpus(file), "--point", "0,0,0"]));
    }
    out.push(case("roots_control", "json", &["roots", "--ode", &corpus("control.json"), "--point=-1,0.1"]));
    out.push(case("residual_control", "json", &["residual", "--A", "x", "--B", "y", "--grid=-1,1,-1,1,20"]));
    out.push(case("hexagon_control", "json", &["hexagon", "--ode", &corpus("control.json"), "--center=-1,0.1"]));
    out.push(case("hexagon_i", "json", &["hexagon", "--ode", &corpus("normal_i.json"), "--center=-1,0.1"]));
    out.push(case("curvature_control", "json", &["curvature", "--ode", &corpus("control.json"), "--point=-1,0.1"]));
    out.push(case(
        "trace_i",
        "json",
        &["trace", "--ode", &corpus("normal_i.json"), "--start=-1,0.099875,0.05", "--integral", "p^2*(x + 3*p^2/8)^3"],
    ));
    out.push(case("generate_worked_example", "json", &["generate", "--config", &corpus("worked_example.json")]));
    out.push(case("normalize_scaled", "json", &["normalize", "--F1", "3*B*(1 + A/10)", "--F3", "-A*(1 + A/10)"]));
    out.extend(render_cases());
    out
}

/// Runs `case` writing into `dir`; returns the exit code and the output bytes.
pub fn run_case(case: &Case, dir: &Path) -> (i32, Vec<u8>) {
    let path = dir.join(format!("{}.{}", case.name, case.ext));
    let mut argv = vec!["hexweb".to_string()];
    argv.extend(case.args.iter().cloned());
    argv.push("--out".into());
    argv.push(path.to_string_lossy().into_owned());
    let code = hexweb_cli::run(argv);
    (code, std::fs::read(&path).unwrap_or_default())
}

pub fn golden_path(case: &Case) -> PathBuf {
    golden_dir().join(format!("{}.{}", case.name, case.ext))
}
