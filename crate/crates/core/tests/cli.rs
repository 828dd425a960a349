use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn thinlayer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinlayer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn thickness_beyond_h0_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "geometry.r0 = 1\ngeometry.h = 1.5\n").unwrap();
    let out = thinlayer(&[
        "solve",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("h0"), "{err}");
}

#[test]
fn bad_line_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "geometry.r0 = 1\n\nsolver.K = many\n").unwrap();
    let out = thinlayer(&["solve", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("solver.K"), "{err}");
}

#[test]
fn solve_at_default_materials_passes_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = thinlayer(&[
        "solve",
        "--override",
        "geometry.h=0.05",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["h"], 0.05);
    for key in ["e_core", "e_membrane", "e_exterior"] {
        assert!(report[key].as_f64().unwrap() > 0.0);
    }
    assert_eq!(report["diagnostics"]["subdominant"], true);
    for f in ["u", "v", "v_tilde", "u0"] {
        let csv = fs::read_to_string(dir.path().join(format!("field_{f}.csv"))).unwrap();
        assert!(csv.starts_with("region,k,r,re,im\n"));
    }
}

#[test]
fn converge_outputs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        thinlayer(&["converge", "--out", path_str(d.path())]);
    }
    for f in [
        "converge.csv",
        "converge.json",
        "converge.svg",
        "study.json",
    ] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    let csv = fs::read_to_string(a.path().join("converge.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn uniform_materials_fit_is_indeterminate() {
    let dir = tempfile::tempdir().unwrap();
    let out = thinlayer(&[
        "converge",
        "--override",
        "materials.mu=2 2 2",
        "--override",
        "materials.q_m=1 -1",
        "--override",
        "materials.q_c=1 -1",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("converge.json")).unwrap())
            .unwrap();
    for ch in ["core", "membrane", "exterior", "zeroth_order"] {
        assert_eq!(report["fits"][ch]["status"], "indeterminate", "{ch}");
    }
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.json");
    let mut value = serde_json::to_value(thinlayer::study::StudyConfig::default()).unwrap();
    value["kind"] = "cell_neumann".into();
    fs::write(&cfg, serde_json::to_string(&value).unwrap()).unwrap();
    let out = thinlayer(&[
        "cell-neumann",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(dir.path().join("cell_neumann.svg").exists());
}

#[test]
fn failing_checks_give_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = thinlayer(&["diagnostics", "--out", path_str(dir.path())]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let expect = if stdout.contains("FAIL") { 1 } else { 0 };
    assert_eq!(out.status.code(), Some(expect), "{stdout}");
}
