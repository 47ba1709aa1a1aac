use std::path::Path;
use std::process::{Command, Output};

use jetgauge::report::Report;

fn jetgauge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetgauge"))
        .args(args)
        .env_remove("JETGAUGE_FIXTURES")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Report {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn group_suite_passes_with_curvature_check() {
    let out = jetgauge(&["--suite", "group", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out);
    assert_eq!(rep.schema, 1);
    assert_eq!(rep.seed, 42);
    let c = rep.check("curvature_of_pullback").unwrap();
    assert!(c.max_residual.unwrap() <= 1e-9);
    assert!(c.runtime_ms.is_none());
    let ids: Vec<&str> = rep.checks.iter().map(|c| c.id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn reports_are_byte_identical() {
    let a = jetgauge(&["--suite", "elasticity", "--seed", "7", "--no-timestamp"]);
    let b = jetgauge(&["--suite", "elasticity", "--seed", "7", "--no-timestamp"]);
    assert_eq!(a.stdout, b.stdout);
    let c = jetgauge(&["--suite", "elasticity", "--seed", "8", "--no-timestamp"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn timestamps_are_reported_by_default() {
    let out = jetgauge(&["--suite", "swell"]);
    assert!(report(&out).checks.iter().all(|c| c.runtime_ms.is_some()));
}

#[test]
fn swell_exports() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("swell.csv");
    let svg = dir.path().join("swell.svg");
    let json = dir.path().join("report.json");
    let out = jetgauge(&[
        "--suite",
        "swell",
        "--csv",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
        "--out",
        json.to_str().unwrap(),
        "--swell-k",
        "0.2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let rep: Report = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(rep.passed);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,a,b,x,y,xbar,ybar"));
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let r = (v[3] - v[1]).hypot(v[4] - v[2]);
        assert!((r - (-0.2 * v[2]).exp()).abs() < 1e-10);
    }
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn unwritable_csv_path_is_an_error() {
    let out = jetgauge(&["--suite", "swell", "--csv", "/nonexistent/dir/swell.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_suite_exits_with_usage_error() {
    let out = jetgauge(&["--suite", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn malformed_fixture_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"dim\": 2").unwrap();
    let out = jetgauge(&["--suite", "group", "--fixture", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed fixture"));
}

#[test]
fn failing_checks_set_exit_code() {
    // not associative: (ab)c and a(bc) differ in the second slot
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(
        &path,
        r#"{"name": "broken", "dim": 2, "identity": [1, 0], "compose": "a1*b1, a1*b2 + a2*b1", "inverse": "1/a1, -a2/a1"}"#,
    )
    .unwrap();
    let out = jetgauge(&["--suite", "group", "--no-timestamp", "--fixture", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let rep = report(&out);
    assert!(!rep.passed);
    assert!(!rep.check("group_law").unwrap().passed());

    let out = jetgauge(&["--suite", "elasticity", "--tol-scale", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fixture_directory_override() {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for f in ["affine.json", "e2.json"] {
        std::fs::copy(src.join(f), dir.path().join(f)).unwrap();
    }
    let run = |d: &Path| {
        Command::new(env!("CARGO_BIN_EXE_jetgauge"))
            .args(["--suite", "group", "--no-timestamp"])
            .env("JETGAUGE_FIXTURES", d)
            .output()
            .unwrap()
    };
    let out = run(dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(out.stdout, jetgauge(&["--suite", "group", "--no-timestamp"]).stdout);

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(run(empty.path()).status.code(), Some(2));
}

#[test]
fn system_and_family_fixtures_add_checks() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys.json");
    std::fs::write(&sys, r#"{"label": "translations", "n": 1, "q": 1, "phi": ["y1_1 - 1"]}"#).unwrap();
    let out = jetgauge(&["--suite", "pseudogroup", "--no-timestamp", "--fixture", sys.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report(&out).check("closure_translations").unwrap().passed());

    let fam = dir.path().join("fam.json");
    std::fs::write(
        &fam,
        r#"{"label": "stretch", "m": 1, "n": 1, "f": "exp(x1)*y1", "box": {"lo": [-1, 0], "hi": [1, 1]}}"#,
    )
    .unwrap();
    let out = jetgauge(&["--suite", "dynamics", "--no-timestamp", "--samples", "16", "--fixture", fam.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report(&out).check("fixture_stretch_mass_conservation").unwrap().passed());
}
