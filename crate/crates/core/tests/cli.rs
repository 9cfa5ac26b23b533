use std::path::Path;
use std::process::{Command, Output};

fn kam(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kam-torus"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const RUN: &str = r#"
[alpha]
components = ["golden"]
tau = 1.5
[map]
source = "generator"
[map.spec]
MAP
[tolerances]
eps_stop = 1e-10
max_iters = 8
[step]
smallness_constant = 1e-7
[output]
trace = "NAME.csv"
chain = "NAME.chain.json"
"#;

fn write_config(dir: &Path, name: &str, map: &str) -> String {
    let file = format!("{name}.toml");
    std::fs::write(
        dir.join(&file),
        RUN.replace("MAP", map).replace("NAME", name),
    )
    .unwrap();
    file
}

#[test]
fn run_exit_codes_follow_status() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_config(
        dir.path(),
        "oracle",
        "kind = \"conjugate\"\n[map.spec.h]\ntype = \"explicit\"\nmodes = [{ k = [1], sin = 0.01 }]",
    );
    let drift = write_config(dir.path(), "drift", "kind = \"drifted\"\ndelta = [0.01]");

    let out = kam(&["run", &ok], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("oracle.csv").exists());
    assert!(dir.path().join("oracle.chain.json").exists());

    assert_eq!(kam(&["run", &drift], dir.path()).status.code(), Some(4));
    // Batch: the worst status wins.
    assert_eq!(
        kam(&["run", &ok, &drift], dir.path()).status.code(),
        Some(4)
    );
    assert_eq!(
        kam(&["run", "missing.toml"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(kam(&["unknown"], dir.path()).status.code(), Some(1));
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "[alpha]\ncomponents = [0.5]\ntau = 1.5\nextra = 1\n",
    )
    .unwrap();
    assert_eq!(kam(&["run", "bad.toml"], dir.path()).status.code(), Some(1));
}

#[test]
fn params_reports_window() {
    let dir = tempfile::tempdir().unwrap();
    let out = kam(
        &[
            "params", "--sigma", "0.5", "--lambda", "3", "--nu", "2", "--tau", "1.5", "--dim", "1",
            "--N1", "8",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["mu_window"], serde_json::json!([7.0, 8.0]));
    assert_eq!(v["validation"]["ok"], true);
    assert_eq!(v["params"]["mu"], 7.5);
    assert_eq!(v["envelopes"][0]["N"], 8);

    let out = kam(&["params", "--sigma", "0.9", "--tau", "1.5"], dir.path());
    let v = json(&out);
    assert_eq!(v["validation"]["ok"], false);
    assert!(v.get("params").is_none());
}

#[test]
fn dc_check_golden() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&kam(
        &[
            "dc-check", "--alpha", "golden", "--tau", "1.5", "--K", "100",
        ],
        dir.path(),
    ));
    assert_eq!(v["worst_k"], serde_json::json!([1]));
    let g = v["best_gamma"].as_f64().unwrap();
    assert!((g - 1.0 / (1.0 - (5f64.sqrt() - 1.0) / 2.0)).abs() < 1e-12);
}

#[test]
fn make_map_cohomology_rotation_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("spec.toml"),
        "kind = \"random-decay\"\neps = 1e-3\np = 3.0\ndegree = 5\nseed = 1\n",
    )
    .unwrap();
    let alpha = "sqrt2-1,sqrt3-1";
    let out = kam(
        &["make-map", "spec.toml", "--alpha", alpha, "--out", "f.json"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = kam(
        &[
            "cohomology",
            "f.json",
            "--alpha",
            alpha,
            "--tau",
            "2.5",
            "--N",
            "8",
            "--out",
            "phi.json",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for r in json(&out)["residual"].as_array().unwrap() {
        assert!(r.as_f64().unwrap() < 1e-15);
    }
    assert!(dir.path().join("phi.json").exists());

    let out = kam(
        &[
            "rotation",
            "f.json",
            "--samples",
            "8",
            "--iters",
            "2000",
            "--out-dir",
            "rot",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(json(&out)["rotation_inside_displacement"], true);
    for f in [
        "rotation.json",
        "birkhoff.csv",
        "displacement_hull.csv",
        "rotation_hull.csv",
    ] {
        assert!(dir.path().join("rot").join(f).exists(), "{f}");
    }
}
