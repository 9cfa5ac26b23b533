use kam_torus::driver::config::ExperimentConfig;
use kam_torus::driver::io::{import_map, read_json, ChainFile};
use kam_torus::driver::{
    run_and_persist, run_scheme, ConjugacyChain, NormTrace, Status, TRACE_HEADER,
};

const BASE: &str = r#"
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
smallness_constant = SMALL
"#;

fn config(map: &str, small: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(&BASE.replace("MAP", map).replace("SMALL", small)).unwrap()
}

const ORACLE: &str =
    "kind = \"conjugate\"\n[map.spec.h]\ntype = \"explicit\"\nmodes = [{ k = [1], sin = 0.01 }]";

#[test]
fn rotation_converges_immediately() {
    let out = run_scheme(&config("kind = \"drifted\"\ndelta = [0.0]", "1")).unwrap();
    assert_eq!(out.status, Status::Converged);
    assert_eq!(out.trace.rows.len(), 1);
    assert_eq!(out.trace.rows[0].n, 1);
    assert_eq!(out.summary.eps0_final, 0.0);
}

#[test]
fn oracle_run_is_superlinear_and_summable() {
    let out = run_scheme(&config(ORACLE, "1e-7")).unwrap();
    assert_eq!(out.status, Status::Converged);
    let eps: Vec<f64> = out
        .summary
        .diagnostics
        .iter()
        .map(|d| d.eps0_before)
        .chain([out.summary.eps0_final])
        .collect();
    for w in eps.windows(2) {
        assert!(w[1] < w[0]);
        if w[0] < 1e-4 {
            assert!(w[1] <= w[0].powf(1.5), "{} -> {}", w[0], w[1]);
        }
    }
    let norms = &out.chain.step_norms;
    for w in norms.windows(2) {
        assert!(w[1] < 0.5 * w[0]);
    }
    for r in out.trace.rows.iter().filter(|r| r.accepted) {
        assert!(r.drift <= r.drift_bound);
    }
}

#[test]
fn chain_is_stable_under_resolution_doubling() {
    let out = run_scheme(&config(ORACLE, "1e-7")).unwrap();
    let mut fine = ConjugacyChain::new(1, 2 * out.chain.degree);
    for phi in &out.chain.steps {
        fine.push(phi.clone()).unwrap();
    }
    assert!(fine.composed.max_diff(&out.chain.composed) <= 1e-8);
    assert!(out.chain.verify_composition(1e-9).is_ok());
}

#[test]
fn rejected_attempts_are_traced_and_retried_at_half_n() {
    // C large enough that N = 8 fails but N = 4 passes.
    let out = run_scheme(&config(ORACLE, "1e-4")).unwrap();
    let rows = &out.trace.rows;
    assert!(!rows[0].accepted && rows[0].drift.is_nan() && rows[0].phi_norm0.is_nan());
    assert_eq!((rows[0].n, rows[0].n_trunc), (1, 8));
    assert_eq!((rows[1].n, rows[1].n_trunc), (1, 4));
    assert!(rows[1].accepted);
    let rejected = rows.iter().filter(|r| !r.accepted).count();
    assert_eq!(rows.len(), out.summary.steps_accepted + rejected);
}

#[test]
fn hopeless_smallness_diverges() {
    let out = run_scheme(&config(ORACLE, "10")).unwrap();
    assert_eq!(out.status, Status::Diverged);
    assert_eq!(out.trace.rows.len(), 2);
    assert!(out.chain.steps.is_empty());
}

#[test]
fn max_iters_is_reported() {
    let mut cfg = config(ORACLE, "1e-7");
    cfg.tolerances.max_iters = 1;
    let out = run_scheme(&cfg).unwrap();
    assert_eq!(out.status, Status::MaxIters);
}

#[test]
fn outputs_are_persisted_and_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("MAP", ORACLE).replace("SMALL", "1e-7")
        + "[output]\ntrace = \"t.csv\"\nchain = \"c.json\"\nsummary = \"s.json\"\nfinal_map = \"f.json\"\n";
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, text).unwrap();
    let cfg = ExperimentConfig::from_file(&path).unwrap();
    let out = run_and_persist(&cfg).unwrap();

    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(TRACE_HEADER));
    assert_eq!(NormTrace::parse(&csv).unwrap().to_csv(), csv);
    let chain =
        ConjugacyChain::from_file(&read_json::<ChainFile>(&dir.path().join("c.json")).unwrap())
            .unwrap();
    assert_eq!(chain.steps, out.chain.steps);
    let f = import_map(&dir.path().join("f.json")).unwrap();
    assert!(f.max_diff(&out.final_map) == 0.0);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "converged");
}

#[test]
fn map_file_source_is_resolved_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = (5f64.sqrt() - 1.0) / 2.0;
    let f = kam_torus::spectral::TorusMapLift::rotation(vec![a]);
    kam_torus::driver::io::export_map(&f, &dir.path().join("m.json")).unwrap();
    let text = BASE
        .replace("[map.spec]\nMAP", "path = \"m.json\"")
        .replace("\"generator\"", "\"file\"")
        .replace("SMALL", "1");
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, text).unwrap();
    let out = run_scheme(&ExperimentConfig::from_file(&path).unwrap()).unwrap();
    assert_eq!(out.status, Status::Converged);
}

#[test]
fn dc_radius_below_schedule_is_a_config_error() {
    let text = BASE
        .replace("MAP", ORACLE)
        .replace("SMALL", "1e-7")
        .replace("tau = 1.5", "tau = 1.5\ndc_radius = 4");
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    assert!(run_scheme(&cfg).is_err());
}
