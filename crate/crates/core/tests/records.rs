use qexcite::experiment::{report, run_all, run_experiment, Algorithm, ExperimentConfig, ExperimentRecord};
use qexcite::protocol::Mitigation;

fn noisy_vqe(mitigation: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        "[system]\nname = \"toy-h2-like\"\n[backend]\nkind = \"shots\"\nreadout_flip = 0.02\ndepolarizing = 0.05\n\
         [run]\nalgorithm = \"vqe\"\nmitigation = \"{mitigation}\"\nseeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]\n"
    ))
    .unwrap()
}

#[test]
fn noisy_sweep_report_orders_tiers() {
    let dir = tempfile::tempdir().unwrap();
    let mut all = Vec::new();
    for m in ["none", "readout", "tomography"] {
        let written = run_all(&noisy_vqe(m), dir.path()).unwrap();
        assert_eq!(written.len(), 10);
        for (path, rec) in written {
            assert!(rec.passed(), "{:?}", rec.invariants);
            assert_eq!(ExperimentRecord::load(&path).unwrap().to_json(), rec.to_json());
            all.push(rec);
        }
    }
    let rep = report(&all).unwrap();
    assert_eq!(rep.csv.lines().count(), 31);
    let m = |tier| rep.medians[&(Algorithm::Vqe, tier, "S0".to_string())];
    assert!(m(Mitigation::None) > m(Mitigation::Readout));
    assert!(m(Mitigation::Readout) > m(Mitigation::Tomography));
}

#[test]
fn fixture_path_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::copy(fixtures.join("near-degenerate.fcidump"), dir.path().join("nd.fcidump")).unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, "[system]\nfcidump = \"nd.fcidump\"\n[run]\nalgorithm = \"vqd\"\n").unwrap();
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    let rec = run_experiment(&cfg, 0).unwrap();
    assert_eq!(rec.system, "nd");
    assert!(rec.passed(), "{:?}", rec.invariants);
    let gap = rec.energies.delta_est().unwrap();
    assert!((gap - 2e-4).abs() < 1e-6, "{gap}");
}

#[test]
fn solver_failure_is_recorded_not_raised() {
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/three-orbital.fcidump");
    let cfg = ExperimentConfig::from_toml(&format!(
        "[system]\nfcidump = {:?}\n[backend]\nkind = \"shots\"\n[run]\nalgorithm = \"vqe\"\nmitigation = \"tomography\"\n\
         [optimizer]\nmax_iterations = 20\n[device]\nenergy_repetitions = 1\ncalibration_shots = 256\n",
        fixture.to_string_lossy()
    ))
    .unwrap();
    let rec = run_experiment(&cfg, 0).unwrap();
    assert_eq!(rec.n_qubits, 4);
    assert!(rec.error.as_deref().is_some_and(|e| e.contains("two qubits")), "{:?}", rec.error);
    assert!(!rec.passed());
    assert!(!rec.invariants[0].passed);
    let back = ExperimentRecord::from_json(&rec.to_json()).unwrap();
    assert_eq!(back.error, rec.error);
}
