use std::fs;

use roughflow::harness::{refinement_study, run, ExperimentConfig, MANIFEST_NAME};
use roughflow::io::read_rough_path_csv;
use roughflow::Error;

fn config(src: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(src).unwrap()
}

const LIFT: &str = r#"
scenario = "lift"
[driver]
kind = "analytic"
components = ["t", "t^2"]
[grid]
steps = 1
T = 1.0
"#;

#[test]
fn lift_scenario_writes_the_iterated_integrals_of_t_and_t_squared() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config(LIFT), dir.path()).unwrap();
    let l1 = fs::read_to_string(dir.path().join("rough_path_level1.csv")).unwrap();
    let l2 = fs::read_to_string(dir.path().join("rough_path_level2.csv")).unwrap();
    let path = read_rough_path_csv(&l1, &l2, 0.5).unwrap();
    // ∫t dt, ∫t d(t²) = 2/3, ∫t² dt = 1/3, ∫t² d(t²) = 1/2
    let oracle = [0.5, 2.0 / 3.0, 1.0 / 3.0, 0.5];
    for (a, b) in path.second_level(0).iter().zip(oracle) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    assert!(m.residual("driver_chen_residual").unwrap().as_f64().unwrap() < 1e-12);
    let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(names, ["rough_path_level1.csv", "rough_path_level2.csv"]);
}

#[test]
fn every_file_is_listed_with_its_hash() {
    let dir = tempfile::tempdir().unwrap();
    let src = LIFT.replace("steps = 1", "steps = 8").replace("kind = \"analytic\"\ncomponents = [\"t\", \"t^2\"]", "kind = \"fbm\"\nH = 0.4\nK = 2\nseed = 5");
    let m = run(&config(&src), dir.path()).unwrap();
    let mut on_disk: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != MANIFEST_NAME)
        .collect();
    on_disk.sort();
    let listed: Vec<String> = m.files.iter().map(|f| f.path.clone()).collect();
    assert_eq!(on_disk, listed);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap()).unwrap();
    assert_eq!(manifest["inventory_sha256"], m.inventory_sha256);
    assert_eq!(manifest["config"]["driver"]["H"], 0.4);
}

#[test]
fn rerun_into_the_same_directory_replaces_old_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let euler = r#"
scenario = "euler2d"
[driver]
kind = "brownian"
K = 2
seed = 1
fine_resolution = 1
[grid]
n = 16
steps = 8
T = 0.1
[fields]
preset = "taylor_green_shift"
"#;
    run(&config(euler), dir.path()).unwrap();
    assert!(dir.path().join("snapshots.bin").exists());
    run(&config(LIFT), dir.path()).unwrap();
    assert!(!dir.path().join("snapshots.bin").exists());
    assert!(dir.path().join("rough_path_level1.csv").exists());
}

#[test]
fn stationary_taylor_green_without_noise() {
    let dir = tempfile::tempdir().unwrap();
    let src = r#"
scenario = "euler2d"
[driver]
kind = "brownian"
K = 1
seed = 3
fine_resolution = 1
[grid]
n = 32
steps = 16
T = 0.5
[fields]
preset = "taylor_green"
"#;
    let m = run(&config(src), dir.path()).unwrap();
    for name in ["enstrophy", "casimir4"] {
        let drift = m.residual(&format!("{name}_relative_drift")).unwrap().as_f64().unwrap();
        assert!(drift < 1e-12, "{name}: {drift}");
    }
    assert_eq!(m.residual("audit_pass"), Some(&serde_json::json!(true)), "{:?}", m.residuals);
    let csv = fs::read_to_string(dir.path().join("invariants.csv")).unwrap();
    assert!(csv.starts_with("t,energy,enstrophy,casimir4,mean_omega\n"));
    assert_eq!(csv.lines().count(), 18);
}

#[test]
fn identical_configuration_gives_identical_hashes() {
    let src = r#"
scenario = "burgers"
[driver]
kind = "fbm"
H = 0.4
K = 1
seed = 17
fine_resolution = 2
[grid]
n = 32
steps = 32
T = 0.2
[fields]
preset = "burgers_sine"
"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run(&config(src), a.path()).unwrap();
    let mb = run(&config(src), b.path()).unwrap();
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.inventory_sha256, mb.inventory_sha256);
    let other = config(src).with_overrides(None, Some(18), None).unwrap();
    let c = tempfile::tempdir().unwrap();
    assert_ne!(run(&other, c.path()).unwrap().inventory_sha256, ma.inventory_sha256);
}

#[test]
fn failures_map_to_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_preset = LIFT.to_string() + "[fields]\npreset = \"nope\"\n";
    let err = run(&config(&bad_preset), dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("taylor_green"));

    let schema = LIFT.replace("steps = 1", "steps = 1\nwidth = 3");
    assert_eq!(ExperimentConfig::from_toml_str(&schema).unwrap_err().exit_code(), 2);

    let cfl = r#"
scenario = "burgers"
[driver]
kind = "analytic"
components = ["t"]
[grid]
n = 64
steps = 2
T = 1.0
[fields]
initial = "3 * sin(x)"
"#;
    let err = run(&config(cfl), dir.path()).unwrap_err();
    assert!(matches!(err, Error::Cfl { .. }), "{err}");
    assert_eq!(err.exit_code(), 3);

    let file = dir.path().join("occupied");
    fs::write(&file, "x").unwrap();
    let err = run(&config(LIFT), &file).unwrap_err();
    assert!(matches!(err, Error::Io(_)), "{err}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn linear_scalar_refinement_has_second_order() {
    let src = r#"
scenario = "rde"
[driver]
kind = "analytic"
components = ["sin(t)"]
[grid]
steps = 16
T = 1.0
[fields]
preset = "linear_scalar"
"#;
    let table = refinement_study(&config(src), 3).unwrap();
    assert_eq!(table.steps, [16, 32, 64]);
    assert!(table.order >= 2.0, "{table:?}");
    assert!(table.r_squared > 0.99, "{table:?}");
}

#[test]
fn wong_zakai_scenario_reports_levels() {
    let dir = tempfile::tempdir().unwrap();
    let src = r#"
scenario = "wong_zakai"
[driver]
kind = "brownian"
K = 2
seed = 4
fine_resolution = 1
[grid]
steps = 256
T = 1.0
[fields]
preset = "levy_area"
"#;
    let m = run(&config(src), dir.path()).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("wong_zakai.json")).unwrap()).unwrap();
    assert_eq!(report["strides"], serde_json::json!([16, 8, 4, 2]));
    assert_eq!(report["successive"].as_array().unwrap().len(), 3);
    assert!(m.residual("corrupted_to_reference").is_some());
}
