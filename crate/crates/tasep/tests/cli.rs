//! End-to-end tests of the command-line binary: exit codes, output
//! formats, determinism, and the documented failure modes.

use std::path::PathBuf;
use std::process::{Command, Output};
use tasep::correlations::embed;
use tasep::master::MasterState;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tasep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 output")
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("tasep_cli_e2e_{name}"))
}

#[test]
fn point_mass_profile_appears_in_site_order() {
    let output = run(&[
        "density",
        "--n",
        "3",
        "--alpha",
        "1",
        "--beta",
        "1",
        "--models",
        "master",
        "--init",
        "point:101",
        "--evolve",
        "0",
    ]);
    assert!(output.status.success());
    let lines: Vec<String> =
        stdout(&output).lines().map(str::to_string).collect();
    assert_eq!(lines[0], "site,master");
    assert_eq!(lines[1], "2,1.00000000000e0");
    assert_eq!(lines[2], "1,0.00000000000e0");
    assert_eq!(lines[3], "0,1.00000000000e0");
}

#[test]
fn steady_density_table_lists_models_in_request_order() {
    let output = run(&[
        "density",
        "--n",
        "5",
        "--alpha",
        "0.15",
        "--beta",
        "0.15",
        "--h",
        "uniform:1",
        "--models",
        "master,mf:1,mf:2,mf:3",
        "--steady",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "site,master,mf:1,mf:2,mf:3");
    assert_eq!(lines.len(), 6);
    // Higher order tracks the master column more closely. The central
    // site is skipped by construction: at alpha = beta the particle-hole
    // symmetry pins it to 1/2 in every model.
    let mut err1 = 0.0f64;
    let mut err3 = 0.0f64;
    for line in &lines[1..] {
        let row: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|v| v.parse().unwrap())
            .collect();
        err1 = err1.max((row[1] - row[0]).abs());
        err3 = err3.max((row[3] - row[0]).abs());
    }
    assert!(err3 < err1, "max errors mf:1 {err1:.3e}, mf:3 {err3:.3e}");
}

#[test]
fn seeded_ssa_runs_are_byte_identical() {
    let args = [
        "ssa", "--n", "3", "--alpha", "1", "--beta", "1", "--samples",
        "4", "--burn", "5", "--measure", "50", "--seed", "42",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let text = stdout(&first);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "site,density,stderr");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2,"));
    assert!(lines[3].starts_with("0,"));
}

#[test]
fn steady_command_emits_solver_report_json() {
    let output = run(&[
        "steady", "--n", "6", "--alpha", "0.3", "--beta", "0.7",
        "--models", "mf:2",
    ]);
    assert!(output.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&stdout(&output)).expect("valid json");
    assert_eq!(doc["n"], 6);
    let model = &doc["models"][0];
    assert_eq!(model["model"], "mf:2");
    assert_eq!(model["converged"], true);
    assert!(model["residual_norm"].as_f64().unwrap() < 1e-11);
    assert!(model["interior_margin"].as_f64().unwrap() > 0.0);
    assert_eq!(model["density"].as_array().unwrap().len(), 6);
}

#[test]
fn sweep_labels_the_reference_phase_points() {
    let output = run(&[
        "sweep",
        "--n",
        "6",
        "--alpha-grid",
        "0.15:0.75:2",
        "--beta-grid",
        "0.15:0.75:2",
        "--model",
        "mf:1",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha,beta,production_rate,mid_density,phase");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].ends_with(",critical"), "{}", lines[1]);
    assert!(lines[2].ends_with(",LD"), "{}", lines[2]);
    assert!(lines[3].ends_with(",HD"), "{}", lines[3]);
    assert!(lines[4].ends_with(",MC"), "{}", lines[4]);
}

#[test]
fn validate_passes_on_defaults_and_writes_the_report() {
    let report_path = temp_path("validate_report.json");
    let output = run(&[
        "validate",
        "--n",
        "4",
        "--m-max",
        "2",
        "--output",
        report_path.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(&report_path).unwrap(),
    )
    .unwrap();
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["suites"].as_array().unwrap().len(), 7);
    std::fs::remove_file(&report_path).ok();
}

#[test]
fn corrupted_consistency_input_fails_validation_with_exit_code_1() {
    let z = MasterState::uniform(5).unwrap();
    let x = embed(&z, 2).unwrap();
    let mut values = x.values().to_vec();
    values[x.layout().flat(2, 1, 0b01)] += 1e-3;
    let state_path = temp_path("corrupted_state.json");
    std::fs::write(
        &state_path,
        serde_json::to_string(&serde_json::json!({
            "n": 5,
            "max_order": 2,
            "values": values,
        }))
        .unwrap(),
    )
    .unwrap();
    let output = run(&[
        "validate",
        "--n",
        "5",
        "--m-max",
        "2",
        "--init",
        &format!("file:{}", state_path.display()),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let doc: serde_json::Value =
        serde_json::from_str(&stdout(&output)).expect("report emitted");
    assert_eq!(doc["passed"], false);
    let consistency = doc["suites"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["name"] == "consistency")
        .unwrap();
    assert_eq!(consistency["passed"], false);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("consistency"), "stderr: {stderr}");
    std::fs::remove_file(&state_path).ok();
}

#[test]
fn invalid_inputs_exit_with_code_3() {
    let bad_model = run(&[
        "density", "--n", "4", "--alpha", "1", "--beta", "1",
        "--models", "exact", "--steady",
    ]);
    assert_eq!(bad_model.status.code(), Some(3));

    let missing_mode = run(&[
        "density", "--n", "4", "--alpha", "1", "--beta", "1",
        "--models", "master",
    ]);
    assert_eq!(missing_mode.status.code(), Some(3));

    let oversize = run(&[
        "density", "--n", "13", "--alpha", "1", "--beta", "1",
        "--models", "full", "--steady",
    ]);
    assert_eq!(oversize.status.code(), Some(3));

    let unknown_flag = run(&["density", "--frobnicate"]);
    assert_eq!(unknown_flag.status.code(), Some(3));

    let bad_order = run(&[
        "density", "--n", "4", "--alpha", "1", "--beta", "1",
        "--models", "mf:4", "--steady",
    ]);
    assert_eq!(bad_order.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&bad_order.stderr);
    assert!(stderr.contains("mf:4"), "stderr: {stderr}");
}

#[test]
fn config_file_drives_a_run_and_flags_override_it() {
    let config_path = temp_path("run_config.json");
    std::fs::write(
        &config_path,
        r#"{"n": 4, "alpha": 0.2, "beta": 0.9, "models": "mf:1", "steady": true}"#,
    )
    .unwrap();
    let from_file = run(&[
        "density",
        "--config",
        config_path.to_str().unwrap(),
    ]);
    assert!(from_file.status.success());
    let text = stdout(&from_file);
    assert!(text.starts_with("site,mf:1\n"));

    let overridden = run(&[
        "density",
        "--config",
        config_path.to_str().unwrap(),
        "--models",
        "master",
    ]);
    assert!(overridden.status.success());
    assert!(stdout(&overridden).starts_with("site,master\n"));

    let unknown_field = temp_path("bad_config.json");
    std::fs::write(&unknown_field, r#"{"n": 4, "alpah": 0.2}"#).unwrap();
    let rejected = run(&[
        "density",
        "--config",
        unknown_field.to_str().unwrap(),
    ]);
    assert_eq!(rejected.status.code(), Some(3));
    assert!(
        String::from_utf8_lossy(&rejected.stderr).contains("alpah")
    );
    std::fs::remove_file(&config_path).ok();
    std::fs::remove_file(&unknown_field).ok();
}

#[test]
fn output_flag_writes_the_csv_to_disk() {
    let out_path = temp_path("density.csv");
    let output = run(&[
        "density",
        "--n",
        "3",
        "--alpha",
        "1",
        "--beta",
        "1",
        "--models",
        "master,full",
        "--steady",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert!(stdout(&output).is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("site,master,full\n"));
    assert_eq!(text.lines().count(), 4);
    std::fs::remove_file(&out_path).ok();
}
