//! End-to-end checks of the `aoi` binary: CSV contracts, determinism and
//! exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aoi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aoi"))
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn base_config() -> &'static str {
    r#"{
        "system": {
            "lambda": 10.0,
            "sensing": { "atoms": [[1.0, 0.8], [21.0, 0.2]] },
            "transmission": { "mean": 1.0, "variance": 1.0 }
        },
        "solve_peak": { "lambda_grid": [0.5, 1.0, 10.0] },
        "eval": { "policy": { "type": "no-threshold" } },
        "simulate": { "policy": { "type": "age-threshold", "w_th": 6.0 },
                      "num_departures": 5000, "num_batches": 16, "seed": 3 },
        "validate": { "policies": [ { "type": "no-threshold" } ],
                      "num_departures": 2000, "seeds": [5] }
    }"#
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).unwrap()
}

#[test]
fn solve_peak_emits_benchmark_row_and_dominance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), base_config());
    let out = aoi()
        .args(["solve-peak", "--config", &config])
        .output()
        .unwrap();
    let csv = stdout_of(&out);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "lambda,w_th,peak_opt,peak_no_threshold,gap"
    );
    let mut prev_gap = f64::NEG_INFINITY;
    let mut saw_benchmark = false;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5);
        let peak_opt: f64 = fields[2].parse().unwrap();
        let baseline: f64 = fields[3].parse().unwrap();
        let gap: f64 = fields[4].parse().unwrap();
        assert!(peak_opt <= baseline);
        assert!(gap >= prev_gap - 1e-9);
        prev_gap = gap;
        if fields[0] == "10" {
            assert_eq!(fields[3], "12.3");
            saw_benchmark = true;
        }
    }
    assert!(saw_benchmark);
}

#[test]
fn simulate_output_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), base_config());
    let single = aoi()
        .args(["simulate", "--config", &config, "--threads", "1"])
        .output()
        .unwrap();
    let many = aoi()
        .args(["simulate", "--config", &config, "--threads", "4"])
        .output()
        .unwrap();
    assert_eq!(stdout_of(&single), stdout_of(&many));

    // And writing to a file produces the same bytes as stdout.
    let out_path = dir.path().join("sim.csv");
    let to_file = aoi()
        .args([
            "simulate",
            "--config",
            &config,
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(to_file.status.success());
    assert_eq!(fs::read_to_string(&out_path).unwrap(), stdout_of(&single));
}

#[test]
fn seed_and_departure_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), base_config());
    let a = stdout_of(
        &aoi()
            .args(["simulate", "--config", &config, "--seed", "1"])
            .output()
            .unwrap(),
    );
    let b = stdout_of(
        &aoi()
            .args(["simulate", "--config", &config, "--seed", "2"])
            .output()
            .unwrap(),
    );
    assert_ne!(a, b);
    // Departure override shrinks the run but keeps the CSV shape.
    let c = stdout_of(
        &aoi()
            .args(["simulate", "--config", &config, "--departures", "1000"])
            .output()
            .unwrap(),
    );
    assert_eq!(c.lines().count(), 9);
}

#[test]
fn eval_reports_analytical_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), base_config());
    let csv = stdout_of(&aoi().args(["eval", "--config", &config]).output().unwrap());
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "policy,mean_attempts,mean_final_age,peak_aoi,avg_aoi,avg_aoi_exact,k_criterion,x_star"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("no-threshold,1,5.1,12.3,"));
}

#[test]
fn validate_passes_on_exact_policy() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), base_config());
    let out = aoi()
        .args(["validate", "--config", &config])
        .output()
        .unwrap();
    let csv = stdout_of(&out);
    assert!(csv.starts_with(
        "policy,seed,quantity,analytical,simulated,halfwidth,z_score,expected_exact,flagged\n"
    ));
    assert_eq!(csv.lines().count(), 7); // header + 6 quantities
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = aoi()
        .args(["solve-peak", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
}

#[test]
fn malformed_json_reports_position_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "{ \"system\": \n garbage }");
    let out = aoi()
        .args(["solve-peak", "--config", &config])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line"), "no position in: {stderr}");
}

#[test]
fn missing_command_block_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{ "system": { "lambda": 1.0, "sensing": { "atoms": [[1.0, 1.0]] },
             "transmission": { "mean": 1.0, "variance": 0.0 } } }"#,
    );
    let out = aoi()
        .args(["avg-sweep", "--config", &config])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("avg_sweep"));
}

#[test]
fn invalid_policy_parameters_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    // Threshold below the sensing support can never accept a packet.
    let config = write_config(
        dir.path(),
        r#"{
            "system": { "lambda": 1.0, "sensing": { "atoms": [[1.0, 1.0]] },
                        "transmission": { "mean": 1.0, "variance": 0.0 } },
            "simulate": { "policy": { "type": "age-threshold", "w_th": 0.5 },
                          "num_departures": 1000 }
        }"#,
    );
    let out = aoi()
        .args(["simulate", "--config", &config])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
