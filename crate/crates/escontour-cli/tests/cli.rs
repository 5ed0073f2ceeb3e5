//! End-to-end checks of the command-line surface: flags, exit codes,
//! artifact envelopes and byte determinism.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_escontour"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_reports_expected_error_level() {
    let out = run(&["solve", "--alpha", "0.975", "--r", "0.013889"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("# command = solve"));
    let est: f64 = text
        .lines()
        .find(|l| l.starts_with("est_error,"))
        .and_then(|l| l.split(',').nth(1))
        .unwrap()
        .parse()
        .unwrap();
    assert!((est - 0.05).abs() < 0.003, "est_error = {est}");
}

#[test]
fn solve_json_carries_envelope_and_sections() {
    let out = run(&["solve", "--alpha", "0.9", "--r", "0.1", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["tool"], "escontour");
    assert_eq!(v["command"], "solve");
    assert!(v["results"]["risk_report"]["est_error"].is_f64());
    assert!(v["results"]["order_params"]["q0"].is_f64());
    assert!(v["results"]["hat_params"]["lambda"].is_f64());
    assert!(v["tolerances"].is_string());
}

#[test]
fn infeasible_point_exits_3_and_names_boundary() {
    let out = run(&["solve", "--alpha", "0.975", "--r", "0.6"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("phase boundary"), "stderr: {err}");
    assert!(err.contains("0.49") || err.contains("0.5"), "stderr: {err}");
}

#[test]
fn bad_arguments_exit_2() {
    // clap usage error
    let out = run(&["solve", "--alpha", "0.9"]);
    assert_eq!(out.status.code(), Some(2));
    // semantic domain error
    let out = run(&["contour", "--metric", "bogus", "--level", "1"]);
    assert_eq!(out.status.code(), Some(2));
    // parametric needs exactly one of --q0 / --r
    let out = run(&["parametric", "--alpha", "0.9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failures_surface_as_statuses_and_codes() {
    // an unattainable error level is a per-cell no_convergence, not a crash
    let out = run(&[
        "table",
        "--estimator",
        "historical",
        "--errors",
        "1e14",
        "--alphas",
        "0.9",
    ]);
    assert!(out.status.success());
    let v = run(&[
        "table", "--estimator", "historical", "--errors", "1e14", "--alphas", "0.9",
        "--format", "json",
    ]);
    assert!(stdout(&v).contains("no_convergence"));
    // a level outside the attainable range gives an empty contour (domain error)
    let out = run(&[
        "contour",
        "--metric",
        "chi",
        "--level",
        "-1",
        "--alpha-grid",
        "0.9:0.91:0.01",
    ]);
    assert_eq!(out.status.code(), Some(2), "empty contour is a domain error");
}

#[test]
fn solve_alpha_one_uses_minimax_form() {
    let out = run(&["solve", "--alpha", "1.0", "--r", "0.3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("scaled_delta,0.33001306"), "{text}");
    assert!(text.contains("minimax"));
    let out = run(&["solve", "--alpha", "1.0", "--r", "0.6"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn parametric_round_trips_the_worked_example() {
    let out = run(&["parametric", "--alpha", "0.975", "--q0", "1.21"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let t_over_n: f64 = text
        .lines()
        .find(|l| l.starts_with("t_over_n,"))
        .and_then(|l| l.split(',').nth(1))
        .unwrap()
        .parse()
        .unwrap();
    // T = N * (T/N) for the N = 100 worked example
    assert!((100.0 * t_over_n - 682.0).abs() <= 1.0);
    // inverse direction
    let out = run(&["parametric", "--alpha", "0.975", "--r", "0.1467"]);
    assert!(stdout(&out).lines().any(|l| l.starts_with("sqrt_q0,1.09")));
}

#[test]
fn grid_emits_cell_statuses() {
    let out = run(&[
        "grid",
        "--metric",
        "est_error",
        "--alpha-grid",
        "0.9:0.91:0.01",
        "--r-grid",
        "0.1:1.3:0.4",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("alpha,r,value,status\n"));
    assert!(text.contains(",ok\n"));
    assert!(text.contains(",infeasible\n"));
    assert!(text.contains(",out_of_domain\n"));
}

#[test]
fn boundary_and_contour_emit_csv_schemas() {
    let out = run(&[
        "boundary",
        "--estimator",
        "parametric",
        "--alpha-grid",
        "0.9:0.95:0.01",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("alpha,r,status\n"));
    let out = run(&[
        "contour",
        "--metric",
        "est_error",
        "--level",
        "0.1",
        "--alpha-grid",
        "0.9:0.95:0.01",
    ]);
    let text = stdout(&out);
    assert!(text.contains("alpha,r,metric,level,branch\n"));
    assert_eq!(text.matches("est_error").count(), 6 + 1); // 6 rows + config echo
}

#[test]
fn simulate_outputs_are_byte_identical_and_seed_sensitive() {
    let args = [
        "simulate", "--dist", "gaussian", "--N", "6", "--T", "90", "--alpha", "0.9",
        "--samples", "25", "--seed", "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("# seed = 7"));
    assert!(text.contains("index,status,q0_hat"));
    let mut args2 = args;
    args2[11] = "8";
    let c = run(&args2);
    assert_ne!(a.stdout, c.stdout, "different seed must change the ensemble");
    // JSON summary carries the config echo and moments
    let mut jargs = args.to_vec();
    jargs.extend_from_slice(&["--format", "json"]);
    let j = run(&jargs);
    let v: serde_json::Value = serde_json::from_str(&stdout(&j)).unwrap();
    assert_eq!(v["results"]["config"]["n_assets"], 6);
    assert_eq!(v["results"]["feasible_fraction"], 1.0);
    assert!(v["results"]["est_error"]["mean"].is_f64());
}

#[test]
fn student_distribution_flag_parses_and_validates() {
    let out = run(&[
        "simulate", "--dist", "student:3", "--N", "4", "--T", "60, ", "--alpha", "0.9",
        "--samples", "2", "--seed", "1",
    ]);
    // trailing junk in T must be a usage error
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "simulate", "--dist", "student:2", "--N", "4", "--T", "60", "--alpha", "0.9",
        "--samples", "2", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(2), "nu <= 2 rejected");
    let out = run(&[
        "simulate", "--dist", "student:3", "--N", "4", "--T", "60", "--alpha", "0.9",
        "--samples", "2", "--seed", "1",
    ]);
    assert!(out.status.success());
}

#[test]
fn out_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("escontour-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("table.csv");
    let out = run(&[
        "table",
        "--estimator",
        "parametric",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("error,0.7,0.8"));
    std::fs::remove_dir_all(&dir).ok();
}
