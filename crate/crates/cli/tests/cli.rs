//! End-to-end CLI behavior: exit codes, file outputs, pipelines.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_l1phase"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("spawn l1phase");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn threshold_all_methods_agree() {
    let (code, stdout, _) = run(&["threshold", "--alpha", "0.5", "--method", "all"]);
    assert_eq!(code, 0);
    let rows: Vec<&str> = stdout.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    let betas: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .collect();
    for i in 0..3 {
        for j in i + 1..3 {
            assert!((betas[i] - betas[j]).abs() <= 1e-4, "rows disagree: {stdout}");
        }
    }
}

#[test]
fn threshold_limit_and_validation() {
    let (code, stdout, _) = run(&["threshold", "--alpha", "1.0", "--method", "fund"]);
    assert_eq!(code, 0);
    let beta: f64 = stdout.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(beta, 1.0);

    let (code, _, stderr) = run(&["threshold", "--alpha", "1.5"]);
    assert_eq!(code, 2, "stderr: {stderr}");
    let (code, _, _) = run(&["threshold", "--alpha", "0.5", "--method", "nope"]);
    assert_eq!(code, 2);
    // unknown flag: clap usage error
    let (code, _, _) = run(&["threshold", "--alpha", "0.5", "--bogus"]);
    assert_eq!(code, 2);
}

#[test]
fn curve_writes_monotone_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let (code, stdout, stderr) = run(&[
        "curve",
        "--grid",
        "0.05:0.95:0.05",
        "--method",
        "fund",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {stdout} stderr: {stderr}");
    let points = l1phase_core::harness::load_curve_csv(&path).unwrap();
    assert_eq!(points.len(), 19);
    for w in points.windows(2) {
        assert!(w[1].alpha > w[0].alpha);
        assert!(w[1].beta_w >= w[0].beta_w, "not monotone: {w:?}");
    }
    // reproduction line present
    let raw = std::fs::read_to_string(&path).unwrap();
    assert!(raw.starts_with("# l1phase "));
}

#[test]
fn curve_unwritable_out_fails() {
    let (code, _, stderr) = run(&[
        "curve",
        "--grid",
        "0.5:0.5:0.1",
        "--method",
        "fund",
        "--out",
        "/nonexistent-dir/deep/curve.csv",
    ]);
    assert_eq!(code, 1);
    assert!(!stderr.is_empty());
}

#[test]
fn equivalence_exit_codes() {
    let (code, stdout, _) = run(&["equivalence", "--grid", "0.2:0.8:0.3"]);
    assert_eq!(code, 0, "report: {stdout}");
    assert!(stdout.contains("PASS"));

    // tolerance tighter than the root finders can certify: failure is exit 1
    let (code, stdout, _) = run(&["equivalence", "--grid", "0.5:0.5:0.1", "--tol", "1e-12"]);
    assert_eq!(code, 1, "report: {stdout}");

    // malformed grid is a usage error
    let (code, _, _) = run(&["equivalence", "--grid", "0.9:0.1:0.1"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["equivalence", "--grid", "abc"]);
    assert_eq!(code, 2);
}

#[test]
fn gen_solve_pipeline_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("instance.json");
    let (code, _, _) = run(&[
        "gen", "--n", "12", "--m", "6", "--k", "1", "--seed", "3", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let inst = l1phase_core::harness::load_instance_json(&path).unwrap();
    let (oracle, unique) = l1phase_core::solvers::l1_oracle_bruteforce(&inst).unwrap();
    assert!(unique);

    let (code, stdout, _) =
        run(&["solve", "--instance", path.to_str().unwrap(), "--solver", "bp", "--certify"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("certified_optimal=true"), "line: {stdout}");
    let rel: f64 = stdout
        .split_whitespace()
        .find_map(|t| t.strip_prefix("rel_error="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rel <= 1e-6);

    // oracle agreement through the pipeline
    let out = l1phase_core::solvers::basis_pursuit_solve(
        &inst,
        &l1phase_core::SolverOptions::default(),
    )
    .unwrap();
    assert!((&out.estimate - &oracle).amax() <= 1e-6);

    // omp and amp run on the same file
    let (code, stdout, _) =
        run(&["solve", "--instance", path.to_str().unwrap(), "--solver", "omp"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("rel_error="));
    let (code, _, _) = run(&["solve", "--instance", path.to_str().unwrap(), "--solver", "amp"]);
    assert_eq!(code, 0);
}

#[test]
fn solve_without_truth_prints_residual_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("instance.json");
    // hand-written instance lacking x_true
    std::fs::write(
        &path,
        r#"{"n":4,"m":2,"k":1,"seed":null,
            "matrix":[1.0,0.0,0.5,-0.25,0.0,1.0,0.25,0.5],
            "y":[1.0,-2.0],"x_true":null,"support":null,"signs":null}"#,
    )
    .unwrap();
    let (code, stdout, _) =
        run(&["solve", "--instance", path.to_str().unwrap(), "--solver", "bp"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("residual_norm="));
    assert!(!stdout.contains("rel_error="), "line: {stdout}");
}

#[test]
fn gen_validates_dimensions() {
    let (code, _, _) =
        run(&["gen", "--n", "4", "--m", "6", "--k", "1", "--seed", "1", "--out", "/tmp/x.json"]);
    assert_eq!(code, 2);
    let (code, _, _) =
        run(&["gen", "--n", "8", "--m", "4", "--k", "5", "--seed", "1", "--out", "/tmp/x.json"]);
    assert_eq!(code, 2);
}

#[test]
fn phase_single_cell_beta_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phase.csv");
    let (code, _, stderr) = run(&[
        "phase", "--n", "40", "--alpha-grid", "0.5:0.5:0.1", "--beta-grid", "0:0:1",
        "--trials", "10", "--solver", "bp", "--seed", "5", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");
    let diagram = l1phase_core::harness::load_diagram_csv(&path).unwrap();
    assert_eq!(diagram.cells.len(), 1);
    assert_eq!(diagram.cells[0].success_rate(), 1.0);
}

#[test]
fn phase_relative_grid_resolves_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phase_rel.csv");
    let (code, _, stderr) = run(&[
        "phase", "--n", "30", "--alpha-grid", "0.5:0.5:0.1", "--beta-grid", "0.5:0.5:0.1",
        "--relative", "--trials", "5", "--solver", "omp", "--seed", "5", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");
    let diagram = l1phase_core::harness::load_diagram_csv(&path).unwrap();
    let bw = l1phase_core::thresholds::beta_w_fundamental(
        0.5,
        &l1phase_core::Tolerance::default(),
    )
    .unwrap()
    .beta_w;
    assert!((diagram.cells[0].beta - 0.5 * bw).abs() <= 1e-12);
}
