use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sqg(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqg"))
        .args(args)
        .arg(format!("--output_dir={}", out.display()))
        .output()
        .expect("sqg runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn column(csv: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(csv).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

const SMALL: &[&str] = &[
    "--grid.n",
    "32",
    "--grid.box_len",
    "2pi",
    "--recipe.background",
    "modes",
    "--recipe.modes",
    "1:1:0.3, 2:-1:0.2",
    "--recipe.g0",
    "random",
    "--recipe.g0_h3_sq",
    "0.01",
    "--recipe.g0_k_max",
    "4",
    "--sim.dt_max",
    "0.0078125",
    "--sim.sample_every",
    "8",
];

#[test]
fn alpha_outside_hypothesis_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqg(&["verify-data", "--recipe.alpha", "0.7"], dir.path());
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("recipe.alpha") && err.contains("0 <= alpha < 1/2"),
        "{err}"
    );
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqg(&["simulate", "--sim.dtmax", "0.1"], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn single_mode_background_satisfies_the_condition() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqg(
        &[
            "verify-data",
            "--grid.n",
            "32",
            "--grid.box_len",
            "2pi",
            "--recipe.background",
            "modes",
            "--recipe.modes",
            "2:1:0.5",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("condition.json")).unwrap()).unwrap();
    assert_eq!(v["lhs"].as_f64(), Some(0.0));
    assert!(dir.path().join("config.txt").exists());
}

#[test]
fn corollary_data_fails_a_tiny_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqg(
        &[
            "verify-data",
            "--grid.n",
            "256",
            "--grid.box_len",
            "120pi",
            "--recipe.delta",
            "0.1",
            "--verify.epsilon",
            "1e-12",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("bounds.json").exists());
}

#[test]
fn linear_single_mode_decays_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (mu, alpha) = (0.8, 0.3);
    let o = sqg(
        &[
            "simulate",
            "--grid.n",
            "32",
            "--grid.box_len",
            "2pi",
            "--recipe.background",
            "zero",
            "--recipe.g0",
            "modes",
            "--recipe.g0_modes",
            "3:4:0.5",
            "--recipe.mu",
            &mu.to_string(),
            "--recipe.alpha",
            &alpha.to_string(),
            "--sim.nonlinear",
            "false",
            "--sim.forcing",
            "false",
            "--sim.t_end",
            "2",
            "--sim.dt_max",
            "0.0078125",
            "--sim.sample_every",
            "16",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = dir.path().join("trajectory.csv");
    let t: Vec<f64> = column(&csv, "t").iter().map(|s| s.parse().unwrap()).collect();
    let l2: Vec<f64> = column(&csv, "l2_g_sq")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert!(t.len() > 10);
    let rate = 2.0 * mu * 5f64.powf(2.0 * alpha);
    for (ti, li) in t.iter().zip(&l2) {
        let exact = l2[0] * (-rate * ti).exp();
        assert!((li - exact).abs() <= 1e-8 * l2[0], "t = {ti}: {li} vs {exact}");
    }
    assert!(column(&csv, "paired_discrepancy").iter().all(|s| s.is_empty()));
}

#[test]
fn paired_run_fills_the_discrepancy_column() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--sim.paired", "true", "--sim.t_end", "0.25"];
    args.extend_from_slice(SMALL);
    let o = sqg(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let disc = column(&dir.path().join("trajectory.csv"), "paired_discrepancy");
    assert!(!disc.is_empty());
    for d in disc {
        let d: f64 = d.parse().unwrap();
        assert!(d <= 1e-9, "{d}");
    }
}

#[test]
fn resumed_run_is_bitwise_identical() {
    let straight = tempfile::tempdir().unwrap();
    let split = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--sim.t_end", "0.5"];
    args.extend_from_slice(SMALL);
    assert_eq!(code(&sqg(&args, straight.path())), 0);

    let mut first = vec!["simulate", "--sim.t_end", "0.25"];
    first.extend_from_slice(SMALL);
    assert_eq!(code(&sqg(&first, split.path())), 0);
    let mut second = vec!["simulate", "--resume", "--sim.t_end", "0.5"];
    second.extend_from_slice(SMALL);
    let o = sqg(&second, split.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    for f in ["trajectory.csv", "checkpoint/state.sqgf"] {
        assert_eq!(
            fs::read(straight.path().join(f)).unwrap(),
            fs::read(split.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let header = &fs::read(split.path().join("checkpoint/state.sqgf")).unwrap()[..4];
    assert_eq!(header, b"SQGF");
}

#[test]
fn resume_without_checkpoint_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--resume"];
    args.extend_from_slice(SMALL);
    assert_eq!(code(&sqg(&args, dir.path())), 3);
}

#[test]
fn sweep_runs_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep",
        "--sweep.axis.recipe.mu",
        "0.5, 1, 2",
        "--sweep.axis.recipe.alpha",
        "0, 0.2, 0.4",
        "--sweep.max_parallel",
        "3",
        "--sim.t_end",
        "0.0625",
    ];
    args.extend_from_slice(SMALL);
    let o = sqg(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let jobs = column(&dir.path().join("sweep.csv"), "job");
    assert_eq!(jobs.len(), 9);
    let errors = column(&dir.path().join("sweep.csv"), "error");
    assert!(errors.iter().all(|e| e.is_empty()), "{errors:?}");
    for j in jobs {
        assert!(dir.path().join(&j).join("trajectory.csv").exists());
    }
}

#[test]
fn lab_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "ineq-lab",
        "--kind",
        "all",
        "--trials",
        "3",
        "--lab.n",
        "32",
        "--lab.box_len",
        "4pi",
    ];
    let oa = sqg(&args, a.path());
    assert_eq!(code(&oa), 0, "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(code(&sqg(&args, b.path())), 0);
    let ca = fs::read(a.path().join("ineq_lab.csv")).unwrap();
    assert_eq!(ca, fs::read(b.path().join("ineq_lab.csv")).unwrap());
    let kinds = column(&a.path().join("ineq_lab.csv"), "trial_kind");
    assert_eq!(kinds.len(), 3 * (2 + 2 * 4));
    assert!(a.path().join("ineq_summary.json").exists());
}

#[test]
fn ledger_rechecks_a_saved_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--sim.t_end", "0.1", "--sim.sample_every", "1"];
    args.extend_from_slice(SMALL);
    // later flags win, so re-assert dense sampling
    args.extend_from_slice(&["--sim.sample_every", "1"]);
    assert_eq!(code(&sqg(&args, dir.path())), 0);
    let o = sqg(&["ledger", "--ledger.max_residual", "1e-3"], dir.path());
    assert_eq!(
        code(&o),
        0,
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(dir.path().join("ledger.json").exists());
    let o = sqg(&["ledger", "--ledger.max_residual", "1e-300"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn blow_up_exits_2_with_report_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--sim.t_end", "1"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(&["--sim.tail_limit", "1e-300", "--sim.tail_patience", "3"]);
    let o = sqg(&args, dir.path());
    assert_eq!(
        code(&o),
        2,
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("blowup.json")).unwrap()).unwrap();
    assert!(report["t"].as_f64().unwrap() < 1.0);
    assert!(dir.path().join("checkpoint/state.sqgf").exists());
}
