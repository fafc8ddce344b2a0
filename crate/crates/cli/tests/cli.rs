use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use candidate_dynamics::VoterDensity;

fn candyn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_candyn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn sign_changes(v: &[f64]) -> usize {
    v.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
}

fn local_maxima(rows: &[Vec<f64>], col: usize) -> Vec<f64> {
    rows.windows(3)
        .filter(|w| w[1][col] > w[0][col] && w[1][col] > w[2][col])
        .map(|w| w[1][0])
        .collect()
}

#[test]
fn density_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = candyn(dir.path(), &["density", "--density", "unimodal", "--out", "uni"]);
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("uni.csv"));
    assert_eq!(header, "x,f,fprime,F");
    assert_eq!(rows.len(), 801);
    let peak = rows.iter().max_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
    assert_eq!(peak[0], 0.0);
    assert!((peak[1] - 0.398942280401).abs() < 1e-11);

    candyn(dir.path(), &["density", "--density", "bimodal", "--out", "bi"]);
    let (_, rows) = read_csv(&dir.path().join("bi.csv"));
    let maxima = local_maxima(&rows, 1);
    assert_eq!(maxima.len(), 2, "{maxima:?}");
    assert!((maxima[0] + 1.0).abs() < 0.1 && (maxima[1] - 1.0).abs() < 0.1);
}

#[test]
fn invalid_config_exits_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["density", "--density", "trimodal"][..],
        &["trajectory", "--gamma", "-2"],
        &["trajectory", "--l0", "2", "--r0", "1"],
        &["sweep", "--workers", "0"],
        &["trajectory", "--nonsense", "1"],
        &["trajectory", "--alpha", "x"],
    ] {
        let out = candyn(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = candyn(
        dir.path(),
        &[
            "trajectory", "--gamma", "2", "--abs-tol", "1e-300", "--rel-tol", "1e-300",
            "--max-subdivisions", "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn failed_sweep_cells_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = candyn(
        dir.path(),
        &[
            "sweep", "--beta-min", "0.5", "--beta-max", "0.5", "--gamma-min", "2",
            "--gamma-max", "2", "--abs-tol", "1e-300", "--rel-tol", "1e-300",
            "--max-subdivisions", "1",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let summary = json(&dir.path().join("sweep.json"));
    assert_eq!(summary["status_counts"]["Failed"], 1);
    assert_eq!(summary["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn share_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = candyn(dir.path(), &["share-curve", "--density", "unimodal", "--points", "201"]);
    assert!(out.status.success());
    let d = VoterDensity::unimodal_standard();
    let (header, full) = read_csv(&dir.path().join("share-curve_gamma_inf.csv"));
    assert_eq!(header, "ell,S_L");
    for row in &full {
        assert!((row[1] - d.cdf((row[0] + 1.0) / 2.0)).abs() < 1e-9);
    }
    // larger loyalty, larger share
    let names = ["inf", "5", "4", "3", "2", "1", "0.5"];
    let curves: Vec<Vec<Vec<f64>>> = names
        .iter()
        .map(|g| read_csv(&dir.path().join(format!("share-curve_gamma_{g}.csv"))).1)
        .collect();
    for pair in curves.windows(2) {
        for (hi, lo) in pair[0].iter().zip(&pair[1]) {
            assert!(hi[1] > lo[1], "{hi:?} vs {lo:?}");
        }
    }

    candyn(dir.path(), &["fig3", "--gammas", "2", "--points", "401"]);
    let (_, rows) = read_csv(&dir.path().join("fig3_gamma_2.csv"));
    let maxima = local_maxima(&rows, 1);
    assert!(maxima.iter().any(|x| (x + 1.0).abs() < 0.3), "{maxima:?}");
}

#[test]
fn share_derivatives() {
    let dir = tempfile::tempdir().unwrap();
    let out = candyn(dir.path(), &["fig4", "--points", "401"]);
    assert!(out.status.success());
    let column = |g: &str| -> Vec<f64> {
        read_csv(&dir.path().join(format!("fig4_gamma_{g}.csv")))
            .1
            .iter()
            .map(|r| r[1])
            .collect()
    };
    assert!(column("inf").iter().all(|v| *v > 0.0));
    assert_eq!(sign_changes(&column("4")), 2);
    assert_eq!(sign_changes(&column("6")), 0);
    let (header, _) = read_csv(&dir.path().join("fig4_gamma_2.csv"));
    assert_eq!(header, "ell,dS_L");
}

#[test]
fn trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let out = candyn(dir.path(), args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["trajectory", "--gamma", "inf", "--alpha", "1", "--beta", "0.5", "--l0", "-1", "--r0", "1", "--out", "f2"]);
    let s = json(&dir.path().join("f2.json"));
    assert_eq!(s["status"], "Coalesced");
    assert!(s["meeting_point"].as_f64().unwrap() > 0.0);
    let (header, rows) = read_csv(&dir.path().join("f2.csv"));
    assert_eq!(header, "t,ell,r");
    assert_eq!(rows.len(), s["terminal_row"].as_u64().unwrap() as usize + 1);

    // from the default start (-1.5, 1.5) the threshold sits near 4.03
    run(&["trajectory", "--density", "bimodal", "--alpha", "1", "--beta", "0.1", "--gamma", "3.78", "--out", "d1"]);
    let s = json(&dir.path().join("d1.json"));
    assert_eq!(s["status"], "SteadyState");
    assert!(s["ell_inf"].as_f64().unwrap() < 0.0);
    run(&["trajectory", "--density", "bimodal", "--alpha", "1", "--beta", "0.1", "--gamma", "3.8", "--out", "d2"]);
    assert_eq!(json(&dir.path().join("d2.json"))["status"], "SteadyState");
    run(&["trajectory", "--density", "bimodal", "--alpha", "1", "--beta", "0.1", "--gamma", "4.04", "--out", "d3"]);
    assert_eq!(json(&dir.path().join("d3.json"))["status"], "Coalesced");

    run(&["trajectory", "--density", "bimodal", "--alpha", "1", "--beta", "0.1", "--gamma", "3.78", "--l0", "-1", "--out", "a"]);
    let s = json(&dir.path().join("a.json"));
    assert_eq!(s["status"], "SteadyState");
    assert!(s["ell_inf"].as_f64().unwrap() < 0.0);
    run(&["fig6", "--gamma", "3.8", "--out", "b"]);
    assert_eq!(json(&dir.path().join("b.json"))["status"], "Coalesced");

    // the presets are the same runs
    run(&["fig6"]);
    assert_eq!(
        fs::read(dir.path().join("fig6.csv")).unwrap(),
        fs::read(dir.path().join("a.csv")).unwrap()
    );
    run(&["fig2", "--out", "p2"]);
    assert_eq!(
        fs::read(dir.path().join("p2.json")).unwrap(),
        fs::read(dir.path().join("f2.json")).unwrap()
    );
}

#[test]
fn bifurcation_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = candyn(dir.path(), &["bifurcation", "--density", "bimodal", "--out", "bi/run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let c = json(&dir.path().join("bi/run_critical.json"));
    assert_eq!(c["found"], true);
    let gc = c["gamma_c"].as_f64().unwrap();
    assert!(gc > 4.0 && gc < 4.5, "{gc}");

    let (header, rows) = read_csv(&dir.path().join("bi/run_l_inf.csv"));
    assert_eq!(header, "gamma,l_inf");
    let jumps: Vec<_> = rows.windows(2).filter(|w| (w[1][1] - w[0][1]).abs() > 0.5).collect();
    assert_eq!(jumps.len(), 1);
    assert!(jumps[0][0][1] < 0.0 && jumps[0][1][1] == 1.0);

    let text = fs::read_to_string(dir.path().join("bi/run_fixed_points.csv")).unwrap();
    assert!(text.starts_with("gamma,position,stability,slope\n"));
    assert!(text.contains(",Stable,") && text.contains(",Unstable,"));

    let out = candyn(dir.path(), &["bifurcation", "--density", "unimodal", "--out", "uni"]);
    assert!(out.status.success());
    let c = json(&dir.path().join("uni_critical.json"));
    assert_eq!(c["found"], false);
    assert!(c["message"].as_str().unwrap().contains("no pair-creation bracket"));
}

#[test]
fn sweep_is_deterministic_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let grid = [
        "sweep", "--density", "bimodal", "--beta-min", "0.1", "--beta-max", "1.0", "--beta-step",
        "0.9", "--gamma-min", "3.5", "--gamma-max", "4.5", "--gamma-step", "0.1",
    ];
    let mut one = grid.to_vec();
    one.extend(["--workers", "1", "--out", "w1"]);
    let mut eight = grid.to_vec();
    eight.extend(["--workers", "8", "--out", "w8"]);
    assert!(candyn(dir.path(), &one).status.success());
    assert!(candyn(dir.path(), &eight).status.success());
    let a = fs::read(dir.path().join("w1.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("w8.csv")).unwrap());
    assert_eq!(
        fs::read(dir.path().join("w1.json")).unwrap(),
        fs::read(dir.path().join("w8.json")).unwrap()
    );
    assert!(String::from_utf8(a).unwrap().starts_with("beta,gamma,ell_inf,r_inf,q_inf,status\n"));

    // ridge at beta = 0.1, none at beta = 1
    let s = json(&dir.path().join("w1.json"));
    let ridge = s["discontinuities"].as_array().unwrap();
    assert_eq!(ridge.len(), 1);
    assert_eq!(ridge[0]["beta"], 0.1);
}

#[test]
fn unimodal_sweep_has_no_discontinuity() {
    let dir = tempfile::tempdir().unwrap();
    let out = candyn(
        dir.path(),
        &[
            "sweep", "--beta-min", "0.25", "--beta-max", "1", "--beta-step", "0.25",
            "--gamma-min", "1", "--gamma-max", "3", "--gamma-step", "0.1", "--jump-threshold", "0.2",
        ],
    );
    assert!(out.status.success());
    let s = json(&dir.path().join("sweep.json"));
    assert!(s["discontinuities"].as_array().unwrap().is_empty());
    assert_eq!(s["beta_independence"]["passed"], true);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "# fig 6 right panel\ndensity = bimodal\ngamma = 3.8\nbeta = 0.1\nt_max = 500\n",
    )
    .unwrap();
    let out = candyn(dir.path(), &["trajectory", "--config", "run.cfg", "--gamma", "3.7", "--dump-config"]);
    assert!(out.status.success());
    let cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["density"], "bimodal");
    assert_eq!(cfg["gamma"], 3.7);
    assert_eq!(cfg["integrator"]["t_max"], 500.0);
    assert_eq!(cfg["integrator"]["step"], 0.25);
    assert_eq!(cfg["command"], "trajectory");
    // dumping does not run anything
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);

    fs::write(dir.path().join("bad.cfg"), "gamma 3\n").unwrap();
    assert_eq!(candyn(dir.path(), &["trajectory", "--config", "bad.cfg"]).status.code(), Some(1));
    let out = candyn(dir.path(), &["fig7", "--dump-config"]);
    let cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["preset"], "fig7");
    assert_eq!(cfg["alpha"], cfg["beta"]);
}
