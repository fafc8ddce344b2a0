//! Command bodies. Each one computes everything in memory and returns the
//! files to write, so a failure never leaves partial output behind.

use candidate_dynamics::bifurcation::write_l_infinity_csv;
use candidate_dynamics::fmt::{num, round12};
use candidate_dynamics::{
    critical_gamma, l_infinity_curve, run_sweep, scan, simulate, FixedPointSearch, Gamma,
    RateConstants, SweepGrid,
};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::config::{Command, ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] candidate_dynamics::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_numerical() => 2,
            CliError::Model(_) | CliError::Config(_) | CliError::Io { .. } => 1,
        }
    }
}

pub struct Output {
    pub files: Vec<(PathBuf, Vec<u8>)>,
    /// 0, or 3 when some sweep cells failed.
    pub exit_code: i32,
}

impl Output {
    fn ok(files: Vec<(PathBuf, Vec<u8>)>) -> Self {
        Self {
            files,
            exit_code: 0,
        }
    }
}

fn path(cfg: &RunConfig, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", cfg.out))
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

pub fn run(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    match cfg.command {
        Command::Density => density(cfg),
        Command::ShareCurve => curves(cfg, false),
        Command::ShareDerivative => curves(cfg, true),
        Command::Trajectory => trajectory(cfg),
        Command::Bifurcation => bifurcation(cfg),
        Command::Sweep => sweep(cfg),
    }
}

fn density(cfg: &RunConfig) -> Result<Output, CliError> {
    let d = cfg.density()?;
    let mut csv = String::from("x,f,fprime,F\n");
    for x in grid(cfg.x_min, cfg.x_max, cfg.points) {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            num(x),
            num(d.pdf(x)),
            num(d.pdf_derivative(x)),
            num(d.cdf(x))
        );
    }
    Ok(Output::ok(vec![(path(cfg, ".csv"), csv.into_bytes())]))
}

fn curves(cfg: &RunConfig, derivative: bool) -> Result<Output, CliError> {
    let template = cfg.model()?;
    let header = if derivative { "ell,dS_L\n" } else { "ell,S_L\n" };
    let mut files = Vec::new();
    for &gamma in &cfg.gammas {
        let model = template.with_gamma(gamma);
        let mut csv = String::from(header);
        for ell in grid(cfg.ell_min, cfg.curve_ell_max(), cfg.points) {
            let v = if derivative {
                model.dshare_l_dl(ell, cfg.r_fixed)?
            } else {
                model.share_l(ell, cfg.r_fixed)?
            };
            let _ = writeln!(csv, "{},{}", num(ell), num(v));
        }
        files.push((path(cfg, &format!("_gamma_{gamma}.csv")), csv.into_bytes()));
    }
    Ok(Output::ok(files))
}

fn trajectory(cfg: &RunConfig) -> Result<Output, CliError> {
    let model = cfg.model()?;
    let rates = RateConstants::new(cfg.alpha, cfg.beta)?;
    let traj = simulate(&model, &rates, cfg.l0, cfg.r0, &cfg.integrator)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv).expect("in-memory write");
    Ok(Output::ok(vec![
        (path(cfg, ".csv"), csv),
        (path(cfg, ".json"), json(&traj.summary())),
    ]))
}

#[derive(Serialize)]
struct CriticalRecord {
    found: bool,
    r_fixed: f64,
    scan_window: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bracket: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair_location: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    count_below: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    count_above: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

fn bifurcation(cfg: &RunConfig) -> Result<Output, CliError> {
    let template = cfg.model()?;
    let gammas = cfg.gamma_grid()?;
    let search = FixedPointSearch::default();
    let fixed = scan(&template, cfg.r_fixed, &gammas, &search)?;
    let window = (gammas[0], gammas[gammas.len() - 1]);

    let mut record = CriticalRecord {
        found: false,
        r_fixed: cfg.r_fixed,
        scan_window: window,
        gamma_c: None,
        bracket: None,
        pair_location: None,
        count_below: None,
        count_above: None,
        message: None,
    };
    match fixed.pair_bracket() {
        None => {
            record.message = Some(format!(
                "no pair-creation bracket found in the interior window for gamma in [{}, {}]",
                num(window.0),
                num(window.1)
            ))
        }
        Some(bracket) => match critical_gamma(&template, cfg.r_fixed, bracket, cfg.gamma_tol, &search) {
            Ok(c) => {
                record.found = true;
                record.gamma_c = Some(round12(c.gamma_c));
                record.bracket = Some((round12(c.bracket.0), round12(c.bracket.1)));
                record.pair_location = Some(round12(c.pair_location));
                record.count_below = Some(c.count_below);
                record.count_above = Some(c.count_above);
            }
            Err(candidate_dynamics::Error::Bracket(msg)) => record.message = Some(msg),
            Err(e) => return Err(e.into()),
        },
    }

    let curve = l_infinity_curve(&template, cfg.alpha, cfg.l0, cfg.r_fixed, &gammas, &cfg.integrator)?;

    let mut points = Vec::new();
    fixed.write_csv(&mut points).expect("in-memory write");
    let mut l_inf = Vec::new();
    write_l_infinity_csv(&curve, &mut l_inf).expect("in-memory write");
    Ok(Output::ok(vec![
        (path(cfg, "_fixed_points.csv"), points),
        (path(cfg, "_critical.json"), json(&record)),
        (path(cfg, "_l_inf.csv"), l_inf),
    ]))
}

fn sweep(cfg: &RunConfig) -> Result<Output, CliError> {
    let template = cfg.model()?;
    let mut grid = SweepGrid::new(
        cfg.beta_grid()?,
        cfg.gamma_grid()?.into_iter().map(Gamma::Finite).collect(),
    );
    grid.ell0 = cfg.l0;
    grid.r0 = cfg.r0;
    grid.integrator = cfg.integrator;
    let result = run_sweep(&template, &grid, cfg.workers)?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv).expect("in-memory write");
    let summary = result.summary(cfg.jump_threshold, cfg.beta_tol);
    Ok(Output {
        files: vec![(path(cfg, ".csv"), csv), (path(cfg, ".json"), json(&summary))],
        exit_code: if result.failures() > 0 { 3 } else { 0 },
    })
}
