//! Parameter sweep over (beta, gamma) with alpha = 1.
//!
//! Cells are independent; they run on a rayon pool and are written back in
//! row-major order (beta outer, gamma inner), so the output does not depend
//! on the worker count.

use rayon::prelude::*;
use serde::Serialize;
use std::io::{self, Write};

use crate::dynamics::{simulate, IntegratorConfig, RateConstants, Status};
use crate::error::{check_order, Error, Result};
use crate::fmt::{num, round12};
use crate::loyalty::Gamma;
use crate::share::ShareModel;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub beta_values: Vec<f64>,
    pub gamma_values: Vec<Gamma>,
    pub ell0: f64,
    pub r0: f64,
    pub integrator: IntegratorConfig,
}

/// `start, start + step, ...` up to `stop` inclusive, computed by index so
/// that the endpoints are not lost to accumulated rounding.
pub fn linspace_step(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(start <= stop) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bad range {start}:{step}:{stop}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| round12(start + i as f64 * step)).collect())
}

impl SweepGrid {
    pub fn default_betas() -> Vec<f64> {
        linspace_step(0.0, 1.2, 0.05).expect("static range")
    }

    pub fn default_gammas() -> Vec<Gamma> {
        linspace_step(1.0, 12.0, 0.1)
            .expect("static range")
            .into_iter()
            .map(Gamma::Finite)
            .collect()
    }

    pub fn new(beta_values: Vec<f64>, gamma_values: Vec<Gamma>) -> Self {
        Self {
            beta_values,
            gamma_values,
            ell0: -1.5,
            r0: 1.5,
            integrator: IntegratorConfig::coarse(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_order(self.ell0, self.r0)?;
        self.integrator.validate()?;
        if self.beta_values.is_empty() || self.gamma_values.is_empty() {
            return Err(Error::InvalidParameter("sweep grid is empty".into()));
        }
        for &b in &self.beta_values {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("beta must be >= 0, got {b}")));
            }
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.beta_values) {
            return Err(Error::InvalidParameter("beta values must be strictly increasing".into()));
        }
        let gammas: Vec<f64> = self.gamma_values.iter().map(|g| g.as_f64()).collect();
        if !increasing(&gammas) {
            return Err(Error::InvalidParameter("gamma values must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.beta_values.len() * self.gamma_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CellStatus {
    Coalesced,
    SteadyState,
    MaxTimeReached,
    Failed(String),
}

impl CellStatus {
    pub fn label(&self) -> &str {
        match self {
            CellStatus::Coalesced => "Coalesced",
            CellStatus::SteadyState => "SteadyState",
            CellStatus::MaxTimeReached => "MaxTimeReached",
            CellStatus::Failed(_) => "Failed",
        }
    }
}

impl From<&Status> for CellStatus {
    fn from(s: &Status) -> Self {
        match s {
            Status::Coalesced { .. } => CellStatus::Coalesced,
            Status::SteadyState { .. } => CellStatus::SteadyState,
            Status::MaxTimeReached => CellStatus::MaxTimeReached,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub beta: f64,
    pub gamma: Gamma,
    pub ell_inf: f64,
    pub r_inf: f64,
    pub q_inf: f64,
    pub status: CellStatus,
}

impl SweepCell {
    pub fn failed(&self) -> bool {
        matches!(self.status, CellStatus::Failed(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: SweepGrid,
    /// Row-major: `cells[i * gamma_values.len() + j]` is `(beta_i, gamma_j)`.
    pub cells: Vec<SweepCell>,
}

pub fn run_cell(template: &ShareModel, beta: f64, gamma: Gamma, grid: &SweepGrid) -> SweepCell {
    let outcome = RateConstants::new(1.0, beta).and_then(|rates| {
        simulate(&template.with_gamma(gamma), &rates, grid.ell0, grid.r0, &grid.integrator)
    });
    match outcome {
        Ok(t) => SweepCell {
            beta,
            gamma,
            ell_inf: t.ell_inf,
            r_inf: t.r_inf,
            q_inf: t.q_inf,
            status: CellStatus::from(&t.status),
        },
        Err(e) => SweepCell {
            beta,
            gamma,
            ell_inf: f64::NAN,
            r_inf: f64::NAN,
            q_inf: f64::NAN,
            status: CellStatus::Failed(e.to_string()),
        },
    }
}

/// Runs every cell. A failing cell is recorded as `Failed` and does not stop
/// the others; only an invalid grid or worker count is an error.
pub fn run_sweep(template: &ShareModel, grid: &SweepGrid, workers: usize) -> Result<SweepResult> {
    grid.validate()?;
    if workers == 0 {
        return Err(Error::InvalidParameter("workers must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let n_gamma = grid.gamma_values.len();
    let cells = pool.install(|| {
        (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let beta = grid.beta_values[k / n_gamma];
                let gamma = grid.gamma_values[k % n_gamma];
                run_cell(template, beta, gamma, grid)
            })
            .collect()
    });
    Ok(SweepResult {
        grid: grid.clone(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discontinuity {
    pub beta: f64,
    pub gamma_lo: Gamma,
    pub gamma_hi: Gamma,
    /// `q_inf(gamma_hi) - q_inf(gamma_lo)`.
    pub jump: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum ColumnKind {
    /// Every cell separated; `spread` is the largest deviation from the
    /// column median.
    Separated { spread: f64 },
    /// Every cell coalesced; passes trivially.
    Coalesced,
    /// Separated for some beta and coalesced for others; excluded.
    Mixed,
    /// Contains failed cells; excluded.
    Incomplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnCheck {
    pub gamma: Gamma,
    pub kind: ColumnKind,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaIndependence {
    pub tol: f64,
    /// Rows with beta below this were left out (the right candidate does not
    /// move at beta = 0).
    pub min_beta: f64,
    pub columns: Vec<ColumnCheck>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationarityResidual {
    pub beta: f64,
    pub gamma: Gamma,
    pub dshare_l: f64,
    pub dshare_r: f64,
}

impl StationarityResidual {
    pub fn max_abs(&self) -> f64 {
        self.dshare_l.abs().max(self.dshare_r.abs())
    }
}

impl SweepResult {
    pub fn cell(&self, beta_index: usize, gamma_index: usize) -> &SweepCell {
        &self.cells[beta_index * self.grid.gamma_values.len() + gamma_index]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[SweepCell]> {
        self.cells.chunks(self.grid.gamma_values.len())
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.failed()).count()
    }

    pub fn status_counts(&self) -> Vec<(String, usize)> {
        let labels = ["Coalesced", "SteadyState", "MaxTimeReached", "Failed"];
        labels
            .iter()
            .map(|l| {
                let n = self.cells.iter().filter(|c| c.status.label() == *l).count();
                (l.to_string(), n)
            })
            .collect()
    }

    /// Adjacent gamma cells within a beta row whose `q_inf` differs by at
    /// least `threshold`.
    pub fn detect_discontinuities(&self, threshold: f64) -> Vec<Discontinuity> {
        let mut out = Vec::new();
        for row in self.rows() {
            for w in row.windows(2) {
                if w[0].failed() || w[1].failed() {
                    continue;
                }
                let jump = w[1].q_inf - w[0].q_inf;
                if jump.abs() >= threshold {
                    out.push(Discontinuity {
                        beta: w[0].beta,
                        gamma_lo: w[0].gamma,
                        gamma_hi: w[1].gamma,
                        jump,
                    });
                }
            }
        }
        out
    }

    /// Checks that, for each gamma, the final separation does not depend on
    /// beta. Rows with `beta < min_beta` are excluded.
    pub fn beta_independence(&self, tol: f64, min_beta: f64) -> BetaIndependence {
        let n_gamma = self.grid.gamma_values.len();
        let rows: Vec<usize> = (0..self.grid.beta_values.len())
            .filter(|&i| self.grid.beta_values[i] >= min_beta)
            .collect();
        let columns: Vec<ColumnCheck> = (0..n_gamma)
            .map(|j| {
                let column: Vec<&SweepCell> = rows.iter().map(|&i| self.cell(i, j)).collect();
                let kind = if column.iter().any(|c| c.failed()) {
                    ColumnKind::Incomplete
                } else if column.iter().all(|c| c.q_inf > 0.0) {
                    let mut q: Vec<f64> = column.iter().map(|c| c.q_inf).collect();
                    q.sort_by(f64::total_cmp);
                    let median = q[q.len() / 2];
                    let spread = q.iter().map(|v| (v - median).abs()).fold(0.0, f64::max);
                    ColumnKind::Separated { spread }
                } else if column.iter().all(|c| c.q_inf == 0.0) {
                    ColumnKind::Coalesced
                } else {
                    ColumnKind::Mixed
                };
                let passed = match kind {
                    ColumnKind::Separated { spread } => spread < tol,
                    _ => true,
                };
                ColumnCheck {
                    gamma: self.grid.gamma_values[j],
                    kind,
                    passed,
                }
            })
            .collect();
        let passed = columns.iter().all(|c| c.passed);
        BetaIndependence {
            tol,
            min_beta,
            columns,
            passed,
        }
    }

    /// Share gradients at the final positions of every separated steady-state
    /// cell with `beta > 0`.
    pub fn stationarity_residuals(&self, template: &ShareModel) -> Result<Vec<StationarityResidual>> {
        self.cells
            .iter()
            .filter(|c| c.status == CellStatus::SteadyState && c.q_inf > 0.0 && c.beta > 0.0)
            .map(|c| {
                let model = template.with_gamma(c.gamma);
                Ok(StationarityResidual {
                    beta: c.beta,
                    gamma: c.gamma,
                    dshare_l: model.dshare_l_dl(c.ell_inf, c.r_inf)?,
                    dshare_r: model.dshare_r_dr(c.ell_inf, c.r_inf)?,
                })
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "beta,gamma,ell_inf,r_inf,q_inf,status")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                num(c.beta),
                c.gamma,
                num(c.ell_inf),
                num(c.r_inf),
                num(c.q_inf),
                c.status.label()
            )?;
        }
        Ok(())
    }

    pub fn summary(&self, jump_threshold: f64, beta_tol: f64) -> SweepSummary {
        let failures = self
            .cells
            .iter()
            .filter_map(|c| match &c.status {
                CellStatus::Failed(msg) => Some(FailedCell {
                    beta: c.beta,
                    gamma: c.gamma,
                    message: msg.clone(),
                }),
                _ => None,
            })
            .collect();
        SweepSummary {
            cells: self.cells.len(),
            status_counts: self.status_counts().into_iter().collect(),
            jump_threshold,
            discontinuities: self
                .detect_discontinuities(jump_threshold)
                .into_iter()
                .map(|mut d| {
                    d.jump = round12(d.jump);
                    d
                })
                .collect(),
            beta_independence: self.beta_independence(beta_tol, BETA_FLOOR),
            failures,
        }
    }
}

/// Smallest beta included in the beta-independence check by default.
pub const BETA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedCell {
    pub beta: f64,
    pub gamma: Gamma,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub status_counts: std::collections::BTreeMap<String, usize>,
    pub jump_threshold: f64,
    pub discontinuities: Vec<Discontinuity>,
    pub beta_independence: BetaIndependence,
    pub failures: Vec<FailedCell>,
}
