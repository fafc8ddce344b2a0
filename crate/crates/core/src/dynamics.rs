//! Gradient-ascent candidate dynamics
//! `dℓ/dt = α ∂S_L/∂ℓ`, `dr/dt = β ∂S_R/∂r`.
//!
//! Integration is classical fixed-step RK4. The only event is the meeting
//! `ℓ = r`; its time is located by bisection on the step size, after which
//! both positions are frozen.

use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use crate::error::{check_order, Error, Result};
use crate::fmt::num;
use crate::share::ShareModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub alpha: f64,
    pub beta: f64,
}

impl RateConstants {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(alpha) || !ok(beta) {
            return Err(Error::InvalidParameter(format!(
                "opportunism constants must be finite and >= 0 (alpha = {alpha}, beta = {beta})"
            )));
        }
        if alpha == 0.0 && beta == 0.0 {
            return Err(Error::InvalidParameter(
                "alpha and beta cannot both be 0".into(),
            ));
        }
        Ok(Self { alpha, beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateState {
    pub ell: f64,
    pub r: f64,
    pub coalesced: bool,
}

impl CandidateState {
    pub fn new(ell: f64, r: f64) -> Result<Self> {
        check_order(ell, r)?;
        Ok(Self {
            ell,
            r,
            coalesced: false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Fixed RK4 time step.
    pub step: f64,
    pub t_max: f64,
    /// Steady state once `max(|dℓ/dt|, |dr/dt|)` drops below this.
    pub grad_tol: f64,
    /// Width of the bracket on the meeting time.
    pub event_tol: f64,
    /// Keep every k-th step in the exported samples.
    pub sample_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            t_max: 1e4,
            grad_tol: 1e-9,
            event_tol: 1e-10,
            sample_every: 100,
        }
    }
}

impl IntegratorConfig {
    /// Step 0.25 with the default tolerances. The flows here are slow and
    /// smooth (relaxation times of order 1e3 at beta = 0.1), and halving the
    /// step changes final positions by far less than 1e-6, so this is the
    /// setting used for sweeps and long runs.
    pub fn coarse() -> Self {
        Self {
            step: 0.25,
            sample_every: 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("step", self.step),
            ("t_max", self.t_max),
            ("grad_tol", self.grad_tol),
            ("event_tol", self.event_tol),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter("sample_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum Status {
    /// The candidates met at `position` at `time` and froze there.
    Coalesced { time: f64, position: f64 },
    /// Both velocities fell below `grad_tol` at `time`.
    SteadyState { time: f64 },
    MaxTimeReached,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Coalesced { .. } => "Coalesced",
            Status::SteadyState { .. } => "SteadyState",
            Status::MaxTimeReached => "MaxTimeReached",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub ell: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub status: Status,
    pub ell_inf: f64,
    pub r_inf: f64,
    pub q_inf: f64,
}

/// JSON record written after a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub status: String,
    pub t_star: Option<f64>,
    pub meeting_point: Option<f64>,
    pub ell_inf: f64,
    pub r_inf: f64,
    pub q_inf: f64,
    /// Zero-based index of the terminal CSV row.
    pub terminal_row: usize,
}

impl Trajectory {
    pub fn terminal(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }

    pub fn is_coalesced(&self) -> bool {
        matches!(self.status, Status::Coalesced { .. })
    }

    /// Positions at time `t`, interpolated linearly between samples. After a
    /// meeting, or past the last sample, the terminal positions are returned.
    pub fn position_at(&self, t: f64) -> (f64, f64) {
        let idx = self.samples.partition_point(|s| s.t <= t);
        if idx == 0 {
            let s = self.samples[0];
            return (s.ell, s.r);
        }
        if idx == self.samples.len() {
            let s = self.terminal();
            return (s.ell, s.r);
        }
        let (a, b) = (self.samples[idx - 1], self.samples[idx]);
        let w = (t - a.t) / (b.t - a.t);
        (a.ell + w * (b.ell - a.ell), a.r + w * (b.r - a.r))
    }

    pub fn summary(&self) -> TrajectorySummary {
        let round = crate::fmt::round12;
        let (t_star, meeting_point) = match self.status {
            Status::Coalesced { time, position } => (Some(round(time)), Some(round(position))),
            Status::SteadyState { time } => (Some(round(time)), None),
            Status::MaxTimeReached => (None, None),
        };
        TrajectorySummary {
            status: self.status.label().to_string(),
            t_star,
            meeting_point,
            ell_inf: round(self.ell_inf),
            r_inf: round(self.r_inf),
            q_inf: round(self.q_inf),
            terminal_row: self.samples.len() - 1,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,ell,r")?;
        for s in &self.samples {
            writeln!(w, "{},{},{}", num(s.t), num(s.ell), num(s.r))?;
        }
        Ok(())
    }
}

/// `(α ∂S_L/∂ℓ, β ∂S_R/∂r)` at `s`. A zero rate yields an exact zero
/// component without evaluating the share derivative.
pub fn rhs(model: &ShareModel, rates: &RateConstants, s: &CandidateState) -> Result<(f64, f64)> {
    if s.coalesced {
        return Err(Error::InvalidParameter(
            "velocity is undefined for coalesced candidates".into(),
        ));
    }
    check_order(s.ell, s.r)?;
    let dl = if rates.alpha == 0.0 {
        0.0
    } else {
        rates.alpha * model.dshare_l_dl(s.ell, s.r)?
    };
    let dr = if rates.beta == 0.0 {
        0.0
    } else {
        rates.beta * model.dshare_r_dr(s.ell, s.r)?
    };
    Ok((dl, dr))
}

/// `βℓ + αr`, invariant under full-turnout dynamics.
pub fn conserved_quantity(rates: &RateConstants, s: &CandidateState) -> f64 {
    rates.beta * s.ell + rates.alpha * s.r
}

enum Step {
    Inside(f64, f64),
    Crossed,
}

struct Stepper<'a> {
    model: &'a ShareModel,
    rates: &'a RateConstants,
}

impl Stepper<'_> {
    fn velocity(&self, ell: f64, r: f64) -> Result<Option<(f64, f64)>> {
        if !(ell < r) {
            return Ok(None);
        }
        let s = CandidateState {
            ell,
            r,
            coalesced: false,
        };
        rhs(self.model, self.rates, &s).map(Some)
    }

    fn rk4(&self, ell: f64, r: f64, k1: (f64, f64), h: f64) -> Result<Step> {
        let Some(k2) = self.velocity(ell + 0.5 * h * k1.0, r + 0.5 * h * k1.1)? else {
            return Ok(Step::Crossed);
        };
        let Some(k3) = self.velocity(ell + 0.5 * h * k2.0, r + 0.5 * h * k2.1)? else {
            return Ok(Step::Crossed);
        };
        let Some(k4) = self.velocity(ell + h * k3.0, r + h * k3.1)? else {
            return Ok(Step::Crossed);
        };
        let e = ell + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        let q = r + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if !e.is_finite() || !q.is_finite() {
            return Err(Error::NonFinite(format!(
                "integration step from ({ell}, {r}) produced ({e}, {q})"
            )));
        }
        Ok(if e < q { Step::Inside(e, q) } else { Step::Crossed })
    }
}

/// Integrates the candidate dynamics from `(ell0, r0)`.
pub fn simulate(
    model: &ShareModel,
    rates: &RateConstants,
    ell0: f64,
    r0: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_order(ell0, r0)?;
    RateConstants::new(rates.alpha, rates.beta)?;
    cfg.validate()?;

    let stepper = Stepper { model, rates };
    let h = cfg.step;
    let max_steps = (cfg.t_max / h).ceil() as u64;
    let (mut ell, mut r) = (ell0, r0);
    let mut samples = vec![Sample { t: 0.0, ell, r }];
    let mut n: u64 = 0;

    let status = loop {
        let t = n as f64 * h;
        let k1 = stepper
            .velocity(ell, r)?
            .expect("state kept strictly ordered");
        if k1.0.abs().max(k1.1.abs()) < cfg.grad_tol {
            break Status::SteadyState { time: t };
        }
        if n >= max_steps {
            break Status::MaxTimeReached;
        }
        match stepper.rk4(ell, r, k1, h)? {
            Step::Inside(e, q) => {
                ell = e;
                r = q;
                n += 1;
                if n % cfg.sample_every as u64 == 0 {
                    samples.push(Sample {
                        t: n as f64 * h,
                        ell,
                        r,
                    });
                }
            }
            Step::Crossed => {
                let (mut lo, mut hi) = (0.0, h);
                let mut last_inside = (ell, r);
                while hi - lo > cfg.event_tol {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    match stepper.rk4(ell, r, k1, mid)? {
                        Step::Inside(e, q) => {
                            lo = mid;
                            last_inside = (e, q);
                        }
                        Step::Crossed => hi = mid,
                    }
                }
                let position = 0.5 * (last_inside.0 + last_inside.1);
                ell = position;
                r = position;
                break Status::Coalesced {
                    time: t + 0.5 * (lo + hi),
                    position,
                };
            }
        }
    };

    let t_end = match status {
        Status::Coalesced { time, .. } | Status::SteadyState { time } => time,
        Status::MaxTimeReached => n as f64 * h,
    };
    let last = samples.last_mut().expect("initial sample");
    if last.t < t_end {
        samples.push(Sample { t: t_end, ell, r });
    } else {
        *last = Sample { t: t_end, ell, r };
    }

    let q_inf = match status {
        Status::Coalesced { .. } => 0.0,
        _ => r - ell,
    };
    Ok(Trajectory {
        samples,
        status,
        ell_inf: ell,
        r_inf: r,
        q_inf,
    })
}

/// Final position of the left candidate against a fixed right candidate
/// (`β = 0`), clamped at `r_fixed` once the two meet.
pub fn l_infinity_clamped(
    model: &ShareModel,
    alpha: f64,
    ell0: f64,
    r_fixed: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let rates = RateConstants::new(alpha, 0.0)?;
    let traj = simulate(model, &rates, ell0, r_fixed, cfg)?;
    Ok(if traj.is_coalesced() {
        r_fixed
    } else {
        traj.ell_inf.min(r_fixed)
    })
}
