//! Fixed points of the one-candidate dynamics `dℓ/dt = ∂S_L/∂ℓ(ℓ, r_fixed)`
//! and the saddle-node (blue sky) bifurcation in the loyalty scale.
//!
//! Roots of the velocity field are bracketed on a uniform grid and refined by
//! bisection. As gamma crosses the critical value a stable node and a saddle
//! appear together in the interior of the window, so the root count jumps by
//! two.

use rayon::prelude::*;
use serde::Serialize;
use std::io::{self, Write};

use crate::dynamics::{l_infinity_clamped, IntegratorConfig};
use crate::error::{check_order, Error, Result};
use crate::fmt::num;
use crate::loyalty::Gamma;
use crate::share::ShareModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn label(&self) -> &'static str {
        match self {
            Stability::Stable => "Stable",
            Stability::Unstable => "Unstable",
            Stability::Marginal => "Marginal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub position: f64,
    pub stability: Stability,
    /// Derivative of the velocity field at `position`.
    pub velocity_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointSearch {
    /// Search interval; `None` means `(-4, r_fixed - 1e-6)`.
    pub window: Option<(f64, f64)>,
    pub grid_n: usize,
    pub root_tol: f64,
    /// Central-difference step for the slope.
    pub slope_step: f64,
    /// Slopes within `±slope_tol` are `Marginal`.
    pub slope_tol: f64,
    /// How many times the grid may double when a root pair hides inside a cell.
    pub max_refinements: u32,
}

impl Default for FixedPointSearch {
    fn default() -> Self {
        Self {
            window: None,
            grid_n: 2000,
            root_tol: 1e-10,
            slope_step: 1e-5,
            slope_tol: 1e-6,
            max_refinements: 4,
        }
    }
}

const WINDOW_LEFT: f64 = -4.0;
const WINDOW_GAP: f64 = 1e-6;

impl FixedPointSearch {
    pub fn window_for(&self, r_fixed: f64) -> (f64, f64) {
        self.window
            .unwrap_or((WINDOW_LEFT, r_fixed - WINDOW_GAP))
    }

    fn validate(&self, r_fixed: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.window_for(r_fixed);
        if !(lo < hi) || !lo.is_finite() {
            return Err(Error::InvalidParameter(format!("empty search window ({lo}, {hi})")));
        }
        // allow for rounding in r_fixed - 1e-6
        if hi > r_fixed - WINDOW_GAP * (1.0 - 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "search window must end at least 1e-6 left of r_fixed = {r_fixed} (got {hi})"
            )));
        }
        if self.grid_n < 100 {
            return Err(Error::InvalidParameter(format!(
                "grid_n must be >= 100, got {}",
                self.grid_n
            )));
        }
        if !(self.root_tol > 0.0 && self.slope_step > 0.0 && self.slope_tol >= 0.0) {
            return Err(Error::InvalidParameter(
                "root_tol and slope_step must be > 0, slope_tol >= 0".into(),
            ));
        }
        Ok((lo, hi))
    }
}

/// Velocity of the left candidate against a fixed right candidate, up to the
/// factor alpha.
pub fn velocity(model: &ShareModel, ell: f64, r_fixed: f64) -> Result<f64> {
    model.dshare_l_dl(ell, r_fixed)
}

fn sample(model: &ShareModel, r_fixed: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    (0..=n)
        .map(|i| {
            let x = if i == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / n as f64
            };
            let v = velocity(model, x, r_fixed)?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "velocity at {x} in window ({lo}, {hi}) is {v}"
                )));
            }
            Ok((x, v))
        })
        .collect()
}

/// True when a parabola through three same-signed samples dips across zero
/// within the middle cell pair, i.e. a root pair may sit between grid points.
fn hides_root_pair(a: f64, b: f64, c: f64) -> bool {
    if a.signum() != b.signum() || b.signum() != c.signum() || b == 0.0 {
        return false;
    }
    if !(b.abs() < a.abs() && b.abs() <= c.abs()) {
        return false;
    }
    let curvature = 0.5 * (a - 2.0 * b + c);
    let slope = 0.5 * (c - a);
    if curvature == 0.0 {
        return false;
    }
    let s = -slope / (2.0 * curvature);
    let extreme = b - slope * slope / (4.0 * curvature);
    s.abs() <= 1.0 && extreme.signum() != b.signum()
}

fn bisect(model: &ShareModel, r_fixed: f64, mut a: (f64, f64), mut b: (f64, f64), tol: f64) -> Result<f64> {
    while b.0 - a.0 > tol {
        let mid = 0.5 * (a.0 + b.0);
        if mid <= a.0 || mid >= b.0 {
            break;
        }
        let v = velocity(model, mid, r_fixed)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if v.signum() == a.1.signum() {
            a = (mid, v);
        } else {
            b = (mid, v);
        }
    }
    // the endpoint with the smaller residual
    Ok(if a.1.abs() <= b.1.abs() { a.0 } else { b.0 })
}

fn classify(model: &ShareModel, r_fixed: f64, x: f64, search: &FixedPointSearch) -> Result<FixedPoint> {
    let h = search.slope_step;
    let slope = if x + h < r_fixed {
        (velocity(model, x + h, r_fixed)? - velocity(model, x - h, r_fixed)?) / (2.0 * h)
    } else {
        (velocity(model, x, r_fixed)? - velocity(model, x - h, r_fixed)?) / h
    };
    let stability = if slope < -search.slope_tol {
        Stability::Stable
    } else if slope > search.slope_tol {
        Stability::Unstable
    } else {
        Stability::Marginal
    };
    Ok(FixedPoint {
        position: x,
        stability,
        velocity_slope: slope,
    })
}

/// Fixed points of the velocity field inside the search window, sorted by
/// position.
pub fn find_fixed_points(
    model: &ShareModel,
    r_fixed: f64,
    search: &FixedPointSearch,
) -> Result<Vec<FixedPoint>> {
    let (lo, hi) = search.validate(r_fixed)?;

    let mut refinement = 0;
    let samples = loop {
        let samples = sample(model, r_fixed, lo, hi, search.grid_n << refinement)?;
        let suspicious = samples
            .windows(3)
            .any(|w| hides_root_pair(w[0].1, w[1].1, w[2].1));
        if !suspicious || refinement >= search.max_refinements {
            break samples;
        }
        refinement += 1;
    };

    let mut roots = Vec::new();
    for (i, w) in samples.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if b.1 == 0.0 {
            roots.push(b.0);
        } else if a.1 == 0.0 {
            if i == 0 {
                roots.push(a.0);
            }
        } else if a.1.signum() != b.1.signum() {
            roots.push(bisect(model, r_fixed, a, b, search.root_tol)?);
        }
    }

    roots
        .into_iter()
        .map(|x| classify(model, r_fixed, x, search))
        .collect()
}

/// Fixed points for every gamma on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct BifurcationScan {
    pub r_fixed: f64,
    pub gamma_grid: Vec<f64>,
    pub fixed_points: Vec<Vec<FixedPoint>>,
    pub search_window: (f64, f64),
}

impl BifurcationScan {
    pub fn counts(&self) -> Vec<usize> {
        self.fixed_points.iter().map(Vec::len).collect()
    }

    /// First adjacent pair of grid values whose counts differ.
    pub fn count_change(&self) -> Option<(f64, f64)> {
        let counts = self.counts();
        (1..counts.len())
            .find(|&i| counts[i] != counts[i - 1])
            .map(|i| (self.gamma_grid[i - 1], self.gamma_grid[i]))
    }

    /// First adjacent pair whose counts differ by exactly two: a node and a
    /// saddle created or destroyed together. A change by one is a root
    /// leaving through the window edge and is skipped.
    pub fn pair_bracket(&self) -> Option<(f64, f64)> {
        let counts = self.counts();
        (1..counts.len())
            .find(|&i| counts[i].abs_diff(counts[i - 1]) == 2)
            .map(|i| (self.gamma_grid[i - 1], self.gamma_grid[i]))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "gamma,position,stability,slope")?;
        for (gamma, points) in self.gamma_grid.iter().zip(&self.fixed_points) {
            for p in points {
                writeln!(
                    w,
                    "{},{},{},{}",
                    num(*gamma),
                    num(p.position),
                    p.stability.label(),
                    num(p.velocity_slope)
                )?;
            }
        }
        Ok(())
    }
}

fn finite_gamma(g: f64) -> Result<Gamma> {
    match Gamma::new(g)? {
        Gamma::Infinite => Err(Error::InvalidParameter(
            "gamma grids for fixed-point scans must be finite".into(),
        )),
        finite => Ok(finite),
    }
}

pub fn scan(
    template: &ShareModel,
    r_fixed: f64,
    gamma_grid: &[f64],
    search: &FixedPointSearch,
) -> Result<BifurcationScan> {
    let search_window = search.validate(r_fixed)?;
    let fixed_points = gamma_grid
        .par_iter()
        .map(|&g| find_fixed_points(&template.with_gamma(finite_gamma(g)?), r_fixed, search))
        .collect::<Result<Vec<_>>>()?;
    Ok(BifurcationScan {
        r_fixed,
        gamma_grid: gamma_grid.to_vec(),
        fixed_points,
        search_window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalGamma {
    pub gamma_c: f64,
    pub bracket: (f64, f64),
    /// Approximate position where the node and saddle are born.
    pub pair_location: f64,
    pub count_below: usize,
    pub count_above: usize,
}

/// Locates the gamma at which the fixed-point count changes by two, by
/// bisection until the bracket is at most `gamma_tol` wide.
pub fn critical_gamma(
    template: &ShareModel,
    r_fixed: f64,
    bracket: (f64, f64),
    gamma_tol: f64,
    search: &FixedPointSearch,
) -> Result<CriticalGamma> {
    let (mut lo, mut hi) = bracket;
    finite_gamma(lo)?;
    finite_gamma(hi)?;
    if !(lo < hi) || !(gamma_tol > 0.0) {
        return Err(Error::Bracket(format!(
            "need gamma_lo < gamma_hi and gamma_tol > 0 (got ({lo}, {hi}), {gamma_tol})"
        )));
    }
    let points_at = |g: f64| find_fixed_points(&template.with_gamma(Gamma::Finite(g)), r_fixed, search);
    let mut below = points_at(lo)?;
    let mut above = points_at(hi)?;
    let (n_lo, n_hi) = (below.len(), above.len());
    match n_lo.abs_diff(n_hi) {
        0 => {
            return Err(Error::Bracket(format!(
                "fixed-point count is {n_lo} at both gamma = {lo} and gamma = {hi}"
            )))
        }
        2 => {}
        d => {
            return Err(Error::Bracket(format!(
                "fixed-point count changes by {d} across ({lo}, {hi}); expected a single pair event"
            )))
        }
    }
    while hi - lo > gamma_tol {
        let mid = 0.5 * (lo + hi);
        let points = points_at(mid)?;
        if points.len() == n_lo {
            lo = mid;
            below = points;
        } else if points.len() == n_hi {
            hi = mid;
            above = points;
        } else {
            return Err(Error::Bracket(format!(
                "fixed-point count {} at gamma = {mid} matches neither end ({n_lo}, {n_hi})",
                points.len()
            )));
        }
    }
    let pair_side = if n_lo > n_hi { &below } else { &above };
    let pair_location = pair_side
        .windows(2)
        .min_by(|a, b| {
            (a[1].position - a[0].position).total_cmp(&(b[1].position - b[0].position))
        })
        .map(|w| 0.5 * (w[0].position + w[1].position))
        .expect("pair side has at least two fixed points");
    Ok(CriticalGamma {
        gamma_c: 0.5 * (lo + hi),
        bracket: (lo, hi),
        pair_location,
        count_below: n_lo,
        count_above: n_hi,
    })
}

/// Final position of the left candidate for each gamma, starting at `ell0`
/// against a fixed right candidate.
pub fn l_infinity_curve(
    template: &ShareModel,
    alpha: f64,
    ell0: f64,
    r_fixed: f64,
    gamma_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, f64)>> {
    check_order(ell0, r_fixed)?;
    gamma_grid
        .par_iter()
        .map(|&g| {
            let model = template.with_gamma(finite_gamma(g)?);
            Ok((g, l_infinity_clamped(&model, alpha, ell0, r_fixed, cfg)?))
        })
        .collect()
}

pub fn write_l_infinity_csv<W: Write>(curve: &[(f64, f64)], mut w: W) -> io::Result<()> {
    writeln!(w, "gamma,l_inf")?;
    for (g, l) in curve {
        writeln!(w, "{},{}", num(*g), num(*l))?;
    }
    Ok(())
}
