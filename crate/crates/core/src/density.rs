//! Voter opinion densities on the left-right axis.
//!
//! A density is a finite mixture of Gaussian bumps `weight * exp(-rate * (x - center)^2)`
//! divided by a common normalization, which keeps the pdf, its derivative and
//! the CDF in closed form.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_order, Error, Result};

/// Tolerance on the total mass of a density.
pub const MASS_TOL: f64 = 1e-10;
/// Maximum distance of the median from 0 for a median-centered density.
pub const MEDIAN_TOL: f64 = 1e-6;
/// Half-width of each component's effective support, in units of `1/sqrt(rate)`.
const SUPPORT_HALF_WIDTH: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub center: f64,
    pub rate: f64,
}

impl GaussianComponent {
    pub fn new(weight: f64, center: f64, rate: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::Density(format!("component weight must be > 0, got {weight}")));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Density(format!("component rate must be > 0, got {rate}")));
        }
        if !center.is_finite() {
            return Err(Error::Density(format!("component center must be finite, got {center}")));
        }
        Ok(Self {
            weight,
            center,
            rate,
        })
    }

    /// Integral of the unnormalized bump over the real line.
    fn mass(&self) -> f64 {
        self.weight * (PI / self.rate).sqrt()
    }
}

/// Probability density of voter positions.
///
/// Immutable after construction; every evaluation is a pure function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterDensity {
    components: Vec<GaussianComponent>,
    normalization: f64,
    median_centered: bool,
}

/// Outcome of a full-turnout election.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    LeftWins,
    RightWins,
    Tie,
}

impl VoterDensity {
    /// Standard normal density.
    pub fn unimodal_standard() -> Self {
        Self {
            components: vec![GaussianComponent {
                weight: 1.0,
                center: 0.0,
                rate: 0.5,
            }],
            normalization: (2.0 * PI).sqrt(),
            median_centered: true,
        }
    }

    /// Polarized electorate with modes at -1 and +1, each holding half the mass.
    pub fn bimodal_polarized() -> Self {
        let bump = |center| GaussianComponent {
            weight: 1.0,
            center,
            rate: 2.0,
        };
        Self {
            components: vec![bump(1.0), bump(-1.0)],
            normalization: (2.0 * PI).sqrt(),
            median_centered: true,
        }
    }

    /// Built-in densities by name: `unimodal` or `bimodal`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "unimodal" => Ok(Self::unimodal_standard()),
            "bimodal" => Ok(Self::bimodal_polarized()),
            other => Err(Error::Density(format!(
                "unknown density `{other}` (expected `unimodal` or `bimodal`)"
            ))),
        }
    }

    /// Mixture with an explicit normalization. The mass must be 1 and the
    /// median must sit at 0.
    pub fn new(components: Vec<GaussianComponent>, normalization: f64) -> Result<Self> {
        let density = Self::unchecked(components, normalization, true)?;
        density.check_mass()?;
        let median = density.median();
        if median.abs() > MEDIAN_TOL {
            return Err(Error::Density(format!(
                "median is {median:e}, not 0; use an off-median density to keep it anyway"
            )));
        }
        Ok(density)
    }

    /// Mixture normalized to unit mass automatically, still required to be
    /// median-centered.
    pub fn from_components(components: Vec<GaussianComponent>) -> Result<Self> {
        let normalization = components.iter().map(GaussianComponent::mass).sum();
        Self::new(components, normalization)
    }

    /// Mixture normalized to unit mass whose median is allowed to differ from 0.
    /// The density is flagged as not median-centered.
    pub fn off_median(components: Vec<GaussianComponent>) -> Result<Self> {
        let normalization = components.iter().map(GaussianComponent::mass).sum();
        let mut density = Self::unchecked(components, normalization, false)?;
        density.check_mass()?;
        density.median_centered = density.median().abs() <= MEDIAN_TOL;
        Ok(density)
    }

    fn unchecked(
        components: Vec<GaussianComponent>,
        normalization: f64,
        median_centered: bool,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Density("a density needs at least one component".into()));
        }
        for c in &components {
            GaussianComponent::new(c.weight, c.center, c.rate)?;
        }
        if !(normalization > 0.0 && normalization.is_finite()) {
            return Err(Error::Density(format!(
                "normalization must be > 0, got {normalization}"
            )));
        }
        Ok(Self {
            components,
            normalization,
            median_centered,
        })
    }

    fn check_mass(&self) -> Result<()> {
        let mass = self.mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Density(format!("total mass is {mass}, expected 1")));
        }
        Ok(())
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn is_median_centered(&self) -> bool {
        self.median_centered
    }

    /// Total mass from the closed-form component integrals.
    pub fn mass(&self) -> f64 {
        self.components.iter().map(GaussianComponent::mass).sum::<f64>() / self.normalization
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let sum: f64 = self
            .components
            .iter()
            .map(|c| {
                let d = x - c.center;
                c.weight * (-c.rate * d * d).exp()
            })
            .sum();
        sum / self.normalization
    }

    pub fn pdf_derivative(&self, x: f64) -> f64 {
        let sum: f64 = self
            .components
            .iter()
            .map(|c| {
                let d = x - c.center;
                -2.0 * c.rate * d * c.weight * (-c.rate * d * d).exp()
            })
            .sum();
        sum / self.normalization
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let sum: f64 = self
            .components
            .iter()
            .map(|c| 0.5 * c.mass() * libm::erfc(-c.rate.sqrt() * (x - c.center)))
            .sum();
        (sum / self.normalization).clamp(0.0, 1.0)
    }

    /// Interval outside of which the pdf is below 1e-16: the union of
    /// `center ± 9/sqrt(rate)` over components.
    pub fn effective_support(&self) -> (f64, f64) {
        self.components.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), c| {
                let half = SUPPORT_HALF_WIDTH / c.rate.sqrt();
                (lo.min(c.center - half), hi.max(c.center + half))
            },
        )
    }

    /// Median by bisection on the CDF.
    pub fn median(&self) -> f64 {
        let (mut lo, mut hi) = self.effective_support();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Full-turnout winner: the candidate closer to the median wins.
    ///
    /// The midpoint is compared exactly against the median (0 for
    /// median-centered densities), so `Tie` only occurs on exact equality.
    pub fn who_wins(&self, ell: f64, r: f64) -> Result<Winner> {
        check_order(ell, r)?;
        let pivot = if self.median_centered { 0.0 } else { self.median() };
        let mid = 0.5 * (ell + r);
        Ok(if mid > pivot {
            Winner::LeftWins
        } else if mid < pivot {
            Winner::RightWins
        } else {
            Winner::Tie
        })
    }
}
