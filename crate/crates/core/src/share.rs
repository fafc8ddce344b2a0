//! Vote shares under abstention and their partial derivatives.
//!
//! With the left candidate at `ell`, the right one at `r` and `mid = (ell + r) / 2`:
//!
//! ```text
//! S_L = ∫_{-∞}^{mid} f(x) g(|ell - x|) dx        S_R = ∫_{mid}^{∞} f(x) g(|r - x|) dx
//! ∂S_L/∂ell = -f(mid) g((r - ell)/2) / 2 + ∫_{-∞}^{mid} f'(x) g(|ell - x|) dx
//! ∂S_R/∂r   =  f(mid) g((r - ell)/2) / 2 + ∫_{mid}^{∞}  f'(x) g(|r - x|) dx
//! ```
//!
//! Infinite limits are cut at the density's effective support intersected
//! with the kernel's reach, and every integral is split at the kink of
//! `|ell - x|` (or `|r - x|`).

use serde::Serialize;

use crate::density::VoterDensity;
use crate::error::{check_order, Error, Result};
use crate::loyalty::{Gamma, LoyaltyKernel};
use crate::quadrature::{integrate, QuadratureConfig};

#[derive(Debug, Clone)]
pub struct ShareModel {
    pub density: VoterDensity,
    pub kernel: LoyaltyKernel,
    pub quad: QuadratureConfig,
}

/// `1 - S_L - S_R`. When roundoff pushes the raw value below `-abs_tol`,
/// `rate` is clamped to 0 and `clamped` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Abstention {
    pub rate: f64,
    pub raw: f64,
    pub clamped: bool,
}

impl ShareModel {
    pub fn new(density: VoterDensity, kernel: LoyaltyKernel, quad: QuadratureConfig) -> Self {
        Self {
            density,
            kernel,
            quad,
        }
    }

    /// Built-in exponential kernel with default quadrature.
    pub fn exponential(density: VoterDensity, gamma: Gamma) -> Self {
        Self::new(
            density,
            LoyaltyKernel::exponential(gamma),
            QuadratureConfig::default(),
        )
    }

    pub fn gamma(&self) -> Gamma {
        self.kernel.gamma()
    }

    pub fn with_gamma(&self, gamma: Gamma) -> Self {
        Self {
            density: self.density.clone(),
            kernel: self.kernel.with_gamma(gamma),
            quad: self.quad,
        }
    }

    /// Integration range to the left of `mid` for a candidate at `pos`.
    fn left_range(&self, pos: f64, mid: f64) -> Option<(f64, f64)> {
        let (support_lo, _) = self.density.effective_support();
        let lo = match self.kernel.reach() {
            Some(reach) => support_lo.max(pos - reach),
            None => support_lo,
        };
        (lo < mid).then_some((lo, mid))
    }

    fn right_range(&self, pos: f64, mid: f64) -> Option<(f64, f64)> {
        let (_, support_hi) = self.density.effective_support();
        let hi = match self.kernel.reach() {
            Some(reach) => support_hi.min(pos + reach),
            None => support_hi,
        };
        (mid < hi).then_some((mid, hi))
    }

    fn integral<F: Fn(f64) -> f64>(&self, f: F, range: Option<(f64, f64)>, kink: f64) -> Result<f64> {
        let Some((a, b)) = range else {
            return Ok(0.0);
        };
        let mut breaks = [0.0; 1];
        let breaks: &[f64] = if kink > a && kink < b {
            breaks[0] = kink;
            &breaks
        } else {
            &[]
        };
        Ok(integrate(f, a, b, breaks, &self.quad)?.value)
    }

    pub fn share_l(&self, ell: f64, r: f64) -> Result<f64> {
        check_order(ell, r)?;
        let mid = 0.5 * (ell + r);
        let (d, k) = (&self.density, &self.kernel);
        self.integral(|x| d.pdf(x) * k.g((ell - x).abs()), self.left_range(ell, mid), ell)
    }

    pub fn share_r(&self, ell: f64, r: f64) -> Result<f64> {
        check_order(ell, r)?;
        let mid = 0.5 * (ell + r);
        let (d, k) = (&self.density, &self.kernel);
        self.integral(|x| d.pdf(x) * k.g((r - x).abs()), self.right_range(r, mid), r)
    }

    pub fn dshare_l_dl(&self, ell: f64, r: f64) -> Result<f64> {
        check_order(ell, r)?;
        let mid = 0.5 * (ell + r);
        let (d, k) = (&self.density, &self.kernel);
        let boundary = -0.5 * d.pdf(mid) * k.g(0.5 * (r - ell));
        let bulk = self.integral(
            |x| d.pdf_derivative(x) * k.g((ell - x).abs()),
            self.left_range(ell, mid),
            ell,
        )?;
        Ok(boundary + bulk)
    }

    pub fn dshare_r_dr(&self, ell: f64, r: f64) -> Result<f64> {
        check_order(ell, r)?;
        let mid = 0.5 * (ell + r);
        let (d, k) = (&self.density, &self.kernel);
        let boundary = 0.5 * d.pdf(mid) * k.g(0.5 * (r - ell));
        let bulk = self.integral(
            |x| d.pdf_derivative(x) * k.g((r - x).abs()),
            self.right_range(r, mid),
            r,
        )?;
        Ok(boundary + bulk)
    }

    /// Limit of `∂S_L/∂ell (ell, r)` as `ell -> r`, evaluated with `ell = r`
    /// in the scaled form: `-f(r)/2 + gamma ∫_0^∞ f'(r - gamma u) g0(u) du`.
    pub fn dshare_l_dl_coincident(&self, r: f64) -> Result<f64> {
        let d = &self.density;
        match self.gamma() {
            Gamma::Infinite => {
                let bulk = self.integral(|x| d.pdf_derivative(x), self.left_range(r, r), r)?;
                Ok(-0.5 * d.pdf(r) + bulk)
            }
            Gamma::Finite(gamma) => {
                let (support_lo, support_hi) = d.effective_support();
                let u_lo = ((r - support_hi) / gamma).max(0.0);
                let u_hi = ((r - support_lo) / gamma).min(self.kernel.base().tail_cutoff());
                let k = &self.kernel;
                let range = (u_lo < u_hi).then_some((u_lo, u_hi));
                let bulk = self.integral(|u| d.pdf_derivative(r - gamma * u) * k.g0(u), range, 0.0)?;
                Ok(-0.5 * d.pdf(r) + gamma * bulk)
            }
        }
    }

    pub fn abstention_rate(&self, ell: f64, r: f64) -> Result<Abstention> {
        let raw = 1.0 - self.share_l(ell, r)? - self.share_r(ell, r)?;
        let clamped = raw < -self.quad.abs_tol;
        Ok(Abstention {
            rate: if clamped { 0.0 } else { raw },
            raw,
            clamped,
        })
    }

    /// `gamma` plus the `u`-range for the substitution `x = pos ∓ gamma u`,
    /// truncated to the effective support and the kernel cutoff.
    fn scaled_range(&self, pos: f64, half_gap: f64, sign: f64) -> Result<(f64, Option<(f64, f64)>)> {
        let Gamma::Finite(gamma) = self.gamma() else {
            return Err(Error::InvalidParameter(
                "the scaled form needs a finite gamma".into(),
            ));
        };
        let (support_lo, support_hi) = self.density.effective_support();
        let cutoff = self.kernel.base().tail_cutoff();
        // x = pos - sign * gamma * u, x in [support_lo, support_hi]
        let (a, b) = if sign > 0.0 {
            ((pos - support_hi) / gamma, (pos - support_lo) / gamma)
        } else {
            ((support_lo - pos) / gamma, (support_hi - pos) / gamma)
        };
        let lo = a.max(-half_gap / gamma).max(-cutoff);
        let hi = b.min(cutoff);
        Ok((gamma, (lo < hi).then_some((lo, hi))))
    }

    /// `S_L` through the substitution `x = ell - gamma u`:
    /// `gamma ∫_{-(r-ell)/(2 gamma)}^∞ f(ell - gamma u) g0(|u|) du`.
    pub fn share_l_scaled(&self, ell: f64, r: f64) -> Result<f64> {
        check_order(ell, r)?;
        let (gamma, range) = self.scaled_range(ell, 0.5 * (r - ell), 1.0)?;
        let (d, k) = (&self.density, &self.kernel);
        Ok(gamma * self.integral(|u| d.pdf(ell - gamma * u) * k.g0(u.abs()), range, 0.0)?)
    }

    /// `∂S_L/∂ell` through the substitution `x = ell - gamma u`. Cross-check
    /// path for [`ShareModel::dshare_l_dl`].
    pub fn dshare_l_dl_scaled(&self, ell: f64, r: f64) -> Result<f64> {
        check_order(ell, r)?;
        let (gamma, range) = self.scaled_range(ell, 0.5 * (r - ell), 1.0)?;
        let (d, k) = (&self.density, &self.kernel);
        let mid = 0.5 * (ell + r);
        let boundary = -0.5 * d.pdf(mid) * k.g0(0.5 * (r - ell) / gamma);
        let bulk = self.integral(|u| d.pdf_derivative(ell - gamma * u) * k.g0(u.abs()), range, 0.0)?;
        Ok(boundary + gamma * bulk)
    }

    /// `∂S_R/∂r` through the substitution `x = r + gamma u`.
    pub fn dshare_r_dr_scaled(&self, ell: f64, r: f64) -> Result<f64> {
        check_order(ell, r)?;
        let (gamma, range) = self.scaled_range(r, 0.5 * (r - ell), -1.0)?;
        let (d, k) = (&self.density, &self.kernel);
        let mid = 0.5 * (ell + r);
        let boundary = 0.5 * d.pdf(mid) * k.g0(0.5 * (r - ell) / gamma);
        let bulk = self.integral(|u| d.pdf_derivative(r + gamma * u) * k.g0(u.abs()), range, 0.0)?;
        Ok(boundary + gamma * bulk)
    }
}
