//! Abstention kernels `g(z) = g0(z / gamma)`.
//!
//! `g(z)` is the fraction of voters at distance `z` from their nearest
//! candidate who still turn out. `gamma` is the loyalty scale; infinite
//! loyalty means everybody votes.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};

/// Loyalty scale. `Infinite` is a sentinel for full turnout (`g == 1`).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Gamma {
    Finite(f64),
    Infinite,
}

impl Gamma {
    pub fn new(value: f64) -> Result<Self> {
        if value == f64::INFINITY {
            Ok(Gamma::Infinite)
        } else if value > 0.0 && value.is_finite() {
            Ok(Gamma::Finite(value))
        } else {
            Err(Error::InvalidParameter(format!("gamma must be > 0, got {value}")))
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Gamma::Finite(g) => Some(g),
            Gamma::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Gamma::Infinite)
    }

    /// `f64::INFINITY` for the sentinel.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Finite(g) => f.write_str(&crate::fmt::num(*g)),
            Gamma::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Gamma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Gamma::Infinite);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("cannot parse gamma `{s}`")))?;
        Gamma::new(v)
    }
}

impl Serialize for Gamma {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gamma::Finite(g) => s.serialize_f64(*g),
            Gamma::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Gamma::new(v).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A user-registered base kernel.
pub struct CustomKernel {
    pub name: String,
    pub eval: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `Z` with `g0(z) < 1e-14` for every `z > Z`.
    pub tail_cutoff: f64,
    /// `C` with `g0(z) <= C / z^2` for `z >= 1`.
    pub tail_constant: f64,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("name", &self.name)
            .field("tail_cutoff", &self.tail_cutoff)
            .field("tail_constant", &self.tail_constant)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum BaseKernel {
    /// `g0(z) = exp(-z)`.
    Exponential,
    Custom(Arc<CustomKernel>),
}

const EXP_TAIL_CUTOFF: f64 = 32.5;
// max of z^2 exp(-z) is 4/e^2 ~ 0.5413, attained at z = 2
const EXP_TAIL_CONSTANT: f64 = 0.55;

/// Threshold below which the kernel counts as vanished.
pub const TAIL_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum KernelViolation {
    /// `g0(0) != 1`.
    NotUnitAtOrigin { value: f64 },
    /// `g0` fails to strictly decrease between two grid points.
    NotDecreasing { at: f64 },
    /// `∫ g0 != 1`.
    IntegralNotUnit { integral: f64 },
    /// `g0(z) > C / z^2` at some sampled `z >= 1`.
    TailBoundExceeded { at: f64, value: f64, bound: f64 },
    /// `g0` is still at least `1e-14` at the registered cutoff.
    TailCutoffTooShort { cutoff: f64, value: f64 },
    /// The kernel could not be integrated at all.
    IntegrationFailed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub kernel: String,
    pub integral: Option<f64>,
    pub violations: Vec<KernelViolation>,
}

impl KernelReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl BaseKernel {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "exp" | "exponential" => Ok(BaseKernel::Exponential),
            other => Err(Error::Kernel(format!("unknown kernel `{other}` (expected `exp`)"))),
        }
    }

    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tail_cutoff: f64,
        tail_constant: f64,
    ) -> Self {
        BaseKernel::Custom(Arc::new(CustomKernel {
            name: name.into(),
            eval: Box::new(eval),
            tail_cutoff,
            tail_constant,
        }))
    }

    pub fn name(&self) -> &str {
        match self {
            BaseKernel::Exponential => "exp",
            BaseKernel::Custom(k) => &k.name,
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, z: f64) -> f64 {
        match self {
            BaseKernel::Exponential => (-z).exp(),
            BaseKernel::Custom(k) => (k.eval)(z),
        }
    }

    pub fn tail_cutoff(&self) -> f64 {
        match self {
            BaseKernel::Exponential => EXP_TAIL_CUTOFF,
            BaseKernel::Custom(k) => k.tail_cutoff,
        }
    }

    pub fn tail_constant(&self) -> f64 {
        match self {
            BaseKernel::Exponential => EXP_TAIL_CONSTANT,
            BaseKernel::Custom(k) => k.tail_constant,
        }
    }

    /// Numerically checks that `g0` is a usable abstention kernel:
    /// `g0(0) = 1`, strictly decreasing, unit integral, `O(1/z^2)` tail and
    /// a truthful tail cutoff.
    pub fn validate(&self) -> KernelReport {
        let mut violations = Vec::new();
        let cutoff = self.tail_cutoff();
        let constant = self.tail_constant();

        let at_zero = self.eval_unchecked(0.0);
        if (at_zero - 1.0).abs() > 1e-12 {
            violations.push(KernelViolation::NotUnitAtOrigin { value: at_zero });
        }

        if cutoff > 0.0 && cutoff.is_finite() {
            let n = 4000;
            let mut prev = at_zero;
            for i in 1..=n {
                let z = cutoff * i as f64 / n as f64;
                let v = self.eval_unchecked(z);
                if !(v < prev) {
                    violations.push(KernelViolation::NotDecreasing { at: z });
                    break;
                }
                prev = v;
            }
            let tail = self.eval_unchecked(cutoff);
            if !(tail < TAIL_EPS) {
                violations.push(KernelViolation::TailCutoffTooShort {
                    cutoff,
                    value: tail,
                });
            }
        } else {
            violations.push(KernelViolation::TailCutoffTooShort {
                cutoff,
                value: f64::NAN,
            });
        }

        // geometric grid on [1, 1e8] for the quadratic decay bound
        for i in 0..=800 {
            let z = 10f64.powf(i as f64 / 100.0);
            let v = self.eval_unchecked(z);
            let bound = constant / (z * z);
            if !(v <= bound) {
                violations.push(KernelViolation::TailBoundExceeded { at: z, value: v, bound });
                break;
            }
        }

        let quad = QuadratureConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_subdivisions: 5000,
        };
        let integral = if cutoff > 0.0 && cutoff.is_finite() {
            match integrate(|z| self.eval_unchecked(z), 0.0, cutoff, &[], &quad) {
                Ok(i) => Some(i.value),
                Err(e) => {
                    violations.push(KernelViolation::IntegrationFailed {
                        reason: e.to_string(),
                    });
                    None
                }
            }
        } else {
            None
        };
        if let Some(i) = integral {
            if (i - 1.0).abs() > 1e-8 {
                violations.push(KernelViolation::IntegralNotUnit { integral: i });
            }
        }

        KernelReport {
            kernel: self.name().to_string(),
            integral,
            violations,
        }
    }
}

/// `g(z) = g0(z / gamma)`, shared by both candidates.
#[derive(Debug, Clone)]
pub struct LoyaltyKernel {
    base: BaseKernel,
    gamma: Gamma,
}

impl LoyaltyKernel {
    /// Registers `base` after validating it.
    pub fn new(base: BaseKernel, gamma: Gamma) -> Result<Self> {
        if let BaseKernel::Custom(_) = base {
            let report = base.validate();
            if !report.is_ok() {
                return Err(Error::Kernel(format!(
                    "kernel `{}` violates {:?}",
                    report.kernel, report.violations
                )));
            }
        }
        if let Gamma::Finite(g) = gamma {
            Gamma::new(g)?;
        }
        Ok(Self { base, gamma })
    }

    pub fn exponential(gamma: Gamma) -> Self {
        Self {
            base: BaseKernel::Exponential,
            gamma,
        }
    }

    pub fn base(&self) -> &BaseKernel {
        &self.base
    }

    pub fn gamma(&self) -> Gamma {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: Gamma) -> Self {
        Self {
            base: self.base.clone(),
            gamma,
        }
    }

    pub fn eval_g0(&self, z: f64) -> Result<f64> {
        check_distance(z)?;
        Ok(self.base.eval_unchecked(z))
    }

    pub fn eval_g(&self, z: f64) -> Result<f64> {
        check_distance(z)?;
        Ok(self.g(z))
    }

    #[inline]
    pub(crate) fn g(&self, z: f64) -> f64 {
        match self.gamma {
            Gamma::Infinite => 1.0,
            Gamma::Finite(gamma) => self.base.eval_unchecked(z / gamma),
        }
    }

    #[inline]
    pub(crate) fn g0(&self, z: f64) -> f64 {
        self.base.eval_unchecked(z)
    }

    /// Distance beyond which `g` is below `1e-14`; `None` for full loyalty.
    pub fn reach(&self) -> Option<f64> {
        self.gamma.finite().map(|g| g * self.base.tail_cutoff())
    }
}

fn check_distance(z: f64) -> Result<()> {
    if z >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "kernel argument must be >= 0, got {z}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exponential_values() {
        let k = LoyaltyKernel::exponential(Gamma::Finite(2.0));
        assert_eq!(k.eval_g0(0.0).unwrap(), 1.0);
        assert!((k.eval_g0(1.0).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!(k.eval_g0(40.0).unwrap() < 1e-14);
        assert!((k.eval_g(2.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(k.eval_g(-1.0).is_err());
        assert!(k.eval_g0(-1e-12).is_err());

        let half = LoyaltyKernel::exponential(Gamma::Finite(0.5));
        assert!((half.eval_g(1.0).unwrap() - 0.135_335_283_236_612_7).abs() < 1e-15);

        let full = LoyaltyKernel::exponential(Gamma::Infinite);
        assert_eq!(full.eval_g(100.0).unwrap(), 1.0);
        assert_eq!(full.reach(), None);
    }

    #[test]
    fn exponential_passes_validation() {
        let report = BaseKernel::Exponential.validate();
        assert!(report.is_ok(), "{report:?}");
        assert!((report.integral.unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn doubled_exponential_fails_unit_at_origin() {
        let k = BaseKernel::custom("2exp", |z: f64| 2.0 * (-z).exp(), 34.0, 2.0);
        let report = k.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, KernelViolation::NotUnitAtOrigin { .. })));
        assert!(LoyaltyKernel::new(k, Gamma::Finite(1.0)).is_err());
    }

    #[test]
    fn harmonic_kernel_fails_integral_and_tail() {
        let k = BaseKernel::custom("harmonic", |z: f64| 1.0 / (1.0 + z), 1e15, 10.0);
        let v = k.validate().violations;
        assert!(v.iter().any(|v| matches!(v, KernelViolation::IntegralNotUnit { .. })));
        assert!(v.iter().any(|v| matches!(v, KernelViolation::TailBoundExceeded { .. })));
        assert!(!v.iter().any(|v| matches!(v, KernelViolation::NotUnitAtOrigin { .. })));
    }

    #[test]
    fn valid_custom_kernel_registers() {
        // Laplace kernel with a different cutoff registration
        let k = BaseKernel::custom("exp-custom", |z: f64| (-z).exp(), 35.0, 0.6);
        let kernel = LoyaltyKernel::new(k, Gamma::Finite(3.0)).unwrap();
        assert!((kernel.eval_g(3.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let short = BaseKernel::custom("short", |z: f64| (-z).exp(), 5.0, 0.6);
        assert!(short
            .validate()
            .violations
            .iter()
            .any(|v| matches!(v, KernelViolation::TailCutoffTooShort { .. })));
    }

    #[test]
    fn gamma_parsing() {
        assert_eq!("inf".parse::<Gamma>().unwrap(), Gamma::Infinite);
        assert_eq!("4.5".parse::<Gamma>().unwrap(), Gamma::Finite(4.5));
        assert!("0".parse::<Gamma>().is_err());
        assert!("-1".parse::<Gamma>().is_err());
        assert!("abc".parse::<Gamma>().is_err());
        assert_eq!(Gamma::Infinite.to_string(), "inf");
        let json = serde_json::to_string(&vec![Gamma::Finite(2.0), Gamma::Infinite]).unwrap();
        assert_eq!(json, r#"[2.0,"inf"]"#);
        let back: Vec<Gamma> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![Gamma::Finite(2.0), Gamma::Infinite]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn scaling_identity(gamma in 0.01f64..50.0, z in 0.0f64..100.0) {
            let k = LoyaltyKernel::exponential(Gamma::Finite(gamma));
            prop_assert_eq!(k.eval_g(z).unwrap(), k.eval_g0(z / gamma).unwrap());
        }

        #[test]
        fn more_loyalty_more_turnout(g1 in 0.01f64..50.0, g2 in 0.01f64..50.0, z in 1e-6f64..100.0) {
            let (lo, hi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
            let a = LoyaltyKernel::exponential(Gamma::Finite(lo)).eval_g(z).unwrap();
            let b = LoyaltyKernel::exponential(Gamma::Finite(hi)).eval_g(z).unwrap();
            prop_assert!(a <= b);
        }
    }
}
