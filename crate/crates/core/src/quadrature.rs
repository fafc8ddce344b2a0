//! Globally adaptive Gauss-Kronrod (10/21 point) quadrature over finite
//! intervals, pre-split at caller-supplied breakpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quadrature tolerances must be > 0 (abs_tol = {}, rel_tol = {})",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidParameter("max_subdivisions must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub subdivisions: usize,
}

// Kronrod abscissae on [0, 1]; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_643_474_106,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut kronrod = WGK[10] * f_center;
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    let mut values = [(0.0f64, 0.0f64); 10];
    for (j, node) in XGK.iter().take(10).enumerate() {
        let dx = half * node;
        let lo = f(center - dx);
        let hi = f(center + dx);
        values[j] = (lo, hi);
        kronrod += WGK[j] * (lo + hi);
        res_abs += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for (j, (lo, hi)) in values.iter().enumerate() {
        res_asc += WGK[j] * ((lo - mean).abs() + (hi - mean).abs());
    }

    let width = half.abs();
    let value = kronrod * half;
    let res_abs = res_abs * width;
    let res_asc = res_asc * width;
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel { a, b, value, error }
}

/// Integrates `f` over `[a, b]`.
///
/// The interval is first cut at every breakpoint so that each initial panel
/// is smooth; the panel with the largest error estimate is then bisected
/// until the summed estimate is at most `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Integral> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "integration limits must be finite with a < b (got [{a}, {b}])"
        )));
    }
    let mut cuts = Vec::with_capacity(breakpoints.len() + 2);
    cuts.push(a);
    for &p in breakpoints {
        if !(p > a && p < b) {
            return Err(Error::InvalidParameter(format!(
                "breakpoint {p} lies outside ({a}, {b})"
            )));
        }
        cuts.push(p);
    }
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut panels: Vec<Panel> = cuts
        .windows(2)
        .map(|w| gauss_kronrod(&f, w[0], w[1]))
        .collect();

    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::NonFinite(format!(
                "integrand produced a non-finite value on [{a}, {b}]"
            )));
        }
        if error <= cfg.abs_tol.max(cfg.rel_tol * value.abs()) {
            return Ok(Integral {
                value,
                error_estimate: error,
                subdivisions: panels.len(),
            });
        }
        let fail = || Error::Quadrature {
            subdivisions: panels.len(),
            value,
            error_estimate: error,
        };
        if panels.len() >= cfg.max_subdivisions {
            return Err(fail());
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one panel");
        let Panel { a: lo, b: hi, .. } = panels[worst];
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(fail());
        }
        panels[worst] = gauss_kronrod(&f, lo, mid);
        panels.push(gauss_kronrod(&f, mid, hi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_weights_are_consistent() {
        let kronrod: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let gauss: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((kronrod - 2.0).abs() < 1e-15);
        assert!((gauss - 2.0).abs() < 1e-15);
    }

    #[test]
    fn kronrod_rule_is_exact_through_degree_31() {
        for deg in 0..=31 {
            let p = gauss_kronrod(&|x: f64| x.powi(deg), 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((p.value - exact).abs() < 1e-14, "degree {deg}: {}", p.value);
        }
        // the embedded Gauss rule is exact through degree 19, so the error
        // estimate collapses to the roundoff floor
        let p = gauss_kronrod(&|x: f64| x.powi(19), 0.0, 1.0);
        assert!(p.error < 1e-13);
    }

    #[test]
    fn linear() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x| x, 0.0, 1.0, &[], &cfg).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn truncated_exponential_has_unit_mass() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|z: f64| (-z).exp(), 0.0, 32.5, &[], &cfg).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn kink_is_resolved_with_breakpoint() {
        let cfg = QuadratureConfig::default();
        let r = integrate(f64::abs, -1.0, 1.0, &[0.0], &cfg).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
        assert_eq!(r.subdivisions, 2);
        // off-center kink without a breakpoint still converges, only slower
        let r = integrate(|x: f64| (x - 0.3).abs(), -1.0, 1.0, &[], &cfg).unwrap();
        assert!((r.value - 1.09).abs() < 1e-10);
        assert!(r.subdivisions > 2);
    }

    #[test]
    fn sharp_peak_needs_subdivision() {
        let cfg = QuadratureConfig::default();
        let w: f64 = 1e-3;
        let exact = 2.0 * (1.0 / w).atan() * w;
        let r = integrate(|x: f64| w * w / (x * x + w * w), -1.0, 1.0, &[], &cfg).unwrap();
        assert!((r.value - exact).abs() <= 1e-10f64.max(1e-8 * exact));
        assert!(r.error_estimate <= 1e-10f64.max(1e-8 * r.value.abs()));
    }

    #[test]
    fn reports_non_convergence() {
        let cfg = QuadratureConfig {
            max_subdivisions: 3,
            ..QuadratureConfig::default()
        };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-4, 1.0, &[], &cfg).unwrap_err();
        assert!(matches!(err, Error::Quadrature { subdivisions: 3, .. }));
    }

    #[test]
    fn rejects_bad_limits() {
        let cfg = QuadratureConfig::default();
        assert!(integrate(|x| x, 1.0, 1.0, &[], &cfg).is_err());
        assert!(integrate(|x| x, 0.0, 1.0, &[2.0], &cfg).is_err());
        assert!(integrate(|x| x, 0.0, f64::INFINITY, &[], &cfg).is_err());
        assert!(matches!(
            integrate(|_| f64::NAN, 0.0, 1.0, &[], &cfg),
            Err(Error::NonFinite(_))
        ));
        assert!(QuadratureConfig { abs_tol: 0.0, ..Default::default() }.validate().is_err());
    }
}
