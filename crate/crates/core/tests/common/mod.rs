//! Reference implementations written directly from the model's formulas,
//! sharing nothing with the library but the `libm` erfc.

#![allow(dead_code)]

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Unimodal,
    Bimodal,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Unimodal => "unimodal",
            Shape::Bimodal => "bimodal",
        }
    }

    pub fn pdf(self, x: f64) -> f64 {
        match self {
            Shape::Unimodal => (-x * x / 2.0).exp() / (2.0 * PI).sqrt(),
            Shape::Bimodal => {
                ((-2.0 * (x - 1.0).powi(2)).exp() + (-2.0 * (x + 1.0).powi(2)).exp())
                    / (2.0 * PI).sqrt()
            }
        }
    }

    pub fn pdf_derivative(self, x: f64) -> f64 {
        match self {
            Shape::Unimodal => -x * self.pdf(x),
            Shape::Bimodal => {
                (-4.0 * (x - 1.0) * (-2.0 * (x - 1.0).powi(2)).exp()
                    - 4.0 * (x + 1.0) * (-2.0 * (x + 1.0).powi(2)).exp())
                    / (2.0 * PI).sqrt()
            }
        }
    }

    pub fn cdf(self, x: f64) -> f64 {
        match self {
            Shape::Unimodal => 0.5 * libm::erfc(-x / 2f64.sqrt()),
            Shape::Bimodal => {
                0.25 * (libm::erfc(-2f64.sqrt() * (x - 1.0)) + libm::erfc(-2f64.sqrt() * (x + 1.0)))
            }
        }
    }

    /// Beyond this radius the density is below 1e-16.
    pub fn support_radius(self) -> f64 {
        match self {
            Shape::Unimodal => 8.7,
            Shape::Bimodal => 5.3,
        }
    }
}

/// `None` means full loyalty.
pub fn kernel(gamma: Option<f64>, z: f64) -> f64 {
    match gamma {
        Some(g) => (-z / g).exp(),
        None => 1.0,
    }
}

/// Composite midpoint rule on `[a, b]` with `n` panels.
pub fn midpoint<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    if b <= a || n == 0 {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Midpoint rule split at `kink`, with panels shared out by length.
fn split_midpoint<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, kink: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let width = b - a;
    if kink > a && kink < b {
        let n_left = ((kink - a) / width * panels as f64).round().max(1.0) as usize;
        let n_right = panels.saturating_sub(n_left).max(1);
        midpoint(&f, a, kink, n_left) + midpoint(&f, kink, b, n_right)
    } else {
        midpoint(&f, a, b, panels)
    }
}

pub fn share_l(shape: Shape, gamma: Option<f64>, ell: f64, r: f64, panels: usize) -> f64 {
    let mid = 0.5 * (ell + r);
    let lo = -shape.support_radius();
    let hi = mid.min(shape.support_radius());
    split_midpoint(|x| shape.pdf(x) * kernel(gamma, (ell - x).abs()), lo, hi, ell, panels)
}

pub fn share_r(shape: Shape, gamma: Option<f64>, ell: f64, r: f64, panels: usize) -> f64 {
    let mid = 0.5 * (ell + r);
    let lo = mid.max(-shape.support_radius());
    let hi = shape.support_radius();
    split_midpoint(|x| shape.pdf(x) * kernel(gamma, (r - x).abs()), lo, hi, r, panels)
}
