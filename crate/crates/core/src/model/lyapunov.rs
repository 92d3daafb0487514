use serde::Serialize;

use crate::error::{invalid, Result};
use crate::levy::LevyMeasureSpec;
use crate::model::CoefficientSet;

/// A `C^2` function `V >= 1` with the `L^p` exponent it is paired with.
pub trait Lyapunov {
    fn exponent(&self) -> f64;
    fn value(&self, x: f64) -> f64;
    fn first(&self, x: f64) -> f64;
    fn second(&self, x: f64) -> f64;
}

/// `V(x) = 2^p [1 + base + scale x^2]^{p/2}` with
/// `base = (|mu(0)| + |sigma(0)| + |gamma(0)| sqrt(m2))^2` and
/// `scale = c^2 (1 + sqrt(m2))^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialLyapunov {
    pub p: f64,
    pub c: f64,
    pub m2: f64,
    pub base: f64,
    pub scale: f64,
    /// Common constant of the drift/derivative conditions, once certified.
    pub cbar: Option<f64>,
    two_p: f64,
}

impl PolynomialLyapunov {
    pub fn new(p: f64, coeffs: &CoefficientSet, levy: &LevyMeasureSpec) -> Result<Self> {
        let m2 = levy.moment(2.0)?;
        let intercepts = coeffs.mu(0.0).abs() + coeffs.sigma(0.0).abs() + coeffs.gamma(0.0).abs() * m2.sqrt();
        let root = 1.0 + m2.sqrt();
        Self::from_parts(p, coeffs.c, m2, intercepts * intercepts, coeffs.c * coeffs.c * root * root)
    }

    pub fn from_parts(p: f64, c: f64, m2: f64, base: f64, scale: f64) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(invalid("p", format!("p must be >= 2, got {p}")));
        }
        if !(base >= 0.0) || !(scale >= 0.0) || !base.is_finite() || !scale.is_finite() {
            return Err(invalid("scale", "V parameters must be finite and nonnegative"));
        }
        Ok(Self {
            p,
            c,
            m2,
            base,
            scale,
            cbar: None,
            two_p: 2f64.powf(p),
        })
    }

    pub fn with_cbar(mut self, cbar: f64) -> Self {
        self.cbar = Some(cbar);
        self
    }

    #[inline]
    fn inner(&self, x: f64) -> f64 {
        1.0 + self.base + self.scale * x * x
    }

    /// `V(x)^{1/p} = 2 [1 + base + scale x^2]^{1/2}`.
    pub fn root(&self, x: f64) -> f64 {
        2.0 * self.inner(x).sqrt()
    }
}

impl Lyapunov for PolynomialLyapunov {
    fn exponent(&self) -> f64 {
        self.p
    }

    #[inline]
    fn value(&self, x: f64) -> f64 {
        self.two_p * self.inner(x).powf(0.5 * self.p)
    }

    fn first(&self, x: f64) -> f64 {
        self.p * self.two_p * self.scale * x * self.inner(x).powf(0.5 * self.p - 1.0)
    }

    fn second(&self, x: f64) -> f64 {
        let u = self.inner(x);
        let lead = self.p * self.two_p * self.scale;
        lead * u.powf(0.5 * self.p - 1.0) + lead * (self.p - 2.0) * self.scale * x * x * u.powf(0.5 * self.p - 2.0)
    }
}
