use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A scalar coefficient function `R -> R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarFn {
    Constant { value: f64 },
    /// `slope * x + intercept`
    Affine { slope: f64, intercept: f64 },
    /// `amplitude * sin(frequency * x + phase) + offset`
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl ScalarFn {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarFn::Constant { value } => value,
            ScalarFn::Affine { slope, intercept } => slope * x + intercept,
            ScalarFn::Sine {
                amplitude,
                frequency,
                phase,
                offset,
            } => amplitude * (frequency * x + phase).sin() + offset,
        }
    }

    /// Global Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            ScalarFn::Constant { .. } => 0.0,
            ScalarFn::Affine { slope, .. } => slope.abs(),
            ScalarFn::Sine {
                amplitude, frequency, ..
            } => (amplitude * frequency).abs(),
        }
    }

    /// `sup |f''|`.
    pub fn curvature(&self) -> f64 {
        match *self {
            ScalarFn::Constant { .. } | ScalarFn::Affine { .. } => 0.0,
            ScalarFn::Sine {
                amplitude, frequency, ..
            } => (amplitude * frequency * frequency).abs(),
        }
    }

    /// Slope `k` if the function is `x -> k x`.
    pub fn linear_slope(&self) -> Option<f64> {
        match *self {
            ScalarFn::Constant { value } if value == 0.0 => Some(0.0),
            ScalarFn::Affine { slope, intercept } if intercept == 0.0 => Some(slope),
            _ => None,
        }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        let finite = match *self {
            ScalarFn::Constant { value } => value.is_finite(),
            ScalarFn::Affine { slope, intercept } => slope.is_finite() && intercept.is_finite(),
            ScalarFn::Sine {
                amplitude,
                frequency,
                phase,
                offset,
            } => [amplitude, frequency, phase, offset].iter().all(|v| v.is_finite()),
        };
        if finite {
            Ok(())
        } else {
            Err(invalid(name, "coefficient parameters must be finite"))
        }
    }
}

/// The coefficient triple `(mu, sigma, gamma)` with its structural constants.
///
/// `c` bounds first differences and `b` the curvature term of the
/// second-difference condition; `big_l` is the constant of the global
/// second-difference assumption, implied by `(c, b)` as `max(c, b / 2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSet {
    pub name: String,
    pub mu: ScalarFn,
    pub sigma: ScalarFn,
    pub gamma: ScalarFn,
    pub c: f64,
    pub b: f64,
    pub big_l: f64,
}

impl CoefficientSet {
    /// Builds the set with `c = 1 + max(0.5, Lipschitz constant)` and
    /// `b = 1 + max(0.5, sup|f''|)`.
    pub fn new(name: impl Into<String>, mu: ScalarFn, sigma: ScalarFn, gamma: ScalarFn) -> Result<Self> {
        mu.validate("mu")?;
        sigma.validate("sigma")?;
        gamma.validate("gamma")?;
        let lip = mu.lipschitz().max(sigma.lipschitz()).max(gamma.lipschitz());
        let curv = mu.curvature().max(sigma.curvature()).max(gamma.curvature());
        let c = 1.0 + lip.max(0.5);
        let b = 1.0 + curv.max(0.5);
        Ok(Self {
            name: name.into(),
            mu,
            sigma,
            gamma,
            c,
            b,
            big_l: c.max(0.5 * b),
        })
    }

    pub fn with_constants(mut self, c: f64, b: f64) -> Result<Self> {
        if !(c > 1.0) || !c.is_finite() {
            return Err(invalid("c", format!("must be finite and > 1, got {c}")));
        }
        if !(b > 1.0) || !b.is_finite() {
            return Err(invalid("b", format!("must be finite and > 1, got {b}")));
        }
        self.c = c;
        self.b = b;
        self.big_l = c.max(0.5 * b);
        Ok(self)
    }

    #[inline]
    pub fn mu(&self, x: f64) -> f64 {
        self.mu.eval(x)
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        self.sigma.eval(x)
    }

    #[inline]
    pub fn gamma(&self, x: f64) -> f64 {
        self.gamma.eval(x)
    }

    /// Slopes `(a, b, g)` when all three coefficients are linear through the origin.
    pub fn linear_slopes(&self) -> Option<(f64, f64, f64)> {
        Some((
            self.mu.linear_slope()?,
            self.sigma.linear_slope()?,
            self.gamma.linear_slope()?,
        ))
    }

    /// `(lambda, sigma0)` when the model is `dX = -lambda X dt + sigma0 dW + dZ`.
    pub fn ou_parameters(&self) -> Option<(f64, f64)> {
        let lambda = -self.mu.linear_slope()?;
        let sigma0 = match self.sigma {
            ScalarFn::Constant { value } => value,
            ScalarFn::Affine { slope, intercept } if slope == 0.0 => intercept,
            _ => return None,
        };
        let unit_gamma = match self.gamma {
            ScalarFn::Constant { value } => value == 1.0,
            ScalarFn::Affine { slope, intercept } => slope == 0.0 && intercept == 1.0,
            _ => false,
        };
        unit_gamma.then_some((lambda, sigma0))
    }
}

/// Built-in coefficient sets.
pub mod presets {
    use super::*;

    pub const NAMES: [&str; 3] = ["linear", "ou-additive", "trig"];

    /// `mu = a x + a0`, `sigma = b x + b0`, `gamma = g x + g0`.
    pub fn linear(a: f64, a0: f64, b: f64, b0: f64, g: f64, g0: f64) -> Result<CoefficientSet> {
        CoefficientSet::new(
            "linear",
            ScalarFn::Affine {
                slope: a,
                intercept: a0,
            },
            ScalarFn::Affine {
                slope: b,
                intercept: b0,
            },
            ScalarFn::Affine {
                slope: g,
                intercept: g0,
            },
        )
    }

    /// `dX = 0.1 X dt + 0.5 X dW + 0.2 X- dZ`.
    pub fn linear_default() -> CoefficientSet {
        linear(0.1, 0.0, 0.5, 0.0, 0.2, 0.0).expect("finite")
    }

    /// `dX = -lambda X dt + sigma0 dW + dZ`.
    pub fn ou_additive(lambda: f64, sigma0: f64) -> Result<CoefficientSet> {
        CoefficientSet::new(
            "ou-additive",
            ScalarFn::Affine {
                slope: -lambda,
                intercept: 0.0,
            },
            ScalarFn::Constant { value: sigma0 },
            ScalarFn::Constant { value: 1.0 },
        )
    }

    pub fn ou_additive_default() -> CoefficientSet {
        ou_additive(1.0, 0.5).expect("finite")
    }

    /// Bounded smooth coefficients: `mu = 0.5 sin x`, `sigma = 0.3 sin(x + 1) + 0.5`,
    /// `gamma = 0.2 sin(2x) + 0.3`.
    pub fn trig_default() -> CoefficientSet {
        CoefficientSet::new(
            "trig",
            ScalarFn::Sine {
                amplitude: 0.5,
                frequency: 1.0,
                phase: 0.0,
                offset: 0.0,
            },
            ScalarFn::Sine {
                amplitude: 0.3,
                frequency: 1.0,
                phase: 1.0,
                offset: 0.5,
            },
            ScalarFn::Sine {
                amplitude: 0.2,
                frequency: 2.0,
                phase: 0.0,
                offset: 0.3,
            },
        )
        .expect("finite")
    }

    pub fn by_name(name: &str) -> Option<CoefficientSet> {
        match name {
            "linear" => Some(linear_default()),
            "ou-additive" => Some(ou_additive_default()),
            "trig" => Some(trig_default()),
            _ => None,
        }
    }

    pub fn all() -> Vec<CoefficientSet> {
        NAMES.iter().filter_map(|n| by_name(n)).collect()
    }
}
