use serde::Serialize;

use crate::error::{invalid, Result};

/// Exponents and evaluation lattice for the temporal-spatial studies.
///
/// `kappa2` is not a free parameter: it is always the Hölder conjugate
/// `kappa1 / (kappa1 - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderStudyConfig {
    pub p: f64,
    pub m: f64,
    pub kappa1: f64,
    /// Time indices as fractions `k / n` of the horizon.
    pub time_fractions: Vec<f64>,
    pub ns: Vec<usize>,
    pub x_values: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl Default for HolderStudyConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            m: 2.0,
            kappa1: 2.0,
            time_fractions: vec![0.25, 0.5, 0.75, 1.0],
            ns: (4..=10).map(|k| 1usize << k).collect(),
            x_values: vec![1.0],
            offsets: vec![1.0],
        }
    }
}

impl HolderStudyConfig {
    pub fn new(p: f64, m: f64, kappa1: f64) -> Result<Self> {
        let cfg = Self {
            p,
            m,
            kappa1,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kappa2(&self) -> f64 {
        self.kappa1 / (self.kappa1 - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 2.0) || !self.p.is_finite() {
            return Err(invalid("p", format!("p must be >= 2, got {}", self.p)));
        }
        if !(self.m > 1.0) || !self.m.is_finite() {
            return Err(invalid("m", format!("m must be > 1, got {}", self.m)));
        }
        if !(self.kappa1 > 1.0) || !self.kappa1.is_finite() {
            return Err(invalid("kappa1", format!("kappa1 must be > 1, got {}", self.kappa1)));
        }
        if self.time_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(invalid("time_fractions", "fractions must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Decay exponent in `n` of the pointwise strong error.
    pub fn pointwise_exponent(&self) -> f64 {
        1.0 / self.p
    }

    /// Decay exponent of the mixed initial-value difference.
    pub fn mixed_exponent(&self) -> f64 {
        1.0 / (self.p * self.m)
    }

    /// Decay exponent of the temporal-spatial difference and of the
    /// normalized functional, `1 / (p (m v kappa2))`.
    pub fn holder_exponent(&self) -> f64 {
        1.0 / (self.p * self.m.max(self.kappa2()))
    }

    /// Hölder exponent in the start time, `1 / (p kappa1)`.
    pub fn start_time_exponent(&self) -> f64 {
        1.0 / (self.p * self.kappa1)
    }
}
