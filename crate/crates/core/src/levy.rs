//! Finite-activity Lévy measures.
//!
//! A measure `nu = lambda * law(J)` is described by its total intensity
//! `lambda` (jumps per unit time) and the law of a single jump size `J`.
//! The pure-jump driver is the compensated compound Poisson process
//! `Z_t = sum_{tau_i <= t} J_i - t * lambda * E[J]`.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};

/// Law of a single jump size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpLaw {
    /// Discrete law `sum_i w_i delta_{z_i}`.
    PointMasses { sizes: Vec<f64>, weights: Vec<f64> },
    Gaussian { mean: f64, sd: f64 },
    /// `+Exp(rate_up)` with probability `mix`, `-Exp(rate_down)` otherwise.
    TwoSidedExponential {
        rate_up: f64,
        rate_down: f64,
        mix: f64,
    },
    Uniform { low: f64, high: f64 },
}

impl JumpLaw {
    pub fn name(&self) -> &'static str {
        match self {
            JumpLaw::PointMasses { .. } => "point-mass",
            JumpLaw::Gaussian { .. } => "gaussian",
            JumpLaw::TwoSidedExponential { .. } => "two-sided-exponential",
            JumpLaw::Uniform { .. } => "uniform",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::PointMasses { sizes, weights } => {
                if sizes.is_empty() || sizes.len() != weights.len() {
                    return Err(invalid(
                        "law.sizes",
                        "point masses need matching, nonempty sizes and weights",
                    ));
                }
                if sizes.iter().any(|z| *z == 0.0 || !z.is_finite()) {
                    return Err(invalid("law.sizes", "jump sizes must be finite and nonzero"));
                }
                if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                    return Err(invalid("law.weights", "weights must be positive"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(invalid("law.weights", format!("weights sum to {total}, not 1")));
                }
            }
            JumpLaw::Gaussian { mean, sd } => {
                if !mean.is_finite() || !(*sd > 0.0) || !sd.is_finite() {
                    return Err(invalid("law.sd", "gaussian jumps need finite mean and sd > 0"));
                }
            }
            JumpLaw::TwoSidedExponential {
                rate_up,
                rate_down,
                mix,
            } => {
                if !(*rate_up > 0.0) || !(*rate_down > 0.0) || !rate_up.is_finite() || !rate_down.is_finite() {
                    return Err(invalid("law.rate", "exponential rates must be positive"));
                }
                if !(0.0..=1.0).contains(mix) {
                    return Err(invalid("law.mix", "mix must lie in [0, 1]"));
                }
            }
            JumpLaw::Uniform { low, high } => {
                if !(low < high) || !low.is_finite() || !high.is_finite() {
                    return Err(invalid("law.low", "uniform jumps need low < high"));
                }
            }
        }
        Ok(())
    }

    /// `E|J|^p`.
    pub fn abs_moment(&self, p: f64) -> Result<f64> {
        match *self {
            JumpLaw::PointMasses {
                ref sizes,
                ref weights,
            } => Ok(sizes
                .iter()
                .zip(weights)
                .map(|(z, w)| w * z.abs().powf(p))
                .sum()),
            JumpLaw::Gaussian { mean, sd } => gaussian_abs_moment(mean, sd, p),
            JumpLaw::TwoSidedExponential {
                rate_up,
                rate_down,
                mix,
            } => {
                let g = gamma(p + 1.0);
                Ok(mix * g / rate_up.powf(p) + (1.0 - mix) * g / rate_down.powf(p))
            }
            JumpLaw::Uniform { low, high } => {
                // sign(z)|z|^{p+1}/(p+1) is an antiderivative of |z|^p
                let prim = |z: f64| z.signum() * z.abs().powf(p + 1.0) / (p + 1.0);
                Ok((prim(high) - prim(low)) / (high - low))
            }
        }
    }

    /// `E[J]`.
    pub fn mean(&self) -> f64 {
        match *self {
            JumpLaw::PointMasses {
                ref sizes,
                ref weights,
            } => sizes.iter().zip(weights).map(|(z, w)| w * z).sum(),
            JumpLaw::Gaussian { mean, .. } => mean,
            JumpLaw::TwoSidedExponential {
                rate_up,
                rate_down,
                mix,
            } => mix / rate_up - (1.0 - mix) / rate_down,
            JumpLaw::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::PointMasses {
                ref sizes,
                ref weights,
            } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (z, w) in sizes.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return *z;
                    }
                }
                sizes[sizes.len() - 1]
            }
            JumpLaw::Gaussian { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            JumpLaw::TwoSidedExponential {
                rate_up,
                rate_down,
                mix,
            } => {
                let up = rng.random::<f64>() < mix;
                if up {
                    Exp::new(rate_up).expect("validated").sample(rng)
                } else {
                    -Exp::new(rate_down).expect("validated").sample(rng)
                }
            }
            JumpLaw::Uniform { low, high } => rng.random_range(low..high),
        }
    }
}

fn gaussian_abs_moment(mean: f64, sd: f64, p: f64) -> Result<f64> {
    if mean == 0.0 {
        // E|N(0, s^2)|^p = s^p 2^{p/2} Gamma((p+1)/2) / sqrt(pi)
        return Ok(sd.powf(p) * 2f64.powf(0.5 * p) * gamma(0.5 * (p + 1.0)) / PI.sqrt());
    }
    if p == 1.0 {
        // folded normal
        let r = mean / sd;
        return Ok(sd * (2.0 / PI).sqrt() * (-0.5 * r * r).exp() + mean * erf(r / SQRT_2));
    }
    if p.fract() == 0.0 && (p as u64) % 2 == 0 {
        let k_max = p as u64;
        // E J^p = sum_{k even} C(p,k) mean^{p-k} sd^k (k-1)!!
        let mut total = 0.0;
        let mut binom = 1.0;
        let mut dfact = 1.0;
        for k in 0..=k_max {
            if k > 0 {
                binom *= (k_max - k + 1) as f64 / k as f64;
            }
            if k % 2 == 0 {
                if k >= 2 {
                    dfact *= (k - 1) as f64;
                }
                total += binom * mean.powi((k_max - k) as i32) * sd.powi(k as i32) * dfact;
            }
        }
        return Ok(total);
    }
    Err(Error::UnsupportedMoment { law: "gaussian", p })
}

/// Finite-activity Lévy measure `nu = intensity * law`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyMeasureSpec {
    pub intensity: f64,
    pub law: JumpLaw,
}

/// One jump of the compound Poisson part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub size: f64,
}

impl LevyMeasureSpec {
    pub fn new(intensity: f64, law: JumpLaw) -> Result<Self> {
        let spec = Self { intensity, law };
        spec.validate()?;
        Ok(spec)
    }

    /// A measure without jumps.
    pub fn none() -> Self {
        Self {
            intensity: 0.0,
            law: JumpLaw::PointMasses {
                sizes: vec![1.0],
                weights: vec![1.0],
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0) || !self.intensity.is_finite() {
            return Err(invalid("intensity", "must be finite and >= 0"));
        }
        self.law.validate()
    }

    /// `m_p = int |z|^p nu(dz) = lambda E|J|^p`.
    pub fn moment(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(invalid("p", format!("moment order must be >= 1, got {p}")));
        }
        Ok(self.intensity * self.law.abs_moment(p)?)
    }

    /// Signed first moment `int z nu(dz)`; the compensator of `Z` runs at
    /// this rate.
    pub fn compensator_drift(&self) -> f64 {
        self.intensity * self.law.mean()
    }

    /// Jumps of the compound Poisson process on `[0, horizon]`: a
    /// Poisson(`lambda T`) count, then sorted uniform times and iid sizes.
    pub fn sample_jumps<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Vec<JumpEvent> {
        let mean_count = self.intensity * horizon;
        if mean_count <= 0.0 {
            return Vec::new();
        }
        let count = Poisson::new(mean_count).expect("finite positive mean").sample(rng) as usize;
        let mut times: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * horizon).collect();
        times.sort_by(f64::total_cmp);
        times
            .into_iter()
            .map(|time| JumpEvent {
                time,
                size: self.law.sample(rng),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{PathSeed, Substream};

    /// Independent Monte Carlo oracle for `lambda E|J|^p`: mean and standard error.
    fn mc_moment(spec: &LevyMeasureSpec, p: f64, draws: usize, seed: u64) -> (f64, f64) {
        let mut rng = PathSeed::new(seed, 0).stream(Substream::Auxiliary);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let v = spec.law.sample(&mut rng).abs().powf(p);
            s += v;
            s2 += v * v;
        }
        let m = s / draws as f64;
        let var = s2 / draws as f64 - m * m;
        (spec.intensity * m, spec.intensity * (var / draws as f64).sqrt())
    }

    fn laws() -> Vec<LevyMeasureSpec> {
        vec![
            LevyMeasureSpec::new(
                1.5,
                JumpLaw::PointMasses {
                    sizes: vec![-0.5, 1.0, 2.0],
                    weights: vec![0.3, 0.5, 0.2],
                },
            )
            .unwrap(),
            LevyMeasureSpec::new(3.0, JumpLaw::Gaussian { mean: 0.0, sd: 1.0 }).unwrap(),
            LevyMeasureSpec::new(2.0, JumpLaw::Gaussian { mean: 0.3, sd: 0.7 }).unwrap(),
            LevyMeasureSpec::new(
                1.0,
                JumpLaw::TwoSidedExponential {
                    rate_up: 4.0,
                    rate_down: 2.0,
                    mix: 0.6,
                },
            )
            .unwrap(),
            LevyMeasureSpec::new(0.7, JumpLaw::Uniform { low: -1.0, high: 2.0 }).unwrap(),
            LevyMeasureSpec::new(0.7, JumpLaw::Uniform { low: 0.5, high: 2.0 }).unwrap(),
        ]
    }

    #[test]
    fn point_mass_moments() {
        let spec = LevyMeasureSpec::new(
            2.0,
            JumpLaw::PointMasses {
                sizes: vec![0.5],
                weights: vec![1.0],
            },
        )
        .unwrap();
        assert_eq!(spec.moment(2.0).unwrap(), 0.5);
        assert_eq!(spec.compensator_drift(), 1.0);

        let sym = LevyMeasureSpec::new(
            2.0,
            JumpLaw::PointMasses {
                sizes: vec![1.0, -1.0],
                weights: vec![0.5, 0.5],
            },
        )
        .unwrap();
        assert_eq!(sym.moment(1.0).unwrap(), 2.0);
        assert_eq!(sym.compensator_drift(), 0.0);
    }

    #[test]
    fn gaussian_second_moment_matches_oracle() {
        let spec = LevyMeasureSpec::new(3.0, JumpLaw::Gaussian { mean: 0.0, sd: 1.0 }).unwrap();
        let closed = spec.moment(2.0).unwrap();
        assert!((closed - 3.0).abs() < 1e-12);
        let (mc, se) = mc_moment(&spec, 2.0, 1_000_000, 11);
        assert!((mc - closed).abs() < 3.0 * se, "mc {mc} se {se}");
    }

    #[test]
    fn one_sided_exponential_drift() {
        let spec = LevyMeasureSpec::new(
            1.0,
            JumpLaw::TwoSidedExponential {
                rate_up: 4.0,
                rate_down: 1.0,
                mix: 1.0,
            },
        )
        .unwrap();
        assert!((spec.compensator_drift() - 0.25).abs() < 1e-15);
        let mut rng = PathSeed::new(5, 0).stream(Substream::Auxiliary);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| spec.law.sample(&mut rng)).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / n as f64).sqrt();
        assert!((m - 0.25).abs() < 4.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn closed_form_moments_agree_with_monte_carlo() {
        for (i, spec) in laws().iter().enumerate() {
            for p in [1.0, 2.0, 4.0] {
                let closed = spec.moment(p).unwrap();
                let (mc, se) = mc_moment(spec, p, 1_000_000, 100 + i as u64);
                assert!(
                    (mc - closed).abs() < 4.0 * se,
                    "law {i} p {p}: closed {closed} mc {mc} se {se}"
                );
            }
        }
    }

    #[test]
    fn gaussian_with_mean_and_fractional_order_is_unsupported() {
        let spec = LevyMeasureSpec::new(1.0, JumpLaw::Gaussian { mean: 0.2, sd: 1.0 }).unwrap();
        assert!(matches!(spec.moment(3.0), Err(Error::UnsupportedMoment { .. })));
        assert!(matches!(spec.moment(2.5), Err(Error::UnsupportedMoment { .. })));
        assert!(spec.moment(2.0).is_ok());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(LevyMeasureSpec::new(-1.0, JumpLaw::Gaussian { mean: 0.0, sd: 1.0 }).is_err());
        let zero_size = JumpLaw::PointMasses {
            sizes: vec![0.0],
            weights: vec![1.0],
        };
        assert!(LevyMeasureSpec::new(1.0, zero_size).is_err());
        let bad_weights = JumpLaw::PointMasses {
            sizes: vec![1.0, 2.0],
            weights: vec![0.5, 0.6],
        };
        assert!(LevyMeasureSpec::new(1.0, bad_weights).is_err());
        let spec = LevyMeasureSpec::new(1.0, JumpLaw::Gaussian { mean: 0.0, sd: 1.0 }).unwrap();
        assert!(spec.moment(0.5).is_err());
    }

    #[test]
    fn no_intensity_no_jumps() {
        let spec = LevyMeasureSpec::new(0.0, JumpLaw::Gaussian { mean: 0.0, sd: 1.0 }).unwrap();
        let mut rng = PathSeed::new(1, 0).stream(Substream::Jumps);
        assert!(spec.sample_jumps(2.0, &mut rng).is_empty());
    }

    #[test]
    fn jump_counts_match_poisson_mean_and_variance() {
        let spec = LevyMeasureSpec::new(5.0, JumpLaw::Gaussian { mean: 0.0, sd: 1.0 }).unwrap();
        let horizon = 2.0;
        let runs = 100_000;
        let counts: Vec<f64> = (0..runs)
            .map(|i| {
                let mut rng = PathSeed::new(9, i).stream(Substream::Jumps);
                spec.sample_jumps(horizon, &mut rng).len() as f64
            })
            .collect();
        let m = counts.iter().sum::<f64>() / runs as f64;
        let v = counts.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / (runs as f64 - 1.0);
        let lt = 10.0;
        // sd of the sample mean is sqrt(lt / runs); sd of the sample variance
        // is about sqrt((mu4 - sigma^4) / runs) with mu4 = lt + 3 lt^2.
        assert!((m - lt).abs() < 4.0 * (lt / runs as f64).sqrt(), "mean {m}");
        let var_sd = ((lt + 3.0 * lt * lt - lt * lt) / runs as f64).sqrt();
        assert!((v - lt).abs() < 4.0 * var_sd, "var {v}");
    }

    #[test]
    fn jumps_are_deterministic_per_seed() {
        let spec = LevyMeasureSpec::new(4.0, JumpLaw::Uniform { low: -1.0, high: 1.0 }).unwrap();
        let a = spec.sample_jumps(1.0, &mut PathSeed::new(3, 17).stream(Substream::Jumps));
        let b = spec.sample_jumps(1.0, &mut PathSeed::new(3, 17).stream(Substream::Jumps));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.time.to_bits(), y.time.to_bits());
            assert_eq!(x.size.to_bits(), y.size.to_bits());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn times_sorted_within_horizon(seed in any::<u64>(), horizon in 0.01f64..10.0) {
                let spec = LevyMeasureSpec::new(3.0, JumpLaw::Gaussian { mean: 0.1, sd: 1.0 }).unwrap();
                let jumps = spec.sample_jumps(horizon, &mut PathSeed::new(seed, 0).stream(Substream::Jumps));
                for w in jumps.windows(2) {
                    prop_assert!(w[0].time <= w[1].time);
                }
                for j in &jumps {
                    prop_assert!(j.time >= 0.0 && j.time <= horizon);
                    prop_assert!(j.size != 0.0);
                }
            }
        }
    }
}
