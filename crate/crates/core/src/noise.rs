//! One realization of the driving pair `(W, Z)`.
//!
//! `W` is sampled on a uniform dyadic fine grid of `2^L` steps; the jumps of
//! `Z` keep their exact times. Every scheme in a study consumes increments
//! aggregated from the same path, which is what couples the coarse schemes
//! to the fine reference.
//!
//! Both processes are stored on a fixed-point lattice: values are integer
//! multiples ("ticks") of a power-of-two quantum roughly `2^-40` times the
//! natural scale of the process. Sums of lattice values are exact in `f64`,
//! so coarse increments telescope bit-for-bit and aggregating an
//! intermediate coarsening reproduces the direct one exactly. The
//! quantization error (below `1e-12` relative) is far under any Monte Carlo
//! resolution.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::levy::{JumpEvent, LevyMeasureSpec};
use crate::rng::{PathSeed, Substream};

const LATTICE_BITS: i32 = 40;
const EXACT_LIMIT: i64 = 1 << 53;

fn quantum_for(scale: f64) -> f64 {
    let exponent = scale.max(f64::MIN_POSITIVE).log2().ceil() as i32;
    2f64.powi(exponent - LATTICE_BITS)
}

#[derive(Debug, Clone)]
pub struct NoisePath {
    horizon: f64,
    fine_level: u32,
    steps: usize,
    w_quantum: f64,
    z_quantum: f64,
    /// `W(t_j)` in ticks, `j = 0..=steps`.
    w_ticks: Vec<i64>,
    jumps: Vec<JumpEvent>,
    /// Jump sizes in ticks, parallel to `jumps`.
    jump_ticks: Vec<i64>,
    /// `sum_{tau_i <= t_j} J_i` in ticks.
    jump_cum: Vec<i64>,
    drift_rate: f64,
    seed: Option<PathSeed>,
}

impl NoisePath {
    /// Draws `2^fine_level` Brownian increments from the path's Brownian
    /// substream and the compound Poisson jumps from its jump substream.
    pub fn generate(horizon: f64, fine_level: u32, levy: &LevyMeasureSpec, seed: PathSeed) -> Result<Self> {
        check_dimensions(horizon, fine_level)?;
        let steps = 1usize << fine_level;
        let sd = (horizon / steps as f64).sqrt();
        let mut rng = seed.stream(Substream::Brownian);
        let increments: Vec<f64> = (0..steps)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        let jumps = levy.sample_jumps(horizon, &mut seed.stream(Substream::Jumps));
        let mut path = Self::assemble(horizon, fine_level, &increments, jumps, levy)?;
        path.seed = Some(seed);
        Ok(path)
    }

    /// Builds a path from given increments and jumps (sizes are snapped to
    /// the lattice; jumps that snap to zero are dropped).
    pub fn from_parts(
        horizon: f64,
        fine_level: u32,
        brownian_increments: &[f64],
        mut jumps: Vec<JumpEvent>,
        drift_rate: f64,
    ) -> Result<Self> {
        check_dimensions(horizon, fine_level)?;
        if brownian_increments.len() != 1usize << fine_level {
            return Err(invalid(
                "brownian_increments",
                format!("expected {} increments, got {}", 1usize << fine_level, brownian_increments.len()),
            ));
        }
        if jumps.iter().any(|j| !(0.0..=horizon).contains(&j.time) || j.size == 0.0) {
            return Err(invalid("jumps", "jump times must lie in [0, T] with nonzero sizes"));
        }
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        let m2_proxy = jumps.iter().map(|j| j.size * j.size).sum::<f64>();
        let z_scale = horizon.sqrt().max(m2_proxy.sqrt()).max(drift_rate.abs() * horizon);
        Self::build(horizon, fine_level, brownian_increments, jumps, drift_rate, z_scale)
    }

    fn assemble(
        horizon: f64,
        fine_level: u32,
        increments: &[f64],
        jumps: Vec<JumpEvent>,
        levy: &LevyMeasureSpec,
    ) -> Result<Self> {
        let drift_rate = levy.compensator_drift();
        let m2 = levy.moment(2.0)?;
        let max_jump = jumps.iter().map(|j| j.size.abs()).fold(0.0, f64::max);
        let z_scale = horizon
            .sqrt()
            .max((m2 * horizon).sqrt())
            .max(drift_rate.abs() * horizon)
            .max(max_jump);
        Self::build(horizon, fine_level, increments, jumps, drift_rate, z_scale)
    }

    fn build(
        horizon: f64,
        fine_level: u32,
        increments: &[f64],
        jumps: Vec<JumpEvent>,
        drift_rate: f64,
        z_scale: f64,
    ) -> Result<Self> {
        let steps = increments.len();
        let w_quantum = quantum_for(horizon.sqrt());
        let z_quantum = quantum_for(z_scale);

        let mut w_ticks = Vec::with_capacity(steps + 1);
        let mut acc = 0i64;
        w_ticks.push(0);
        for dw in increments {
            acc += (dw / w_quantum).round() as i64;
            if acc.abs() >= EXACT_LIMIT {
                return Err(Error::LatticeOverflow);
            }
            w_ticks.push(acc);
        }

        let mut kept = Vec::with_capacity(jumps.len());
        let mut jump_ticks = Vec::with_capacity(jumps.len());
        for jump in jumps {
            let ticks = (jump.size / z_quantum).round() as i64;
            if ticks != 0 {
                kept.push(JumpEvent {
                    time: jump.time,
                    size: ticks as f64 * z_quantum,
                });
                jump_ticks.push(ticks);
            }
        }

        let mut path = Self {
            horizon,
            fine_level,
            steps,
            w_quantum,
            z_quantum,
            w_ticks,
            jumps: kept,
            jump_ticks,
            jump_cum: Vec::with_capacity(steps + 1),
            drift_rate,
            seed: None,
        };
        let mut next = 0;
        let mut cum = 0i64;
        for j in 0..=steps {
            let t = path.node_time(j);
            while next < path.jumps.len() && path.jumps[next].time <= t {
                cum += path.jump_ticks[next];
                next += 1;
            }
            if cum.abs() >= EXACT_LIMIT || path.compensator_ticks(j).abs() >= EXACT_LIMIT {
                return Err(Error::LatticeOverflow);
            }
            path.jump_cum.push(cum);
        }
        Ok(path)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn fine_level(&self) -> u32 {
        self.fine_level
    }

    /// Number of fine steps, `2^L`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn jumps(&self) -> &[JumpEvent] {
        &self.jumps
    }

    pub fn drift_rate(&self) -> f64 {
        self.drift_rate
    }

    pub fn seed(&self) -> Option<PathSeed> {
        self.seed
    }

    /// Time of fine node `j`, `T j / 2^L`.
    #[inline]
    pub fn node_time(&self, j: usize) -> f64 {
        fine_node_time(self.horizon, self.steps, j)
    }

    /// Fine node index of `t`; `t` must be a node up to `1e-12 T`.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        fine_node_index(self.horizon, self.steps, t)
    }

    pub fn brownian_increments(&self) -> Vec<f64> {
        self.w_ticks
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 * self.w_quantum)
            .collect()
    }

    /// `W(t)` for a fine-grid time `t`; there is no interpolation between nodes.
    pub fn w_at(&self, t: f64) -> Result<f64> {
        Ok(self.w_node(self.node_index(t)?))
    }

    #[inline]
    pub fn w_node(&self, j: usize) -> f64 {
        self.w_ticks[j] as f64 * self.w_quantum
    }

    #[inline]
    fn compensator_ticks(&self, j: usize) -> i64 {
        (self.drift_rate * self.node_time(j) / self.z_quantum).round() as i64
    }

    /// `Z(t_j)`.
    #[inline]
    pub fn z_node(&self, j: usize) -> f64 {
        (self.jump_cum[j] - self.compensator_ticks(j)) as f64 * self.z_quantum
    }

    fn z_eval(&self, t: f64, inclusive: bool) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfHorizon {
                time: t,
                horizon: self.horizon,
            });
        }
        let count = if inclusive {
            self.jumps.partition_point(|j| j.time <= t)
        } else {
            self.jumps.partition_point(|j| j.time < t)
        };
        let ticks: i64 = self.jump_ticks[..count].iter().sum();
        Ok(match self.node_index(t) {
            Ok(j) => (ticks - self.compensator_ticks(j)) as f64 * self.z_quantum,
            Err(_) => ticks as f64 * self.z_quantum - self.drift_rate * t,
        })
    }

    /// `Z(t) = sum_{tau_i <= t} J_i - drift_rate t`.
    pub fn z_at(&self, t: f64) -> Result<f64> {
        self.z_eval(t, true)
    }

    /// Left limit `Z(t-)`.
    pub fn z_at_left(&self, t: f64) -> Result<f64> {
        self.z_eval(t, false)
    }

    /// `W(t_{j1}) - W(t_{j0})`.
    #[inline]
    pub fn dw(&self, j0: usize, j1: usize) -> f64 {
        (self.w_ticks[j1] - self.w_ticks[j0]) as f64 * self.w_quantum
    }

    /// `Z(t_{j1}) - Z(t_{j0})`: jumps in `(t_{j0}, t_{j1}]` minus the compensator.
    #[inline]
    pub fn dz(&self, j0: usize, j1: usize) -> f64 {
        let jumps = self.jump_cum[j1] - self.jump_cum[j0];
        let comp = self.compensator_ticks(j1) - self.compensator_ticks(j0);
        (jumps - comp) as f64 * self.z_quantum
    }

    /// Per-interval `(dW, dZ)` on the uniform grid with `coarse_n` steps.
    pub fn coarsen_increments(&self, coarse_n: usize) -> Result<Vec<(f64, f64)>> {
        if coarse_n == 0 || self.steps % coarse_n != 0 {
            return Err(Error::NotADivisor {
                coarse: coarse_n,
                fine: self.steps,
            });
        }
        let ratio = self.steps / coarse_n;
        Ok((0..coarse_n)
            .map(|k| (self.dw(k * ratio, (k + 1) * ratio), self.dz(k * ratio, (k + 1) * ratio)))
            .collect())
    }
}

/// Time of node `j` on the uniform grid of `steps` cells over `[0, horizon]`.
#[inline]
pub fn fine_node_time(horizon: f64, steps: usize, j: usize) -> f64 {
    horizon * (j as f64 / steps as f64)
}

/// Index of the node at time `t`, which must be a node up to `1e-12 horizon`.
pub fn fine_node_index(horizon: f64, steps: usize, t: f64) -> Result<usize> {
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::OutOfHorizon { time: t, horizon });
    }
    let j = (t / horizon * steps as f64).round() as usize;
    if (fine_node_time(horizon, steps, j) - t).abs() > 1e-12 * horizon {
        return Err(Error::OffGrid { time: t, horizon, steps });
    }
    Ok(j)
}

/// Sums consecutive groups of `group` increments.
pub fn aggregate_increments(increments: &[(f64, f64)], group: usize) -> Result<Vec<(f64, f64)>> {
    if group == 0 || increments.len() % group != 0 {
        return Err(Error::NotADivisor {
            coarse: group,
            fine: increments.len(),
        });
    }
    Ok(increments
        .chunks(group)
        .map(|c| c.iter().fold((0.0, 0.0), |(w, z), (dw, dz)| (w + dw, z + dz)))
        .collect())
}

fn check_dimensions(horizon: f64, fine_level: u32) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid("horizon", "must be finite and > 0"));
    }
    if !(1..=30).contains(&fine_level) {
        return Err(invalid("fine_level", format!("must lie in [1, 30], got {fine_level}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::JumpLaw;

    fn levy() -> LevyMeasureSpec {
        LevyMeasureSpec::new(3.0, JumpLaw::Gaussian { mean: 0.2, sd: 0.5 }).unwrap()
    }

    fn bits(v: &[(f64, f64)]) -> Vec<(u64, u64)> {
        v.iter().map(|(a, b)| (a.to_bits(), b.to_bits())).collect()
    }

    #[test]
    fn no_jumps_without_intensity() {
        let spec = LevyMeasureSpec::new(0.0, JumpLaw::Gaussian { mean: 1.0, sd: 1.0 }).unwrap();
        let path = NoisePath::generate(1.0, 6, &spec, PathSeed::new(1, 2)).unwrap();
        assert!(path.jumps().is_empty());
        for j in 0..=path.steps() {
            assert_eq!(path.z_node(j), 0.0);
        }
        assert_eq!(path.z_at(0.3).unwrap(), 0.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = NoisePath::generate(1.5, 8, &levy(), PathSeed::new(42, 7)).unwrap();
        let b = NoisePath::generate(1.5, 8, &levy(), PathSeed::new(42, 7)).unwrap();
        assert_eq!(a.w_ticks, b.w_ticks);
        assert_eq!(a.jump_ticks, b.jump_ticks);
        assert_eq!(bits(&a.coarsen_increments(16).unwrap()), bits(&b.coarsen_increments(16).unwrap()));
        assert_eq!(a.seed(), Some(PathSeed::new(42, 7)));
    }

    #[test]
    fn w_evaluation() {
        let path = NoisePath::generate(2.0, 1, &levy(), PathSeed::new(3, 0)).unwrap();
        let inc = path.brownian_increments();
        assert_eq!(inc.len(), 2);
        assert_eq!(path.w_at(0.0).unwrap(), 0.0);
        assert_eq!(path.w_at(1.0).unwrap(), inc[0]);
        assert_eq!(path.w_at(2.0).unwrap(), inc[0] + inc[1]);
        assert!(matches!(path.w_at(0.5), Err(Error::OffGrid { .. })));
        assert!(matches!(path.w_at(2.5), Err(Error::OutOfHorizon { .. })));
    }

    #[test]
    fn increment_sum_is_terminal_value() {
        let path = NoisePath::generate(1.0, 10, &levy(), PathSeed::new(9, 1)).unwrap();
        let total: f64 = path.brownian_increments().iter().sum();
        assert_eq!(total, path.w_at(1.0).unwrap());
    }

    #[test]
    fn pure_compensator() {
        let path = NoisePath::from_parts(1.0, 4, &[0.0; 16], vec![], 1.0).unwrap();
        assert_eq!(path.z_at(0.5).unwrap(), -0.5);
        assert!((path.z_at(0.3).unwrap() + 0.3).abs() < 1e-15);
    }

    #[test]
    fn cadlag_convention() {
        let jumps = vec![JumpEvent { time: 0.3, size: 2.0 }];
        let path = NoisePath::from_parts(1.0, 4, &[0.0; 16], jumps, 0.0).unwrap();
        assert_eq!(path.z_at(0.3).unwrap(), 2.0);
        assert_eq!(path.z_at_left(0.3).unwrap(), 0.0);
        assert_eq!(path.z_at(0.29).unwrap(), 0.0);
        assert_eq!(path.z_at_left(0.31).unwrap(), 2.0);
    }

    #[test]
    fn jump_on_a_node_belongs_to_the_interval_it_closes() {
        let jumps = vec![JumpEvent { time: 0.25, size: 1.5 }];
        let path = NoisePath::from_parts(1.0, 3, &[0.0; 8], jumps, 0.0).unwrap();
        let coarse = path.coarsen_increments(4).unwrap();
        assert_eq!(coarse[0].1, 1.5);
        assert_eq!(coarse[1].1, 0.0);
    }

    #[test]
    fn coarsening_rejects_non_divisors() {
        let path = NoisePath::generate(1.0, 4, &levy(), PathSeed::new(1, 1)).unwrap();
        assert!(matches!(path.coarsen_increments(3), Err(Error::NotADivisor { .. })));
        assert!(path.coarsen_increments(0).is_err());
    }

    #[test]
    fn identity_coarsening_returns_fine_increments() {
        let path = NoisePath::generate(1.0, 5, &levy(), PathSeed::new(5, 5)).unwrap();
        let coarse = path.coarsen_increments(32).unwrap();
        let fine = path.brownian_increments();
        for (c, f) in coarse.iter().zip(&fine) {
            assert_eq!(c.0, *f);
        }
    }

    #[test]
    fn invalid_dimensions() {
        assert!(NoisePath::generate(0.0, 4, &levy(), PathSeed::new(0, 0)).is_err());
        assert!(NoisePath::generate(1.0, 0, &levy(), PathSeed::new(0, 0)).is_err());
        assert!(NoisePath::generate(1.0, 31, &levy(), PathSeed::new(0, 0)).is_err());
        assert!(NoisePath::from_parts(1.0, 2, &[0.0; 3], vec![], 0.0).is_err());
    }

    #[test]
    fn terminal_variance_and_centering() {
        let spec = levy();
        let paths = 100_000;
        let (mut sw, mut sw2, mut sz, mut sz2) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..paths {
            let path = NoisePath::generate(2.0, 1, &spec, PathSeed::new(77, i)).unwrap();
            let w = path.w_at(2.0).unwrap();
            let z = path.z_at(2.0).unwrap();
            sw += w;
            sw2 += w * w;
            sz += z;
            sz2 += z * z;
        }
        let n = paths as f64;
        let var_w = sw2 / n - (sw / n).powi(2);
        // sd of the sample variance of N(0, 2) is 2 sqrt(2 / n)
        assert!((var_w - 2.0).abs() < 4.0 * 2.0 * (2.0 / n).sqrt(), "var W(T) {var_w}");
        let mean_z = sz / n;
        let var_z = sz2 / n - mean_z * mean_z;
        assert!(mean_z.abs() < 4.0 * (var_z / n).sqrt(), "E Z(T) {mean_z}");
        // Var Z(T) = m2 T
        let m2 = spec.moment(2.0).unwrap();
        assert!((var_z - m2 * 2.0).abs() < 0.05 * m2 * 2.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn refinement_consistency(seed in any::<u64>(), level in 3u32..10, a in 0u32..3, b in 0u32..3) {
                let path = NoisePath::generate(1.3, level, &levy(), PathSeed::new(seed, 0)).unwrap();
                let n = 1usize << a.min(level);
                let m = n << b.min(level - a.min(level));
                let direct = path.coarsen_increments(n).unwrap();
                let via = aggregate_increments(&path.coarsen_increments(m).unwrap(), m / n).unwrap();
                prop_assert_eq!(bits(&direct), bits(&via));
            }

            #[test]
            fn increments_telescope(seed in any::<u64>(), level in 1u32..10, k in 0u32..10) {
                let path = NoisePath::generate(0.7, level, &levy(), PathSeed::new(seed, 1)).unwrap();
                let n = 1usize << k.min(level);
                let inc = path.coarsen_increments(n).unwrap();
                let w: f64 = inc.iter().map(|p| p.0).sum();
                let z: f64 = inc.iter().map(|p| p.1).sum();
                prop_assert_eq!(w.to_bits(), path.w_at(0.7).unwrap().to_bits());
                prop_assert_eq!(z.to_bits(), path.z_at(0.7).unwrap().to_bits());
            }

            #[test]
            fn cadlag_jump_sizes(seed in any::<u64>()) {
                let path = NoisePath::generate(1.0, 6, &levy(), PathSeed::new(seed, 2)).unwrap();
                for jump in path.jumps() {
                    let d = path.z_at(jump.time).unwrap() - path.z_at_left(jump.time).unwrap();
                    prop_assert!((d - jump.size).abs() <= 1e-12 * (1.0 + jump.size.abs()));
                }
                for w in path.jumps().windows(2) {
                    prop_assert!(w[0].time <= w[1].time);
                }
                prop_assert_eq!(path.w_node(0), 0.0);
                prop_assert_eq!(path.z_node(0), 0.0);
            }
        }
    }
}
