//! Euler–Maruyama schemes driven by a shared [`NoisePath`].
//!
//! The discrete recursion and the continuous-time scheme `X^{delta,x}_{s,t}`
//! go through the same one-step update, so the continuous scheme evaluated at
//! a breakpoint reproduces the discrete value bit-for-bit.

pub(crate) mod exact;
mod grid;

pub use exact::{exact_linear, exact_ou, exact_ou_with_stride};
pub use grid::{GridFunction, GridSpec};

use grid::Aligned;

use crate::error::{invalid, Result};
use crate::model::CoefficientSet;
use crate::noise::NoisePath;
use crate::rng::PathSeed;

/// `y + mu(y) dt + sigma(y) dw + gamma(y) dz`.
#[inline]
pub fn euler_step(coeffs: &CoefficientSet, y: f64, dt: f64, dw: f64, dz: f64) -> f64 {
    y + coeffs.mu(y) * dt + coeffs.sigma(y) * dw + coeffs.gamma(y) * dz
}

#[inline]
fn step_between(coeffs: &CoefficientSet, noise: &NoisePath, y: f64, j0: usize, j1: usize) -> f64 {
    let dt = noise.node_time(j1) - noise.node_time(j0);
    euler_step(coeffs, y, dt, noise.dw(j0, j1), noise.dz(j0, j1))
}

/// Values of a scheme at the breakpoints of its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemePath {
    pub initial: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub noise_seed: Option<PathSeed>,
    pub model: String,
}

impl SchemePath {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("a path has at least its initial value")
    }

    /// Value at breakpoint time `t`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.times.iter().position(|&s| s == t).map(|k| self.values[k])
    }
}

/// The discrete recursion `Y_{k+1} = Y_k + mu(Y_k) dt_k + sigma(Y_k) dW_k + gamma(Y_k) dZ_k`.
pub fn em_discrete(coeffs: &CoefficientSet, grid: &GridFunction, noise: &NoisePath, x: f64) -> Result<SchemePath> {
    let nodes = grid.align(noise)?;
    let mut times = Vec::with_capacity(nodes.len());
    let mut values = Vec::with_capacity(nodes.len());
    let mut y = x;
    times.push(0.0);
    values.push(x);
    for k in 1..nodes.len() {
        let (j0, j1) = (nodes.get(k - 1), nodes.get(k));
        y = step_between(coeffs, noise, y, j0, j1);
        times.push(noise.node_time(j1));
        values.push(y);
    }
    Ok(SchemePath {
        initial: x,
        times,
        values,
        noise_seed: noise.seed(),
        model: coeffs.name.clone(),
    })
}

/// Euler–Maruyama on every fine step of the noise path, the stand-in for the
/// exact solution.
pub fn reference_solution(coeffs: &CoefficientSet, noise: &NoisePath, x: f64) -> Result<SchemePath> {
    em_discrete(coeffs, &GridFunction::identity(noise.horizon())?, noise, x)
}

/// `X^{delta,x}_{s,t}`: started at `(s, x)`, coefficients frozen at
/// `max(s, delta(r))`. Both `s` and `t` must be fine-grid times.
pub fn em_continuous(
    coeffs: &CoefficientSet,
    grid: &GridFunction,
    noise: &NoisePath,
    x: f64,
    s: f64,
    t: f64,
) -> Result<f64> {
    Ok(em_continuous_many(coeffs, grid, noise, x, s, &[t])?[0])
}

/// `X^{delta,x}_{s,t}` for several nondecreasing `t` in one pass.
pub fn em_continuous_many(
    coeffs: &CoefficientSet,
    grid: &GridFunction,
    noise: &NoisePath,
    x: f64,
    s: f64,
    ts: &[f64],
) -> Result<Vec<f64>> {
    let nodes = grid.align(noise)?;
    let start = noise.node_index(s)?;
    let targets = ts.iter().map(|&t| noise.node_index(t)).collect::<Result<Vec<_>>>()?;
    march(coeffs, noise, &nodes, x, start, &targets)
}

/// Same as [`em_continuous_many`] with times given as fine-node indices.
pub fn em_continuous_nodes(
    coeffs: &CoefficientSet,
    grid: &GridFunction,
    noise: &NoisePath,
    x: f64,
    start: usize,
    targets: &[usize],
) -> Result<Vec<f64>> {
    let nodes = grid.align(noise)?;
    if start > noise.steps() || targets.iter().any(|&t| t > noise.steps()) {
        return Err(invalid("targets", "node index beyond the fine grid"));
    }
    march(coeffs, noise, &nodes, x, start, targets)
}

fn march(
    coeffs: &CoefficientSet,
    noise: &NoisePath,
    nodes: &Aligned,
    x: f64,
    start: usize,
    targets: &[usize],
) -> Result<Vec<f64>> {
    if targets.iter().any(|&t| t < start) {
        return Err(invalid("t", "evaluation times must not precede the start time"));
    }
    if targets.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("t", "evaluation times must be nondecreasing"));
    }
    let mut out = Vec::with_capacity(targets.len());
    let mut y = x;
    let mut current = start;
    let mut next = nodes.first_after(start);
    for &target in targets {
        while next < nodes.len() && nodes.get(next) <= target {
            let node = nodes.get(next);
            y = step_between(coeffs, noise, y, current, node);
            current = node;
            next += 1;
        }
        out.push(if current == target {
            y
        } else {
            step_between(coeffs, noise, y, current, target)
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{JumpEvent, JumpLaw, LevyMeasureSpec};
    use crate::model::{presets, ScalarFn};

    fn levy() -> LevyMeasureSpec {
        LevyMeasureSpec::new(2.0, JumpLaw::Gaussian { mean: 0.1, sd: 0.5 }).unwrap()
    }

    fn constant_model(mu: f64, sigma: f64, gamma: f64) -> CoefficientSet {
        CoefficientSet::new(
            "constant",
            ScalarFn::Constant { value: mu },
            ScalarFn::Constant { value: sigma },
            ScalarFn::Constant { value: gamma },
        )
        .unwrap()
    }

    #[test]
    fn constant_drift_is_exact() {
        let coeffs = constant_model(1.0, 0.0, 0.0);
        let noise = NoisePath::generate(1.0, 8, &levy(), PathSeed::new(1, 0)).unwrap();
        for n in [1, 4, 16, 256] {
            let grid = GridFunction::uniform(1.0, n).unwrap();
            assert_eq!(em_discrete(&coeffs, &grid, &noise, 0.0).unwrap().terminal(), 1.0);
            for t in [0.125, 0.3828125, 1.0] {
                let got = em_continuous(&coeffs, &grid, &noise, 0.0, 0.0, t).unwrap();
                assert!((got - t).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pure_jump_telescopes() {
        let coeffs = constant_model(0.0, 0.0, 1.0);
        let noise = NoisePath::generate(1.0, 10, &levy(), PathSeed::new(2, 0)).unwrap();
        let z = noise.z_at(1.0).unwrap();
        let grid = GridFunction::uniform(1.0, 32).unwrap();
        let path = em_discrete(&coeffs, &grid, &noise, 0.5).unwrap();
        assert!((path.terminal() - (0.5 + z)).abs() < 1e-14);
        assert_eq!(path.values[0], 0.5);
    }

    #[test]
    fn misaligned_grids_are_rejected() {
        let coeffs = presets::linear_default();
        let noise = NoisePath::generate(1.0, 6, &levy(), PathSeed::new(3, 0)).unwrap();
        let bad = GridFunction::uniform(1.0, 24).unwrap();
        assert!(em_discrete(&coeffs, &bad, &noise, 1.0).is_err());
        let off = GridFunction::explicit(vec![0.0, 0.3, 1.0]).unwrap();
        assert!(em_discrete(&coeffs, &off, &noise, 1.0).is_err());
        let other = GridFunction::uniform(2.0, 4).unwrap();
        assert!(em_discrete(&coeffs, &other, &noise, 1.0).is_err());
        let grid = GridFunction::uniform(1.0, 4).unwrap();
        assert!(em_continuous(&coeffs, &grid, &noise, 1.0, 0.5, 0.25).is_err());
        assert!(em_continuous(&coeffs, &grid, &noise, 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn explicit_grid_matches_uniform() {
        let coeffs = presets::trig_default();
        let noise = NoisePath::generate(1.0, 8, &levy(), PathSeed::new(4, 0)).unwrap();
        let u = GridFunction::uniform(1.0, 16).unwrap();
        let e = GridFunction::explicit(u.breakpoints().unwrap()).unwrap();
        let a = em_discrete(&coeffs, &u, &noise, 0.7).unwrap();
        let b = em_discrete(&coeffs, &e, &noise, 0.7).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn identity_grid_is_the_reference() {
        let coeffs = presets::trig_default();
        let noise = NoisePath::generate(1.0, 7, &levy(), PathSeed::new(5, 0)).unwrap();
        let reference = reference_solution(&coeffs, &noise, 0.3).unwrap();
        assert_eq!(reference.values.len(), 129);
        let finest = GridFunction::uniform(1.0, 128).unwrap();
        assert_eq!(em_discrete(&coeffs, &finest, &noise, 0.3).unwrap().values, reference.values);
        let iota = GridFunction::identity(1.0).unwrap();
        for (k, v) in reference.values.iter().enumerate() {
            let t = noise.node_time(k);
            assert_eq!(em_continuous(&coeffs, &iota, &noise, 0.3, 0.0, t).unwrap(), *v);
        }
        assert_eq!(reference, reference_solution(&coeffs, &noise, 0.3).unwrap());
    }

    #[test]
    fn continuous_scheme_between_breakpoints_is_one_step() {
        let coeffs = presets::linear_default();
        let noise = NoisePath::generate(1.0, 6, &levy(), PathSeed::new(6, 0)).unwrap();
        let grid = GridFunction::uniform(1.0, 4).unwrap();
        let y = em_discrete(&coeffs, &grid, &noise, 1.0).unwrap();
        // t = 0.375 lies in (0.25, 0.5]
        let (j0, j1) = (16, 24);
        let want = euler_step(&coeffs, y.values[1], 0.125, noise.dw(j0, j1), noise.dz(j0, j1));
        assert_eq!(em_continuous(&coeffs, &grid, &noise, 1.0, 0.0, 0.375).unwrap(), want);
    }

    #[test]
    fn start_inside_a_cell_freezes_at_start() {
        let coeffs = presets::trig_default();
        let noise = NoisePath::from_parts(1.0, 3, &[0.1, -0.2, 0.3, 0.05, -0.1, 0.2, 0.0, 0.4], vec![], 0.0).unwrap();
        let grid = GridFunction::uniform(1.0, 2).unwrap();
        // s = 0.125: frozen at x until 0.5, then at X_{0.5}
        let x = 0.4;
        let mid = euler_step(&coeffs, x, 0.375, noise.dw(1, 4), noise.dz(1, 4));
        let end = euler_step(&coeffs, mid, 0.5, noise.dw(4, 8), noise.dz(4, 8));
        let got = em_continuous_many(&coeffs, &grid, &noise, x, 0.125, &[0.125, 0.5, 1.0]).unwrap();
        assert_eq!(got, vec![x, mid, end]);
    }

    #[test]
    fn jump_at_breakpoint_uses_left_value() {
        // a jump exactly at t_1 multiplies gamma(Y_0), the value frozen on (t_0, t_1]
        let coeffs = presets::linear(0.0, 0.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let jumps = vec![JumpEvent { time: 0.5, size: 1.0 }];
        let noise = NoisePath::from_parts(1.0, 2, &[0.0; 4], jumps, 0.0).unwrap();
        let grid = GridFunction::uniform(1.0, 2).unwrap();
        let path = em_discrete(&coeffs, &grid, &noise, 1.0).unwrap();
        assert_eq!(path.values, vec![1.0, 2.0, 2.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn breakpoint_agreement(seed in any::<u64>(), which in 0usize..3, a in 0u32..8, x in -3.0f64..3.0) {
                let coeffs = &presets::all()[which];
                let noise = NoisePath::generate(1.0, 8, &levy(), PathSeed::new(seed, 0)).unwrap();
                let grid = GridFunction::uniform(1.0, 1 << a).unwrap();
                let discrete = em_discrete(coeffs, &grid, &noise, x).unwrap();
                let continuous = em_continuous_many(coeffs, &grid, &noise, x, 0.0, &discrete.times).unwrap();
                prop_assert_eq!(&discrete.values, &continuous);
            }

            #[test]
            fn flow_property(seed in any::<u64>(), which in 0usize..3, a in 1u32..7, k in 0usize..64) {
                let coeffs = &presets::all()[which];
                let noise = NoisePath::generate(1.0, 8, &levy(), PathSeed::new(seed, 1)).unwrap();
                let n = 1usize << a;
                let k = k % (n + 1);
                let grid = GridFunction::uniform(1.0, n).unwrap();
                let full = em_discrete(coeffs, &grid, &noise, 1.0).unwrap();
                let restart = em_continuous(coeffs, &grid, &noise, full.values[k], full.times[k], 1.0).unwrap();
                prop_assert_eq!(restart, full.terminal());
            }

            #[test]
            fn explicit_grids_restart_cleanly(seed in any::<u64>(), picks in prop::collection::btree_set(1usize..255, 1..10)) {
                let coeffs = presets::trig_default();
                let noise = NoisePath::generate(1.0, 8, &levy(), PathSeed::new(seed, 2)).unwrap();
                let mut bps = vec![0.0];
                bps.extend(picks.iter().map(|&j| noise.node_time(j)));
                bps.push(1.0);
                let grid = GridFunction::explicit(bps).unwrap();
                let path = em_discrete(&coeffs, &grid, &noise, -0.5).unwrap();
                let again = em_continuous_many(&coeffs, &grid, &noise, -0.5, 0.0, &path.times).unwrap();
                prop_assert_eq!(path.values, again);
            }
        }
    }
}
