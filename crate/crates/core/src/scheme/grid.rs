use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::NoisePath;

/// A step grid function `delta` on `[0, T]`, or the identity `iota`.
///
/// Evaluation is left-continuous: `delta(t) = t_0` on `[t_0, t_1]` and
/// `delta(t) = t_k` on `(t_k, t_{k+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub enum GridFunction {
    Identity { horizon: f64 },
    Uniform { horizon: f64, n: usize },
    Explicit { breakpoints: Vec<f64> },
}

/// Config form of a grid; the horizon comes from the surrounding experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    Uniform { n: usize },
    Explicit { breakpoints: Vec<f64> },
}

impl GridSpec {
    pub fn build(&self, horizon: f64) -> Result<GridFunction> {
        match self {
            GridSpec::Uniform { n } => GridFunction::uniform(horizon, *n),
            GridSpec::Explicit { breakpoints } => {
                let grid = GridFunction::explicit(breakpoints.clone())?;
                check_horizon(grid.horizon(), horizon)?;
                Ok(grid)
            }
        }
    }
}

/// Breakpoints of a grid as fine-node indices of a particular noise path.
#[derive(Debug, Clone)]
pub(crate) enum Aligned {
    Strided { ratio: usize, cells: usize },
    List(Vec<usize>),
}

impl Aligned {
    #[inline]
    pub(crate) fn len(&self) -> usize {
        match self {
            Aligned::Strided { cells, .. } => cells + 1,
            Aligned::List(nodes) => nodes.len(),
        }
    }

    #[inline]
    pub(crate) fn get(&self, i: usize) -> usize {
        match self {
            Aligned::Strided { ratio, .. } => i * ratio,
            Aligned::List(nodes) => nodes[i],
        }
    }

    /// Index of the first breakpoint strictly after fine node `j`.
    pub(crate) fn first_after(&self, j: usize) -> usize {
        match self {
            Aligned::Strided { ratio, cells } => (j / ratio + 1).min(cells + 1),
            Aligned::List(nodes) => nodes.partition_point(|&b| b <= j),
        }
    }
}

fn check_horizon(grid: f64, noise: f64) -> Result<()> {
    if (grid - noise).abs() > 1e-12 * noise.abs().max(grid.abs()) {
        return Err(Error::HorizonMismatch { grid, noise });
    }
    Ok(())
}

fn check_positive_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid("horizon", "must be finite and > 0"));
    }
    Ok(())
}

impl GridFunction {
    pub fn identity(horizon: f64) -> Result<Self> {
        check_positive_horizon(horizon)?;
        Ok(GridFunction::Identity { horizon })
    }

    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        check_positive_horizon(horizon)?;
        if n == 0 {
            return Err(invalid("n", "a uniform grid needs at least one step"));
        }
        Ok(GridFunction::Uniform { horizon, n })
    }

    /// `breakpoints` must start at 0 and increase strictly; the last one is `T`.
    pub fn explicit(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(invalid("breakpoints", "need at least 0 and T"));
        }
        if breakpoints[0] != 0.0 {
            return Err(invalid("breakpoints", "first breakpoint must be 0"));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("breakpoints", "breakpoints must be finite and strictly increasing"));
        }
        Ok(GridFunction::Explicit { breakpoints })
    }

    pub fn horizon(&self) -> f64 {
        match self {
            GridFunction::Identity { horizon } | GridFunction::Uniform { horizon, .. } => *horizon,
            GridFunction::Explicit { breakpoints } => *breakpoints.last().expect("nonempty"),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, GridFunction::Identity { .. })
    }

    /// Number of cells; `None` for the identity.
    pub fn cells(&self) -> Option<usize> {
        match self {
            GridFunction::Identity { .. } => None,
            GridFunction::Uniform { n, .. } => Some(*n),
            GridFunction::Explicit { breakpoints } => Some(breakpoints.len() - 1),
        }
    }

    /// The `k`-th breakpoint, `k <= cells()`.
    pub fn breakpoint(&self, k: usize) -> Option<f64> {
        match self {
            GridFunction::Identity { .. } => None,
            GridFunction::Uniform { horizon, n } => (k <= *n).then(|| horizon * (k as f64 / *n as f64)),
            GridFunction::Explicit { breakpoints } => breakpoints.get(k).copied(),
        }
    }

    pub fn breakpoints(&self) -> Option<Vec<f64>> {
        let cells = self.cells()?;
        (0..=cells).map(|k| self.breakpoint(k)).collect()
    }

    /// `delta(t)` for `t` in `[0, T]`.
    pub fn delta_eval(&self, t: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::OutOfHorizon { time: t, horizon });
        }
        match self {
            GridFunction::Identity { .. } => Ok(t),
            GridFunction::Uniform { horizon, n } => {
                let bp = |k: usize| horizon * (k as f64 / *n as f64);
                // k: index of the first breakpoint >= t, at least 1
                let mut k = ((t / horizon) * *n as f64).ceil().clamp(1.0, *n as f64) as usize;
                while k > 1 && bp(k - 1) >= t {
                    k -= 1;
                }
                while k < *n && bp(k) < t {
                    k += 1;
                }
                Ok(bp(k - 1))
            }
            GridFunction::Explicit { breakpoints } => {
                let i = breakpoints.partition_point(|&b| b < t);
                Ok(breakpoints[i.saturating_sub(1)])
            }
        }
    }

    /// Largest gap between consecutive breakpoints; 0 for the identity.
    pub fn mesh(&self) -> f64 {
        match self {
            GridFunction::Identity { .. } => 0.0,
            GridFunction::Uniform { horizon, n } => (0..*n)
                .map(|k| horizon * ((k + 1) as f64 / *n as f64) - horizon * (k as f64 / *n as f64))
                .fold(0.0, f64::max),
            GridFunction::Explicit { breakpoints } => {
                breakpoints.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
            }
        }
    }

    /// The grid with `extra` points inserted (points already present or
    /// outside `(0, T)` are ignored).
    pub fn refine(&self, extra: &[f64]) -> Result<GridFunction> {
        let Some(mut points) = self.breakpoints() else {
            return Ok(self.clone());
        };
        let horizon = self.horizon();
        points.extend(extra.iter().copied().filter(|t| *t > 0.0 && *t < horizon));
        points.sort_by(f64::total_cmp);
        points.dedup();
        GridFunction::explicit(points)
    }

    pub(crate) fn align(&self, noise: &NoisePath) -> Result<Aligned> {
        check_horizon(self.horizon(), noise.horizon())?;
        let steps = noise.steps();
        match self {
            GridFunction::Identity { .. } => Ok(Aligned::Strided { ratio: 1, cells: steps }),
            GridFunction::Uniform { n, .. } => {
                if steps % n != 0 {
                    return Err(Error::NotADivisor { coarse: *n, fine: steps });
                }
                Ok(Aligned::Strided {
                    ratio: steps / n,
                    cells: *n,
                })
            }
            GridFunction::Explicit { breakpoints } => {
                let mut nodes = Vec::with_capacity(breakpoints.len());
                for (k, &b) in breakpoints.iter().enumerate() {
                    let last = k + 1 == breakpoints.len();
                    nodes.push(if last { steps } else { noise.node_index(b)? });
                }
                Ok(Aligned::List(nodes))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_eval_examples() {
        let g = GridFunction::uniform(1.0, 4).unwrap();
        assert_eq!(g.delta_eval(0.0).unwrap(), 0.0);
        assert_eq!(g.delta_eval(0.25).unwrap(), 0.0);
        assert_eq!(g.delta_eval(0.26).unwrap(), 0.25);
        assert_eq!(g.delta_eval(0.5).unwrap(), 0.25);
        assert_eq!(g.delta_eval(1.0).unwrap(), 0.75);
        assert_eq!(GridFunction::identity(1.0).unwrap().delta_eval(0.37).unwrap(), 0.37);
        assert!(matches!(g.delta_eval(1.5), Err(Error::OutOfHorizon { .. })));
        assert!(g.delta_eval(-0.1).is_err());
    }

    #[test]
    fn explicit_matches_uniform() {
        let u = GridFunction::uniform(2.0, 8).unwrap();
        let e = GridFunction::explicit(u.breakpoints().unwrap()).unwrap();
        for i in 0..=400 {
            let t = 2.0 * i as f64 / 400.0;
            assert_eq!(u.delta_eval(t).unwrap(), e.delta_eval(t).unwrap(), "t={t}");
        }
    }

    #[test]
    fn mesh_examples() {
        assert_eq!(GridFunction::uniform(1.0, 4).unwrap().mesh(), 0.25);
        assert_eq!(GridFunction::identity(1.0).unwrap().mesh(), 0.0);
        assert_eq!(GridFunction::explicit(vec![0.0, 0.1, 0.5, 1.0]).unwrap().mesh(), 0.5);
    }

    #[test]
    fn invalid_grids() {
        assert!(GridFunction::uniform(1.0, 0).is_err());
        assert!(GridFunction::uniform(0.0, 4).is_err());
        assert!(GridFunction::explicit(vec![0.0]).is_err());
        assert!(GridFunction::explicit(vec![0.1, 1.0]).is_err());
        assert!(GridFunction::explicit(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(GridSpec::Explicit {
            breakpoints: vec![0.0, 0.5, 2.0]
        }
        .build(1.0)
        .is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn grid() -> impl Strategy<Value = GridFunction> {
            prop_oneof![
                (1usize..64).prop_map(|n| GridFunction::uniform(1.5, n).unwrap()),
                prop::collection::vec(0.001f64..1.499, 1..20).prop_map(|mut v| {
                    v.push(0.0);
                    v.push(1.5);
                    v.sort_by(f64::total_cmp);
                    v.dedup();
                    GridFunction::explicit(v).unwrap()
                }),
                Just(GridFunction::identity(1.5).unwrap()),
            ]
        }

        proptest! {
            #[test]
            fn step_function_laws(g in grid(), t in 0.0f64..=1.5) {
                let d = g.delta_eval(t).unwrap();
                prop_assert!(d <= t);
                if let Some(bps) = g.breakpoints() {
                    prop_assert!(t == 0.0 || d < t);
                    let k = bps.iter().position(|&b| b == d).expect("delta(t) is a breakpoint");
                    // left continuity: delta(t_k) = t_{k-1}, so delta is idempotent only on [t_0, t_1]
                    let dd = g.delta_eval(d).unwrap();
                    prop_assert_eq!(dd, bps[k.saturating_sub(1)]);
                    prop_assert_eq!(g.delta_eval(bps[k + 1]).unwrap(), d);
                } else {
                    prop_assert_eq!(d, t);
                }
            }

            #[test]
            fn refinement_never_increases_mesh(g in grid(), extra in prop::collection::vec(0.0f64..1.5, 0..10)) {
                let r = g.refine(&extra).unwrap();
                prop_assert!(r.mesh() <= g.mesh());
            }
        }
    }
}
