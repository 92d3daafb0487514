//! Coupled-path estimators of the error and regularity functionals.
//!
//! Every estimator drives all the trajectories it compares with the same
//! noise path, so whenever the compared computations coincide (for
//! instance a scheme on the finest grid against the fine reference) the
//! per-path differences cancel exactly.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{Lyapunov, PolynomialLyapunov};
use crate::scheme::GridFunction;

use super::estimate::{batch_mean, Estimate, LpEstimate, NOISE_FLOOR};
use super::holder::HolderStudyConfig;
use super::simulation::{Simulation, Target};

/// A start time, an evaluation time and an initial value: `X_{s,t}` from `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceTime {
    pub s: f64,
    pub t: f64,
    pub x: f64,
}

impl SpaceTime {
    pub fn new(s: f64, t: f64, x: f64) -> Self {
        Self { s, t, x }
    }

    fn nodes(&self, sim: &Simulation) -> Result<(usize, usize)> {
        let (s, t) = (sim.node(self.s)?, sim.node(self.t)?);
        if s > t {
            return Err(invalid("s", format!("start time {} exceeds evaluation time {}", self.s, self.t)));
        }
        Ok((s, t))
    }
}

fn grids(sim: &Simulation, ns: &[usize]) -> Result<Vec<GridFunction>> {
    if ns.is_empty() {
        return Err(invalid("ns", "need at least one step count"));
    }
    ns.iter().map(|&n| sim.grid(n)).collect()
}

fn estimates(sim: &Simulation, ns: &[usize], cols: &[Vec<f64>], p: f64) -> Result<Vec<(usize, LpEstimate)>> {
    ns.iter().zip(cols).map(|(&n, c)| Ok((n, sim.lp(c, p)?))).collect()
}

/// `[E|X^{delta,x}_{0,T} - X_T|^p]^{1/p}` with `delta` uniform with `n` steps
/// and `X` the chosen target.
pub fn strong_error_pointwise(sim: &Simulation, n: usize, x: f64, p: f64, target: Target) -> Result<LpEstimate> {
    Ok(strong_error_study(sim, &[n], x, p, target)?.remove(0).1)
}

/// [`strong_error_pointwise`] for several `n` on the same paths.
pub fn strong_error_study(sim: &Simulation, ns: &[usize], x: f64, p: f64, target: Target) -> Result<Vec<(usize, LpEstimate)>> {
    target.check(&sim.coeffs)?;
    let grids = grids(sim, ns)?;
    let end = sim.steps();
    let cols = sim.columns(ns.len(), |noise| {
        let truth = target.eval(&sim.coeffs, noise, x, &[end])?[0];
        grids
            .iter()
            .map(|g| Ok(sim.scheme(g, noise, x, 0, &[end])?[0] - truth))
            .collect()
    })?;
    estimates(sim, ns, &cols, p)
}

/// Initial values `(x, y, x~, y~)` of the four trajectories in the mixed difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedStarts {
    pub x: f64,
    pub y: f64,
    pub x_tilde: f64,
    pub y_tilde: f64,
}

impl MixedStarts {
    /// `y = x`, `y~ = x~`: the scheme and the target start together.
    pub fn diagonal(x: f64, x_tilde: f64) -> Self {
        Self {
            x,
            y: x,
            x_tilde,
            y_tilde: x_tilde,
        }
    }
}

/// `[E|(X^x_T - Y^y_T) - (X^{x~}_T - Y^{y~}_T)|^p]^{1/p}` with `X` the target
/// and `Y` the scheme with `n` steps.
pub fn mixed_xy_difference(sim: &Simulation, n: usize, starts: MixedStarts, p: f64, target: Target) -> Result<LpEstimate> {
    Ok(mixed_xy_study(sim, &[n], starts, p, target)?.remove(0).1)
}

pub fn mixed_xy_study(
    sim: &Simulation,
    ns: &[usize],
    starts: MixedStarts,
    p: f64,
    target: Target,
) -> Result<Vec<(usize, LpEstimate)>> {
    target.check(&sim.coeffs)?;
    let grids = grids(sim, ns)?;
    let end = sim.steps();
    let cols = sim.columns(ns.len(), |noise| {
        let tx = target.eval(&sim.coeffs, noise, starts.x, &[end])?[0];
        let txt = target.eval(&sim.coeffs, noise, starts.x_tilde, &[end])?[0];
        grids
            .iter()
            .map(|g| {
                let sy = sim.scheme(g, noise, starts.y, 0, &[end])?[0];
                let syt = sim.scheme(g, noise, starts.y_tilde, 0, &[end])?[0];
                Ok((tx - sy) - (txt - syt))
            })
            .collect()
    })?;
    estimates(sim, ns, &cols, p)
}

/// `[E|(X^{iota}_a - X^{iota}_b) - (X^{delta}_a - X^{delta}_b)|^p]^{1/p}` where
/// `X_a = X^{x}_{s,t}` and `X_b = X^{x~}_{s~,t~}`.
pub fn temporal_spatial_difference(sim: &Simulation, n: usize, a: SpaceTime, b: SpaceTime, p: f64) -> Result<LpEstimate> {
    Ok(temporal_spatial_study(sim, &[n], a, b, p)?.remove(0).1)
}

pub fn temporal_spatial_study(
    sim: &Simulation,
    ns: &[usize],
    a: SpaceTime,
    b: SpaceTime,
    p: f64,
) -> Result<Vec<(usize, LpEstimate)>> {
    let grids = grids(sim, ns)?;
    let iota = GridFunction::identity(sim.horizon)?;
    let (sa, ta) = a.nodes(sim)?;
    let (sb, tb) = b.nodes(sim)?;
    let cols = sim.columns(ns.len(), |noise| {
        let ra = sim.scheme(&iota, noise, a.x, sa, &[ta])?[0];
        let rb = sim.scheme(&iota, noise, b.x, sb, &[tb])?[0];
        grids
            .iter()
            .map(|g| {
                let da = sim.scheme(g, noise, a.x, sa, &[ta])?[0];
                let db = sim.scheme(g, noise, b.x, sb, &[tb])?[0];
                Ok((ra - rb) - (da - db))
            })
            .collect()
    })?;
    estimates(sim, ns, &cols, p)
}

/// `[E|X^{delta,x}_{s,t} - X^{delta,x~}_{s~,t~}|^p]^{1/p}` for each pair, on
/// one set of paths.
pub fn holder_lattice(sim: &Simulation, n: usize, pairs: &[(SpaceTime, SpaceTime)], p: f64) -> Result<Vec<LpEstimate>> {
    let grid = sim.grid(n)?;
    let nodes = pairs
        .iter()
        .map(|(a, b)| Ok((a.nodes(sim)?, b.nodes(sim)?)))
        .collect::<Result<Vec<_>>>()?;
    let cols = sim.columns(pairs.len(), |noise| {
        pairs
            .iter()
            .zip(&nodes)
            .map(|((a, b), ((sa, ta), (sb, tb)))| {
                let va = sim.scheme(&grid, noise, a.x, *sa, &[*ta])?[0];
                let vb = sim.scheme(&grid, noise, b.x, *sb, &[*tb])?[0];
                Ok(va - vb)
            })
            .collect()
    })?;
    cols.iter().map(|c| sim.lp(c, p)).collect()
}

pub fn holder_difference(sim: &Simulation, n: usize, a: SpaceTime, b: SpaceTime, p: f64) -> Result<LpEstimate> {
    Ok(holder_lattice(sim, n, &[(a, b)], p)?.remove(0))
}

/// `[E|X^{delta,x}_{0,t~} - X^{delta,x}_{0,t}|^p]^{1/p}`.
pub fn temporal_increment(sim: &Simulation, n: usize, x: f64, t: f64, t_tilde: f64, p: f64) -> Result<LpEstimate> {
    holder_difference(sim, n, SpaceTime::new(0.0, t_tilde, x), SpaceTime::new(0.0, t, x), p)
}

/// Temporal increments from `t` over each gap, on one set of paths.
pub fn temporal_increment_study(sim: &Simulation, n: usize, x: f64, t: f64, gaps: &[f64], p: f64) -> Result<Vec<(f64, LpEstimate)>> {
    let pairs: Vec<_> = gaps
        .iter()
        .map(|&g| (SpaceTime::new(0.0, t + g, x), SpaceTime::new(0.0, t, x)))
        .collect();
    Ok(gaps.iter().copied().zip(holder_lattice(sim, n, &pairs, p)?).collect())
}

/// `[E|X^{delta,x}_{s,t} - X^{delta,x~}_{s,t}|^p]^{1/p}`.
pub fn spatial_difference(sim: &Simulation, n: usize, x: f64, x_tilde: f64, s: f64, t: f64, p: f64) -> Result<LpEstimate> {
    holder_difference(sim, n, SpaceTime::new(s, t, x), SpaceTime::new(s, t, x_tilde), p)
}

/// Spatial differences `x` against `x + offset` for each offset, on one set of paths.
pub fn spatial_difference_study(sim: &Simulation, n: usize, x: f64, offsets: &[f64], t: f64, p: f64) -> Result<Vec<(f64, LpEstimate)>> {
    let pairs: Vec<_> = offsets
        .iter()
        .map(|&h| (SpaceTime::new(0.0, t, x), SpaceTime::new(0.0, t, x + h)))
        .collect();
    Ok(offsets.iter().copied().zip(holder_lattice(sim, n, &pairs, p)?).collect())
}

/// `[E|(X^{iota,x}_{s,s^} - X^{delta,x}_{s,s^}) - (X^{iota,x}_{s~,s^} - X^{delta,x}_{s~,s^})|^p]^{1/p}`
/// for a window `s <= s~ <= s^` containing no breakpoint of `delta` in `(s, s^)`.
pub fn gridless_window_difference(
    sim: &Simulation,
    n: usize,
    x: f64,
    s: f64,
    s_tilde: f64,
    s_hat: f64,
    p: f64,
) -> Result<LpEstimate> {
    let grid = sim.grid(n)?;
    let iota = GridFunction::identity(sim.horizon)?;
    let (js, jt, jh) = (sim.node(s)?, sim.node(s_tilde)?, sim.node(s_hat)?);
    if !(js <= jt && jt <= jh) {
        return Err(invalid("s_tilde", "window must satisfy s <= s~ <= s^"));
    }
    let ratio = sim.steps() / n;
    if (js + 1..jh).any(|j| j % ratio == 0) {
        return Err(invalid("s_hat", "the window (s, s^) contains a breakpoint of the grid"));
    }
    let cols = sim.columns(1, |noise| {
        let a = sim.scheme(&iota, noise, x, js, &[jh])?[0] - sim.scheme(&grid, noise, x, js, &[jh])?[0];
        let b = sim.scheme(&iota, noise, x, jt, &[jh])?[0] - sim.scheme(&grid, noise, x, jt, &[jh])?[0];
        Ok(vec![a - b])
    })?;
    sim.lp(&cols[0], p)
}

/// The window difference over the grid cell starting at `T/2`, with `s~` at
/// its midpoint, for each `n` (window length equals the mesh).
pub fn gridless_window_study(sim: &Simulation, ns: &[usize], x: f64, p: f64) -> Result<Vec<(usize, LpEstimate)>> {
    ns.iter()
        .map(|&n| {
            if n < 2 || n % 2 != 0 || sim.steps() % (2 * n) != 0 {
                return Err(invalid("n", format!("window study needs even n with 2n dividing 2^L, got {n}")));
            }
            let h = sim.horizon / n as f64;
            let s = 0.5 * sim.horizon;
            Ok((n, gridless_window_difference(sim, n, x, s, s + 0.5 * h, s + h, p)?))
        })
        .collect()
}

/// One time index of the normalized functional.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryTerm {
    pub k: usize,
    pub time: f64,
    /// `[E|X^x_{kT/n} - Y^{n,x}_k|^p]^{1/p}`.
    pub pointwise: LpEstimate,
    /// `[E|(X^x - Y^{n,x}) - (X^y - Y^{n,y})|^p]^{1/p}` at `kT/n`.
    pub difference: LpEstimate,
    /// `pointwise / (1 + |x|) + difference / (|x - y| (1 + |x| + |y|))`.
    pub total: f64,
    pub se: f64,
}

/// Maximum over the studied time indices of the normalized functional.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryValue {
    pub n: usize,
    pub value: f64,
    pub se: f64,
    pub terms: Vec<CorollaryTerm>,
}

impl Estimate for CorollaryValue {
    fn value(&self) -> f64 {
        self.value
    }

    fn flagged(&self) -> bool {
        self.value == 0.0 || self.value < NOISE_FLOOR * self.se
    }
}

pub fn corollary_functional(
    sim: &Simulation,
    n: usize,
    x: f64,
    y: f64,
    study: &HolderStudyConfig,
    target: Target,
) -> Result<CorollaryValue> {
    Ok(corollary_study(sim, &[n], x, y, study, target)?.remove(0).1)
}

pub fn corollary_study(
    sim: &Simulation,
    ns: &[usize],
    x: f64,
    y: f64,
    study: &HolderStudyConfig,
    target: Target,
) -> Result<Vec<(usize, CorollaryValue)>> {
    study.validate()?;
    target.check(&sim.coeffs)?;
    if x == y {
        return Err(invalid("y", "the normalized functional needs x != y"));
    }
    let grids = grids(sim, ns)?;
    // k for each (n, fraction), and the fine nodes of kT/n
    let mut ks = Vec::with_capacity(ns.len());
    for &n in ns {
        let row = study
            .time_fractions
            .iter()
            .map(|&f| {
                let k = f * n as f64;
                if k.fract() != 0.0 {
                    return Err(invalid("time_fractions", format!("{f} * {n} is not an integer time index")));
                }
                Ok(k as usize)
            })
            .collect::<Result<Vec<_>>>()?;
        ks.push(row);
    }
    let mut all_nodes: Vec<usize> = ns
        .iter()
        .zip(&ks)
        .flat_map(|(&n, row)| row.iter().map(move |&k| k * (sim.steps() / n)))
        .collect();
    all_nodes.sort_unstable();
    all_nodes.dedup();
    let width = 2 * ks.iter().map(Vec::len).sum::<usize>();

    let cols = sim.columns(width, |noise| {
        let rx = target.eval(&sim.coeffs, noise, x, &all_nodes)?;
        let ry = target.eval(&sim.coeffs, noise, y, &all_nodes)?;
        let at = |values: &[f64], node: usize| values[all_nodes.binary_search(&node).expect("node listed")];
        let mut row = Vec::with_capacity(width);
        for ((&n, g), kk) in ns.iter().zip(&grids).zip(&ks) {
            let nodes: Vec<usize> = kk.iter().map(|&k| k * (sim.steps() / n)).collect();
            let mut order: Vec<usize> = (0..nodes.len()).collect();
            order.sort_by_key(|&i| nodes[i]);
            let sorted: Vec<usize> = order.iter().map(|&i| nodes[i]).collect();
            let yx = sim.scheme(g, noise, x, 0, &sorted)?;
            let yy = sim.scheme(g, noise, y, 0, &sorted)?;
            let mut pairs = vec![(0.0, 0.0); nodes.len()];
            for (pos, &i) in order.iter().enumerate() {
                let ex = at(&rx, nodes[i]) - yx[pos];
                let ey = at(&ry, nodes[i]) - yy[pos];
                pairs[i] = (ex, ex - ey);
            }
            for (e1, e2) in pairs {
                row.push(e1);
                row.push(e2);
            }
        }
        Ok(row)
    })?;

    let w1 = 1.0 / (1.0 + x.abs());
    let w2 = 1.0 / ((x - y).abs() * (1.0 + x.abs() + y.abs()));
    let mut col = cols.iter();
    let mut out = Vec::with_capacity(ns.len());
    for (&n, kk) in ns.iter().zip(&ks) {
        let mut terms = Vec::with_capacity(kk.len());
        for &k in kk {
            let pointwise = sim.lp(col.next().expect("column"), study.p)?;
            let difference = sim.lp(col.next().expect("column"), study.p)?;
            terms.push(CorollaryTerm {
                k,
                time: sim.horizon * (k as f64 / n as f64),
                total: pointwise.estimate * w1 + difference.estimate * w2,
                se: pointwise.se * w1 + difference.se * w2,
                pointwise,
                difference,
            });
        }
        let best = terms
            .iter()
            .max_by(|a, b| a.total.total_cmp(&b.total))
            .ok_or_else(|| invalid("time_fractions", "need at least one time index"))?;
        out.push((
            n,
            CorollaryValue {
                n,
                value: best.total,
                se: best.se,
                terms: terms.clone(),
            },
        ));
    }
    Ok(out)
}

/// Monte Carlo audit of `E V(X^{delta,x}_{0,t}) <= e^{2.5 cbar t} V(x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentAudit {
    pub t: f64,
    pub x: f64,
    pub n: usize,
    pub mean_v: f64,
    pub se: f64,
    pub bound: f64,
    /// `mean_v <= bound + 3 se`.
    pub pass: bool,
}

/// Audits every combination of `ns`, `xs` and `ts` on one set of paths.
pub fn moment_audit(
    sim: &Simulation,
    ns: &[usize],
    xs: &[f64],
    ts: &[f64],
    lyapunov: &PolynomialLyapunov,
    cbar: f64,
) -> Result<Vec<MomentAudit>> {
    moment_audit_grids(sim, &grids(sim, ns)?, xs, ts, lyapunov, cbar)
}

/// [`moment_audit`] on arbitrary grids; `n` in the output is the cell count.
pub fn moment_audit_grids(
    sim: &Simulation,
    grids: &[GridFunction],
    xs: &[f64],
    ts: &[f64],
    lyapunov: &PolynomialLyapunov,
    cbar: f64,
) -> Result<Vec<MomentAudit>> {
    if !(cbar > 0.0) || !cbar.is_finite() {
        return Err(invalid("cbar", "must be finite and > 0"));
    }
    if grids.is_empty() {
        return Err(invalid("grids", "need at least one grid"));
    }
    let ns = grids
        .iter()
        .map(|g| g.cells().ok_or_else(|| invalid("grids", "the identity grid has no cells")))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
    let nodes = order.iter().map(|&i| sim.node(ts[i])).collect::<Result<Vec<_>>>()?;
    let width = grids.len() * xs.len() * ts.len();
    let cols = sim.columns(width, |noise| {
        let mut row = vec![0.0; width];
        for (a, g) in grids.iter().enumerate() {
            for (b, &x) in xs.iter().enumerate() {
                let values = sim.scheme(g, noise, x, 0, &nodes)?;
                for (pos, &i) in order.iter().enumerate() {
                    row[(a * xs.len() + b) * ts.len() + i] = lyapunov.value(values[pos]);
                }
            }
        }
        Ok(row)
    })?;
    let mut out = Vec::with_capacity(width);
    for (a, &n) in ns.iter().enumerate() {
        for (b, &x) in xs.iter().enumerate() {
            for (i, &t) in ts.iter().enumerate() {
                let est = batch_mean(&cols[(a * xs.len() + b) * ts.len() + i])?;
                let bound = (2.5 * cbar * t).exp() * lyapunov.value(x);
                out.push(MomentAudit {
                    t,
                    x,
                    n,
                    mean_v: est.mean,
                    se: est.se,
                    bound,
                    pass: est.mean <= bound + NOISE_FLOOR * est.se,
                });
            }
        }
    }
    Ok(out)
}
