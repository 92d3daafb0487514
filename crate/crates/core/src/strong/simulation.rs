use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::levy::LevyMeasureSpec;
use crate::model::CoefficientSet;
use crate::noise::{fine_node_index, fine_node_time, NoisePath};
use crate::rng::PathSeed;
use crate::scheme::{em_continuous_nodes, exact_linear, GridFunction};

use super::estimate::{lp_estimate, LpEstimate};

/// A coupled Monte Carlo experiment: path `i` is driven by the noise drawn
/// from `PathSeed::new(master_seed, i)`, so the first `M` paths never depend
/// on how many more are requested.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub coeffs: CoefficientSet,
    pub levy: LevyMeasureSpec,
    pub horizon: f64,
    pub fine_level: u32,
    pub paths: usize,
    pub master_seed: u64,
}

impl Simulation {
    pub fn new(
        coeffs: CoefficientSet,
        levy: LevyMeasureSpec,
        horizon: f64,
        fine_level: u32,
        paths: usize,
        master_seed: u64,
    ) -> Result<Self> {
        levy.validate()?;
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(invalid("horizon", "must be finite and > 0"));
        }
        if !(1..=30).contains(&fine_level) {
            return Err(invalid("fine_level", format!("must lie in [1, 30], got {fine_level}")));
        }
        if paths == 0 {
            return Err(invalid("paths", "need at least one path"));
        }
        Ok(Self {
            coeffs,
            levy,
            horizon,
            fine_level,
            paths,
            master_seed,
        })
    }

    pub fn with_paths(mut self, paths: usize) -> Self {
        self.paths = paths;
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    /// Fine step count `2^L`.
    pub fn steps(&self) -> usize {
        1usize << self.fine_level
    }

    pub fn node(&self, t: f64) -> Result<usize> {
        fine_node_index(self.horizon, self.steps(), t)
    }

    pub fn node_time(&self, j: usize) -> f64 {
        fine_node_time(self.horizon, self.steps(), j)
    }

    /// Uniform grid with `n` steps; `n` must divide `2^L`.
    pub fn grid(&self, n: usize) -> Result<GridFunction> {
        if n == 0 || self.steps() % n != 0 {
            return Err(Error::NotADivisor {
                coarse: n,
                fine: self.steps(),
            });
        }
        GridFunction::uniform(self.horizon, n)
    }

    pub fn noise(&self, index: u64) -> Result<NoisePath> {
        NoisePath::generate(
            self.horizon,
            self.fine_level,
            &self.levy,
            PathSeed::new(self.master_seed, index),
        )
    }

    /// `f` on every path, in parallel; results come back in path order.
    pub fn per_path<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&NoisePath) -> Result<T> + Sync,
    {
        (0..self.paths as u64)
            .into_par_iter()
            .map(|i| f(&self.noise(i)?))
            .collect()
    }

    /// Per-path vectors of fixed `width`, transposed into per-quantity columns.
    pub fn columns<F>(&self, width: usize, f: F) -> Result<Vec<Vec<f64>>>
    where
        F: Fn(&NoisePath) -> Result<Vec<f64>> + Sync,
    {
        let rows = self.per_path(|noise| {
            let row = f(noise)?;
            debug_assert_eq!(row.len(), width);
            Ok(row)
        })?;
        let mut cols = vec![Vec::with_capacity(rows.len()); width];
        for row in rows {
            for (col, v) in cols.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Ok(cols)
    }

    pub(crate) fn lp(&self, samples: &[f64], p: f64) -> Result<LpEstimate> {
        Ok(lp_estimate(samples, p)?.with_seed(self.master_seed))
    }

    /// The scheme on `grid` started at `(start, x)`, at the given fine nodes.
    pub(crate) fn scheme(&self, grid: &GridFunction, noise: &NoisePath, x: f64, start: usize, targets: &[usize]) -> Result<Vec<f64>> {
        em_continuous_nodes(&self.coeffs, grid, noise, x, start, targets)
    }
}

/// What the scheme is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Euler–Maruyama on every fine step.
    Reference,
    /// Doléans-Dade exponential (linear coefficients through the origin).
    ExactLinear,
    /// Lévy Ornstein–Uhlenbeck solution.
    ExactOu,
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::Reference => "reference",
            Target::ExactLinear => "exact-linear",
            Target::ExactOu => "exact-ou",
        }
    }

    /// Checks that the coefficient set has the shape the oracle needs.
    pub fn check(&self, coeffs: &CoefficientSet) -> Result<()> {
        match self {
            Target::Reference => Ok(()),
            Target::ExactLinear => coeffs.linear_slopes().map(|_| ()).ok_or(Error::WrongModel {
                expected: "linear through the origin",
            }),
            Target::ExactOu => coeffs.ou_parameters().map(|_| ()).ok_or(Error::WrongModel {
                expected: "Levy Ornstein-Uhlenbeck (mu = -lambda x, constant sigma, gamma = 1)",
            }),
        }
    }

    /// The target started at `(0, x)`, at nondecreasing fine nodes.
    pub fn eval(&self, coeffs: &CoefficientSet, noise: &NoisePath, x: f64, targets: &[usize]) -> Result<Vec<f64>> {
        match self {
            Target::Reference => {
                em_continuous_nodes(coeffs, &GridFunction::identity(noise.horizon())?, noise, x, 0, targets)
            }
            Target::ExactLinear => targets
                .iter()
                .map(|&j| exact_linear(coeffs, noise, x, noise.node_time(j)))
                .collect(),
            Target::ExactOu => targets
                .iter()
                .map(|&j| crate::scheme::exact::exact_ou_for(coeffs, noise, x, noise.node_time(j)))
                .collect(),
        }
    }
}
