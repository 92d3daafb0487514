//! Grid- and sample-based checks of the structural conditions on
//! `(mu, sigma, gamma, V)`.
//!
//! A passing report certifies the inequality on the tested set only; each
//! report records that set in `domain`.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::levy::LevyMeasureSpec;
use crate::model::{CoefficientSet, Lyapunov, PolynomialLyapunov};
use crate::quadrature::LevyIntegrator;
use crate::rng::{PathSeed, Substream};

/// Relative floating-point slack for exact inequality checks.
pub const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    /// Jump drift bound on the second-order Taylor remainder of `V`.
    A0,
    /// Linear growth of the coefficients dominated by `V^{1/p}`.
    A1,
    /// `|V'| <= cbar V^{1 - 1/p}`.
    A2,
    /// `|V''| <= cbar V^{1 - 2/p}`.
    A3,
    /// Second-difference bound on each coefficient.
    A4,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub passed: bool,
    /// Minimal constant over the tested set (A0, A2, A3).
    pub constant: Option<f64>,
    /// Smallest `rhs - lhs` over the tested set (A1, A4).
    pub margin: Option<f64>,
    /// Where the constant is attained or the margin is smallest.
    pub worst_point: Vec<f64>,
    pub evaluated: usize,
    pub domain: String,
}

fn grid_domain(grid: &[f64]) -> String {
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    format!("{} points in [{lo}, {hi}]", grid.len())
}

/// Running maximum of a ratio with its argmax.
struct Sup {
    value: f64,
    at: Vec<f64>,
}

impl Sup {
    fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            at: Vec::new(),
        }
    }

    fn offer(&mut self, value: f64, at: &[f64]) {
        if value > self.value || value.is_nan() {
            self.value = value;
            self.at = at.to_vec();
        }
    }
}

fn constant_report(condition: Condition, sup: Sup, evaluated: usize, domain: String) -> ConditionReport {
    let constant = sup.value.max(0.0);
    ConditionReport {
        condition,
        passed: constant.is_finite(),
        constant: Some(constant),
        margin: None,
        worst_point: sup.at,
        evaluated,
        domain,
    }
}

/// `|mu(0)| + |sigma(0)| + c|x| + (|gamma(0)| + c|x|) sqrt(m2) <= V(x)^{1/p}`.
pub fn check_a1<V: Lyapunov>(lyap: &V, coeffs: &CoefficientSet, m2: f64, x_grid: &[f64]) -> ConditionReport {
    let p = lyap.exponent();
    let root_m2 = m2.sqrt();
    let (mu0, sigma0, gamma0) = (coeffs.mu(0.0).abs(), coeffs.sigma(0.0).abs(), coeffs.gamma(0.0).abs());
    let mut worst = f64::INFINITY;
    let mut worst_point = Vec::new();
    let mut passed = true;
    for &x in x_grid {
        let cx = coeffs.c * x.abs();
        let lhs = mu0 + sigma0 + cx + (gamma0 + cx) * root_m2;
        let rhs = lyap.value(x).powf(1.0 / p);
        let margin = rhs - lhs;
        if margin < -SLACK * rhs.abs().max(1.0) || margin.is_nan() {
            passed = false;
        }
        if margin < worst || margin.is_nan() {
            worst = margin;
            worst_point = vec![x];
        }
    }
    ConditionReport {
        condition: Condition::A1,
        passed: passed && !x_grid.is_empty(),
        constant: None,
        margin: Some(worst),
        worst_point,
        evaluated: x_grid.len(),
        domain: grid_domain(x_grid),
    }
}

/// Minimal `cbar` with `|V'| <= cbar V^{1-1/p}` on the grid.
pub fn check_a2<V: Lyapunov>(lyap: &V, x_grid: &[f64]) -> ConditionReport {
    let p = lyap.exponent();
    let mut sup = Sup::new();
    for &x in x_grid {
        sup.offer(lyap.first(x).abs() / lyap.value(x).powf(1.0 - 1.0 / p), &[x]);
    }
    constant_report(Condition::A2, sup, x_grid.len(), grid_domain(x_grid))
}

/// Minimal `cbar` with `|V''| <= cbar V^{1-2/p}` on the grid.
pub fn check_a3<V: Lyapunov>(lyap: &V, x_grid: &[f64]) -> ConditionReport {
    let p = lyap.exponent();
    let mut sup = Sup::new();
    for &x in x_grid {
        sup.offer(lyap.second(x).abs() / lyap.value(x).powf(1.0 - 2.0 / p), &[x]);
    }
    constant_report(Condition::A3, sup, x_grid.len(), grid_domain(x_grid))
}

/// Minimal `cbar` with
/// `int [V(y + gamma(x) z) - V(y) - V'(y) gamma(x) z] nu(dz) <= cbar (V(x) + V(y)) / 2`
/// over the product grid.
pub fn check_a0<V: Lyapunov>(
    lyap: &V,
    coeffs: &CoefficientSet,
    levy: &LevyMeasureSpec,
    x_grid: &[f64],
    y_grid: &[f64],
) -> Result<ConditionReport> {
    let integrator = LevyIntegrator::new(levy)?;
    Ok(check_a0_with(lyap, coeffs, &integrator, x_grid, y_grid))
}

pub fn check_a0_with<V: Lyapunov>(
    lyap: &V,
    coeffs: &CoefficientSet,
    integrator: &LevyIntegrator,
    x_grid: &[f64],
    y_grid: &[f64],
) -> ConditionReport {
    let mut sup = Sup::new();
    let vy: Vec<(f64, f64, f64)> = y_grid.iter().map(|&y| (y, lyap.value(y), lyap.first(y))).collect();
    for &x in x_grid {
        let g = coeffs.gamma(x);
        let vx = lyap.value(x);
        for &(y, v, dv) in &vy {
            let integral = if g == 0.0 {
                0.0
            } else {
                integrator.integrate(|z| lyap.value(y + g * z) - v - dv * g * z)
            };
            sup.offer(2.0 * integral / (vx + v), &[x, y]);
        }
    }
    let domain = format!("{} x {}", grid_domain(x_grid), grid_domain(y_grid));
    constant_report(Condition::A0, sup, x_grid.len() * y_grid.len(), domain)
}

/// Checks, for each of `mu`, `sigma`, `gamma`,
/// `|(f(x) - f(y)) - (f(x~) - f(y~))| <= c |(x - y) - (x~ - y~)| + b (|x - y| + |x~ - y~|) / 2 |x - x~|`
/// on the first `n_samples` quadruples `[x, y, x~, y~]`.
pub fn check_a4<I>(coeffs: &CoefficientSet, quadruples: I, n_samples: usize) -> ConditionReport
where
    I: IntoIterator<Item = [f64; 4]>,
{
    let fns = [coeffs.mu, coeffs.sigma, coeffs.gamma];
    let mut worst = f64::INFINITY;
    let mut worst_point = Vec::new();
    let mut passed = true;
    let mut evaluated = 0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for q in quadruples.into_iter().take(n_samples) {
        let [x, y, xt, yt] = q;
        let lhs = fns
            .iter()
            .map(|f| ((f.eval(x) - f.eval(y)) - (f.eval(xt) - f.eval(yt))).abs())
            .fold(0.0, f64::max);
        let rhs = coeffs.c * ((x - y) - (xt - yt)).abs() + coeffs.b * 0.5 * ((x - y).abs() + (xt - yt).abs()) * (x - xt).abs();
        let margin = rhs - lhs;
        let scale = 1.0 + x.abs() + y.abs() + xt.abs() + yt.abs();
        if margin < -SLACK * scale || margin.is_nan() {
            passed = false;
        }
        if margin < worst {
            worst = margin;
            worst_point = q.to_vec();
        }
        for v in q {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        evaluated += 1;
    }
    ConditionReport {
        condition: Condition::A4,
        passed: passed && evaluated > 0,
        constant: None,
        margin: Some(worst),
        worst_point,
        evaluated,
        domain: format!("{evaluated} quadruples in [{lo}, {hi}]^4"),
    }
}

/// Iid uniform quadruples in `[lo, hi]^4`; every fourth one is a small
/// perturbation of a parallelogram (`x - y = x~ - y~`), where the curvature
/// term of the second-difference bound is tight.
pub fn uniform_quadruples(lo: f64, hi: f64, seed: u64) -> impl Iterator<Item = [f64; 4]> {
    let mut rng = PathSeed::new(seed, 0).stream(Substream::Auxiliary);
    let mut k = 0u64;
    std::iter::from_fn(move || {
        k += 1;
        let mut draw = || rng.random_range(lo..=hi);
        let x = draw();
        let y = draw();
        let xt = draw();
        if k % 4 == 0 {
            let eps = 1e-3 * (hi - lo) * (rng.random::<f64>() - 0.5);
            let yt = (xt - (x - y) + eps).clamp(lo, hi);
            Some([x, y, xt, yt])
        } else {
            Some([x, y, xt, draw()])
        }
    })
}

/// All quadruples of an equispaced lattice on `[lo, hi]^4`.
pub fn lattice_quadruples(lo: f64, hi: f64, step: f64) -> impl Iterator<Item = [f64; 4]> {
    let axis = linspace_step(lo, hi, step);
    let n = axis.len();
    (0..n.pow(4)).map(move |i| [axis[i % n], axis[(i / n) % n], axis[(i / n / n) % n], axis[i / n / n / n]])
}

/// `lo, lo + step, ...` up to `hi` (inclusive, within rounding).
pub fn linspace_step(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|i| lo + i as f64 * step).collect()
}

/// Settings of a full certification run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationPlan {
    pub p: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub step: f64,
    pub a4_box: f64,
    pub a4_samples: usize,
    pub seed: u64,
}

impl Default for CertificationPlan {
    fn default() -> Self {
        Self {
            p: 2.0,
            x_min: -10.0,
            x_max: 10.0,
            step: 0.1,
            a4_box: 10.0,
            a4_samples: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Certification {
    pub reports: Vec<ConditionReport>,
    /// `max(1, cbar_A0, cbar_A2, cbar_A3)`.
    pub cbar: f64,
    pub lyapunov: PolynomialLyapunov,
}

impl Certification {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn report(&self, condition: Condition) -> Option<&ConditionReport> {
        self.reports.iter().find(|r| r.condition == condition)
    }
}

/// Runs all five checks for the polynomial Lyapunov function of the model
/// and stores the resulting `cbar` in it.
pub fn certify(coeffs: &CoefficientSet, levy: &LevyMeasureSpec, plan: &CertificationPlan) -> Result<Certification> {
    let lyap = PolynomialLyapunov::new(plan.p, coeffs, levy)?;
    let grid = linspace_step(plan.x_min, plan.x_max, plan.step);
    let a0 = check_a0(&lyap, coeffs, levy, &grid, &grid)?;
    let a1 = check_a1(&lyap, coeffs, lyap.m2, &grid);
    let a2 = check_a2(&lyap, &grid);
    let a3 = check_a3(&lyap, &grid);
    let a4 = check_a4(
        coeffs,
        uniform_quadruples(-plan.a4_box, plan.a4_box, plan.seed),
        plan.a4_samples,
    );
    let cbar = [a0.constant, a2.constant, a3.constant]
        .into_iter()
        .flatten()
        .fold(1.0, f64::max);
    Ok(Certification {
        reports: vec![a0, a1, a2, a3, a4],
        cbar,
        lyapunov: lyap.with_cbar(cbar),
    })
}
