//! Gauss–Legendre quadrature and integration against a Lévy measure.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::levy::{JumpLaw, LevyMeasureSpec};

/// Nodes and weights of the `order`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `int_a^b f(z) dz`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// Default Gauss–Legendre order for continuous jump laws.
pub const DEFAULT_ORDER: usize = 64;
/// Default bound on the jump mass left outside the quadrature window.
pub const DEFAULT_MASS_TOLERANCE: f64 = 1e-10;

/// One integration window with its density weight.
#[derive(Debug, Clone, Copy)]
enum Piece {
    Gaussian { lo: f64, hi: f64, mean: f64, sd: f64 },
    /// `weight * rate * exp(-rate |z|)` on `[lo, hi]`, one side of zero.
    Exponential { lo: f64, hi: f64, weight: f64, rate: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// Evaluates `int f(z) nu(dz)`: an exact sum for point masses, windowed
/// Gauss–Legendre for continuous laws.
#[derive(Debug, Clone)]
pub struct LevyIntegrator {
    intensity: f64,
    atoms: Vec<(f64, f64)>,
    pieces: Vec<Piece>,
    rule: GaussLegendre,
    uncovered: f64,
}

impl LevyIntegrator {
    pub fn new(spec: &LevyMeasureSpec) -> Result<Self> {
        Self::with_options(spec, DEFAULT_ORDER, DEFAULT_MASS_TOLERANCE)
    }

    pub fn with_options(spec: &LevyMeasureSpec, order: usize, mass_tolerance: f64) -> Result<Self> {
        if order == 0 {
            return Err(invalid("order", "quadrature order must be positive"));
        }
        if !(mass_tolerance > 0.0 && mass_tolerance < 1.0) {
            return Err(invalid("mass_tolerance", "must lie in (0, 1)"));
        }
        let mut atoms = Vec::new();
        let mut pieces = Vec::new();
        let mut uncovered = 0.0;
        match spec.law {
            JumpLaw::PointMasses {
                ref sizes,
                ref weights,
            } => atoms = sizes.iter().copied().zip(weights.iter().copied()).collect(),
            JumpLaw::Gaussian { mean, sd } => {
                // smallest half-width (in sd, step 0.5, up to 12) meeting the tolerance
                let mut k = 1.0;
                let deficit = loop {
                    let deficit = erfc(k / SQRT_2);
                    if deficit <= mass_tolerance || k >= 12.0 {
                        break deficit;
                    }
                    k += 0.5;
                };
                if deficit > mass_tolerance {
                    return Err(Error::QuadratureTruncation {
                        law: "gaussian",
                        deficit,
                        tolerance: mass_tolerance,
                    });
                }
                uncovered = deficit;
                pieces.push(Piece::Gaussian {
                    lo: mean - k * sd,
                    hi: mean + k * sd,
                    mean,
                    sd,
                });
            }
            JumpLaw::TwoSidedExponential {
                rate_up,
                rate_down,
                mix,
            } => {
                // window [0, -ln(tol)/rate] leaves weight * tol outside; capped at 60 / rate
                let reach = -mass_tolerance.ln();
                if reach > 60.0 {
                    return Err(Error::QuadratureTruncation {
                        law: "two-sided-exponential",
                        deficit: (-60f64).exp(),
                        tolerance: mass_tolerance,
                    });
                }
                for (weight, rate, sign) in [(mix, rate_up, 1.0), (1.0 - mix, rate_down, -1.0)] {
                    if weight > 0.0 {
                        let end = sign * reach / rate;
                        pieces.push(Piece::Exponential {
                            lo: end.min(0.0),
                            hi: end.max(0.0),
                            weight,
                            rate,
                        });
                        uncovered += weight * mass_tolerance;
                    }
                }
            }
            JumpLaw::Uniform { low, high } => pieces.push(Piece::Uniform { lo: low, hi: high }),
        }
        Ok(Self {
            intensity: spec.intensity,
            atoms,
            pieces,
            rule: GaussLegendre::new(order),
            uncovered,
        })
    }

    /// Probability mass of the jump law outside the integration windows.
    pub fn uncovered_mass(&self) -> f64 {
        self.uncovered
    }

    /// `int f(z) nu(dz)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        if self.intensity == 0.0 {
            return 0.0;
        }
        let atoms: f64 = self.atoms.iter().map(|(z, w)| w * f(*z)).sum();
        let continuous: f64 = self
            .pieces
            .iter()
            .map(|piece| match *piece {
                Piece::Gaussian { lo, hi, mean, sd } => self.rule.integrate(lo, hi, |z| {
                    let r = (z - mean) / sd;
                    f(z) * (-0.5 * r * r).exp() / (sd * (2.0 * PI).sqrt())
                }),
                Piece::Exponential { lo, hi, weight, rate } => {
                    self.rule.integrate(lo, hi, |z| f(z) * weight * rate * (-rate * z.abs()).exp())
                }
                Piece::Uniform { lo, hi } => self.rule.integrate(lo, hi, |z| f(z) / (hi - lo)),
            })
            .sum();
        self.intensity * (atoms + continuous)
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
