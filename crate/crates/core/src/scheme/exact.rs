//! Closed-form solutions driven by the same noise path as the schemes.

use crate::error::{Error, Result};
use crate::model::CoefficientSet;
use crate::noise::NoisePath;

/// Doléans-Dade exponential for `dX = a X dt + b X dW + g X- dZ`:
/// `x exp((a - b^2/2 - g drift) t + b W(t)) prod_{tau_i <= t} (1 + g J_i)`.
pub fn exact_linear(coeffs: &CoefficientSet, noise: &NoisePath, x: f64, t: f64) -> Result<f64> {
    let (a, b, g) = coeffs
        .linear_slopes()
        .ok_or(Error::WrongModel { expected: "linear through the origin" })?;
    let j = noise.node_index(t)?;
    let tj = noise.node_time(j);
    let product: f64 = noise
        .jumps()
        .iter()
        .take_while(|e| e.time <= tj)
        .map(|e| 1.0 + g * e.size)
        .product();
    let exponent = (a - 0.5 * b * b - g * noise.drift_rate()) * tj + b * noise.w_node(j);
    Ok(x * exponent.exp() * product)
}

/// Lévy Ornstein–Uhlenbeck solution of `dX = -lambda X dt + sigma0 dW + dZ`.
pub fn exact_ou(lambda: f64, sigma0: f64, noise: &NoisePath, x: f64, t: f64) -> Result<f64> {
    exact_ou_with_stride(lambda, sigma0, noise, x, t, 1)
}

/// As [`exact_ou`], with the Wiener integral `int e^{-lambda(t-s)} dW_s`
/// approximated by left-point sums over blocks of `stride` fine steps.
/// The jump and compensator terms are exact.
pub fn exact_ou_with_stride(lambda: f64, sigma0: f64, noise: &NoisePath, x: f64, t: f64, stride: usize) -> Result<f64> {
    let j = noise.node_index(t)?;
    if stride == 0 || j % stride != 0 {
        return Err(Error::NotADivisor { coarse: stride, fine: j });
    }
    let tj = noise.node_time(j);
    let decay = |s: f64| (-lambda * (tj - s)).exp();

    let mut wiener = 0.0;
    for k in (0..j).step_by(stride) {
        wiener += decay(noise.node_time(k)) * noise.dw(k, k + stride);
    }

    let mut jumps = 0.0;
    let mut raw = 0.0;
    for e in noise.jumps().iter().take_while(|e| e.time <= tj) {
        jumps += decay(e.time) * e.size;
        raw += e.size;
    }
    // realized compensator, so that lambda = 0 reproduces Z(t) exactly
    let compensator = raw - noise.z_node(j);
    let u = lambda * tj;
    let weight = if u == 0.0 { 1.0 } else { -(-u).exp_m1() / u };

    Ok((-lambda * tj).exp() * x + sigma0 * wiener + (jumps - compensator * weight))
}

/// `exact_ou` for a coefficient set of Lévy OU shape.
pub(crate) fn exact_ou_for(coeffs: &CoefficientSet, noise: &NoisePath, x: f64, t: f64) -> Result<f64> {
    let (lambda, sigma0) = coeffs.ou_parameters().ok_or(Error::WrongModel {
        expected: "Levy Ornstein-Uhlenbeck (mu = -lambda x, constant sigma, gamma = 1)",
    })?;
    exact_ou(lambda, sigma0, noise, x, t)
}
