//! SDE coefficients, the polynomial Lyapunov function and condition checks.

mod coefficients;
pub mod conditions;
mod lyapunov;

pub use coefficients::{presets, CoefficientSet, ScalarFn};
pub use conditions::{certify, CertificationPlan, Certification, Condition, ConditionReport};
pub use lyapunov::{Lyapunov, PolynomialLyapunov};
