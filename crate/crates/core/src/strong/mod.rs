//! Monte Carlo estimation of strong errors and temporal-spatial regularity.

mod estimate;
mod functionals;
mod holder;
mod simulation;

pub use estimate::{
    batch_mean, fit_rate, fit_rate_estimates, lp_estimate, Estimate, LpEstimate, MeanEstimate, RateFit, BATCHES,
    NOISE_FLOOR,
};
pub use functionals::{
    corollary_functional, corollary_study, gridless_window_difference, gridless_window_study, holder_difference,
    holder_lattice, mixed_xy_difference, mixed_xy_study, moment_audit, moment_audit_grids, spatial_difference, spatial_difference_study,
    strong_error_pointwise, strong_error_study, temporal_increment, temporal_increment_study,
    temporal_spatial_difference, temporal_spatial_study, CorollaryTerm, CorollaryValue, MixedStarts, MomentAudit,
    SpaceTime,
};
pub use holder::HolderStudyConfig;
pub use simulation::{Simulation, Target};

use serde::{Deserialize, Serialize};

/// The error functionals that rate studies fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Functional {
    Pointwise,
    MixedXy,
    TemporalSpatial,
    Corollary,
    GridlessWindow,
}

impl Functional {
    pub const ALL: [Functional; 5] = [
        Functional::Pointwise,
        Functional::MixedXy,
        Functional::TemporalSpatial,
        Functional::Corollary,
        Functional::GridlessWindow,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Functional::Pointwise => "pointwise",
            Functional::MixedXy => "mixed-xy",
            Functional::TemporalSpatial => "temporal-spatial",
            Functional::Corollary => "corollary",
            Functional::GridlessWindow => "gridless-window",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Proven decay exponent `e` in `error <= C n^{-e}`.
    pub fn exponent(&self, study: &HolderStudyConfig) -> f64 {
        match self {
            Functional::Pointwise => study.pointwise_exponent(),
            Functional::MixedXy => study.mixed_exponent(),
            Functional::TemporalSpatial | Functional::Corollary => study.holder_exponent(),
            // window length equals the mesh: |delta|^{1/p} |s^ - s|^{1/p}
            Functional::GridlessWindow => 2.0 / study.p,
        }
    }
}
