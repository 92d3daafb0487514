//! The experiment file: one TOML document with nested tables.
//!
//! Unknown keys are rejected everywhere, so a misspelt field fails the load
//! instead of silently falling back to a default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use levy_em::levy::{JumpLaw, LevyMeasureSpec};
use levy_em::model::{presets, CoefficientSet, ScalarFn};
use levy_em::scheme::GridSpec;
use levy_em::strong::{Functional, Target};
use serde::{Deserialize, Serialize};

use crate::validate::Diagnostic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "defaults::horizon")]
    pub horizon: f64,
    #[serde(default = "defaults::p")]
    pub p: f64,
    /// Monte Carlo sample size `M`.
    #[serde(default = "defaults::paths")]
    pub paths: usize,
    /// The fine grid has `2^fine_level` steps.
    #[serde(default = "defaults::fine_level")]
    pub fine_level: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "defaults::levy")]
    pub levy: LevyMeasureSpec,
    #[serde(default = "defaults::studies", rename = "study")]
    pub studies: Vec<StudyConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            horizon: defaults::horizon(),
            p: defaults::p(),
            paths: defaults::paths(),
            fine_level: defaults::fine_level(),
            seed: 0,
            out_dir: defaults::out_dir(),
            model: ModelConfig::default(),
            levy: defaults::levy(),
            studies: defaults::studies(),
        }
    }
}

/// Either a named preset (with optional parameters) or explicit `mu`,
/// `sigma`, `gamma`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: Option<String>,
    /// Preset parameters by name, e.g. `{ a = 0.5, b = 0.2, g = 0.1 }`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    pub mu: Option<ScalarFn>,
    pub sigma: Option<ScalarFn>,
    pub gamma: Option<ScalarFn>,
    /// Overrides for the structural constants `c` and `b`.
    pub c: Option<f64>,
    pub b: Option<f64>,
}

/// Parameter names accepted by each preset, with their defaults.
pub fn preset_params(name: &str) -> Option<&'static [(&'static str, f64)]> {
    match name {
        "linear" => Some(&[("a", 0.1), ("a0", 0.0), ("b", 0.5), ("b0", 0.0), ("g", 0.2), ("g0", 0.0)]),
        "ou-additive" => Some(&[("lambda", 1.0), ("sigma0", 0.5)]),
        "trig" => Some(&[]),
        _ => None,
    }
}

impl ModelConfig {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_owned()),
            ..Self::default()
        }
    }

    fn has_explicit(&self) -> bool {
        self.mu.is_some() || self.sigma.is_some() || self.gamma.is_some()
    }

    /// Builds the coefficient set; every problem is reported with its field path.
    pub fn build(&self) -> Result<CoefficientSet, Vec<Diagnostic>> {
        let mut diags = Vec::new();
        let coeffs = match (&self.preset, self.has_explicit()) {
            (Some(_), true) => {
                diags.push(Diagnostic::new("model", "give either a preset or mu/sigma/gamma, not both"));
                None
            }
            (Some(name), false) => self.build_preset(name, &mut diags),
            (None, true) => {
                if !self.params.is_empty() {
                    diags.push(Diagnostic::new("model.params", "params only apply to presets"));
                }
                match (self.mu, self.sigma, self.gamma) {
                    (Some(mu), Some(sigma), Some(gamma)) => {
                        ok_or_push(CoefficientSet::new("explicit", mu, sigma, gamma), "model", &mut diags)
                    }
                    _ => {
                        for (name, f) in [("mu", self.mu), ("sigma", self.sigma), ("gamma", self.gamma)] {
                            if f.is_none() {
                                diags.push(Diagnostic::new(format!("model.{name}"), "missing explicit coefficient"));
                            }
                        }
                        None
                    }
                }
            }
            (None, false) => self.build_preset("linear", &mut diags),
        };
        let coeffs = match coeffs {
            Some(c) if self.c.is_some() || self.b.is_some() => {
                let (c0, b0) = (self.c.unwrap_or(c.c), self.b.unwrap_or(c.b));
                ok_or_push(c.with_constants(c0, b0), "model.c", &mut diags)
            }
            other => other,
        };
        match coeffs {
            Some(c) if diags.is_empty() => Ok(c),
            _ => Err(diags),
        }
    }

    fn build_preset(&self, name: &str, diags: &mut Vec<Diagnostic>) -> Option<CoefficientSet> {
        let Some(known) = preset_params(name) else {
            diags.push(Diagnostic::new(
                "model.preset",
                format!("unknown preset `{name}` (known: {})", presets::NAMES.join(", ")),
            ));
            return None;
        };
        for key in self.params.keys() {
            if !known.iter().any(|(k, _)| k == key) {
                diags.push(Diagnostic::new(
                    format!("model.params.{key}"),
                    format!("preset `{name}` has no parameter `{key}`"),
                ));
            }
        }
        let get = |key: &str| {
            self.params
                .get(key)
                .copied()
                .unwrap_or_else(|| known.iter().find(|(k, _)| *k == key).map_or(0.0, |(_, v)| *v))
        };
        let built = match name {
            "linear" => presets::linear(get("a"), get("a0"), get("b"), get("b0"), get("g"), get("g0")),
            "ou-additive" => presets::ou_additive(get("lambda"), get("sigma0")),
            _ => Ok(presets::trig_default()),
        };
        ok_or_push(built, "model.params", diags)
    }
}

fn ok_or_push<T>(r: levy_em::Result<T>, path: &str, diags: &mut Vec<Diagnostic>) -> Option<T> {
    r.map_err(|e| diags.push(Diagnostic::new(path, e.to_string()))).ok()
}

/// One `[[study]]` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StudyConfig {
    RateStudy(RateStudy),
    CheckConditions(CheckConditions),
    MomentCheck(MomentCheck),
    HolderStudy(HolderStudy),
}

impl StudyConfig {
    pub fn id(&self) -> &str {
        match self {
            StudyConfig::RateStudy(s) => &s.id,
            StudyConfig::CheckConditions(s) => &s.id,
            StudyConfig::MomentCheck(s) => &s.id,
            StudyConfig::HolderStudy(s) => &s.id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            StudyConfig::RateStudy(_) => "rate-study",
            StudyConfig::CheckConditions(_) => "check-conditions",
            StudyConfig::MomentCheck(_) => "moment-check",
            StudyConfig::HolderStudy(_) => "holder-study",
        }
    }
}

/// Strong-error decay of one functional over a list of step counts.
///
/// Which initial values and times are read depends on the functional:
/// `pointwise` and `gridless-window` use `x`; `mixed-xy` compares `x` with
/// `x_tilde` on the diagonal `y = x`, `y~ = x~`; `corollary` uses the pair
/// `(x, x_tilde)` as its two initial values; `temporal-spatial` compares
/// `(s, t, x)` with `(s_tilde, t_tilde, x_tilde)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateStudy {
    pub id: String,
    #[serde(default = "defaults::functional")]
    pub functional: Functional,
    /// Defaults to the closed-form solution when the model has one.
    pub target: Option<Target>,
    #[serde(default = "defaults::ns")]
    pub ns: Vec<usize>,
    #[serde(default = "defaults::one")]
    pub x: f64,
    pub x_tilde: Option<f64>,
    #[serde(default)]
    pub s: f64,
    pub s_tilde: Option<f64>,
    pub t: Option<f64>,
    pub t_tilde: Option<f64>,
    #[serde(default = "defaults::two")]
    pub m: f64,
    #[serde(default = "defaults::two")]
    pub kappa1: f64,
    #[serde(default = "defaults::time_fractions")]
    pub time_fractions: Vec<f64>,
    /// Overrides the top-level `p`.
    pub p: Option<f64>,
    /// `--assert`: the fitted slope must lie in this range.
    pub slope_range: Option<[f64; 2]>,
    /// `--assert`: the slope must satisfy `slope <= -(exponent - tolerance)`.
    #[serde(default = "defaults::tolerance")]
    pub tolerance: f64,
}

impl RateStudy {
    pub fn new(id: &str, functional: Functional) -> Self {
        Self {
            id: id.to_owned(),
            functional,
            target: None,
            ns: defaults::ns(),
            x: 1.0,
            x_tilde: None,
            s: 0.0,
            s_tilde: None,
            t: None,
            t_tilde: None,
            m: 2.0,
            kappa1: 2.0,
            time_fractions: defaults::time_fractions(),
            p: None,
            slope_range: None,
            tolerance: defaults::tolerance(),
        }
    }

    /// Second initial value; `x + 1` unless given.
    pub fn x_tilde(&self) -> f64 {
        self.x_tilde.unwrap_or(self.x + 1.0)
    }

    /// Whether `x_tilde` enters the computation.
    pub fn uses_x_tilde(&self) -> bool {
        matches!(
            self.functional,
            Functional::MixedXy | Functional::Corollary | Functional::TemporalSpatial
        )
    }

    /// Whether `m` and `kappa1` enter the exponent.
    pub fn uses_holder_exponents(&self) -> bool {
        matches!(
            self.functional,
            Functional::MixedXy | Functional::Corollary | Functional::TemporalSpatial
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConditions {
    pub id: String,
    #[serde(default = "defaults::lo")]
    pub lo: f64,
    #[serde(default = "defaults::hi")]
    pub hi: f64,
    #[serde(default = "defaults::step")]
    pub step: f64,
    #[serde(default = "defaults::hi")]
    pub a4_box: f64,
    #[serde(default = "defaults::a4_samples")]
    pub a4_samples: usize,
}

/// Audit of `E V(Y_t) <= e^{2.5 cbar t} V(x) + 3 SE`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentCheck {
    pub id: String,
    #[serde(default = "defaults::moment_ns")]
    pub ns: Vec<usize>,
    /// Extra grids, uniform or explicit, audited alongside `ns`.
    #[serde(default)]
    pub grids: Vec<GridSpec>,
    #[serde(default = "defaults::moment_xs")]
    pub xs: Vec<f64>,
    #[serde(default = "defaults::moment_ts")]
    pub ts: Vec<f64>,
}

/// Spatial and temporal differences of the scheme at a fixed step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderStudy {
    pub id: String,
    #[serde(default = "defaults::holder_n")]
    pub n: usize,
    #[serde(default = "defaults::one")]
    pub x: f64,
    /// Spatial offsets `x~ - x`, compared at time `horizon`.
    #[serde(default = "defaults::offsets")]
    pub offsets: Vec<f64>,
    /// Temporal gaps `t~ - t`, measured from `t`.
    #[serde(default = "defaults::gaps")]
    pub gaps: Vec<f64>,
    #[serde(default = "defaults::half")]
    pub t: f64,
    /// `--assert`: `(max - min) / min` of the normalized ratios per family.
    #[serde(default = "defaults::half")]
    pub max_variation: f64,
}

pub(crate) mod defaults {
    use super::*;

    pub fn horizon() -> f64 {
        1.0
    }
    pub fn p() -> f64 {
        2.0
    }
    pub fn paths() -> usize {
        10_000
    }
    pub fn fine_level() -> u32 {
        14
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn levy() -> LevyMeasureSpec {
        LevyMeasureSpec {
            intensity: 2.0,
            law: JumpLaw::Gaussian { mean: 0.1, sd: 0.5 },
        }
    }
    pub fn studies() -> Vec<StudyConfig> {
        vec![StudyConfig::RateStudy(RateStudy::new("rate", Functional::Pointwise))]
    }
    pub fn functional() -> Functional {
        Functional::Pointwise
    }
    pub fn ns() -> Vec<usize> {
        (4..=10).map(|k| 1usize << k).collect()
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn two() -> f64 {
        2.0
    }
    pub fn half() -> f64 {
        0.5
    }
    pub fn time_fractions() -> Vec<f64> {
        vec![0.25, 0.5, 0.75, 1.0]
    }
    pub fn tolerance() -> f64 {
        0.1
    }
    pub fn lo() -> f64 {
        -10.0
    }
    pub fn hi() -> f64 {
        10.0
    }
    pub fn step() -> f64 {
        0.1
    }
    pub fn a4_samples() -> usize {
        100_000
    }
    pub fn moment_ns() -> Vec<usize> {
        vec![16, 256]
    }
    pub fn moment_xs() -> Vec<f64> {
        vec![0.0, 1.0, 5.0]
    }
    pub fn moment_ts() -> Vec<f64> {
        vec![0.25, 0.5, 1.0]
    }
    pub fn holder_n() -> usize {
        64
    }
    pub fn offsets() -> Vec<f64> {
        [0, 2, 4, 6].iter().map(|k| 0.5f64.powi(*k)).collect()
    }
    pub fn gaps() -> Vec<f64> {
        (3..=8).map(|k| 0.5f64.powi(k)).collect()
    }
}

impl ExperimentConfig {
    /// Parses TOML; a failure is one diagnostic naming the offending field.
    pub fn from_toml_str(text: &str) -> Result<Self, Vec<Diagnostic>> {
        let table: toml::Table = toml::from_str(text).map_err(|e| vec![Diagnostic::new("config", e.to_string())])?;
        serde_path_to_error::deserialize(table).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "config".to_owned() } else { path };
            vec![Diagnostic::new(path, e.into_inner().to_string())]
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String), Vec<Diagnostic>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| vec![Diagnostic::new("config", format!("cannot read {}: {e}", path.display()))])?;
        Ok((Self::from_toml_str(&text)?, text))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Total fine steps `2^L`.
    pub fn steps(&self) -> usize {
        1usize << self.fine_level.min(62)
    }
}
