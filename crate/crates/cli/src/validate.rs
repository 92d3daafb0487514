//! Static checks of an experiment before any path is simulated.

use std::collections::HashSet;
use std::fmt;

use levy_em::noise::fine_node_index;
use levy_em::strong::{Functional, Target, BATCHES};
use serde::Serialize;

use crate::config::{CheckConditions, ExperimentConfig, HolderStudy, MomentCheck, RateStudy, StudyConfig};

/// A problem with one field of the config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// Dotted path such as `study[0].ns[2]`.
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Checker<'a> {
    cfg: &'a ExperimentConfig,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.diags.push(Diagnostic::new(path, message));
    }

    fn p(&mut self, path: &str, p: f64) {
        if !(p >= 2.0) || !p.is_finite() {
            self.push(path, format!("p must be ≥ 2, got {p}"));
        }
    }

    fn finite(&mut self, path: &str, v: f64) {
        if !v.is_finite() {
            self.push(path, "must be finite");
        }
    }

    fn divisor(&mut self, path: String, n: usize) {
        let steps = self.cfg.steps();
        if n == 0 || steps % n != 0 {
            self.push(
                path,
                format!("{n} does not divide 2^{} = {steps}", self.cfg.fine_level),
            );
        }
    }

    /// `t` must be a fine-grid node in `[0, horizon]`.
    fn node(&mut self, path: String, t: f64) {
        if let Err(e) = fine_node_index(self.cfg.horizon, self.cfg.steps(), t) {
            self.push(path, e.to_string());
        }
    }

    fn rate(&mut self, at: &str, s: &RateStudy, coeffs: Option<&levy_em::model::CoefficientSet>) {
        if s.ns.len() < 3 {
            self.push(format!("{at}.ns"), "a rate fit needs at least 3 step counts");
        }
        let mut seen = HashSet::new();
        for (i, &n) in s.ns.iter().enumerate() {
            self.divisor(format!("{at}.ns[{i}]"), n);
            if !seen.insert(n) {
                self.push(format!("{at}.ns[{i}]"), format!("duplicate step count {n}"));
            }
            if s.functional == Functional::GridlessWindow && (n < 2 || n % 2 != 0 || self.cfg.steps() % (2 * n) != 0) {
                self.push(format!("{at}.ns[{i}]"), "the gridless window needs even n with 2n dividing 2^fine_level");
            }
        }
        if let Some(p) = s.p {
            self.p(&format!("{at}.p"), p);
        }
        self.finite(&format!("{at}.x"), s.x);
        if s.uses_x_tilde() {
            self.finite(&format!("{at}.x_tilde"), s.x_tilde());
        } else if s.x_tilde.is_some() {
            self.push(format!("{at}.x_tilde"), format!("not used by the {} functional", s.functional.name()));
        }
        if s.uses_holder_exponents() {
            if !(s.m > 1.0) || !s.m.is_finite() {
                self.push(format!("{at}.m"), "m must be > 1");
            }
            if !(s.kappa1 > 1.0) || !s.kappa1.is_finite() {
                self.push(format!("{at}.kappa1"), "kappa1 must be > 1");
            }
        }
        let has_times = s.s != 0.0 || s.s_tilde.is_some() || s.t.is_some() || s.t_tilde.is_some();
        match s.functional {
            Functional::TemporalSpatial => {
                let t = s.t.unwrap_or(self.cfg.horizon);
                let (st, tt) = (s.s_tilde.unwrap_or(s.s), s.t_tilde.unwrap_or(t));
                for (name, v) in [("s", s.s), ("s_tilde", st), ("t", t), ("t_tilde", tt)] {
                    self.node(format!("{at}.{name}"), v);
                }
                if s.s > t {
                    self.push(format!("{at}.s"), "start time exceeds evaluation time t");
                }
                if st > tt {
                    self.push(format!("{at}.s_tilde"), "start time exceeds evaluation time t_tilde");
                }
            }
            Functional::Corollary => {
                if s.x == s.x_tilde() {
                    self.push(format!("{at}.x_tilde"), "the normalized functional needs x != x_tilde");
                }
                if s.time_fractions.is_empty() {
                    self.push(format!("{at}.time_fractions"), "need at least one time index");
                }
                for (i, &f) in s.time_fractions.iter().enumerate() {
                    if !(0.0..=1.0).contains(&f) {
                        self.push(format!("{at}.time_fractions[{i}]"), "fractions must lie in [0, 1]");
                    } else if let Some(n) = s.ns.iter().find(|&&n| (f * n as f64).fract() != 0.0) {
                        self.push(format!("{at}.time_fractions[{i}]"), format!("{f} * {n} is not an integer time index"));
                    }
                }
            }
            _ if has_times => self.push(
                format!("{at}.t"),
                format!("times are not used by the {} functional", s.functional.name()),
            ),
            _ => {}
        }
        match (s.target, s.functional) {
            (Some(t), Functional::TemporalSpatial | Functional::GridlessWindow) if t != Target::Reference => {
                self.push(format!("{at}.target"), "this functional always compares against the fine reference")
            }
            (Some(t), _) => {
                if let Some(Err(e)) = coeffs.map(|c| t.check(c)) {
                    self.push(format!("{at}.target"), format!("{} oracle: {e}", t.name()));
                }
            }
            _ => {}
        }
        if let Some([lo, hi]) = s.slope_range {
            if !(lo < hi) {
                self.push(format!("{at}.slope_range"), "need lo < hi");
            }
        }
        if !(s.tolerance >= 0.0) {
            self.push(format!("{at}.tolerance"), "must be >= 0");
        }
    }

    fn conditions(&mut self, at: &str, s: &CheckConditions) {
        if !(s.lo < s.hi) || !s.lo.is_finite() || !s.hi.is_finite() {
            self.push(format!("{at}.lo"), "need finite lo < hi");
        }
        if !(s.step > 0.0) || !s.step.is_finite() {
            self.push(format!("{at}.step"), "must be finite and > 0");
        }
        if !(s.a4_box > 0.0) || !s.a4_box.is_finite() {
            self.push(format!("{at}.a4_box"), "must be finite and > 0");
        }
        if s.a4_samples == 0 {
            self.push(format!("{at}.a4_samples"), "must be > 0");
        }
    }

    fn moments(&mut self, at: &str, s: &MomentCheck) {
        if s.ns.is_empty() && s.grids.is_empty() {
            self.push(format!("{at}.ns"), "need at least one step count or grid");
        }
        for (i, &n) in s.ns.iter().enumerate() {
            self.divisor(format!("{at}.ns[{i}]"), n);
        }
        for (i, g) in s.grids.iter().enumerate() {
            match g.build(self.cfg.horizon) {
                Ok(grid) => match grid.breakpoints() {
                    Some(points) => {
                        for (k, b) in points.iter().enumerate() {
                            self.node(format!("{at}.grids[{i}].breakpoints[{k}]"), *b);
                        }
                    }
                    None => self.push(format!("{at}.grids[{i}]"), "grid has no breakpoints"),
                },
                Err(e) => self.push(format!("{at}.grids[{i}]"), e.to_string()),
            }
            if let levy_em::scheme::GridSpec::Uniform { n } = g {
                self.divisor(format!("{at}.grids[{i}].n"), *n);
            }
        }
        for (i, &x) in s.xs.iter().enumerate() {
            self.finite(&format!("{at}.xs[{i}]"), x);
        }
        for (i, &t) in s.ts.iter().enumerate() {
            self.node(format!("{at}.ts[{i}]"), t);
        }
        if s.xs.is_empty() || s.ts.is_empty() {
            self.push(format!("{at}.xs"), "need at least one x and one t");
        }
    }

    fn holder(&mut self, at: &str, s: &HolderStudy) {
        self.divisor(format!("{at}.n"), s.n);
        self.finite(&format!("{at}.x"), s.x);
        for (i, &h) in s.offsets.iter().enumerate() {
            if !(h > 0.0) || !h.is_finite() {
                self.push(format!("{at}.offsets[{i}]"), "offsets must be finite and > 0");
            }
        }
        self.node(format!("{at}.t"), s.t);
        for (i, &g) in s.gaps.iter().enumerate() {
            if !(g > 0.0) {
                self.push(format!("{at}.gaps[{i}]"), "gaps must be > 0");
            } else {
                self.node(format!("{at}.gaps[{i}]"), s.t + g);
            }
        }
        if s.offsets.len() < 2 || s.gaps.len() < 2 {
            self.push(format!("{at}.offsets"), "need at least two offsets and two gaps");
        }
        if !(s.max_variation > 0.0) {
            self.push(format!("{at}.max_variation"), "must be > 0");
        }
    }
}

/// Every problem found in `cfg`; empty iff the experiment can run.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut c = Checker { cfg, diags: Vec::new() };
    if !(cfg.horizon > 0.0) || !cfg.horizon.is_finite() {
        c.push("horizon", "must be finite and > 0");
    }
    c.p("p", cfg.p);
    if cfg.paths < BATCHES {
        c.push("paths", format!("need at least {BATCHES} paths (one per batch), got {}", cfg.paths));
    }
    if !(1..=30).contains(&cfg.fine_level) {
        c.push("fine_level", format!("must lie in [1, 30], got {}", cfg.fine_level));
        return c.diags;
    }
    if let Err(e) = cfg.levy.validate() {
        c.push("levy", e.to_string());
    }
    let coeffs = match cfg.model.build() {
        Ok(coeffs) => Some(coeffs),
        Err(d) => {
            c.diags.extend(d);
            None
        }
    };
    if cfg.studies.is_empty() {
        c.push("study", "no studies to run");
    }
    let mut ids = HashSet::new();
    for (i, study) in cfg.studies.iter().enumerate() {
        let at = format!("study[{i}]");
        let id = study.id();
        if id.is_empty() || !id.chars().all(|ch| ch.is_ascii_alphanumeric() || "-_".contains(ch)) {
            c.push(format!("{at}.id"), "ids must be nonempty and use only letters, digits, '-' and '_'");
        }
        if !ids.insert(id) {
            c.push(format!("{at}.id"), format!("duplicate study id `{id}`"));
        }
        match study {
            StudyConfig::RateStudy(s) => c.rate(&at, s, coeffs.as_ref()),
            StudyConfig::CheckConditions(s) => c.conditions(&at, s),
            StudyConfig::MomentCheck(s) => c.moments(&at, s),
            StudyConfig::HolderStudy(s) => c.holder(&at, s),
        }
    }
    c.diags
}
