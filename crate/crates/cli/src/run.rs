//! Executes the studies of a validated config and writes their outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use levy_em::model::{certify, CertificationPlan, CoefficientSet};
use levy_em::scheme::GridFunction;
use levy_em::strong::{
    corollary_study, fit_rate_estimates, gridless_window_study, mixed_xy_study, moment_audit_grids,
    spatial_difference_study, strong_error_study, temporal_increment_study, temporal_spatial_study, Estimate,
    Functional, HolderStudyConfig, LpEstimate, MixedStarts, RateFit, Simulation, SpaceTime, Target,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{CheckConditions, ExperimentConfig, HolderStudy, MomentCheck, RateStudy, StudyConfig};
use crate::error::CliError;
use crate::validate::validate;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to trace and reproduce the files of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub master_seed: u64,
    pub version: String,
    pub wall_time_secs: f64,
    pub threads: usize,
    pub paths: usize,
    pub fine_level: u32,
    pub studies: Vec<StudyRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub id: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<Functional>,
    /// Proven decay exponent of a rate study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    /// Output files, relative to the manifest's directory.
    pub files: Vec<String>,
    /// Every estimate of the study uses paths `[start, end)` of the master seed.
    pub path_range: [u64; 2],
    pub passed: bool,
}

/// Command-line overrides of the config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
    /// Human-readable summary, one line per entry.
    pub report: Vec<String>,
    /// Studies whose acceptance thresholds were missed.
    pub failures: Vec<String>,
}

/// Full-precision decimal (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// The closed-form target when the model has one, else the fine reference.
pub fn resolve_target(study: &RateStudy, coeffs: &CoefficientSet) -> Target {
    if let Some(t) = study.target {
        return t;
    }
    match study.functional {
        Functional::TemporalSpatial | Functional::GridlessWindow => Target::Reference,
        _ => [Target::ExactLinear, Target::ExactOu]
            .into_iter()
            .find(|t| t.check(coeffs).is_ok())
            .unwrap_or(Target::Reference),
    }
}

/// Runs every study of `cfg`. `source` is the config text that gets hashed.
pub fn run(cfg: &ExperimentConfig, source: &str, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out_dir {
        cfg.out_dir = out.clone();
    }
    let diags = validate(&cfg);
    if !diags.is_empty() {
        return Err(CliError::Invalid(diags));
    }
    match opts.threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Other(format!("cannot start {k} worker threads: {e}")))?;
            pool.install(|| execute(&cfg, source))
        }
        None => execute(&cfg, source),
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    sim: Simulation,
    out: &'a Path,
    report: Vec<String>,
}

impl Context<'_> {
    fn write(&self, name: &str, contents: &str) -> Result<String, CliError> {
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(name.to_owned())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<String, CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }
}

fn execute(cfg: &ExperimentConfig, source: &str) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let out = cfg.out_dir.clone();
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let coeffs = cfg.model.build().map_err(CliError::Invalid)?;
    let sim = Simulation::new(coeffs, cfg.levy.clone(), cfg.horizon, cfg.fine_level, cfg.paths, cfg.seed)?;
    let mut ctx = Context {
        cfg,
        sim,
        out: &out,
        report: Vec::new(),
    };
    let mut records = Vec::with_capacity(cfg.studies.len());
    let mut failures = Vec::new();
    for study in &cfg.studies {
        let record = match study {
            StudyConfig::RateStudy(s) => rate_study(&mut ctx, s)?,
            StudyConfig::CheckConditions(s) => check_conditions(&mut ctx, s)?,
            StudyConfig::MomentCheck(s) => moment_check(&mut ctx, s)?,
            StudyConfig::HolderStudy(s) => holder_study(&mut ctx, s)?,
        };
        if !record.passed {
            failures.push(format!("{} ({})", record.id, record.kind));
        }
        records.push(record);
    }
    let manifest = RunManifest {
        config_sha256: sha256_hex(source.as_bytes()),
        master_seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_owned(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        paths: cfg.paths,
        fine_level: cfg.fine_level,
        studies: records,
    };
    ctx.write_json(MANIFEST_FILE, &manifest)?;
    Ok(RunOutcome {
        manifest,
        out_dir: out.clone(),
        report: ctx.report,
        failures,
    })
}

fn record(ctx: &Context, id: &str, kind: &str, files: Vec<String>, passed: bool) -> StudyRecord {
    StudyRecord {
        id: id.to_owned(),
        kind: kind.to_owned(),
        functional: None,
        exponent: None,
        files,
        path_range: [0, ctx.cfg.paths as u64],
        passed,
    }
}

/// One `(n, estimate, se, flagged)` row per step count.
fn rows<E: Estimate>(points: &[(usize, E)], se: impl Fn(&E) -> f64) -> Vec<(usize, f64, f64, bool)> {
    points.iter().map(|(n, e)| (*n, e.value(), se(e), e.flagged())).collect()
}

#[derive(Serialize)]
struct FitReport<'a> {
    study_id: &'a str,
    functional: Functional,
    target: Target,
    p: f64,
    exponent: f64,
    guide_slope: f64,
    fit: Option<RateFit>,
    error: Option<String>,
    passed: bool,
}

fn rate_study(ctx: &mut Context, s: &RateStudy) -> Result<StudyRecord, CliError> {
    let sim = &ctx.sim;
    let p = s.p.unwrap_or(ctx.cfg.p);
    let target = resolve_target(s, &sim.coeffs);
    let holder = HolderStudyConfig {
        p,
        m: s.m,
        kappa1: s.kappa1,
        time_fractions: s.time_fractions.clone(),
        ns: s.ns.clone(),
        x_values: vec![s.x],
        offsets: vec![s.x_tilde() - s.x],
    };
    let lp_se = |e: &LpEstimate| e.se;
    let (points, fit) = match s.functional {
        Functional::Pointwise => {
            let study = strong_error_study(sim, &s.ns, s.x, p, target)?;
            (rows(&study, lp_se), fit_rate_estimates(&study))
        }
        Functional::MixedXy => {
            let study = mixed_xy_study(sim, &s.ns, MixedStarts::diagonal(s.x, s.x_tilde()), p, target)?;
            (rows(&study, lp_se), fit_rate_estimates(&study))
        }
        Functional::TemporalSpatial => {
            let t = s.t.unwrap_or(sim.horizon);
            let a = SpaceTime::new(s.s, t, s.x);
            let b = SpaceTime::new(s.s_tilde.unwrap_or(s.s), s.t_tilde.unwrap_or(t), s.x_tilde());
            let study = temporal_spatial_study(sim, &s.ns, a, b, p)?;
            (rows(&study, lp_se), fit_rate_estimates(&study))
        }
        Functional::Corollary => {
            let study = corollary_study(sim, &s.ns, s.x, s.x_tilde(), &holder, target)?;
            (rows(&study, |c| c.se), fit_rate_estimates(&study))
        }
        Functional::GridlessWindow => {
            let study = gridless_window_study(sim, &s.ns, s.x, p)?;
            (rows(&study, lp_se), fit_rate_estimates(&study))
        }
    };

    let (m, k1, xt) = (
        s.uses_holder_exponents().then_some(s.m),
        s.uses_holder_exponents().then_some(s.kappa1),
        s.uses_x_tilde().then(|| s.x_tilde()),
    );
    let mut csv = String::from("study_id,functional,n,p,m,kappa1,x,x_tilde,estimate,se,flagged\n");
    for (n, est, se, flagged) in &points {
        writeln!(
            csv,
            "{},{},{n},{},{},{},{},{},{},{},{flagged}",
            s.id,
            s.functional.name(),
            fmt_f64(p),
            opt(m),
            opt(k1),
            fmt_f64(s.x),
            opt(xt),
            fmt_f64(*est),
            fmt_f64(*se),
        )
        .expect("string write");
    }
    let csv_name = ctx.write(&format!("{}.csv", s.id), &csv)?;

    let exponent = s.functional.exponent(&holder);
    let (fit, error) = match fit {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let passed = fit.as_ref().is_some_and(|f| {
        let floor = f.slope <= -(exponent - s.tolerance);
        let range = s.slope_range.is_none_or(|[lo, hi]| (lo..=hi).contains(&f.slope));
        floor && range
    });
    ctx.report.push(match &fit {
        Some(f) => format!(
            "{} {}: slope {:.4} (exponent {exponent}, target {}) {}",
            s.id,
            s.functional.name(),
            f.slope,
            target.name(),
            if passed { "PASS" } else { "FAIL" }
        ),
        None => format!("{} {}: no fit ({}) FAIL", s.id, s.functional.name(), error.as_deref().unwrap_or("")),
    });
    let report = FitReport {
        study_id: &s.id,
        functional: s.functional,
        target,
        p,
        exponent,
        guide_slope: -exponent,
        fit,
        error,
        passed,
    };
    let fit_name = ctx.write_json(&format!("{}.fit.json", s.id), &report)?;
    let mut rec = record(ctx, &s.id, "rate-study", vec![csv_name, fit_name], passed);
    rec.functional = Some(s.functional);
    rec.exponent = Some(exponent);
    Ok(rec)
}

fn check_conditions(ctx: &mut Context, s: &CheckConditions) -> Result<StudyRecord, CliError> {
    let plan = CertificationPlan {
        p: ctx.cfg.p,
        x_min: s.lo,
        x_max: s.hi,
        step: s.step,
        a4_box: s.a4_box,
        a4_samples: s.a4_samples,
        seed: ctx.cfg.seed,
    };
    let cert = certify(&ctx.sim.coeffs, &ctx.sim.levy, &plan)?;
    ctx.report.push(format!("{} conditions for {} (cbar = {}):", s.id, ctx.sim.coeffs.name, cert.cbar));
    ctx.report.push(format!("  {:<4} {:>14} {:>14}  {:<28} {}", "cond", "constant", "margin", "worst point", "result"));
    for r in &cert.reports {
        let num = |v: Option<f64>| v.map_or("-".to_owned(), |v| format!("{v:.6e}"));
        let worst = r.worst_point.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ");
        ctx.report.push(format!(
            "  {:<4} {:>14} {:>14}  {:<28} {}",
            r.condition.to_string(),
            num(r.constant),
            num(r.margin),
            format!("({worst})"),
            if r.passed { "pass" } else { "FAIL" }
        ));
    }
    #[derive(Serialize)]
    struct Out<'a> {
        study_id: &'a str,
        model: &'a CoefficientSet,
        plan: &'a CertificationPlan,
        cbar: f64,
        all_passed: bool,
        reports: &'a [levy_em::model::ConditionReport],
    }
    let passed = cert.all_passed() && cert.cbar.is_finite();
    let name = ctx.write_json(
        &format!("{}.json", s.id),
        &Out {
            study_id: &s.id,
            model: &ctx.sim.coeffs,
            plan: &plan,
            cbar: cert.cbar,
            all_passed: passed,
            reports: &cert.reports,
        },
    )?;
    Ok(record(ctx, &s.id, "check-conditions", vec![name], passed))
}

fn moment_check(ctx: &mut Context, s: &MomentCheck) -> Result<StudyRecord, CliError> {
    let sim = &ctx.sim;
    let cert = certify(&sim.coeffs, &sim.levy, &CertificationPlan {
        p: ctx.cfg.p,
        seed: ctx.cfg.seed,
        ..CertificationPlan::default()
    })?;
    let mut grids = s.ns.iter().map(|&n| sim.grid(n)).collect::<levy_em::Result<Vec<GridFunction>>>()?;
    for g in &s.grids {
        grids.push(g.build(sim.horizon)?);
    }
    let audits = moment_audit_grids(sim, &grids, &s.xs, &s.ts, &cert.lyapunov, cert.cbar)?;
    let mut csv = String::from("study_id,t,x,n,mean_v,se,bound,pass\n");
    for a in &audits {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            s.id,
            fmt_f64(a.t),
            fmt_f64(a.x),
            a.n,
            fmt_f64(a.mean_v),
            fmt_f64(a.se),
            fmt_f64(a.bound),
            a.pass
        )
        .expect("string write");
    }
    let passed = audits.iter().all(|a| a.pass);
    let worst = audits
        .iter()
        .map(|a| a.mean_v / a.bound)
        .fold(0.0, f64::max);
    ctx.report.push(format!(
        "{} moment audit: {} checks, cbar {}, max E V / bound {worst:.3e} {}",
        s.id,
        audits.len(),
        cert.cbar,
        if passed { "PASS" } else { "FAIL" }
    ));
    let name = ctx.write(&format!("{}.csv", s.id), &csv)?;
    Ok(record(ctx, &s.id, "moment-check", vec![name], passed))
}

/// `(max - min) / min` of positive ratios.
pub fn variation(ratios: &[f64]) -> f64 {
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 {
        (hi - lo) / lo
    } else {
        f64::INFINITY
    }
}

fn holder_study(ctx: &mut Context, s: &HolderStudy) -> Result<StudyRecord, CliError> {
    let sim = &ctx.sim;
    let p = ctx.cfg.p;
    let spatial = spatial_difference_study(sim, s.n, s.x, &s.offsets, sim.horizon, p)?;
    let temporal = temporal_increment_study(sim, s.n, s.x, s.t, &s.gaps, p)?;
    let mut csv = String::from("study_id,family,n,p,x,x_tilde,t,t_tilde,h,estimate,se,ratio,flagged\n");
    let mut passed = true;
    let families: [(&str, &[(f64, LpEstimate)]); 2] = [("spatial", &spatial), ("temporal", &temporal)];
    for (family, points) in families {
        let mut ratios = Vec::with_capacity(points.len());
        for (h, e) in points {
            let (xt, t, tt, shape) = match family {
                "spatial" => (s.x + h, sim.horizon, sim.horizon, *h),
                _ => (s.x, s.t, s.t + h, h.powf(1.0 / p)),
            };
            let ratio = e.estimate / shape;
            ratios.push(ratio);
            writeln!(
                csv,
                "{},{family},{},{},{},{},{},{},{},{},{},{},{}",
                s.id,
                s.n,
                fmt_f64(p),
                fmt_f64(s.x),
                fmt_f64(xt),
                fmt_f64(t),
                fmt_f64(tt),
                fmt_f64(*h),
                fmt_f64(e.estimate),
                fmt_f64(e.se),
                fmt_f64(ratio),
                e.flagged()
            )
            .expect("string write");
        }
        let v = variation(&ratios);
        let ok = v < s.max_variation;
        passed &= ok;
        ctx.report.push(format!(
            "{} {family}: ratio variation {v:.4} (limit {}) {}",
            s.id,
            s.max_variation,
            if ok { "PASS" } else { "FAIL" }
        ));
    }
    let name = ctx.write(&format!("{}.csv", s.id), &csv)?;
    Ok(record(ctx, &s.id, "holder-study", vec![name], passed))
}

/// Loads a manifest written by [`run`].
pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}
