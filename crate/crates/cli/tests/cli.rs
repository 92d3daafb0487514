use std::fs;
use std::path::Path;
use std::process::Command;

use levy_em_cli::config::{ModelConfig, RateStudy, StudyConfig};
use levy_em_cli::plotdata::emit_plotdata;
use levy_em_cli::run::read_manifest;
use levy_em_cli::{run, validate, CliError, ExperimentConfig, RunOptions};
use levy_em::strong::{Functional, Target};

const SMALL: &str = r#"
paths = 200
fine_level = 9
seed = 11

[model]
preset = "linear"

[[study]]
kind = "rate-study"
id = "pw"
ns = [8, 16, 32, 64]

[[study]]
kind = "rate-study"
id = "cor"
functional = "corollary"
x_tilde = 2.0
ns = [8, 16, 32, 64]

[[study]]
kind = "moment-check"
id = "mom"
ns = [16]
grids = [{ kind = "explicit", breakpoints = [0.0, 0.25, 0.5, 1.0] }]
ts = [0.25, 1.0]

[[study]]
kind = "holder-study"
id = "hold"
n = 16
"#;

fn parse(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).unwrap()
}

fn paths_of(diags: &[levy_em_cli::Diagnostic]) -> Vec<&str> {
    diags.iter().map(|d| d.path.as_str()).collect()
}

#[test]
fn default_config_is_valid() {
    assert!(validate(&ExperimentConfig::default()).is_empty());
    assert_eq!(parse(""), ExperimentConfig::default());
}

#[test]
fn p_below_two_is_rejected() {
    let cfg = parse("p = 1.5");
    let diags = validate(&cfg);
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].path, "p");
    assert!(diags[0].message.contains("p must be ≥ 2"), "{}", diags[0]);
}

#[test]
fn non_divisor_is_named() {
    let cfg = parse(
        r#"
fine_level = 10
[[study]]
kind = "rate-study"
id = "r"
ns = [16, 24, 32]
"#,
    );
    let diags = validate(&cfg);
    assert_eq!(paths_of(&diags), ["study[0].ns[1]"]);
    assert!(diags[0].message.contains("24 does not divide"));
}

#[test]
fn unknown_keys_fail_closed() {
    let err = ExperimentConfig::from_toml_str("horizn = 2.0").unwrap_err();
    assert!(err[0].message.contains("horizn"), "{:?}", err);
    let err = ExperimentConfig::from_toml_str("[model]\npreset = \"linear\"\nsigmaa = 1").unwrap_err();
    assert_eq!(err[0].path, "model.sigmaa");
    let err = ExperimentConfig::from_toml_str("[[study]]\nkind = \"rate-study\"\nid = \"a\"\nnss = [1]").unwrap_err();
    assert!(err[0].path.starts_with("study"), "{:?}", err);
    assert!(err[0].message.contains("nss"));
    let err = ExperimentConfig::from_toml_str("[[study]]\nkind = \"sweep\"\nid = \"a\"").unwrap_err();
    assert!(err[0].message.contains("sweep"));
}

#[test]
fn model_diagnostics() {
    let unknown = parse("[model]\npreset = \"cubic\"");
    assert_eq!(paths_of(&validate(&unknown)), ["model.preset"]);
    let both = parse("[model]\npreset = \"linear\"\nmu = { kind = \"constant\", value = 1.0 }");
    assert_eq!(paths_of(&validate(&both)), ["model"]);
    let partial = parse("[model]\nmu = { kind = \"constant\", value = 1.0 }");
    assert_eq!(paths_of(&validate(&partial)), ["model.sigma", "model.gamma"]);
    let param = parse("[model]\npreset = \"ou-additive\"\nparams = { lambda = 2.0, kappa = 1.0 }");
    assert_eq!(paths_of(&validate(&param)), ["model.params.kappa"]);
}

#[test]
fn preset_parameters_reach_the_model() {
    let cfg = parse("[model]\npreset = \"linear\"\nparams = { a = 0.5, b = 0.2, g = 0.1 }");
    let coeffs = cfg.model.build().unwrap();
    assert_eq!(coeffs.linear_slopes(), Some((0.5, 0.2, 0.1)));
    let ou = ModelConfig {
        c: Some(3.0),
        ..ModelConfig::preset("ou-additive")
    };
    let coeffs = ou.build().unwrap();
    assert_eq!(coeffs.ou_parameters(), Some((1.0, 0.5)));
    assert_eq!(coeffs.c, 3.0);
}

#[test]
fn explicit_coefficients() {
    let cfg = parse(
        r#"
[model]
mu = { kind = "sine", amplitude = 0.5, frequency = 1.0 }
sigma = { kind = "constant", value = 0.3 }
gamma = { kind = "affine", slope = 0.1, intercept = 0.2 }
"#,
    );
    assert!(validate(&cfg).is_empty());
    let coeffs = cfg.model.build().unwrap();
    assert_eq!(coeffs.mu(0.0), 0.0);
    assert_eq!(coeffs.gamma(1.0), 0.1 + 0.2);
}

#[test]
fn study_level_diagnostics() {
    let cfg = parse(
        r#"
paths = 10
[[study]]
kind = "rate-study"
id = "a"
target = "exact-ou"
[[study]]
kind = "holder-study"
id = "a"
offsets = [0.5, -1.0]
gaps = [0.25, 0.6]
[[study]]
kind = "moment-check"
id = "m"
ts = [0.3]
[[study]]
kind = "rate-study"
id = "c"
functional = "corollary"
x_tilde = 1.0
"#,
    );
    let diags = validate(&cfg);
    assert_eq!(
        paths_of(&diags),
        [
            "paths",
            "study[0].target",
            "study[1].id",
            "study[1].offsets[1]",
            "study[1].gaps[1]",
            "study[2].ts[0]",
            "study[3].x_tilde"
        ]
    );
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = parse(SMALL);
    cfg.studies.push(StudyConfig::RateStudy(RateStudy {
        target: Some(Target::Reference),
        slope_range: Some([-0.7, -0.3]),
        ..RateStudy::new("extra", Functional::MixedXy)
    }));
    let text = cfg.to_toml_string();
    assert_eq!(parse(&text), cfg);
}

fn run_in(dir: &Path, text: &str, threads: usize) -> levy_em_cli::RunOutcome {
    let opts = RunOptions {
        threads: Some(threads),
        out_dir: Some(dir.to_path_buf()),
        ..RunOptions::default()
    };
    run(&parse(text), text, &opts).unwrap()
}

#[test]
fn run_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_in(dir.path(), SMALL, 2);
    let m = &outcome.manifest;
    assert_eq!(m.master_seed, 11);
    assert_eq!(m.config_sha256.len(), 64);
    assert_eq!(m.studies.len(), 4);
    assert!(m.studies.iter().all(|s| s.path_range == [0, 200]));
    for s in &m.studies {
        for f in &s.files {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
    let csv = fs::read_to_string(dir.path().join("pw.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "study_id,functional,n,p,m,kappa1,x,x_tilde,estimate,se,flagged");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("pw,pointwise,8,2.0000000000000000e0,,,1.0000000000000000e0,,"));
    let cor = fs::read_to_string(dir.path().join("cor.csv")).unwrap();
    assert!(cor.lines().nth(1).unwrap().contains(",2.0000000000000000e0,2.0000000000000000e0,1.0000000000000000e0,2.0000000000000000e0,"));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("cor.fit.json")).unwrap()).unwrap();
    assert_eq!(fit["guide_slope"], -0.25);
    assert_eq!(fit["target"], "exact-linear");
    assert_eq!(read_manifest(&dir.path().join("manifest.json")).unwrap(), outcome.manifest);
    // one uniform and one explicit grid, 3 xs, 2 ts
    let moments = fs::read_to_string(dir.path().join("mom.csv")).unwrap();
    assert_eq!(moments.lines().count(), 1 + 2 * 3 * 2);
}

#[test]
fn csv_bytes_do_not_depend_on_threads() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = run_in(a.path(), SMALL, 1);
    run_in(b.path(), SMALL, 5);
    for s in &one.manifest.studies {
        for f in s.files.iter().filter(|f| f.ends_with(".csv")) {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn seed_override_changes_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_in(a.path(), SMALL, 2);
    let opts = RunOptions {
        seed: Some(12),
        out_dir: Some(b.path().to_path_buf()),
        ..RunOptions::default()
    };
    let out = run(&parse(SMALL), SMALL, &opts).unwrap();
    assert_eq!(out.manifest.master_seed, 12);
    assert_ne!(fs::read(a.path().join("pw.csv")).unwrap(), fs::read(b.path().join("pw.csv")).unwrap());
}

#[test]
fn invalid_config_does_not_run() {
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        out_dir: Some(dir.path().join("never")),
        ..RunOptions::default()
    };
    let err = run(&parse("p = 1.0"), "p = 1.0", &opts).unwrap_err();
    assert!(matches!(err, CliError::Invalid(_)));
    assert_eq!(err.exit_code(), 2);
    assert!(!dir.path().join("never").exists());
}

#[test]
fn plotdata_per_functional() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), SMALL, 2);
    let files = emit_plotdata(&dir.path().join("manifest.json"), None).unwrap();
    let names: Vec<String> = files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["plot_corollary.dat", "guide_corollary.dat", "plot_pointwise.dat", "guide_pointwise.dat"]);
    let guide = fs::read_to_string(dir.path().join("guide_corollary.dat")).unwrap();
    let pts: Vec<(f64, f64)> = guide
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(' ').map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    let slope = (pts[1].1 - pts[0].1) / (pts[1].0 - pts[0].0);
    assert!((slope + 0.25).abs() < 1e-12);
    let plot = fs::read_to_string(dir.path().join("plot_pointwise.dat")).unwrap();
    assert_eq!(plot.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn plotdata_needs_rate_studies() {
    let dir = tempfile::tempdir().unwrap();
    let text = "paths = 64\nfine_level = 6\n[[study]]\nkind = \"check-conditions\"\nid = \"c\"\na4_samples = 100\n";
    run_in(dir.path(), text, 1);
    assert!(emit_plotdata(&dir.path().join("manifest.json"), None).is_err());
    assert!(emit_plotdata(&dir.path().join("missing.json"), None).is_err());
}

#[test]
fn plotdata_reports_missing_outputs() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), SMALL, 2);
    fs::remove_file(dir.path().join("pw.csv")).unwrap();
    assert!(emit_plotdata(&dir.path().join("manifest.json"), None).is_err());
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levy-em"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(&good, SMALL).unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "p = 1.5\n").unwrap();
    let status = |cmd: &mut Command| cmd.output().unwrap().status.code();

    assert_eq!(status(bin().args(["validate", "--config"]).arg(&good)), Some(0));
    let out = bin().args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p must be ≥ 2"));
    assert_eq!(status(bin().args(["run", "--config"]).arg(&bad)), Some(2));
    assert_eq!(status(bin().arg("presets")), Some(0));

    let out_dir = dir.path().join("out");
    assert_eq!(
        status(bin().args(["run", "--threads", "2", "--assert", "--config"]).arg(&good).arg("--out").arg(&out_dir)),
        Some(0)
    );
    let manifest = out_dir.join("manifest.json");
    assert_eq!(status(bin().args(["emit-plotdata", "--manifest"]).arg(&manifest)), Some(0));

    // an unreachable slope range trips --assert only
    let strict = dir.path().join("strict.toml");
    fs::write(&strict, SMALL.replace("ns = [8, 16, 32, 64]\n", "ns = [8, 16, 32, 64]\nslope_range = [-5.0, -4.0]\n")).unwrap();
    let strict_out = dir.path().join("strict");
    assert_eq!(
        status(bin().args(["run", "--assert", "--config"]).arg(&strict).arg("--out").arg(&strict_out)),
        Some(3)
    );
    assert_eq!(status(bin().args(["run", "--config"]).arg(&strict).arg("--out").arg(&strict_out)), Some(0));
}

#[test]
fn shipped_config_validates() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let (cfg, _) = ExperimentConfig::load(&path).unwrap();
    assert!(validate(&cfg).is_empty(), "{:?}", validate(&cfg));
    assert_eq!(cfg.studies.len(), 7);
}
