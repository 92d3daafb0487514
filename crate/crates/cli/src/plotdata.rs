//! Two-column `(ln n, ln error)` files for plotting rate studies.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use levy_em::strong::Functional;

use crate::error::CliError;
use crate::run::{fmt_f64, read_manifest};

struct Series {
    id: String,
    exponent: f64,
    /// Unflagged `(n, estimate)` points.
    points: Vec<(usize, f64)>,
}

fn read_series(dir: &Path, id: &str, exponent: f64, files: &[String]) -> Result<Series, CliError> {
    let csv = files
        .iter()
        .find(|f| f.ends_with(".csv"))
        .ok_or_else(|| CliError::Other(format!("study `{id}` lists no CSV output")))?;
    let path = dir.join(csv);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let bad = |line: usize| CliError::Other(format!("{}:{line}: malformed rate-study row", path.display()));
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            return Err(bad(i + 1));
        }
        let n: usize = cols[2].parse().map_err(|_| bad(i + 1))?;
        let est: f64 = cols[8].parse().map_err(|_| bad(i + 1))?;
        let flagged: bool = cols[10].parse().map_err(|_| bad(i + 1))?;
        if !flagged && est > 0.0 {
            points.push((n, est));
        }
    }
    Ok(Series {
        id: id.to_owned(),
        exponent,
        points,
    })
}

/// Writes `plot_<functional>.dat` and `guide_<functional>.dat` for every
/// functional with a rate study in the manifest; returns the written paths.
///
/// Several studies of one functional become separate blocks of the same
/// file, separated by two blank lines. Guide lines have slope `-exponent`
/// and pass through the first point of their study.
pub fn emit_plotdata(manifest_path: &Path, out_dir: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let manifest = read_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let out = out_dir.unwrap_or(dir);
    let mut groups: BTreeMap<&'static str, Vec<Series>> = BTreeMap::new();
    for rec in &manifest.studies {
        let (Some(functional), Some(exponent)) = (rec.functional, rec.exponent) else {
            continue;
        };
        let series = read_series(dir, &rec.id, exponent, &rec.files)?;
        groups.entry(Functional::name(&functional)).or_default().push(series);
    }
    if groups.is_empty() {
        return Err(CliError::Other(format!(
            "{} contains no completed rate studies",
            manifest_path.display()
        )));
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut written = Vec::new();
    for (name, series) in groups {
        let mut plot = String::new();
        let mut guide = String::new();
        for (i, s) in series.iter().enumerate() {
            if i > 0 {
                plot.push_str("\n\n");
                guide.push_str("\n\n");
            }
            writeln!(plot, "# {} ln(n) ln(error)", s.id).expect("string write");
            for (n, e) in &s.points {
                writeln!(plot, "{} {}", fmt_f64((*n as f64).ln()), fmt_f64(e.ln())).expect("string write");
            }
            writeln!(guide, "# {} slope {}", s.id, fmt_f64(-s.exponent)).expect("string write");
            if let (Some(first), Some(last)) = (s.points.first(), s.points.last()) {
                let (x0, y0) = ((first.0 as f64).ln(), first.1.ln());
                for n in [first.0, last.0] {
                    let x = (n as f64).ln();
                    writeln!(guide, "{} {}", fmt_f64(x), fmt_f64(y0 - s.exponent * (x - x0))).expect("string write");
                }
            }
        }
        for (file, body) in [(format!("plot_{name}.dat"), plot), (format!("guide_{name}.dat"), guide)] {
            let path = out.join(file);
            fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}
