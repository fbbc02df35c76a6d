//! Result persistence: run summary, histograms and plot-ready series.
//!
//! Every file starts with `# config_hash = <hash>` so outputs can always
//! be traced to the exact configuration that produced them. The summary
//! is the same flat `key = value` format the config parser reads;
//! histograms use the documented `nu_center weight stderr` columns;
//! series files are two whitespace-separated columns. The only volatile
//! field anywhere is `wall_seconds` in the summary.

use super::runner::{ExperimentError, KindOutcome, RunRecord};
use crate::measure::format_histogram;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ExperimentError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn series(hash: &str, x_label: &str, y_label: &str, rows: &[(f64, f64)]) -> String {
    let mut out = format!("# config_hash = {hash}\n# {x_label} {y_label}\n");
    for (x, y) in rows {
        let _ = writeln!(out, "{x} {y}");
    }
    out
}

/// Writes the run summary plus every kind-specific data file; returns the
/// paths written. An empty record (no realizations) is an error — silent
/// empty files would poison downstream averaging.
pub fn export_results(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let is_empty = match &record.outcome {
        KindOutcome::Passivity { draws, .. } => draws.is_empty(),
        KindOutcome::Scaling(s) => s.fits.is_empty(),
        KindOutcome::GreenKubo { per_realization } => per_realization.is_empty(),
        KindOutcome::Measure(m) => m.mu_histogram.masses.is_empty(),
        KindOutcome::Drude { measure, .. } => measure.mu_histogram.masses.is_empty(),
    };
    if is_empty {
        return Err(ExperimentError::EmptyRecord);
    }

    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let hash = &record.config_hash;
    let mut written = Vec::new();

    // run summary in the flat key-value format
    let mut summary = String::new();
    let _ = writeln!(summary, "# config_hash = {hash}");
    let _ = writeln!(summary, "# code_version = {}", record.code_version);
    let _ = writeln!(summary, "kind = {}", record.config.kind.id());
    let _ = writeln!(summary, "config_hash = {hash}");
    let _ = writeln!(summary, "n_realizations = {}", record.config.n_realizations);
    for (key, value) in &record.metadata {
        let _ = writeln!(summary, "{key} = {value}");
    }
    for (name, mean, stderr) in &record.aggregates {
        let _ = writeln!(summary, "{name} = {mean}");
        if *stderr > 0.0 {
            let _ = writeln!(summary, "{name}_stderr = {stderr}");
        }
    }
    for (i, w) in record.warnings.iter().enumerate() {
        let _ = writeln!(summary, "warning_{i} = {w}");
    }
    let _ = writeln!(summary, "wall_seconds = {}", record.wall_seconds);
    written.push(write_file(dir, "summary.txt", &summary)?);

    match &record.outcome {
        KindOutcome::Passivity { draws, .. } => {
            let rows: Vec<(f64, f64)> = draws
                .iter()
                .enumerate()
                .map(|(i, d)| (i as f64, d.result.work))
                .collect();
            written.push(write_file(
                dir,
                "work_per_process.tsv",
                &series(hash, "process_index", "work", &rows),
            )?);
            let rows: Vec<(f64, f64)> = draws
                .iter()
                .map(|d| (d.omega, d.result.work / d.eta.powi(2)))
                .collect();
            written.push(write_file(
                dir,
                "work_vs_omega.tsv",
                &series(hash, "omega", "work_over_eta_squared", &rows),
            )?);
        }
        KindOutcome::Scaling(s) => {
            for (i, fit) in s.fits.iter().enumerate() {
                let rows: Vec<(f64, f64)> = fit
                    .points
                    .iter()
                    .filter(|p| p.remainder > 0.0)
                    .map(|p| (p.eta.log10(), p.remainder.log10()))
                    .collect();
                let name = if s.fits.len() == 1 {
                    "scaling_remainder.tsv".to_string()
                } else {
                    format!("scaling_remainder_{i}.tsv")
                };
                written.push(write_file(
                    dir,
                    &name,
                    &series(hash, "log10_eta", "log10_remainder", &rows),
                )?);
                let rows: Vec<(f64, f64)> = fit
                    .points
                    .iter()
                    .map(|p| (p.eta, p.work_per_volume))
                    .collect();
                let name = if s.fits.len() == 1 {
                    "work_per_volume.tsv".to_string()
                } else {
                    format!("work_per_volume_{i}.tsv")
                };
                written.push(write_file(
                    dir,
                    &name,
                    &series(hash, "eta", "work_per_volume", &rows),
                )?);
            }
        }
        KindOutcome::GreenKubo { per_realization } => {
            let rows: Vec<(f64, f64)> = per_realization
                .iter()
                .enumerate()
                .map(|(i, g)| (i as f64, g.rel_time_vs_measure))
                .collect();
            written.push(write_file(
                dir,
                "joule_relative_error.tsv",
                &series(hash, "realization", "rel_time_vs_measure", &rows),
            )?);
        }
        KindOutcome::Measure(m) => {
            let header = vec![format!("config_hash = {hash}")];
            written.push(write_file(
                dir,
                "mu_tilde_histogram.txt",
                &format_histogram(&m.mu_tilde_histogram, &header),
            )?);
            written.push(write_file(
                dir,
                "mu_histogram.txt",
                &format_histogram(&m.mu_histogram, &header),
            )?);
        }
        KindOutcome::Drude { measure, fit } => {
            let header = vec![format!("config_hash = {hash}")];
            written.push(write_file(
                dir,
                "mu_histogram.txt",
                &format_histogram(&measure.mu_histogram, &header),
            )?);
            let rows: Vec<(f64, f64)> = measure
                .mu_histogram
                .centers
                .iter()
                .map(|&nu| {
                    (
                        nu,
                        fit.weight * fit.rate / (fit.rate * fit.rate + nu * nu)
                            * measure.mu_histogram.bin_width,
                    )
                })
                .collect();
            written.push(write_file(
                dir,
                "drude_fit.tsv",
                &series(hash, "nu", "lorentzian_mass", &rows),
            )?);
        }
    }

    Ok(written)
}

/// Parses the flat `key = value` summary format back into pairs;
/// comment lines are skipped. Inverse of the summary writer.
pub fn parse_summary(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|line| {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                return None;
            }
            let (k, v) = line.split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

/// Parses a two-column series file; comment lines are skipped.
pub fn parse_series(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(format!("line {}: expected 2 columns", idx + 1));
        }
        let x: f64 = fields[0]
            .parse()
            .map_err(|_| format!("line {}: bad number {:?}", idx + 1, fields[0]))?;
        let y: f64 = fields[1]
            .parse()
            .map_err(|_| format!("line {}: bad number {:?}", idx + 1, fields[1]))?;
        rows.push((x, y));
    }
    Ok(rows)
}
