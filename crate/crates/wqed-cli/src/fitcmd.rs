//! `wqed fit`: estimate device parameters from an ingested measurement set
//! and write the result as TOML plus a human-readable report.

use std::fmt::Write as _;
use std::path::Path;

use wqed_core::fit::{fit, FitParam, FitResult, FitStatus};

use crate::config::Loaded;
use crate::dataio;
use crate::error::{from_fit_error, CliError};

fn status_name(status: FitStatus) -> &'static str {
    match status {
        FitStatus::Converged { .. } => "converged",
        FitStatus::StepStalled { .. } => "step_stalled",
        FitStatus::MaxIterations => "max_iterations",
    }
}

fn iterations(status: FitStatus) -> Option<usize> {
    match status {
        FitStatus::Converged { iterations } | FitStatus::StepStalled { iterations } => {
            Some(iterations)
        }
        FitStatus::MaxIterations => None,
    }
}

/// Serialize a fit result as TOML: run-level facts at the top, then one
/// `[params.<label>]` table per parameter.
pub fn render_result(result: &FitResult, gamma_tot: f64) -> String {
    let mut out = String::new();
    writeln!(out, "status = \"{}\"", status_name(result.status)).unwrap();
    if let Some(iters) = iterations(result.status) {
        writeln!(out, "iterations = {iters}").unwrap();
    }
    writeln!(out, "residual_norm = {}", result.residual_norm).unwrap();
    writeln!(out, "points = {}", result.points).unwrap();
    writeln!(out, "gamma_tot_per_ns = {gamma_tot}").unwrap();
    for param in FitParam::ALL {
        let j = param.index();
        let (lo, hi) = result.intervals[j];
        writeln!(out).unwrap();
        writeln!(out, "[params.{}]", param.label()).unwrap();
        writeln!(out, "estimate = {}", result.estimates[j]).unwrap();
        writeln!(out, "ci_lo = {lo}").unwrap();
        writeln!(out, "ci_hi = {hi}").unwrap();
        writeln!(out, "free = {}", result.free[j]).unwrap();
        writeln!(out, "at_bound = {}", result.at_bounds.contains(&param)).unwrap();
    }
    out
}

pub fn render_report(result: &FitResult, gamma_tot: f64) -> String {
    let mut out = String::new();
    writeln!(out, "fit {}", status_name(result.status)).unwrap();
    writeln!(
        out,
        "residual norm {:.6e} over {} points",
        result.residual_norm, result.points
    )
    .unwrap();
    writeln!(out, "gamma_tot (fixed input) = {gamma_tot} rad/ns").unwrap();
    for param in FitParam::ALL {
        let j = param.index();
        let (lo, hi) = result.intervals[j];
        let role = if result.free[j] { "free " } else { "fixed" };
        let mut line = format!(
            "  {role}  {:<11} = {:>12.6}",
            param.label(),
            result.estimates[j]
        );
        if result.free[j] {
            write!(line, "   95% CI [{lo:.6}, {hi:.6}]").unwrap();
        }
        if result.at_bounds.contains(&param) {
            write!(line, "   (at bound; profile interval)").unwrap();
        }
        writeln!(out, "{line}").unwrap();
    }
    out
}

pub fn run(data_dir: &Path, loaded: &Loaded, out: &Path) -> Result<(), CliError> {
    let set = dataio::read_measurement_set(data_dir)?;
    let result = fit(&set, &loaded.fit).map_err(from_fit_error)?;

    let toml_text = render_result(&result, set.gamma_tot);
    dataio::write_file(&out.join("fit_result.toml"), &toml_text)?;
    let report = render_report(&result, set.gamma_tot);
    dataio::write_file(&out.join("fit_report.txt"), &report)?;
    print!("{report}");
    println!("wrote {}", out.join("fit_result.toml").display());

    if !result.status.is_converged() {
        return Err(CliError::Convergence(format!(
            "optimizer hit the iteration budget ({} iterations); partial result written to {}",
            loaded.fit.max_iterations,
            out.join("fit_result.toml").display()
        )));
    }
    Ok(())
}
