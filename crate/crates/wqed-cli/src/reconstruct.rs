//! `wqed reconstruct`: invert measured spectra and correlation histograms
//! into the scattering coefficients and the two-photon interaction kernel,
//! without assuming the forward model produced them.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use wqed_core::core::{
    linear_from_angular, make_grid, ComplexSpectrum, G2Record, Grid, MeasurementSet, PortPair,
    ScatterGeometry,
};
use wqed_core::reconstruct::{
    complete_t, invert_to_sector, reconstruct_single, reconstruct_t_real, ReconstructionVariant,
};

use crate::dataio::{self, KERNEL_HEADER, SECTOR_HEADER};
use crate::error::{numerical, CliError};

/// β and ξ needed to invert a transmission spectrum. Accepted in either
/// file shape: a `fit` output (`[params.<label>] estimate = …`) or a
/// configuration (`[emitter] beta = …`).
#[derive(Debug)]
struct InversionParams {
    beta: f64,
    xi: f64,
}

fn cfg(message: String) -> CliError {
    CliError::Config(message)
}

fn read_params(path: &Path) -> Result<InversionParams, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| cfg(format!("{}: {e}", path.display())))?;
    let value: toml::Value = text
        .parse()
        .map_err(|e| cfg(format!("{}: {e}", path.display())))?;
    let scalar = |v: &toml::Value| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
    let (beta, xi) = if let Some(params) = value.get("params") {
        let get = |label: &str| {
            params
                .get(label)
                .and_then(|p| p.get("estimate"))
                .and_then(scalar)
                .ok_or_else(|| {
                    cfg(format!(
                        "{}: missing params.{label}.estimate",
                        path.display()
                    ))
                })
        };
        (get("beta")?, get("xi")?)
    } else if let Some(emitter) = value.get("emitter") {
        let beta = emitter.get("beta").and_then(scalar).ok_or_else(|| {
            cfg(format!("{}: missing emitter.beta", path.display()))
        })?;
        let xi = emitter.get("xi").and_then(scalar).unwrap_or(0.0);
        (beta, xi)
    } else {
        return Err(cfg(format!(
            "{}: expected a fit result ([params.*] tables) or a configuration ([emitter] section)",
            path.display()
        )));
    };
    if !(0.0..=1.0).contains(&beta) || !beta.is_finite() {
        return Err(cfg(format!("beta must lie in [0, 1], got {beta}")));
    }
    if !xi.is_finite() {
        return Err(cfg(format!("xi must be finite, got {xi}")));
    }
    Ok(InversionParams { beta, xi })
}

/// Complex linear interpolation of a spectrum at one frequency.
fn interpolate(spectrum: &ComplexSpectrum, omega: f64) -> Result<Complex64, CliError> {
    let grid = &spectrum.grid;
    if omega < grid.lo() - 1e-9 || omega > grid.hi() + 1e-9 {
        return Err(CliError::Data(format!(
            "trace drive frequency {:.4} GHz lies outside the scanned range [{:.4}, {:.4}] GHz",
            linear_from_angular(omega),
            linear_from_angular(grid.lo()),
            linear_from_angular(grid.hi())
        )));
    }
    let pos = ((omega - grid.lo()) / grid.step()).clamp(0.0, (grid.len() - 1) as f64);
    let i = (pos.floor() as usize).min(grid.len() - 2);
    let frac = pos - i as f64;
    Ok(spectrum.values[i] * (1.0 - frac) + spectrum.values[i + 1] * frac)
}

/// The three same-port-and-drive traces a kernel row needs.
struct Triple<'a> {
    omega: f64,
    tt: &'a G2Record,
    rr: &'a G2Record,
    tr: &'a G2Record,
}

fn group_triples(set: &MeasurementSet) -> Vec<Triple<'_>> {
    let mut triples: Vec<Triple> = Vec::new();
    let mut keys: Vec<f64> = set.g2_traces.iter().map(|r| r.drive_detuning).collect();
    keys.sort_by(|a, b| a.total_cmp(b));
    keys.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * a.abs().max(1.0));
    for key in keys {
        let find = |pair: PortPair| {
            set.g2_traces.iter().find(|r| {
                r.trace.pair == pair
                    && (r.drive_detuning - key).abs() <= 1e-9 * key.abs().max(1.0)
            })
        };
        if let (Some(tt), Some(rr), Some(tr)) =
            (find(PortPair::Tt), find(PortPair::Rr), find(PortPair::Tr))
        {
            triples.push(Triple {
                omega: key,
                tt,
                rr,
                tr,
            });
        }
    }
    triples
}

fn kernel_row(
    triple: &Triple<'_>,
    t: Complex64,
    r: Complex64,
) -> Result<Vec<f64>, CliError> {
    reconstruct_t_real(
        &triple.tt.trace,
        &triple.rr.trace,
        &triple.tr.trace,
        t,
        r,
        ReconstructionVariant::ExcessWeighted,
    )
    .map_err(|e| CliError::Data(format!("traces at {:.4} GHz: {e}", linear_from_angular(triple.omega))))
}

fn render_kernel(tau: &Grid, re: &[f64], im: Option<&[f64]>) -> String {
    let mut out = String::new();
    writeln!(out, "{KERNEL_HEADER}").unwrap();
    for (i, re_v) in re.iter().enumerate() {
        let im_cell = im.map(|im| format!("{}", im[i])).unwrap_or_default();
        writeln!(out, "{}, {re_v}, {im_cell}", tau.value(i)).unwrap();
    }
    out
}

fn render_sector(delta: &Grid, values: &[Complex64]) -> String {
    let mut out = String::new();
    writeln!(out, "{SECTOR_HEADER}").unwrap();
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{}, {}, {}", linear_from_angular(delta.value(i)), v.re, v.im).unwrap();
    }
    out
}

/// Checks that triple drive frequencies form a uniform grid; the dispersion
/// completion along ω needs even spacing.
fn uniform_omega_grid(omegas: &[f64]) -> Option<Grid> {
    let grid = make_grid(omegas[0], omegas[omegas.len() - 1], omegas.len()).ok()?;
    let scale = omegas.iter().fold(grid.step(), |m, w| m.max(w.abs()));
    for (i, &w) in omegas.iter().enumerate() {
        if (w - grid.value(i)).abs() > 1e-9 * scale {
            return None;
        }
    }
    Some(grid)
}

pub fn run(data_dir: &Path, params_path: &Path, out: &Path) -> Result<(), CliError> {
    let inv = read_params(params_path)?;
    let set = dataio::read_measurement_set(data_dir)?;

    let scan = set
        .intensity_scans
        .iter()
        .min_by(|a, b| a.power_uw.total_cmp(&b.power_uw))
        .ok_or_else(|| CliError::Data("no intensity scans in the data directory".into()))?;
    let geometry = ScatterGeometry::from_xi(inv.xi);
    let single = reconstruct_single(&scan.grid, &scan.values, inv.beta, &geometry)
        .map_err(numerical)?;
    dataio::write_file(
        &out.join("transmission.csv"),
        &dataio::render_spectrum(&single.t.grid, &single.t.values),
    )?;
    dataio::write_file(
        &out.join("reflection.csv"),
        &dataio::render_spectrum(&single.r.grid, &single.r.values),
    )?;
    println!(
        "inverted the {} µW scan; wrote transmission.csv and reflection.csv",
        scan.power_uw
    );

    if set.g2_traces.is_empty() {
        println!("no correlation traces found; kernel and sector skipped");
        return Ok(());
    }
    let triples = group_triples(&set);
    if triples.is_empty() {
        return Err(CliError::Data(
            "kernel recovery needs tt, rr and tr traces at a shared drive frequency".into(),
        ));
    }

    // Re 𝒯(ω, τ) rows, one per drive frequency.
    let mut rows = Vec::with_capacity(triples.len());
    for triple in &triples {
        let t = interpolate(&single.t, triple.omega)?;
        let r = interpolate(&single.r, triple.omega)?;
        rows.push(kernel_row(triple, t, r)?);
    }
    let tau = triples[0].tt.trace.tau.clone();

    if triples.len() == 1 {
        dataio::write_file(&out.join("kernel.csv"), &render_kernel(&tau, &rows[0], None))?;
        println!(
            "wrote kernel.csv (real part at {:.4} GHz)",
            linear_from_angular(triples[0].omega)
        );
        println!("sector skipped: single drive frequency (the dispersion completion needs a drive scan)");
        return Ok(());
    }

    let omegas: Vec<f64> = triples.iter().map(|t| t.omega).collect();
    let Some(omega_grid) = uniform_omega_grid(&omegas) else {
        let central = omegas
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        dataio::write_file(
            &out.join("kernel.csv"),
            &render_kernel(&tau, &rows[central], None),
        )?;
        println!(
            "wrote kernel.csv (real part at {:.4} GHz)",
            linear_from_angular(omegas[central])
        );
        println!("sector skipped: drive frequencies are not uniformly spaced");
        return Ok(());
    };

    for row in &rows[1..] {
        if row.len() != rows[0].len() {
            return Err(CliError::Data(
                "correlation traces must share one delay grid across drive frequencies".into(),
            ));
        }
    }
    let mut re_rows = ndarray::Array2::zeros((tau.len(), omega_grid.len()));
    for (j, row) in rows.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            re_rows[(k, j)] = *v;
        }
    }
    let field = complete_t(&omega_grid, &tau.to_vec(), &re_rows).map_err(numerical)?;

    let central = omega_grid.len() / 2;
    let omega_c = omega_grid.value(central);
    let column: Vec<Complex64> = (0..tau.len()).map(|k| field.values[(k, central)]).collect();
    let (re, im): (Vec<f64>, Vec<f64>) = column.iter().map(|v| (v.re, v.im)).unzip();
    dataio::write_file(
        &out.join("kernel.csv"),
        &render_kernel(&tau, &re, Some(&im)),
    )?;
    println!(
        "wrote kernel.csv (complex kernel at {:.4} GHz)",
        linear_from_angular(omega_c)
    );

    let dspan = 2.0 * set.gamma_tot;
    let delta = make_grid(-dspan, dspan, 81).map_err(numerical)?;
    let sector = invert_to_sector(omega_c, &tau, &column, &delta).map_err(numerical)?;
    dataio::write_file(&out.join("sector.csv"), &render_sector(&delta, &sector.values))?;
    println!("wrote sector.csv over ±{:.4} GHz", linear_from_angular(dspan));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn reads_fit_result_shape() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(
            f,
            "status = \"converged\"\n\n[params.beta]\nestimate = 0.87\n\n[params.xi]\nestimate = -0.26\n"
        )
        .unwrap();
        let p = read_params(f.path()).unwrap();
        assert_eq!(p.beta, 0.87);
        assert_eq!(p.xi, -0.26);
    }

    #[test]
    fn reads_config_shape_with_default_xi() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "[emitter]\nbeta = 0.9\ngamma_tot_per_ns = 7.65\n").unwrap();
        let p = read_params(f.path()).unwrap();
        assert_eq!(p.beta, 0.9);
        assert_eq!(p.xi, 0.0);
    }

    #[test]
    fn rejects_out_of_range_beta() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "[emitter]\nbeta = 1.2\n").unwrap();
        let err = read_params(f.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn interpolation_is_exact_on_nodes_and_linear_between() {
        let grid = make_grid(0.0, 2.0, 3).unwrap();
        let values = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(3.0, 1.0),
            Complex64::new(5.0, 4.0),
        ];
        let s = ComplexSpectrum::new(grid, values).unwrap();
        assert_eq!(interpolate(&s, 1.0).unwrap(), Complex64::new(3.0, 1.0));
        let mid = interpolate(&s, 1.5).unwrap();
        assert!((mid - Complex64::new(4.0, 2.5)).norm() < 1e-12);
        assert!(interpolate(&s, 2.5).is_err());
    }
}
