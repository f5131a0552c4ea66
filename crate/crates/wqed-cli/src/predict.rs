//! `wqed predict`: evaluate the forward model for the configured system
//! with selected measurement imperfections switched on or off, so the
//! contribution of each can be isolated.

use std::fmt::Write as _;
use std::path::Path;

use wqed_core::analytic;
use wqed_core::core::{
    linear_from_angular, Background, DriveSpec, NoiseModel, PortPair,
};
use wqed_core::imperfect::{self, ChainOrder};

use crate::config::Loaded;
use crate::dataio::{self, KERNEL_HEADER, SECTOR_HEADER, TRACE_HEADER};
use crate::error::{numerical, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Toggles {
    /// Spectral diffusion (σ_short on scans, σ_long on correlations).
    pub sd: bool,
    /// Detector response of width σ_IRF.
    pub irf: bool,
    /// Uncorrelated laser background admixture.
    pub background: bool,
}

pub fn parse_toggles(text: &str) -> Result<Toggles, CliError> {
    match text.trim() {
        "all" => {
            return Ok(Toggles {
                sd: true,
                irf: true,
                background: true,
            })
        }
        "" | "none" => return Ok(Toggles::default()),
        _ => {}
    }
    let mut toggles = Toggles::default();
    for item in text.split(',') {
        match item.trim() {
            "sd" => toggles.sd = true,
            "irf" => toggles.irf = true,
            "background" => toggles.background = true,
            other => {
                return Err(CliError::Config(format!(
                    "unknown toggle {other:?}; expected a comma list of sd, irf, background \
                     (or the shorthands all / none)"
                )))
            }
        }
    }
    Ok(toggles)
}

/// The configured noise model with switched-off channels zeroed.
fn masked_noise(noise: &NoiseModel, toggles: Toggles) -> NoiseModel {
    NoiseModel {
        sigma_short: if toggles.sd { noise.sigma_short } else { 0.0 },
        sigma_long: if toggles.sd { noise.sigma_long } else { 0.0 },
        sigma_irf: if toggles.irf { noise.sigma_irf } else { 0.0 },
        background: if toggles.background {
            noise.background
        } else {
            Background::default()
        },
    }
}

fn toggle_list(toggles: Toggles) -> String {
    let mut on = Vec::new();
    if toggles.sd {
        on.push("sd");
    }
    if toggles.irf {
        on.push("irf");
    }
    if toggles.background {
        on.push("background");
    }
    if on.is_empty() {
        "none".into()
    } else {
        on.join(",")
    }
}

pub fn run(loaded: &Loaded, toggles: Toggles, out: &Path) -> Result<(), CliError> {
    let noise = masked_noise(&loaded.noise, toggles);
    let omega = loaded.trace_detunings[0];
    let rabi = (loaded.eta * loaded.trace_power_uw).sqrt();
    let drive = DriveSpec::new(omega, rabi.into());
    let n = drive.saturation(loaded.params.gamma_tot);
    println!(
        "predicting with toggles [{}] at {} µW (n = {:.4}), drive detuning {:.4} GHz",
        toggle_list(toggles),
        loaded.trace_power_uw,
        n,
        linear_from_angular(omega)
    );

    for pair in [PortPair::Tt, PortPair::Rr, PortPair::Tr] {
        let trace = imperfect::measured_g2_trace(
            &loaded.params,
            &drive,
            pair,
            &noise,
            loaded.quadrature_nodes,
            &loaded.tau_grid,
            ChainOrder::default(),
        )
        .map_err(numerical)?;
        let mut text = String::new();
        writeln!(text, "# toggles = {}", toggle_list(toggles)).unwrap();
        writeln!(text, "# power_uW = {}", loaded.trace_power_uw).unwrap();
        writeln!(text, "# drive_detuning_GHz = {}", linear_from_angular(omega)).unwrap();
        writeln!(text, "{TRACE_HEADER}").unwrap();
        let name = match pair {
            PortPair::Tt => "tt",
            PortPair::Rr => "rr",
            PortPair::Tr => "tr",
            PortPair::Rt => "rt",
        };
        for (i, v) in trace.values.iter().enumerate() {
            writeln!(text, "{name}, {}, {v}, ", trace.tau.value(i)).unwrap();
        }
        dataio::write_file(&out.join(format!("g2_model_{name}.csv")), &text)?;
        println!("  g2_{name}(0) = {}", trace.values[0]);
    }

    let taus: Vec<f64> = loaded.tau_grid.to_vec();
    let kernel = analytic::kernel_trace(&loaded.params, omega, &taus);
    let mut text = String::new();
    writeln!(text, "{KERNEL_HEADER}").unwrap();
    for (tau, v) in taus.iter().zip(&kernel) {
        writeln!(text, "{tau}, {}, {}", v.re, v.im).unwrap();
    }
    dataio::write_file(&out.join("kernel.csv"), &text)?;

    let tbar = imperfect::predicted_tbar(
        &loaded.params,
        &noise,
        omega,
        &loaded.tau_grid,
        loaded.quadrature_nodes,
    )
    .map_err(numerical)?;
    let mut text = String::new();
    writeln!(text, "# toggles = {}", toggle_list(toggles)).unwrap();
    writeln!(text, "{KERNEL_HEADER}").unwrap();
    for (tau, v) in taus.iter().zip(&tbar) {
        writeln!(text, "{tau}, {}, {}", v.re, v.im).unwrap();
    }
    dataio::write_file(&out.join("kernel_averaged.csv"), &text)?;

    let sector = analytic::two_photon_sector(&loaded.params, omega, &loaded.delta_grid);
    let mut text = String::new();
    writeln!(text, "{SECTOR_HEADER}").unwrap();
    for (i, v) in sector.values.iter().enumerate() {
        writeln!(
            text,
            "{}, {}, {}",
            linear_from_angular(loaded.delta_grid.value(i)),
            v.re,
            v.im
        )
        .unwrap();
    }
    dataio::write_file(&out.join("sector.csv"), &text)?;
    println!("wrote g2_model_*.csv, kernel.csv, kernel_averaged.csv and sector.csv");
    Ok(())
}
