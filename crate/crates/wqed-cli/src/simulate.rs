//! `wqed simulate`: run the forward model over the configured acquisition
//! plan and write a synthetic data directory that `fit` and `reconstruct`
//! can ingest.

use std::path::Path;

use wqed_core::core::{MeasurementSet, PortPair};
use wqed_core::synth::{synthesize, ScanPlan, SynthPlan, TracePlan};

use crate::config::Loaded;
use crate::dataio;
use crate::error::{numerical, CliError};

const TRACE_PAIRS: [PortPair; 3] = [PortPair::Tt, PortPair::Rr, PortPair::Tr];

fn build_plan(loaded: &Loaded, seed: u64) -> SynthPlan {
    let scans = loaded
        .scan_powers_uw
        .iter()
        .map(|&power_uw| ScanPlan {
            power_uw,
            grid: loaded.scan_grid.clone(),
        })
        .collect();
    let mut traces = Vec::new();
    for &drive_detuning in &loaded.trace_detunings {
        for pair in TRACE_PAIRS {
            traces.push(TracePlan {
                pair,
                power_uw: loaded.trace_power_uw,
                drive_detuning,
                tau: loaded.tau_grid.clone(),
            });
        }
    }
    SynthPlan {
        scans,
        traces,
        eta: loaded.eta,
        quadrature_nodes: loaded.quadrature_nodes,
        counts_per_point: (loaded.scan_exposure > 0.0).then_some(loaded.scan_exposure),
        coincidences_per_bin: (loaded.trace_exposure > 0.0).then_some(loaded.trace_exposure),
        seed,
    }
}

/// Generate the configured acquisitions. Zero exposure means "no photons
/// collected": the count columns are present but all zero, while the model
/// columns stay noiseless.
pub fn generate(loaded: &Loaded, seed: u64) -> Result<MeasurementSet, CliError> {
    let plan = build_plan(loaded, seed);
    let mut set = synthesize(&loaded.params, &loaded.noise, &plan).map_err(numerical)?;
    if loaded.scan_exposure == 0.0 {
        for scan in &mut set.intensity_scans {
            scan.counts = Some(vec![0.0; scan.values.len()]);
        }
    }
    if loaded.trace_exposure == 0.0 {
        for record in &mut set.g2_traces {
            record.coincidences = Some(vec![0.0; record.trace.values.len()]);
        }
    }
    Ok(set)
}

pub fn run(loaded: &Loaded, seed: u64, out: &Path) -> Result<(), CliError> {
    let set = generate(loaded, seed)?;
    let written = dataio::write_measurement_set(out, &set, Some(seed))?;
    println!(
        "simulated {} scan(s) and {} correlation trace(s) with seed {seed}",
        set.intensity_scans.len(),
        set.g2_traces.len()
    );
    for path in written {
        println!("  wrote {}", path.display());
    }
    Ok(())
}
