//! Deterministic synthetic measurement sets: the forward model with the
//! full measurement chain, optionally dressed with Poisson shot noise from
//! a seeded generator.

use crate::core::{
    CoreError, DriveSpec, EmitterParams, G2Record, Grid, IntensityScan, MeasurementSet,
    NoiseModel, Port, PortPair,
};
use crate::dynamics;
use crate::imperfect::{self, ChainOrder, DEFAULT_QUADRATURE_NODES};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

/// One planned transmission scan.
#[derive(Debug, Clone)]
pub struct ScanPlan {
    pub power_uw: f64,
    /// Laser detuning grid (rad/ns).
    pub grid: Grid,
}

/// One planned correlation acquisition.
#[derive(Debug, Clone)]
pub struct TracePlan {
    pub pair: PortPair,
    pub power_uw: f64,
    /// Laser detuning during the acquisition (rad/ns).
    pub drive_detuning: f64,
    pub tau: Grid,
}

/// A full synthetic-acquisition plan. Count scales are expected detector
/// events for a unit-value point; `None` leaves the corresponding records
/// noiseless and without count columns.
#[derive(Debug, Clone)]
pub struct SynthPlan {
    pub scans: Vec<ScanPlan>,
    pub traces: Vec<TracePlan>,
    /// Power-to-drive conversion, Ω = √(ηP) (rad/ns per √µW).
    pub eta: f64,
    pub quadrature_nodes: usize,
    pub counts_per_point: Option<f64>,
    pub coincidences_per_bin: Option<f64>,
    pub seed: u64,
}

impl SynthPlan {
    /// A noiseless plan with default quadrature over the given acquisitions.
    pub fn noiseless(scans: Vec<ScanPlan>, traces: Vec<TracePlan>, eta: f64) -> Self {
        SynthPlan {
            scans,
            traces,
            eta,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
            counts_per_point: None,
            coincidences_per_bin: None,
            seed: 0,
        }
    }
}

fn check_scale(scale: Option<f64>, field: &'static str) -> Result<(), CoreError> {
    if let Some(s) = scale {
        if !(s > 0.0) || !s.is_finite() {
            return Err(CoreError::Domain {
                field,
                message: "count scale must be positive and finite",
                value: s,
            });
        }
    }
    Ok(())
}

fn drive_for(eta: f64, power_uw: f64, omega: f64) -> Result<DriveSpec, CoreError> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(CoreError::Domain {
            field: "eta",
            message: "must be positive and finite",
            value: eta,
        });
    }
    if !(power_uw > 0.0) || !power_uw.is_finite() {
        return Err(CoreError::Domain {
            field: "power_uw",
            message: "must be positive and finite",
            value: power_uw,
        });
    }
    Ok(DriveSpec::new(
        omega,
        Complex64::new((eta * power_uw).sqrt(), 0.0),
    ))
}

/// One Poisson draw around `expected`, degenerate at zero mean.
fn draw_counts(rng: &mut ChaCha8Rng, expected: f64) -> f64 {
    if expected <= 0.0 {
        return 0.0;
    }
    // Poisson::new only rejects non-positive/non-finite means, checked above.
    Poisson::new(expected).expect("positive mean").sample(rng)
}

/// Generates a measurement set from the model: stationary transmission
/// scans through the spectral-diffusion average and correlation histograms
/// through the full measurement chain. With count scales set, observed
/// values are Poisson draws scaled back to model units, and the raw counts
/// accompany each record for weighting.
pub fn synthesize(
    params: &EmitterParams,
    noise: &NoiseModel,
    plan: &SynthPlan,
) -> Result<MeasurementSet, CoreError> {
    check_scale(plan.counts_per_point, "counts_per_point")?;
    check_scale(plan.coincidences_per_bin, "coincidences_per_bin")?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut intensity_scans = Vec::with_capacity(plan.scans.len());
    for scan in &plan.scans {
        let drive = drive_for(plan.eta, scan.power_uw, 0.0)?;
        let model = imperfect::spectral_average_intensity(
            |omega| {
                let d = DriveSpec { omega, ..drive };
                dynamics::intensity(params, &d, Port::T)
            },
            noise.sigma_short,
            plan.quadrature_nodes,
            &scan.grid,
        )?;
        let (values, counts) = match plan.counts_per_point {
            None => (model, None),
            Some(scale) => {
                let mut values = Vec::with_capacity(model.len());
                let mut counts = Vec::with_capacity(model.len());
                for m in &model {
                    let c = draw_counts(&mut rng, m * scale);
                    values.push(c / scale);
                    counts.push(c);
                }
                (values, Some(counts))
            }
        };
        intensity_scans.push(IntensityScan {
            power_uw: scan.power_uw,
            grid: scan.grid.clone(),
            values,
            counts,
        });
    }
    let mut g2_traces = Vec::with_capacity(plan.traces.len());
    for trace in &plan.traces {
        let drive = drive_for(plan.eta, trace.power_uw, trace.drive_detuning)?;
        let model = imperfect::measured_g2_trace(
            params,
            &drive,
            trace.pair,
            noise,
            plan.quadrature_nodes,
            &trace.tau,
            ChainOrder::default(),
        )?;
        let (values, coincidences) = match plan.coincidences_per_bin {
            None => (model.values.clone(), None),
            Some(scale) => {
                let mut values = Vec::with_capacity(model.values.len());
                let mut counts = Vec::with_capacity(model.values.len());
                for m in &model.values {
                    let c = draw_counts(&mut rng, m * scale);
                    values.push(c / scale);
                    counts.push(c);
                }
                (values, Some(counts))
            }
        };
        let observed =
            crate::core::CorrelationTrace::new(trace.pair, trace.tau.clone(), values, model.axis)?;
        g2_traces.push(G2Record {
            power_uw: trace.power_uw,
            drive_detuning: trace.drive_detuning,
            trace: observed,
            coincidences,
        });
    }
    Ok(MeasurementSet {
        intensity_scans,
        g2_traces,
        gamma_tot: params.gamma_tot,
    })
}
