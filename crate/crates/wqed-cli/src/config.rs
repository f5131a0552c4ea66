//! Experiment configuration: one TOML file pins the emitter, the noise
//! chain, the drive plan, the sampling grids, and the fit setup. External
//! units are GHz / MHz / ns / µW; everything is converted to the internal
//! rad/ns convention here at the boundary.

use std::path::Path;

use serde::Deserialize;
use wqed_core::core::{
    angular_from_linear, make_grid, Background, EmitterParams, Grid, NoiseModel,
};
use wqed_core::fit::{FitConfig, FitParam, Weighting, FIT_PARAM_COUNT};
use wqed_core::imperfect::DEFAULT_QUADRATURE_NODES;

use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    emitter: EmitterSection,
    drive: DriveSection,
    #[serde(default)]
    noise: NoiseSection,
    #[serde(default)]
    grids: GridsSection,
    #[serde(default)]
    fit: FitSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmitterSection {
    beta: f64,
    gamma_tot_per_ns: f64,
    #[serde(default)]
    gamma_d_per_ns: f64,
    #[serde(default)]
    omega0_ghz: f64,
    #[serde(default)]
    xi: f64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    #[serde(default)]
    sigma_short_mhz: f64,
    #[serde(default)]
    sigma_long_mhz: f64,
    #[serde(default)]
    sigma_irf_ns: f64,
    #[serde(default)]
    background_tt: f64,
    #[serde(default)]
    background_rr: f64,
    #[serde(default)]
    background_tr: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DriveSection {
    /// Ω = √(η·P): rad²/ns² per µW of measured laser power.
    eta: f64,
    scan_powers_uw: Vec<f64>,
    trace_power_uw: f64,
    #[serde(default = "default_trace_detunings")]
    trace_detunings_ghz: Vec<f64>,
}

fn default_trace_detunings() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GridsSection {
    /// Half-span of the intensity scan around the reference (GHz).
    scan_span_ghz: f64,
    scan_points: usize,
    tau_max_ns: f64,
    tau_points: usize,
    /// Half-span of the sector exchange-frequency axis (GHz).
    delta_span_ghz: f64,
    delta_points: usize,
    /// Expected detector counts for a unit-value scan point. This single
    /// factor stands in for rate² · bin width · integration time; zero
    /// disables shot noise but keeps (all-zero) count columns.
    scan_exposure: f64,
    /// Expected coincidences for a unit-value correlation bin.
    trace_exposure: f64,
    quadrature_nodes: usize,
}

impl Default for GridsSection {
    fn default() -> Self {
        GridsSection {
            scan_span_ghz: 12.2,
            scan_points: 801,
            tau_max_ns: 3.0,
            tau_points: 301,
            delta_span_ghz: 2.44,
            delta_points: 81,
            scan_exposure: 0.0,
            trace_exposure: 0.0,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FitSection {
    free: Vec<String>,
    weighting: String,
    max_iterations: usize,
    gradient_tol: f64,
    step_tol: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitConfig::default();
        FitSection {
            free: vec!["beta".into(), "xi".into(), "eta".into()],
            weighting: "poisson".into(),
            max_iterations: d.max_iterations,
            gradient_tol: d.gradient_tol,
            step_tol: d.step_tol,
        }
    }
}

/// A parsed, validated, unit-converted experiment description.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub params: EmitterParams,
    pub noise: NoiseModel,
    pub eta: f64,
    pub scan_powers_uw: Vec<f64>,
    pub trace_power_uw: f64,
    /// Trace drive detunings (rad/ns).
    pub trace_detunings: Vec<f64>,
    pub scan_grid: Grid,
    pub tau_grid: Grid,
    pub delta_grid: Grid,
    pub scan_exposure: f64,
    pub trace_exposure: f64,
    pub quadrature_nodes: usize,
    pub fit: FitConfig,
}

fn cfg(message: String) -> CliError {
    CliError::Config(message)
}

fn require_nonneg(value: f64, field: &str) -> Result<(), CliError> {
    if !value.is_finite() || value < 0.0 {
        return Err(cfg(format!("{field} must be finite and >= 0, got {value}")));
    }
    Ok(())
}

fn require_positive(value: f64, field: &str) -> Result<(), CliError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(cfg(format!("{field} must be finite and > 0, got {value}")));
    }
    Ok(())
}

fn require_fraction(value: f64, field: &str) -> Result<(), CliError> {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(cfg(format!("{field} must lie in [0, 1], got {value}")));
    }
    Ok(())
}

fn mhz_to_angular(mhz: f64) -> f64 {
    angular_from_linear(mhz / 1000.0)
}

fn parse_free_list(labels: &[String]) -> Result<[bool; FIT_PARAM_COUNT], CliError> {
    let mut free = [false; FIT_PARAM_COUNT];
    for label in labels {
        let param = FitParam::ALL
            .iter()
            .find(|p| p.label() == label.as_str())
            .ok_or_else(|| {
                let known: Vec<&str> = FitParam::ALL.iter().map(|p| p.label()).collect();
                cfg(format!(
                    "fit.free contains unknown parameter {label:?}; known: {}",
                    known.join(", ")
                ))
            })?;
        free[param.index()] = true;
    }
    Ok(free)
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| cfg(format!("{}: {e}", path.display())))?;
    let file: ConfigFile = toml::from_str(&text)
        .map_err(|e| cfg(format!("{}: {e}", path.display())))?;

    let em = &file.emitter;
    let params = EmitterParams::new(
        em.beta,
        em.gamma_tot_per_ns,
        em.gamma_d_per_ns,
        angular_from_linear(em.omega0_ghz),
        em.xi,
    )
    .map_err(|e| cfg(format!("[emitter] {e}")))?;

    let ns = &file.noise;
    require_nonneg(ns.sigma_short_mhz, "noise.sigma_short_mhz")?;
    require_nonneg(ns.sigma_long_mhz, "noise.sigma_long_mhz")?;
    require_nonneg(ns.sigma_irf_ns, "noise.sigma_irf_ns")?;
    require_fraction(ns.background_tt, "noise.background_tt")?;
    require_fraction(ns.background_rr, "noise.background_rr")?;
    require_fraction(ns.background_tr, "noise.background_tr")?;
    let noise = NoiseModel {
        sigma_short: mhz_to_angular(ns.sigma_short_mhz),
        sigma_long: mhz_to_angular(ns.sigma_long_mhz),
        sigma_irf: ns.sigma_irf_ns,
        background: Background {
            tt: ns.background_tt,
            rr: ns.background_rr,
            tr: ns.background_tr,
        },
    };

    let dr = &file.drive;
    require_positive(dr.eta, "drive.eta")?;
    if dr.scan_powers_uw.is_empty() {
        return Err(cfg("drive.scan_powers_uw must list at least one power".into()));
    }
    for (i, p) in dr.scan_powers_uw.iter().enumerate() {
        require_positive(*p, &format!("drive.scan_powers_uw[{i}]"))?;
    }
    require_positive(dr.trace_power_uw, "drive.trace_power_uw")?;
    if dr.trace_detunings_ghz.is_empty() {
        return Err(cfg("drive.trace_detunings_ghz must list at least one detuning".into()));
    }
    for (i, d) in dr.trace_detunings_ghz.iter().enumerate() {
        if !d.is_finite() {
            return Err(cfg(format!("drive.trace_detunings_ghz[{i}] must be finite")));
        }
    }

    let gr = &file.grids;
    require_positive(gr.scan_span_ghz, "grids.scan_span_ghz")?;
    require_positive(gr.tau_max_ns, "grids.tau_max_ns")?;
    require_positive(gr.delta_span_ghz, "grids.delta_span_ghz")?;
    require_nonneg(gr.scan_exposure, "grids.scan_exposure")?;
    require_nonneg(gr.trace_exposure, "grids.trace_exposure")?;
    if gr.scan_points < 3 || gr.tau_points < 3 || gr.delta_points < 3 {
        return Err(cfg("grids.*_points must each be at least 3".into()));
    }
    if gr.quadrature_nodes == 0 {
        return Err(cfg("grids.quadrature_nodes must be positive".into()));
    }
    let span = angular_from_linear(gr.scan_span_ghz);
    let scan_grid = make_grid(-span, span, gr.scan_points)
        .map_err(|e| cfg(format!("[grids] scan: {e}")))?;
    let tau_grid = make_grid(0.0, gr.tau_max_ns, gr.tau_points)
        .map_err(|e| cfg(format!("[grids] tau: {e}")))?;
    let dspan = angular_from_linear(gr.delta_span_ghz);
    let delta_grid = make_grid(-dspan, dspan, gr.delta_points)
        .map_err(|e| cfg(format!("[grids] delta: {e}")))?;

    let fs = &file.fit;
    let weighting = match fs.weighting.as_str() {
        "poisson" => Weighting::PoissonCounts,
        "uniform" => Weighting::Uniform,
        other => {
            return Err(cfg(format!(
                "fit.weighting must be \"poisson\" or \"uniform\", got {other:?}"
            )))
        }
    };
    let mut fit = FitConfig {
        free: parse_free_list(&fs.free)?,
        weighting,
        max_iterations: fs.max_iterations,
        gradient_tol: fs.gradient_tol,
        step_tol: fs.step_tol,
        quadrature_nodes: gr.quadrature_nodes,
        base_noise: noise.clone(),
        ..FitConfig::default()
    };
    // The configured system doubles as the fit starting point, and fixed
    // parameters keep exactly these values during optimization.
    fit.init[FitParam::Beta.index()] = em.beta;
    fit.init[FitParam::GammaD.index()] = em.gamma_d_per_ns;
    fit.init[FitParam::Xi.index()] = em.xi;
    fit.init[FitParam::Eta.index()] = dr.eta;
    fit.init[FitParam::SigmaShort.index()] = noise.sigma_short;
    fit.init[FitParam::SigmaLong.index()] = noise.sigma_long;
    fit.init[FitParam::BackgroundRr.index()] = ns.background_rr;

    Ok(Loaded {
        params,
        noise,
        eta: dr.eta,
        scan_powers_uw: dr.scan_powers_uw.clone(),
        trace_power_uw: dr.trace_power_uw,
        trace_detunings: dr
            .trace_detunings_ghz
            .iter()
            .map(|d| angular_from_linear(*d))
            .collect(),
        scan_grid,
        tau_grid,
        delta_grid,
        scan_exposure: gr.scan_exposure,
        trace_exposure: gr.trace_exposure,
        quadrature_nodes: gr.quadrature_nodes,
        fit,
    })
}
