//! Domain types, unit handling, grids, and validation shared by all modules.
//!
//! Internal unit convention: angular frequencies and rates in rad/ns, times
//! in ns. Frequencies are stored as detunings from a reference (by default
//! the emitter transition), keeping grid magnitudes O(γ_tot).

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Errors from domain-type validation and grid construction.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A field violated its documented bound; names field and bound.
    #[error("domain error: {field} {message} (got {value})")]
    Domain {
        field: &'static str,
        message: &'static str,
        value: f64,
    },
    /// Invalid grid construction arguments.
    #[error("grid error: {0}")]
    Grid(String),
    /// Mismatched lengths between a grid and its sample vector.
    #[error("length mismatch: grid has {grid} points but {what} has {len}")]
    LengthMismatch {
        grid: usize,
        what: &'static str,
        len: usize,
    },
    /// Negative values where a physical trace must be nonnegative.
    #[error("negative value {value} at index {index} in {what}")]
    NegativeValue {
        what: &'static str,
        index: usize,
        value: f64,
    },
    /// A linear solve encountered a numerically singular system.
    #[error("singular system: {0}")]
    Singular(String),
}

/// Converts a linear frequency in GHz to an angular frequency in rad/ns.
pub fn angular_from_linear(f_ghz: f64) -> f64 {
    2.0 * PI * f_ghz
}

/// Converts an angular frequency in rad/ns to a linear frequency in GHz.
pub fn linear_from_angular(w_rad_ns: f64) -> f64 {
    w_rad_ns / (2.0 * PI)
}

/// A uniform, strictly increasing sample grid (frequency or delay axis).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lo: f64,
    step: f64,
    n: usize,
}

/// Builds a uniform grid of `n` equally spaced samples covering `[lo, hi]`
/// inclusive of both endpoints.
pub fn make_grid(lo: f64, hi: f64, n: usize) -> Result<Grid, CoreError> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(CoreError::Grid(format!("bounds must be finite, got [{lo}, {hi}]")));
    }
    if lo >= hi {
        return Err(CoreError::Grid(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    if n < 2 {
        return Err(CoreError::Grid(format!("need at least 2 points, got {n}")));
    }
    Ok(Grid {
        lo,
        step: (hi - lo) / (n - 1) as f64,
        n,
    })
}

impl Grid {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees n >= 2
    }

    /// Spacing between adjacent samples.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// First sample.
    pub fn lo(&self) -> f64 {
        self.lo
    }

    /// Last sample.
    pub fn hi(&self) -> f64 {
        self.lo + self.step * (self.n - 1) as f64
    }

    /// Total covered span `hi - lo`.
    pub fn span(&self) -> f64 {
        self.step * (self.n - 1) as f64
    }

    /// The `i`-th sample.
    pub fn value(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        self.lo + self.step * i as f64
    }

    /// Iterates over all samples in increasing order.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.value(i))
    }

    /// Collects the samples into a vector.
    pub fn to_vec(&self) -> Vec<f64> {
        self.values().collect()
    }

    /// Builds a grid directly from its first sample and spacing.
    pub fn from_step(lo: f64, step: f64, n: usize) -> Result<Grid, CoreError> {
        if !lo.is_finite() || !step.is_finite() || step <= 0.0 {
            return Err(CoreError::Grid(format!(
                "need finite lo and positive step, got lo={lo}, step={step}"
            )));
        }
        if n < 2 {
            return Err(CoreError::Grid(format!("need at least 2 points, got {n}")));
        }
        Ok(Grid { lo, step, n })
    }

    /// True when the grids agree point-by-point within floating tolerance.
    pub fn approx_eq(&self, other: &Grid) -> bool {
        let scale = self.step.abs().max(1e-300);
        self.n == other.n
            && (self.lo - other.lo).abs() < 1e-9 * scale
            && (self.step - other.step).abs() < 1e-9 * scale
    }
}

/// Physical parameters of the emitter-waveguide system.
///
/// All rates in rad/ns; `omega0` is the transition frequency expressed as an
/// offset from the chosen reference (0 when the reference is the transition
/// itself).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterParams {
    /// Waveguide coupling efficiency β = γ_wg/γ_tot, in [0, 1].
    pub beta: f64,
    /// Total decay rate γ_tot > 0 (rad/ns).
    pub gamma_tot: f64,
    /// Pure-dephasing rate γ_d ≥ 0 (rad/ns).
    pub gamma_d: f64,
    /// Transition frequency as offset from the reference (rad/ns).
    pub omega0: f64,
    /// Dimensionless Fano parameter ξ of the waveguide interface.
    pub xi: f64,
}

impl EmitterParams {
    /// Validating constructor; see [`validate`].
    pub fn new(
        beta: f64,
        gamma_tot: f64,
        gamma_d: f64,
        omega0: f64,
        xi: f64,
    ) -> Result<Self, CoreError> {
        validate(EmitterParams {
            beta,
            gamma_tot,
            gamma_d,
            omega0,
            xi,
        })
    }

    /// Total linewidth of the coherence, γ_tot/2 + γ_d (rad/ns).
    pub fn coherence_rate(&self) -> f64 {
        0.5 * self.gamma_tot + self.gamma_d
    }
}

/// Checks all [`EmitterParams`] invariants, returning the value unchanged
/// when every bound holds and a [`CoreError::Domain`] naming the violated
/// bound otherwise.
pub fn validate(params: EmitterParams) -> Result<EmitterParams, CoreError> {
    let EmitterParams {
        beta,
        gamma_tot,
        gamma_d,
        omega0,
        xi,
    } = params;
    if !(0.0..=1.0).contains(&beta) || !beta.is_finite() {
        return Err(CoreError::Domain {
            field: "beta",
            message: "must lie in [0, 1]",
            value: beta,
        });
    }
    if !(gamma_tot > 0.0) || !gamma_tot.is_finite() {
        return Err(CoreError::Domain {
            field: "gamma_tot",
            message: "must be > 0",
            value: gamma_tot,
        });
    }
    if !(gamma_d >= 0.0) || !gamma_d.is_finite() {
        return Err(CoreError::Domain {
            field: "gamma_d",
            message: "must be >= 0",
            value: gamma_d,
        });
    }
    if !omega0.is_finite() {
        return Err(CoreError::Domain {
            field: "omega0",
            message: "must be finite",
            value: omega0,
        });
    }
    if !xi.is_finite() {
        return Err(CoreError::Domain {
            field: "xi",
            message: "must be finite",
            value: xi,
        });
    }
    Ok(params)
}

/// Fano interface coefficients derived from ξ.
#[derive(Debug, Clone, Copy)]
pub struct ScatterGeometry {
    /// z = 1/(1 + iξ): background transmission of the bare interface.
    pub z: Complex64,
    /// Λ_tt = z.
    pub lambda_tt: Complex64,
    /// Λ_rt = z − 1.
    pub lambda_rt: Complex64,
}

impl ScatterGeometry {
    /// Builds the geometry for a finite Fano parameter.
    pub fn from_xi(xi: f64) -> Self {
        let z = Complex64::new(1.0, 0.0) / Complex64::new(1.0, xi);
        ScatterGeometry {
            z,
            lambda_tt: z,
            lambda_rt: z - 1.0,
        }
    }

    /// |z|² = 1/(1+ξ²).
    pub fn z_norm_sq(&self) -> f64 {
        self.z.norm_sqr()
    }

    /// The outgoing-port coefficient Λ_μt for the given detection port.
    pub fn lambda(&self, port: Port) -> Complex64 {
        match port {
            Port::T => self.lambda_tt,
            Port::R => self.lambda_rt,
        }
    }
}

/// Detection port of the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    /// Transmission.
    T,
    /// Reflection.
    R,
}

/// Ordered pair of detection ports for a second-order correlation.
///
/// The first port is the one detected at the *later* time `t+τ`; mirror rule:
/// `g²_{μμ′}(−τ) = g²_{μ′μ}(τ)` by stationarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortPair {
    Tt,
    Rr,
    Tr,
    Rt,
}

impl PortPair {
    /// (later, earlier) detection ports.
    pub fn ports(self) -> (Port, Port) {
        match self {
            PortPair::Tt => (Port::T, Port::T),
            PortPair::Rr => (Port::R, Port::R),
            PortPair::Tr => (Port::T, Port::R),
            PortPair::Rt => (Port::R, Port::T),
        }
    }

    /// The pair with detection order exchanged (used by the mirror rule).
    pub fn swapped(self) -> PortPair {
        match self {
            PortPair::Tt => PortPair::Tt,
            PortPair::Rr => PortPair::Rr,
            PortPair::Tr => PortPair::Rt,
            PortPair::Rt => PortPair::Tr,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PortPair::Tt => "tt",
            PortPair::Rr => "rr",
            PortPair::Tr => "tr",
            PortPair::Rt => "rt",
        }
    }

    pub fn parse(s: &str) -> Option<PortPair> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tt" => Some(PortPair::Tt),
            "rr" => Some(PortPair::Rr),
            "tr" => Some(PortPair::Tr),
            "rt" => Some(PortPair::Rt),
            _ => None,
        }
    }
}

/// Continuous-wave drive specification.
#[derive(Debug, Clone, Copy)]
pub struct DriveSpec {
    /// Laser angular frequency as offset from the reference (rad/ns).
    pub omega: f64,
    /// Complex Rabi drive strength Ω (rad/ns).
    pub rabi: Complex64,
    /// Photon-flux normalization used only for bookkeeping (photons/ns).
    pub flux_scale: f64,
}

/// Default threshold below which a drive counts as weak (on `n`).
pub const WEAK_DRIVE_THRESHOLD: f64 = 1e-2;

impl DriveSpec {
    pub fn new(omega: f64, rabi: Complex64) -> Self {
        DriveSpec {
            omega,
            rabi,
            flux_scale: 1.0,
        }
    }

    /// Saturation parameter n = 2|Ω|²/γ_tot² (mean photons per lifetime).
    pub fn saturation(&self, gamma_tot: f64) -> f64 {
        2.0 * self.rabi.norm_sqr() / (gamma_tot * gamma_tot)
    }

    /// True iff n < threshold.
    pub fn is_weak(&self, gamma_tot: f64, threshold: f64) -> bool {
        self.saturation(gamma_tot) < threshold
    }
}

/// Rabi strength for the power-law drive calibration Ω = √(ηP).
pub fn rabi_from_power(power_uw: f64, eta: f64) -> f64 {
    (eta * power_uw.max(0.0)).sqrt()
}

/// Measurement-chain noise parameters. All σ are standard deviations.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    /// Spectral-diffusion std for intensity scans (rad/ns).
    pub sigma_short: f64,
    /// Spectral-diffusion std for g² acquisitions (rad/ns).
    pub sigma_long: f64,
    /// Detector-response std (ns).
    pub sigma_irf: f64,
    /// Laser-background admixture per port pair.
    pub background: Background,
}

/// Background fraction B ∈ [0, 1] per port pair (rt shares tr).
#[derive(Debug, Clone, Copy, Default)]
pub struct Background {
    pub tt: f64,
    pub rr: f64,
    pub tr: f64,
}

impl Background {
    pub fn get(&self, pair: PortPair) -> f64 {
        match pair {
            PortPair::Tt => self.tt,
            PortPair::Rr => self.rr,
            PortPair::Tr | PortPair::Rt => self.tr,
        }
    }
}

impl NoiseModel {
    /// Noise-free model (identity measurement chain).
    pub fn ideal() -> Self {
        NoiseModel {
            sigma_short: 0.0,
            sigma_long: 0.0,
            sigma_irf: 0.0,
            background: Background::default(),
        }
    }

    pub fn validate(self) -> Result<Self, CoreError> {
        for (field, v) in [
            ("sigma_short", self.sigma_short),
            ("sigma_long", self.sigma_long),
            ("sigma_irf", self.sigma_irf),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(CoreError::Domain {
                    field,
                    message: "must be >= 0",
                    value: v,
                });
            }
        }
        for (field, v) in [
            ("background.tt", self.background.tt),
            ("background.rr", self.background.rr),
            ("background.tr", self.background.tr),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CoreError::Domain {
                    field,
                    message: "must lie in [0, 1]",
                    value: v,
                });
            }
        }
        Ok(self)
    }
}

/// A complex-valued function sampled on a uniform frequency grid.
#[derive(Debug, Clone)]
pub struct ComplexSpectrum {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self, CoreError> {
        if grid.len() != values.len() {
            return Err(CoreError::LengthMismatch {
                grid: grid.len(),
                what: "values",
                len: values.len(),
            });
        }
        Ok(ComplexSpectrum { grid, values })
    }
}

/// Declared layout of a delay axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauAxis {
    /// Grid starts at τ = 0 and extends to positive delays.
    StartsAtZero,
    /// Grid is symmetric about τ = 0.
    SymmetricAboutZero,
}

/// Real nonnegative g²(τ) samples on a uniform delay grid, labelled by the
/// output-port pair.
#[derive(Debug, Clone)]
pub struct CorrelationTrace {
    pub pair: PortPair,
    pub tau: Grid,
    pub values: Vec<f64>,
    pub axis: TauAxis,
}

impl CorrelationTrace {
    pub fn new(
        pair: PortPair,
        tau: Grid,
        values: Vec<f64>,
        axis: TauAxis,
    ) -> Result<Self, CoreError> {
        if tau.len() != values.len() {
            return Err(CoreError::LengthMismatch {
                grid: tau.len(),
                what: "g2 values",
                len: values.len(),
            });
        }
        if let Some((i, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= -1e-9) || !v.is_finite())
        {
            return Err(CoreError::NegativeValue {
                what: "g2 trace",
                index: i,
                value: v,
            });
        }
        // Round-off can leave tiny negatives at deep antibunching dips.
        let values = values.into_iter().map(|v| v.max(0.0)).collect();
        Ok(CorrelationTrace {
            pair,
            tau,
            values,
            axis,
        })
    }
}

/// The energy-conserving two-photon amplitude accessible with a
/// monochromatic input at `omega`, sampled over the exchange frequency Δ.
/// Values carry units of ns.
#[derive(Debug, Clone)]
pub struct TwoPhotonSector {
    /// Input frequency (offset from reference, rad/ns).
    pub omega: f64,
    pub delta: Grid,
    pub values: Vec<Complex64>,
}

impl TwoPhotonSector {
    pub fn new(omega: f64, delta: Grid, values: Vec<Complex64>) -> Result<Self, CoreError> {
        if delta.len() != values.len() {
            return Err(CoreError::LengthMismatch {
                grid: delta.len(),
                what: "sector values",
                len: values.len(),
            });
        }
        Ok(TwoPhotonSector {
            omega,
            delta,
            values,
        })
    }
}

/// One transmission-intensity scan at a fixed drive power.
#[derive(Debug, Clone)]
pub struct IntensityScan {
    pub power_uw: f64,
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Raw detector counts per point, when available (Poisson weighting).
    pub counts: Option<Vec<f64>>,
}

/// One g² acquisition: the trace plus its drive conditions and statistics.
#[derive(Debug, Clone)]
pub struct G2Record {
    pub power_uw: f64,
    /// Drive detuning from the reference (rad/ns).
    pub drive_detuning: f64,
    pub trace: CorrelationTrace,
    /// Coincidence counts per delay bin, when available.
    pub coincidences: Option<Vec<f64>>,
}

/// Ingested experimental or synthetic records: intensity spectra at several
/// powers plus g² traces, with count statistics for weighting.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub intensity_scans: Vec<IntensityScan>,
    pub g2_traces: Vec<G2Record>,
    /// Independently measured total decay rate (rad/ns); never fitted.
    pub gamma_tot: f64,
}
