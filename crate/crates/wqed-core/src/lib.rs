//! Simulation, parameter fitting, and reconstruction for few-photon scattering
//! off a two-level emitter coupled to a waveguide.
//!
//! The crate forward-models transmitted/reflected intensity spectra and
//! second-order photon correlations of a driven two-level emitter behind a
//! Fano-dressed waveguide interface — including pure dephasing, spectral
//! diffusion, detector response, and laser background — and inverts such
//! measurements into the complex single-photon coefficients `t(ω)`, `r(ω)`
//! and the correlated two-photon amplitude `𝒯(ω,τ)` / its energy-conserving
//! sector `T(Δ)`.
//!
//! Module map:
//! - [`core`]: domain types, units, grids, validation.
//! - [`analytic`]: closed-form weak-drive scattering quantities.
//! - [`dynamics`]: Lindblad master equation, steady state, regression-theorem
//!   correlators, intensity and g² at arbitrary drive.
//! - [`imperfect`]: spectral diffusion, instrument response, background.
//! - [`reconstruct`]: Kramers-Kronig completion and the inverse pipeline.
//! - [`fit`]: weighted nonlinear least squares with confidence intervals.
//! - [`synth`]: synthetic data sets with deterministic shot noise.
//! - [`numerics`]: quadrature, Hilbert transforms, convolution, expm.
//!
//! Conventions: angular frequencies and rates in rad/ns, delays in ns,
//! frequencies stored as detuning from the emitter reference. The saturation
//! parameter is `n = 2|Ω|²/γ_tot²` (mean photons per emitter lifetime).

pub mod analytic;
pub mod core;
pub mod dynamics;
pub mod fit;
pub mod imperfect;
pub mod numerics;
pub mod reconstruct;
pub mod synth;

pub use num_complex::Complex64;
