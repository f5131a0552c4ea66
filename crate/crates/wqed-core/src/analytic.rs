//! Closed-form scattering quantities: single-photon transmission and
//! reflection coefficients through the Fano-modified waveguide, weak-drive
//! intensities, the correlated two-photon kernel in both the time-offset and
//! frequency-offset representations, and weak-drive photon correlations.

use crate::core::{
    CoreError, CorrelationTrace, EmitterParams, Grid, Port, PortPair, ScatterGeometry,
    ComplexSpectrum, TauAxis, TwoPhotonSector,
};
use num_complex::Complex64;

/// Single-photon transmission and reflection amplitudes at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleCoefficients {
    pub t: Complex64,
    pub r: Complex64,
}

/// Emitter frequency response G(ω) = (γ/2) / (γ/2 + γ_d − i(ω − ω₀)).
/// Unity on resonance without pure dephasing; rolls off over the total
/// linewidth γ/2 + γ_d.
pub fn emitter_response(params: &EmitterParams, omega: f64) -> Complex64 {
    let half = 0.5 * params.gamma_tot;
    Complex64::new(half, 0.0)
        / Complex64::new(half + params.gamma_d, -(omega - params.omega0))
}

/// Complex decay constant of the two-photon time-offset kernel:
/// a = γ/2 + γ_d − i(ω − ω₀), so that G(ω) = (γ/2)/a.
pub(crate) fn kernel_decay(params: &EmitterParams, omega: f64) -> Complex64 {
    Complex64::new(
        0.5 * params.gamma_tot + params.gamma_d,
        -(omega - params.omega0),
    )
}

/// Transmission amplitude rebuilt from an emitter response value `g`:
/// t = z(1 − zβg/|z|²). Exposed separately so reconstruction can reuse it
/// with measured rather than modeled responses.
pub fn transmission_from_response(params: &EmitterParams, g: Complex64) -> Complex64 {
    let geom = ScatterGeometry::from_xi(params.xi);
    let z = geom.z;
    z * (Complex64::new(1.0, 0.0) - z * params.beta * g / geom.z_norm_sq())
}

/// Single-photon coefficients t(ω) and r(ω) = t(ω) − 1.
pub fn single_coefficients(params: &EmitterParams, omega: f64) -> SingleCoefficients {
    let t = transmission_from_response(params, emitter_response(params, omega));
    SingleCoefficients {
        t,
        r: t - Complex64::new(1.0, 0.0),
    }
}

/// Transmission and reflection spectra over a frequency grid.
pub fn single_spectra(
    params: &EmitterParams,
    grid: &Grid,
) -> (ComplexSpectrum, ComplexSpectrum) {
    let mut t_vals = Vec::with_capacity(grid.len());
    let mut r_vals = Vec::with_capacity(grid.len());
    for omega in grid.values() {
        let c = single_coefficients(params, omega);
        t_vals.push(c.t);
        r_vals.push(c.r);
    }
    (
        ComplexSpectrum {
            grid: grid.clone(),
            values: t_vals,
        },
        ComplexSpectrum {
            grid: grid.clone(),
            values: r_vals,
        },
    )
}

/// Weight R = (β/|z|²)(β − 2z) appearing in the weak-drive transmitted
/// intensity I_t = 1 + Re{R·G(ω)}.
pub fn weak_response_weight(params: &EmitterParams) -> Complex64 {
    let geom = ScatterGeometry::from_xi(params.xi);
    (params.beta / geom.z_norm_sq()) * (Complex64::new(params.beta, 0.0) - 2.0 * geom.z)
}

/// Weak-drive detector intensity at one frequency, normalized so the
/// far-detuned transmission level is 1. Includes the incoherent
/// dephasing-induced contribution; for γ_d = 0 this reduces to the coherent
/// |t/z|² (or |r/z|² with the corresponding port amplitude offset).
pub fn weak_intensity(params: &EmitterParams, port: Port, omega: f64) -> f64 {
    let geom = ScatterGeometry::from_xi(params.xi);
    let z2 = geom.z_norm_sq();
    let lambda = geom.lambda(port);
    let g = emitter_response(params, omega);
    // Weak steady state gives ⟨σ⁻⟩/Ω = 2G/γ.
    let coupling = Complex64::new(0.5 * params.beta, 0.0) - geom.z * geom.z / z2 * lambda.conj();
    lambda.norm_sqr() / z2 + (2.0 * params.beta / z2) * (coupling * g).re
}

/// Weak-drive intensity over a frequency grid.
pub fn weak_intensity_scan(params: &EmitterParams, port: Port, grid: &Grid) -> Vec<f64> {
    grid.values()
        .map(|omega| weak_intensity(params, port, omega))
        .collect()
}

/// Correlated two-photon kernel in the time-offset representation:
/// 𝒯(ω, τ) = −β² (z⁴/|z|⁴) G(ω)² e^{−a|τ|}, even in τ, oscillatory when
/// the drive is detuned.
pub fn two_photon_kernel(params: &EmitterParams, omega: f64, tau: f64) -> Complex64 {
    let geom = ScatterGeometry::from_xi(params.xi);
    let z2 = geom.z_norm_sq();
    let zeta = geom.z.powu(4) / (z2 * z2);
    let g = emitter_response(params, omega);
    let a = kernel_decay(params, omega);
    -params.beta * params.beta * zeta * g * g * (-a * tau.abs()).exp()
}

/// Time-offset kernel sampled on a set of offsets.
pub fn kernel_trace(params: &EmitterParams, omega: f64, taus: &[f64]) -> Vec<Complex64> {
    taus.iter()
        .map(|&tau| two_photon_kernel(params, omega, tau))
        .collect()
}

/// Frequency-offset representation of the correlated kernel at fixed mean
/// frequency ω: the amplitude for scattering the degenerate pair (ω, ω)
/// into (ω−Δ, ω+Δ),
/// T(Δ) = −(4β²/πγ)(z⁴/|z|⁴) G(ω−Δ) G(ω+Δ) G(ω).
pub fn two_photon_sector(params: &EmitterParams, omega: f64, deltas: &Grid) -> TwoPhotonSector {
    let geom = ScatterGeometry::from_xi(params.xi);
    let z2 = geom.z_norm_sq();
    let zeta = geom.z.powu(4) / (z2 * z2);
    let pref = -(4.0 * params.beta * params.beta / (std::f64::consts::PI * params.gamma_tot))
        * zeta
        * emitter_response(params, omega);
    let values = deltas
        .values()
        .map(|d| {
            pref * emitter_response(params, omega - d) * emitter_response(params, omega + d)
        })
        .collect();
    TwoPhotonSector {
        omega,
        delta: deltas.clone(),
        values,
    }
}

/// Weak-drive normalized correlation for a detector pair:
/// g²_μμ′(ω, τ) = |χ_μ χ_μ′ + 𝒯(ω, τ)|² / (|χ_μ|²|χ_μ′|²), with χ the
/// single-photon amplitude of each port. The correlated kernel 𝒯 is
/// port-independent because both ports share the emitter-scattered wave.
pub fn weak_g2(params: &EmitterParams, pair: PortPair, omega: f64, tau: f64) -> f64 {
    let coeffs = single_coefficients(params, omega);
    let chi = |port: Port| match port {
        Port::T => coeffs.t,
        Port::R => coeffs.r,
    };
    let (later, earlier) = pair.ports();
    let cc = chi(later) * chi(earlier);
    let kernel = two_photon_kernel(params, omega, tau);
    (cc + kernel).norm_sqr() / cc.norm_sqr()
}

/// Weak-drive correlation trace over a uniform grid of nonnegative offsets.
pub fn weak_g2_trace(
    params: &EmitterParams,
    pair: PortPair,
    omega: f64,
    tau: &Grid,
) -> Result<CorrelationTrace, CoreError> {
    let values: Vec<f64> = tau
        .values()
        .map(|t| weak_g2(params, pair, omega, t))
        .collect();
    CorrelationTrace::new(pair, tau.clone(), values, TauAxis::StartsAtZero)
}

/// Resonant zero-offset transmission bunching in the ideal weak limit
/// (ξ = 0, γ_d = 0): (1 − 2β)² / (1 − β)⁴.
pub fn weak_g2_tt_resonant_zero(beta: f64) -> f64 {
    let num = 1.0 - 2.0 * beta;
    let den = 1.0 - beta;
    (num * num) / (den * den * den * den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::make_grid;
    use approx::assert_abs_diff_eq;

    fn table_params() -> EmitterParams {
        EmitterParams::new(0.87, 7.65, 0.0, 0.0, -0.26).unwrap()
    }

    fn ideal_params(beta: f64) -> EmitterParams {
        EmitterParams::new(beta, 7.65, 0.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn response_is_unity_on_resonance_and_half_at_hwhm() {
        let p = table_params();
        let g0 = emitter_response(&p, 0.0);
        assert!((g0 - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        // At detuning γ/2 (no dephasing): G = 1/(1−i).
        let g = emitter_response(&p, 0.5 * p.gamma_tot);
        assert_abs_diff_eq!(g.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g.im, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn resonant_transmission_reference_value() {
        let p = table_params();
        let c = single_coefficients(&p, 0.0);
        assert_abs_diff_eq!(c.t.re, 0.17685650056200802, epsilon = 1e-12);
        assert_abs_diff_eq!(c.t.im, -0.18021730985387796, epsilon = 1e-12);
        assert!((c.t - c.r - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn weak_intensity_reference_and_coherent_route() {
        let p = table_params();
        let it = weak_intensity(&p, Port::T, 0.0);
        assert_abs_diff_eq!(it, 0.06806644, epsilon = 1e-12);
        // Without dephasing the weak intensity equals the coherent
        // |t/z|² route exactly, at every detuning.
        let geom = ScatterGeometry::from_xi(p.xi);
        for omega in [-9.0, -2.5, 0.0, 0.4, 3.3, 11.0] {
            let coherent = single_coefficients(&p, omega).t.norm_sqr() / geom.z_norm_sq();
            assert_abs_diff_eq!(weak_intensity(&p, Port::T, omega), coherent, epsilon = 1e-13);
            let coherent_r =
                single_coefficients(&p, omega).r.norm_sqr() / geom.z_norm_sq();
            assert_abs_diff_eq!(weak_intensity(&p, Port::R, omega), coherent_r, epsilon = 1e-13);
        }
    }

    #[test]
    fn dephasing_adds_incoherent_intensity() {
        let p = EmitterParams::new(0.87, 7.65, 0.8, 0.0, -0.26).unwrap();
        let geom = ScatterGeometry::from_xi(p.xi);
        let coherent = single_coefficients(&p, 0.0).t.norm_sqr() / geom.z_norm_sq();
        let total = weak_intensity(&p, Port::T, 0.0);
        assert!(
            total > coherent + 1e-6,
            "incoherent part missing: {total} vs {coherent}"
        );
    }

    #[test]
    fn weak_intensity_asymptotics() {
        let p = table_params();
        let far = 4000.0 * p.gamma_tot;
        assert_abs_diff_eq!(weak_intensity(&p, Port::T, far), 1.0, epsilon = 1e-3);
        // Far-detuned reflection settles at |z−1|²/|z|² = ξ².
        assert_abs_diff_eq!(
            weak_intensity(&p, Port::R, far),
            p.xi * p.xi,
            epsilon = 1e-3
        );
    }

    #[test]
    fn kernel_reference_value_and_symmetry() {
        let p = table_params();
        let k0 = two_photon_kernel(&p, 0.0, 0.0);
        assert_abs_diff_eq!(k0.re, -0.39776473043468025, epsilon = 1e-12);
        assert_abs_diff_eq!(k0.im, -0.6439571641205853, epsilon = 1e-12);
        // The Fano phase factor z⁴/|z|⁴ is unimodular, so |𝒯(ω₀,0)| = β².
        assert_abs_diff_eq!(k0.norm(), p.beta * p.beta, epsilon = 1e-12);
        for tau in [0.07, 0.5, 2.0] {
            let plus = two_photon_kernel(&p, 0.3, tau);
            let minus = two_photon_kernel(&p, 0.3, -tau);
            assert!((plus - minus).norm() < 1e-15);
        }
    }

    #[test]
    fn detuned_kernel_oscillates_at_the_detuning() {
        let p = table_params();
        let delta = 2.0;
        let omega = p.omega0 + delta;
        let tau = 0.9;
        let k = two_photon_kernel(&p, omega, tau);
        let k0 = two_photon_kernel(&p, omega, 0.0);
        let decay = (0.5 * p.gamma_tot + p.gamma_d) * tau;
        let expect = k0 * Complex64::new(-decay, delta * tau).exp();
        assert!((k - expect).norm() < 1e-12);
    }

    #[test]
    fn sector_reference_value_ideal() {
        // β = 1, ξ = 0, resonant, Δ = 0: T = −4/(πγ).
        let p = EmitterParams::new(1.0, 7.65, 0.0, 0.0, 0.0).unwrap();
        let deltas = make_grid(-1.0, 1.0, 3).unwrap();
        let sector = two_photon_sector(&p, 0.0, &deltas);
        let mid = sector.values[1];
        assert_abs_diff_eq!(
            mid.re,
            -4.0 / (std::f64::consts::PI * p.gamma_tot),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(mid.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sector_matches_fourier_transform_of_kernel() {
        // T(Δ) = (2/π) ∫₀^∞ cos(Δτ) 𝒯(ω, τ) dτ, two independent routes.
        let p = table_params();
        let omega = 0.8;
        let n = 20001;
        let tau_max = 60.0 / p.gamma_tot;
        let h = tau_max / (n - 1) as f64;
        let deltas = make_grid(-6.0, 6.0, 5).unwrap();
        let sector = two_photon_sector(&p, omega, &deltas);
        for (d, expect) in deltas.values().zip(&sector.values) {
            let samples: Vec<Complex64> = (0..n)
                .map(|i| {
                    let tau = i as f64 * h;
                    two_photon_kernel(&p, omega, tau) * (d * tau).cos()
                })
                .collect();
            let integral = crate::numerics::simpson_complex(&samples, h)
                * (2.0 / std::f64::consts::PI);
            assert!(
                (integral - expect).norm() < 1e-8,
                "Δ={d}: {integral} vs {expect}"
            );
        }
    }

    #[test]
    fn weak_g2_closed_forms() {
        // Ideal resonant zero-offset value and the Fano-dressed variant
        // |1−2v|²/|1−v|⁴ with v = β(1−iξ)G.
        assert_abs_diff_eq!(weak_g2_tt_resonant_zero(0.87), 1917.2998144322673, epsilon = 1e-9);
        let ideal = ideal_params(0.87);
        assert_abs_diff_eq!(
            weak_g2(&ideal, PortPair::Tt, 0.0, 0.0),
            1917.2998144322673,
            epsilon = 1e-8
        );
        let p = table_params();
        let v = Complex64::new(1.0, -p.xi) * p.beta; // G(ω₀) = 1
        let expect = (Complex64::new(1.0, 0.0) - 2.0 * v).norm_sqr()
            / (Complex64::new(1.0, 0.0) - v).norm_sqr().powi(2);
        assert_abs_diff_eq!(expect, 162.3697871621332, epsilon = 1e-9);
        assert_abs_diff_eq!(weak_g2(&p, PortPair::Tt, 0.0, 0.0), expect, epsilon = 1e-9);
    }

    #[test]
    fn weak_g2_long_offset_uncorrelates() {
        let p = table_params();
        for pair in [PortPair::Tt, PortPair::Rr, PortPair::Tr] {
            let g = weak_g2(&p, pair, 0.4, 60.0 / p.gamma_tot);
            assert_abs_diff_eq!(g, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn weak_g2_pair_symmetry() {
        let p = table_params();
        for (omega, tau) in [(0.0, 0.0), (1.3, 0.2), (-2.0, 0.9)] {
            let tr = weak_g2(&p, PortPair::Tr, omega, tau);
            let rt = weak_g2(&p, PortPair::Rt, omega, tau);
            assert_abs_diff_eq!(tr, rt, epsilon = 1e-14);
        }
    }

    #[test]
    fn weak_g2_trace_bunching_dip_recovery() {
        // On resonance the transmitted correlation starts hugely bunched,
        // crosses zero where the correlated kernel cancels the coherent
        // amplitude (near τ = 2 ln(β²/(1−β)²)/γ), then recovers toward 1.
        let p = ideal_params(0.87);
        let taus = make_grid(0.0, 1.99, 400).unwrap();
        let trace = weak_g2_trace(&p, PortPair::Tt, 0.0, &taus).unwrap();
        assert!(trace.values[0] > 1000.0);
        let (imin, vmin) = trace
            .values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| {
                if v < acc.1 { (i, v) } else { acc }
            });
        let tau_dip = 2.0 * (p.beta * p.beta / ((1.0 - p.beta) * (1.0 - p.beta))).ln()
            / p.gamma_tot;
        assert!(vmin < 1e-3, "dip floor {vmin}");
        assert!((trace.tau.value(imin) - tau_dip).abs() < 0.01);
        assert!(*trace.values.last().unwrap() > 0.9);
    }

    #[test]
    fn spectra_match_pointwise_coefficients() {
        let p = table_params();
        let grid = make_grid(-10.0, 10.0, 41).unwrap();
        let (t, r) = single_spectra(&p, &grid);
        for (i, omega) in grid.values().enumerate() {
            let c = single_coefficients(&p, omega);
            assert!((t.values[i] - c.t).norm() < 1e-15);
            assert!((r.values[i] - c.r).norm() < 1e-15);
        }
    }
}
