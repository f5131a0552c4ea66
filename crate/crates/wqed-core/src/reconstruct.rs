//! The inverse pipeline: Kramers-Kronig completion of measured real parts,
//! single-photon coefficient extraction from transmission spectra,
//! two-photon Re 𝒯 extraction from correlation traces, completion over
//! frequency, and inverse Fourier transform to the two-photon sector.

use crate::core::{
    ComplexSpectrum, CoreError, CorrelationTrace, Grid, PortPair, ScatterGeometry,
    TwoPhotonSector,
};
use crate::numerics::{hilbert_fft, simpson_complex};
use ndarray::Array2;
use num_complex::Complex64;

/// Fraction of the peak magnitude the spectrum may retain at the window
/// edges before the dispersion integral is considered truncated.
const EDGE_DECAY_FRACTION: f64 = 0.05;

/// Which three-trace combination recovers the correlated part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReconstructionVariant {
    /// (g²−1)-weighted combination; algebraically exact for traces obeying
    /// the weak-drive correlation formula.
    #[default]
    ExcessWeighted,
    /// The g²-weighted combination as commonly quoted; carries a constant
    /// offset of ½(|t|²−|r|²)² relative to the exact variant.
    AsPrinted,
}

/// Kramers-Kronig completion on a uniform grid:
/// Im f(ω) = (1/π) 𝒫∫ dω′ Re f(ω′)/(ω−ω′),
/// via the FFT sign-kernel Hilbert transform plus Lorentzian-tail
/// extrapolation beyond the window (fit C/(ω−c) to the outer 10% of
/// samples on each side).
pub fn kramers_kronig(grid: &Grid, re: &[f64]) -> Result<Vec<f64>, CoreError> {
    if re.len() != grid.len() {
        return Err(CoreError::LengthMismatch {
            grid: grid.len(),
            what: "real part",
            len: re.len(),
        });
    }
    let peak = re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(vec![0.0; re.len()]);
    }
    let n = re.len();
    let edge = re[0].abs().max(re[n - 1].abs());
    if edge >= EDGE_DECAY_FRACTION * peak {
        return Err(CoreError::Grid(format!(
            "insufficient spectral span: edge magnitude {edge:.3e} is {:.1}% of the peak \
             {peak:.3e}; the dispersion integral needs the input to decay below {:.0}% \
             (scan several linewidths past the resonance)",
            100.0 * edge / peak,
            100.0 * EDGE_DECAY_FRACTION
        )));
    }
    let mut im = hilbert_fft(re);
    // Truncation repair: model each tail as C/(ω−c) (the generic decay of
    // a dispersive real part) and add its half-line dispersion integral.
    // A fitted pole landing inside the extrapolated half-line means the
    // samples do not follow that decay (oscillating tails do this); the
    // repair integral would pass through the pole, so skip it instead.
    let m = (n / 10).max(4).min(n / 2);
    let h = grid.step();
    let w_hi = grid.hi() + 0.5 * h;
    let w_lo = grid.lo() - 0.5 * h;
    let right = tail_fit(grid, re, n - m..n).filter(|(_, pole)| *pole < w_hi);
    let left = tail_fit(grid, re, 0..m).filter(|(_, pole)| *pole > w_lo);
    for (i, v) in im.iter_mut().enumerate() {
        let omega = grid.value(i);
        if let Some((c_coef, c_pole)) = right {
            // (1/π) ∫_{W}^{∞} [C/(ω′−c)] / (ω−ω′) dω′
            *v += if (omega - c_pole).abs() < 0.25 * h {
                -c_coef / (std::f64::consts::PI * (w_hi - c_pole))
            } else {
                c_coef / (std::f64::consts::PI * (omega - c_pole))
                    * ((w_hi - omega) / (w_hi - c_pole)).ln()
            };
        }
        if let Some((c_coef, c_pole)) = left {
            // (1/π) ∫_{−∞}^{W} [C/(ω′−c)] / (ω−ω′) dω′
            *v += if (omega - c_pole).abs() < 0.25 * h {
                -c_coef / (std::f64::consts::PI * (c_pole - w_lo))
            } else {
                c_coef / (std::f64::consts::PI * (omega - c_pole))
                    * ((c_pole - w_lo) / (omega - w_lo)).ln()
            };
        }
    }
    Ok(im)
}

/// Continuous phase profile of a complex spectrum in radians: principal
/// arguments unwrapped by removing 2π jumps between neighbouring samples.
/// Useful for reading scattering-phase excursions relative to the
/// far-detuned background, where principal values alone would alias.
pub fn unwrap_phases(values: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut offset = 0.0;
    let mut prev = 0.0;
    for (i, v) in values.iter().enumerate() {
        let raw = v.arg();
        if i > 0 {
            let mut jump = raw + offset - prev;
            while jump > std::f64::consts::PI {
                offset -= 2.0 * std::f64::consts::PI;
                jump -= 2.0 * std::f64::consts::PI;
            }
            while jump < -std::f64::consts::PI {
                offset += 2.0 * std::f64::consts::PI;
                jump += 2.0 * std::f64::consts::PI;
            }
        }
        prev = raw + offset;
        out.push(prev);
    }
    out
}

/// Least-squares fit of f ≈ C/(ω−c) over the index range, linearized as
/// f·ω = C + c·f. Returns None when the samples carry no usable signal.
fn tail_fit(grid: &Grid, values: &[f64], range: std::ops::Range<usize>) -> Option<(f64, f64)> {
    let xs: Vec<f64> = range.clone().map(|i| values[i]).collect();
    let ys: Vec<f64> = range.map(|i| values[i] * grid.value(i)).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx < 1e-30 {
        // Flat samples: a pure C/ω tail (c = 0) if there is any magnitude.
        return if my.abs() > 0.0 { Some((my, 0.0)) } else { None };
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Some((intercept, slope))
}

/// Single-photon coefficients recovered from a transmission intensity
/// spectrum.
#[derive(Debug, Clone)]
pub struct SingleReconstruction {
    /// The emitter response G(ω).
    pub response: ComplexSpectrum,
    pub t: ComplexSpectrum,
    pub r: ComplexSpectrum,
}

/// Inverts a weak-drive transmission spectrum I_t = 1 + Re{R·G(ω)} into
/// the emitter response and both scattering coefficients. The coupling
/// fraction and interface geometry must be known (from fitting); the
/// missing imaginary part comes from the dispersion relation.
pub fn reconstruct_single(
    grid: &Grid,
    i_t: &[f64],
    beta: f64,
    geometry: &ScatterGeometry,
) -> Result<SingleReconstruction, CoreError> {
    if i_t.len() != grid.len() {
        return Err(CoreError::LengthMismatch {
            grid: grid.len(),
            what: "transmission spectrum",
            len: i_t.len(),
        });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(CoreError::Domain {
            field: "beta",
            message: "must lie in [0, 1]",
            value: beta,
        });
    }
    let z = geometry.z;
    let znsq = geometry.z_norm_sq();
    let weight = (beta / znsq) * (beta - 2.0 * z);
    if weight.norm() < 1e-12 {
        return Err(CoreError::Singular(format!(
            "degenerate response weight R = {weight} (β−2z ≈ 0); the intensity carries no \
             first-order emitter signature"
        )));
    }
    let re_rg: Vec<f64> = i_t.iter().map(|v| v - 1.0).collect();
    let im_rg = kramers_kronig(grid, &re_rg)?;
    let mut response = Vec::with_capacity(grid.len());
    let mut t = Vec::with_capacity(grid.len());
    let mut r = Vec::with_capacity(grid.len());
    for (re, im) in re_rg.iter().zip(&im_rg) {
        let g = Complex64::new(*re, *im) / weight;
        let tv = z * (1.0 - z * beta * g / znsq);
        response.push(g);
        t.push(tv);
        r.push(tv - 1.0);
    }
    Ok(SingleReconstruction {
        response: ComplexSpectrum::new(grid.clone(), response)?,
        t: ComplexSpectrum::new(grid.clone(), t)?,
        r: ComplexSpectrum::new(grid.clone(), r)?,
    })
}

/// Recovers Re 𝒯(τ) at one drive frequency from the three correlation
/// traces and the single-photon coefficients there. The default variant
/// weights the correlation excess (g²−1); the as-printed variant weights
/// g² directly and inherits a ½(|t|²−|r|²)² offset.
pub fn reconstruct_t_real(
    g2_tt: &CorrelationTrace,
    g2_rr: &CorrelationTrace,
    g2_tr: &CorrelationTrace,
    t: Complex64,
    r: Complex64,
    variant: ReconstructionVariant,
) -> Result<Vec<f64>, CoreError> {
    for (trace, want) in [
        (g2_tt, PortPair::Tt),
        (g2_rr, PortPair::Rr),
        (g2_tr, PortPair::Tr),
    ] {
        if trace.pair != want {
            return Err(CoreError::Grid(format!(
                "trace for pair {} supplied where {} was expected",
                trace.pair.label(),
                want.label()
            )));
        }
    }
    if !g2_tt.tau.approx_eq(&g2_rr.tau) || !g2_tt.tau.approx_eq(&g2_tr.tau) {
        return Err(CoreError::Grid(
            "correlation traces must share one delay grid".into(),
        ));
    }
    let wt = 0.5 * t.norm_sqr() * t.norm_sqr();
    let wr = 0.5 * r.norm_sqr() * r.norm_sqr();
    let wtr = t.norm_sqr() * r.norm_sqr();
    let offset = match variant {
        ReconstructionVariant::ExcessWeighted => 1.0,
        ReconstructionVariant::AsPrinted => 0.0,
    };
    Ok(g2_tt
        .values
        .iter()
        .zip(&g2_rr.values)
        .zip(&g2_tr.values)
        .map(|((gtt, grr), gtr)| {
            wt * (gtt - offset) + wr * (grr - offset) - wtr * (gtr - offset)
        })
        .collect())
}

/// A complex two-photon kernel sampled on an (τ-row × ω-column) lattice.
#[derive(Debug, Clone)]
pub struct KernelField {
    pub omega: Grid,
    pub tau: Vec<f64>,
    /// Shape (tau.len(), omega.len()).
    pub values: Array2<Complex64>,
}

/// Completes Re 𝒯(ω, τ) into the full complex kernel, applying the
/// dispersion relation along ω independently at every delay row.
pub fn complete_t(
    omega: &Grid,
    tau: &[f64],
    re_rows: &Array2<f64>,
) -> Result<KernelField, CoreError> {
    if re_rows.nrows() != tau.len() || re_rows.ncols() != omega.len() {
        return Err(CoreError::Grid(format!(
            "kernel field shape ({}, {}) does not match {} delays × {} frequencies",
            re_rows.nrows(),
            re_rows.ncols(),
            tau.len(),
            omega.len()
        )));
    }
    let mut values = Array2::from_elem((tau.len(), omega.len()), Complex64::new(0.0, 0.0));
    for (k, row) in re_rows.outer_iter().enumerate() {
        let re: Vec<f64> = row.to_vec();
        let im = kramers_kronig(omega, &re)?;
        for (j, (rv, iv)) in re.iter().zip(&im).enumerate() {
            values[(k, j)] = Complex64::new(*rv, *iv);
        }
    }
    Ok(KernelField {
        omega: omega.clone(),
        tau: tau.to_vec(),
        values,
    })
}

/// Inverse Fourier transform of a completed kernel at fixed drive
/// frequency into the frequency-anticorrelated two-photon sector:
/// T(Δ) = (1/π) ∫ dτ e^{iΔτ} 𝒯(ω, τ) = (2/π) ∫₀^∞ dτ cos(Δτ) 𝒯(ω, τ),
/// using the even-delay symmetry of the kernel.
pub fn invert_to_sector(
    omega: f64,
    tau: &Grid,
    values: &[Complex64],
    delta: &Grid,
) -> Result<TwoPhotonSector, CoreError> {
    if values.len() != tau.len() {
        return Err(CoreError::LengthMismatch {
            grid: tau.len(),
            what: "kernel trace",
            len: values.len(),
        });
    }
    if tau.lo().abs() > 1e-12 {
        return Err(CoreError::Grid(format!(
            "kernel trace must start at zero delay, got {}",
            tau.lo()
        )));
    }
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if peak == 0.0 {
        return TwoPhotonSector::new(
            omega,
            delta.clone(),
            vec![Complex64::new(0.0, 0.0); delta.len()],
        );
    }
    let tail = values[values.len() - 1].norm();
    if tail >= 1e-4 * peak {
        return Err(CoreError::Grid(format!(
            "insufficient delay span: kernel magnitude {tail:.3e} at the last sample is \
             {:.2e} of the peak; extend the trace until it decays below 1e-4",
            tail / peak
        )));
    }
    let h = tau.step();
    let mut out = Vec::with_capacity(delta.len());
    for d in delta.values() {
        let integrand: Vec<Complex64> = tau
            .values()
            .zip(values)
            .map(|(tv, kv)| kv * (d * tv).cos())
            .collect();
        out.push(simpson_complex(&integrand, h) * (2.0 / std::f64::consts::PI));
    }
    TwoPhotonSector::new(omega, delta.clone(), out)
}
