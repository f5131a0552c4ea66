//! Internal numerical toolbox: small complex dense matrices, a 4×4 matrix
//! exponential, Gauss-Hermite quadrature, FFT-based Hilbert transform and
//! Gaussian convolution, and composite Simpson integration.

use num_complex::Complex64;
use rustfft::{num_complex::Complex as FftComplex, FftPlanner};

pub type C64 = Complex64;

pub const C_ZERO: C64 = Complex64::new(0.0, 0.0);
pub const C_ONE: C64 = Complex64::new(1.0, 0.0);

// ---------------------------------------------------------------------------
// 2×2 and 4×4 complex matrices
// ---------------------------------------------------------------------------

/// A 2×2 complex matrix (row-major) over the {ground, excited} basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M2(pub [[C64; 2]; 2]);

impl M2 {
    pub fn zeros() -> Self {
        M2([[C_ZERO; 2]; 2])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        m.0[0][0] = C_ONE;
        m.0[1][1] = C_ONE;
        m
    }

    /// Lowering operator σ⁻ = |g⟩⟨e|.
    pub fn sigma_minus() -> Self {
        let mut m = Self::zeros();
        m.0[0][1] = C_ONE;
        m
    }

    /// Raising operator σ⁺ = |e⟩⟨g|.
    pub fn sigma_plus() -> Self {
        let mut m = Self::zeros();
        m.0[1][0] = C_ONE;
        m
    }

    /// Excited-state projector σ⁺σ⁻.
    pub fn excited_projector() -> Self {
        let mut m = Self::zeros();
        m.0[1][1] = C_ONE;
        m
    }

    pub fn mul(&self, rhs: &M2) -> M2 {
        let mut out = M2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = C_ZERO;
                for k in 0..2 {
                    s += self.0[i][k] * rhs.0[k][j];
                }
                out.0[i][j] = s;
            }
        }
        out
    }

    pub fn adjoint(&self) -> M2 {
        let mut out = M2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] = self.0[j][i].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> M2 {
        let mut out = *self;
        out.0[0][1] = self.0[1][0];
        out.0[1][0] = self.0[0][1];
        out
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, s: C64) -> M2 {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn add(&self, rhs: &M2) -> M2 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }

    /// Column-stacking vectorization: [ρ00, ρ10, ρ01, ρ11].
    pub fn vectorize(&self) -> [C64; 4] {
        [self.0[0][0], self.0[1][0], self.0[0][1], self.0[1][1]]
    }

    pub fn from_vector(v: &[C64; 4]) -> M2 {
        M2([[v[0], v[2]], [v[1], v[3]]])
    }
}

/// A 4×4 complex matrix (row-major), used for superoperators on vectorized
/// 2×2 operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M4(pub [[C64; 4]; 4]);

impl M4 {
    pub fn zeros() -> Self {
        M4([[C_ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = C_ONE;
        }
        m
    }

    pub fn add(&self, rhs: &M4) -> M4 {
        let mut out = *self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> M4 {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn mul(&self, rhs: &M4) -> M4 {
        let mut out = M4::zeros();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                if a == C_ZERO {
                    continue;
                }
                for j in 0..4 {
                    out.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64; 4]) -> [C64; 4] {
        let mut out = [C_ZERO; 4];
        for i in 0..4 {
            let mut s = C_ZERO;
            for j in 0..4 {
                s += self.0[i][j] * v[j];
            }
            out[i] = s;
        }
        out
    }

    /// Maximum absolute column sum (induced 1-norm).
    pub fn one_norm(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..4 {
            let mut s = 0.0;
            for i in 0..4 {
                s += self.0[i][j].norm();
            }
            best = best.max(s);
        }
        best
    }

    /// Solves A·X = B by Gaussian elimination with partial pivoting.
    /// Returns None when A is numerically singular.
    pub fn solve_matrix(&self, b: &M4) -> Option<M4> {
        let mut a = self.0;
        let mut x = b.0;
        for col in 0..4 {
            let mut piv = col;
            let mut best = a[col][col].norm();
            for r in (col + 1)..4 {
                let m = a[r][col].norm();
                if m > best {
                    best = m;
                    piv = r;
                }
            }
            if best < 1e-300 {
                return None;
            }
            a.swap(col, piv);
            x.swap(col, piv);
            let inv = C_ONE / a[col][col];
            for j in col..4 {
                a[col][j] *= inv;
            }
            for j in 0..4 {
                x[col][j] *= inv;
            }
            for r in 0..4 {
                if r == col {
                    continue;
                }
                let f = a[r][col];
                if f == C_ZERO {
                    continue;
                }
                for j in col..4 {
                    let sub = f * a[col][j];
                    a[r][j] -= sub;
                }
                for j in 0..4 {
                    let sub = f * x[col][j];
                    x[r][j] -= sub;
                }
            }
        }
        Some(M4(x))
    }

    /// Matrix exponential by Padé(13) scaling and squaring. Robust at
    /// defective points where eigendecomposition fails.
    pub fn expm(&self) -> M4 {
        const THETA13: f64 = 5.371920351148152;
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        let norm = self.one_norm();
        let s = if norm > THETA13 {
            ((norm / THETA13).log2().ceil() as i32).max(0)
        } else {
            0
        };
        let a = self.scale(C64::new(0.5f64.powi(s), 0.0));
        let id = M4::identity();
        let a2 = a.mul(&a);
        let a4 = a2.mul(&a2);
        let a6 = a2.mul(&a4);
        let re = |x: f64| C64::new(x, 0.0);
        let u_inner = a6
            .scale(re(B[13]))
            .add(&a4.scale(re(B[11])))
            .add(&a2.scale(re(B[9])));
        let u = a.mul(
            &a6.mul(&u_inner)
                .add(&a6.scale(re(B[7])))
                .add(&a4.scale(re(B[5])))
                .add(&a2.scale(re(B[3])))
                .add(&id.scale(re(B[1]))),
        );
        let v_inner = a6
            .scale(re(B[12]))
            .add(&a4.scale(re(B[10])))
            .add(&a2.scale(re(B[8])));
        let v = a6
            .mul(&v_inner)
            .add(&a6.scale(re(B[6])))
            .add(&a4.scale(re(B[4])))
            .add(&a2.scale(re(B[2])))
            .add(&id.scale(re(B[0])));
        let denom = v.add(&u.scale(re(-1.0)));
        let numer = v.add(&u);
        let mut e = denom
            .solve_matrix(&numer)
            .expect("Padé denominator is nonsingular for scaled inputs");
        for _ in 0..s {
            e = e.mul(&e);
        }
        e
    }
}

/// Kronecker product of two 2×2 matrices: (x ⊗ y)[2p+q][2r+s] = x[p][r]·y[q][s].
pub fn kron(x: &M2, y: &M2) -> M4 {
    let mut out = M4::zeros();
    for p in 0..2 {
        for q in 0..2 {
            for r in 0..2 {
                for s in 0..2 {
                    out.0[2 * p + q][2 * r + s] = x.0[p][r] * y.0[q][s];
                }
            }
        }
    }
    out
}

/// Superoperator for X ↦ A·X·B under column-stacking: Bᵀ ⊗ A.
pub fn sandwich(a: &M2, b: &M2) -> M4 {
    kron(&b.transpose(), a)
}

/// Solves the trace-bordered least-squares system for the kernel of a
/// Liouvillian: minimizes ‖L·x‖² subject to the appended trace row = 1,
/// via the normal equations of the stacked 5×4 system. Returns None when
/// the normal matrix is numerically singular (non-unique steady state).
pub fn bordered_kernel_solve(l: &M4) -> Option<[C64; 4]> {
    // Stacked system A = [L; e_trace], b = (0,0,0,0,1).
    let trace_row = [C_ONE, C_ZERO, C_ZERO, C_ONE];
    // Normal matrix N = AᴴA, rhs y = Aᴴb = conj(trace_row) (b has single 1).
    let mut n = [[C_ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = C_ZERO;
            for r in 0..4 {
                s += l.0[r][i].conj() * l.0[r][j];
            }
            s += trace_row[i].conj() * trace_row[j];
            n[i][j] = s;
        }
    }
    let y = [trace_row[0].conj(), trace_row[1].conj(), trace_row[2].conj(), trace_row[3].conj()];
    solve4(n, y)
}

/// Dense 4×4 complex solve with partial pivoting.
fn solve4(mut a: [[C64; 4]; 4], mut b: [C64; 4]) -> Option<[C64; 4]> {
    let scale: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..4 {
        let mut piv = col;
        let mut best = a[col][col].norm();
        for r in (col + 1)..4 {
            let m = a[r][col].norm();
            if m > best {
                best = m;
                piv = r;
            }
        }
        if best < 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = C_ONE / a[col][col];
        for j in col..4 {
            a[col][j] *= inv;
        }
        b[col] *= inv;
        for r in 0..4 {
            if r == col {
                continue;
            }
            let f = a[r][col];
            if f == C_ZERO {
                continue;
            }
            for j in col..4 {
                let sub = f * a[col][j];
                a[r][j] -= sub;
            }
            let sub = f * b[col];
            b[r] -= sub;
        }
    }
    Some(b)
}

// ---------------------------------------------------------------------------
// Gauss-Hermite quadrature
// ---------------------------------------------------------------------------

/// Nodes and weights for ∫ f(x) e^{−x²} dx ≈ Σ wᵢ f(xᵢ), computed by Newton
/// iteration on the normalized Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one quadrature node");
    assert!(
        n <= 600,
        "node evaluation overflows beyond roughly 600 points"
    );
    // Normalized recurrence: h̃₀ = π^{-1/4}, h̃_k with bounded coefficients.
    // Returns (h̃_n(z), √(2n)·h̃_{n-1}(z)); the second is h̃_n′(z) at roots.
    let eval = |z: f64| -> (f64, f64) {
        let mut p1 = std::f64::consts::PI.powf(-0.25);
        let mut p2 = 0.0f64;
        for j in 1..=n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        }
        ((p1), ((2.0 * n as f64).sqrt() * p2))
    };
    // Local root spacing from the oscillator wavenumber √(2n+1−z²).
    let spacing = |z: f64| -> f64 {
        std::f64::consts::PI / (2.0 * n as f64 + 1.0 - z * z).max(1.0).sqrt()
    };
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = (n + 1) / 2;
    let nf = n as f64;
    // Roots are located largest-first. Plain Newton from asymptotic guesses
    // loses its basin for large n, so each root is first bracketed by a
    // sign change, marching down from just below the previous root, and
    // then polished with bisection-guarded Newton.
    for i in 0..m {
        let mut hi = if i == 0 {
            (2.0 * nf + 1.0).sqrt() + 1.0
        } else {
            nodes[i - 1] - 0.25 * spacing(nodes[i - 1])
        };
        let (mut fhi, _) = eval(hi);
        let mut lo = hi;
        let mut flo = fhi;
        let mut found = false;
        for _ in 0..200 {
            lo -= 0.4 * spacing(lo);
            let (f, _) = eval(lo);
            if f.signum() != fhi.signum() {
                flo = f;
                found = true;
                break;
            }
            hi = lo;
            fhi = f;
        }
        assert!(found, "failed to bracket quadrature node {i}");
        let mut z = 0.5 * (lo + hi);
        let mut pp = 0.0;
        for _ in 0..200 {
            let (f, d) = eval(z);
            pp = d;
            if f.signum() == flo.signum() {
                lo = z;
            } else {
                hi = z;
            }
            let newton = z - f / d;
            let next = if newton > lo.min(hi) && newton < lo.max(hi) {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let dz = (next - z).abs();
            z = next;
            if dz < 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        let w = 2.0 / (pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    // Descending nodes from the construction; return ascending.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Averages `f` over a centered Gaussian of standard deviation `sigma`:
/// ∫ dΔ P(Δ; σ) f(Δ). `sigma = 0` evaluates `f(0)`.
pub fn gaussian_average<E>(
    sigma: f64,
    n_nodes: usize,
    mut f: impl FnMut(f64) -> Result<f64, E>,
) -> Result<f64, E> {
    if sigma == 0.0 {
        return f(0.0);
    }
    let (x, w) = gauss_hermite(n_nodes);
    let norm = std::f64::consts::PI.sqrt();
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        acc += wi * f(std::f64::consts::SQRT_2 * sigma * xi)?;
    }
    Ok(acc / norm)
}

/// Verifies that a quadrature rule integrates the unit mass to within `tol`.
pub fn quadrature_mass_defect(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    (total / std::f64::consts::PI.sqrt() - 1.0).abs()
}

// ---------------------------------------------------------------------------
// FFT helpers
// ---------------------------------------------------------------------------

/// Discrete Hilbert transform H[f](x) = (1/π) PV ∫ f(s)/(x−s) ds of uniform
/// real samples, via an FFT sign kernel with ≥8× centered zero padding.
/// Assumes the input has decayed toward the window edges.
pub fn hilbert_fft(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let m = (8 * n).next_power_of_two();
    let offset = (m - n) / 2;
    let mut buf = vec![FftComplex::new(0.0, 0.0); m];
    for (i, &v) in values.iter().enumerate() {
        buf[offset + i] = FftComplex::new(v, 0.0);
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut buf);
    // Multiply by −i·sgn(ν): bins 1..m/2 are positive frequencies.
    for (k, v) in buf.iter_mut().enumerate() {
        let sgn = if k == 0 || k == m / 2 {
            0.0
        } else if k < m / 2 {
            1.0
        } else {
            -1.0
        };
        *v = FftComplex::new(0.0, -sgn) * *v;
    }
    let ifft = planner.plan_fft_inverse(m);
    ifft.process(&mut buf);
    let scale = 1.0 / m as f64;
    (0..n).map(|i| buf[offset + i].re * scale).collect()
}

/// Second, independent Hilbert discretization: the odd-offset sum
/// H[f](x_k) ≈ (2/π) Σ_{j odd ≥ 1} (f[k−j] − f[k+j]) / j, which sidesteps
/// the principal-value singularity by sampling only at odd lattice
/// offsets. Out-of-window samples count as zero. Used to cross-validate
/// the FFT route; interior accuracy is O(h²) for decayed inputs.
pub fn hilbert_kak(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut j = 1usize;
        loop {
            let lower = if k >= j { values[k - j] } else { 0.0 };
            let upper = if k + j < n { values[k + j] } else { 0.0 };
            if k < j && k + j >= n {
                break;
            }
            acc += (lower - upper) / j as f64;
            j += 2;
        }
        *o = 2.0 * acc / std::f64::consts::PI;
    }
    out
}

/// Gaussian convolution of uniform samples with endpoint replication over
/// 6σ, FFT implementation, unit DC gain. `sigma = 0` is the identity.
pub fn gaussian_convolve_fft(values: &[f64], dt: f64, sigma: f64) -> Vec<f64> {
    let n = values.len();
    if sigma == 0.0 || n == 0 {
        return values.to_vec();
    }
    let k = ((6.0 * sigma / dt).ceil() as usize).max(1);
    let kernel = normalized_gaussian_kernel(dt, sigma, k);
    let padded_len = n + 2 * k;
    let full_len = padded_len + 2 * k; // linear convolution length − 1 slack
    let m = full_len.next_power_of_two();
    let mut sig = vec![FftComplex::new(0.0, 0.0); m];
    for i in 0..padded_len {
        let v = if i < k {
            values[0]
        } else if i < k + n {
            values[i - k]
        } else {
            values[n - 1]
        };
        sig[i] = FftComplex::new(v, 0.0);
    }
    let mut ker = vec![FftComplex::new(0.0, 0.0); m];
    for (j, &g) in kernel.iter().enumerate() {
        ker[j] = FftComplex::new(g, 0.0);
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut sig);
    fft.process(&mut ker);
    for (a, b) in sig.iter_mut().zip(&ker) {
        *a *= *b;
    }
    let ifft = planner.plan_fft_inverse(m);
    ifft.process(&mut sig);
    let scale = 1.0 / m as f64;
    // Sample i of the original signal sits at padded index k+i; the kernel
    // center adds another k: output index 2k+i.
    (0..n).map(|i| sig[2 * k + i].re * scale).collect()
}

/// Direct-summation twin of [`gaussian_convolve_fft`] (reference path).
pub fn gaussian_convolve_direct(values: &[f64], dt: f64, sigma: f64) -> Vec<f64> {
    let n = values.len();
    if sigma == 0.0 || n == 0 {
        return values.to_vec();
    }
    let k = ((6.0 * sigma / dt).ceil() as usize).max(1);
    let kernel = normalized_gaussian_kernel(dt, sigma, k);
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (j, &g) in kernel.iter().enumerate() {
                let idx = i as isize + j as isize - k as isize;
                let v = if idx < 0 {
                    values[0]
                } else if idx as usize >= n {
                    values[n - 1]
                } else {
                    values[idx as usize]
                };
                acc += g * v;
            }
            acc
        })
        .collect()
}

fn normalized_gaussian_kernel(dt: f64, sigma: f64, k: usize) -> Vec<f64> {
    let mut kernel: Vec<f64> = (0..=2 * k)
        .map(|j| {
            let x = (j as f64 - k as f64) * dt / sigma;
            (-0.5 * x * x).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    for v in kernel.iter_mut() {
        *v /= total;
    }
    kernel
}

// ---------------------------------------------------------------------------
// Composite Simpson integration
// ---------------------------------------------------------------------------

/// Integrates uniformly sampled complex values with composite Simpson,
/// finishing with a 3/8 panel when the interval count is odd.
pub fn simpson_complex(values: &[C64], h: f64) -> C64 {
    let n = values.len();
    match n {
        0 => C_ZERO,
        1 => C_ZERO,
        2 => (values[0] + values[1]) * (0.5 * h),
        _ => {
            let intervals = n - 1;
            if intervals % 2 == 0 {
                simpson_even(values, h)
            } else if n >= 4 {
                let head = simpson_even(&values[..n - 3], h);
                let tail = (values[n - 4]
                    + values[n - 3] * 3.0
                    + values[n - 2] * 3.0
                    + values[n - 1])
                    * (3.0 * h / 8.0);
                head + tail
            } else {
                // n == 3 handled by simpson_even; n == 2 above.
                unreachable!("n >= 4 required for the 3/8 tail")
            }
        }
    }
}

fn simpson_even(values: &[C64], h: f64) -> C64 {
    let n = values.len();
    debug_assert!(n >= 3 && (n - 1) % 2 == 0);
    let mut acc = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc += *v * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

/// Real-valued composite Simpson.
pub fn simpson_real(values: &[f64], h: f64) -> f64 {
    let cv: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    simpson_complex(&cv, h).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn expm_matches_diagonal_closed_form() {
        let mut a = M4::zeros();
        for (i, lam) in [-0.3, 0.0, 1.7, -2.5].iter().enumerate() {
            a.0[i][i] = C64::new(*lam, 0.5 * *lam);
        }
        let e = a.expm();
        for (i, lam) in [-0.3, 0.0, 1.7, -2.5].iter().enumerate() {
            let expect = C64::new(*lam, 0.5 * *lam).exp();
            assert!((e.0[i][i] - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn expm_matches_nilpotent_series() {
        // Strictly upper triangular: exp = I + N + N²/2 + N³/6 exactly.
        let mut n = M4::zeros();
        n.0[0][1] = C64::new(2.0, -1.0);
        n.0[1][2] = C64::new(0.5, 0.25);
        n.0[2][3] = C64::new(-1.5, 3.0);
        let e = n.expm();
        let n2 = n.mul(&n);
        let n3 = n2.mul(&n);
        let expect = M4::identity()
            .add(&n)
            .add(&n2.scale(C64::new(0.5, 0.0)))
            .add(&n3.scale(C64::new(1.0 / 6.0, 0.0)));
        for i in 0..4 {
            for j in 0..4 {
                assert!((e.0[i][j] - expect.0[i][j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn expm_large_norm_uses_scaling() {
        let mut a = M4::zeros();
        a.0[0][0] = C64::new(-40.0, 25.0);
        a.0[1][1] = C64::new(-3.0, -60.0);
        a.0[2][2] = C64::new(12.0, 0.0);
        a.0[3][3] = C64::new(0.0, 80.0);
        a.0[0][3] = C64::new(5.0, 5.0);
        let e = a.expm();
        // Oracle: exp of the 2×2 block {0,3} is upper triangular with known
        // entries exp(λ0), exp(λ3), coupling c·(e^{λ0}−e^{λ3})/(λ0−λ3).
        let l0 = a.0[0][0];
        let l3 = a.0[3][3];
        let c = a.0[0][3];
        assert!((e.0[0][0] - l0.exp()).norm() < 1e-9 * l0.exp().norm().max(1.0));
        assert!((e.0[3][3] - l3.exp()).norm() < 1e-9);
        let coupling = c * (l0.exp() - l3.exp()) / (l0 - l3);
        assert!((e.0[0][3] - coupling).norm() < 1e-9 * coupling.norm().max(1.0));
    }

    #[test]
    fn gauss_hermite_moments() {
        for &n in &[5usize, 21, 41, 61] {
            let (x, w) = gauss_hermite(n);
            let sp = std::f64::consts::PI.sqrt();
            let m0: f64 = w.iter().sum();
            let m2: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi * xi).sum();
            let m4: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(4)).sum();
            assert_abs_diff_eq!(m0, sp, epsilon = 1e-12);
            assert_abs_diff_eq!(m2, sp / 2.0, epsilon = 1e-11);
            assert_abs_diff_eq!(m4, 3.0 * sp / 4.0, epsilon = 1e-10);
            assert!(quadrature_mass_defect(&w) < 1e-12);
        }
    }

    #[test]
    fn gauss_hermite_61_extreme_node() {
        // Largest node/weight frozen from an independent implementation.
        let (x, w) = gauss_hermite(61);
        assert_abs_diff_eq!(x[60], 10.252011649196145, epsilon = 1e-12);
        assert!((w[60] / 1.6610070517351815e-46 - 1.0).abs() < 1e-10);
        assert_abs_diff_eq!(x[30], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gauss_hermite_large_node_counts() {
        // High-order rules stay healthy: unit mass, strictly increasing
        // nodes, and extreme nodes frozen from an independent
        // implementation. Plain Newton root chasing breaks down at these
        // orders without the bracketing guard.
        for &n in &[101usize, 151, 201, 301, 501] {
            let (x, w) = gauss_hermite(n);
            assert!(quadrature_mass_defect(&w) < 1e-12, "n={n}");
            for pair in x.windows(2) {
                assert!(pair[0] < pair[1], "n={n}: nodes not increasing");
            }
        }
        let (x, w) = gauss_hermite(201);
        assert!((x[200] / 19.38970039958089 - 1.0).abs() < 1e-12);
        assert!((w[100] / 0.15649363599087426 - 1.0).abs() < 1e-12);
        let (x, _) = gauss_hermite(301);
        assert!((x[300] / 23.915925015759306 - 1.0).abs() < 1e-12);
        let (x, _) = gauss_hermite(501);
        assert!((x[500] / 31.08253456831973 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hilbert_kak_matches_lorentzian_and_fft_route() {
        let a = 1.0;
        let n = 4001;
        let span = 40.0;
        let xs: Vec<f64> = (0..n)
            .map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64)
            .collect();
        let re: Vec<f64> = xs.iter().map(|x| a / (a * a + x * x)).collect();
        let kak = hilbert_kak(&re);
        let fft = hilbert_fft(&re);
        let mut err_analytic = 0.0f64;
        let mut err_cross = 0.0f64;
        for ((x, k), f) in xs.iter().zip(&kak).zip(&fft) {
            if x.abs() < span / 2.0 {
                err_analytic = err_analytic.max((k - x / (a * a + x * x)).abs());
                err_cross = err_cross.max((k - f).abs());
            }
        }
        assert!(err_analytic < 1e-3, "vs analytic: {err_analytic}");
        assert!(err_cross < 1e-3, "vs FFT route: {err_cross}");
    }

    #[test]
    fn gaussian_average_polynomial_exact() {
        // ⟨Δ²⟩ over N(0,σ) = σ² (Gauss-Hermite is exact for polynomials).
        let sigma = 1.7;
        let v: f64 = gaussian_average(sigma, 21, |d| Ok::<f64, ()>(d * d)).unwrap();
        assert_abs_diff_eq!(v, sigma * sigma, epsilon = 1e-12);
        let id: f64 = gaussian_average(0.0, 21, |d| Ok::<f64, ()>(d + 3.0)).unwrap();
        assert_abs_diff_eq!(id, 3.0, epsilon = 0.0);
    }

    #[test]
    fn hilbert_of_lorentzian() {
        // H[a/(a²+x²)] = x/(a²+x²).
        let a = 1.0;
        let n = 4096;
        let span = 40.0;
        let xs: Vec<f64> = (0..n)
            .map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64)
            .collect();
        let re: Vec<f64> = xs.iter().map(|x| a / (a * a + x * x)).collect();
        let h = hilbert_fft(&re);
        let mut max_err = 0.0f64;
        for (x, hv) in xs.iter().zip(&h) {
            // Compare away from the edges where truncation bias dominates.
            if x.abs() < span / 2.0 {
                let expect = x / (a * a + x * x);
                max_err = max_err.max((hv - expect).abs());
            }
        }
        assert!(max_err < 5e-3, "interior Hilbert error {max_err}");
    }

    #[test]
    fn convolution_fft_matches_direct() {
        let n = 257;
        let dt = 0.01;
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                1.0 + 4.0 * (-3.0 * t).exp() * (7.0 * t).cos()
            })
            .collect();
        let fft = gaussian_convolve_fft(&values, dt, 0.2);
        let direct = gaussian_convolve_direct(&values, dt, 0.2);
        for (a, b) in fft.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn convolution_preserves_constants() {
        let values = vec![2.5; 101];
        let out = gaussian_convolve_fft(&values, 0.01, 0.15);
        for v in out {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn simpson_integrates_oscillatory_exponential() {
        // ∫₀^L e^{(i−1)t} dt closed form, on even and odd interval counts.
        let l = 3.0;
        for n in [201usize, 202] {
            let h = l / (n - 1) as f64;
            let vals: Vec<C64> = (0..n)
                .map(|i| (C64::new(-1.0, 1.0) * (i as f64 * h)).exp())
                .collect();
            let got = simpson_complex(&vals, h);
            let a = C64::new(-1.0, 1.0);
            let expect = ((a * l).exp() - 1.0) / a;
            assert!((got - expect).norm() < 1e-9, "n={n}: {got} vs {expect}");
        }
    }

    #[test]
    fn bordered_solve_recovers_decay_kernel() {
        // Pure decay Liouvillian: unique steady state = ground state.
        let sm = M2::sigma_minus();
        let p = M2::excited_projector();
        let id = M2::identity();
        let g = 2.0;
        let l = sandwich(&sm, &sm.adjoint())
            .scale(C64::new(g, 0.0))
            .add(&sandwich(&p, &id).scale(C64::new(-0.5 * g, 0.0)))
            .add(&sandwich(&id, &p).scale(C64::new(-0.5 * g, 0.0)));
        let x = bordered_kernel_solve(&l).unwrap();
        assert!((x[0] - C_ONE).norm() < 1e-12);
        for v in &x[1..] {
            assert!(v.norm() < 1e-12);
        }
    }
}

