//! Weighted nonlinear least squares: extracts the coupling fraction, pure
//! dephasing, interface asymmetry, power conversion, both spectral-diffusion
//! widths, and the reflection background from a measurement set, holding the
//! independently measured total decay rate fixed. Supplies 95% confidence
//! intervals from the linearized covariance, with a profile-likelihood
//! fallback for estimates pinned at a box bound.

use crate::core::{
    CoreError, DriveSpec, EmitterParams, MeasurementSet, NoiseModel, Port,
};
use crate::dynamics;
use crate::imperfect::{self, ChainOrder, DEFAULT_QUADRATURE_NODES};
use num_complex::Complex64;
use thiserror::Error;

/// Number of adjustable parameters; see [`FitParam`] for the order.
pub const FIT_PARAM_COUNT: usize = 7;

/// 95% two-sided normal quantile used for linearized intervals.
const Z95: f64 = 1.959963984540054;
/// 95% χ² threshold (one parameter) for profile-likelihood intervals.
const CHI2_95: f64 = 3.841458820694124;

/// The adjustable parameters, in vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitParam {
    /// Waveguide coupling fraction β.
    Beta,
    /// Pure-dephasing rate γ_d (rad/ns).
    GammaD,
    /// Fano interface parameter ξ.
    Xi,
    /// Power conversion η in Ω = √(ηP) ((rad/ns)²/µW).
    Eta,
    /// Spectral-diffusion width for intensity scans (rad/ns).
    SigmaShort,
    /// Spectral-diffusion width for correlation acquisitions (rad/ns).
    SigmaLong,
    /// Uncorrelated-background fraction of the rr histogram.
    BackgroundRr,
}

impl FitParam {
    pub const ALL: [FitParam; FIT_PARAM_COUNT] = [
        FitParam::Beta,
        FitParam::GammaD,
        FitParam::Xi,
        FitParam::Eta,
        FitParam::SigmaShort,
        FitParam::SigmaLong,
        FitParam::BackgroundRr,
    ];

    pub fn index(self) -> usize {
        match self {
            FitParam::Beta => 0,
            FitParam::GammaD => 1,
            FitParam::Xi => 2,
            FitParam::Eta => 3,
            FitParam::SigmaShort => 4,
            FitParam::SigmaLong => 5,
            FitParam::BackgroundRr => 6,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FitParam::Beta => "beta",
            FitParam::GammaD => "gamma_d",
            FitParam::Xi => "xi",
            FitParam::Eta => "eta",
            FitParam::SigmaShort => "sigma_short",
            FitParam::SigmaLong => "sigma_long",
            FitParam::BackgroundRr => "b_rr",
        }
    }
}

/// Residual weighting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// σ_point = value/√counts wherever counts accompany a record
    /// (shot-noise weighting); records without counts fall back to unit σ.
    #[default]
    PoissonCounts,
    /// Unit σ everywhere; the covariance is then rescaled by the reduced χ².
    Uniform,
}

/// Everything the optimizer needs besides the data.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Which parameters vary; the rest stay at their initial values.
    pub free: [bool; FIT_PARAM_COUNT],
    pub init: [f64; FIT_PARAM_COUNT],
    pub lower: [f64; FIT_PARAM_COUNT],
    pub upper: [f64; FIT_PARAM_COUNT],
    /// Infinity norm of the projected gradient at which to stop.
    pub gradient_tol: f64,
    /// Relative step length below which the iteration counts as stalled.
    pub step_tol: f64,
    pub max_iterations: usize,
    pub weighting: Weighting,
    /// Gauss-Hermite nodes for every spectral-diffusion layer.
    pub quadrature_nodes: usize,
    /// Fixed parts of the measurement chain: detector response width and
    /// the non-fitted background fractions. The fitted σ_short, σ_long and
    /// rr background overwrite their fields during evaluation.
    pub base_noise: NoiseModel,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            free: [false; FIT_PARAM_COUNT],
            init: [0.9, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0],
            lower: [0.0, 0.0, -5.0, 1e-6, 0.0, 0.0, 0.0],
            upper: [1.0, f64::INFINITY, 5.0, 100.0, 50.0, 50.0, 1.0],
            gradient_tol: 1e-8,
            step_tol: 1e-12,
            max_iterations: 200,
            weighting: Weighting::default(),
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
            base_noise: NoiseModel::ideal(),
        }
    }
}

impl FitConfig {
    /// Convenience mask builder.
    pub fn mask(free: &[FitParam]) -> [bool; FIT_PARAM_COUNT] {
        let mut out = [false; FIT_PARAM_COUNT];
        for p in free {
            out[p.index()] = true;
        }
        out
    }
}

/// Optimizer termination state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitStatus {
    /// Projected gradient below tolerance.
    Converged { iterations: usize },
    /// Step length collapsed before the gradient test fired; the returned
    /// point is the best found and usually still a minimum.
    StepStalled { iterations: usize },
    /// Iteration budget exhausted.
    MaxIterations,
}

impl FitStatus {
    pub fn is_converged(&self) -> bool {
        !matches!(self, FitStatus::MaxIterations)
    }
}

/// Point estimates with uncertainty for all parameters (fixed ones carry
/// degenerate intervals and zero covariance rows).
#[derive(Debug, Clone)]
pub struct FitResult {
    pub estimates: [f64; FIT_PARAM_COUNT],
    /// 95% confidence interval per parameter, guaranteed to contain the
    /// point estimate.
    pub intervals: [(f64, f64); FIT_PARAM_COUNT],
    pub free: [bool; FIT_PARAM_COUNT],
    /// ‖weighted residual‖₂ at the solution.
    pub residual_norm: f64,
    /// Number of residual points.
    pub points: usize,
    /// Symmetric PSD covariance estimate on the full parameter order.
    pub covariance: [[f64; FIT_PARAM_COUNT]; FIT_PARAM_COUNT],
    pub status: FitStatus,
    /// Free parameters whose estimate landed on a box bound; their
    /// intervals come from the profile likelihood.
    pub at_bounds: Vec<FitParam>,
}

/// Fit-level failures.
#[derive(Debug, Error)]
pub enum FitError {
    #[error("model evaluation failed at {context}: {source}")]
    Model {
        context: String,
        #[source]
        source: CoreError,
    },
    #[error("parameters not identifiable: {0}")]
    Identifiability(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

fn sigma_point(value: f64, counts: Option<f64>, weighting: Weighting) -> f64 {
    match weighting {
        Weighting::Uniform => 1.0,
        Weighting::PoissonCounts => match counts {
            None => 1.0,
            // Shot noise on a normalized value c/scale is value/√c; bins
            // with zero recorded counts get a one-count floor.
            Some(c) => value.abs().max(1e-3) / c.max(1.0).sqrt(),
        },
    }
}

/// Concatenated weighted residuals (model − data)/σ over every record:
/// intensity scans first (through the σ_short spectral average, with
/// Ω = √(ηP)), then correlation histograms (through the full measurement
/// chain). Evaluation errors carry the record and point they occurred at.
pub fn model_residuals(
    data: &MeasurementSet,
    params: &EmitterParams,
    noise: &NoiseModel,
    eta: f64,
    weighting: Weighting,
    nodes: usize,
) -> Result<Vec<f64>, FitError> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(FitError::Core(CoreError::Domain {
            field: "eta",
            message: "must be positive and finite",
            value: eta,
        }));
    }
    let mut residuals = Vec::new();
    for (k, scan) in data.intensity_scans.iter().enumerate() {
        let rabi = Complex64::new((eta * scan.power_uw).sqrt(), 0.0);
        let model = imperfect::spectral_average_intensity(
            |omega| dynamics::intensity(params, &DriveSpec::new(omega, rabi), Port::T),
            noise.sigma_short,
            nodes,
            &scan.grid,
        )
        .map_err(|source| FitError::Model {
            context: format!("intensity scan #{k} ({} µW)", scan.power_uw),
            source,
        })?;
        if scan.values.len() != scan.grid.len() {
            return Err(FitError::Core(CoreError::LengthMismatch {
                grid: scan.grid.len(),
                what: "intensity values",
                len: scan.values.len(),
            }));
        }
        for (i, (m, v)) in model.iter().zip(&scan.values).enumerate() {
            let counts = scan.counts.as_ref().map(|c| c[i]);
            residuals.push((m - v) / sigma_point(*v, counts, weighting));
        }
    }
    for (k, record) in data.g2_traces.iter().enumerate() {
        let rabi = Complex64::new((eta * record.power_uw).sqrt(), 0.0);
        let drive = DriveSpec::new(record.drive_detuning, rabi);
        let model = imperfect::measured_g2_trace(
            params,
            &drive,
            record.trace.pair,
            noise,
            nodes,
            &record.trace.tau,
            ChainOrder::default(),
        )
        .map_err(|source| FitError::Model {
            context: format!(
                "g2 trace #{k} (pair {}, {} µW)",
                record.trace.pair.label(),
                record.power_uw
            ),
            source,
        })?;
        for (i, (m, v)) in model.values.iter().zip(&record.trace.values).enumerate() {
            let counts = record.coincidences.as_ref().map(|c| c[i]);
            residuals.push((m - v) / sigma_point(*v, counts, weighting));
        }
    }
    Ok(residuals)
}

/// Shared fit context: full-vector evaluation with fixed parameters merged.
struct Problem<'a> {
    data: &'a MeasurementSet,
    config: &'a FitConfig,
}

impl Problem<'_> {
    fn unpack(&self, x: &[f64; FIT_PARAM_COUNT]) -> Result<(EmitterParams, NoiseModel, f64), FitError> {
        let params = EmitterParams::new(x[0], self.data.gamma_tot, x[1], 0.0, x[2])?;
        let mut noise = self.config.base_noise;
        noise.sigma_short = x[4];
        noise.sigma_long = x[5];
        noise.background.rr = x[6];
        Ok((params, noise, x[3]))
    }

    fn residuals(&self, x: &[f64; FIT_PARAM_COUNT]) -> Result<Vec<f64>, FitError> {
        let (params, noise, eta) = self.unpack(x)?;
        model_residuals(
            self.data,
            &params,
            &noise,
            eta,
            self.config.weighting,
            self.config.quadrature_nodes,
        )
    }

    fn cost(&self, x: &[f64; FIT_PARAM_COUNT]) -> Result<f64, FitError> {
        Ok(0.5 * sum_sq(&self.residuals(x)?))
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Central-difference step size for one coordinate.
fn fd_step(x: f64) -> f64 {
    6e-6 * x.abs().max(1.0)
}

/// Jacobian of the residual vector over the free coordinates by central
/// differences, switching to one-sided differences against a box bound.
/// Columns are indexed by position within `free_idx`.
fn jacobian(
    problem: &Problem,
    x: &[f64; FIT_PARAM_COUNT],
    free_idx: &[usize],
    m: usize,
) -> Result<Vec<Vec<f64>>, FitError> {
    let mut cols = Vec::with_capacity(free_idx.len());
    for &j in free_idx {
        let h = fd_step(x[j]);
        let lo = problem.config.lower[j];
        let hi = problem.config.upper[j];
        let (a, b) = if x[j] + h > hi {
            (x[j] - h, x[j])
        } else if x[j] - h < lo {
            (x[j], x[j] + h)
        } else {
            (x[j] - h, x[j] + h)
        };
        let mut xa = *x;
        xa[j] = a;
        let ra = problem.residuals(&xa)?;
        let mut xb = *x;
        xb[j] = b;
        let rb = problem.residuals(&xb)?;
        if ra.len() != m || rb.len() != m {
            return Err(FitError::Core(CoreError::Grid(
                "residual length changed during differentiation".into(),
            )));
        }
        let inv = 1.0 / (b - a);
        cols.push(
            ra.iter()
                .zip(&rb)
                .map(|(va, vb)| (vb - va) * inv)
                .collect(),
        );
    }
    Ok(cols)
}

/// Solves the symmetric system A δ = b in place (partial-pivot Gauss);
/// returns None when A is numerically singular.
fn solve_small(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[piv][k].abs() < 1e-300 {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    Some(x)
}

/// Inverse of a small symmetric matrix; None when singular.
fn invert_small(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv = vec![vec![0.0; n]; n];
    for c in 0..n {
        let mut acol = a.to_vec();
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let x = solve_small(&mut acol, &mut e)?;
        for r in 0..n {
            inv[r][c] = x[r];
        }
    }
    // Symmetrize against elimination round-off.
    for r in 0..n {
        for c in r + 1..n {
            let s = 0.5 * (inv[r][c] + inv[c][r]);
            inv[r][c] = s;
            inv[c][r] = s;
        }
    }
    Some(inv)
}

struct LmOutcome {
    x: [f64; FIT_PARAM_COUNT],
    cost: f64,
    status: FitStatus,
    points: usize,
}

/// Projected Levenberg-Marquardt over the free coordinates.
fn levenberg_marquardt(
    problem: &Problem,
    start: &[f64; FIT_PARAM_COUNT],
    free_idx: &[usize],
    gradient_tol: f64,
    step_tol: f64,
    max_iterations: usize,
) -> Result<LmOutcome, FitError> {
    let cfg = problem.config;
    let mut x = *start;
    let mut r = problem.residuals(&x)?;
    let m = r.len();
    let p = free_idx.len();
    if m < p {
        return Err(FitError::Identifiability(format!(
            "{m} residual points cannot constrain {p} free parameters"
        )));
    }
    let mut cost = 0.5 * sum_sq(&r);
    let mut lambda = 1e-3;
    let mut status = FitStatus::MaxIterations;
    for iter in 0..max_iterations {
        let jac = jacobian(problem, &x, free_idx, m)?;
        // Gradient of ½‖r‖² and the Gauss-Newton normal matrix.
        let g: Vec<f64> = jac
            .iter()
            .map(|col| col.iter().zip(&r).map(|(a, b)| a * b).sum())
            .collect();
        let mut a = vec![vec![0.0; p]; p];
        for i in 0..p {
            for j in i..p {
                let s: f64 = jac[i].iter().zip(&jac[j]).map(|(u, v)| u * v).sum();
                a[i][j] = s;
                a[j][i] = s;
            }
        }
        // Projected-gradient convergence test: components pushing through an
        // active bound do not count.
        let mut pg = 0.0f64;
        for (slot, &j) in free_idx.iter().enumerate() {
            let at_lo = x[j] <= cfg.lower[j] && g[slot] > 0.0;
            let at_hi = x[j] >= cfg.upper[j] && g[slot] < 0.0;
            if !at_lo && !at_hi {
                pg = pg.max(g[slot].abs());
            }
        }
        if pg < gradient_tol {
            status = FitStatus::Converged { iterations: iter };
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut lhs = a.clone();
            for i in 0..p {
                lhs[i][i] += lambda * a[i][i].max(1e-12);
            }
            let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            let delta = match solve_small(&mut lhs, &mut rhs) {
                Some(d) => d,
                None => {
                    lambda *= 8.0;
                    continue;
                }
            };
            let mut trial = x;
            for (slot, &j) in free_idx.iter().enumerate() {
                trial[j] = clip(x[j] + delta[slot], cfg.lower[j], cfg.upper[j]);
            }
            let step: f64 = free_idx
                .iter()
                .map(|&j| (trial[j] - x[j]).powi(2))
                .sum::<f64>()
                .sqrt();
            let xnorm: f64 = free_idx.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt();
            if step < step_tol * (xnorm + step_tol) {
                status = FitStatus::StepStalled { iterations: iter };
                accepted = false;
                break;
            }
            let trial_r = problem.residuals(&trial)?;
            let trial_cost = 0.5 * sum_sq(&trial_r);
            if trial_cost < cost {
                x = trial;
                r = trial_r;
                cost = trial_cost;
                lambda = (lambda * 0.25).max(1e-14);
                accepted = true;
                break;
            }
            lambda *= 8.0;
        }
        if matches!(status, FitStatus::StepStalled { .. }) {
            break;
        }
        if !accepted {
            // The damping climb found no descent: treat as stalled.
            status = FitStatus::StepStalled { iterations: iter };
            break;
        }
    }
    Ok(LmOutcome {
        x,
        cost,
        status,
        points: m,
    })
}

/// Profile-likelihood 95% bound for a parameter stuck at a box bound:
/// walks the parameter into the interior, re-optimizing the remaining free
/// parameters, until the total χ² rises by the 95% threshold, then refines
/// by bisection. Returns the interior interval endpoint.
fn profile_bound(
    problem: &Problem,
    solution: &[f64; FIT_PARAM_COUNT],
    j: usize,
    other_free: &[usize],
    chi2_min: f64,
    toward_upper: bool,
) -> Result<f64, FitError> {
    let cfg = problem.config;
    let target = chi2_min + CHI2_95;
    let far_limit = if toward_upper {
        cfg.upper[j]
    } else {
        cfg.lower[j]
    };
    let chi2_at = |theta: f64, warm: &[f64; FIT_PARAM_COUNT]| -> Result<(f64, [f64; FIT_PARAM_COUNT]), FitError> {
        let mut x = *warm;
        x[j] = theta;
        if other_free.is_empty() {
            return Ok((2.0 * problem.cost(&x)?, x));
        }
        let out = levenberg_marquardt(
            problem,
            &x,
            other_free,
            cfg.gradient_tol * 10.0,
            cfg.step_tol * 10.0,
            60,
        )?;
        Ok((2.0 * out.cost, out.x))
    };
    let mut h = 0.05 * solution[j].abs().max(0.05);
    let mut inner = solution[j];
    let mut warm = *solution;
    let mut outer = None;
    for _ in 0..40 {
        let candidate = if toward_upper {
            (inner + h).min(far_limit)
        } else {
            (inner - h).max(far_limit)
        };
        let (chi2, w) = chi2_at(candidate, &warm)?;
        if chi2 >= target {
            outer = Some(candidate);
            break;
        }
        inner = candidate;
        warm = w;
        if candidate == far_limit {
            break;
        }
        h *= 2.0;
    }
    let Some(mut outer) = outer else {
        // The likelihood never crossed the threshold inside the box: the
        // interval is censored at the far bound.
        return Ok(far_limit);
    };
    for _ in 0..20 {
        let mid = 0.5 * (inner + outer);
        let (chi2, w) = chi2_at(mid, &warm)?;
        if chi2 >= target {
            outer = mid;
        } else {
            inner = mid;
            warm = w;
        }
        if (outer - inner).abs() < 1e-4 * outer.abs().max(1e-3) {
            break;
        }
    }
    Ok(outer)
}

/// Runs the weighted fit. Preconditions: η free requires at least two
/// distinct scan powers; every free parameter must move the model
/// somewhere in the data (checked through the initial Jacobian).
pub fn fit(data: &MeasurementSet, config: &FitConfig) -> Result<FitResult, FitError> {
    for j in 0..FIT_PARAM_COUNT {
        if !(config.lower[j] <= config.upper[j]) {
            return Err(FitError::Core(CoreError::Domain {
                field: FitParam::ALL[j].label(),
                message: "lower bound exceeds upper bound",
                value: config.lower[j],
            }));
        }
    }
    let free_idx: Vec<usize> = (0..FIT_PARAM_COUNT).filter(|&j| config.free[j]).collect();
    if free_idx.is_empty() {
        return Err(FitError::Identifiability(
            "no free parameters requested".into(),
        ));
    }
    if config.free[FitParam::Eta.index()] {
        let mut powers: Vec<f64> = data.intensity_scans.iter().map(|s| s.power_uw).collect();
        powers.sort_by(f64::total_cmp);
        powers.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * a.abs().max(1.0));
        if powers.len() < 2 {
            return Err(FitError::Identifiability(
                "fitting eta needs intensity scans at two or more distinct powers \
                 (a single power cannot separate eta from beta)"
                    .into(),
            ));
        }
    }
    let problem = Problem { data, config };
    let mut start = config.init;
    for j in 0..FIT_PARAM_COUNT {
        start[j] = clip(start[j], config.lower[j], config.upper[j]);
    }
    // No-leverage screen: a free parameter whose Jacobian column vanishes
    // cannot be determined by this data set.
    let r0 = problem.residuals(&start)?;
    let j0 = jacobian(&problem, &start, &free_idx, r0.len())?;
    let max_col = j0
        .iter()
        .map(|c| sum_sq(c).sqrt())
        .fold(0.0f64, f64::max);
    for (slot, &j) in free_idx.iter().enumerate() {
        let norm = sum_sq(&j0[slot]).sqrt();
        if norm <= 1e-10 * max_col.max(1e-30) {
            return Err(FitError::Identifiability(format!(
                "parameter {} has no leverage on the supplied data (zero Jacobian column)",
                FitParam::ALL[j].label()
            )));
        }
    }
    let outcome = levenberg_marquardt(
        &problem,
        &start,
        &free_idx,
        config.gradient_tol,
        config.step_tol,
        config.max_iterations,
    )?;
    let x = outcome.x;
    let m = outcome.points;
    let p = free_idx.len();

    // Linearized covariance at the solution.
    let r = problem.residuals(&x)?;
    let jac = jacobian(&problem, &x, &free_idx, m)?;
    let mut a = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in i..p {
            let s: f64 = jac[i].iter().zip(&jac[j]).map(|(u, v)| u * v).sum();
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    let mut cov_free = invert_small(&a).ok_or_else(|| {
        FitError::Identifiability(
            "Jacobian is rank deficient at the solution; free fewer parameters or supply \
             more data"
                .into(),
        )
    })?;
    if matches!(config.weighting, Weighting::Uniform) && m > p {
        // Unit weights carry no scale; estimate it from the residuals.
        let s2 = sum_sq(&r) / (m - p) as f64;
        for row in &mut cov_free {
            for v in row.iter_mut() {
                *v *= s2;
            }
        }
    }

    // Bound detection and intervals.
    let mut at_bounds = Vec::new();
    let mut intervals = [(0.0, 0.0); FIT_PARAM_COUNT];
    let mut estimates = x;
    for j in 0..FIT_PARAM_COUNT {
        if !config.free[j] {
            estimates[j] = start[j];
            intervals[j] = (start[j], start[j]);
        }
    }
    let chi2_min = 2.0 * outcome.cost;
    for (slot, &j) in free_idx.iter().enumerate() {
        let scale = x[j].abs().max(1.0);
        let on_lower = (x[j] - config.lower[j]).abs() <= 1e-9 * scale;
        let on_upper =
            config.upper[j].is_finite() && (config.upper[j] - x[j]).abs() <= 1e-9 * scale;
        if on_lower || on_upper {
            at_bounds.push(FitParam::ALL[j]);
            let others: Vec<usize> = free_idx.iter().copied().filter(|&k| k != j).collect();
            let interior = profile_bound(&problem, &x, j, &others, chi2_min, on_lower)?;
            intervals[j] = if on_lower {
                (x[j], interior.max(x[j]))
            } else {
                (interior.min(x[j]), x[j])
            };
        } else {
            let half = Z95 * cov_free[slot][slot].max(0.0).sqrt();
            intervals[j] = (x[j] - half, x[j] + half);
        }
    }

    let mut covariance = [[0.0; FIT_PARAM_COUNT]; FIT_PARAM_COUNT];
    for (si, &i) in free_idx.iter().enumerate() {
        for (sj, &j) in free_idx.iter().enumerate() {
            covariance[i][j] = cov_free[si][sj];
        }
    }
    Ok(FitResult {
        estimates,
        intervals,
        free: config.free,
        residual_norm: sum_sq(&r).sqrt(),
        points: m,
        covariance,
        status: outcome.status,
        at_bounds,
    })
}

/// One point of the resonant saturation curve.
#[derive(Debug, Clone, Copy)]
pub struct SaturationPoint {
    pub power_uw: f64,
    /// Saturation parameter n = 2|Ω|²/γ_tot².
    pub saturation: f64,
    /// Drift-averaged stationary transmission at the emitter frequency.
    pub intensity: f64,
}

/// Resonant transmission versus drive power: the dip fills in as the
/// emitter saturates, which pins η independently of the scan shapes.
pub fn saturation_curve(
    powers_uw: &[f64],
    params: &EmitterParams,
    noise: &NoiseModel,
    eta: f64,
    nodes: usize,
) -> Result<Vec<SaturationPoint>, CoreError> {
    let mut out = Vec::with_capacity(powers_uw.len());
    for &p in powers_uw {
        if !(p > 0.0) || !p.is_finite() {
            return Err(CoreError::Domain {
                field: "power_uw",
                message: "must be positive and finite",
                value: p,
            });
        }
        let drive = DriveSpec::new(params.omega0, Complex64::new((eta * p).sqrt(), 0.0));
        let intensity =
            imperfect::averaged_intensity(params, &drive, Port::T, noise.sigma_short, nodes)?;
        out.push(SaturationPoint {
            power_uw: p,
            saturation: drive.saturation(params.gamma_tot),
            intensity,
        });
    }
    Ok(out)
}
