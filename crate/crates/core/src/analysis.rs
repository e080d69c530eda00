//! Quantities extracted from echo series: the short-time Gaussian rate, the
//! long-time plateau, critical finite-size scaling, logarithmic decay and the
//! comparison of the Gaussian rate with nearest-neighbour concurrence.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::echo::EchoSeries;
use crate::error::{Error, Result};
use crate::exact::{concurrence, ground_state, loschmidt_echo_exact, magnetization, reduced_density_matrix, ExactOptions};
use crate::free_fermion::{
    build_quadratic_form, ground_state_correlations_with, nn_spin_correlators, transverse_magnetization, NearestNeighbour,
    ZeroModePolicy,
};
use crate::models::{BathSpec, Boundary, CouplingSpec, Family, QubitBranch};
use crate::sparse::MAX_SPARSE_SPINS;
use crate::tebd::{ground_state_imaginary_time, TebdParams};

/// Largest `1 − L` inside the Gaussian window.
pub const GAUSSIAN_DEPTH: f64 = 0.1;
/// Minimum number of positive times in the Gaussian window.
pub const GAUSSIAN_MIN_POINTS: usize = 10;
/// Below this `1 − L` everywhere the series counts as not decaying.
pub const NO_DECAY_THRESHOLD: f64 = 1e-12;
/// Log-decay fits explaining less than this fraction of the variance are flagged.
pub const LOG_FIT_MIN_R2: f64 = 0.9;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// `1 − L` never exceeded the no-decay threshold; `α` set to zero.
    NoDecay,
    /// Too few points with `1 − L ≤ 0.1`; the first ten were used.
    WidenedWindow,
    /// The model explains too little of the data.
    PoorFit,
    /// Iteration limit reached before the parameters settled.
    NotConverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub alpha: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// RMS of `ln L + α t²` over the window.
    pub rms_residual: f64,
    pub flags: Vec<FitFlag>,
}

/// Least-squares `ln L = −α t²` over the short-time window.
pub fn fit_gaussian_rate(series: &EchoSeries) -> Result<GaussianFit> {
    fit_gaussian_rate_points(&series.times, &series.values)
}

pub fn fit_gaussian_rate_points(times: &[f64], values: &[f64]) -> Result<GaussianFit> {
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::InvalidParameter("times and values must be non-empty and aligned".into()));
    }
    if times[0] != 0.0 || (values[0] - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("series must start at t = 0 with L = 1".into()));
    }
    let positive = times.len() - 1;
    if values.iter().all(|&v| 1.0 - v < NO_DECAY_THRESHOLD) {
        let hi = times.last().copied().unwrap_or(0.0);
        return Ok(GaussianFit {
            alpha: 0.0,
            window: (0.0, hi),
            points: positive,
            rms_residual: 0.0,
            flags: vec![FitFlag::NoDecay],
        });
    }
    let mut flags = Vec::new();
    let mut count = values[1..].iter().take_while(|&&v| 1.0 - v <= GAUSSIAN_DEPTH).count();
    if count < GAUSSIAN_MIN_POINTS {
        if positive < GAUSSIAN_MIN_POINTS {
            return Err(Error::SeriesTooShort(format!(
                "Gaussian fit needs {GAUSSIAN_MIN_POINTS} positive times, series has {positive}"
            )));
        }
        count = GAUSSIAN_MIN_POINTS;
        flags.push(FitFlag::WidenedWindow);
    }
    let window = 1..=count;
    if values[window.clone()].iter().any(|&v| v <= 0.0) {
        return Err(Error::Numerical("echo vanished inside the Gaussian window".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for k in window.clone() {
        let t2 = times[k] * times[k];
        num += t2 * values[k].ln();
        den += t2 * t2;
    }
    let alpha = (-num / den).max(0.0);
    let rms = (window
        .clone()
        .map(|k| (values[k].ln() + alpha * times[k] * times[k]).powi(2))
        .sum::<f64>()
        / count as f64)
        .sqrt();
    Ok(GaussianFit {
        alpha,
        window: (times[1], times[count]),
        points: count,
        rms_residual: rms,
        flags,
    })
}

/// Short-time grid used for `α`: 26 points on `[0, 0.05/|J|]`.
pub fn gaussian_times(bath: &BathSpec) -> Vec<f64> {
    let t_max = 0.05 / bath.j.abs();
    (0..26).map(|k| k as f64 * t_max / 25.0).collect()
}

/// `ε² (1 − ⟨σᶻ_site⟩²)` in the unperturbed ground state.
pub fn predicted_alpha(bath: &BathSpec, coupling: &CouplingSpec) -> Result<f64> {
    predicted_alpha_with(bath, coupling, ZeroModePolicy::Reject, &ExactOptions::default())
}

pub fn predicted_alpha_with(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    zero_modes: ZeroModePolicy,
    exact: &ExactOptions,
) -> Result<f64> {
    coupling.validate(bath)?;
    let m = site_magnetization(bath, coupling.site_index(), zero_modes, exact)?;
    Ok(coupling.epsilon.powi(2) * (1.0 - m * m).max(0.0))
}

fn site_magnetization(
    bath: &BathSpec,
    site: usize,
    zero_modes: ZeroModePolicy,
    exact: &ExactOptions,
) -> Result<f64> {
    match bath.family {
        Family::Xy => {
            let form = build_quadratic_form(bath, None, QubitBranch::Ground)?;
            let corr = ground_state_correlations_with(&form, zero_modes)?;
            transverse_magnetization(&corr, site)
        }
        Family::Xxz if bath.n_spins <= MAX_SPARSE_SPINS => {
            let gs = ground_state(bath, &CouplingSpec::new(0.0), QubitBranch::Ground, exact)?;
            Ok(magnetization(&gs.full_vector_complex(), site))
        }
        Family::Xxz => {
            let gs = ground_state_imaginary_time(bath, &TebdParams::default())?;
            gs.state.magnetization(site)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauEstimate {
    pub l_inf: f64,
    /// `max − min` of `L` over the window.
    pub amplitude: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Quasiparticle velocity scale `2|J|`.
pub fn velocity(bath: &BathSpec) -> f64 {
    2.0 * bath.j.abs()
}

/// `(T₁, T₂)` with `T₂ = N/(4v)` and `T₁ = T₂/2`.
pub fn plateau_window(bath: &BathSpec) -> (f64, f64) {
    let t2 = bath.n_spins as f64 / (4.0 * velocity(bath));
    (0.5 * t2, t2)
}

pub fn plateau_value(series: &EchoSeries, bath: &BathSpec) -> Result<PlateauEstimate> {
    let (t1, t2) = plateau_window(bath);
    let slack = 1e-9 * t2.max(1.0);
    match series.times.last() {
        Some(&last) if last >= t2 - slack => {}
        _ => {
            return Err(Error::SeriesTooShort(format!(
                "plateau window ends at T2 = {t2}, series stops earlier"
            )))
        }
    }
    let inside: Vec<f64> = series
        .iter()
        .filter(|&(t, _)| t >= t1 - slack && t <= t2 + slack)
        .map(|(_, v)| v)
        .collect();
    if inside.is_empty() {
        return Err(Error::SeriesTooShort(format!("no samples in plateau window [{t1}, {t2}]")));
    }
    let l_inf = inside.iter().sum::<f64>() / inside.len() as f64;
    let hi = inside.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = inside.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PlateauEstimate {
        l_inf,
        amplitude: hi - lo,
        window: (t1, t2),
        points: inside.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalScalingFit {
    pub l_infinity: f64,
    pub beta: f64,
    /// RMS residual of `1/L` against the fitted line.
    pub rms_residual: f64,
    pub r_squared: f64,
    pub points: Vec<(usize, f64)>,
}

/// Fits `L = l∞/(1 + β ln N)` as a straight line `1/L = a + b ln N`.
pub fn fit_critical_scaling(points: &[(usize, f64)]) -> Result<CriticalScalingFit> {
    if points.len() < 2 {
        return Err(Error::SeriesTooShort("critical scaling needs at least two sizes".into()));
    }
    if points.iter().any(|&(n, l)| n == 0 || !(l > 0.0)) {
        return Err(Error::InvalidParameter("sizes and plateaus must be positive".into()));
    }
    let x: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|&(_, l)| 1.0 / l).collect();
    let line = linear_fit(&x, &y)?;
    let l_infinity = 1.0 / line.intercept;
    Ok(CriticalScalingFit {
        l_infinity,
        beta: line.slope * l_infinity,
        rms_residual: line.rms_residual,
        r_squared: line.r_squared,
        points: points.to_vec(),
    })
}

struct Line {
    intercept: f64,
    slope: f64,
    rms_residual: f64,
    r_squared: f64,
}

fn linear_fit(x: &[f64], y: &[f64]) -> Result<Line> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(Line {
        intercept,
        slope,
        rms_residual: (ss_res / n).sqrt(),
        r_squared,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogDecayFit {
    pub c0: f64,
    pub c1: f64,
    pub window: (f64, f64),
    pub rms_residual: f64,
    pub r_squared: f64,
    pub iterations: usize,
    pub flags: Vec<FitFlag>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub a: f64,
    pub b: f64,
    pub window: (f64, f64),
    pub rms_residual: f64,
    pub iterations: usize,
    pub flags: Vec<FitFlag>,
}

/// Window `[1, T₁]` shared by the slow-decay model fits.
pub fn decay_window(bath: &BathSpec) -> (f64, f64) {
    (1.0, plateau_window(bath).0)
}

fn window_samples(series: &EchoSeries, window: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(Error::SeriesTooShort(format!("empty fit window [{lo}, {hi}]")));
    }
    match series.times.last() {
        Some(&last) if last >= hi - 1e-9 * hi.max(1.0) => {}
        _ => return Err(Error::SeriesTooShort(format!("series stops before t = {hi}"))),
    }
    let (t, v): (Vec<f64>, Vec<f64>) = series.iter().filter(|&(t, _)| t >= lo && t <= hi).unzip();
    if t.len() < 3 {
        return Err(Error::SeriesTooShort(format!("fewer than 3 samples in [{lo}, {hi}]")));
    }
    Ok((t, v))
}

/// `c₀/(1 + c₁ ln t)` over `[1, T₁]`, starting from `c₀ = 1, c₁ = 0.01`.
pub fn fit_log_decay(series: &EchoSeries, bath: &BathSpec) -> Result<LogDecayFit> {
    fit_log_decay_window(series, decay_window(bath))
}

pub fn fit_log_decay_window(series: &EchoSeries, window: (f64, f64)) -> Result<LogDecayFit> {
    let (t, v) = window_samples(series, window)?;
    let x: Vec<f64> = t.iter().map(|t| t.ln()).collect();
    let model = |p: [f64; 2], x: f64| {
        let d = 1.0 + p[1] * x;
        (p[0] / d, [1.0 / d, -p[0] * x / (d * d)])
    };
    let fit = levenberg_marquardt(&x, &v, [1.0, 0.01], model)?;
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let ss_tot: f64 = v.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res = fit.rms * fit.rms * v.len() as f64;
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let mut flags = fit.flags;
    if r_squared < LOG_FIT_MIN_R2 {
        flags.push(FitFlag::PoorFit);
    }
    Ok(LogDecayFit {
        c0: fit.params[0],
        c1: fit.params[1],
        window,
        rms_residual: fit.rms,
        r_squared,
        iterations: fit.iterations,
        flags,
    })
}

/// `a e^{−bt}` on the same window, the competing model for slow decay.
pub fn fit_exponential_decay(series: &EchoSeries, window: (f64, f64)) -> Result<ExponentialFit> {
    let (t, v) = window_samples(series, window)?;
    // Start from a log-linear fit.
    let lv: Vec<f64> = v.iter().map(|y| y.max(1e-300).ln()).collect();
    let line = linear_fit(&t, &lv)?;
    let start = [line.intercept.exp(), -line.slope];
    let model = |p: [f64; 2], t: f64| {
        let e = (-p[1] * t).exp();
        (p[0] * e, [e, -p[0] * t * e])
    };
    let fit = levenberg_marquardt(&t, &v, start, model)?;
    Ok(ExponentialFit {
        a: fit.params[0],
        b: fit.params[1],
        window,
        rms_residual: fit.rms,
        iterations: fit.iterations,
        flags: fit.flags,
    })
}

struct LmResult {
    params: [f64; 2],
    rms: f64,
    iterations: usize,
    flags: Vec<FitFlag>,
}

/// Two-parameter Levenberg–Marquardt; stops when the relative parameter
/// change drops below `1e-9`.
fn levenberg_marquardt(
    x: &[f64],
    y: &[f64],
    start: [f64; 2],
    model: impl Fn([f64; 2], f64) -> (f64, [f64; 2]),
) -> Result<LmResult> {
    const MAX_ITER: usize = 500;
    const REL_TOL: f64 = 1e-9;
    let cost = |p: [f64; 2]| -> f64 { x.iter().zip(y).map(|(&xi, &yi)| (model(p, xi).0 - yi).powi(2)).sum() };
    let mut p = start;
    let mut c = cost(p);
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let (mut a, mut g) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&xi, &yi) in x.iter().zip(y) {
            let (f, jac) = model(p, xi);
            let r = yi - f;
            for i in 0..2 {
                g[i] += jac[i] * r;
                for k in 0..2 {
                    a[i][k] += jac[i] * jac[k];
                }
            }
        }
        let mut accepted = false;
        for _ in 0..60 {
            let m00 = a[0][0] * (1.0 + mu);
            let m11 = a[1][1] * (1.0 + mu);
            let det = m00 * m11 - a[0][1] * a[1][0];
            if det == 0.0 || !det.is_finite() {
                mu *= 10.0;
                continue;
            }
            let d0 = (m11 * g[0] - a[0][1] * g[1]) / det;
            let d1 = (m00 * g[1] - a[1][0] * g[0]) / det;
            let trial = [p[0] + d0, p[1] + d1];
            let tc = cost(trial);
            if tc.is_finite() && tc <= c {
                let rel = (d0.abs() / p[0].abs().max(1e-12)).max(d1.abs() / p[1].abs().max(1e-12));
                p = trial;
                c = tc;
                mu = (mu * 0.3).max(1e-12);
                accepted = true;
                if rel < REL_TOL {
                    converged = true;
                }
                break;
            }
            mu *= 10.0;
        }
        if converged || !accepted {
            // A rejected step at maximal damping means the cost is at its floor.
            converged = true;
            break;
        }
    }
    if !p.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("fit parameters diverged".into()));
    }
    let flags = if converged { Vec::new() } else { vec![FitFlag::NotConverged] };
    Ok(LmResult {
        params: p,
        rms: (c / x.len() as f64).sqrt(),
        iterations,
        flags,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceRow {
    pub parameter: f64,
    pub alpha: f64,
    pub concurrence: f64,
    /// `α / C`, absent when either is negligible.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceReport {
    pub rows: Vec<ConcurrenceRow>,
    /// `(max − min)/mean` of the available ratios.
    pub ratio_spread: Option<f64>,
}

/// Values of `α` or `C` below this are treated as zero in the ratio.
pub const RATIO_FLOOR: f64 = 1e-8;

/// Bond used for the concurrence: the coupled site and its right neighbour,
/// or its left neighbour at the chain end. 0-based.
pub fn coupled_pair(bath: &BathSpec, coupling: &CouplingSpec) -> (usize, usize) {
    let site = coupling.site_index();
    if site + 1 < bath.n_spins {
        (site, site + 1)
    } else {
        (site - 1, site)
    }
}

/// Ground-state concurrence of [`coupled_pair`]. Open XY-class chains use
/// the fermionic correlators, anything else the full-space ground state.
pub fn coupled_pair_concurrence(bath: &BathSpec, coupling: &CouplingSpec, options: &ExactOptions) -> Result<f64> {
    coupling.validate(bath)?;
    let (i, j) = coupled_pair(bath, coupling);
    if bath.family == Family::Xy && bath.boundary == Boundary::Open {
        let form = build_quadratic_form(bath, None, QubitBranch::Ground)?;
        let corr = ground_state_correlations_with(&form, ZeroModePolicy::Reject)?;
        let nn = nn_spin_correlators(&corr, i)?;
        return concurrence(&pair_density_matrix(&nn));
    }
    let gs = ground_state(bath, &CouplingSpec::new(0.0), QubitBranch::Ground, options)?;
    let rho = reduced_density_matrix(&gs.full_vector_complex(), bath.n_spins, i, j)?;
    concurrence(&rho)
}

/// `ρ = ¼(1 + Σ ⟨σᵃσᵃ⟩ σᵃσᵃ + ⟨σᶻ⟩σᶻ⊗1 + ⟨σᶻ⟩1⊗σᶻ)`; the mixed terms vanish
/// by parity and reality of the XY ground state.
fn pair_density_matrix(nn: &NearestNeighbour) -> Array2<Complex64> {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let id = [[l, o], [o, l]];
    let x = [[o, l], [l, o]];
    let y = [[o, -i], [i, o]];
    let z = [[l, o], [o, -l]];
    let kron = |a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2], w: f64| {
        Array2::from_shape_fn((4, 4), |(r, c)| a[r >> 1][c >> 1] * b[r & 1][c & 1] * w)
    };
    (kron(id, id, 1.0)
        + kron(x, x, nn.xx)
        + kron(y, y, nn.yy)
        + kron(z, z, nn.zz)
        + kron(z, id, nn.z_left)
        + kron(id, z, nn.z_right))
    .mapv(|v| v * 0.25)
}

impl ConcurrenceReport {
    pub fn from_rows(rows: Vec<ConcurrenceRow>) -> Self {
        let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
        Self {
            ratio_spread: ratio_spread(&ratios),
            rows,
        }
    }
}

impl ConcurrenceRow {
    pub fn new(parameter: f64, alpha: f64, concurrence: f64) -> Self {
        let ratio = (alpha > RATIO_FLOOR && concurrence > RATIO_FLOOR).then(|| alpha / concurrence);
        Self {
            parameter,
            alpha,
            concurrence,
            ratio,
        }
    }
}

/// Measured `α` next to the ground-state concurrence of [`coupled_pair`],
/// per bath. The echo always comes from the full-space oracle.
pub fn alpha_concurrence_report(
    grid: &[(f64, BathSpec)],
    coupling: &CouplingSpec,
    options: &ExactOptions,
) -> Result<ConcurrenceReport> {
    let mut rows = Vec::with_capacity(grid.len());
    for (parameter, bath) in grid {
        coupling.validate(bath)?;
        let series = loschmidt_echo_exact(bath, coupling, &gaussian_times(bath), options)?;
        let alpha = fit_gaussian_rate(&series)?.alpha;
        let gs = ground_state(bath, &CouplingSpec::new(0.0), QubitBranch::Ground, options)?;
        let (i, j) = coupled_pair(bath, coupling);
        let rho = reduced_density_matrix(&gs.full_vector_complex(), bath.n_spins, i, j)?;
        rows.push(ConcurrenceRow::new(*parameter, alpha, concurrence(&rho)?));
    }
    Ok(ConcurrenceReport::from_rows(rows))
}

pub fn ratio_spread(ratios: &[f64]) -> Option<f64> {
    if ratios.is_empty() {
        return None;
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Some((hi - lo) / mean)
}
