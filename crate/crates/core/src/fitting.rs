//! Damping-rate extraction from probability traces and the power-law fit of
//! damping ratios across the Rabi frequency ladder.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_time, Error, Result};
use crate::numerics::minimize_scalar;
use crate::rabi::{freq_ladder, trace, Model, ProbabilityTrace, RabiParams};

/// Fewest trace samples accepted inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 8;

/// Coarse scan points used to bracket the global RMS minimum.
const SCAN_POINTS: usize = 64;

/// Periods of `sin^2(omega t)` in the default per-level fit window.
pub const DEFAULT_WINDOW_PERIODS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_min: f64,
    pub t_max: f64,
}

impl FitWindow {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self> {
        check_time(t_min)?;
        if !(t_max.is_finite() && t_max > t_min) {
            return Err(Error::domain(format!("fit window [{t_min}, {t_max}] is empty")));
        }
        Ok(Self { t_min, t_max })
    }

    /// The first `periods` full periods of `sin^2(omega t)`, i.e. `[0, periods pi / omega]`.
    pub fn periods(omega: f64, periods: f64) -> Result<Self> {
        Self::new(0.0, periods * PI / omega)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingFit {
    pub gamma: f64,
    pub omega: f64,
    pub rms: f64,
    pub window: FitWindow,
    /// False when the minimizer sits on either end of `[0, gamma_hi]`.
    pub converged: bool,
}

impl DampingFit {
    pub fn gamma_over_omega(&self) -> f64 {
        self.gamma / self.omega
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EidResult {
    pub levels: Vec<usize>,
    /// Rabi frequency used at each level.
    pub omegas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// `gamma_n / gamma_0`.
    pub ratios: Vec<f64>,
    /// `None` when no level other than 0 was swept.
    pub exponent: Option<f64>,
    pub exponent_stderr: Option<f64>,
    pub fits: Vec<DampingFit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    /// `None` with a single nonzero level (no residual degrees of freedom).
    pub stderr: Option<f64>,
}

/// `(1 - e^{-gamma t} cos(2 omega t)) / 2`.
pub fn model_damped(omega: f64, gamma: f64, t: f64) -> f64 {
    0.5 * (1.0 - (-gamma * t).exp() * (2.0 * omega * t).cos())
}

fn rms_residual(samples: &[(f64, f64)], omega: f64, gamma: f64) -> f64 {
    let sum_sq: f64 = samples
        .iter()
        .map(|&(t, p)| {
            let r = p - model_damped(omega, gamma, t);
            r * r
        })
        .sum();
    (sum_sq / samples.len() as f64).sqrt()
}

/// Least-RMS damping rate in `[0, gamma_hi]` with amplitude, offset and
/// frequency held fixed.
pub fn fit_gamma(trace: &ProbabilityTrace, omega: f64, window: FitWindow, gamma_hi: f64) -> Result<DampingFit> {
    if !(gamma_hi > 0.0 && gamma_hi.is_finite()) {
        return Err(Error::domain(format!("gamma_hi = {gamma_hi} must be > 0")));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::domain(format!("omega = {omega} must be > 0")));
    }
    let samples: Vec<(f64, f64)> = trace.samples.iter().copied().filter(|s| window.contains(s.0)).collect();
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::domain(format!(
            "{} samples inside the fit window, need at least {MIN_FIT_SAMPLES}",
            samples.len()
        )));
    }
    let objective = |gamma: f64| rms_residual(&samples, omega, gamma);

    // Bracket the best scan point, then refine locally.
    let step = gamma_hi / SCAN_POINTS as f64;
    let best = (0..=SCAN_POINTS)
        .map(|i| (i, objective(i as f64 * step)))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
        .0;
    let lo = best.saturating_sub(1) as f64 * step;
    let hi = ((best + 1).min(SCAN_POINTS)) as f64 * step;
    let tol = 1e-9 * gamma_hi;
    let gamma = minimize_scalar(objective, lo, hi, tol)?;

    let edge = 10.0 * tol;
    let converged = gamma > edge && gamma < gamma_hi - edge;
    Ok(DampingFit { gamma, omega, rms: objective(gamma), window, converged })
}

/// Slope of `ln(gamma_n / gamma_0)` against `ln(1 + n)` through the origin.
pub fn fit_exponent(levels: &[usize], gammas: &[f64]) -> Result<ExponentFit> {
    if levels.len() != gammas.len() {
        return Err(Error::domain("levels and gammas differ in length"));
    }
    let base = levels.iter().position(|&l| l == 0).ok_or_else(|| Error::domain("levels must include level 0"))?;
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::domain(format!("damping rate {g} must be > 0")));
    }
    let points: Vec<(f64, f64)> = levels
        .iter()
        .zip(gammas)
        .filter(|(&l, _)| l != 0)
        .map(|(&l, &g)| ((1.0 + l as f64).ln(), (g / gammas[base]).ln()))
        .collect();
    if points.is_empty() {
        return Err(Error::domain("exponent needs at least one level other than 0"));
    }
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let exponent = sxy / sxx;
    let stderr = (points.len() > 1).then(|| {
        let sse: f64 = points.iter().map(|(x, y)| (y - exponent * x).powi(2)).sum();
        (sse / (points.len() - 1) as f64 / sxx).sqrt()
    });
    Ok(ExponentFit { exponent, stderr })
}

/// Settings for [`eid_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct EidConfig {
    pub depth: usize,
    pub levels: Vec<usize>,
    /// Per-level window; `None` falls back to the first
    /// [`DEFAULT_WINDOW_PERIODS`] periods of that level's frequency.
    pub windows: Vec<Option<FitWindow>>,
    pub samples_per_period: usize,
}

impl EidConfig {
    pub fn new(depth: usize, levels: Vec<usize>) -> Self {
        let windows = vec![None; levels.len()];
        Self { depth, levels, windows, samples_per_period: 100 }
    }
}

/// Fits the damping rate at each ladder level and the exponent of the ratios.
///
/// `base.omega` is the prefactor of [`freq_ladder`]; `delta_t` and `beta` are
/// shared by all levels.
pub fn eid_sweep(base: &RabiParams, config: &EidConfig) -> Result<EidResult> {
    if config.levels.is_empty() || !config.levels.contains(&0) {
        return Err(Error::domain("levels must be non-empty and include level 0"));
    }
    if config.windows.len() != config.levels.len() {
        return Err(Error::domain("one window entry per level is required"));
    }
    if config.samples_per_period == 0 {
        return Err(Error::domain("samples_per_period must be >= 1"));
    }
    let mut fits = Vec::with_capacity(config.levels.len());
    for (&level, window) in config.levels.iter().zip(&config.windows) {
        let fit = fit_level(base, config, level, *window).map_err(|e| Error::Level { level, source: Box::new(e) })?;
        fits.push(fit);
    }
    let unconverged: Vec<usize> =
        config.levels.iter().zip(&fits).filter(|(_, f)| !f.converged).map(|(&l, _)| l).collect();
    if !unconverged.is_empty() {
        return Err(Error::Unconverged { levels: unconverged });
    }

    let gammas: Vec<f64> = fits.iter().map(|f| f.gamma).collect();
    let base_gamma = gammas[config.levels.iter().position(|&l| l == 0).expect("checked above")];
    let ratios = config.levels.iter().zip(&gammas).map(|(&l, &g)| if l == 0 { 1.0 } else { g / base_gamma }).collect();
    let (exponent, exponent_stderr) = match fit_exponent(&config.levels, &gammas) {
        Ok(fit) => (Some(fit.exponent), fit.stderr),
        Err(_) if config.levels.iter().all(|&l| l == 0) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(EidResult {
        levels: config.levels.clone(),
        omegas: fits.iter().map(|f| f.omega).collect(),
        gammas,
        ratios,
        exponent,
        exponent_stderr,
        fits,
    })
}

fn fit_level(base: &RabiParams, config: &EidConfig, level: usize, window: Option<FitWindow>) -> Result<DampingFit> {
    let omega = freq_ladder(base.omega, level);
    let params = RabiParams::new(omega, base.delta_t, base.beta)?;
    let window = match window {
        Some(w) => w,
        None => FitWindow::periods(omega, DEFAULT_WINDOW_PERIODS)?,
    };
    let periods = window.t_max * omega / PI;
    let samples = (periods * config.samples_per_period as f64).ceil() as usize + 1;
    let tr = trace(&Model::Indist { params, depth: config.depth }, window.t_max, samples.max(MIN_FIT_SAMPLES))?;
    fit_gamma(&tr, omega, window, omega)
}
