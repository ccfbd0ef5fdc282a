//! Statistical and total error of the Van Hove estimate versus measurement strength.
//!
//! For every `Γ` two ensembles are run with the same seed: one with
//! second-measurement noise, whose standard errors give the statistical
//! uncertainty, and one without, whose deviation from the exact connected
//! correlator gives the total error. Both are quadratic means over the time
//! grid and the displacements `|δj| <= min(10, L - 1)`.
//!
//! The error curves are fitted with the quadratic-mean forms
//! `[(A/Γ)² + B²]^{1/2}` and `[(A/Γ)² + (C Γ^{1/2})²]^{1/2}`.

use serde::{Deserialize, Serialize};

use crate::analysis::correlate::{
    van_hove, CorrelatorKind, ReadoutKind, VanHoveGrid, VanHoveOptions,
};
use crate::analysis::oracle::oracle_correlations;
use crate::error::{Error, Result};
use crate::evolution::Propagator;
use crate::fockspace::QuantumState;
use crate::io::SCHEMA_VERSION;
use crate::measurement::MeasurementMode;
use crate::stats;
use crate::trajectory::{run_ensemble, InitialState, ProtocolConfig, SecondNoise};

/// Default displacement half-range of the quadratic mean.
pub const MAX_DISPLACEMENT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorScanConfig {
    pub gammas: Vec<f64>,
    pub trajectories: usize,
    pub times: Vec<f64>,
    pub master_seed: u64,
    #[serde(default)]
    pub mode: MeasurementMode,
    /// Largest `|δj|` in the average; `min(10, L - 1)` when absent.
    #[serde(default)]
    pub max_displacement: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorScanPoint {
    pub gamma: f64,
    pub statistical_rms: f64,
    pub total_rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitForm {
    /// `[(A/Γ)² + B²]^{1/2}`
    StatisticalOnly,
    /// `[(A/Γ)² + (C Γ^{1/2})²]^{1/2}`
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticMeanFit {
    pub form: FitForm,
    pub a: f64,
    /// `B` or `C`, depending on the form.
    pub second: f64,
    /// RMS of `ln(fit / data)`.
    pub residual: f64,
}

impl QuadraticMeanFit {
    pub fn eval(&self, gamma: f64) -> f64 {
        let lead = (self.a / gamma).powi(2);
        match self.form {
            FitForm::StatisticalOnly => (lead + self.second.powi(2)).sqrt(),
            FitForm::Joint => (lead + self.second.powi(2) * gamma).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorScanFits {
    pub statistical_only: QuadraticMeanFit,
    pub joint: QuadraticMeanFit,
    /// `Γ*` where `A/Γ = C Γ^{1/2}` in the joint fit.
    pub crossover_gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorScanResult {
    pub schema_version: u32,
    pub config: ErrorScanConfig,
    pub points: Vec<ErrorScanPoint>,
    /// Log-log slope of the statistical error over the three smallest `Γ`.
    pub statistical_slope: Option<f64>,
    /// Log-log slope of the total error over the two largest `Γ`.
    pub total_slope: Option<f64>,
    /// Fitted to the total error; absent for fewer than three distinct `Γ`.
    pub fits: Option<ErrorScanFits>,
}

/// Quadratic mean of `values` over the window `|δj| <= r`.
pub fn windowed_rms(g: &VanHoveGrid, values: impl Fn(i64, usize) -> f64, r: usize) -> f64 {
    let r = r.min(g.sites - 1) as i64;
    stats::rms(
        (0..g.times.len())
            .flat_map(|k| (-r..=r).map(move |dj| (dj, k)))
            .map(|(dj, k)| values(dj, k)),
    )
}

/// Weighted least squares for `y² = a f(Γ) + b h(Γ)` with `a, b >= 0`,
/// weighting each point by `1/y⁴` so that relative misfit counts equally.
fn fit_nonnegative(gammas: &[f64], y: &[f64], form: FitForm) -> QuadraticMeanFit {
    let basis = |g: f64| -> (f64, f64) {
        match form {
            FitForm::StatisticalOnly => (g.powi(-2), 1.0),
            FitForm::Joint => (g.powi(-2), g),
        }
    };
    let solve_one = |which: usize| -> (f64, f64) {
        let (mut num, mut den) = (0.0, 0.0);
        for (&g, &v) in gammas.iter().zip(y) {
            let w = v.powi(-4);
            let f = if which == 0 { basis(g).0 } else { basis(g).1 };
            num += w * f * v * v;
            den += w * f * f;
        }
        let c = (num / den).max(0.0);
        if which == 0 {
            (c, 0.0)
        } else {
            (0.0, c)
        }
    };
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&g, &v) in gammas.iter().zip(y) {
        let w = v.powi(-4);
        let (f, h) = basis(g);
        s11 += w * f * f;
        s12 += w * f * h;
        s22 += w * h * h;
        t1 += w * f * v * v;
        t2 += w * h * v * v;
    }
    let det = s11 * s22 - s12 * s12;
    let mut candidates = vec![solve_one(0), solve_one(1)];
    if det.abs() > 1e-300 {
        let a = (t1 * s22 - t2 * s12) / det;
        let b = (s11 * t2 - s12 * t1) / det;
        if a >= 0.0 && b >= 0.0 {
            candidates.push((a, b));
        }
    }
    candidates
        .into_iter()
        .map(|(a, b)| {
            let fit = QuadraticMeanFit {
                form,
                a: a.sqrt(),
                second: b.sqrt(),
                residual: 0.0,
            };
            let residual = stats::rms(gammas.iter().zip(y).map(|(&g, &v)| (fit.eval(g) / v).ln()));
            QuadraticMeanFit { residual, ..fit }
        })
        .min_by(|p, q| p.residual.total_cmp(&q.residual))
        .expect("at least one candidate")
}

/// Fit one quadratic-mean form to an error curve.
pub fn fit_quadratic_mean(gammas: &[f64], y: &[f64], form: FitForm) -> Result<QuadraticMeanFit> {
    if gammas.len() != y.len() || gammas.len() < 2 {
        return Err(Error::config("a fit needs at least two (Γ, error) points"));
    }
    if gammas.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::numerical(
            "fit data must be positive and finite",
            f64::NAN,
        ));
    }
    Ok(fit_nonnegative(gammas, y, form))
}

/// Slopes and fits for a table of points.
pub fn summarize_points(
    config: ErrorScanConfig,
    mut points: Vec<ErrorScanPoint>,
) -> ErrorScanResult {
    points.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    let g: Vec<f64> = points.iter().map(|p| p.gamma).collect();
    let stat: Vec<f64> = points.iter().map(|p| p.statistical_rms).collect();
    let total: Vec<f64> = points.iter().map(|p| p.total_rms).collect();
    let n = points.len();
    let statistical_slope = (n >= 3).then(|| stats::log_log_slope(&g[..3], &stat[..3]));
    let total_slope = (n >= 2).then(|| stats::log_log_slope(&g[n - 2..], &total[n - 2..]));
    let fits = if n >= 3 {
        match (
            fit_quadratic_mean(&g, &total, FitForm::StatisticalOnly),
            fit_quadratic_mean(&g, &total, FitForm::Joint),
        ) {
            (Ok(s), Ok(j)) => Some(ErrorScanFits {
                crossover_gamma: (j.second > 0.0).then(|| (j.a / j.second).powf(2.0 / 3.0)),
                statistical_only: s,
                joint: j,
            }),
            (s, j) => {
                log::warn!("error-scan fit failed: {:?} {:?}", s.err(), j.err());
                None
            }
        }
    } else {
        log::info!("fewer than three Γ values: fits skipped");
        None
    };
    ErrorScanResult {
        schema_version: SCHEMA_VERSION,
        config,
        points,
        statistical_slope,
        total_slope,
        fits,
    }
}

/// Run the sweep. Ensemble `i` (in the order given) uses master seed `seed + i`.
pub fn error_scan(
    propagator: &Propagator,
    psi0: &QuantumState,
    cfg: &ErrorScanConfig,
) -> Result<ErrorScanResult> {
    if cfg.gammas.is_empty() {
        return Err(Error::config("no Γ values to scan"));
    }
    let sites = psi0.basis().sites();
    let r = cfg
        .max_displacement
        .unwrap_or(MAX_DISPLACEMENT)
        .min(sites - 1);
    let exact =
        oracle_correlations(propagator, psi0, &cfg.times)?.van_hove(CorrelatorKind::Connected);
    let initial = InitialState::from(psi0.clone());
    let opts = VanHoveOptions {
        kind: CorrelatorKind::Connected,
        readout: ReadoutKind::Outcome,
    };
    let mut points = Vec::with_capacity(cfg.gammas.len());
    for (i, &gamma) in cfg.gammas.iter().enumerate() {
        let mut protocol = ProtocolConfig::new(
            gamma,
            cfg.times.clone(),
            cfg.trajectories,
            cfg.master_seed.wrapping_add(i as u64),
        );
        protocol.mode = cfg.mode;
        protocol.second_noise = SecondNoise::Include;
        let noisy = van_hove(&run_ensemble(&initial, propagator, &protocol)?, opts)?;
        protocol.second_noise = SecondNoise::Omit;
        let clean = van_hove(&run_ensemble(&initial, propagator, &protocol)?, opts)?;
        let point = ErrorScanPoint {
            gamma,
            statistical_rms: windowed_rms(&noisy, |dj, k| noisy.sem_at(dj, k), r),
            total_rms: windowed_rms(&clean, |dj, k| clean.value(dj, k) - exact.value(dj, k), r),
        };
        log::info!(
            "Γ = {gamma}: statistical {:.4e}, total {:.4e}",
            point.statistical_rms,
            point.total_rms
        );
        points.push(point);
    }
    Ok(summarize_points(cfg.clone(), points))
}
