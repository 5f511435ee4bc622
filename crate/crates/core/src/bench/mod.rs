//! Accuracy and cost measurement for the integrators.
//!
//! Global error is localized: the run under test is sampled every window
//! `Δw`, and each sample is compared with a high-accuracy solution started
//! from the previous test sample. This keeps slow drift from dominating the
//! metric. Work is counted in dynamics evaluations.

mod convergence;
mod csv;
mod robustness;
mod sweep;

use rayon::prelude::*;
use thiserror::Error;

use crate::solver::{Integrator, Rk3};
use crate::system::{SystemModel, SystemState};

pub use convergence::{convergence_study, ConvergenceRecord, ConvergenceSettings, ConvergenceStudy};
pub use csv::{number as format_number, write_convergence_csv, write_work_precision_csv, CSV_SCHEMA};
pub use robustness::{robustness_run, ProgressSample, RobustnessSummary};
pub use sweep::{
    simulate_samples, work_precision_sweep, CellStatus, MethodSpec, SweepSettings,
    WorkPrecisionRecord,
};

/// Default localization window, s.
pub const DEFAULT_WINDOW: f64 = 0.025;
/// Default reference step, s.
pub const DEFAULT_REFERENCE_STEP: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("samples are not spaced by the window: {0}")]
    MismatchedSampling(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
}

/// The scalar a work-precision error is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measured {
    Position(usize),
    Velocity(usize),
}

impl Measured {
    pub fn select(&self, state: &SystemState) -> f64 {
        match *self {
            Measured::Position(i) => state.q[i],
            Measured::Velocity(i) => state.v[i],
        }
    }
}

/// Approximates the exact flow over `window` with fixed-step RK3.
pub fn flow_map_reference(
    model: &dyn SystemModel,
    x0: &SystemState,
    window: f64,
    reference_step: f64,
) -> SystemState {
    if window <= 0.0 {
        return x0.clone();
    }
    Rk3::new(reference_step)
        .advance(model, x0, window)
        .expect("explicit steps cannot fail")
        .state
}

/// `sqrt(Σ_m (x^m − Φ_Δw(x^{m−1}))²)` on the selected component.
pub fn localized_error(
    model: &dyn SystemModel,
    samples: &[SystemState],
    measured: Measured,
    window: f64,
    reference_step: f64,
) -> Result<f64, BenchError> {
    if samples.len() < 2 {
        return Err(BenchError::MismatchedSampling(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    for pair in samples.windows(2) {
        let gap = pair[1].t - pair[0].t;
        if (gap - window).abs() > 1e-9 * window.max(1.0) {
            return Err(BenchError::MismatchedSampling(format!(
                "gap {gap} s at t = {} s, window {window} s",
                pair[0].t
            )));
        }
    }
    let sum: f64 = samples
        .par_windows(2)
        .map(|pair| {
            let reference = flow_map_reference(model, &pair[0], window, reference_step);
            let diff = measured.select(&pair[1]) - measured.select(&reference);
            diff * diff
        })
        .sum();
    Ok(sum.sqrt())
}

/// Ordinary least squares on `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual in natural-log units.
    pub residual: f64,
    pub points: usize,
}

/// Fits `ln y = slope·ln x + intercept`, skipping non-positive or
/// non-finite points. Needs two distinct abscissae.
pub fn fit_loglog(points: &[(f64, f64)]) -> Option<SlopeFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = logs.len() as f64;
    if logs.len() < 2 {
        return None;
    }
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual =
        (logs.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Some(SlopeFit { slope, intercept, residual, points: logs.len() })
}
