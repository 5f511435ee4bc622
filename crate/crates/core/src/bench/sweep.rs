use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use super::{localized_error, BenchError, Measured, DEFAULT_REFERENCE_STEP, DEFAULT_WINDOW};
use crate::solver::{Integrator, IntegratorKind, JacobianMode, SolverConfig, SolverError, WorkCounters};
use crate::system::{SystemModel, SystemState};

/// An integrator together with its Newton mode and line-search flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodSpec {
    pub integrator: IntegratorKind,
    pub newton: JacobianMode,
    pub tals: bool,
}

impl MethodSpec {
    pub fn new(integrator: IntegratorKind, newton: JacobianMode, tals: bool) -> Self {
        Self { integrator, newton, tals }
    }

    pub fn tamsi() -> Self {
        Self::new(IntegratorKind::Tamsi, JacobianMode::Full, true)
    }

    /// Implicit Euler with full or quasi Newton, fixed step or error control,
    /// each with and without the line search.
    pub fn implicit_euler_grid() -> Vec<MethodSpec> {
        let mut grid = Vec::new();
        for integrator in [IntegratorKind::ImplicitEuler, IntegratorKind::ImplicitEulerErrorControlled] {
            for newton in [JacobianMode::Full, JacobianMode::Quasi] {
                for tals in [false, true] {
                    grid.push(MethodSpec::new(integrator, newton, tals));
                }
            }
        }
        grid
    }

    /// Name of the knob swept for this method.
    pub fn knob_name(&self) -> &'static str {
        if self.integrator.is_error_controlled() {
            "a"
        } else {
            "h"
        }
    }

    /// `base` with the knob applied.
    pub fn config(&self, base: &SolverConfig, knob: f64) -> SolverConfig {
        let mut config = SolverConfig { jacobian_mode: self.newton, tals_enabled: self.tals, ..*base };
        if self.integrator.is_error_controlled() {
            config.accuracy = knob;
        } else {
            config.h = knob;
        }
        config
    }

    fn uses_newton_mode(&self) -> bool {
        matches!(
            self.integrator,
            IntegratorKind::ImplicitEuler | IntegratorKind::ImplicitEulerErrorControlled
        )
    }

    fn uses_tals(&self) -> bool {
        self.integrator != IntegratorKind::Rk3
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.integrator)?;
        if self.uses_newton_mode() {
            write!(f, "+{}", if self.newton == JacobianMode::Full { "fn" } else { "qn" })?;
        }
        if self.uses_tals() && self.tals {
            write!(f, "+tals")?;
        }
        Ok(())
    }
}

impl FromStr for MethodSpec {
    type Err = BenchError;

    /// Parses labels such as `ie+fn+tals`, `ie-ec+qn` or `tamsi`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || BenchError::UnknownMethod(s.to_string());
        let mut parts = s.split('+');
        let integrator: IntegratorKind =
            parts.next().ok_or_else(unknown)?.parse().map_err(|_| unknown())?;
        let mut spec = MethodSpec::new(integrator, JacobianMode::Full, false);
        for part in parts {
            match part {
                "fn" if spec.uses_newton_mode() => spec.newton = JacobianMode::Full,
                "qn" if spec.uses_newton_mode() => spec.newton = JacobianMode::Quasi,
                "tals" if spec.uses_tals() => spec.tals = true,
                _ => return Err(unknown()),
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

impl CellStatus {
    pub fn is_ok(&self) -> bool {
        *self == CellStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkPrecisionRecord {
    pub method: MethodSpec,
    pub knob: f64,
    /// Localized L² error, NaN for failed cells.
    pub error: f64,
    pub work: WorkCounters,
    pub wall_ns: u128,
    pub status: CellStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub horizon: f64,
    pub window: f64,
    pub reference_step: f64,
    pub measured: Measured,
    /// Settings shared by all cells before the knob is applied.
    pub base: SolverConfig,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            window: DEFAULT_WINDOW,
            reference_step: DEFAULT_REFERENCE_STEP,
            measured: Measured::Velocity(0),
            base: SolverConfig::default(),
        }
    }
}

/// Runs `integrator` from the model's initial state, sampling every `window`
/// up to `horizon`. On failure the samples reached so far are returned with
/// the error.
pub fn simulate_samples(
    model: &dyn SystemModel,
    integrator: &mut dyn Integrator,
    window: f64,
    horizon: f64,
) -> Result<Vec<SystemState>, (Vec<SystemState>, SolverError)> {
    let count = (horizon / window).round() as usize;
    let start = model.initial_state();
    let t0 = start.t;
    let mut samples = Vec::with_capacity(count + 1);
    samples.push(start);
    for m in 1..=count {
        let previous = samples.last().expect("nonempty");
        match integrator.advance(model, previous, window) {
            Ok(step) => {
                let mut state = step.state;
                // Pin sample times to the grid to avoid round-off drift.
                state.t = t0 + m as f64 * window;
                samples.push(state);
            }
            Err(err) => return Err((samples, err)),
        }
    }
    Ok(samples)
}

fn run_cell(
    model: &dyn SystemModel,
    method: MethodSpec,
    knob: f64,
    settings: &SweepSettings,
) -> WorkPrecisionRecord {
    let config = method.config(&settings.base, knob);
    let failed = |status: String, work, wall_ns| WorkPrecisionRecord {
        method,
        knob,
        error: f64::NAN,
        work,
        wall_ns,
        status: CellStatus::Failed(status),
    };
    if let Err(err) = config.validate() {
        return failed(err.to_string(), WorkCounters::default(), 0);
    }
    let mut integrator = method.integrator.build(config);
    let clock = Instant::now();
    let outcome = simulate_samples(model, integrator.as_mut(), settings.window, settings.horizon);
    let wall_ns = clock.elapsed().as_nanos();
    let work = integrator.work();
    match outcome {
        Ok(samples) => {
            match localized_error(model, &samples, settings.measured, settings.window, settings.reference_step)
            {
                Ok(error) => WorkPrecisionRecord { method, knob, error, work, wall_ns, status: CellStatus::Ok },
                Err(err) => failed(err.to_string(), work, wall_ns),
            }
        }
        Err((_, err)) => failed(err.to_string(), work, wall_ns),
    }
}

/// One record per `(method, knob)` in method-major order. Cells run in
/// parallel; failures are recorded and do not stop the sweep.
pub fn work_precision_sweep(
    model: &dyn SystemModel,
    methods: &[MethodSpec],
    knobs: &[f64],
    settings: &SweepSettings,
) -> Vec<WorkPrecisionRecord> {
    let cells: Vec<(MethodSpec, f64)> =
        methods.iter().flat_map(|&m| knobs.iter().map(move |&k| (m, k))).collect();
    cells.par_iter().map(|&(method, knob)| run_cell(model, method, knob, settings)).collect()
}
