//! Time integrators for contact dynamics and the Newton machinery they share.
//!
//! Every integrator implements [`Integrator::advance`], which covers an
//! arbitrary interval with the method's own stepping and reports the work
//! spent. Work is measured in dynamics evaluations so that comparisons do not
//! depend on the machine.

mod frozen;
mod implicit;
pub mod newton;
mod rk3;
pub mod tals;

use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use thiserror::Error;

use crate::system::{SystemModel, SystemState};

pub use frozen::{
    assemble_delassus, semi_implicit_one_way_step, tamsi_step, Coupling, Delassus, FrozenScheme,
    StepWorkspace,
};
pub use implicit::{implicit_euler_step, ImplicitEuler};
pub use newton::{
    newton_solve, FnSystem, JacobianCache, NewtonReport, NewtonSettings, NewtonStats, NewtonStatus,
    NewtonSystem, NewtonTrace,
};
pub use rk3::{rk3_step, Rk3};
pub use tals::{contact_alpha, tals_alpha};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianMode {
    /// Fresh Jacobian at every Newton iteration.
    #[default]
    Full,
    /// Reuse a factorization across iterations and steps.
    Quasi,
}

impl fmt::Display for JacobianMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JacobianMode::Full => "full",
            JacobianMode::Quasi => "quasi",
        })
    }
}

impl FromStr for JacobianMode {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" | "fn" => Ok(JacobianMode::Full),
            "quasi" | "qn" => Ok(JacobianMode::Quasi),
            other => Err(SolverError::InvalidConfig(format!(
                "unknown Newton mode '{other}' (expected full or quasi)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("Newton iteration did not converge at t = {t} s with h = {h} s")]
    NonConvergence { t: f64, h: f64 },
    #[error("singular Newton matrix at t = {t} s with h = {h} s")]
    SingularJacobian { t: f64, h: f64 },
    #[error("step size fell below the minimum {h_min} s at t = {t} s")]
    StepTooSmall { t: f64, h_min: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

impl SolverError {
    /// Failures that a smaller step may cure.
    pub fn is_retryable(&self) -> bool {
        matches!(self, SolverError::NonConvergence { .. } | SolverError::SingularJacobian { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Step size in s for fixed-step integration, and the first trial step
    /// under error control.
    pub h: f64,
    /// Target local error under error control.
    pub accuracy: f64,
    pub newton_rtol: f64,
    pub newton_atol: f64,
    pub max_newton_iters: usize,
    pub jacobian_mode: JacobianMode,
    pub tals_enabled: bool,
    /// Largest rotation of a sliding velocity allowed in one Newton update.
    pub theta_max: f64,
    /// Smallest step, as a fraction of `h`, tried by convergence control.
    pub h_min_factor: f64,
    /// Absolute smallest step under error control, in s.
    pub min_step: f64,
    pub max_jacobian_reuses: usize,
    /// Abandon Newton early on two consecutive growing updates.
    pub divergence_check: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            h: 1e-3,
            accuracy: 1e-3,
            newton_rtol: 1e-6,
            newton_atol: 1e-8,
            max_newton_iters: 30,
            jacobian_mode: JacobianMode::Full,
            tals_enabled: true,
            theta_max: tals::DEFAULT_MAX_ANGLE,
            h_min_factor: 1.0 / 64.0,
            min_step: 1e-10,
            max_jacobian_reuses: 20,
            divergence_check: true,
        }
    }
}

impl SolverConfig {
    pub fn with_step(h: f64) -> Self {
        Self { h, ..Self::default() }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !(self.accuracy > 0.0 && self.accuracy.is_finite()) {
            return bad(format!("accuracy must be positive, got {}", self.accuracy));
        }
        if !(self.theta_max > 0.0 && self.theta_max <= std::f64::consts::PI) {
            return bad(format!("theta_max must lie in (0, pi], got {}", self.theta_max));
        }
        if self.max_newton_iters < 2 {
            return bad(format!("max_newton_iters must be at least 2, got {}", self.max_newton_iters));
        }
        if !(self.newton_rtol >= 0.0 && self.newton_atol > 0.0) {
            return bad("Newton tolerances must be nonnegative with atol > 0".into());
        }
        if !(self.h_min_factor > 0.0 && self.h_min_factor <= 1.0) {
            return bad(format!("h_min_factor must lie in (0, 1], got {}", self.h_min_factor));
        }
        if !(self.min_step > 0.0) {
            return bad(format!("min_step must be positive, got {}", self.min_step));
        }
        Ok(())
    }

    pub fn newton_settings(&self) -> NewtonSettings {
        NewtonSettings {
            rtol: self.newton_rtol,
            atol: self.newton_atol,
            max_iterations: self.max_newton_iters,
            mode: self.jacobian_mode,
            max_reuses: self.max_jacobian_reuses,
            divergence_check: self.divergence_check,
        }
    }
}

/// Work counters, cumulative over whatever span they describe.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkCounters {
    /// Dynamics or residual evaluations, including finite-difference columns.
    pub f_evals: u64,
    /// Analytic Jacobian assemblies.
    pub jacobian_assemblies: u64,
    pub jacobian_factorizations: u64,
    pub newton_iters: u64,
    /// Convergence-control halvings and error-control reductions.
    pub step_shrinks: u64,
    /// Steps that were accepted.
    pub steps: u64,
}

impl WorkCounters {
    fn add_newton(&mut self, stats: &NewtonStats) {
        self.newton_iters += stats.iterations as u64;
        self.jacobian_factorizations += stats.factorizations as u64;
    }
}

impl Add for WorkCounters {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for WorkCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.f_evals += rhs.f_evals;
        self.jacobian_assemblies += rhs.jacobian_assemblies;
        self.jacobian_factorizations += rhs.jacobian_factorizations;
        self.newton_iters += rhs.newton_iters;
        self.step_shrinks += rhs.step_shrinks;
        self.steps += rhs.steps;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: SystemState,
    /// Work spent producing `state`, including failed attempts.
    pub work: WorkCounters,
    pub converged: bool,
}

/// A time integrator with its own workspace and counters.
pub trait Integrator: Send {
    /// Advances `state` by exactly `dt`.
    fn advance(
        &mut self,
        model: &dyn SystemModel,
        state: &SystemState,
        dt: f64,
    ) -> Result<StepResult, SolverError>;

    /// Work spent since construction, failed attempts included.
    fn work(&self) -> WorkCounters;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegratorKind {
    Rk3,
    ImplicitEuler,
    ImplicitEulerErrorControlled,
    SemiImplicit,
    Tamsi,
}

impl IntegratorKind {
    pub const ALL: [IntegratorKind; 5] = [
        IntegratorKind::Rk3,
        IntegratorKind::ImplicitEuler,
        IntegratorKind::ImplicitEulerErrorControlled,
        IntegratorKind::SemiImplicit,
        IntegratorKind::Tamsi,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            IntegratorKind::Rk3 => "rk3",
            IntegratorKind::ImplicitEuler => "ie",
            IntegratorKind::ImplicitEulerErrorControlled => "ie-ec",
            IntegratorKind::SemiImplicit => "semi-implicit",
            IntegratorKind::Tamsi => "tamsi",
        }
    }

    pub fn is_error_controlled(&self) -> bool {
        *self == IntegratorKind::ImplicitEulerErrorControlled
    }

    pub fn build(&self, config: SolverConfig) -> Box<dyn Integrator> {
        match self {
            IntegratorKind::Rk3 => Box::new(Rk3::new(config.h)),
            IntegratorKind::ImplicitEuler => Box::new(ImplicitEuler::fixed_step(config)),
            IntegratorKind::ImplicitEulerErrorControlled => {
                Box::new(ImplicitEuler::error_controlled(config))
            }
            IntegratorKind::SemiImplicit => Box::new(FrozenScheme::new(Coupling::OneWay, config)),
            IntegratorKind::Tamsi => Box::new(FrozenScheme::new(Coupling::TwoWay, config)),
        }
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntegratorKind {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IntegratorKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = IntegratorKind::ALL.iter().map(|k| k.name()).collect();
                SolverError::InvalidConfig(format!(
                    "unknown integrator '{s}' (expected one of: {})",
                    names.join(", ")
                ))
            })
    }
}

/// Number of whole steps of size `h` in `dt`, tolerating round-off.
fn whole_steps(dt: f64, h: f64) -> usize {
    let ratio = dt / h;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.floor() as usize
    }
}

/// Covers `dt` with steps of `h` from `state`. A step that fails with a
/// retryable error is replaced by two half steps, recursively, down to
/// `h·h_min_factor`.
pub(crate) fn cover_with_convergence_control<F>(
    state: &SystemState,
    dt: f64,
    h: f64,
    h_min_factor: f64,
    work: &mut WorkCounters,
    mut attempt: F,
) -> Result<SystemState, SolverError>
where
    F: FnMut(&SystemState, f64, &mut WorkCounters) -> Result<SystemState, SolverError>,
{
    let t0 = state.t;
    let h_min = h * h_min_factor;
    let n = whole_steps(dt, h);
    let mut current = state.clone();
    for k in 0..n {
        current = subdivide(&current, h, h_min, work, &mut attempt)?;
        current.t = t0 + (k + 1) as f64 * h;
    }
    let remainder = dt - n as f64 * h;
    if remainder > 1e-9 * h {
        current = subdivide(&current, remainder, h_min, work, &mut attempt)?;
    }
    current.t = t0 + dt;
    Ok(current)
}

fn subdivide<F>(
    state: &SystemState,
    h: f64,
    h_min: f64,
    work: &mut WorkCounters,
    attempt: &mut F,
) -> Result<SystemState, SolverError>
where
    F: FnMut(&SystemState, f64, &mut WorkCounters) -> Result<SystemState, SolverError>,
{
    match attempt(state, h, work) {
        Ok(next) => {
            work.steps += 1;
            Ok(next)
        }
        Err(err) if err.is_retryable() => {
            let half = 0.5 * h;
            if half < h_min * (1.0 - 1e-9) {
                return Err(SolverError::StepTooSmall { t: state.t, h_min });
            }
            work.step_shrinks += 1;
            let middle = subdivide(state, half, h_min, work, attempt)?;
            subdivide(&middle, half, h_min, work, attempt)
        }
        Err(err) => Err(err),
    }
}
