//! Implicit Euler on the full state `x = (q, v)`.
//!
//! Each step solves `r(x) = x − x_prev − h·f(t + h, x) = 0`. The Jacobian is
//! `I − h·∂f/∂x`, with `∂f/∂x` formed by forward differences. With TALS the
//! update is limited using contact kinematics at the current iterate.

use nalgebra::{DMatrix, DVector};

use super::newton::{newton_solve, JacobianCache, NewtonStatus, NewtonSystem, NewtonTrace};
use super::tals::{clamp_alpha, contact_alpha};
use super::{
    cover_with_convergence_control, Integrator, JacobianMode, SolverConfig, SolverError,
    StepResult, WorkCounters,
};
use crate::system::{state_derivative, SystemModel, SystemState};

const ERROR_EXPONENT: f64 = 0.5;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

struct Residual<'a> {
    model: &'a dyn SystemModel,
    t: f64,
    h: f64,
    previous: &'a DVector<f64>,
    n_q: usize,
    tals: Option<f64>,
    /// Cached `∂f/∂x`, refreshed by finite differences when not reusable.
    dynamics_jacobian: &'a mut Option<DMatrix<f64>>,
    reuse_dynamics_jacobian: bool,
    last: Option<(DVector<f64>, DVector<f64>)>,
    f_evals: u64,
}

impl Residual<'_> {
    fn f(&mut self, x: &DVector<f64>) -> DVector<f64> {
        self.f_evals += 1;
        state_derivative(self.model, self.t, x)
    }

    fn finite_difference(&mut self, x: &DVector<f64>) -> DMatrix<f64> {
        let base = match &self.last {
            Some((at, fx)) if at == x => fx.clone(),
            _ => self.f(x),
        };
        let n = x.len();
        let mut jac = DMatrix::zeros(n, n);
        let mut probe = x.clone();
        for j in 0..n {
            let step = f64::EPSILON.sqrt() * x[j].abs().max(1.0);
            probe[j] = x[j] + step;
            let actual = probe[j] - x[j];
            let column = (self.f(&probe) - &base) / actual;
            jac.set_column(j, &column);
            probe[j] = x[j];
        }
        jac
    }
}

impl NewtonSystem for Residual<'_> {
    fn residual(&mut self, x: &DVector<f64>) -> DVector<f64> {
        let fx = self.f(x);
        let r = x - self.previous - &fx * self.h;
        self.last = Some((x.clone(), fx));
        r
    }

    fn jacobian(&mut self, x: &DVector<f64>) -> DMatrix<f64> {
        let dfdx = match (self.reuse_dynamics_jacobian, self.dynamics_jacobian.as_ref()) {
            (true, Some(cached)) if cached.nrows() == x.len() => cached.clone(),
            _ => {
                let fresh = self.finite_difference(x);
                *self.dynamics_jacobian = Some(fresh.clone());
                fresh
            }
        };
        // Only the first factorization of a step may reuse the cached matrix.
        self.reuse_dynamics_jacobian = false;
        let n = x.len();
        DMatrix::identity(n, n) - dfdx * self.h
    }

    fn limit_step(&mut self, x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
        let Some(theta_max) = self.tals else {
            return 1.0;
        };
        let n_v = x.len() - self.n_q;
        let q = x.rows(0, self.n_q).into_owned();
        let v = x.rows(self.n_q, n_v).into_owned();
        let dv = dx.rows(self.n_q, n_v).into_owned();
        let contacts = self.model.contact_query(&q, self.t);
        let alpha = contacts
            .points
            .iter()
            .filter(|p| p.params.mu > 0.0)
            .map(|p| {
                let v_t = p.velocity(&v).v_t;
                let dv_t = p.velocity_change(&dv).v_t;
                contact_alpha(&v_t, &dv_t, p.params.stiction_velocity, theta_max)
            })
            .fold(1.0, f64::min);
        clamp_alpha(alpha)
    }
}

/// Implicit Euler with convergence control, or with error control.
#[derive(Debug, Clone)]
pub struct ImplicitEuler {
    config: SolverConfig,
    error_control: bool,
    cache: JacobianCache,
    dynamics_jacobian: Option<DMatrix<f64>>,
    /// Step size the cached factorization was formed with.
    factored_h: f64,
    next_h: Option<f64>,
    work: WorkCounters,
}

impl ImplicitEuler {
    pub fn fixed_step(config: SolverConfig) -> Self {
        Self::new(config, false)
    }

    pub fn error_controlled(config: SolverConfig) -> Self {
        Self::new(config, true)
    }

    fn new(config: SolverConfig, error_control: bool) -> Self {
        Self {
            config,
            error_control,
            cache: JacobianCache::new(),
            dynamics_jacobian: None,
            factored_h: f64::NAN,
            next_h: None,
            work: WorkCounters::default(),
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// One attempted step of size `h` without any step-size control.
    pub fn step(
        &mut self,
        model: &dyn SystemModel,
        state: &SystemState,
        h: f64,
        trace: Option<&mut NewtonTrace>,
    ) -> Result<StepResult, SolverError> {
        let mut work = WorkCounters::default();
        let result = self.attempt(model, state, h, &mut work, trace);
        self.work += work;
        result.map(|next| {
            work.steps += 1;
            StepResult { state: next, work, converged: true }
        })
    }

    fn attempt(
        &mut self,
        model: &dyn SystemModel,
        state: &SystemState,
        h: f64,
        work: &mut WorkCounters,
        trace: Option<&mut NewtonTrace>,
    ) -> Result<SystemState, SolverError> {
        let quasi = self.config.jacobian_mode == JacobianMode::Quasi;
        let mut reuse = false;
        if quasi && !self.cache.is_empty() && self.factored_h != h {
            // A new step size needs a new factorization but not new derivatives.
            self.cache.invalidate();
            reuse = true;
        }
        if !quasi {
            self.cache.clear();
        }
        let previous = state.to_vector();
        let mut residual = Residual {
            model,
            t: state.t + h,
            h,
            previous: &previous,
            n_q: model.num_positions(),
            tals: self.config.tals_enabled.then_some(self.config.theta_max),
            dynamics_jacobian: &mut self.dynamics_jacobian,
            reuse_dynamics_jacobian: reuse,
            last: None,
            f_evals: 0,
        };
        let settings = self.config.newton_settings();
        let report = newton_solve(&mut residual, previous.clone(), &settings, &mut self.cache, trace);
        work.f_evals += residual.f_evals;
        work.add_newton(&report.stats);
        if report.stats.factorizations > 0 {
            self.factored_h = h;
        }
        let t = state.t;
        match report.status {
            NewtonStatus::Converged => {
                Ok(SystemState::from_vector(t + h, &report.x, model.num_positions()))
            }
            status => {
                // Retries start from fresh derivatives.
                self.cache.clear();
                self.dynamics_jacobian = None;
                if status == NewtonStatus::SingularJacobian {
                    Err(SolverError::SingularJacobian { t, h })
                } else {
                    Err(SolverError::NonConvergence { t, h })
                }
            }
        }
    }

    fn advance_fixed(
        &mut self,
        model: &dyn SystemModel,
        state: &SystemState,
        dt: f64,
        work: &mut WorkCounters,
    ) -> Result<SystemState, SolverError> {
        let h = self.config.h;
        let factor = self.config.h_min_factor;
        cover_with_convergence_control(state, dt, h, factor, work, |s, step, w| {
            self.attempt(model, s, step, w, None)
        })
    }

    fn advance_error_controlled(
        &mut self,
        model: &dyn SystemModel,
        state: &SystemState,
        dt: f64,
        work: &mut WorkCounters,
    ) -> Result<SystemState, SolverError> {
        let end = state.t + dt;
        let accuracy = self.config.accuracy;
        let min_step = self.config.min_step;
        let mut h = self.next_h.unwrap_or(self.config.h);
        let mut current = state.clone();
        while end - current.t > 1e-12 * end.abs().max(dt) {
            let remaining = end - current.t;
            let truncated = h >= remaining;
            let step = if truncated { remaining } else { h };
            if step < min_step {
                return Err(SolverError::StepTooSmall { t: current.t, h_min: min_step });
            }
            let outcome = self.attempt(model, &current, step, work, None).and_then(|full| {
                let middle = self.attempt(model, &current, 0.5 * step, work, None)?;
                let halves = self.attempt(model, &middle, 0.5 * step, work, None)?;
                Ok((full, halves))
            });
            let (full, halves) = match outcome {
                Ok(pair) => pair,
                Err(err) if err.is_retryable() => {
                    work.step_shrinks += 1;
                    h = 0.5 * step;
                    continue;
                }
                Err(err) => return Err(err),
            };
            let error = scaled_error(&full.to_vector(), &halves.to_vector(), accuracy);
            let factor = (SAFETY * error.powf(-ERROR_EXPONENT)).clamp(MIN_FACTOR, MAX_FACTOR);
            if error <= 1.0 {
                current = halves;
                if truncated {
                    current.t = end;
                }
                work.steps += 1;
                let proposal = step * factor;
                h = if truncated { proposal.max(h) } else { proposal };
            } else {
                work.step_shrinks += 1;
                h = step * factor.min(1.0);
            }
        }
        self.next_h = Some(h);
        current.t = end;
        Ok(current)
    }
}

/// Largest component of `|a − b| / (accuracy·max(1, |b|))`.
fn scaled_error(a: &DVector<f64>, b: &DVector<f64>, accuracy: f64) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / (accuracy * y.abs().max(1.0)))
        .fold(0.0, f64::max)
}

impl Integrator for ImplicitEuler {
    fn advance(
        &mut self,
        model: &dyn SystemModel,
        state: &SystemState,
        dt: f64,
    ) -> Result<StepResult, SolverError> {
        let mut work = WorkCounters::default();
        let outcome = if self.error_control {
            self.advance_error_controlled(model, state, dt, &mut work)
        } else {
            self.advance_fixed(model, state, dt, &mut work)
        };
        self.work += work;
        outcome.map(|next| StepResult { state: next, work, converged: true })
    }

    fn work(&self) -> WorkCounters {
        self.work
    }
}

/// A single implicit Euler step of size `config.h` with fresh derivatives.
pub fn implicit_euler_step(
    model: &dyn SystemModel,
    state: &SystemState,
    config: &SolverConfig,
) -> Result<StepResult, SolverError> {
    ImplicitEuler::fixed_step(*config).step(model, state, config.h, None)
}
