//! Damped Newton iteration with a rate-based stopping rule and optional
//! Jacobian reuse.
//!
//! Convergence is judged on the weighted RMS norm of the update, with weights
//! `w_j = atol + rtol·|x_j|`. From the second iteration on, the contraction
//! rate `θ_k = ‖Δx_k‖ / ‖Δx_{k−1}‖` is estimated and the iteration stops when
//! `θ_k/(1 − θ_k)·‖Δx_k‖ ≤ 1`. Two consecutive rates `θ_k ≥ 1` are treated as
//! divergence.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use super::JacobianMode;

/// A nonlinear system `r(x) = 0` solved by Newton's method.
pub trait NewtonSystem {
    fn residual(&mut self, x: &DVector<f64>) -> DVector<f64>;

    fn jacobian(&mut self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Scaling `α ∈ (0, 1]` applied to the update `dx` computed at `x`.
    fn limit_step(&mut self, _x: &DVector<f64>, _dx: &DVector<f64>) -> f64 {
        1.0
    }
}

/// Adapts a pair of closures into a [`NewtonSystem`].
pub struct FnSystem<R, J> {
    pub residual: R,
    pub jacobian: J,
}

impl<R, J> NewtonSystem for FnSystem<R, J>
where
    R: FnMut(&DVector<f64>) -> DVector<f64>,
    J: FnMut(&DVector<f64>) -> DMatrix<f64>,
{
    fn residual(&mut self, x: &DVector<f64>) -> DVector<f64> {
        (self.residual)(x)
    }

    fn jacobian(&mut self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.jacobian)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_iterations: usize,
    pub mode: JacobianMode,
    /// Quasi-Newton: refactor after this many reuses of one factorization.
    pub max_reuses: usize,
    /// Stop early on two consecutive rates `θ ≥ 1`.
    pub divergence_check: bool,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-8,
            max_iterations: 30,
            mode: JacobianMode::Full,
            max_reuses: 20,
            divergence_check: true,
        }
    }
}

/// Factorized iteration matrix kept between Newton solves.
#[derive(Debug, Clone, Default)]
pub struct JacobianCache {
    lu: Option<LU<f64, Dyn, Dyn>>,
    reuses: usize,
    stale: bool,
}

impl JacobianCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Forces a fresh Jacobian on the next iteration.
    pub fn invalidate(&mut self) {
        self.stale = true;
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }

    pub fn is_empty(&self) -> bool {
        self.lu.is_none()
    }

    fn needs_refresh(&self, settings: &NewtonSettings, dim: usize) -> bool {
        match (&self.lu, settings.mode) {
            (_, JacobianMode::Full) => true,
            (None, _) => true,
            (Some(lu), JacobianMode::Quasi) => {
                self.stale || self.reuses >= settings.max_reuses || lu.l().nrows() != dim
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonStatus {
    Converged,
    Diverged,
    IterationLimit,
    SingularJacobian,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residual_evals: usize,
    pub jacobian_evals: usize,
    pub factorizations: usize,
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub x: DVector<f64>,
    pub status: NewtonStatus,
    pub stats: NewtonStats,
}

impl NewtonReport {
    pub fn converged(&self) -> bool {
        self.status == NewtonStatus::Converged
    }
}

/// Per-iteration history, for diagnostics.
#[derive(Debug, Clone, Default)]
pub struct NewtonTrace {
    /// Iterate at which each residual was evaluated.
    pub iterates: Vec<DVector<f64>>,
    /// Euclidean norm of `r(x_k)`.
    pub residual_norms: Vec<f64>,
    /// Step scaling applied by the limiter.
    pub alphas: Vec<f64>,
    /// Weighted norm of each applied update.
    pub update_norms: Vec<f64>,
}

/// Weighted RMS norm with `w_j = atol + rtol·|scale_j|`.
pub fn weighted_rms(dx: &DVector<f64>, scale: &DVector<f64>, atol: f64, rtol: f64) -> f64 {
    if dx.is_empty() {
        return 0.0;
    }
    let sum: f64 = dx
        .iter()
        .zip(scale.iter())
        .map(|(d, s)| {
            let w = atol + rtol * s.abs();
            (d / w) * (d / w)
        })
        .sum();
    (sum / dx.len() as f64).sqrt()
}

/// Below this weighted update norm the iteration is accepted without a rate.
const ABSOLUTE_ACCEPT: f64 = 0.01;

pub fn newton_solve<S: NewtonSystem + ?Sized>(
    system: &mut S,
    x0: DVector<f64>,
    settings: &NewtonSettings,
    cache: &mut JacobianCache,
    mut trace: Option<&mut NewtonTrace>,
) -> NewtonReport {
    let dim = x0.len();
    let mut x = x0;
    let mut stats = NewtonStats::default();
    let mut previous_norm: Option<f64> = None;
    let mut diverging = 0;

    let finish = |x: DVector<f64>, status, stats| NewtonReport { x, status, stats };

    for _ in 0..settings.max_iterations {
        let r = system.residual(&x);
        stats.residual_evals += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.iterates.push(x.clone());
            t.residual_norms.push(r.norm());
        }
        if !r.iter().all(|v| v.is_finite()) {
            return finish(x, NewtonStatus::Diverged, stats);
        }

        if cache.needs_refresh(settings, dim) {
            let jac = system.jacobian(&x);
            stats.jacobian_evals += 1;
            let lu = jac.lu();
            stats.factorizations += 1;
            if !lu.is_invertible() {
                cache.clear();
                return finish(x, NewtonStatus::SingularJacobian, stats);
            }
            cache.lu = Some(lu);
            cache.reuses = 0;
            cache.stale = false;
        } else {
            cache.reuses += 1;
        }
        let lu = cache.lu.as_ref().expect("factorization present");
        let mut dx = match lu.solve(&r) {
            Some(sol) if sol.iter().all(|v| v.is_finite()) => -sol,
            _ => {
                cache.clear();
                return finish(x, NewtonStatus::SingularJacobian, stats);
            }
        };

        let alpha = system.limit_step(&x, &dx);
        if alpha < 1.0 {
            dx *= alpha;
        }
        let norm = weighted_rms(&dx, &x, settings.atol, settings.rtol);
        x += &dx;
        stats.iterations += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.alphas.push(alpha);
            t.update_norms.push(norm);
        }
        if !norm.is_finite() {
            return finish(x, NewtonStatus::Diverged, stats);
        }
        if alpha < 1.0 {
            // A limited update says nothing about the contraction rate.
            previous_norm = None;
            continue;
        }
        if norm <= ABSOLUTE_ACCEPT {
            return finish(x, NewtonStatus::Converged, stats);
        }
        if let Some(previous) = previous_norm {
            let theta = norm / previous;
            if theta >= 1.0 {
                diverging += 1;
                if settings.divergence_check && diverging >= 2 {
                    return finish(x, NewtonStatus::Diverged, stats);
                }
            } else {
                diverging = 0;
                if theta / (1.0 - theta) * norm <= 1.0 {
                    return finish(x, NewtonStatus::Converged, stats);
                }
            }
            if settings.mode == JacobianMode::Quasi && theta > 0.5 {
                cache.invalidate();
            }
        }
        previous_norm = Some(norm);
    }
    finish(x, NewtonStatus::IterationLimit, stats)
}
