//! Kutta's explicit third-order method, used for reference solutions.

use nalgebra::DVector;

use super::{whole_steps, Integrator, SolverError, StepResult, WorkCounters};
use crate::system::{state_derivative, SystemModel, SystemState};

/// One step of size `h`. Costs three dynamics evaluations.
pub fn rk3_step(model: &dyn SystemModel, state: &SystemState, h: f64) -> SystemState {
    let n_q = model.num_positions();
    let x = state.to_vector();
    let next = rk3_vector(model, state.t, &x, h);
    SystemState::from_vector(state.t + h, &next, n_q)
}

fn rk3_vector(model: &dyn SystemModel, t: f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = state_derivative(model, t, x);
    let k2 = state_derivative(model, t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = state_derivative(model, t + h, &(x - &k1 * h + &k2 * (2.0 * h)));
    x + (k1 + k2 * 4.0 + k3) * (h / 6.0)
}

#[derive(Debug, Clone)]
pub struct Rk3 {
    h: f64,
    work: WorkCounters,
}

impl Rk3 {
    pub fn new(h: f64) -> Self {
        Self { h, work: WorkCounters::default() }
    }
}

impl Integrator for Rk3 {
    fn advance(
        &mut self,
        model: &dyn SystemModel,
        state: &SystemState,
        dt: f64,
    ) -> Result<StepResult, SolverError> {
        let n_q = model.num_positions();
        let n = whole_steps(dt, self.h);
        let mut x = state.to_vector();
        let mut work = WorkCounters::default();
        for k in 0..n {
            x = rk3_vector(model, state.t + k as f64 * self.h, &x, self.h);
            work.f_evals += 3;
            work.steps += 1;
        }
        let remainder = dt - n as f64 * self.h;
        if remainder > 1e-9 * self.h {
            x = rk3_vector(model, state.t + n as f64 * self.h, &x, remainder);
            work.f_evals += 3;
            work.steps += 1;
        }
        self.work += work;
        Ok(StepResult {
            state: SystemState::from_vector(state.t + dt, &x, n_q),
            work,
            converged: true,
        })
    }

    fn work(&self) -> WorkCounters {
        self.work
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{ContactSet, LinearDecay};
    use nalgebra::DMatrix;

    /// `v̇ = g(t)` with no positions and no contacts.
    struct Forced<G: Fn(f64, f64) -> f64 + Send + Sync>(G);

    impl<G: Fn(f64, f64) -> f64 + Send + Sync> SystemModel for Forced<G> {
        fn name(&self) -> &str {
            "forced"
        }
        fn num_positions(&self) -> usize {
            0
        }
        fn num_velocities(&self) -> usize {
            1
        }
        fn mass_matrix(&self, _q: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::identity(1, 1)
        }
        fn applied_forces(&self, _q: &DVector<f64>, v: &DVector<f64>, t: f64) -> DVector<f64> {
            DVector::from_element(1, (self.0)(t, v[0]))
        }
        fn kinematic_map(&self, _q: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::zeros(0, 1)
        }
        fn contact_query(&self, _q: &DVector<f64>, _t: f64) -> ContactSet {
            ContactSet::default()
        }
        fn initial_state(&self) -> SystemState {
            SystemState::new(0.0, DVector::zeros(0), DVector::from_element(1, 1.0))
        }
    }

    #[test]
    fn zero_dynamics_is_identity() {
        let model = Forced(|_, _| 0.0);
        let s = model.initial_state();
        assert_eq!(rk3_step(&model, &s, 0.1).v, s.v);
    }

    #[test]
    fn exponential_growth_to_one_second() {
        let model = Forced(|_, x| x);
        let mut rk = Rk3::new(1e-3);
        let end = rk.advance(&model, &model.initial_state(), 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((end.state.v[0] - e).abs() / e < 1e-9);
        assert_eq!(end.work.f_evals, 3000);
        assert_eq!(end.state.t, 1.0);
    }

    #[test]
    fn cubic_is_integrated_exactly() {
        let model = Forced(|t, _| 3.0 * t * t);
        let s = SystemState::new(0.5, DVector::zeros(0), DVector::from_element(1, 0.0));
        let next = rk3_step(&model, &s, 0.3);
        let exact = 0.8f64.powi(3) - 0.5f64.powi(3);
        assert!((next.v[0] - exact).abs() < 1e-15);
    }

    #[test]
    fn third_order_convergence_on_decay() {
        let model = LinearDecay::new(1.0);
        let s = model.initial_state();
        let err = |h: f64| {
            let mut rk = Rk3::new(h);
            let end = rk.advance(&model, &s, 1.0).unwrap();
            (end.state.v[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio.log2() - 3.0).abs() < 0.15, "observed order {}", ratio.log2());
    }
}
