use std::time::Instant;

use super::sweep::MethodSpec;
use crate::solver::{SolverConfig, WorkCounters};
use crate::system::SystemModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressSample {
    pub t: f64,
    pub wall_ns: u128,
    pub work: WorkCounters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessSummary {
    pub method: MethodSpec,
    pub h: f64,
    pub horizon: f64,
    /// Time reached; equals the horizon unless the run failed.
    pub simulated: f64,
    pub failure: Option<String>,
    pub work: WorkCounters,
    pub wall_ns: u128,
    pub progress: Vec<ProgressSample>,
    /// Largest tangential contact speed after each step, `(t, ‖v_t‖)`.
    pub slip: Vec<(f64, f64)>,
    /// Start times of steps that needed convergence-control halvings.
    pub shrink_times: Vec<f64>,
}

impl RobustnessSummary {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn max_slip(&self) -> f64 {
        self.slip.iter().map(|s| s.1).fold(0.0, f64::max)
    }
}

/// Runs `method` over `horizon` one step of `h` at a time, recording work,
/// wall time every `progress_interval`, the slip speed and where steps had to
/// be subdivided.
pub fn robustness_run(
    model: &dyn SystemModel,
    method: MethodSpec,
    base: &SolverConfig,
    h: f64,
    horizon: f64,
    progress_interval: f64,
) -> RobustnessSummary {
    let config = method.config(base, h);
    let mut summary = RobustnessSummary {
        method,
        h,
        horizon,
        simulated: 0.0,
        failure: None,
        work: WorkCounters::default(),
        wall_ns: 0,
        progress: Vec::new(),
        slip: Vec::new(),
        shrink_times: Vec::new(),
    };
    if let Err(err) = config.validate() {
        summary.failure = Some(err.to_string());
        return summary;
    }
    let mut integrator = method.integrator.build(config);
    let mut state = model.initial_state();
    let t0 = state.t;
    let whole = horizon / h;
    let steps = if (whole - whole.round()).abs() < 1e-9 * whole.max(1.0) {
        whole.round() as usize
    } else {
        whole.ceil() as usize
    };
    let every = ((progress_interval / h).round() as usize).max(1);
    let clock = Instant::now();
    summary.progress.push(ProgressSample { t: t0, wall_ns: 0, work: WorkCounters::default() });
    for k in 1..=steps {
        let end = (t0 + k as f64 * h).min(t0 + horizon);
        match integrator.advance(model, &state, end - state.t) {
            Ok(step) => {
                if step.work.step_shrinks > 0 {
                    summary.shrink_times.push(state.t);
                }
                state = step.state;
                state.t = end;
            }
            Err(err) => {
                summary.failure = Some(err.to_string());
                break;
            }
        }
        let contacts = model.contact_query(&state.q, state.t);
        let slip = contacts
            .velocities(&state.v)
            .iter()
            .map(|c| c.v_t.norm())
            .fold(0.0, f64::max);
        summary.slip.push((state.t, slip));
        if k % every == 0 || k == steps {
            summary.progress.push(ProgressSample {
                t: state.t,
                wall_ns: clock.elapsed().as_nanos(),
                work: integrator.work(),
            });
        }
    }
    summary.simulated = state.t - t0;
    summary.work = integrator.work();
    summary.wall_ns = clock.elapsed().as_nanos();
    summary
}
