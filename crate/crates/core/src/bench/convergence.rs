use rayon::prelude::*;

use super::sweep::simulate_samples;
use super::{fit_loglog, SlopeFit};
use crate::solver::{IntegratorKind, SolverConfig};
use crate::system::{PlanarGripper, SystemModel, SystemState};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub h: f64,
    /// Nondimensional RMS error of the translational velocities.
    pub err_translational: f64,
    /// Nondimensional RMS error of the rotational velocities.
    pub err_rotational: f64,
    /// Error message for failed runs.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSettings {
    pub horizon: f64,
    pub sample_interval: f64,
    pub reference_step: f64,
    pub integrator: IntegratorKind,
    pub base: SolverConfig,
    /// Velocity indices and the factor that makes them nondimensional.
    pub translational: (Vec<usize>, f64),
    pub rotational: (Vec<usize>, f64),
}

impl ConvergenceSettings {
    /// Translational velocities scaled by `T/A`, the spin by `T`.
    pub fn for_gripper(gripper: &PlanarGripper) -> Self {
        Self {
            horizon: 0.6,
            sample_interval: 0.03,
            reference_step: super::DEFAULT_REFERENCE_STEP,
            integrator: IntegratorKind::Tamsi,
            base: SolverConfig::default(),
            translational: (vec![0, 1], gripper.period / gripper.amplitude),
            rotational: (vec![2], gripper.period),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub records: Vec<ConvergenceRecord>,
    pub translational_fit: Option<SlopeFit>,
    pub rotational_fit: Option<SlopeFit>,
}

fn run(
    model: &dyn SystemModel,
    settings: &ConvergenceSettings,
    h: f64,
) -> Result<Vec<SystemState>, String> {
    let config = SolverConfig { h, ..settings.base };
    config.validate().map_err(|e| e.to_string())?;
    let mut integrator = settings.integrator.build(config);
    simulate_samples(model, integrator.as_mut(), settings.sample_interval, settings.horizon)
        .map_err(|(_, e)| e.to_string())
}

fn group_error(
    test: &[SystemState],
    reference: &[SystemState],
    (indices, scale): &(Vec<usize>, f64),
) -> f64 {
    // The initial sample is shared and carries no error.
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in test.iter().zip(reference).skip(1) {
        for &i in indices {
            let d = scale * (a.v[i] - b.v[i]);
            sum += d * d;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

/// Errors of runs at each step in `steps` against one run at the reference
/// step, with least-squares slopes per group.
pub fn convergence_study(
    model: &dyn SystemModel,
    steps: &[f64],
    settings: &ConvergenceSettings,
) -> Result<ConvergenceStudy, String> {
    let reference = run(model, settings, settings.reference_step)
        .map_err(|e| format!("reference run failed: {e}"))?;
    let records: Vec<ConvergenceRecord> = steps
        .par_iter()
        .map(|&h| match run(model, settings, h) {
            Ok(test) => ConvergenceRecord {
                h,
                err_translational: group_error(&test, &reference, &settings.translational),
                err_rotational: group_error(&test, &reference, &settings.rotational),
                failure: None,
            },
            Err(e) => ConvergenceRecord {
                h,
                err_translational: f64::NAN,
                err_rotational: f64::NAN,
                failure: Some(e),
            },
        })
        .collect();
    let fit = |pick: fn(&ConvergenceRecord) -> f64| {
        let points: Vec<_> =
            records.iter().filter(|r| r.failure.is_none()).map(|r| (r.h, pick(r))).collect();
        fit_loglog(&points)
    };
    Ok(ConvergenceStudy {
        translational_fit: fit(|r| r.err_translational),
        rotational_fit: fit(|r| r.err_rotational),
        records,
    })
}
