//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --release --test acceptance -- 1 9`.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::Vector3;
use tamsi::bench::{
    convergence_study, fit_loglog, robustness_run, work_precision_sweep, ConvergenceSettings,
    MethodSpec, SweepSettings, WorkPrecisionRecord,
};
use tamsi::checks::{run_all, CheckOptions, CheckOutcome};
use tamsi::solver::tals::angle_between;
use tamsi::solver::{
    contact_alpha, Coupling, FrozenScheme, ImplicitEuler, IntegratorKind, JacobianMode,
    NewtonTrace, SolverConfig,
};
use tamsi::system::{BoxSlide, ParticleDrop, PlanarGripper, SystemModel, SystemState};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

// Box transition under Newton, with and without the line search.
fn stiction_transition() -> Outcome {
    let model = BoxSlide::default();
    let h = 1e-2;
    let config = SolverConfig { h, divergence_check: false, ..Default::default() };
    let mut state = model.initial_state();
    let mut ie = ImplicitEuler::fixed_step(config);
    // Advance through the sliding phase to the step where the box sticks.
    while state.t < 0.15 - 1e-9 {
        match ie.step(&model, &state, h, None) {
            Ok(step) => state = step.state,
            Err(e) => return outcome(false, format!("sliding phase failed: {e}")),
        }
    }
    let mut plain = NewtonTrace::default();
    let without = ImplicitEuler::fixed_step(SolverConfig { tals_enabled: false, ..config })
        .step(&model, &state, h, Some(&mut plain));
    let mut limited = NewtonTrace::default();
    let with = ImplicitEuler::fixed_step(SolverConfig { tals_enabled: true, ..config })
        .step(&model, &state, h, Some(&mut limited));

    let velocities: Vec<f64> = plain.iterates.iter().map(|x| x[1]).collect();
    let tail = &velocities[velocities.len().saturating_sub(10)..];
    let alternating = tail.len() >= 10 && tail.windows(2).all(|p| p[0] * p[1] < 0.0);
    let r = &limited.residual_norms;
    let superlinear = r.len() >= 3
        && (r.len() - 2..r.len()).all(|k| r[k] <= r[k - 1].powf(1.5));
    let passed = without.is_err() && plain.iterates.len() >= 30 && alternating && with.is_ok() && superlinear;
    outcome(
        passed,
        format!(
            "t = {:.2} s; without: {} iterates, sign-alternating tail {alternating}, {}; with: {}, residuals {:?}",
            state.t,
            plain.iterates.len(),
            match &without {
                Ok(_) => "converged".to_string(),
                Err(e) => e.to_string(),
            },
            if with.is_ok() { "converged" } else { "failed" },
            r.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>()
        ),
    )
}

const BOX_STEPS: [f64; 14] = [
    2.5e-2, 1.25e-2, 5e-3, 2.5e-3, 1e-3, 5e-4, 2.5e-4, 1e-4, 5e-5, 2.5e-5, 1e-5, 5e-6, 2.5e-6, 1e-6,
];

fn box_methods() -> Vec<MethodSpec> {
    let mut methods = Vec::new();
    for newton in [JacobianMode::Full, JacobianMode::Quasi] {
        for tals in [false, true] {
            methods.push(MethodSpec::new(IntegratorKind::ImplicitEuler, newton, tals));
        }
    }
    methods
}

fn box_sweep() -> &'static [WorkPrecisionRecord] {
    static SWEEP: OnceLock<Vec<WorkPrecisionRecord>> = OnceLock::new();
    SWEEP.get_or_init(|| {
        work_precision_sweep(&BoxSlide::default(), &box_methods(), &BOX_STEPS, &SweepSettings::default())
    })
}

// First-order slope of the error against h for fixed-step implicit Euler.
fn box_slope() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for method in box_methods() {
        let points: Vec<(f64, f64)> = box_sweep()
            .iter()
            .filter(|r| r.method == method && r.status.is_ok() && r.knob <= 1e-3 + 1e-15)
            .map(|r| (r.knob, r.error))
            .collect();
        match fit_loglog(&points) {
            Some(fit) if points.len() >= 5 => {
                passed &= (fit.slope - 1.0).abs() <= 0.15;
                parts.push(format!("{method} {:.3} ({} pts)", fit.slope, fit.points));
            }
            _ => {
                passed = false;
                parts.push(format!("{method}: too few successful cells"));
            }
        }
    }
    outcome(passed, parts.join(", "))
}

/// Cheapest cost among successful cells reaching `error` or better.
fn cost_to_reach(records: &[&WorkPrecisionRecord], error: f64) -> Option<u64> {
    records
        .iter()
        .filter(|r| r.status.is_ok() && r.error <= error)
        .map(|r| r.work.f_evals)
        .min()
}

// Cost saved by the line search in the coarse regime.
fn tals_savings() -> Outcome {
    let v_s = BoxSlide::default().stiction_velocity;
    let mut passed = true;
    let mut parts = Vec::new();
    for (newton, required) in [(JacobianMode::Full, 2.0), (JacobianMode::Quasi, 1.5)] {
        let pick = |tals: bool| -> Vec<&WorkPrecisionRecord> {
            let method = MethodSpec::new(IntegratorKind::ImplicitEuler, newton, tals);
            box_sweep().iter().filter(|r| r.method == method).collect()
        };
        let (limited, plain) = (pick(true), pick(false));
        let ratios: Vec<f64> = limited
            .iter()
            .filter(|r| r.status.is_ok() && r.error > v_s)
            .filter_map(|r| cost_to_reach(&plain, r.error).map(|w| w as f64 / r.work.f_evals as f64))
            .collect();
        let best = ratios.iter().copied().fold(f64::NAN, f64::max);
        let worst = ratios.iter().copied().fold(f64::NAN, f64::min);
        passed &= best >= required;
        parts.push(format!(
            "{newton}: savings up to {best:.1}x (least {worst:.1}x, {} matched levels, need {required}x)",
            ratios.len()
        ));
    }
    outcome(passed, parts.join("; "))
}

// First-order convergence on the gripper.
fn gripper_convergence() -> Outcome {
    let gripper = PlanarGripper::default();
    let settings = ConvergenceSettings::for_gripper(&gripper);
    let study = match convergence_study(&gripper, &[3e-3, 1e-3, 3e-4, 1e-4], &settings) {
        Ok(s) => s,
        Err(e) => return outcome(false, e),
    };
    let (Some(t), Some(r)) = (study.translational_fit, study.rotational_fit) else {
        return outcome(false, "too few successful runs to fit");
    };
    let all_ran = study.records.iter().all(|r| r.failure.is_none());
    outcome(
        all_ran && (t.slope - 1.0).abs() <= 0.2 && (r.slope - 1.0).abs() <= 0.2,
        format!("translational slope {:.3}, rotational slope {:.3}", t.slope, r.slope),
    )
}

// TAMSI on the gripper for 5 s at 3 ms.
fn gripper_robustness() -> Outcome {
    let gripper = PlanarGripper::default();
    let v_s = gripper.stiction_velocity;
    let run = robustness_run(&gripper, MethodSpec::tamsi(), &SolverConfig::default(), 3e-3, 5.0, 0.1);
    let periods = (5.0 / gripper.period).round() as usize;
    let per_period: Vec<f64> = (0..periods)
        .map(|p| {
            let (lo, hi) = (p as f64 * gripper.period, (p + 1) as f64 * gripper.period);
            run.slip
                .iter()
                .filter(|(t, _)| *t > lo && *t <= hi + 1e-9)
                .map(|s| s.1)
                .fold(0.0, f64::max)
        })
        .collect();
    let least = per_period.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        run.completed() && run.max_slip() >= 100.0 * v_s && least >= 100.0 * v_s,
        format!(
            "reached {:.3} s, failure {:?}, shrinks {}, max slip {:.3} m/s, weakest period slip {:.3} m/s",
            run.simulated,
            run.failure,
            run.work.step_shrinks,
            run.max_slip(),
            least
        ),
    )
}

// Work ordering TAMSI < IE+FN+TALS < IE+FN on the gripper.
fn gripper_cost() -> Outcome {
    let gripper = PlanarGripper::default();
    // Without the line search the pad transients need steps far below h/64.
    let base = SolverConfig { h_min_factor: 1.0 / 1024.0, ..Default::default() };
    let methods = [
        MethodSpec::tamsi(),
        MethodSpec::new(IntegratorKind::ImplicitEuler, JacobianMode::Full, true),
        MethodSpec::new(IntegratorKind::ImplicitEuler, JacobianMode::Full, false),
    ];
    let runs: Vec<_> =
        methods.iter().map(|&m| robustness_run(&gripper, m, &base, 3e-3, 5.0, 0.1)).collect();
    let f: Vec<u64> = runs.iter().map(|r| r.work.f_evals).collect();
    let all_done = runs.iter().all(|r| r.completed());
    outcome(
        all_done && f[0] < f[1] && f[1] < f[2] && 3 * f[0] <= f[2],
        format!(
            "f_evals tamsi {}, ie+fn+tals {}, ie+fn {} ({:.0}x); shrinks {} / {} / {}; completed {all_done}",
            f[0],
            f[1],
            f[2],
            f[2] as f64 / f[0] as f64,
            runs[0].work.step_shrinks,
            runs[1].work.step_shrinks,
            runs[2].work.step_shrinks
        ),
    )
}

fn particle_energies(coupling: Coupling) -> (Vec<SystemState>, Vec<f64>) {
    let model = ParticleDrop::default();
    let h = 1e-2;
    let mut scheme = FrozenScheme::new(coupling, SolverConfig::with_step(h));
    let mut state = model.initial_state();
    let mut states = vec![state.clone()];
    for _ in 0..1000 {
        match scheme.step(&model, &state, h) {
            Ok(step) => state = step.state,
            Err(_) => break,
        }
        states.push(state.clone());
    }
    let energy = states.iter().map(|s| model.mechanical_energy(s)).collect();
    (states, energy)
}

// Energy of the bouncing particle under two-way and one-way coupling.
fn particle_energy() -> Outcome {
    let e0 = ParticleDrop::default().mechanical_energy(&ParticleDrop::default().initial_state());
    let (states, energy) = particle_energies(Coupling::TwoWay);
    let bounded = states.len() == 1001 && energy.iter().all(|&e| e <= 1.05 * e0 && e >= -0.05 * e0);
    let peak = energy.iter().copied().fold(f64::MIN, f64::max);
    let settled = *energy.last().unwrap();

    let (states, energy) = particle_energies(Coupling::OneWay);
    // Free-flight energy right after each lift-off.
    let bounces: Vec<f64> = (1..states.len())
        .filter(|&k| states[k - 1].q[0] <= 0.0 && states[k].q[0] > 0.0)
        .map(|k| energy[k])
        .collect();
    let growing = bounces.len() >= 2 && bounces[0] > e0 && bounces.windows(2).all(|p| p[1] > p[0]);
    outcome(
        bounded && growing,
        format!(
            "two-way peak {:.4} J vs initial {:.4} J, final {:.2e} J; one-way energies after each bounce {:?}",
            peak,
            e0,
            settled,
            bounces.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn check_summary(outcomes: &[CheckOutcome]) -> String {
    outcomes.iter().map(|o| o.to_string()).collect::<Vec<_>>().join("; ")
}

// Analytic Jacobians against finite differences, PSD blocks, Cholesky.
fn jacobian_suite() -> Outcome {
    let outcomes: Vec<CheckOutcome> = run_all(&CheckOptions::default())
        .into_iter()
        .filter(|o| !o.name.starts_with("tals"))
        .collect();
    let enough = outcomes.iter().all(|o| o.cases >= 1000);
    outcome(enough && outcomes.iter().all(|o| o.passed), check_summary(&outcomes))
}

// Line search postconditions.
fn tals_contract() -> Outcome {
    let exact = contact_alpha(&Vector3::new(2e-4, 0.0, 0.0), &Vector3::new(-4e-4, 0.0, 0.0), 1e-4, PI / 3.0);
    let v = Vector3::new(1e-2, 0.0, 0.0);
    let dv = Vector3::new(-1e-2, 1e-2 * (PI / 2.5).tan(), 0.0);
    let alpha = contact_alpha(&v, &dv, 1e-4, PI / 3.0);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if angle_between(&v, &(v + dv * mid)) <= PI / 3.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let outcomes: Vec<CheckOutcome> = run_all(&CheckOptions::default())
        .into_iter()
        .filter(|o| o.name.starts_with("tals"))
        .collect();
    let random_cases = outcomes.iter().find(|o| o.name == "tals_angle").map_or(0, |o| o.cases);
    outcome(
        exact == 0.5 && (alpha - lo).abs() <= 1e-6 && random_cases >= 100 && outcomes.iter().all(|o| o.passed),
        format!(
            "reversal alpha {exact}, steep turn alpha {alpha:.9} vs oracle {lo:.9}; {}",
            check_summary(&outcomes)
        ),
    )
}

// Steady slip under a constant push for every integrator.
fn steady_slip() -> Outcome {
    let model = BoxSlide::constant_force(2.0);
    let expected = model.steady_slip_velocity(2.0);
    let mut passed = true;
    let mut parts = Vec::new();
    for kind in IntegratorKind::ALL {
        let h = if kind == IntegratorKind::Rk3 { 1e-5 } else { 1e-4 };
        let config = SolverConfig { h, accuracy: 1e-6, ..Default::default() };
        let mut integrator = kind.build(config);
        let reached = integrator.advance(&model, &model.initial_state(), 0.05);
        match reached {
            Ok(step) => {
                let rel = (step.state.v[0] - expected).abs() / expected;
                passed &= rel <= 0.01;
                parts.push(format!("{kind} {:.6e} ({rel:.1e})", step.state.v[0]));
            }
            Err(e) => {
                passed = false;
                parts.push(format!("{kind} failed: {e}"));
            }
        }
    }
    outcome(passed, format!("expected {expected:.6e} m/s; {}", parts.join(", ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("stiction transition under Newton", stiction_transition),
        ("box work-precision slope", box_slope),
        ("line search savings on the box", tals_savings),
        ("gripper convergence order", gripper_convergence),
        ("gripper robustness", gripper_robustness),
        ("gripper cost ordering", gripper_cost),
        ("particle energy under coupling", particle_energy),
        ("analytic Jacobians", jacobian_suite),
        ("line search contract", tals_contract),
        ("steady slip equilibrium", steady_slip),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (index, (name, criterion)) in criteria.iter().enumerate() {
        let number = index + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let clock = Instant::now();
        let result = criterion();
        if !result.passed {
            failures += 1;
        }
        println!(
            "{} {number:>2} {name} [{:.1} s]: {}",
            if result.passed { "PASS" } else { "FAIL" },
            clock.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
