//! Randomized self-checks of the analytic derivatives and the line search.
//!
//! Each check samples states from a seeded generator, so a given seed always
//! produces the same report.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3xX, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contact::ContactParameters;
use crate::solver::tals::{angle_between, contact_alpha, MIN_ALPHA};
use crate::solver::{Coupling, StepWorkspace};
use crate::system::{ContactPoint, ContactSet, NormalLaw, PlanarGripper, SystemModel};

/// Relative Frobenius error allowed between analytic and difference Jacobians.
pub const JACOBIAN_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub seed: u64,
    pub samples: usize,
    /// Relative perturbation added to analytic Jacobians, to prove the checks
    /// can fail.
    pub perturb_jacobian: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { seed: 0, samples: 1000, perturb_jacobian: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} ({} cases, {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.detail
        )
    }
}

/// Runs every check.
pub fn run_all(options: &CheckOptions) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut out = Vec::new();
    for (name, coupling) in [
        ("two_way_jacobian", Coupling::TwoWay),
        ("one_way_jacobian", Coupling::OneWay),
        ("frictionless_jacobian", Coupling::Frictionless),
    ] {
        out.push(jacobian_check(name, coupling, options, &mut rng));
    }
    out.push(delassus_psd_check(options, &mut rng));
    out.push(one_way_cholesky_check(options, &mut rng));
    out.push(tals_crossing_check(options, &mut rng));
    out.push(tals_angle_check(&mut rng));
    out
}

/// A random frozen step with a few contacts on a generic multibody system.
fn random_workspace(rng: &mut ChaCha8Rng, coupling: Coupling) -> StepWorkspace {
    let n_v = rng.random_range(2..=5);
    let n_c = rng.random_range(1..=3);
    let a = DMatrix::from_fn(n_v, n_v, |_, _| rng.random_range(-1.0..1.0));
    let mass = &a * a.transpose() + DMatrix::identity(n_v, n_v) * 0.1;
    let h = 10f64.powf(rng.random_range(-4.0..-2.0));
    let mut points = Vec::with_capacity(n_c);
    for _ in 0..n_c {
        let normal = random_unit(rng);
        let params = ContactParameters {
            stiffness: 10f64.powf(rng.random_range(3.0..5.0)),
            damping: rng.random_range(0.0..1.0),
            mu: rng.random_range(0.1..1.0),
            stiction_velocity: 1e-4,
        };
        points.push(ContactPoint {
            delta: rng.random_range(1e-4..2e-3),
            normal,
            jacobian: Matrix3xX::from_fn(n_v, |_, _| rng.random_range(-1.0..1.0)),
            surface_velocity: Vector3::from_fn(|_, _| rng.random_range(-1e-4..1e-4)),
            params,
            normal_law: NormalLaw::Compliant,
        });
    }
    let contacts = ContactSet { points };
    StepWorkspace {
        h,
        t0: 0.0,
        q0: DVector::zeros(n_v),
        kinematic_map: DMatrix::identity(n_v, n_v),
        p_star: DVector::from_fn(n_v, |_, _| rng.random_range(-1e-3..1e-3)),
        normal_jacobians: contacts.points.iter().map(|p| p.normal_jacobian()).collect(),
        tangent_jacobians: contacts.points.iter().map(|p| p.tangent_jacobian()).collect(),
        initial_normal_forces: contacts
            .points
            .iter()
            .map(|p| p.params.stiffness * p.delta * rng.random_range(0.5..1.5))
            .collect(),
        contacts,
        mass,
        coupling,
    }
}

/// A frozen step of the gripper at a perturbed configuration.
fn gripper_workspace(rng: &mut ChaCha8Rng, coupling: Coupling) -> StepWorkspace {
    let gripper = PlanarGripper::default();
    let mut state = gripper.initial_state();
    state.t = rng.random_range(0.0..gripper.period);
    state.q[0] += rng.random_range(-3e-4..3e-4);
    state.q[1] = gripper.pad_height(state.t) + rng.random_range(-1e-2..1e-2);
    state.q[2] = rng.random_range(-0.3..0.3);
    state.v = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
    StepWorkspace::new(&gripper, &state, 3e-3, coupling)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Velocities whose contact slip ratios stay clear of the kinks.
fn smooth_velocity(ws: &StepWorkspace, rng: &mut ChaCha8Rng) -> Option<DVector<f64>> {
    let n_v = ws.mass.nrows();
    for _ in 0..50 {
        let scale = 10f64.powf(rng.random_range(-4.5..-2.5));
        let v = DVector::from_fn(n_v, |_, _| rng.random_range(-scale..scale));
        let clear = ws.contacts.points.iter().all(|p| {
            let c = p.velocity(&v);
            let ratio = c.v_t.norm() / p.params.stiction_velocity;
            let dissipation = 1.0 - p.params.damping * c.v_n;
            let penetration = p.delta - ws.h * c.v_n;
            (ratio - 1.0).abs() > 0.05 && ratio > 1e-3 && dissipation > 1e-3 && penetration > 1e-3 * p.delta
        });
        if clear {
            return Some(v);
        }
    }
    None
}

fn perturbed(mut jac: DMatrix<f64>, amount: f64) -> DMatrix<f64> {
    if amount != 0.0 {
        let scale = jac.norm() * amount;
        jac[(0, 0)] += scale;
    }
    jac
}

fn difference_jacobian(ws: &StepWorkspace, v: &DVector<f64>, step: f64) -> DMatrix<f64> {
    let n = v.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = v.clone();
    for j in 0..n {
        probe[j] = v[j] + step;
        let plus = ws.residual(&probe);
        probe[j] = v[j] - step;
        let minus = ws.residual(&probe);
        probe[j] = v[j];
        jac.set_column(j, &((plus - minus) / (2.0 * step)));
    }
    jac
}

fn jacobian_check(
    name: &'static str,
    coupling: Coupling,
    options: &CheckOptions,
    rng: &mut ChaCha8Rng,
) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < options.samples {
        let ws = if cases % 4 == 0 {
            gripper_workspace(rng, coupling)
        } else {
            random_workspace(rng, coupling)
        };
        let Some(v) = smooth_velocity(&ws, rng) else { continue };
        let analytic = perturbed(ws.jacobian(&v), options.perturb_jacobian);
        let numeric = difference_jacobian(&ws, &v, 1e-9);
        let err = (&analytic - &numeric).norm() / analytic.norm();
        worst = worst.max(err);
        cases += 1;
    }
    CheckOutcome {
        name,
        passed: worst <= JACOBIAN_TOLERANCE,
        cases,
        detail: format!("max relative error {worst:.3e}"),
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn delassus_psd_check(options: &CheckOptions, rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    let mut asymmetry: f64 = 0.0;
    for k in 0..options.samples {
        let ws = if k % 4 == 0 {
            gripper_workspace(rng, Coupling::TwoWay)
        } else {
            random_workspace(rng, Coupling::TwoWay)
        };
        let scale = 10f64.powf(rng.random_range(-5.0..-1.0));
        let v = DVector::from_fn(ws.mass.nrows(), |_, _| rng.random_range(-scale..scale));
        let blocks = ws.delassus(&v);
        for w in [&blocks.normal, &blocks.tangential] {
            let norm = w.norm().max(f64::MIN_POSITIVE);
            asymmetry = asymmetry.max((w - w.transpose()).norm() / norm);
            worst = worst.min(min_eigenvalue(w) / norm);
        }
    }
    CheckOutcome {
        name: "delassus_psd",
        passed: worst >= -1e-10 && asymmetry <= 1e-12,
        cases: options.samples,
        detail: format!("min eigenvalue / norm {worst:.3e}, asymmetry {asymmetry:.3e}"),
    }
}

fn one_way_cholesky_check(options: &CheckOptions, rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut failures = 0;
    for k in 0..options.samples {
        let ws = if k % 4 == 0 {
            gripper_workspace(rng, Coupling::OneWay)
        } else {
            random_workspace(rng, Coupling::OneWay)
        };
        let scale = 10f64.powf(rng.random_range(-5.0..-1.0));
        let v = DVector::from_fn(ws.mass.nrows(), |_, _| rng.random_range(-scale..scale));
        if ws.jacobian(&v).cholesky().is_none() {
            failures += 1;
        }
    }
    CheckOutcome {
        name: "one_way_cholesky",
        passed: failures == 0,
        cases: options.samples,
        detail: format!("{failures} factorization failures"),
    }
}

fn tals_crossing_check(options: &CheckOptions, rng: &mut ChaCha8Rng) -> CheckOutcome {
    let v_s = 1e-4;
    let mut worst: f64 = 0.0;
    let mut inside = true;
    let mut cases = 0;
    // The exact reversal case first.
    let v = Vector3::new(2e-4, 0.0, 0.0);
    let dv = Vector3::new(-4e-4, 0.0, 0.0);
    let exact = contact_alpha(&v, &dv, v_s, PI / 3.0) == 0.5;
    while cases < options.samples {
        let v = random_unit(rng) * v_s * rng.random_range(1.1..100.0);
        // Aim through the disk, overshooting it.
        let target = random_unit(rng) * v_s * rng.random_range(0.0..0.9);
        let through = target - v;
        let dv = through * rng.random_range(1.05..3.0) / 1.0;
        let closest = -v.dot(&dv) / dv.norm_squared();
        if !(closest > 0.0 && closest < 1.0 && (v + dv * closest).norm() < v_s) {
            continue;
        }
        let alpha = contact_alpha(&v, &dv, v_s, PI / 3.0);
        let next = v + dv * alpha;
        worst = worst.max(next.dot(&dv).abs() / (v.norm() * dv.norm()));
        inside &= next.norm() < v_s;
        cases += 1;
    }
    CheckOutcome {
        name: "tals_crossing",
        passed: exact && inside && worst <= 1e-12,
        cases: cases + 1,
        detail: format!("max |v·Δ|/(|v||Δ|) {worst:.3e}"),
    }
}

fn angle_oracle(v: &Vector3<f64>, dv: &Vector3<f64>, max_angle: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if angle_between(v, &(v + dv * mid)) <= max_angle {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn tals_angle_check(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let v_s = 1e-4;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 100 {
        let v = random_unit(rng) * rng.random_range(1e-3..1.0);
        let dv = random_unit(rng) * v.norm() * rng.random_range(0.5..20.0);
        let closest = -v.dot(&dv) / dv.norm_squared();
        let crosses = closest > 0.0 && closest < 1.0 && (v + dv * closest).norm() < v_s;
        if crosses || (v + dv).norm() < v_s || angle_between(&v, &(v + dv)) <= PI / 3.0 {
            continue;
        }
        let expected = angle_oracle(&v, &dv, PI / 3.0).max(MIN_ALPHA);
        worst = worst.max((contact_alpha(&v, &dv, v_s, PI / 3.0).max(MIN_ALPHA) - expected).abs());
        cases += 1;
    }
    CheckOutcome {
        name: "tals_angle",
        passed: worst <= 1e-6,
        cases,
        detail: format!("max |alpha - oracle| {worst:.3e}"),
    }
}
