//! Five seconds of the gripper shaking a mug that slips once per period.
//! Compares TAMSI with implicit Euler, with and without the line search.
//!
//! `cargo run --release --example gripper_robustness -- [--all]`
//!
//! Plain implicit Euler needs tens of millions of evaluations; pass `--all`
//! to include it.

use tamsi::bench::{robustness_run, MethodSpec};
use tamsi::solver::{IntegratorKind, JacobianMode, SolverConfig};
use tamsi::system::PlanarGripper;

fn main() {
    let include_plain = std::env::args().any(|a| a == "--all");
    let gripper = PlanarGripper::default();
    println!(
        "grip {:.1} N, mu {}, shake {} m every {} s, friction needed at peak {:.2} N",
        gripper.grip_force(),
        gripper.mu,
        gripper.amplitude,
        gripper.period,
        gripper.peak_required_friction()
    );
    let base = SolverConfig { h_min_factor: 1.0 / 1024.0, ..Default::default() };
    let mut methods = vec![
        MethodSpec::tamsi(),
        MethodSpec::new(IntegratorKind::ImplicitEuler, JacobianMode::Full, true),
    ];
    if include_plain {
        methods.push(MethodSpec::new(IntegratorKind::ImplicitEuler, JacobianMode::Full, false));
    }
    println!("\n{:>12} {:>8} {:>12} {:>8} {:>10} {:>10}", "method", "reached", "f_evals", "shrinks", "max slip", "wall [s]");
    for method in methods {
        let run = robustness_run(&gripper, method, &base, 3e-3, 5.0, 0.5);
        println!(
            "{:>12} {:>8.3} {:>12} {:>8} {:>10.3} {:>10.2}",
            method.to_string(),
            run.simulated,
            run.work.f_evals,
            run.work.step_shrinks,
            run.max_slip(),
            run.wall_ns as f64 * 1e-9
        );
        if let Some(e) = &run.failure {
            println!("{:>12} failed: {e}", "");
        }
        if !run.shrink_times.is_empty() {
            let first: Vec<String> = run.shrink_times.iter().take(5).map(|t| format!("{t:.3}")).collect();
            println!("{:>12} first shrinks at t = {}", "", first.join(", "));
        }
    }
}
