//! Error of TAMSI on the gripper against a fine-step run, and the fitted
//! order.
//!
//! `cargo run --release --example gripper_convergence -- [reference_step]`
//!
//! The reference step defaults to 1e-6 s for a quick run; use 1e-7 for the
//! full study.

use tamsi::bench::{convergence_study, ConvergenceSettings};
use tamsi::system::PlanarGripper;

fn main() {
    let reference_step = std::env::args().nth(1).map_or(1e-6, |s| s.parse().expect("a step size"));
    let gripper = PlanarGripper::default();
    let settings = ConvergenceSettings { reference_step, ..ConvergenceSettings::for_gripper(&gripper) };
    let steps = [3e-3, 1e-3, 3e-4, 1e-4];
    let study = convergence_study(&gripper, &steps, &settings).expect("reference run");
    println!("reference step {reference_step:.0e} s over {} s", settings.horizon);
    println!("{:>10} {:>16} {:>16}", "h [s]", "translational", "rotational");
    for r in &study.records {
        println!("{:>10.0e} {:>16.4e} {:>16.4e}", r.h, r.err_translational, r.err_rotational);
    }
    if let (Some(t), Some(r)) = (study.translational_fit, study.rotational_fit) {
        println!("slopes: translational {:.3}, rotational {:.3}", t.slope, r.slope);
    }
}
