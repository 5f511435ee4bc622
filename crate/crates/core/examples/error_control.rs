//! Error-controlled implicit Euler on the box: tighter accuracy buys lower
//! error at higher cost.
//!
//! `cargo run --release --example error_control`

use tamsi::bench::{work_precision_sweep, MethodSpec, SweepSettings};
use tamsi::solver::{IntegratorKind, JacobianMode};
use tamsi::system::BoxSlide;

fn main() {
    let model = BoxSlide::default();
    let methods = [
        MethodSpec::new(IntegratorKind::ImplicitEulerErrorControlled, JacobianMode::Full, true),
        MethodSpec::new(IntegratorKind::ImplicitEulerErrorControlled, JacobianMode::Quasi, true),
    ];
    let accuracies = [1e-2, 1e-3, 1e-4, 1e-5];
    let records = work_precision_sweep(&model, &methods, &accuracies, &SweepSettings::default());
    println!("{:>14} {:>8} {:>12} {:>10} {:>10}", "method", "a", "error", "f_evals", "steps");
    for r in &records {
        println!(
            "{:>14} {:>8.0e} {:>12.3e} {:>10} {:>10}",
            r.method.to_string(),
            r.knob,
            r.error,
            r.work.f_evals,
            r.work.steps
        );
    }
}
