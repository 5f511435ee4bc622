//! A box pushed by a constant force below the friction limit creeps at the
//! speed where regularized friction balances the push. Every integrator
//! should settle there.
//!
//! `cargo run --release --example steady_slip`

use tamsi::solver::{IntegratorKind, SolverConfig};
use tamsi::system::{BoxSlide, SystemModel};

fn main() {
    let force = 2.0;
    let model = BoxSlide::constant_force(force);
    let expected = model.steady_slip_velocity(force);
    println!("push {force} N, weight {:.3} N, expected creep {expected:.6e} m/s\n", model.weight());
    println!("{:>14} {:>10} {:>16} {:>10} {:>10}", "integrator", "h [s]", "v(0.05 s)", "rel err", "f_evals");
    for kind in IntegratorKind::ALL {
        // The explicit scheme needs h below 2·m·v_s/(μ·W) ≈ 2e-5 s.
        let h = if kind == IntegratorKind::Rk3 { 1e-5 } else { 1e-4 };
        let config = SolverConfig { h, accuracy: 1e-6, ..Default::default() };
        let mut integrator = kind.build(config);
        let step = integrator.advance(&model, &model.initial_state(), 0.05).expect("creep run");
        let v = step.state.v[0];
        println!(
            "{:>14} {h:>10.0e} {v:>16.9e} {:>10.1e} {:>10}",
            kind.name(),
            (v - expected).abs() / expected,
            integrator.work().f_evals
        );
    }
}
