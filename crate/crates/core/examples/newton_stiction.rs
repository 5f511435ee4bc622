//! Newton's method on the sliding-to-sticking transition of the box, with and
//! without the tangential line search.
//!
//! Run with `cargo run --release --example newton_stiction`.

use tamsi::solver::{ImplicitEuler, NewtonTrace, SolverConfig};
use tamsi::system::{BoxSlide, SystemModel};

fn main() {
    let model = BoxSlide::default();
    let h = 1e-2;
    let config = SolverConfig { h, divergence_check: false, ..Default::default() };

    // Slide up to the step in which the box comes to rest.
    let mut state = model.initial_state();
    let mut ie = ImplicitEuler::fixed_step(config);
    while state.t < 0.15 - 1e-9 {
        state = ie.step(&model, &state, h, None).expect("sliding phase converges").state;
    }
    println!("t = {:.3} s, v = {:+.6e} m/s", state.t, state.v[0]);

    for tals in [false, true] {
        let config = SolverConfig { tals_enabled: tals, ..config };
        let mut trace = NewtonTrace::default();
        let outcome = ImplicitEuler::fixed_step(config).step(&model, &state, h, Some(&mut trace));
        println!("\nTALS {}: {}", if tals { "on" } else { "off" }, match &outcome {
            Ok(_) => "converged".to_string(),
            Err(e) => e.to_string(),
        });
        println!("{:>4} {:>16} {:>14} {:>8}", "k", "v_k [m/s]", "|r_k|", "alpha");
        for (k, (x, r)) in trace.iterates.iter().zip(&trace.residual_norms).enumerate() {
            let alpha = trace.alphas.get(k).copied().unwrap_or(f64::NAN);
            println!("{k:>4} {:>+16.8e} {r:>14.6e} {alpha:>8.4}", x[1]);
        }
    }
}
