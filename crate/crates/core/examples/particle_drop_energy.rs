//! Drops a stiff particle onto the ground at a step that is too large for an
//! explicit normal force. The two-way coupled scheme dissipates; the one-way
//! scheme pumps energy into every bounce.
//!
//! `cargo run --release --example particle_drop_energy`

use tamsi::solver::{Coupling, FrozenScheme, SolverConfig};
use tamsi::system::{ParticleDrop, SystemModel};

fn main() {
    let model = ParticleDrop::default();
    let h = 1e-2;
    let e0 = model.mechanical_energy(&model.initial_state());
    println!("k/m = {:.0e} 1/s², h = {h} s, initial energy {e0:.4} J", model.stiffness / model.mass);

    for (label, coupling) in [("two-way", Coupling::TwoWay), ("one-way", Coupling::OneWay)] {
        let mut scheme = FrozenScheme::new(coupling, SolverConfig::with_step(h));
        let mut state = model.initial_state();
        let mut peak = e0;
        println!("\n{label}");
        println!("{:>8} {:>12} {:>14} {:>14}", "t [s]", "z [m]", "energy [J]", "peak [J]");
        for k in 1..=1000 {
            state = match scheme.step(&model, &state, h) {
                Ok(step) => step.state,
                Err(e) => {
                    println!("stopped: {e}");
                    break;
                }
            };
            let energy = model.mechanical_energy(&state);
            peak = peak.max(energy);
            if k % 100 == 0 {
                println!("{:>8.2} {:>12.4e} {energy:>14.4e} {peak:>14.4e}", state.t, state.q[0]);
            }
        }
    }
}
