//! Tabulates the contact laws: regularized friction against slip speed and
//! the normal force against penetration and its rate.
//!
//! `cargo run --release --example contact_forces`

use nalgebra::Vector3;
use tamsi::contact::{friction_force, normal_force, normal_force_of_vn, ContactParameters};

fn main() {
    let params = ContactParameters { stiffness: 1e4, damping: 0.5, mu: 0.5, stiction_velocity: 1e-4 };
    let pi = 10.0;

    println!("friction at normal force {pi} N, v_s = {} m/s", params.stiction_velocity);
    println!("{:>12} {:>12} {:>12}", "slip [m/s]", "|f_t| [N]", "mu_eff");
    for slip in [0.0, 2.5e-5, 5e-5, 1e-4, 2e-4, 1e-3, 1e-1] {
        let f = friction_force(&Vector3::new(slip, 0.0, 0.0), pi, &params);
        println!("{slip:>12.2e} {:>12.4} {:>12.4}", f.norm(), f.norm() / pi);
    }

    println!("\nnormal force, k = {} N/m, d = {} s/m", params.stiffness, params.damping);
    println!("{:>12} {:>14} {:>12}", "delta [m]", "rate [m/s]", "pi [N]");
    for (delta, rate) in [(-1e-3, 0.0), (1e-3, 0.0), (1e-3, 1.0), (1e-3, -1.0), (1e-3, -3.0)] {
        println!("{delta:>12.1e} {rate:>14.1} {:>12.4}", normal_force(delta, rate, &params));
    }

    // The implicit form used inside a step: penetration is predicted from the
    // separation velocity, so the force falls as the bodies separate.
    let (delta0, h) = (1e-3, 1e-3);
    println!("\nnormal force against separation velocity, delta0 = {delta0} m, h = {h} s");
    println!("{:>12} {:>12} {:>14}", "v_n [m/s]", "pi [N]", "dpi/dv_n");
    for v_n in [-0.5, 0.0, 0.5, 1.0, 1.5, 2.5] {
        let (pi, slope) = normal_force_of_vn(delta0, v_n, h, &params);
        println!("{v_n:>12.2} {pi:>12.4} {slope:>14.4}");
    }
}
