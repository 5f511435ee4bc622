//! Runs the randomized derivative and line-search checks.
//!
//! `cargo run --release --example jacobian_check -- [seed] [perturbation]`
//!
//! A nonzero perturbation corrupts the analytic Jacobians to show the checks
//! notice.

use tamsi::checks::{run_all, CheckOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    let perturb_jacobian = args.next().map_or(0.0, |s| s.parse().expect("perturbation must be a number"));
    let options = CheckOptions { seed, perturb_jacobian, ..Default::default() };
    let outcomes = run_all(&options);
    for outcome in &outcomes {
        println!("{outcome}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
}
