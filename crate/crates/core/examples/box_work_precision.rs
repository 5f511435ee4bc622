//! Work-precision data for implicit Euler on the sliding box, with and
//! without the line search.
//!
//! `cargo run --release --example box_work_precision -- [out.csv]`

use std::fs::File;

use tamsi::bench::{work_precision_sweep, write_work_precision_csv, MethodSpec, SweepSettings};
use tamsi::system::BoxSlide;

fn main() {
    let model = BoxSlide::default();
    let methods: Vec<MethodSpec> =
        MethodSpec::implicit_euler_grid().into_iter().filter(|m| !m.integrator.is_error_controlled()).collect();
    let steps = [1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4];
    let settings = SweepSettings::default();
    let records = work_precision_sweep(&model, &methods, &steps, &settings);

    println!("{:>14} {:>8} {:>12} {:>10} {:>8}", "method", "h [s]", "error", "f_evals", "shrinks");
    for r in &records {
        let status = if r.status.is_ok() { String::new() } else { "  failed".into() };
        println!(
            "{:>14} {:>8.0e} {:>12.3e} {:>10} {:>8}{status}",
            r.method.to_string(),
            r.knob,
            r.error,
            r.work.f_evals,
            r.work.step_shrinks
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        write_work_precision_csv(File::create(&path).expect("output file"), &records).expect("write");
        println!("wrote {path}");
    }
}
