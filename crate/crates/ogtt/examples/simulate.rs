//! Forward-simulate the glucose dynamics for two synthetic profiles and
//! print the curves side by side.
//!
//! ```bash
//! cargo run --example simulate
//! ```

use ogtt::model::{simulate, FixedSettings};
use ogtt::synth;

fn main() -> ogtt::Result<()> {
    let fs = FixedSettings::default();
    println!(
        "fixed settings: a = {} h, b = {} h, c = {:.4} h, gb = {} mg/dL, v0 = {} mg/dL",
        fs.a, fs.b, fs.c, fs.gb, fs.v0
    );

    let healthy = synth::healthy_truth();
    let resistant = synth::resistant_truth();
    let th = simulate(&healthy, &fs, 3.0, 0.005)?;
    let tr = simulate(&resistant, &fs, 3.0, 0.005)?;

    println!();
    println!(
        "{:>8} {:>12} {:>12}   (theta0 = {} vs {})",
        "t (hr)", "healthy G", "resistant G", healthy.theta0, resistant.theta0
    );
    for k in (0..th.len()).step_by(50) {
        println!(
            "{:>8.2} {:>12.1} {:>12.1}",
            th.times[k], th.states[k].g, tr.states[k].g
        );
    }

    let peak = |traj: &ogtt::model::Trajectory| {
        traj.states
            .iter()
            .map(|s| s.g)
            .fold(f64::MIN, f64::max)
    };
    println!();
    println!(
        "peaks: healthy {:.1} mg/dL, resistant {:.1} mg/dL",
        peak(&th),
        peak(&tr)
    );
    println!(
        "at 3 h: healthy {:.1} mg/dL, resistant {:.1} mg/dL (threshold 120)",
        th.states.last().unwrap().g,
        tr.states.last().unwrap().g
    );
    Ok(())
}
