//! Simulation-based calibration of the full pipeline: truths drawn from
//! the prior must produce uniform posterior rank statistics.
//!
//! ```bash
//! cargo run --release --example sbc
//! ```
//!
//! 100 replicates is the minimum for the rank histogram; expect a couple
//! of minutes without `--release`.

use ogtt::inference::PriorSpec;
use ogtt::model::FixedSettings;
use ogtt::sampler::FitSettings;
use ogtt::synth;

fn main() -> ogtt::Result<()> {
    let fs = FixedSettings::default();
    let prior = PriorSpec::anchored_to(fs.gb)?;
    let settings = FitSettings {
        n_iterations: 20_000,
        burn_in: 2_000,
        seed: 29,
    };
    let n = 100;
    println!("{n} calibration replicates, {} iterations each", settings.n_iterations);
    let report = synth::sbc(&prior, &fs, &synth::DEFAULT_SCHEDULE, n, &settings)?;

    for (j, name) in ["theta0", "theta1", "theta2", "g0"].iter().enumerate() {
        println!(
            "\n{name}: chi-square {:.1} over {} bins, p = {:.3}",
            report.chi_square[j], report.n_bins, report.p_value[j]
        );
        let hist = report.histogram(j);
        let max = hist.iter().copied().max().unwrap_or(1).max(1);
        for (b, count) in hist.iter().enumerate() {
            let bar = "#".repeat(count * 40 / max);
            println!("  bin {b:>2} {count:>3} {bar}");
        }
    }
    if report.failures > 0 {
        println!("\nfailures: {}", report.failures);
    }
    Ok(())
}
