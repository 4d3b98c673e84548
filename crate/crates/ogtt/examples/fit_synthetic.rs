//! Generate a noisy synthetic patient, fit the model, and print the
//! posterior summary next to the generating truth.
//!
//! ```bash
//! cargo run --example fit_synthetic
//! ```

use ogtt::analysis::{summarize, Theta0Cutoffs};
use ogtt::inference::PriorSpec;
use ogtt::model::FixedSettings;
use ogtt::sampler::{fit, FitSettings};
use ogtt::synth;

fn main() -> ogtt::Result<()> {
    let fs = FixedSettings::default();
    let truth = synth::healthy_truth();
    let patient = synth::generate(&truth, &fs, &synth::DEFAULT_SCHEDULE, 7)?;
    println!("observations (t, d):");
    for (t, d) in patient.obs.records() {
        println!("  {t:>4.1} h  {d:7.1} mg/dL");
    }

    let prior = PriorSpec::anchored_to(patient.obs.first_glucose())?;
    let settings = FitSettings {
        n_iterations: 30_000,
        burn_in: 3_000,
        seed: 11,
    };
    println!("\nfitting with seed {} ...", settings.seed);
    let sample = fit(&patient.obs, &fs, &prior, &settings)?;
    println!(
        "kept {} draws, acceptance {:.3}, IAT {:?}",
        sample.n_kept(),
        sample.acceptance_rate,
        sample.iat.map(|x| (x * 10.0).round() / 10.0)
    );

    let summary = summarize(&sample, &fs, &Theta0Cutoffs::default(), 120.0, 99)?;
    let tv = truth.to_vector();
    println!("\n{:<8} {:>8} {:>8} {:>8} {:>18}", "param", "truth", "median", "sd", "95% interval");
    for (j, (name, p)) in [
        ("theta0", &summary.theta0),
        ("theta1", &summary.theta1),
        ("theta2", &summary.theta2),
        ("g0", &summary.g0),
    ]
    .into_iter()
    .enumerate()
    {
        println!(
            "{name:<8} {:>8.2} {:>8.2} {:>8.2} [{:>7.2}, {:>7.2}]",
            tv[j], p.median, p.sd, p.lo, p.hi
        );
    }
    println!(
        "\ntheta0 flag: {} | P[G(3h) > {:.0}] = {:.3}",
        summary.theta0_flag, summary.g3h.threshold, summary.g3h.p_above
    );
    Ok(())
}
