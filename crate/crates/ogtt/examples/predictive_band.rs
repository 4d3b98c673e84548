//! Fit an insulin-resistant synthetic patient and write the full output
//! set: posterior draws, the predictive band, the text summary, and the
//! band plot.
//!
//! ```bash
//! cargo run --example predictive_band
//! ```

use ogtt::analysis::{predictive_band, summarize, Theta0Cutoffs};
use ogtt::inference::PriorSpec;
use ogtt::model::FixedSettings;
use ogtt::sampler::{fit, FitSettings};
use ogtt::synth;

fn main() -> ogtt::Result<()> {
    let fs = FixedSettings::default();
    let truth = synth::resistant_truth();
    let patient = synth::generate(&truth, &fs, &synth::DEFAULT_SCHEDULE, 3)?;
    let prior = PriorSpec::anchored_to(patient.obs.first_glucose())?;
    let settings = FitSettings {
        n_iterations: 30_000,
        burn_in: 3_000,
        seed: 23,
    };
    let sample = fit(&patient.obs, &fs, &prior, &settings)?;

    let band = predictive_band(&sample, &fs, 3.0, 0.01, 300)?;
    println!("{:>6} {:>8} {:>8} {:>8} {:>8} {:>8}", "t", "q05", "q25", "q50", "q75", "q95");
    for k in (0..band.times.len()).step_by(30) {
        println!(
            "{:>6.2} {:>8.1} {:>8.1} {:>8.1} {:>8.1} {:>8.1}",
            band.times[k], band.q05[k], band.q25[k], band.q50[k], band.q75[k], band.q95[k]
        );
    }

    let summary = summarize(&sample, &fs, &Theta0Cutoffs::default(), 120.0, 31)?;
    println!(
        "\nG(3h): predictive mean {:.1} mg/dL, 95% [{:.1}, {:.1}], P[> {:.0}] = {:.3}",
        summary.g3h.mean, summary.g3h.lo, summary.g3h.hi, summary.g3h.threshold, summary.g3h.p_above
    );
    println!("theta0 flag: {}", summary.theta0_flag);

    let out = std::path::Path::new("ogtt-out/resistant-example");
    let paths = ogtt::io::write_outputs(&sample, &band, &summary, &patient.obs, out)?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}
