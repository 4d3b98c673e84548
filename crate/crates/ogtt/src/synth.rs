//! Synthetic OGTT patients and validation experiments.
//!
//! Real patient curves are not distributed with this crate, so validation
//! rests on synthetic data: parameter-recovery experiments (how often do
//! central 95% posterior intervals cover a known truth) and
//! simulation-based calibration (truths drawn from the prior must yield
//! uniform posterior rank statistics when the whole pipeline is correct).
//!
//! Replicates are independent; each owns a PRNG stream derived from the
//! master seed and its index, so runs are reproducible regardless of how
//! the replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analysis::summarize_column;
use crate::error::{Error, Result};
use crate::inference::{ObservationSet, PriorSpec};
use crate::model::{self, FixedSettings, PatientParams};
use crate::sampler::{self, FitSettings};

/// Standard OGTT measurement schedule (hr).
pub const DEFAULT_SCHEDULE: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

/// Noisy readings are clipped at this floor (mg/dL). With the default
/// noise level the clip never fires for realistic glucose values; the rule
/// exists for pathological configurations and every clip is counted.
pub const GLUCOSE_FLOOR: f64 = 1.0;

/// Number of evenly spaced posterior draws a truth is ranked against in
/// calibration runs. Spacing across the kept chain far exceeds the
/// autocorrelation time, so the ranked draws are effectively independent.
pub const SBC_RANK_DRAWS: usize = 99;

/// Synthetic fixture: "healthy" profile (normal insulin sensitivity).
/// theta1 has no reported reference value anywhere; 0.5 is this crate's
/// fixture convention.
pub fn healthy_truth() -> PatientParams {
    PatientParams {
        theta0: 2.0,
        theta1: 0.5,
        theta2: 0.5,
        g0: 100.0,
    }
}

/// Synthetic fixture: insulin-resistant profile (low theta0).
pub fn resistant_truth() -> PatientParams {
    PatientParams {
        theta0: 0.5,
        ..healthy_truth()
    }
}

/// A generated patient: the truth, the noisy observations, and the
/// noiseless curve kept for oracle checks.
#[derive(Debug, Clone)]
pub struct SynthPatient {
    pub truth: PatientParams,
    pub fs: FixedSettings,
    pub schedule: Vec<f64>,
    pub seed: u64,
    pub obs: ObservationSet,
    pub noiseless: Vec<f64>,
    /// Number of readings clipped at the floor.
    pub clipped: usize,
}

/// Generate observations `d_i = G_truth(t_i) + N(0, sigma)`, clipped at
/// [`GLUCOSE_FLOOR`]. Deterministic given the seed.
pub fn generate(
    truth: &PatientParams,
    fs: &FixedSettings,
    schedule: &[f64],
    seed: u64,
) -> Result<SynthPatient> {
    let noiseless = model::glucose_at(truth, fs, schedule)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clipped = 0usize;
    let records: Vec<(f64, f64)> = schedule
        .iter()
        .zip(&noiseless)
        .map(|(&t, &g)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let mut d = g + fs.sigma * z;
            if d < GLUCOSE_FLOOR {
                d = GLUCOSE_FLOOR;
                clipped += 1;
            }
            (t, d)
        })
        .collect();
    let obs = ObservationSet::new(records)?;
    Ok(SynthPatient {
        truth: *truth,
        fs: *fs,
        schedule: schedule.to_vec(),
        seed,
        obs,
        noiseless,
        clipped,
    })
}

/// One recovery replicate: interval coverage per parameter plus the bits
/// the experiment-level checks need.
#[derive(Debug, Clone, Copy)]
pub struct ReplicateOutcome {
    pub covered: [bool; 4],
    pub theta0_median: f64,
    pub posterior_sd: [f64; 4],
}

/// Coverage report over independent replicates with a fixed truth.
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    pub truth: PatientParams,
    pub outcomes: Vec<ReplicateOutcome>,
    /// Replicates aborted by sampler failure, reported separately.
    pub failures: usize,
}

impl RecoveryReport {
    /// Fraction of successful replicates whose central 95% interval covers
    /// the truth, per parameter index.
    pub fn coverage(&self, j: usize) -> f64 {
        let n = self.outcomes.len();
        if n == 0 {
            return f64::NAN;
        }
        self.outcomes.iter().filter(|o| o.covered[j]).count() as f64 / n as f64
    }

    pub fn mean_posterior_sd(&self, j: usize) -> f64 {
        let n = self.outcomes.len();
        self.outcomes.iter().map(|o| o.posterior_sd[j]).sum::<f64>() / n as f64
    }
}

fn fit_replicate(
    truth: &PatientParams,
    fs: &FixedSettings,
    schedule: &[f64],
    rep_seed: u64,
    settings: &FitSettings,
) -> Result<ReplicateOutcome> {
    let patient = generate(truth, fs, schedule, sampler::derive_seed(rep_seed, 10))?;
    let prior = PriorSpec::anchored_to(patient.obs.first_glucose())?;
    let rep_settings = FitSettings {
        seed: sampler::derive_seed(rep_seed, 11),
        ..*settings
    };
    let sample = sampler::fit(&patient.obs, fs, &prior, &rep_settings)?;
    let tv = truth.to_vector();
    let mut covered = [false; 4];
    let mut posterior_sd = [0.0; 4];
    let mut theta0_median = 0.0;
    for j in 0..4 {
        let s = summarize_column(&sample.column(j));
        covered[j] = s.lo <= tv[j] && tv[j] <= s.hi;
        posterior_sd[j] = s.sd;
        if j == 0 {
            theta0_median = s.median;
        }
    }
    Ok(ReplicateOutcome {
        covered,
        theta0_median,
        posterior_sd,
    })
}

/// Repeatedly generate data from a fixed truth and refit, reporting how
/// often the central 95% posterior interval covers the truth.
pub fn recovery_experiment(
    truth: &PatientParams,
    fs: &FixedSettings,
    schedule: &[f64],
    n_replicates: usize,
    settings: &FitSettings,
) -> Result<RecoveryReport> {
    if n_replicates < 20 {
        return Err(Error::InvalidArgument(format!(
            "recovery needs >= 20 replicates, got {n_replicates}"
        )));
    }
    truth.validate()?;
    fs.validate()?;
    let results: Vec<Result<ReplicateOutcome>> = (0..n_replicates)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = sampler::derive_seed(settings.seed, 1000 + rep as u64);
            fit_replicate(truth, fs, schedule, rep_seed, settings)
        })
        .collect();
    let mut outcomes = Vec::with_capacity(n_replicates);
    let mut failures = 0usize;
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(_) => failures += 1,
        }
    }
    if outcomes.is_empty() {
        return Err(Error::InvalidArgument(
            "every recovery replicate failed".into(),
        ));
    }
    Ok(RecoveryReport {
        truth: *truth,
        outcomes,
        failures,
    })
}

/// Rank of a truth among evenly thinned posterior draws of one coordinate.
/// Ranks lie in `0..=n_thinned`.
pub fn posterior_rank(column: &[f64], truth: f64, n_thinned: usize) -> usize {
    let total = column.len();
    let m = n_thinned.min(total);
    (0..m)
        .map(|i| column[i * total / m])
        .filter(|&x| x < truth)
        .count()
}

/// Simulation-based calibration report. Ranks take values in
/// `0..=SBC_RANK_DRAWS`; `p_value[j]` is a chi-square uniformity test over
/// 20 equal-width rank bins.
#[derive(Debug, Clone)]
pub struct SbcReport {
    pub ranks: Vec<[usize; 4]>,
    pub n_rank_values: usize,
    pub n_bins: usize,
    pub chi_square: [f64; 4],
    pub p_value: [f64; 4],
    pub failures: usize,
}

impl SbcReport {
    pub fn histogram(&self, j: usize) -> Vec<usize> {
        let mut h = vec![0usize; self.n_bins];
        for r in &self.ranks {
            h[bin_of(r[j], self.n_rank_values, self.n_bins)] += 1;
        }
        h
    }
}

fn bin_of(rank: usize, n_rank_values: usize, n_bins: usize) -> usize {
    (rank * n_bins / n_rank_values).min(n_bins - 1)
}

/// Draw truths from the prior, simulate data, refit, and rank each truth
/// among its posterior draws. A correct pipeline yields uniform ranks.
pub fn sbc(
    prior: &PriorSpec,
    fs: &FixedSettings,
    schedule: &[f64],
    n_replicates: usize,
    settings: &FitSettings,
) -> Result<SbcReport> {
    sbc_impl(prior, fs, schedule, n_replicates, settings, 1.0)
}

/// Same experiment with the likelihood quadratic term deliberately
/// sign-flipped. Exists so the test suite can confirm that calibration
/// actually rejects a broken pipeline; never use for analysis.
#[doc(hidden)]
pub fn sbc_negative_control(
    prior: &PriorSpec,
    fs: &FixedSettings,
    schedule: &[f64],
    n_replicates: usize,
    settings: &FitSettings,
) -> Result<SbcReport> {
    sbc_impl(prior, fs, schedule, n_replicates, settings, -1.0)
}

fn sbc_impl(
    prior: &PriorSpec,
    fs: &FixedSettings,
    schedule: &[f64],
    n_replicates: usize,
    settings: &FitSettings,
    sign: f64,
) -> Result<SbcReport> {
    if n_replicates < 100 {
        return Err(Error::InvalidArgument(format!(
            "calibration needs >= 100 replicates, got {n_replicates}"
        )));
    }
    fs.validate()?;
    let results: Vec<Result<[usize; 4]>> = (0..n_replicates)
        .into_par_iter()
        .map(|rep| -> Result<[usize; 4]> {
            let rep_seed = sampler::derive_seed(settings.seed, 5000 + rep as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(sampler::derive_seed(rep_seed, 0));
            let truth_vec = prior.sample(&mut rng);
            let truth = PatientParams::from_vector(&truth_vec)?;
            let patient = generate(&truth, fs, schedule, sampler::derive_seed(rep_seed, 1))?;
            let rep_settings = FitSettings {
                seed: sampler::derive_seed(rep_seed, 2),
                ..*settings
            };
            // The same fixed prior generates the truth and fits the data;
            // re-anchoring to each dataset would break calibration.
            let sample = sampler::fit_signed(&patient.obs, fs, prior, &rep_settings, sign)?;
            let mut ranks = [0usize; 4];
            for (j, slot) in ranks.iter_mut().enumerate() {
                *slot = posterior_rank(&sample.column(j), truth_vec[j], SBC_RANK_DRAWS);
            }
            Ok(ranks)
        })
        .collect();

    let mut ranks = Vec::with_capacity(n_replicates);
    let mut failures = 0usize;
    for r in results {
        match r {
            Ok(v) => ranks.push(v),
            Err(_) => failures += 1,
        }
    }
    if ranks.len() < n_replicates / 2 {
        return Err(Error::InvalidArgument(format!(
            "{failures} of {n_replicates} calibration replicates failed"
        )));
    }

    let n_bins = 20usize;
    let n_rank_values = SBC_RANK_DRAWS + 1;
    let chi2 = ChiSquared::new((n_bins - 1) as f64).expect("positive dof");
    let mut chi_square = [0.0; 4];
    let mut p_value = [0.0; 4];
    for j in 0..4 {
        let mut counts = vec![0usize; n_bins];
        for r in &ranks {
            counts[bin_of(r[j], n_rank_values, n_bins)] += 1;
        }
        let expect = ranks.len() as f64 / n_bins as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expect;
                d * d / expect
            })
            .sum();
        chi_square[j] = stat;
        p_value[j] = 1.0 - chi2.cdf(stat);
    }
    Ok(SbcReport {
        ranks,
        n_rank_values,
        n_bins,
        chi_square,
        p_value,
        failures,
    })
}

/// Posterior-to-prior spread ratio for the glucagon sensitivity, fitted on
/// a patient whose curve never drops below the homeostasis threshold. In
/// that regime the data carry no information about theta1 and the ratio
/// should stay near one.
pub fn theta1_attenuation(
    fs: &FixedSettings,
    schedule: &[f64],
    seed: u64,
    settings: &FitSettings,
) -> Result<f64> {
    let truth = resistant_truth();
    let patient = generate(&truth, fs, schedule, seed)?;
    let prior = PriorSpec::anchored_to(patient.obs.first_glucose())?;
    let sample = sampler::fit(&patient.obs, fs, &prior, settings)?;
    let post_sd = summarize_column(&sample.column(1)).sd;
    Ok(post_sd / prior.theta1.sd())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_lands_on_the_curve() {
        let fs = FixedSettings {
            sigma: 0.0,
            ..FixedSettings::default()
        };
        let p = generate(&healthy_truth(), &fs, &DEFAULT_SCHEDULE, 1).unwrap();
        for ((_, d), g) in p.obs.records().iter().zip(&p.noiseless) {
            assert_eq!(d, g);
        }
        assert_eq!(p.clipped, 0);
    }

    #[test]
    fn generation_is_deterministic() {
        let fs = FixedSettings::default();
        let a = generate(&healthy_truth(), &fs, &DEFAULT_SCHEDULE, 42).unwrap();
        let b = generate(&healthy_truth(), &fs, &DEFAULT_SCHEDULE, 42).unwrap();
        assert_eq!(a.obs, b.obs);
        let c = generate(&healthy_truth(), &fs, &DEFAULT_SCHEDULE, 43).unwrap();
        assert_ne!(a.obs, c.obs);
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let fs = FixedSettings::default();
        let truth = healthy_truth();
        let n = 10_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for rep in 0..n {
            let p = generate(&truth, &fs, &DEFAULT_SCHEDULE, rep as u64).unwrap();
            for ((_, d), g) in p.obs.records().iter().zip(&p.noiseless) {
                let e = d - g;
                sum += e;
                sum_sq += e * e;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let var = sum_sq / count as f64 - mean * mean;
        let expected = fs.sigma * fs.sigma;
        assert!(
            (var - expected).abs() < 0.05 * expected,
            "noise variance {var} vs {expected}"
        );
    }

    #[test]
    fn clipping_fires_only_for_pathological_configs() {
        let fs = FixedSettings {
            sigma: 200.0,
            ..FixedSettings::default()
        };
        let mut any_clip = 0;
        for seed in 0..50 {
            any_clip += generate(&healthy_truth(), &fs, &DEFAULT_SCHEDULE, seed)
                .unwrap()
                .clipped;
        }
        assert!(any_clip > 0, "huge noise should hit the floor sometimes");
        for ((_, d), _) in generate(&healthy_truth(), &fs, &DEFAULT_SCHEDULE, 3)
            .unwrap()
            .obs
            .records()
            .iter()
            .zip(0..)
        {
            assert!(*d >= GLUCOSE_FLOOR);
        }
    }

    #[test]
    fn recovery_rejects_too_few_replicates() {
        let fs = FixedSettings::default();
        assert!(matches!(
            recovery_experiment(
                &healthy_truth(),
                &fs,
                &DEFAULT_SCHEDULE,
                5,
                &FitSettings::default()
            ),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn sbc_rejects_too_few_replicates() {
        let fs = FixedSettings::default();
        let prior = PriorSpec::anchored_to(100.0).unwrap();
        assert!(sbc(&prior, &fs, &DEFAULT_SCHEDULE, 10, &FitSettings::default()).is_err());
    }

    #[test]
    fn rank_bounds_and_edges() {
        let column: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(posterior_rank(&column, -1.0, 99), 0);
        assert_eq!(posterior_rank(&column, 2000.0, 99), 99);
        let mid = posterior_rank(&column, 500.0, 99);
        assert!((45..=55).contains(&mid), "mid rank {mid}");
    }

    #[test]
    fn rank_binning_covers_all_values() {
        for rank in 0..=99 {
            let b = bin_of(rank, 100, 20);
            assert!(b < 20);
        }
        assert_eq!(bin_of(0, 100, 20), 0);
        assert_eq!(bin_of(99, 100, 20), 19);
    }

    #[test]
    fn generate_fit_pipeline_is_deterministic() {
        let fs = FixedSettings::default();
        let truth = healthy_truth();
        let settings = FitSettings {
            n_iterations: 3_000,
            burn_in: 300,
            seed: 5,
        };
        let run = || {
            let patient = generate(&truth, &fs, &DEFAULT_SCHEDULE, 9).unwrap();
            let prior = PriorSpec::anchored_to(patient.obs.first_glucose()).unwrap();
            sampler::fit(&patient.obs, &fs, &prior, &settings).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.logpost, b.logpost);
    }

    #[test]
    fn noise_free_dense_schedule_concentrates_theta0() {
        // Identifiability: with no noise in the data generation and a dense
        // schedule, the theta0 posterior should be far tighter than the
        // prior. (The likelihood still uses sigma = 5.)
        let fs_gen = FixedSettings {
            sigma: 0.0,
            ..FixedSettings::default()
        };
        let fs_fit = FixedSettings::default();
        let schedule: Vec<f64> = (0..=12).map(|k| k as f64 * 0.25).collect();
        let truth = healthy_truth();
        let patient = generate(&truth, &fs_gen, &schedule, 31).unwrap();
        let prior = PriorSpec::anchored_to(patient.obs.first_glucose()).unwrap();
        let settings = FitSettings {
            n_iterations: 40_000,
            burn_in: 4_000,
            seed: 17,
        };
        let sample = sampler::fit(&patient.obs, &fs_fit, &prior, &settings).unwrap();
        let post_sd = summarize_column(&sample.column(0)).sd;
        let ratio = post_sd / prior.theta0.sd();
        assert!(ratio < 0.10, "theta0 posterior/prior sd ratio {ratio}");
    }
}
